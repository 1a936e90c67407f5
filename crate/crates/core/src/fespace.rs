//! P1 and P1-bubble finite element spaces on a [`Mesh`].
//!
//! The mass-lumped semi-inner product is `(f, g)_h = sum_i f_i g_i m_i`,
//! i.e. the exact integral of the nodal interpolant `I_h(f g)`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature;

/// Integral of the bubble `27 l0 l1 l2` over an element, divided by its area.
pub const BUBBLE_MEAN: f64 = 9.0 / 20.0;

/// Nodal values of a continuous piecewise-linear function.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Field(pub Vec<f64>);

/// One value per element.
#[derive(Debug, Clone, PartialEq)]
pub struct P0Field(pub Vec<f64>);

/// Mini-element velocity: P1 nodal part plus one bubble coefficient per
/// element and component.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub nodal: Vec<[f64; 2]>,
    pub bubble: Vec<[f64; 2]>,
}

impl P1Field {
    pub fn zeros(mesh: &Mesh) -> Self {
        P1Field(vec![0.0; mesh.num_nodes()])
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        P1Field(vec![c; mesh.num_nodes()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> P1Field {
        P1Field(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Values of the field at the vertices of element `e`.
    pub fn on_element(&self, mesh: &Mesh, e: usize) -> [f64; 3] {
        mesh.element(e).map(|v| self.0[v])
    }

    /// Value of the linear interpolant at barycentric point `bary` of `e`.
    pub fn eval(&self, mesh: &Mesh, e: usize, bary: [f64; 3]) -> f64 {
        let v = self.on_element(mesh, e);
        v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2]
    }
}

impl Index<usize> for P1Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for P1Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl VelocityField {
    pub fn zeros(mesh: &Mesh) -> Self {
        VelocityField {
            nodal: vec![[0.0; 2]; mesh.num_nodes()],
            bubble: vec![[0.0; 2]; mesh.num_elements()],
        }
    }

    /// Nodal interpolant of `f` with zero bubble part.
    pub fn interpolate(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        VelocityField {
            nodal: mesh.nodes().iter().map(|&x| f(x)).collect(),
            bubble: vec![[0.0; 2]; mesh.num_elements()],
        }
    }

    /// Velocity at barycentric point `bary` of element `e`.
    pub fn eval(&self, mesh: &Mesh, e: usize, bary: [f64; 3]) -> [f64; 2] {
        let tri = mesh.element(e);
        let b = bubble_value(bary);
        let mut u = [0.0; 2];
        for c in 0..2 {
            u[c] = tri
                .iter()
                .zip(bary)
                .map(|(&v, l)| self.nodal[v][c] * l)
                .sum::<f64>()
                + b * self.bubble[e][c];
        }
        u
    }

    /// Velocity gradient `[[du0/dx, du0/dy], [du1/dx, du1/dy]]` at `bary`.
    pub fn grad(&self, mesh: &Mesh, e: usize, bary: [f64; 3]) -> [[f64; 2]; 2] {
        let tri = mesh.element(e);
        let gl = mesh.grad_lambda(e);
        let gb = bubble_grad(gl, bary);
        let mut g = [[0.0; 2]; 2];
        for c in 0..2 {
            for d in 0..2 {
                g[c][d] = (0..3).map(|a| self.nodal[tri[a]][c] * gl[a][d]).sum::<f64>()
                    + self.bubble[e][c] * gb[d];
            }
        }
        g
    }

    /// Exact integral of the velocity over element `e`.
    pub fn element_integral(&self, mesh: &Mesh, e: usize) -> [f64; 2] {
        let tri = mesh.element(e);
        let area = mesh.area(e);
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let mean = (self.nodal[tri[0]][c] + self.nodal[tri[1]][c] + self.nodal[tri[2]][c]) / 3.0;
            *o = area * (mean + BUBBLE_MEAN * self.bubble[e][c]);
        }
        out
    }
}

/// Cubic bubble `27 l0 l1 l2`, equal to 1 at the barycenter.
pub fn bubble_value(bary: [f64; 3]) -> f64 {
    27.0 * bary[0] * bary[1] * bary[2]
}

/// Gradient of the bubble on an element with barycentric gradients `gl`.
pub fn bubble_grad(gl: &[[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    let [l0, l1, l2] = bary;
    let mut g = [0.0; 2];
    for (d, gd) in g.iter_mut().enumerate() {
        *gd = 27.0 * (gl[0][d] * l1 * l2 + gl[1][d] * l0 * l2 + gl[2][d] * l0 * l1);
    }
    g
}

/// Nodal P1 interpolant of a pointwise function.
pub fn interp_nodal(f: impl Fn([f64; 2]) -> f64, mesh: &Mesh) -> P1Field {
    P1Field(mesh.nodes().iter().map(|&x| f(x)).collect())
}

/// Mass-lumped inner product `(f, g)_h`.
pub fn lumped_inner(mesh: &Mesh, f: &P1Field, g: &P1Field) -> Result<f64> {
    let n = mesh.num_nodes();
    if f.len() != n || g.len() != n {
        return Err(Error::invalid(format!(
            "field lengths {} and {} do not match node count {n}",
            f.len(),
            g.len()
        )));
    }
    Ok(f.0
        .iter()
        .zip(&g.0)
        .zip(mesh.lumped_mass())
        .map(|((a, b), m)| a * b * m)
        .sum())
}

/// Lumped integral `int I_h(f)`.
pub fn lumped_integral(mesh: &Mesh, f: &P1Field) -> f64 {
    f.0.iter().zip(mesh.lumped_mass()).map(|(a, m)| a * m).sum()
}

/// Element averages of a P1 field (the exact P0 projection).
pub fn p0_project(mesh: &Mesh, phi: &P1Field) -> P0Field {
    P0Field(
        mesh.elements()
            .iter()
            .map(|tri| (phi[tri[0]] + phi[tri[1]] + phi[tri[2]]) / 3.0)
            .collect(),
    )
}

/// Constant gradient of a P1 field on element `e`.
pub fn p1_gradient(mesh: &Mesh, phi: &P1Field, e: usize) -> [f64; 2] {
    let tri = mesh.element(e);
    let gl = mesh.grad_lambda(e);
    let mut g = [0.0; 2];
    for (a, &v) in tri.iter().enumerate() {
        g[0] += phi[v] * gl[a][0];
        g[1] += phi[v] * gl[a][1];
    }
    g
}

/// Consistent L2 inner product of two P1 fields.
pub fn l2_inner(mesh: &Mesh, f: &P1Field, g: &P1Field) -> f64 {
    let mut s = 0.0;
    for (e, tri) in mesh.elements().iter().enumerate() {
        let a = mesh.area(e);
        let fv = tri.map(|v| f[v]);
        let gv = tri.map(|v| g[v]);
        // local mass matrix area/12 * (1 + delta_ij)
        let fs: f64 = fv.iter().sum();
        let gs: f64 = gv.iter().sum();
        let diag: f64 = fv.iter().zip(&gv).map(|(x, y)| x * y).sum();
        s += a / 12.0 * (fs * gs + diag);
    }
    s
}

pub fn l2_norm(mesh: &Mesh, f: &P1Field) -> f64 {
    l2_inner(mesh, f, f).max(0.0).sqrt()
}

/// `int |grad f|^2` for a P1 field.
pub fn grad_sq(mesh: &Mesh, f: &P1Field) -> f64 {
    (0..mesh.num_elements())
        .map(|e| {
            let g = p1_gradient(mesh, f, e);
            mesh.area(e) * (g[0] * g[0] + g[1] * g[1])
        })
        .sum()
}

/// `int grad f . grad g` for P1 fields.
pub fn grad_inner(mesh: &Mesh, f: &P1Field, g: &P1Field) -> f64 {
    (0..mesh.num_elements())
        .map(|e| {
            let a = p1_gradient(mesh, f, e);
            let b = p1_gradient(mesh, g, e);
            mesh.area(e) * (a[0] * b[0] + a[1] * b[1])
        })
        .sum()
}

/// Full H1 norm `sqrt(||f||^2 + ||grad f||^2)` of a P1 field.
pub fn h1_norm(mesh: &Mesh, f: &P1Field) -> f64 {
    (l2_inner(mesh, f, f) + grad_sq(mesh, f)).max(0.0).sqrt()
}

/// `int |u|^2` including the bubble part, exact.
pub fn velocity_l2_sq(mesh: &Mesh, u: &VelocityField) -> f64 {
    let rule = quadrature::degree8();
    let mut s = 0.0;
    for e in 0..mesh.num_elements() {
        let a = mesh.area(e);
        for q in rule {
            let v = u.eval(mesh, e, q.bary);
            s += a * q.weight * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    s
}

/// `int |grad u|^2` including the bubble part, exact.
pub fn velocity_grad_sq(mesh: &Mesh, u: &VelocityField) -> f64 {
    let rule = quadrature::degree8();
    let mut s = 0.0;
    for e in 0..mesh.num_elements() {
        let a = mesh.area(e);
        for q in rule {
            let g = u.grad(mesh, e, q.bary);
            s += a * q.weight * (g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2));
        }
    }
    s
}

/// Componentwise difference of two velocity fields.
pub fn velocity_diff(a: &VelocityField, b: &VelocityField) -> VelocityField {
    let sub = |x: &[[f64; 2]], y: &[[f64; 2]]| -> Vec<[f64; 2]> {
        x.iter().zip(y).map(|(p, q)| [p[0] - q[0], p[1] - q[1]]).collect()
    };
    VelocityField {
        nodal: sub(&a.nodal, &b.nodal),
        bubble: sub(&a.bubble, &b.bubble),
    }
}

pub fn p1_diff(a: &P1Field, b: &P1Field) -> P1Field {
    P1Field(a.0.iter().zip(&b.0).map(|(x, y)| x - y).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn interpolation_examples() {
        let m = Mesh::structured(4).unwrap();
        let one = interp_nodal(|_| 1.0, &m);
        assert!(one.0.iter().all(|&v| v == 1.0));
        let x = interp_nodal(|p| p[0], &m);
        for (i, p) in m.nodes().iter().enumerate() {
            assert_eq!(x[i], p[0]);
        }
        let phi0 = |p: [f64; 2]| {
            use std::f64::consts::PI;
            0.5 * ((5.0 * PI * p[0]).cos() * (3.0 * PI * p[1] + PI / 2.0).sin() + 1.0)
        };
        let f = interp_nodal(phi0, &m);
        assert!((f[m.node_index(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lumped_inner_examples() {
        let m = Mesh::structured(4).unwrap();
        let one = P1Field::constant(&m, 1.0);
        let x = interp_nodal(|p| p[0], &m);
        assert!((lumped_inner(&m, &one, &one).unwrap() - 1.0).abs() < 1e-14);
        assert!((lumped_inner(&m, &x, &one).unwrap() - 0.5).abs() < 1e-14);
        // independent oracle: per-element lumped quadrature (area/3 per vertex)
        let mut oracle = 0.0;
        for (e, tri) in m.elements().iter().enumerate() {
            for &v in tri {
                oracle += m.area(e) / 3.0 * m.node(v)[0].powi(2);
            }
        }
        let direct = lumped_inner(&m, &x, &x).unwrap();
        assert!((direct - oracle).abs() < 1e-14);
    }

    #[test]
    fn lumped_inner_length_mismatch() {
        let m = Mesh::structured(2).unwrap();
        let a = P1Field(vec![0.0; 3]);
        let b = P1Field::zeros(&m);
        assert!(matches!(lumped_inner(&m, &a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn p0_projection() {
        let m = Mesh::structured(3).unwrap();
        let c = P1Field::constant(&m, 0.7);
        assert!(p0_project(&m, &c).0.iter().all(|&v| (v - 0.7).abs() < 1e-15));

        let m1 = Mesh::structured(1).unwrap();
        let tri = m1.element(0);
        let mut f = P1Field::zeros(&m1);
        f[tri[0]] = 0.0;
        f[tri[1]] = 1.0;
        f[tri[2]] = 2.0;
        assert_eq!(p0_project(&m1, &f).0[0], 1.0);

        // edge-midpoint rule is exact for linear functions: oracle for random fields
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = P1Field((0..m.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let p0 = p0_project(&m, &f);
        for e in 0..m.num_elements() {
            let mids = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
            let avg: f64 = mids.iter().map(|&b| f.eval(&m, e, b)).sum::<f64>() / 3.0;
            assert!((p0.0[e] - avg).abs() < 1e-15);
        }
    }

    #[test]
    fn gradients() {
        let m = Mesh::structured(5).unwrap();
        let f = interp_nodal(|p| 0.3 + 2.0 * p[0] - 1.5 * p[1], &m);
        for e in 0..m.num_elements() {
            let g = p1_gradient(&m, &f, e);
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 1.5).abs() < 1e-12);
        }
        let c = P1Field::constant(&m, 4.0);
        for e in 0..m.num_elements() {
            let g = p1_gradient(&m, &c, e);
            assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
        }
        // x*y vanishes on the three vertices (0,0), (h,0), (0,h)
        let xy = interp_nodal(|p| p[0] * p[1], &m);
        assert_eq!(p1_gradient(&m, &xy, 0), [0.0, 0.0]);
        // sum_e area * grad I_h(x) = (1, 0)
        let x = interp_nodal(|p| p[0], &m);
        let mut s = [0.0; 2];
        for e in 0..m.num_elements() {
            let g = p1_gradient(&m, &x, e);
            s[0] += m.area(e) * g[0];
            s[1] += m.area(e) * g[1];
        }
        assert!((s[0] - 1.0).abs() < 1e-13 && s[1].abs() < 1e-13);
    }

    #[test]
    fn bubble_shape() {
        assert!((bubble_value([1.0 / 3.0; 3]) - 1.0).abs() < 1e-15);
        for mid in [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]] {
            assert_eq!(bubble_value(mid), 0.0);
        }
        let rule = quadrature::degree8();
        let mean: f64 = rule.iter().map(|q| q.weight * bubble_value(q.bary)).sum();
        assert!((mean - BUBBLE_MEAN).abs() < 1e-14);
    }

    #[test]
    fn velocity_integral_matches_quadrature() {
        let m = Mesh::structured(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut u = VelocityField::zeros(&m);
        for v in u.nodal.iter_mut().chain(u.bubble.iter_mut()) {
            *v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        }
        for e in 0..m.num_elements() {
            let exact = u.element_integral(&m, e);
            let mut q = [0.0; 2];
            for p in quadrature::degree8() {
                let v = u.eval(&m, e, p.bary);
                q[0] += m.area(e) * p.weight * v[0];
                q[1] += m.area(e) * p.weight * v[1];
            }
            assert!((exact[0] - q[0]).abs() < 1e-15 && (exact[1] - q[1]).abs() < 1e-15);
        }
    }

    #[test]
    fn l2_norm_of_linear_function() {
        let m = Mesh::structured(4).unwrap();
        let x = interp_nodal(|p| p[0], &m);
        // int_0^1 x^2 = 1/3, exact for the P1 interpolant of a linear function
        assert!((l2_inner(&m, &x, &x) - 1.0 / 3.0).abs() < 1e-14);
        assert!((grad_sq(&m, &x) - 1.0).abs() < 1e-13);
    }
}
