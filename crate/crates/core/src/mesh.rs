//! Structured right-triangle mesh of the unit square.
//!
//! Every square cell of side `h = 1/n` is cut along its anti-diagonal
//! (from `(x+h, y)` to `(x, y+h)`), which yields two right triangles. Each
//! triangle is stored with its right-angle vertex first, followed by the
//! vertex reached from it along the x axis and then along the y axis, so
//! the axis pair `(x_0, x_k)` of an element is `(elem[0], elem[k])`.
//!
//! Nodes are numbered row by row: node `(i, j)` at `(i h, j h)` has index
//! `j (n + 1) + i`.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    h: f64,
    nodes: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    lumped_mass: Vec<f64>,
    areas: Vec<f64>,
    /// Gradients of the three barycentric coordinates, per element.
    grad_lambda: Vec<[[f64; 2]; 3]>,
}

impl Mesh {
    /// Builds the structured triangulation with `n` subdivisions per side.
    pub fn structured(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("mesh subdivision count must be at least 1"));
        }
        let h = 1.0 / n as f64;
        let np = n + 1;
        let idx = |i: usize, j: usize| j * np + i;

        let mut nodes = Vec::with_capacity(np * np);
        let mut boundary = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                // i * h rather than i / n keeps the coordinate grid uniform in h
                nodes.push([i as f64 * h, j as f64 * h]);
                boundary.push(i == 0 || j == 0 || i == n || j == n);
            }
        }
        // exact end points
        for j in 0..np {
            nodes[idx(n, j)][0] = 1.0;
            nodes[idx(j, n)][1] = 1.0;
        }

        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let ll = idx(i, j);
                let lr = idx(i + 1, j);
                let ul = idx(i, j + 1);
                let ur = idx(i + 1, j + 1);
                // right angle at the lower-left corner
                elements.push([ll, lr, ul]);
                // right angle at the upper-right corner
                elements.push([ur, ul, lr]);
            }
        }

        let mut areas = Vec::with_capacity(elements.len());
        let mut grad_lambda = Vec::with_capacity(elements.len());
        let mut lumped_mass = vec![0.0; nodes.len()];
        for tri in &elements {
            let (area, grads) = triangle_geometry([nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]]);
            for &v in tri {
                lumped_mass[v] += area / 3.0;
            }
            areas.push(area);
            grad_lambda.push(grads);
        }

        Ok(Mesh {
            n,
            h,
            nodes,
            elements,
            boundary,
            lumped_mass,
            areas,
            grad_lambda,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Lumped nodal masses `m_i = (1/3) * sum of areas of elements around node i`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    pub fn area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn grad_lambda(&self, e: usize) -> &[[f64; 2]; 3] {
        &self.grad_lambda[e]
    }

    /// Node index of `(i, j)` in the structured numbering.
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    /// Returns `(x_0, x_axis)`: the right-angle vertex of `elem` and the
    /// vertex reached from it along coordinate axis `axis` (1 = x, 2 = y).
    pub fn axis_nodes(&self, elem: usize, axis: usize) -> Result<(usize, usize)> {
        if elem >= self.elements.len() {
            return Err(Error::invalid(format!(
                "element index {elem} out of range (mesh has {} elements)",
                self.elements.len()
            )));
        }
        if !(1..=2).contains(&axis) {
            return Err(Error::invalid(format!("axis must be 1 or 2, got {axis}")));
        }
        let tri = &self.elements[elem];
        Ok((tri[0], tri[axis]))
    }
}

/// Area and barycentric-coordinate gradients of a triangle.
pub(crate) fn triangle_geometry(v: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let [x0, y0] = v[0];
    let [x1, y1] = v[1];
    let [x2, y2] = v[2];
    let det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0);
    let area = 0.5 * det.abs();
    let grads = [
        [(y1 - y2) / det, (x2 - x1) / det],
        [(y2 - y0) / det, (x0 - x2) / det],
        [(y0 - y1) / det, (x1 - x0) / det],
    ];
    (area, grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = Mesh::structured(1).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_elements(), 2);
        for e in 0..2 {
            assert_eq!(m.area(e), 0.5);
        }
        let m = Mesh::structured(2).unwrap();
        assert_eq!((m.num_nodes(), m.num_elements()), (9, 8));
        let m = Mesh::structured(100).unwrap();
        assert_eq!(m.h(), 1.0 / 100.0);
        assert_eq!(m.num_nodes(), 10201);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(Mesh::structured(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn unit_square_lower_triangle_axes() {
        let m = Mesh::structured(1).unwrap();
        let origin = m.node_index(0, 0);
        let e = (0..m.num_elements())
            .find(|&e| m.element(e).contains(&origin))
            .unwrap();
        let mut verts: Vec<[f64; 2]> = m.element(e).iter().map(|&v| m.node(v)).collect();
        verts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(verts, vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(m.axis_nodes(e, 1).unwrap(), (origin, m.node_index(1, 0)));
        assert_eq!(m.axis_nodes(e, 2).unwrap(), (origin, m.node_index(0, 1)));
    }

    #[test]
    fn axis_edges_are_parallel_with_length_h() {
        for n in 1..=8 {
            let m = Mesh::structured(n).unwrap();
            for e in 0..m.num_elements() {
                let tri = m.element(e);
                for axis in 1..=2 {
                    let (a, b) = m.axis_nodes(e, axis).unwrap();
                    assert!(tri.contains(&a) && tri.contains(&b));
                    assert_eq!(a, tri[0]);
                    let (pa, pb) = (m.node(a), m.node(b));
                    let k = axis - 1;
                    assert!(((pb[k] - pa[k]).abs() - m.h()).abs() < 1e-14);
                    assert_eq!(pb[1 - k], pa[1 - k]);
                }
            }
        }
    }

    #[test]
    fn axis_nodes_rejects_bad_indices() {
        let m = Mesh::structured(2).unwrap();
        assert!(m.axis_nodes(8, 1).is_err());
        assert!(m.axis_nodes(0, 0).is_err());
        assert!(m.axis_nodes(0, 3).is_err());
    }

    #[test]
    fn areas_and_lumped_masses() {
        for n in [1, 3, 7, 16] {
            let m = Mesh::structured(n).unwrap();
            let h = m.h();
            let total: f64 = m.areas().iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            for &a in m.areas() {
                assert!((a - h * h / 2.0).abs() < 1e-15);
            }
            let mass: f64 = m.lumped_mass().iter().sum();
            assert!((mass - 1.0).abs() < 1e-13);
            for i in 0..m.num_nodes() {
                if !m.is_boundary(i) {
                    assert!((m.lumped_mass()[i] - h * h).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn elements_are_counter_clockwise() {
        let m = Mesh::structured(5).unwrap();
        for tri in m.elements() {
            let [a, b, c] = tri.map(|v| m.node(v));
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            assert!(det > 0.0);
        }
    }
}
