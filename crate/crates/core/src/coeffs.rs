//! Piecewise-constant diagonal coefficient matrices built from secant
//! quotients along the two axis-parallel legs of each right triangle.
//!
//! For an element with right-angle vertex `x_0` and leg endpoints `x_1`
//! (x axis) and `x_2` (y axis), entry `k` of every coefficient is a divided
//! difference between `phi(x_0)` and `phi(x_k)`. Because the gradient of a
//! P1 function along leg `k` is exactly that nodal difference over `h`, the
//! coefficients satisfy, elementwise and componentwise,
//!
//! * `T^G d_k I_h G'(phi) = -d_k I_h H'(1 - phi)`
//! * `M^G d_k I_h G'(phi) = d_k phi`
//! * `T^J d_k I_h J'(phi) = -d_k I_h K'(1 - phi)`
//! * `M^J d_k I_h J'(phi) = sqrt(M^J) d_k phi`
//! * `R^h d_k phi = d_k I_h Fc'(phi)`

use crate::error::{Error, Result};
use crate::fespace::P1Field;
use crate::mesh::Mesh;
use crate::potentials::{mobility, DoubleWell, Truncation};

/// Two diagonal entries (x and y axis) per element.
#[derive(Debug, Clone, PartialEq)]
pub struct P0AxisField {
    pub values: Vec<[f64; 2]>,
}

impl P0AxisField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, e: usize) -> [f64; 2] {
        self.values[e]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Constant field (used by the constant-mobility scheme).
    pub fn constant(num_elements: usize, c: f64) -> Self {
        P0AxisField { values: vec![[c, c]; num_elements] }
    }
}

/// Whether two nodal values take the equal branch. The secant differences are
/// cancellation free, so only exact ties need it.
pub fn nearly_equal(a: f64, b: f64) -> bool {
    a == b
}

fn check(mesh: &Mesh, phi: &P1Field) -> Result<()> {
    if phi.len() != mesh.num_nodes() {
        return Err(Error::invalid(format!(
            "field has {} values, mesh has {} nodes",
            phi.len(),
            mesh.num_nodes()
        )));
    }
    if let Some(i) = phi.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite nodal value at node {i}")));
    }
    Ok(())
}

/// Generic builder: `secant(a, b)` for distinct values, `equal(tri)` otherwise.
fn build(
    mesh: &Mesh,
    phi: &P1Field,
    secant: impl Fn(f64, f64) -> f64,
    equal: impl Fn([f64; 3]) -> f64,
) -> Result<P0AxisField> {
    check(mesh, phi)?;
    let values = mesh
        .elements()
        .iter()
        .map(|tri| {
            let v = tri.map(|i| phi[i]);
            let mut out = [0.0; 2];
            for k in 0..2 {
                let (a, b) = (v[0], v[k + 1]);
                out[k] = if nearly_equal(a, b) { equal(v) } else { secant(a, b) };
            }
            out
        })
        .collect();
    Ok(P0AxisField { values })
}

fn mean_trunc(t: &Truncation, v: [f64; 3]) -> f64 {
    (t.trunc(v[0]) + t.trunc(v[1]) + t.trunc(v[2])) / 3.0
}

/// `T^G_h(phi)`.
pub fn tg_coeff(mesh: &Mesh, phi: &P1Field, t: &Truncation) -> Result<P0AxisField> {
    build(
        mesh,
        phi,
        |a, b| -t.h_prime_reflected_diff(a, b) / t.g_prime_diff(a, b),
        |v| mean_trunc(t, v),
    )
}

/// `M^G_eps(phi)`.
pub fn mg_coeff(mesh: &Mesh, phi: &P1Field, t: &Truncation) -> Result<P0AxisField> {
    build(
        mesh,
        phi,
        |a, b| (b - a) / t.g_prime_diff(a, b),
        |v| mobility(mean_trunc(t, v)),
    )
}

/// `T^J_h(phi)`.
pub fn tj_coeff(mesh: &Mesh, phi: &P1Field, t: &Truncation) -> Result<P0AxisField> {
    build(
        mesh,
        phi,
        |a, b| -t.k_prime_reflected_diff(a, b) / t.j_prime_diff(a, b),
        |v| mean_trunc(t, v),
    )
}

/// `M^J_eps(phi)`.
pub fn mj_coeff(mesh: &Mesh, phi: &P1Field, t: &Truncation) -> Result<P0AxisField> {
    build(
        mesh,
        phi,
        |a, b| {
            let q = (b - a) / t.j_prime_diff(a, b);
            q * q
        },
        |v| mobility(mean_trunc(t, v)),
    )
}

/// `R^h(phi)`, the divided difference of `Fc'` along each leg.
pub fn rh_coeff(mesh: &Mesh, phi: &P1Field, w: &DoubleWell) -> Result<P0AxisField> {
    build(mesh, phi, |a, b| w.fc_prime_secant(a, b), |v| w.fc_second(v[0]))
}
