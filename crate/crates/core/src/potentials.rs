//! Scalar potentials and mobilities.
//!
//! * Double well `F(phi) = phi^2 (1 - phi)^2 / (4 eta^2)`, split into a convex
//!   part `Fc` and a concave part `Fe = -phi^2 / (8 eta^2)`.
//! * Truncation `T(phi)`: clamp of `phi` to `[eps, 1 - eps]`.
//! * Truncated mobility `M_eps(phi) = T(phi) T(1 - phi)`.
//! * Singular families fixed by their second derivatives
//!   `H'' = 1/T`, `G'' = 1/M_eps`, `K'' = sqrt(T(1-phi)/T(phi))`,
//!   `J'' = 1/sqrt(M_eps)`. First derivatives satisfy
//!   `G'(phi) = H'(phi) - H'(1 - phi)` and `J'(phi) = K'(phi) - K'(1 - phi)`;
//!   integration constants are chosen so that `G(1/2) = J(1/2) = 0` and
//!   `G'`, `J'` are odd about `1/2`.
//!
//! On `[eps, 1 - eps]` the closed forms are
//! `H' = ln phi`, `G' = ln(phi / (1 - phi))`,
//! `K' = asin(sqrt phi) + sqrt(phi (1 - phi))`, `J' = asin(2 phi - 1)`.
//! Outside that interval every function is continued with the constant
//! second derivative of the nearest knot, so all of them are C^1.

use crate::error::{Error, Result};

/// Viscosity law `nu(phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Viscosity {
    Constant(f64),
    /// Linear blend `nu0 + (nu1 - nu0) clamp(phi, 0, 1)`.
    TwoPhase { nu0: f64, nu1: f64 },
}

impl Viscosity {
    pub fn at(&self, phi: f64) -> f64 {
        match *self {
            Viscosity::Constant(nu) => nu,
            Viscosity::TwoPhase { nu0, nu1 } => nu0 + (nu1 - nu0) * phi.clamp(0.0, 1.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Viscosity::Constant(_))
    }
}

/// Physical constants of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Interface width.
    pub eta: f64,
    /// Truncation parameter.
    pub eps: f64,
    /// Capillarity.
    pub lambda: f64,
    /// Relaxation (mobility scale).
    pub gamma: f64,
    pub viscosity: Viscosity,
}

impl Default for PhysParams {
    fn default() -> Self {
        PhysParams {
            eta: 1e-2,
            eps: 1e-8,
            lambda: 1e-1,
            gamma: 1e-3,
            viscosity: Viscosity::Constant(1.0),
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.eta) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::invalid(format!("eps must lie in (0, 1/2), got {}", self.eps)));
        }
        if !positive(self.lambda) || !positive(self.gamma) {
            return Err(Error::invalid("lambda and gamma must be positive"));
        }
        let ok = match self.viscosity {
            Viscosity::Constant(nu) => positive(nu),
            Viscosity::TwoPhase { nu0, nu1 } => positive(nu0) && positive(nu1),
        };
        if !ok {
            return Err(Error::invalid("viscosities must be positive"));
        }
        Ok(())
    }

    pub fn double_well(&self) -> DoubleWell {
        DoubleWell { eta: self.eta }
    }

    pub fn singular(&self) -> Truncation {
        Truncation { eps: self.eps }
    }
}

/// Ginzburg–Landau double well with interface width `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWell {
    pub eta: f64,
}

impl DoubleWell {
    fn inv4eta2(&self) -> f64 {
        1.0 / (4.0 * self.eta * self.eta)
    }

    pub fn f(&self, phi: f64) -> f64 {
        let q = phi * (1.0 - phi);
        q * q * self.inv4eta2()
    }

    pub fn f_prime(&self, phi: f64) -> f64 {
        self.fc_prime(phi) + self.fe_prime(phi)
    }

    pub fn fc(&self, phi: f64) -> f64 {
        (phi.powi(4) - 2.0 * phi.powi(3) + 1.5 * phi * phi) * self.inv4eta2()
    }

    pub fn fe(&self, phi: f64) -> f64 {
        -0.5 * phi * phi * self.inv4eta2()
    }

    pub fn fc_prime(&self, phi: f64) -> f64 {
        (4.0 * phi.powi(3) - 6.0 * phi * phi + 3.0 * phi) * self.inv4eta2()
    }

    pub fn fe_prime(&self, phi: f64) -> f64 {
        -phi * self.inv4eta2()
    }

    pub fn fc_second(&self, phi: f64) -> f64 {
        let d = phi - 0.5;
        3.0 * d * d / (self.eta * self.eta)
    }

    /// Divided difference `(Fc'(a) - Fc'(b)) / (a - b)`, written in a
    /// cancellation-free form; equals `Fc''(a)` when `a == b`.
    pub fn fc_prime_secant(&self, a: f64, b: f64) -> f64 {
        let (x, y) = (a - 0.5, b - 0.5);
        (x * x + x * y + y * y) / (self.eta * self.eta)
    }
}

/// Degenerate mobility `phi (1 - phi)`.
pub fn mobility(phi: f64) -> f64 {
    phi * (1.0 - phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Below,
    Interior,
    Above,
}

/// Truncation at level `eps` and the singular functionals built on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub eps: f64,
}

impl Truncation {
    fn branch(&self, phi: f64) -> Branch {
        if phi < self.eps {
            Branch::Below
        } else if phi > 1.0 - self.eps {
            Branch::Above
        } else {
            Branch::Interior
        }
    }

    pub fn trunc(&self, phi: f64) -> f64 {
        phi.clamp(self.eps, 1.0 - self.eps)
    }

    /// Truncated mobility `M_eps`.
    pub fn mob_trunc(&self, phi: f64) -> f64 {
        self.trunc(phi) * self.trunc(1.0 - phi)
    }

    pub fn h_prime(&self, phi: f64) -> f64 {
        self.h_prime_on(self.branch(phi), phi)
    }

    fn h_prime_on(&self, b: Branch, phi: f64) -> f64 {
        let eps = self.eps;
        match b {
            Branch::Below => eps.ln() + (phi - eps) / eps,
            Branch::Interior => phi.ln(),
            Branch::Above => (1.0 - eps).ln() + (phi - (1.0 - eps)) / (1.0 - eps),
        }
    }

    pub fn g_prime(&self, phi: f64) -> f64 {
        self.h_prime(phi) - self.h_prime(1.0 - phi)
    }

    pub fn g_val(&self, phi: f64) -> f64 {
        self.g_val_on(self.branch(phi), phi)
    }

    fn g_val_on(&self, b: Branch, phi: f64) -> f64 {
        let eps = self.eps;
        match b {
            Branch::Interior => {
                let q = 1.0 - phi;
                phi * phi.ln() + q * q.ln() + std::f64::consts::LN_2
            }
            Branch::Below => {
                let d = phi - eps;
                self.g_val_on(Branch::Interior, eps)
                    + self.g_prime(eps) * d
                    + d * d / (2.0 * eps * (1.0 - eps))
            }
            // G is even about 1/2
            Branch::Above => self.g_val_on(Branch::Below, 1.0 - phi),
        }
    }

    pub fn k_prime(&self, phi: f64) -> f64 {
        self.k_prime_on(self.branch(phi), phi)
    }

    fn k_prime_on(&self, b: Branch, phi: f64) -> f64 {
        let eps = self.eps;
        match b {
            Branch::Interior => phi.sqrt().asin() + (phi * (1.0 - phi)).sqrt(),
            Branch::Below => {
                self.k_prime_on(Branch::Interior, eps) + ((1.0 - eps) / eps).sqrt() * (phi - eps)
            }
            Branch::Above => {
                let knot = 1.0 - eps;
                self.k_prime_on(Branch::Interior, knot) + (eps / (1.0 - eps)).sqrt() * (phi - knot)
            }
        }
    }

    pub fn j_prime(&self, phi: f64) -> f64 {
        self.k_prime(phi) - self.k_prime(1.0 - phi)
    }

    pub fn j_val(&self, phi: f64) -> f64 {
        self.j_val_on(self.branch(phi), phi)
    }

    fn j_val_on(&self, b: Branch, phi: f64) -> f64 {
        let eps = self.eps;
        match b {
            Branch::Interior => {
                let s = 2.0 * phi - 1.0;
                0.5 * (s * s.asin() + (1.0 - s * s).max(0.0).sqrt() - 1.0)
            }
            Branch::Below => {
                let d = phi - eps;
                self.j_val_on(Branch::Interior, eps)
                    + self.j_prime(eps) * d
                    + d * d / (2.0 * (eps * (1.0 - eps)).sqrt())
            }
            Branch::Above => self.j_val_on(Branch::Below, 1.0 - phi),
        }
    }

    /// `f(y) - f(x)` for a function given per branch by `seg`, summed over
    /// the pieces between the knots; `d` is `y - x` as accurately as the
    /// caller knows it. `seg(branch, p, q, d)` gets both ends of a piece and
    /// its length.
    fn split_diff(&self, x: f64, y: f64, d: f64, seg: fn(&Self, Branch, f64, f64, f64) -> f64) -> f64 {
        // a start on a knot belongs to the piece being entered
        let bx = match self.branch(x) {
            Branch::Interior if x == self.eps && d < 0.0 => Branch::Below,
            Branch::Interior if x == 1.0 - self.eps && d > 0.0 => Branch::Above,
            b => b,
        };
        if d == 0.0 || bx == self.branch(y) {
            return seg(self, bx, x, y, d);
        }
        let knot = match (bx, d > 0.0) {
            (Branch::Below, true) | (Branch::Interior, false) => self.eps,
            _ => 1.0 - self.eps,
        };
        seg(self, bx, x, knot, knot - x) + self.split_diff(knot, y, y - knot, seg)
    }

    fn h_seg(&self, b: Branch, p: f64, q: f64, d: f64) -> f64 {
        match b {
            Branch::Below => d / self.eps,
            Branch::Interior if d.abs() <= 0.5 * p => (d / p).ln_1p(),
            Branch::Interior => q.ln() - p.ln(),
            Branch::Above => d / (1.0 - self.eps),
        }
    }

    fn k_seg(&self, b: Branch, p: f64, q: f64, d: f64) -> f64 {
        let eps = self.eps;
        match b {
            Branch::Below => ((1.0 - eps) / eps).sqrt() * d,
            Branch::Above => (eps / (1.0 - eps)).sqrt() * d,
            Branch::Interior => {
                let arc = (d / ((q * (1.0 - p)).sqrt() + (p * (1.0 - q)).sqrt())).asin();
                let root = d * (1.0 - p - q) / ((q * (1.0 - q)).sqrt() + (p * (1.0 - p)).sqrt());
                arc + root
            }
        }
    }

    /// `H'(b) - H'(a)` without cancellation for nearby arguments.
    pub fn h_prime_diff(&self, a: f64, b: f64) -> f64 {
        self.split_diff(a, b, b - a, Self::h_seg)
    }

    /// `H'(1 - b) - H'(1 - a)`.
    pub fn h_prime_reflected_diff(&self, a: f64, b: f64) -> f64 {
        self.split_diff(1.0 - a, 1.0 - b, a - b, Self::h_seg)
    }

    /// `K'(b) - K'(a)` without cancellation for nearby arguments.
    pub fn k_prime_diff(&self, a: f64, b: f64) -> f64 {
        self.split_diff(a, b, b - a, Self::k_seg)
    }

    /// `K'(1 - b) - K'(1 - a)`.
    pub fn k_prime_reflected_diff(&self, a: f64, b: f64) -> f64 {
        self.split_diff(1.0 - a, 1.0 - b, a - b, Self::k_seg)
    }

    /// `G'(b) - G'(a)`.
    pub fn g_prime_diff(&self, a: f64, b: f64) -> f64 {
        self.h_prime_diff(a, b) - self.h_prime_reflected_diff(a, b)
    }

    /// `J'(b) - J'(a)`.
    pub fn j_prime_diff(&self, a: f64, b: f64) -> f64 {
        self.k_prime_diff(a, b) - self.k_prime_reflected_diff(a, b)
    }
}
