//! Energies, bounds, singular functionals and residuals of the discrete
//! energy law and of the `G_eps`/`J_eps` estimates.

use crate::coeffs::{mg_coeff, mj_coeff, rh_coeff, P0AxisField};
use crate::error::{Error, Result};
use crate::fespace::{grad_sq, l2_inner, lumped_integral, p1_diff, p1_gradient, velocity_diff, velocity_l2_sq, P1Field, VelocityField};
use crate::mesh::Mesh;
use crate::potentials::{PhysParams, Viscosity};
use crate::quadrature;
use crate::schemes::{Params, Scheme, State};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies {
    pub kinetic: f64,
    pub mixing: f64,
    pub total: f64,
}

/// Kinetic energy `1/2 |u|^2` (bubble included) and mixing energy
/// `lambda (1/2 |grad phi|^2 + int F)`, with `int I_h F(phi)` for the
/// lumped scheme and the exact `int F(phi)` otherwise.
pub fn energies(mesh: &Mesh, state: &State, phys: &PhysParams, scheme: Scheme) -> Energies {
    let kinetic = 0.5 * velocity_l2_sq(mesh, &state.u);
    let w = phys.double_well();
    let potential = match scheme {
        Scheme::Geps => lumped_integral(mesh, &state.phi.map(|v| w.f(v))),
        Scheme::Jeps | Scheme::Cm => {
            let mut s = 0.0;
            for e in 0..mesh.num_elements() {
                for q in quadrature::degree8() {
                    s += mesh.area(e) * q.weight * w.f(state.phi.eval(mesh, e, q.bary));
                }
            }
            s
        }
    };
    let mixing = phys.lambda * (0.5 * grad_sq(mesh, &state.phi) + potential);
    Energies { kinetic, mixing, total: kinetic + mixing }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    /// `int (I_h phi_-)^2`.
    pub neg_sq: f64,
    /// `int (I_h (phi - 1)_+)^2`.
    pub over_sq: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

pub fn bound_violations(mesh: &Mesh, phi: &P1Field) -> Bounds {
    let neg = phi.map(|v| v.min(0.0));
    let over = phi.map(|v| (v - 1.0).max(0.0));
    Bounds {
        neg_sq: l2_inner(mesh, &neg, &neg),
        over_sq: l2_inner(mesh, &over, &over),
        phi_min: phi.min(),
        phi_max: phi.max(),
    }
}

/// `int I_h G_eps(phi)`.
pub fn g_functional(mesh: &Mesh, phi: &P1Field, phys: &PhysParams) -> f64 {
    let t = phys.singular();
    lumped_integral(mesh, &phi.map(|v| t.g_val(v)))
}

/// `int I_h J_eps(phi)`.
pub fn j_functional(mesh: &Mesh, phi: &P1Field, phys: &PhysParams) -> f64 {
    let t = phys.singular();
    lumped_integral(mesh, &phi.map(|v| t.j_val(v)))
}

/// `|| sqrt(nu(phi)) D(u) ||^2`.
pub fn viscous_dissipation(mesh: &Mesh, u: &VelocityField, phi: &P1Field, visc: Viscosity) -> f64 {
    let mut s = 0.0;
    for e in 0..mesh.num_elements() {
        for q in quadrature::degree8() {
            let g = u.grad(mesh, e, q.bary);
            let off = 0.5 * (g[0][1] + g[1][0]);
            let dd = g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * off * off;
            s += mesh.area(e) * q.weight * visc.at(phi.eval(mesh, e, q.bary)) * dd;
        }
    }
    s
}

/// `int K grad f . grad f` for a diagonal P0 coefficient `K`.
pub fn weighted_grad_sq(mesh: &Mesh, f: &P1Field, k: &P0AxisField) -> f64 {
    (0..mesh.num_elements())
        .map(|e| {
            let g = p1_gradient(mesh, f, e);
            let c = k.get(e);
            mesh.area(e) * (c[0] * g[0] * g[0] + c[1] * g[1] * g[1])
        })
        .sum()
}

fn mobility_at(mesh: &Mesh, phi: &P1Field, params: &Params) -> Result<P0AxisField> {
    let t = params.phys.singular();
    match params.scheme {
        Scheme::Geps => mg_coeff(mesh, phi, &t),
        Scheme::Jeps => mj_coeff(mesh, phi, &t),
        Scheme::Cm => Ok(P0AxisField::constant(mesh.num_elements(), 1.0)),
    }
}

/// Terms of the discrete energy law for one step, all multiplied by `dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyLaw {
    pub energy_prev: f64,
    pub energy_next: f64,
    pub viscous: f64,
    pub mobility: f64,
    pub kinetic_numerical: f64,
    pub phase_numerical: f64,
    /// Sum of all terms; the law states `residual <= 0`.
    pub residual: f64,
}

pub fn energy_law(mesh: &Mesh, prev: &State, next: &State, params: &Params) -> Result<EnergyLaw> {
    let dt = params.dt;
    let ph = &params.phys;
    let e0 = energies(mesh, prev, ph, params.scheme).total;
    let e1 = energies(mesh, next, ph, params.scheme).total;
    let viscous = dt * viscous_dissipation(mesh, &next.u, &next.phi, ph.viscosity);
    let mob = mobility_at(mesh, &next.phi, params)?;
    let mobility = dt * ph.gamma * weighted_grad_sq(mesh, &next.mu, &mob);
    let kinetic_numerical = 0.5 * velocity_l2_sq(mesh, &velocity_diff(&next.u, &prev.u));
    let phase_numerical = 0.5 * ph.lambda * grad_sq(mesh, &p1_diff(&next.phi, &prev.phi));
    Ok(EnergyLaw {
        energy_prev: e0,
        energy_next: e1,
        viscous,
        mobility,
        kinetic_numerical,
        phase_numerical,
        residual: e1 - e0 + viscous + mobility + kinetic_numerical + phase_numerical,
    })
}

/// Left-hand side minus right-hand side of the `G_eps` or `J_eps` estimate,
/// multiplied by `dt`, together with the sum of magnitudes of its terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateResidual {
    pub residual: f64,
    pub scale: f64,
}

pub fn estimate_residual(mesh: &Mesh, prev: &State, next: &State, params: &Params) -> Result<EstimateResidual> {
    let dt = params.dt;
    let ph = &params.phys;
    let grad_next = grad_sq(mesh, &next.phi);
    let terms: Vec<f64> = match params.scheme {
        Scheme::Geps => {
            let w = ph.double_well();
            let dg = g_functional(mesh, &next.phi, ph) - g_functional(mesh, &prev.phi, ph);
            let omega = P1Field(
                (0..mesh.num_nodes())
                    .map(|i| next.mu[i] - ph.lambda * (w.fc_prime(next.phi[i]) + w.fe_prime(prev.phi[i])))
                    .collect(),
            );
            let omega_sq = lumped_integral(mesh, &omega.map(|v| v * v));
            let rh = rh_coeff(mesh, &next.phi, &w)?;
            let r_term = weighted_grad_sq(mesh, &next.phi, &rh);
            let bound = ph.gamma * ph.lambda / (8.0 * ph.eta * ph.eta) * (grad_sq(mesh, &prev.phi) + grad_next);
            vec![dg, dt * ph.gamma * omega_sq, dt * ph.gamma * ph.lambda * r_term, -dt * bound]
        }
        Scheme::Jeps => {
            let dj = j_functional(mesh, &next.phi, ph) - j_functional(mesh, &prev.phi, ph);
            let mj = mj_coeff(mesh, &next.phi, &ph.singular())?;
            let mob = weighted_grad_sq(mesh, &next.mu, &mj);
            vec![dj, -dt * ph.gamma * (mob + grad_next)]
        }
        Scheme::Cm => {
            return Err(Error::invalid("no bound estimate applies to the constant-mobility scheme"));
        }
    };
    Ok(EstimateResidual {
        residual: terms.iter().sum(),
        scale: terms.iter().map(|t| t.abs()).sum(),
    })
}

/// One row of run diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagRecord {
    pub step: usize,
    pub time: f64,
    pub e_kin: f64,
    pub e_mix: f64,
    pub e_total: f64,
    pub volume: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub neg_sq: f64,
    pub over_sq: f64,
    pub g_func: f64,
    pub j_func: f64,
    pub fp_iters: usize,
    /// `dt` times the energy-law left-hand side (absent for the initial row).
    pub energy_residual: Option<f64>,
    /// `dt` times the estimate residual (absent for CM and the initial row).
    pub estimate_residual: Option<f64>,
}

impl DiagRecord {
    pub const CSV_HEADER: &'static str =
        "step,time,E_kin,E_mix,E_total,volume,phi_min,phi_max,neg_sq,over_sq,G_func,J_func,fp_iters";

    pub fn csv_row(&self) -> String {
        let f = |v: f64| format_g17(v);
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.step,
            f(self.time),
            f(self.e_kin),
            f(self.e_mix),
            f(self.e_total),
            f(self.volume),
            f(self.phi_min),
            f(self.phi_max),
            f(self.neg_sq),
            f(self.over_sq),
            f(self.g_func),
            f(self.j_func),
            self.fp_iters
        )
    }
}

/// Diagnostics of `state`; step residuals are included when `prev` is given.
pub fn record(
    mesh: &Mesh,
    step: usize,
    state: &State,
    prev: Option<&State>,
    params: &Params,
    fp_iters: usize,
) -> Result<DiagRecord> {
    let ph = &params.phys;
    let en = energies(mesh, state, ph, params.scheme);
    let b = bound_violations(mesh, &state.phi);
    let (energy_residual, estimate_residual) = match prev {
        Some(p) => {
            let law = energy_law(mesh, p, state, params)?;
            let est = match params.scheme {
                Scheme::Cm => None,
                _ => Some(estimate_residual(mesh, p, state, params)?.residual),
            };
            (Some(law.residual), est)
        }
        None => (None, None),
    };
    Ok(DiagRecord {
        step,
        time: state.t,
        e_kin: en.kinetic,
        e_mix: en.mixing,
        e_total: en.total,
        volume: lumped_integral(mesh, &state.phi),
        phi_min: b.phi_min,
        phi_max: b.phi_max,
        neg_sq: b.neg_sq,
        over_sq: b.over_sq,
        g_func: g_functional(mesh, &state.phi, ph),
        j_func: j_functional(mesh, &state.phi, ph),
        fp_iters,
        energy_residual,
        estimate_residual,
    })
}

/// C `%.17g` formatting.
pub fn format_g17(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, v);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= P {
        let mant = trim_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::interp_nodal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(m: &Mesh, phi: P1Field) -> State {
        State {
            u: VelocityField::zeros(m),
            p: P1Field::zeros(m),
            mu: P1Field::zeros(m),
            phi,
            t: 0.0,
        }
    }

    #[test]
    fn constant_field_energies() {
        let m = Mesh::structured(4).unwrap();
        let ph = PhysParams::default();
        for s in Scheme::ALL {
            let e = energies(&m, &state(&m, P1Field::zeros(&m)), &ph, s);
            assert_eq!(e.total, 0.0);
            let e = energies(&m, &state(&m, P1Field::constant(&m, 0.5)), &ph, s);
            assert!((e.total - 15.625).abs() < 1e-10, "{s}: {}", e.total);
        }
    }

    #[test]
    fn kinetic_energy_includes_bubble() {
        let m = Mesh::structured(3).unwrap();
        let mut s = state(&m, P1Field::zeros(&m));
        s.u.bubble[0] = [1.0, 0.0];
        // int (27 l0 l1 l2)^2 = 81/280 |K|
        let want = 0.5 * 81.0 / 280.0 * m.area(0);
        let got = energies(&m, &s, &PhysParams::default(), Scheme::Cm).kinetic;
        assert!((got - want).abs() < 1e-15);
    }

    #[test]
    fn example_one_volume_converges() {
        use std::f64::consts::PI;
        let f = |[x, y]: [f64; 2]| 0.5 * ((5.0 * PI * x).cos() * (3.0 * PI * y + PI / 2.0).sin() + 1.0);
        let err = |n| {
            let m = Mesh::structured(n).unwrap();
            (lumped_integral(&m, &interp_nodal(f, &m)) - 0.5).abs()
        };
        let (e32, e64) = (err(32), err(64));
        assert!(e32 < 1e-2 && e64 < e32);
        let rate = (e32 / e64).log2();
        assert!((rate - 2.0).abs() < 0.2, "rate {rate}");
    }

    #[test]
    fn bound_examples() {
        let m = Mesh::structured(4).unwrap();
        let b = bound_violations(&m, &interp_nodal(|[x, y]| x * y, &m));
        assert_eq!((b.neg_sq, b.over_sq), (0.0, 0.0));
        let b = bound_violations(&m, &P1Field::constant(&m, -0.3));
        assert!((b.neg_sq - 0.09).abs() < 1e-14 && b.over_sq == 0.0);
        let b = bound_violations(&m, &P1Field::constant(&m, 1.2));
        assert!((b.over_sq - 0.04).abs() < 1e-14);
        assert_eq!((b.phi_min, b.phi_max), (1.2, 1.2));
    }

    #[test]
    fn bounds_match_seven_point_oracle() {
        // the degree-5 seven-point rule is exact for the squared P1 interpolant
        let a1 = 0.059_715_871_789_770;
        let b1 = 0.470_142_064_105_115;
        let a2 = 0.797_426_985_353_087;
        let b2 = 0.101_286_507_323_456;
        let w1 = 0.132_394_152_788_506;
        let w2 = 0.125_939_180_544_827;
        let mut pts = vec![([1.0 / 3.0; 3], 0.225)];
        for (a, b, w) in [(a1, b1, w1), (a2, b2, w2)] {
            pts.push(([a, b, b], w));
            pts.push(([b, a, b], w));
            pts.push(([b, b, a], w));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = Mesh::structured(5).unwrap();
        for _ in 0..20 {
            let phi = P1Field((0..m.num_nodes()).map(|_| rng.gen_range(-0.5..1.5)).collect());
            let neg = phi.map(|v| v.min(0.0));
            let over = phi.map(|v| (v - 1.0).max(0.0));
            let mut on = 0.0;
            let mut oo = 0.0;
            for e in 0..m.num_elements() {
                for (bary, w) in &pts {
                    on += m.area(e) * w * neg.eval(&m, e, *bary).powi(2);
                    oo += m.area(e) * w * over.eval(&m, e, *bary).powi(2);
                }
            }
            let b = bound_violations(&m, &phi);
            assert!((b.neg_sq - on).abs() < 1e-10 && (b.over_sq - oo).abs() < 1e-10);
        }
    }

    #[test]
    fn functionals_nonnegative() {
        let m = Mesh::structured(4).unwrap();
        let ph = PhysParams { eps: 1e-4, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let phi = P1Field((0..m.num_nodes()).map(|_| rng.gen_range(-0.5..1.5)).collect());
            assert!(g_functional(&m, &phi, &ph) >= 0.0);
            assert!(j_functional(&m, &phi, &ph) >= 0.0);
        }
        let half = P1Field::constant(&m, 0.5);
        assert_eq!(g_functional(&m, &half, &ph), 0.0);
    }

    #[test]
    fn stationary_estimates_nonpositive() {
        let m = Mesh::structured(4).unwrap();
        let s = state(&m, P1Field::constant(&m, 0.5));
        for scheme in [Scheme::Geps, Scheme::Jeps] {
            let p = Params { scheme, ..Default::default() };
            let r = estimate_residual(&m, &s, &s, &p).unwrap();
            assert!(r.residual <= 0.0);
            let law = energy_law(&m, &s, &s, &p).unwrap();
            assert!(law.residual.abs() < 1e-12);
        }
        let p = Params { scheme: Scheme::Cm, ..Default::default() };
        assert!(matches!(estimate_residual(&m, &s, &s, &p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn viscous_dissipation_of_shear() {
        // u = (y, 0): D = [[0, 1/2], [1/2, 0]], |D|^2 = 1/2
        let m = Mesh::structured(3).unwrap();
        let u = VelocityField::interpolate(&m, |[_, y]| [y, 0.0]);
        let d = viscous_dissipation(&m, &u, &P1Field::zeros(&m), Viscosity::Constant(2.0));
        assert!((d - 1.0).abs() < 1e-13);
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1e-4), "0.0001");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(15.625), "15.625");
        for v in [0.1, 1.0 / 3.0, 123456.789, -7.25e-9] {
            assert_eq!(format_g17(v).parse::<f64>().unwrap(), v);
        }
    }
}
