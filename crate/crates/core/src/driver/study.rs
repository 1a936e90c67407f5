use crate::error::{Error, Result};
use crate::fespace::{h1_norm, l2_norm, p1_diff, velocity_diff, velocity_grad_sq, velocity_l2_sq};
use crate::mesh::Mesh;
use crate::schemes::{Scheme, State};

use super::{run, RunConfig};

/// Discrete errors of one run against the reference solution.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EocErrors {
    pub phi_l2: f64,
    pub phi_h1: f64,
    pub mu_l2: f64,
    pub mu_h1: f64,
    pub u_l2: f64,
    pub u_h1: f64,
    pub p_l2: f64,
}

impl EocErrors {
    pub const NAMES: [&'static str; 7] = ["phi_l2", "phi_h1", "mu_l2", "mu_h1", "u_l2", "u_h1", "p_l2"];

    pub fn to_array(&self) -> [f64; 7] {
        [self.phi_l2, self.phi_h1, self.mu_l2, self.mu_h1, self.u_l2, self.u_h1, self.p_l2]
    }

    fn from_array(a: [f64; 7]) -> Self {
        EocErrors { phi_l2: a[0], phi_h1: a[1], mu_l2: a[2], mu_h1: a[3], u_l2: a[4], u_h1: a[5], p_l2: a[6] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EocReport {
    pub ref_dt: f64,
    pub final_time: f64,
    /// Test step sizes in increasing order.
    pub dts: Vec<f64>,
    pub errors: Vec<EocErrors>,
    /// `rates[i]` compares `dts[i]` with `dts[i + 1]`.
    pub rates: Vec<EocErrors>,
}

impl EocReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("dt");
        for n in EocErrors::NAMES {
            s.push_str(&format!(",{n},rate_{n}"));
        }
        s.push('\n');
        for (i, (dt, e)) in self.dts.iter().zip(&self.errors).enumerate() {
            s.push_str(&crate::diagnostics::format_g17(*dt));
            let r = if i == 0 { None } else { Some(self.rates[i - 1].to_array()) };
            for (k, v) in e.to_array().iter().enumerate() {
                let rate = r.map(|r| crate::diagnostics::format_g17(r[k])).unwrap_or_default();
                s.push_str(&format!(",{},{}", crate::diagnostics::format_g17(*v), rate));
            }
            s.push('\n');
        }
        s
    }
}

/// `log(e / e2) / log(dt / dt2)`.
pub fn eoc_rate(e: f64, dt: f64, e2: f64, dt2: f64) -> f64 {
    (e / e2).ln() / (dt / dt2).ln()
}

pub fn compare_states(mesh: &Mesh, a: &State, b: &State) -> Result<EocErrors> {
    let (nn, ne) = (mesh.num_nodes(), mesh.num_elements());
    for s in [a, b] {
        if s.phi.len() != nn || s.mu.len() != nn || s.p.len() != nn || s.u.nodal.len() != nn || s.u.bubble.len() != ne {
            return Err(Error::invalid("states live on different meshes"));
        }
    }
    let dphi = p1_diff(&a.phi, &b.phi);
    let dmu = p1_diff(&a.mu, &b.mu);
    let du = velocity_diff(&a.u, &b.u);
    let ul2 = velocity_l2_sq(mesh, &du);
    Ok(EocErrors {
        phi_l2: l2_norm(mesh, &dphi),
        phi_h1: h1_norm(mesh, &dphi),
        mu_l2: l2_norm(mesh, &dmu),
        mu_h1: h1_norm(mesh, &dmu),
        u_l2: ul2.sqrt(),
        u_h1: (ul2 + velocity_grad_sq(mesh, &du)).sqrt(),
        p_l2: l2_norm(mesh, &p1_diff(&a.p, &b.p)),
    })
}

/// Smallest common multiple of the step sizes that is at least ten times the largest one.
pub fn default_eoc_final_time(dts: &[f64], ref_dt: f64) -> Result<f64> {
    let units: Vec<u64> = dts
        .iter()
        .map(|dt| {
            let k = (dt / ref_dt).round();
            if k < 1.0 || (k * ref_dt - dt).abs() > 1e-9 * dt {
                Err(Error::invalid(format!("dt = {dt} is not a multiple of the reference step {ref_dt}")))
            } else {
                Ok(k as u64)
            }
        })
        .collect::<Result<_>>()?;
    let gcd = |mut a: u64, mut b: u64| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let lcm = units.iter().fold(1u64, |l, &k| l / gcd(l, k) * k);
    let max = units.iter().copied().max().unwrap_or(1);
    let mult = (10 * max).div_ceil(lcm);
    Ok((lcm * mult) as f64 * ref_dt)
}

/// Time-step convergence study at the common final time `config.t_end`.
pub fn eoc_study(config: &RunConfig, dts: &[f64], ref_dt: f64) -> Result<EocReport> {
    if dts.len() < 2 {
        return Err(Error::invalid("need at least two test step sizes"));
    }
    if dts.iter().any(|&dt| !(dt > ref_dt)) {
        return Err(Error::invalid("reference step must be smaller than every test step"));
    }
    let mut dts = dts.to_vec();
    dts.sort_by(f64::total_cmp);
    let at = |dt: f64| RunConfig { dt, out_dir: None, ..config.clone() };
    for &dt in dts.iter().chain([ref_dt].iter()) {
        at(dt).num_steps()?;
    }
    let mesh = Mesh::structured(config.n)?;
    let reference = run(&at(ref_dt))?.final_state;
    let mut errors = Vec::with_capacity(dts.len());
    for &dt in &dts {
        let s = run(&at(dt))?.final_state;
        errors.push(compare_states(&mesh, &s, &reference)?);
    }
    let rates = errors
        .windows(2)
        .zip(dts.windows(2))
        .map(|(e, d)| {
            let (a, b) = (e[0].to_array(), e[1].to_array());
            EocErrors::from_array(std::array::from_fn(|k| eoc_rate(a[k], d[0], b[k], d[1])))
        })
        .collect();
    Ok(EocReport { ref_dt, final_time: config.t_end, dts, errors, rates })
}

/// Largest bound violations over one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub max_neg_sq: f64,
    pub max_over_sq: f64,
    pub phi_min: f64,
    pub phi_max: f64,
}

pub fn epsilon_sweep(config: &RunConfig, eps: &[f64]) -> Result<Vec<SweepRow>> {
    if config.scheme == Scheme::Cm {
        return Err(Error::invalid("the CM scheme does not use eps"));
    }
    if eps.len() < 2 {
        return Err(Error::invalid("need at least two eps values"));
    }
    eps.iter()
        .map(|&e| {
            let mut cfg = RunConfig { out_dir: None, ..config.clone() };
            cfg.phys.eps = e;
            let out = run(&cfg)?;
            let mut row =
                SweepRow { eps: e, max_neg_sq: 0.0, max_over_sq: 0.0, phi_min: f64::INFINITY, phi_max: f64::NEG_INFINITY };
            for r in &out.records {
                row.max_neg_sq = row.max_neg_sq.max(r.neg_sq);
                row.max_over_sq = row.max_over_sq.max(r.over_sq);
                row.phi_min = row.phi_min.min(r.phi_min);
                row.phi_max = row.phi_max.max(r.phi_max);
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::Experiment;
    use crate::fespace::{interp_nodal, P1Field, VelocityField};

    #[test]
    fn rate_formula() {
        assert_eq!(eoc_rate(2.0, 2e-6, 1.0, 1e-6), 1.0);
        assert_eq!(eoc_rate(4.0, 2.0, 1.0, 1.0), 2.0);
        let r = eoc_rate(0.135e-7, 2e-6, 0.067e-7, 1e-6);
        assert!((r - 1.01).abs() < 0.005, "{r}");
    }

    #[test]
    fn final_time_is_common_multiple() {
        let dts: Vec<f64> = (1..=7).map(|k| k as f64 * 1e-6).collect();
        let t = default_eoc_final_time(&dts, 1e-7).unwrap();
        assert!((t - 4.2e-4).abs() < 1e-15);
        assert!((default_eoc_final_time(&[1e-3, 2e-3], 1e-4).unwrap() - 2e-2).abs() < 1e-15);
        assert!(default_eoc_final_time(&[1.5e-7], 1e-7).is_err());
    }

    #[test]
    fn compare_rejects_mismatched_meshes() {
        let m4 = Mesh::structured(4).unwrap();
        let m5 = Mesh::structured(5).unwrap();
        let st = |m: &Mesh| State {
            u: VelocityField::zeros(m),
            p: P1Field::zeros(m),
            phi: P1Field::zeros(m),
            mu: P1Field::zeros(m),
            t: 0.0,
        };
        assert!(matches!(compare_states(&m4, &st(&m4), &st(&m5)), Err(Error::InvalidArgument(_))));
        let mut b = st(&m4);
        b.phi = interp_nodal(|[x, _]| x, &m4);
        let e = compare_states(&m4, &st(&m4), &b).unwrap();
        assert!((e.phi_l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((e.phi_h1 - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(e.u_h1, 0.0);
    }

    #[test]
    fn argument_checks() {
        let cfg = RunConfig { n: 4, dt: 1e-4, t_end: 2e-4, experiment: Experiment::Merging, ..Default::default() };
        assert!(eoc_study(&cfg, &[1e-4], 1e-5).is_err());
        assert!(eoc_study(&cfg, &[1e-4, 2e-4], 1e-4).is_err());
        assert!(epsilon_sweep(&cfg, &[1e-4]).is_err());
        let cm = RunConfig { scheme: Scheme::Cm, ..cfg.clone() };
        assert!(matches!(epsilon_sweep(&cm, &[1e-4, 1e-8]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn tiny_eoc_runs() {
        let cfg = RunConfig { n: 4, dt: 1e-4, t_end: 4e-4, experiment: Experiment::Example1, ..Default::default() };
        let rep = eoc_study(&cfg, &[2e-4, 1e-4], 5e-5).unwrap();
        assert_eq!(rep.dts, vec![1e-4, 2e-4]);
        assert_eq!(rep.rates.len(), 1);
        assert!(rep.errors.iter().all(|e| e.phi_l2 > 0.0));
        assert_eq!(rep.to_csv().lines().count(), 3);
    }
}
