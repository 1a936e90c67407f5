//! Initial phase fields and velocities of the built-in experiments.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fespace::{interp_nodal, P1Field, VelocityField};
use crate::mesh::Mesh;

use super::config::{Experiment, RunConfig};

pub fn example1_phi(x: [f64; 2]) -> f64 {
    0.5 * ((5.0 * PI * x[0]).cos() * (3.0 * PI * x[1] + PI / 2.0).sin() + 1.0)
}

/// Equilibrium tanh profile of a droplet of radius `r` centred at `c`.
pub fn droplet(x: [f64; 2], c: [f64; 2], r: f64, eta: f64) -> f64 {
    let d = (x[0] - c[0]).hypot(x[1] - c[1]);
    0.5 * (1.0 - ((d - r) / (2.0 * 2f64.sqrt() * eta)).tanh())
}

/// Centres and radii of the droplet pairs.
pub fn droplet_pair(exp: Experiment) -> Option<[([f64; 2], f64); 2]> {
    match exp {
        Experiment::Merging => Some([([0.35, 0.5], 0.15), ([0.65, 0.5], 0.15)]),
        Experiment::Coarsening => Some([([0.3, 0.5], 0.15), ([0.75, 0.5], 0.10)]),
        _ => None,
    }
}

pub fn two_droplets(x: [f64; 2], exp: Experiment, eta: f64) -> f64 {
    let [(ca, ra), (cb, rb)] = droplet_pair(exp).expect("droplet experiment");
    (droplet(x, ca, ra, eta) + droplet(x, cb, rb, eta)).min(1.0)
}

pub fn rotating_velocity(x: [f64; 2]) -> [f64; 2] {
    let (sx, cx) = (PI * x[0]).sin_cos();
    let (sy, cy) = (PI * x[1]).sin_cos();
    [2.0 * PI * cy * sx * sx, -2.0 * PI * 2.0 * cx * sx * sy]
}

pub fn initial_fields(mesh: &Mesh, cfg: &RunConfig) -> (P1Field, VelocityField) {
    let eta = cfg.phys.eta;
    match cfg.experiment {
        Experiment::Example1 => (interp_nodal(example1_phi, mesh), VelocityField::zeros(mesh)),
        Experiment::Merging | Experiment::Coarsening => (
            interp_nodal(|x| two_droplets(x, cfg.experiment, eta), mesh),
            VelocityField::zeros(mesh),
        ),
        Experiment::Rotating => (
            interp_nodal(|x| two_droplets(x, cfg.rotating_phase, eta), mesh),
            VelocityField::interpolate(mesh, rotating_velocity),
        ),
        Experiment::Custom => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let phi = P1Field((0..mesh.num_nodes()).map(|_| 0.5 + rng.gen_range(-0.05..0.05)).collect());
            (phi, VelocityField::zeros(mesh))
        }
    }
}
