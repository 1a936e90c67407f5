//! Time stepping for the three schemes.
//!
//! Each step solves the nonlinear scheme with a decoupled fixed-point
//! iteration. Starting from the previous state, every iteration first solves
//! the linear phase-field system for `(phi, mu)` with coefficients frozen at
//! the current iterate, then the Stokes-like fluid system for `(u, p)`. The
//! iteration stops once the relative L2 increment of `(u, p, phi, mu)`
//! drops below the tolerance.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::coeffs::{mg_coeff, mj_coeff, tg_coeff, tj_coeff, P0AxisField};
use crate::error::{Error, Result};
use crate::fespace::{bubble_grad, bubble_value, l2_inner, p1_diff, p1_gradient, velocity_diff, velocity_l2_sq, P1Field, VelocityField};
use crate::linsys::{augment_mean_zero, LinearSolveReport, LinearSolver, PatternBuilder, SparseMatrix};
use crate::mesh::Mesh;
use crate::potentials::PhysParams;
use crate::quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Lumped potential terms with `G_eps` secant coefficients.
    Geps,
    /// Consistent potential terms with `J_eps` secant coefficients.
    Jeps,
    /// Constant mobility.
    Cm,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Geps, Scheme::Jeps, Scheme::Cm];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Geps => "geps",
            Scheme::Jeps => "jeps",
            Scheme::Cm => "cm",
        }
    }

    /// Whether the truncation parameter enters the scheme.
    pub fn uses_eps(&self) -> bool {
        !matches!(self, Scheme::Cm)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "geps" | "g" | "g_eps" => Ok(Scheme::Geps),
            "jeps" | "j" | "j_eps" => Ok(Scheme::Jeps),
            "cm" => Ok(Scheme::Cm),
            other => Err(Error::invalid(format!("unknown scheme '{other}' (expected geps, jeps or cm)"))),
        }
    }
}

/// Dirichlet velocity data `g(x, t)`.
pub type VelocityBc = Arc<dyn Fn([f64; 2], f64) -> [f64; 2] + Send + Sync>;

/// Numerical parameters of a run.
#[derive(Clone)]
pub struct Params {
    pub phys: PhysParams,
    pub dt: f64,
    /// Fixed-point tolerance on the relative increment.
    pub tol: f64,
    pub max_iters: usize,
    pub scheme: Scheme,
    /// Relative residual tolerance of every linear solve.
    pub lin_tol: f64,
    /// Boundary velocity; `None` means homogeneous data.
    pub boundary: Option<VelocityBc>,
}

impl fmt::Debug for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Params")
            .field("phys", &self.phys)
            .field("dt", &self.dt)
            .field("tol", &self.tol)
            .field("max_iters", &self.max_iters)
            .field("scheme", &self.scheme)
            .field("lin_tol", &self.lin_tol)
            .field("boundary", &self.boundary.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl Default for Params {
    fn default() -> Self {
        Params {
            phys: PhysParams::default(),
            dt: 1e-4,
            tol: 1e-4,
            max_iters: 100,
            scheme: Scheme::Geps,
            lin_tol: crate::linsys::DEFAULT_TOL,
            boundary: None,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        self.phys.validate()?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::invalid(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.lin_tol.is_finite() && self.lin_tol > 0.0) {
            return Err(Error::invalid("lin_tol must be positive"));
        }
        Ok(())
    }

    pub fn boundary_value(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        self.boundary.as_ref().map_or([0.0; 2], |g| g(x, t))
    }
}

/// Discrete solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: VelocityField,
    pub p: P1Field,
    pub phi: P1Field,
    pub mu: P1Field,
    pub t: f64,
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub iterations: usize,
    /// Relative increment of the last iteration.
    pub increment: f64,
    /// Increment of every iteration.
    pub increments: Vec<f64>,
    /// Linear solves in order: phase, fluid, phase, fluid, ...
    pub linear: Vec<LinearSolveReport>,
}

impl StepReport {
    pub fn max_linear_residual(&self) -> f64 {
        self.linear.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

/// Degree-of-freedom layout of the fluid system.
#[derive(Debug, Clone, Copy)]
pub struct FluidDofs {
    pub nodes: usize,
    pub elements: usize,
}

impl FluidDofs {
    pub fn nodal(&self, c: usize, i: usize) -> usize {
        c * self.nodes + i
    }

    pub fn bubble(&self, c: usize, e: usize) -> usize {
        2 * self.nodes + c * self.elements + e
    }

    pub fn pressure(&self, i: usize) -> usize {
        2 * self.nodes + 2 * self.elements + i
    }

    pub fn pressure_offset(&self) -> usize {
        self.pressure(0)
    }

    /// Unknowns without the gauge multiplier.
    pub fn len(&self) -> usize {
        3 * self.nodes + 2 * self.elements
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Velocity dofs of element `e`, indexed `[component][basis]` with the
    /// bubble as basis 3.
    pub fn element_velocity(&self, tri: [usize; 3], e: usize) -> [[usize; 4]; 2] {
        let mut d = [[0; 4]; 2];
        for (c, row) in d.iter_mut().enumerate() {
            for a in 0..3 {
                row[a] = self.nodal(c, tri[a]);
            }
            row[3] = self.bubble(c, e);
        }
        d
    }

    pub fn unpack(&self, x: &[f64]) -> (VelocityField, P1Field) {
        let n = self.nodes;
        let ne = self.elements;
        let nodal = (0..n).map(|i| [x[i], x[n + i]]).collect();
        let bubble = (0..ne).map(|e| [x[2 * n + e], x[2 * n + ne + e]]).collect();
        let p = P1Field(x[self.pressure(0)..self.pressure(0) + n].to_vec());
        (VelocityField { nodal, bubble }, p)
    }
}

/// Values and gradients of the four mini-element scalar basis functions
/// (three hat functions, then the bubble) at a barycentric point.
fn mini_basis(gl: &[[f64; 2]; 3], bary: [f64; 3]) -> ([f64; 4], [[f64; 2]; 4]) {
    let vals = [bary[0], bary[1], bary[2], bubble_value(bary)];
    let grads = [gl[0], gl[1], gl[2], bubble_grad(gl, bary)];
    (vals, grads)
}

/// Fluid matrix after boundary elimination and gauge augmentation.
struct FluidSystem {
    matrix: SparseMatrix,
    lift: Vec<f64>,
    fixed: Vec<bool>,
    data: Vec<f64>,
}

/// Advances a [`State`] by one step of the configured scheme.
pub struct Stepper {
    mesh: Mesh,
    params: Params,
    dofs: FluidDofs,
    phase_solver: LinearSolver,
    fluid_solver: LinearSolver,
    phase_pattern: SparseMatrix,
    fluid_pattern: SparseMatrix,
}

impl fmt::Debug for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stepper")
            .field("n", &self.mesh.n())
            .field("params", &self.params)
            .finish()
    }
}

impl Stepper {
    pub fn new(mesh: Mesh, params: Params) -> Result<Self> {
        params.validate()?;
        let n = mesh.num_nodes();
        let dofs = FluidDofs { nodes: n, elements: mesh.num_elements() };

        let mut pb = PatternBuilder::new(2 * n);
        for tri in mesh.elements() {
            let phi: Vec<usize> = tri.to_vec();
            let mu: Vec<usize> = tri.iter().map(|&v| n + v).collect();
            for rows in [&phi, &mu] {
                pb.insert_block(rows, &phi);
                pb.insert_block(rows, &mu);
            }
        }
        let phase_pattern = pb.build();

        let mut pb = PatternBuilder::new(dofs.len());
        for (e, &tri) in mesh.elements().iter().enumerate() {
            let vd = dofs.element_velocity(tri, e);
            let vel: Vec<usize> = vd.iter().flatten().copied().collect();
            let pre: Vec<usize> = tri.iter().map(|&v| dofs.pressure(v)).collect();
            pb.insert_block(&vel, &vel);
            pb.insert_block(&vel, &pre);
            pb.insert_block(&pre, &vel);
        }
        // pressure rows need a structural diagonal for the factorization
        for i in 0..n {
            pb.insert(dofs.pressure(i), dofs.pressure(i));
        }
        let fluid_pattern = pb.build();

        Ok(Stepper {
            phase_solver: LinearSolver::new(params.lin_tol),
            fluid_solver: LinearSolver::new(params.lin_tol),
            mesh,
            params,
            dofs,
            phase_pattern,
            fluid_pattern,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn dofs(&self) -> FluidDofs {
        self.dofs
    }

    fn check_state(&self, s: &State) -> Result<()> {
        let n = self.mesh.num_nodes();
        let ne = self.mesh.num_elements();
        if s.phi.len() != n || s.mu.len() != n || s.p.len() != n || s.u.nodal.len() != n || s.u.bubble.len() != ne {
            return Err(Error::invalid("state does not match the mesh"));
        }
        let finite = s.phi.values().iter().chain(s.mu.values()).chain(s.p.values()).all(|v| v.is_finite())
            && s.u.nodal.iter().chain(&s.u.bubble).flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("state contains non-finite values"));
        }
        Ok(())
    }

    /// Chemical potential consistent with `phi` through the phase-field
    /// equation with `phi^{n+1} = phi^n = phi`.
    pub fn initial_mu(&self, phi: &P1Field) -> P1Field {
        let m = &self.mesh;
        let w = self.params.phys.double_well();
        let lambda = self.params.phys.lambda;
        let mut rhs = vec![0.0; m.num_nodes()];
        for (e, tri) in m.elements().iter().enumerate() {
            let g = p1_gradient(m, phi, e);
            let gl = m.grad_lambda(e);
            let area = m.area(e);
            for a in 0..3 {
                rhs[tri[a]] += lambda * area * (g[0] * gl[a][0] + g[1] * gl[a][1]);
            }
            if self.params.scheme != Scheme::Geps {
                for q in quadrature::degree8() {
                    let f = w.f_prime(phi.eval(m, e, q.bary));
                    for a in 0..3 {
                        rhs[tri[a]] += lambda * area * q.weight * f * q.bary[a];
                    }
                }
            }
        }
        let mass = m.lumped_mass();
        P1Field(
            (0..m.num_nodes())
                .map(|i| {
                    let lumped = if self.params.scheme == Scheme::Geps { lambda * w.f_prime(phi[i]) } else { 0.0 };
                    rhs[i] / mass[i] + lumped
                })
                .collect(),
        )
    }

    /// Initial state with `mu` from [`Stepper::initial_mu`], zero pressure and
    /// boundary velocity values set to the Dirichlet data at `t = 0`.
    pub fn initial_state(&self, phi: P1Field, mut u: VelocityField) -> Result<State> {
        for i in 0..self.mesh.num_nodes() {
            if self.mesh.is_boundary(i) {
                u.nodal[i] = self.params.boundary_value(self.mesh.node(i), 0.0);
            }
        }
        let state = State {
            mu: self.initial_mu(&phi),
            p: P1Field::zeros(&self.mesh),
            phi,
            u,
            t: 0.0,
        };
        self.check_state(&state)?;
        Ok(state)
    }

    /// Transport coefficient `T_h(phi)`; `None` for the constant-mobility scheme.
    pub fn transport_coeff(&self, phi: &P1Field) -> Result<Option<P0AxisField>> {
        let t = self.params.phys.singular();
        match self.params.scheme {
            Scheme::Geps => tg_coeff(&self.mesh, phi, &t).map(Some),
            Scheme::Jeps => tj_coeff(&self.mesh, phi, &t).map(Some),
            Scheme::Cm => Ok(None),
        }
    }

    /// Mobility coefficient `M_eps^{G,J}(phi)`, or the constant 1.
    pub fn mobility_coeff(&self, phi: &P1Field) -> Result<P0AxisField> {
        let t = self.params.phys.singular();
        match self.params.scheme {
            Scheme::Geps => mg_coeff(&self.mesh, phi, &t),
            Scheme::Jeps => mj_coeff(&self.mesh, phi, &t),
            Scheme::Cm => Ok(P0AxisField::constant(self.mesh.num_elements(), 1.0)),
        }
    }

    /// Phase-field system for unknowns `[phi; mu]`; rows `0..N` test with
    /// `mu_bar`, rows `N..2N` with `phi_bar`.
    fn assemble_phase(&self, prev: &State, iter: &State, transport: Option<&P0AxisField>) -> Result<(SparseMatrix, Vec<f64>)> {
        let m = &self.mesh;
        let n = m.num_nodes();
        let ph = &self.params.phys;
        let w = ph.double_well();
        let dt = self.params.dt;
        let lumped = self.params.scheme == Scheme::Geps;
        let mob = self.mobility_coeff(&iter.phi)?;
        let mass = m.lumped_mass();

        let mut a = self.phase_pattern.clone();
        let mut b = vec![0.0; 2 * n];
        for i in 0..n {
            a.add(i, i, mass[i] / dt);
            a.add(n + i, n + i, -mass[i]);
            b[i] += mass[i] * prev.phi[i] / dt;
            if lumped {
                let pl = iter.phi[i];
                let fcs = w.fc_second(pl);
                a.add(n + i, i, ph.lambda * mass[i] * fcs);
                b[n + i] -= ph.lambda * mass[i] * (w.fc_prime(pl) - fcs * pl + w.fe_prime(prev.phi[i]));
            }
        }
        let rule = quadrature::degree8();
        for (e, &tri) in m.elements().iter().enumerate() {
            let gl = m.grad_lambda(e);
            let area = m.area(e);
            let mk = mob.get(e);
            for i in 0..3 {
                for j in 0..3 {
                    let stiff = area * (gl[i][0] * gl[j][0] + gl[i][1] * gl[j][1]);
                    let weighted = area * (mk[0] * gl[i][0] * gl[j][0] + mk[1] * gl[i][1] * gl[j][1]);
                    a.add(tri[i], n + tri[j], ph.gamma * weighted);
                    a.add(n + tri[i], tri[j], ph.lambda * stiff);
                }
            }
            match transport {
                Some(tc) => {
                    let tk = tc.get(e);
                    let ui = iter.u.element_integral(m, e);
                    for i in 0..3 {
                        b[tri[i]] += tk[0] * ui[0] * gl[i][0] + tk[1] * ui[1] * gl[i][1];
                    }
                }
                None => {
                    for q in rule {
                        let wq = area * q.weight;
                        let pu = iter.phi.eval(m, e, q.bary);
                        let uq = iter.u.eval(m, e, q.bary);
                        for i in 0..3 {
                            b[tri[i]] += wq * pu * (uq[0] * gl[i][0] + uq[1] * gl[i][1]);
                        }
                    }
                }
            }
            if !lumped {
                for q in rule {
                    let wq = area * q.weight;
                    let pl = iter.phi.eval(m, e, q.bary);
                    let pn = prev.phi.eval(m, e, q.bary);
                    let fcs = w.fc_second(pl);
                    let f = w.fc_prime(pl) - fcs * pl + w.fe_prime(pn);
                    for i in 0..3 {
                        b[n + tri[i]] -= ph.lambda * wq * f * q.bary[i];
                        for j in 0..3 {
                            a.add(n + tri[i], tri[j], ph.lambda * wq * fcs * q.bary[i] * q.bary[j]);
                        }
                    }
                }
            }
        }
        Ok((a, b))
    }

    /// Step 1 of the fixed-point iteration: new `(phi, mu)` from the
    /// previous state and the current iterate.
    pub fn phase_substep(&mut self, prev: &State, iter: &State) -> Result<(P1Field, P1Field, LinearSolveReport)> {
        self.check_state(prev)?;
        self.check_state(iter)?;
        let transport = self.transport_coeff(&iter.phi)?;
        let (a, b) = self.assemble_phase(prev, iter, transport.as_ref())?;
        let (x, rep) = self.phase_solver.solve_reusing(&a, &b)?;
        let n = self.mesh.num_nodes();
        Ok((P1Field(x[..n].to_vec()), P1Field(x[n..].to_vec()), rep))
    }

    /// Convection plus skew stabilization `((w.grad) u, v) + 1/2 ((div w) u, v)`
    /// on the velocity unknowns only.
    pub fn convection_matrix(&self, w: &VelocityField) -> SparseMatrix {
        let m = &self.mesh;
        let mut a = self.fluid_pattern.clone();
        for (e, &tri) in m.elements().iter().enumerate() {
            let vd = self.dofs.element_velocity(tri, e);
            let gl = m.grad_lambda(e);
            for q in quadrature::degree8() {
                let wq = m.area(e) * q.weight;
                let (vals, grads) = mini_basis(gl, q.bary);
                let wv = w.eval(m, e, q.bary);
                let wg = w.grad(m, e, q.bary);
                let div = wg[0][0] + wg[1][1];
                for i in 0..4 {
                    for j in 0..4 {
                        let c = wq * vals[i] * ((wv[0] * grads[j][0] + wv[1] * grads[j][1]) + 0.5 * div * vals[j]);
                        for comp in 0..2 {
                            a.add(vd[comp][i], vd[comp][j], c);
                        }
                    }
                }
            }
        }
        a
    }

    /// Fluid matrix before boundary conditions.
    fn assemble_fluid_matrix(&self, w: &VelocityField, nu_phi: &P1Field) -> SparseMatrix {
        let m = &self.mesh;
        let dt = self.params.dt;
        let visc = self.params.phys.viscosity;
        let mut a = self.fluid_pattern.clone();
        for (e, &tri) in m.elements().iter().enumerate() {
            let vd = self.dofs.element_velocity(tri, e);
            let pd = tri.map(|v| self.dofs.pressure(v));
            let gl = m.grad_lambda(e);
            let mut vv = [[[[0.0; 4]; 2]; 4]; 2];
            let mut vp = [[[0.0; 3]; 4]; 2];
            for q in quadrature::degree8() {
                let wq = m.area(e) * q.weight;
                let (vals, grads) = mini_basis(gl, q.bary);
                let wv = w.eval(m, e, q.bary);
                let wg = w.grad(m, e, q.bary);
                let div = wg[0][0] + wg[1][1];
                let nu = visc.at(nu_phi.eval(m, e, q.bary));
                for i in 0..4 {
                    for j in 0..4 {
                        let gij = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
                        let diag = vals[i] * vals[j] / dt
                            + vals[i] * (wv[0] * grads[j][0] + wv[1] * grads[j][1])
                            + 0.5 * div * vals[i] * vals[j]
                            + 0.5 * nu * gij;
                        for c in 0..2 {
                            for d in 0..2 {
                                let mut v = 0.5 * nu * grads[i][d] * grads[j][c];
                                if c == d {
                                    v += diag;
                                }
                                vv[c][i][d][j] += wq * v;
                            }
                        }
                    }
                    for c in 0..2 {
                        for k in 0..3 {
                            // (grad p, v) with p = l_k
                            vp[c][i][k] += wq * gl[k][c] * vals[i];
                        }
                    }
                }
            }
            for c in 0..2 {
                for i in 0..4 {
                    for d in 0..2 {
                        for j in 0..4 {
                            a.add(vd[c][i], vd[d][j], vv[c][i][d][j]);
                        }
                    }
                    for k in 0..3 {
                        a.add(vd[c][i], pd[k], vp[c][i][k]);
                    }
                }
            }
            // (div u, q) for q = l_k, computed exactly: div of the hat part is
            // constant and the bubble part integrates against l_k
            for k in 0..3 {
                for c in 0..2 {
                    for i in 0..4 {
                        let mut v = 0.0;
                        for q in quadrature::degree8() {
                            let (_, grads) = mini_basis(gl, q.bary);
                            v += m.area(e) * q.weight * grads[i][c] * q.bary[k];
                        }
                        a.add(pd[k], vd[c][i], v);
                    }
                }
            }
        }
        a
    }

    fn build_fluid_system(&mut self, w: &VelocityField, nu_phi: &P1Field, t: f64) -> Result<FluidSystem> {
        let mut a = self.assemble_fluid_matrix(w, nu_phi);
        let len = self.dofs.len();
        let mut fixed = vec![false; len];
        let mut data = vec![0.0; len];
        for i in 0..self.mesh.num_nodes() {
            if self.mesh.is_boundary(i) {
                let g = self.params.boundary_value(self.mesh.node(i), t);
                for c in 0..2 {
                    let k = self.dofs.nodal(c, i);
                    fixed[k] = true;
                    data[k] = g[c];
                }
            }
        }
        let mut lift = vec![0.0; len];
        a.for_each_mut(|r, c, v| {
            if fixed[r] {
                *v = if r == c { 1.0 } else { 0.0 };
            } else if fixed[c] {
                lift[r] += *v * data[c];
                *v = 0.0;
            }
        });
        let zero = vec![0.0; len];
        let (matrix, _) = augment_mean_zero(&a, &zero, self.dofs.pressure_offset(), self.mesh.lumped_mass())?;
        Ok(FluidSystem { matrix, lift, fixed, data })
    }

    fn fluid_rhs(&self, prev: &State, mu_new: &P1Field, phi_iter: &P1Field, transport: Option<&P0AxisField>, sys: &FluidSystem) -> Vec<f64> {
        let m = &self.mesh;
        let dt = self.params.dt;
        let mut b = vec![0.0; self.dofs.len() + 1];
        for (e, &tri) in m.elements().iter().enumerate() {
            let vd = self.dofs.element_velocity(tri, e);
            let gl = m.grad_lambda(e);
            let gmu = p1_gradient(m, mu_new, e);
            for q in quadrature::degree8() {
                let wq = m.area(e) * q.weight;
                let (vals, _) = mini_basis(gl, q.bary);
                let un = prev.u.eval(m, e, q.bary);
                let force = match transport {
                    Some(tc) => {
                        let tk = tc.get(e);
                        [tk[0] * gmu[0], tk[1] * gmu[1]]
                    }
                    None => {
                        let pl = phi_iter.eval(m, e, q.bary);
                        [pl * gmu[0], pl * gmu[1]]
                    }
                };
                for i in 0..4 {
                    for c in 0..2 {
                        b[vd[c][i]] += wq * vals[i] * (un[c] / dt - force[c]);
                    }
                }
            }
        }
        for k in 0..self.dofs.len() {
            b[k] = if sys.fixed[k] { sys.data[k] } else { b[k] - sys.lift[k] };
        }
        b
    }

    fn solve_fluid(&mut self, sys: &FluidSystem, b: &[f64]) -> Result<(VelocityField, P1Field, LinearSolveReport)> {
        let (mut x, rep) = self.fluid_solver.solve_reusing(&sys.matrix, b)?;
        for (k, xk) in x.iter_mut().take(sys.fixed.len()).enumerate() {
            if sys.fixed[k] {
                *xk = sys.data[k];
            }
        }
        let (u, p) = self.dofs.unpack(&x);
        Ok((u, p, rep))
    }

    /// Step 2 of the fixed-point iteration: new `(u, p)` given the new phase
    /// variables and the iterate `phi` that fixes the transport coefficient.
    pub fn fluid_substep(
        &mut self,
        prev: &State,
        phi_new: &P1Field,
        mu_new: &P1Field,
        phi_iter: &P1Field,
    ) -> Result<(VelocityField, P1Field, LinearSolveReport)> {
        self.check_state(prev)?;
        let t = prev.t + self.params.dt;
        let sys = self.build_fluid_system(&prev.u, phi_new, t)?;
        let transport = self.transport_coeff(phi_iter)?;
        let b = self.fluid_rhs(prev, mu_new, phi_iter, transport.as_ref(), &sys);
        self.solve_fluid(&sys, &b)
    }

    /// Relative L2 increment between two iterates.
    pub fn increment(&self, old: &State, new: &State) -> f64 {
        let m = &self.mesh;
        let sq = |f: &P1Field| l2_inner(m, f, f);
        let num = velocity_l2_sq(m, &velocity_diff(&new.u, &old.u))
            + sq(&p1_diff(&new.p, &old.p))
            + sq(&p1_diff(&new.phi, &old.phi))
            + sq(&p1_diff(&new.mu, &old.mu));
        let den = velocity_l2_sq(m, &new.u) + sq(&new.p) + sq(&new.phi) + sq(&new.mu);
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        }
    }

    /// One time step.
    pub fn step(&mut self, prev: &State) -> Result<(State, StepReport)> {
        self.check_state(prev)?;
        let t = prev.t + self.params.dt;
        let constant_nu = self.params.phys.viscosity.is_constant();
        let mut sys = if constant_nu { Some(self.build_fluid_system(&prev.u, &prev.phi, t)?) } else { None };
        let mut iter = prev.clone();
        iter.t = t;
        let mut report = StepReport::default();
        for k in 1..=self.params.max_iters {
            let transport = self.transport_coeff(&iter.phi)?;
            let (a, b) = self.assemble_phase(prev, &iter, transport.as_ref())?;
            let (x, rep) = self.phase_solver.solve_reusing(&a, &b)?;
            report.linear.push(rep);
            let n = self.mesh.num_nodes();
            let phi = P1Field(x[..n].to_vec());
            let mu = P1Field(x[n..].to_vec());

            if !constant_nu {
                sys = Some(self.build_fluid_system(&prev.u, &phi, t)?);
            }
            let fs = sys.as_ref().expect("fluid system is built");
            let b = self.fluid_rhs(prev, &mu, &iter.phi, transport.as_ref(), fs);
            let (u, p, rep) = self.solve_fluid(fs, &b)?;
            report.linear.push(rep);

            let next = State { u, p, phi, mu, t };
            let inc = self.increment(&iter, &next);
            report.iterations = k;
            report.increment = inc;
            report.increments.push(inc);
            iter = next;
            if inc <= self.params.tol {
                return Ok((iter, report));
            }
        }
        Err(Error::NonConvergence { iterations: self.params.max_iters, increment: report.increment })
    }
}
