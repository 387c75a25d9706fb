//! Implicit time integration: Newmark's method with full Newton iteration.
//!
//! The equation of motion M a + C v + r(u) = f(t) is advanced with the
//! average-acceleration Newmark scheme (gamma = 1/2, beta = 1/4 by default,
//! unconditionally stable for linear systems). At each step the displacement
//! update solves the nonlinear system
//!
//! ```text
//! R(u) = f - M a(u) - C v(u) - r(u) = 0,
//! a(u) = (u - u_pred) / (beta dt^2),   v(u) = v_pred + gamma dt a(u)
//! ```
//!
//! by Newton iteration on the effective stiffness
//! `K_eff = M/(beta dt^2) + C gamma/(beta dt) + dr/du`. Convergence is
//! declared when ||R|| / max(||f||, 1) drops below the tolerance. If a step
//! fails to converge it is retried once as two half steps with midpoint
//! forcing; a second failure aborts the run.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{ComputeError, ConfigError};
use crate::forcing::ForcingRecord;
use crate::structure::{MonopileModel, PlaneModel};

/// Anything the integrator can march: constant mass and damping, a
/// state-dependent restoring force with its tangent.
pub trait DynamicSystem {
    fn ndof(&self) -> usize;
    fn mass(&self) -> &DMatrix<f64>;
    fn damping(&self) -> &DMatrix<f64>;
    fn restoring(&self, u: &DVector<f64>) -> DVector<f64>;
    fn tangent(&self, u: &DVector<f64>) -> DMatrix<f64>;
}

impl DynamicSystem for PlaneModel {
    fn ndof(&self) -> usize {
        PlaneModel::ndof(self)
    }
    fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }
    fn damping(&self) -> &DMatrix<f64> {
        &self.damping
    }
    fn restoring(&self, u: &DVector<f64>) -> DVector<f64> {
        PlaneModel::restoring(self, u)
    }
    fn tangent(&self, u: &DVector<f64>) -> DMatrix<f64> {
        PlaneModel::tangent(self, u)
    }
}

/// Newmark parameters and Newton controls.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorConfig {
    /// Time step (s).
    pub dt: f64,
    /// Newmark gamma (velocity weighting).
    pub gamma: f64,
    /// Newmark beta (displacement weighting).
    pub beta: f64,
    /// Newton tolerance: residual norm relative to the largest force term
    /// in the balance (load, inertial, viscous, or restoring).
    pub newton_tol: f64,
    /// Newton iteration cap per step.
    pub newton_max_iter: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 0.02,
            gamma: 0.5,
            beta: 0.25,
            newton_tol: 1e-8,
            newton_max_iter: 25,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(ConfigError::invalid(
                "dt",
                format!("must be positive and finite, got {}", self.dt),
            ));
        }
        // Unconditional stability for the implicit family: 2 beta >= gamma >= 1/2.
        if !(self.gamma >= 0.5 && self.beta >= 0.5 * self.gamma) {
            return Err(ConfigError::invalid(
                "newmark parameters",
                format!(
                    "need beta >= gamma/2 >= 1/4 for unconditional stability, got gamma {} beta {}",
                    self.gamma, self.beta
                ),
            ));
        }
        if !(self.newton_tol > 0.0) || !self.newton_tol.is_finite() {
            return Err(ConfigError::invalid(
                "newton_tol",
                format!("must be positive and finite, got {}", self.newton_tol),
            ));
        }
        if self.newton_max_iter == 0 {
            return Err(ConfigError::invalid(
                "newton_max_iter",
                "must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

/// Displacement, velocity and acceleration at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub a: DVector<f64>,
}

/// Quiescent start: u = v = 0, acceleration solved from M a = f(0) - r(0).
pub fn initial_state<S: DynamicSystem>(sys: &S, f0: &DVector<f64>) -> TrajectoryState {
    let n = sys.ndof();
    let u = DVector::zeros(n);
    let rhs = f0 - sys.restoring(&u);
    let a = sys
        .mass()
        .clone()
        .cholesky()
        .expect("mass matrix must be SPD")
        .solve(&rhs);
    TrajectoryState {
        t: 0.0,
        u,
        v: DVector::zeros(n),
        a,
    }
}

/// One-step integrator bound to a system; precomputes the constant part of
/// the effective stiffness for its dt.
pub struct Stepper<'a, S: DynamicSystem> {
    sys: &'a S,
    cfg: IntegratorConfig,
    /// M/(beta dt^2) + C gamma/(beta dt); the tangent is added per iteration.
    inertial_part: DMatrix<f64>,
    /// Entrywise |M| and |C|, for the residual roundoff floor.
    abs_mass: DMatrix<f64>,
    abs_damping: DMatrix<f64>,
}

impl<'a, S: DynamicSystem> Stepper<'a, S> {
    pub fn new(sys: &'a S, cfg: IntegratorConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let dt = cfg.dt;
        let inertial_part = sys.mass() * (1.0 / (cfg.beta * dt * dt))
            + sys.damping() * (cfg.gamma / (cfg.beta * dt));
        let abs_mass = sys.mass().abs();
        let abs_damping = sys.damping().abs();
        Ok(Stepper {
            sys,
            cfg,
            inertial_part,
            abs_mass,
            abs_damping,
        })
    }

    pub fn dt(&self) -> f64 {
        self.cfg.dt
    }

    /// Advance one step under end-of-step load `f_next`. Returns the new
    /// state and the number of Newton solves performed.
    pub fn step(
        &self,
        state: &TrajectoryState,
        f_next: &DVector<f64>,
    ) -> Result<(TrajectoryState, usize), ComputeError> {
        let dt = self.cfg.dt;
        let (gamma, beta) = (self.cfg.gamma, self.cfg.beta);
        let t_next = state.t + dt;

        let u_pred = &state.u + &state.v * dt + &state.a * (dt * dt * (0.5 - beta));
        let v_pred = &state.v + &state.a * (dt * (1.0 - gamma));

        let inv_bdt2 = 1.0 / (beta * dt * dt);

        let mut u = u_pred.clone();
        let mut solves = 0;
        loop {
            let a = (&u - &u_pred) * inv_bdt2;
            let v = &v_pred + &a * (gamma * dt);
            let inertial = self.sys.mass() * &a;
            let viscous = self.sys.damping() * &v;
            let restoring = self.sys.restoring(&u);
            let residual = f_next - &inertial - &viscous - &restoring;
            // Imbalance relative to the largest force in the equation, so
            // the criterion survives load zero-crossings and free vibration.
            let scale = f_next
                .norm()
                .max(inertial.norm())
                .max(viscous.norm())
                .max(restoring.norm())
                .max(1.0);
            let rel = residual.norm() / scale;
            if rel <= self.cfg.newton_tol {
                return Ok((
                    TrajectoryState {
                        t: t_next,
                        u,
                        v,
                        a,
                    },
                    solves,
                ));
            }
            let tangent = self.sys.tangent(&u);
            // Roundoff floor of the residual evaluation itself: the balance
            // cancels terms whose entrywise magnitudes can dwarf the
            // imbalance, so nothing below eps times those magnitudes is
            // resolvable and the iterate is converged to machine precision.
            let magnitudes = &self.abs_mass * a.abs()
                + &self.abs_damping * v.abs()
                + tangent.abs() * u.abs();
            let floor = 32.0
                * f64::EPSILON
                * (magnitudes.norm() + restoring.norm() + f_next.norm());
            if solves > 0 && residual.norm() <= floor {
                return Ok((
                    TrajectoryState {
                        t: t_next,
                        u,
                        v,
                        a,
                    },
                    solves,
                ));
            }
            if solves >= self.cfg.newton_max_iter {
                return Err(ComputeError::NewtonDiverged {
                    t: t_next,
                    iterations: solves,
                    residual: rel,
                });
            }
            let k_eff = &self.inertial_part + tangent;
            // The effective matrix is SPD for this model family; fall back to
            // LU if a tangent ever breaks that.
            let du = match k_eff.clone().cholesky() {
                Some(ch) => ch.solve(&residual),
                None => k_eff
                    .lu()
                    .solve(&residual)
                    .ok_or(ComputeError::NewtonDiverged {
                        t: t_next,
                        iterations: solves,
                        residual: rel,
                    })?,
            };
            u += du;
            solves += 1;
        }
    }
}

/// Monitored response history of one simulation: every node's translation
/// in both planes at every sample, columns [x0..xN, y0..yN].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    /// Sample step (s).
    pub dt: f64,
    /// Rows are time samples (starting at t = 0), columns are channels.
    pub data: DMatrix<f64>,
    /// Wall-clock seconds spent in the integrator loop (no file I/O).
    pub wall_seconds: f64,
    /// Number of steps that needed the half-step retry.
    pub newton_retries: usize,
}

impl SimulationResult {
    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration(&self) -> f64 {
        (self.n_samples().saturating_sub(1)) as f64 * self.dt
    }
}

/// Channel labels for an n-node model: x0..x(n-1) then y0..y(n-1).
pub fn channel_names(n_nodes: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(2 * n_nodes);
    for i in 0..n_nodes {
        names.push(format!("x{i}"));
    }
    for i in 0..n_nodes {
        names.push(format!("y{i}"));
    }
    names
}

/// March both bending planes through a forcing record from quiescent initial
/// conditions. Plane x sees (Fx, My) on the head node, plane y sees (Fy, Mx).
/// The forcing must be sampled at the integrator dt.
pub fn simulate(
    model: &MonopileModel,
    forcing: &ForcingRecord,
    cfg: &IntegratorConfig,
) -> Result<SimulationResult, ComputeError> {
    assert!(
        (forcing.dt - cfg.dt).abs() <= 1e-12 * cfg.dt,
        "forcing dt {} does not match integrator dt {}; validate the config first",
        forcing.dt,
        cfg.dt
    );
    let n = forcing.n_samples();
    let n_nodes = model.n_nodes();
    let ndof = model.ndof_per_plane();
    let mut data = DMatrix::<f64>::zeros(n, 2 * n_nodes);
    let mut retries = 0usize;

    let start = Instant::now();
    // (plane, force column, moment column, output column offset)
    let plan = [
        (&model.plane_x, 0usize, 3usize, 0usize),
        (&model.plane_y, 1usize, 2usize, n_nodes),
    ];
    for (plane, fcol, mcol, out_off) in plan {
        let stepper = Stepper::new(plane, cfg.clone()).expect("validated config");
        let mut half: Option<Stepper<'_, PlaneModel>> = None;

        let load = |j: usize| -> DVector<f64> {
            let mut f = DVector::zeros(ndof);
            f[0] = forcing.data[(j, fcol)];
            f[1] = forcing.data[(j, mcol)];
            f
        };

        let mut state = initial_state(plane, &load(0));
        for node in 0..n_nodes {
            data[(0, out_off + node)] = state.u[2 * node];
        }

        for j in 1..n {
            let f_next = load(j);
            state = match stepper.step(&state, &f_next) {
                Ok((s, _)) => s,
                Err(_) => {
                    // Retry once as two half steps with linearly interpolated
                    // midpoint forcing.
                    retries += 1;
                    let h = half.get_or_insert_with(|| {
                        let mut hcfg = cfg.clone();
                        hcfg.dt *= 0.5;
                        Stepper::new(plane, hcfg).expect("validated config")
                    });
                    let f_mid = (load(j - 1) + &f_next) * 0.5;
                    let (mid, _) = h.step(&state, &f_mid)?;
                    let (full, _) = h.step(&mid, &f_next)?;
                    full
                }
            };
            for node in 0..n_nodes {
                data[(j, out_off + node)] = state.u[2 * node];
            }
        }
    }
    let wall_seconds = start.elapsed().as_secs_f64();

    Ok(SimulationResult {
        dt: cfg.dt,
        data,
        wall_seconds,
        newton_retries: retries,
    })
}
