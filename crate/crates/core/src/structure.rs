//! Finite-element model of a laterally loaded embedded pile.
//!
//! The pile is a chain of two-node Euler-Bernoulli beam elements with cubic
//! Hermite shape functions; each node carries a lateral translation w (m)
//! and a rotation theta (rad), laid out as [w0, th0, w1, th1, ...]. Node 0
//! is the loaded head at the mudline, the last node is the pile tip, and
//! node i sits at depth i * element_length. Boundary conditions are free at
//! both ends: all restraint comes from the lumped nonlinear soil springs
//! attached to every translational DOF, each representing the tributary
//! half-lengths of its adjacent elements.
//!
//! Bending is symmetric about the pile axis, so the two lateral planes are
//! structurally identical and decoupled; `MonopileModel` simply carries one
//! `PlaneModel` per plane. Damping is Rayleigh, C = alpha*M + beta*K_beam,
//! with the coefficients anchored so two selected modes of the
//! origin-linearized system hit a target damping ratio.

use nalgebra::{DMatrix, DVector};

use crate::error::{ComputeError, ConfigError};
use crate::soil::{NodalSpring, SoilProfile};

/// Thin-walled circular tube cross-section.
#[derive(Debug, Clone, PartialEq)]
pub struct PileSection {
    /// Outer diameter D (m).
    pub outer_diameter: f64,
    /// Wall thickness t (m).
    pub wall_thickness: f64,
    /// Young's modulus E (N/m^2).
    pub youngs_modulus: f64,
    /// Material density rho (kg/m^3).
    pub density: f64,
}

impl PileSection {
    pub fn new(
        outer_diameter: f64,
        wall_thickness: f64,
        youngs_modulus: f64,
        density: f64,
    ) -> Result<Self, ConfigError> {
        if !(outer_diameter > 0.0) || !outer_diameter.is_finite() {
            return Err(ConfigError::invalid(
                "outer_diameter",
                format!("must be positive and finite, got {outer_diameter}"),
            ));
        }
        if !(wall_thickness > 0.0 && wall_thickness < outer_diameter / 2.0) {
            return Err(ConfigError::invalid(
                "wall_thickness",
                format!("must lie in (0, D/2), got {wall_thickness}"),
            ));
        }
        if !(youngs_modulus > 0.0) || !youngs_modulus.is_finite() {
            return Err(ConfigError::invalid(
                "youngs_modulus",
                format!("must be positive and finite, got {youngs_modulus}"),
            ));
        }
        if !(density > 0.0) || !density.is_finite() {
            return Err(ConfigError::invalid(
                "density",
                format!("must be positive and finite, got {density}"),
            ));
        }
        Ok(PileSection {
            outer_diameter,
            wall_thickness,
            youngs_modulus,
            density,
        })
    }

    /// Steel monopile: D = 9.5 m, t = 80 mm, E = 210 GPa, rho = 7850 kg/m^3.
    pub fn reference() -> Self {
        PileSection {
            outer_diameter: 9.5,
            wall_thickness: 0.08,
            youngs_modulus: 210.0e9,
            density: 7850.0,
        }
    }

    /// Cross-section area (m^2) of the annulus.
    pub fn area(&self) -> f64 {
        let d = self.outer_diameter;
        let di = d - 2.0 * self.wall_thickness;
        std::f64::consts::FRAC_PI_4 * (d * d - di * di)
    }

    /// Second moment of area (m^4) about a diameter.
    pub fn second_moment(&self) -> f64 {
        let d = self.outer_diameter;
        let di = d - 2.0 * self.wall_thickness;
        std::f64::consts::PI / 64.0 * (d.powi(4) - di.powi(4))
    }

    /// Mass per unit length (kg/m).
    pub fn mass_per_length(&self) -> f64 {
        self.density * self.area()
    }
}

/// Element stiffness matrix (4x4) for bending stiffness EI and length L.
pub fn element_stiffness(ei: f64, l: f64) -> DMatrix<f64> {
    let c = ei / (l * l * l);
    DMatrix::from_row_slice(
        4,
        4,
        &[
            12.0 * c,
            6.0 * l * c,
            -12.0 * c,
            6.0 * l * c,
            6.0 * l * c,
            4.0 * l * l * c,
            -6.0 * l * c,
            2.0 * l * l * c,
            -12.0 * c,
            -6.0 * l * c,
            12.0 * c,
            -6.0 * l * c,
            6.0 * l * c,
            2.0 * l * l * c,
            -6.0 * l * c,
            4.0 * l * l * c,
        ],
    )
}

/// Consistent element mass matrix (4x4) for mass per length m and length L.
pub fn element_mass(mass_per_length: f64, l: f64) -> DMatrix<f64> {
    let c = mass_per_length * l / 420.0;
    DMatrix::from_row_slice(
        4,
        4,
        &[
            156.0 * c,
            22.0 * l * c,
            54.0 * c,
            -13.0 * l * c,
            22.0 * l * c,
            4.0 * l * l * c,
            13.0 * l * c,
            -3.0 * l * l * c,
            54.0 * c,
            13.0 * l * c,
            156.0 * c,
            -22.0 * l * c,
            -13.0 * l * c,
            -3.0 * l * l * c,
            -22.0 * l * c,
            4.0 * l * l * c,
        ],
    )
}

/// How the soil springs enter the restoring force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpringLaw {
    /// Full saturating reaction curve.
    Nonlinear,
    /// Constant origin stiffness k*z per unit length; turns the model linear.
    LinearizedAtOrigin,
}

/// One bending plane: constant matrices plus the nodal soil springs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneModel {
    pub mass: DMatrix<f64>,
    pub damping: DMatrix<f64>,
    /// Beam-only stiffness; soil enters through `springs`.
    pub beam_stiffness: DMatrix<f64>,
    /// One spring per node, indexed by node number.
    pub springs: Vec<NodalSpring>,
    pub soil: SoilProfile,
    pub spring_law: SpringLaw,
}

impl PlaneModel {
    pub fn ndof(&self) -> usize {
        self.beam_stiffness.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.springs.len()
    }

    /// Internal restoring force r(u) = K_beam u + soil spring forces on the
    /// translational DOFs.
    pub fn restoring(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut r = &self.beam_stiffness * u;
        for (node, spring) in self.springs.iter().enumerate() {
            let y = u[2 * node];
            r[2 * node] += match self.spring_law {
                SpringLaw::Nonlinear => spring.force(&self.soil, y),
                SpringLaw::LinearizedAtOrigin => spring.tangent(&self.soil, 0.0) * y,
            };
        }
        r
    }

    /// Tangent stiffness dr/du: the beam matrix plus a diagonal spring term
    /// on each translational DOF. Symmetric by construction.
    pub fn tangent(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let mut k = self.beam_stiffness.clone();
        for (node, spring) in self.springs.iter().enumerate() {
            let y = u[2 * node];
            let kt = match self.spring_law {
                SpringLaw::Nonlinear => spring.tangent(&self.soil, y),
                SpringLaw::LinearizedAtOrigin => spring.tangent(&self.soil, 0.0),
            };
            k[(2 * node, 2 * node)] += kt;
        }
        k
    }

    /// Stiffness with every spring at its origin tangent; the linear model
    /// used for modal analysis and damping calibration.
    pub fn linearized_stiffness(&self) -> DMatrix<f64> {
        let mut k = self.beam_stiffness.clone();
        for (node, spring) in self.springs.iter().enumerate() {
            k[(2 * node, 2 * node)] += spring.tangent(&self.soil, 0.0);
        }
        k
    }

    /// Natural angular frequencies (rad/s, ascending) of the
    /// origin-linearized model.
    pub fn natural_frequencies(&self) -> Vec<f64> {
        generalized_frequencies(&self.linearized_stiffness(), &self.mass)
    }
}

/// Angular frequencies (rad/s, ascending) of K x = omega^2 M x for SPD M,
/// via the Cholesky reduction to a symmetric standard eigenproblem.
pub fn generalized_frequencies(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let chol = m.clone().cholesky().expect("mass matrix must be SPD");
    let l = chol.l();
    let x = l
        .solve_lower_triangular(k)
        .expect("triangular solve of SPD factor");
    let b = l
        .solve_lower_triangular(&x.transpose())
        .expect("triangular solve of SPD factor");
    // b = L^-1 K L^-T up to roundoff; symmetrize before the eigensolver.
    let b_sym = (&b + b.transpose()) * 0.5;
    let mut lambda: Vec<f64> = b_sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    lambda.sort_by(|a, b| a.partial_cmp(b).unwrap());
    lambda.iter().map(|&l| l.max(0.0).sqrt()).collect()
}

/// Rayleigh coefficients (alpha, beta) giving damping ratio `zeta` at both
/// anchor frequencies: alpha = 2 zeta w1 w2 / (w1 + w2), beta = 2 zeta / (w1 + w2).
pub fn rayleigh_coefficients(
    omega_1: f64,
    omega_2: f64,
    zeta: f64,
) -> Result<(f64, f64), ComputeError> {
    let rel_gap = (omega_1 - omega_2).abs() / omega_1.abs().max(omega_2.abs()).max(1e-300);
    if rel_gap < 1e-9 {
        return Err(ComputeError::RepeatedFrequency { omega: omega_1 });
    }
    let alpha = 2.0 * zeta * omega_1 * omega_2 / (omega_1 + omega_2);
    let beta = 2.0 * zeta / (omega_1 + omega_2);
    Ok((alpha, beta))
}

/// The full two-plane model. Plane x responds to (Fx, My), plane y to
/// (Fy, Mx); both share identical matrices and springs.
#[derive(Debug, Clone, PartialEq)]
pub struct MonopileModel {
    pub plane_x: PlaneModel,
    pub plane_y: PlaneModel,
}

impl MonopileModel {
    pub fn n_nodes(&self) -> usize {
        self.plane_x.n_nodes()
    }

    pub fn ndof_per_plane(&self) -> usize {
        self.plane_x.ndof()
    }
}

/// Mesh, section, soil and damping choices that define a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n_elements: usize,
    pub element_length: f64,
    pub section: PileSection,
    pub soil: SoilProfile,
    /// Target damping ratio at the two anchor modes.
    pub damping_ratio: f64,
    /// One-based mode numbers anchoring the Rayleigh fit.
    pub damping_modes: (usize, usize),
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_elements: 30,
            element_length: 1.0,
            section: PileSection::reference(),
            soil: SoilProfile::reference(),
            damping_ratio: 0.02,
            damping_modes: (1, 2),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_elements < 2 {
            return Err(ConfigError::invalid(
                "n_elements",
                format!("need at least 2 elements, got {}", self.n_elements),
            ));
        }
        if !(self.element_length > 0.0) || !self.element_length.is_finite() {
            return Err(ConfigError::invalid(
                "element_length",
                format!("must be positive and finite, got {}", self.element_length),
            ));
        }
        if !(self.damping_ratio >= 0.0 && self.damping_ratio < 1.0) {
            return Err(ConfigError::invalid(
                "damping_ratio",
                format!("must lie in [0, 1), got {}", self.damping_ratio),
            ));
        }
        let ndof = 2 * (self.n_elements + 1);
        let (i, j) = self.damping_modes;
        if i == 0 || j == 0 || i == j || i > ndof || j > ndof {
            return Err(ConfigError::invalid(
                "damping_modes",
                format!("need two distinct one-based modes within 1..={ndof}, got ({i}, {j})"),
            ));
        }
        Ok(())
    }
}

/// Build the two-plane model: assemble beam matrices, attach tributary soil
/// springs, calibrate Rayleigh damping on the origin-linearized modes.
pub fn assemble(cfg: &ModelConfig) -> Result<MonopileModel, ConfigError> {
    cfg.validate()?;
    let n_el = cfg.n_elements;
    let l = cfg.element_length;
    let ndof = 2 * (n_el + 1);

    let ei = cfg.section.youngs_modulus * cfg.section.second_moment();
    let ke = element_stiffness(ei, l);
    let me = element_mass(cfg.section.mass_per_length(), l);

    let mut k_beam = DMatrix::<f64>::zeros(ndof, ndof);
    let mut mass = DMatrix::<f64>::zeros(ndof, ndof);
    for e in 0..n_el {
        let base = 2 * e;
        for i in 0..4 {
            for j in 0..4 {
                k_beam[(base + i, base + j)] += ke[(i, j)];
                mass[(base + i, base + j)] += me[(i, j)];
            }
        }
    }

    // Tributary lengths: half an element at each end node, one full element
    // at interior nodes.
    let mut springs = Vec::with_capacity(n_el + 1);
    for node in 0..=n_el {
        let trib = if node == 0 || node == n_el { 0.5 * l } else { l };
        springs.push(NodalSpring::new(node as f64 * l, trib).expect("mesh-derived spring"));
    }

    let mut plane = PlaneModel {
        mass,
        damping: DMatrix::zeros(ndof, ndof),
        beam_stiffness: k_beam,
        springs,
        soil: cfg.soil.clone(),
        spring_law: SpringLaw::Nonlinear,
    };

    let freqs = plane.natural_frequencies();
    let (mi, mj) = cfg.damping_modes;
    let (alpha, beta) = rayleigh_coefficients(freqs[mi - 1], freqs[mj - 1], cfg.damping_ratio)
        .map_err(|_| {
            ConfigError::invalid(
                "damping_modes",
                format!(
                    "anchor modes {mi} and {mj} share frequency {:.6e} rad/s",
                    freqs[mi - 1]
                ),
            )
        })?;
    plane.damping = &plane.mass * alpha + &plane.beam_stiffness * beta;

    Ok(MonopileModel {
        plane_y: plane.clone(),
        plane_x: plane,
    })
}

/// Static equilibrium r(u) = f by Newton iteration with step halving.
/// Converges when the residual drops below `tol` relative to max(|f|, 1).
pub fn static_solve(
    model: &PlaneModel,
    f: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DVector<f64>, ComputeError> {
    let scale = f.norm().max(1.0);
    let mut u = DVector::zeros(model.ndof());
    let mut residual = f - model.restoring(&u);
    for iter in 0..max_iter {
        if residual.norm() / scale <= tol {
            return Ok(u);
        }
        let k = model.tangent(&u);
        let du = k
            .lu()
            .solve(&residual)
            .ok_or(ComputeError::NewtonDiverged {
                t: 0.0,
                iterations: iter,
                residual: residual.norm() / scale,
            })?;
        // Backtracking: accept the longest step in {1, 1/2, ...} that does
        // not increase the residual norm.
        let mut step = 1.0;
        let base_norm = residual.norm();
        for _ in 0..12 {
            let trial = &u + &du * step;
            let r_trial = f - model.restoring(&trial);
            if r_trial.norm() <= base_norm || r_trial.norm() / scale <= tol {
                u = trial;
                residual = r_trial;
                break;
            }
            step *= 0.5;
        }
    }
    let rel = residual.norm() / scale;
    if rel <= tol {
        Ok(u)
    } else {
        Err(ComputeError::NewtonDiverged {
            t: 0.0,
            iterations: max_iter,
            residual: rel,
        })
    }
}
