//! Depth-dependent nonlinear lateral soil reaction for a pile in sand.
//!
//! Each embedded node sees a distributed restoring force (N per metre of
//! pile) that saturates with lateral deflection:
//!
//! ```text
//! p(z, y) = A_f * p_u(z) * tanh( k * z * y / (A_f * p_u(z)) )
//! ```
//!
//! where `z` is depth below mudline (m), `y` the lateral deflection (m),
//! `k` the initial modulus of subgrade reaction (N/m^3) and `A_f` a loading
//! factor. The ultimate resistance `p_u` is the lesser of a shallow wedge
//! failure and a deep flow-around failure, both linear in the submerged unit
//! weight and built from three closed-form coefficients of the friction
//! angle. The curve therefore has initial stiffness `k*z` at the origin and
//! a horizontal asymptote at `A_f * p_u(z)`.
//!
//! Units are SI throughout: N, m, N/m^2, N/m^3. The friction angle is
//! supplied in degrees.

use crate::error::ConfigError;

/// Homogeneous sand profile plus the pile diameter the p-y curves see.
#[derive(Debug, Clone, PartialEq)]
pub struct SoilProfile {
    /// Submerged unit weight gamma' (N/m^3).
    pub unit_weight: f64,
    /// Internal friction angle phi (degrees).
    pub friction_angle: f64,
    /// Initial modulus of subgrade reaction k (N/m^3).
    pub initial_modulus: f64,
    /// Pile outer diameter D (m) entering the resistance expressions.
    pub pile_diameter: f64,
    /// Static loading factor A_f scaling the ultimate resistance.
    pub loading_factor: f64,
}

impl SoilProfile {
    pub fn new(
        unit_weight: f64,
        friction_angle: f64,
        initial_modulus: f64,
        pile_diameter: f64,
        loading_factor: f64,
    ) -> Result<Self, ConfigError> {
        if !(unit_weight > 0.0) || !unit_weight.is_finite() {
            return Err(ConfigError::invalid(
                "unit_weight",
                format!("must be positive and finite, got {unit_weight}"),
            ));
        }
        if !(friction_angle > 0.0 && friction_angle < 45.0) {
            return Err(ConfigError::invalid(
                "friction_angle",
                format!("must lie in (0, 45) degrees, got {friction_angle}"),
            ));
        }
        if !(initial_modulus > 0.0) || !initial_modulus.is_finite() {
            return Err(ConfigError::invalid(
                "initial_modulus",
                format!("must be positive and finite, got {initial_modulus}"),
            ));
        }
        if !(pile_diameter > 0.0) || !pile_diameter.is_finite() {
            return Err(ConfigError::invalid(
                "pile_diameter",
                format!("must be positive and finite, got {pile_diameter}"),
            ));
        }
        if !(loading_factor > 0.0) || !loading_factor.is_finite() {
            return Err(ConfigError::invalid(
                "loading_factor",
                format!("must be positive and finite, got {loading_factor}"),
            ));
        }
        Ok(SoilProfile {
            unit_weight,
            friction_angle,
            initial_modulus,
            pile_diameter,
            loading_factor,
        })
    }

    /// Dense sand around a 9.5 m monopile: gamma' = 10 kN/m^3, phi = 35 deg,
    /// k = 22 MN/m^3, static loading factor 0.9.
    pub fn reference() -> Self {
        SoilProfile {
            unit_weight: 10.0e3,
            friction_angle: 35.0,
            initial_modulus: 22.0e6,
            pile_diameter: 9.5,
            loading_factor: 0.9,
        }
    }

    /// Closed-form resistance coefficients (C1, C2, C3) of the friction
    /// angle, with alpha = phi/2, beta = 45 deg + phi/2, K0 = 0.4 and
    /// Ka = tan^2(45 deg - phi/2).
    pub fn resistance_coefficients(&self) -> (f64, f64, f64) {
        let phi = self.friction_angle.to_radians();
        let alpha = phi / 2.0;
        let beta = std::f64::consts::FRAC_PI_4 + phi / 2.0;
        let k0 = 0.4;
        let ka = (std::f64::consts::FRAC_PI_4 - phi / 2.0).tan().powi(2);

        let tan_b = beta.tan();
        let tan_bp = (beta - phi).tan();
        let c1 = tan_b.powi(2) * alpha.tan() / tan_bp
            + k0 * (phi.tan() * beta.sin() / (alpha.cos() * tan_bp)
                + tan_b * (phi.tan() * beta.sin() - alpha.tan()));
        let c2 = tan_b / tan_bp - ka;
        let c3 = ka * (tan_b.powi(8) - 1.0) + k0 * phi.tan() * tan_b.powi(4);
        (c1, c2, c3)
    }

    /// Ultimate lateral resistance p_u (N/m) at depth z: the lesser of the
    /// shallow wedge value (C1 z + C2 D) gamma' z and the deep flow value
    /// C3 D gamma' z. Zero at the mudline, nondecreasing with depth.
    pub fn ultimate_resistance(&self, depth: f64) -> Result<f64, ConfigError> {
        if !(depth >= 0.0) {
            return Err(ConfigError::invalid(
                "depth",
                format!("must be nonnegative, got {depth}"),
            ));
        }
        let (c1, c2, c3) = self.resistance_coefficients();
        let d = self.pile_diameter;
        let shallow = (c1 * depth + c2 * d) * self.unit_weight * depth;
        let deep = c3 * d * self.unit_weight * depth;
        Ok(shallow.min(deep))
    }

    /// Distributed reaction p (N/m) at depth z for lateral deflection y.
    /// Odd in y, bounded by the scaled ultimate resistance, with slope k*z
    /// at the origin. At the mudline the resistance vanishes identically.
    pub fn reaction(&self, depth: f64, deflection: f64) -> f64 {
        assert!(depth >= 0.0, "depth must be nonnegative, got {depth}");
        let capacity = self.loading_factor
            * self
                .ultimate_resistance(depth)
                .expect("depth checked nonnegative");
        if capacity == 0.0 {
            return 0.0;
        }
        capacity * (self.initial_modulus * depth * deflection / capacity).tanh()
    }

    /// Tangent stiffness dp/dy (N/m^2) of the reaction at (z, y):
    /// k*z*sech^2(k*z*y / (A_f*p_u)). Even in y, maximal at y = 0.
    pub fn reaction_tangent(&self, depth: f64, deflection: f64) -> f64 {
        assert!(depth >= 0.0, "depth must be nonnegative, got {depth}");
        let capacity = self.loading_factor
            * self
                .ultimate_resistance(depth)
                .expect("depth checked nonnegative");
        if capacity == 0.0 {
            return 0.0;
        }
        let kz = self.initial_modulus * depth;
        // sech^2 via cosh; cosh overflows to +inf for large arguments and the
        // reciprocal then underflows cleanly to zero.
        let c = (kz * deflection / capacity).cosh();
        kz / (c * c)
    }
}

/// One lumped soil spring: a node's depth and the pile length it represents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalSpring {
    /// Depth of the node below mudline (m).
    pub depth: f64,
    /// Tributary pile length lumped into this spring (m).
    pub tributary_length: f64,
}

impl NodalSpring {
    pub fn new(depth: f64, tributary_length: f64) -> Result<Self, ConfigError> {
        if !(depth >= 0.0) || !depth.is_finite() {
            return Err(ConfigError::invalid(
                "depth",
                format!("must be nonnegative and finite, got {depth}"),
            ));
        }
        if !(tributary_length > 0.0) || !tributary_length.is_finite() {
            return Err(ConfigError::invalid(
                "tributary_length",
                format!("must be positive and finite, got {tributary_length}"),
            ));
        }
        Ok(NodalSpring {
            depth,
            tributary_length,
        })
    }

    /// Concentrated spring force (N): distributed reaction times tributary
    /// length. Inherits oddness and the bound A_f * p_u * L_trib.
    pub fn force(&self, soil: &SoilProfile, deflection: f64) -> f64 {
        self.tributary_length * soil.reaction(self.depth, deflection)
    }

    /// Concentrated tangent stiffness (N/m).
    pub fn tangent(&self, soil: &SoilProfile, deflection: f64) -> f64 {
        self.tributary_length * soil.reaction_tangent(self.depth, deflection)
    }
}
