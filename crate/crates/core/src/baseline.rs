//! Ablation variants: feedforward on/off × incremental on/off, with attitude
//! integral action for the non-incremental laws.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::controller::{attitude_error, ControllerGains};
use crate::frames::UnitQuat;
use crate::{Mat3, Vec3, GRAVITY};

/// Serialized by name, e.g. `"baseline+ff"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ControllerVariant {
    /// Use the flatness angular-rate reference.
    pub feedforward: bool,
    /// Incremental force and moment laws.
    pub incremental: bool,
}

impl ControllerVariant {
    pub const PROPOSED: Self = Self {
        feedforward: true,
        incremental: true,
    };
    pub const BASELINE: Self = Self {
        feedforward: false,
        incremental: false,
    };
    pub const BASELINE_FF: Self = Self {
        feedforward: true,
        incremental: false,
    };
    pub const BASELINE_INDI: Self = Self {
        feedforward: false,
        incremental: true,
    };

    pub const ALL: [Self; 4] = [Self::PROPOSED, Self::BASELINE, Self::BASELINE_FF, Self::BASELINE_INDI];

    pub fn name(&self) -> &'static str {
        match (self.feedforward, self.incremental) {
            (true, true) => "proposed",
            (false, false) => "baseline",
            (true, false) => "baseline+ff",
            (false, true) => "baseline+indi",
        }
    }

    /// Gains for this variant: the attitude integrator is active only for the
    /// non-incremental laws.
    pub fn adjust_gains(&self, gains: &ControllerGains) -> ControllerGains {
        let mut g = gains.clone();
        if self.incremental {
            g.k_i_xi = Vec3::zeros();
        } else if g.k_i_xi == Vec3::zeros() {
            g.k_i_xi = default_attitude_integral_gain();
        }
        g
    }
}

impl Default for ControllerVariant {
    fn default() -> Self {
        Self::PROPOSED
    }
}

impl fmt::Display for ControllerVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown variant `{s}` (proposed, baseline, baseline+ff, baseline+indi)"))
    }
}

impl TryFrom<String> for ControllerVariant {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ControllerVariant> for String {
    fn from(v: ControllerVariant) -> String {
        v.name().to_string()
    }
}

/// Attitude integral gain used by the non-incremental variants, 1/s³.
pub fn default_attitude_integral_gain() -> Vec3 {
    Vec3::repeat(200.0)
}

/// `f_c = m(a_c − g i_z)`: direct inversion without force feedback.
pub fn direct_force_command(accel_cmd: &Vec3, mass: f64) -> Vec3 {
    mass * (accel_cmd - GRAVITY * Vec3::z())
}

/// `m_c = J Ω̇_c + Ω × J Ω`.
pub fn direct_moment_command(omega_dot_cmd: &Vec3, omega: &Vec3, inertia: &Mat3) -> Vec3 {
    inertia * omega_dot_cmd + omega.cross(&(inertia * omega))
}

/// Attitude PID state: `Ω̇_c = K_ξ ζ + K_Ω(Ω_ref − Ω) + K_Iξ ∫ζ dt`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AttitudePid {
    pub integral: Vec3,
}

impl AttitudePid {
    /// With `omega_ref = 0` this is the plain rate-damped PID.
    /// `saturated` freezes the integrator.
    pub fn step(
        &mut self,
        cmd: &UnitQuat,
        attitude: &UnitQuat,
        omega_ref: &Vec3,
        omega: &Vec3,
        gains: &ControllerGains,
        dt: f64,
        saturated: bool,
    ) -> Vec3 {
        let zeta = attitude_error(attitude, cmd);
        if !saturated {
            self.integral += zeta * dt;
        }
        gains.k_xi.component_mul(&zeta)
            + gains.k_omega.component_mul(&(omega_ref - omega))
            + gains.k_i_xi.component_mul(&self.integral)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::defaults;

    #[test]
    fn variant_names_roundtrip() {
        for v in ControllerVariant::ALL {
            assert_eq!(v.name().parse::<ControllerVariant>().unwrap(), v);
        }
        assert!("nope".parse::<ControllerVariant>().is_err());
    }

    #[test]
    fn integrator_only_for_direct_laws() {
        let g = defaults::gains();
        assert_eq!(ControllerVariant::PROPOSED.adjust_gains(&g).k_i_xi, Vec3::zeros());
        assert!(ControllerVariant::BASELINE.adjust_gains(&g).k_i_xi.min() > 0.0);
    }

    #[test]
    fn direct_force_cases() {
        let m = 0.7;
        assert!((direct_force_command(&Vec3::zeros(), m) - Vec3::new(0.0, 0.0, -m * GRAVITY)).norm() < 1e-12);
        assert!(direct_force_command(&(GRAVITY * Vec3::z()), m).norm() < 1e-12);
    }

    #[test]
    fn direct_moment_hand_case() {
        let j = Mat3::from_diagonal(&Vec3::new(4e-3, 1.5e-3, 5.5e-3));
        assert_eq!(direct_moment_command(&Vec3::zeros(), &Vec3::zeros(), &j), Vec3::zeros());
        let w = Vec3::new(1.0, 2.0, 3.0);
        // ω × Jω = (2·16.5e-3 − 3·3e-3, 3·4e-3 − 16.5e-3, 3e-3 − 2·4e-3)
        let m = direct_moment_command(&Vec3::new(10.0, 0.0, 0.0), &w, &j);
        let hand = Vec3::new(0.04 + 0.024, -0.0045, -0.005);
        assert!((m - hand).norm() < 1e-15);
    }

    #[test]
    fn integral_contribution() {
        let g = ControllerGains {
            k_xi: Vec3::zeros(),
            k_omega: Vec3::zeros(),
            k_i_xi: Vec3::repeat(10.0),
            ..Default::default()
        };
        let err = UnitQuat::from_axis_angle(Vec3::x(), 0.01);
        let mut pid = AttitudePid::default();
        let mut out = Vec3::zeros();
        for _ in 0..2000 {
            out = pid.step(
                &err,
                &UnitQuat::identity(),
                &Vec3::zeros(),
                &Vec3::zeros(),
                &g,
                5e-4,
                false,
            );
        }
        assert!((out.x - 0.1).abs() < 1e-9);
    }

    #[test]
    fn zero_error_output_decays_with_rate() {
        let g = defaults::gains();
        let q = UnitQuat::identity();
        let mut pid = AttitudePid::default();
        let out = pid.step(&q, &q, &Vec3::zeros(), &Vec3::new(0.5, 0.0, 0.0), &g, 5e-4, false);
        assert!(out.x < 0.0 && out.y == 0.0);
    }
}
