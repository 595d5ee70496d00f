//! φ-theory aerodynamic and thrust model.
//!
//! Forces are expressed in the zero-lift frame `α`, moments in the body frame.
//! Air density is folded into the coefficients. Motor 1 sits on the −b_y wing,
//! motor 2 on the +b_y wing.

use serde::{Deserialize, Serialize};

use crate::frames::zero_lift_rotation;
use crate::{Mat3, Vec3, GRAVITY};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AeroError {
    #[error("motor speed must be non-negative, got {0} rad/s")]
    NegativeSpeed(f64),
    #[error("invalid vehicle parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

/// Where a coefficient value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytical,
    Experimental,
    #[default]
    Custom,
}

/// Static throttle curve `q = c0 + c1·ω + c2·ω²` relating motor speed to ESC
/// throttle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrottleCurve {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl ThrottleCurve {
    pub fn eval(&self, omega: f64) -> f64 {
        self.c0 + self.c1 * omega + self.c2 * omega * omega
    }

    /// Motor speed producing throttle `q` (largest non-negative root, 0 when
    /// `q` is below the curve's idle value).
    pub fn inverse(&self, q: f64) -> f64 {
        let d = self.c0 - q;
        if d >= 0.0 {
            return 0.0;
        }
        if self.c2.abs() < 1e-300 {
            return (-d / self.c1).max(0.0);
        }
        let disc = self.c1 * self.c1 - 4.0 * self.c2 * d;
        ((-self.c1 + disc.max(0.0).sqrt()) / (2.0 * self.c2)).max(0.0)
    }
}

/// Mass, inertia, geometry and propulsion properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// kg·m², body frame
    pub inertia: Mat3,
    /// Lateral motor arm, m.
    pub l_ty: f64,
    /// Lateral flap arm, m.
    pub l_dy: f64,
    /// Longitudinal distance to the flap aerodynamic centre, m.
    pub l_dx: f64,
    /// Zero-lift angle of attack, rad.
    pub alpha0: f64,
    /// Thrust-line angle, rad.
    pub alpha_t: f64,
    /// Thrust coefficient, N·s²/rad².
    pub c_t: f64,
    /// Propeller torque coefficient, N·m·s²/rad².
    pub c_mu: f64,
    pub throttle: ThrottleCurve,
    /// Mechanical flap limit, rad.
    pub delta_max: f64,
}

impl VehicleParams {
    /// ᾱ = α0 + αT.
    pub fn alpha_bar(&self) -> f64 {
        self.alpha0 + self.alpha_t
    }

    pub fn weight(&self) -> f64 {
        self.mass * GRAVITY
    }

    /// Highest motor speed reachable at full throttle.
    pub fn omega_max(&self) -> f64 {
        self.throttle.inverse(1.0)
    }

    pub fn validate(&self) -> Result<(), AeroError> {
        let bad = |name, reason: &str| AeroError::InvalidParam {
            name,
            reason: reason.to_string(),
        };
        if !(self.mass > 0.0) {
            return Err(bad("mass", "must be positive"));
        }
        if (self.inertia - self.inertia.transpose()).amax() > 1e-12 {
            return Err(bad("inertia", "must be symmetric"));
        }
        if self.inertia.cholesky().is_none() {
            return Err(bad("inertia", "must be positive definite"));
        }
        for (name, v) in [
            ("l_ty", self.l_ty),
            ("l_dy", self.l_dy),
            ("c_t", self.c_t),
            ("c_mu", self.c_mu),
            ("delta_max", self.delta_max),
        ] {
            if !(v > 0.0) {
                return Err(bad(name, "must be positive"));
            }
        }
        if self.alpha0.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(bad("alpha0", "must satisfy |alpha0| < pi/2"));
        }
        Ok(())
    }
}

/// The φ-theory coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeroCoeffs {
    /// Wing drag, kg/m.
    pub c_dv: f64,
    /// Wing lift, kg/m.
    pub c_lv: f64,
    /// Propwash drag, dimensionless.
    pub c_dt: f64,
    /// Propwash lift, dimensionless.
    pub c_lt: f64,
    /// Flap lift from airspeed, kg/m.
    pub c_dlv: f64,
    /// Flap lift from propwash, dimensionless.
    pub c_dlt: f64,
    /// Pitch moment arm of thrust, m.
    pub c_mu_t: f64,
    pub provenance: Provenance,
}

impl AeroCoeffs {
    pub fn validate(&self) -> Result<(), AeroError> {
        for (name, v) in [
            ("c_lv", self.c_lv),
            ("c_dlv", self.c_dlv),
            ("c_dt", self.c_dt),
            ("c_dv", self.c_dv),
        ] {
            if !(v >= 0.0) {
                return Err(AeroError::InvalidParam {
                    name,
                    reason: "must be non-negative".into(),
                });
            }
        }
        Ok(())
    }
}

/// Rotor speeds and flap deflections.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorState {
    /// rad/s, ≥ 0
    pub omega: [f64; 2],
    /// rad
    pub delta: [f64; 2],
}

impl ActuatorState {
    pub fn thrusts(&self, params: &VehicleParams) -> Result<[f64; 2], AeroError> {
        Ok([
            motor_thrust(self.omega[0], params)?,
            motor_thrust(self.omega[1], params)?,
        ])
    }
}

/// `T = c_T ω²`.
pub fn motor_thrust(omega: f64, params: &VehicleParams) -> Result<f64, AeroError> {
    if omega < 0.0 {
        return Err(AeroError::NegativeSpeed(omega));
    }
    Ok(params.c_t * omega * omega)
}

/// Per-contribution zero-lift-frame force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBreakdown {
    pub thrust: [Vec3; 2],
    pub flap: [Vec3; 2],
    pub wing: Vec3,
}

impl ForceBreakdown {
    pub fn thrust_total(&self) -> Vec3 {
        self.thrust[0] + self.thrust[1]
    }
    pub fn flap_total(&self) -> Vec3 {
        self.flap[0] + self.flap[1]
    }
    pub fn total(&self) -> Vec3 {
        self.thrust_total() + self.flap_total() + self.wing
    }
}

/// Per-contribution body-frame moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentBreakdown {
    pub thrust: Vec3,
    pub torque: Vec3,
    pub flap: Vec3,
}

impl MomentBreakdown {
    pub fn total(&self) -> Vec3 {
        self.thrust + self.torque + self.flap
    }
}

/// Thrust force of a single motor in the zero-lift frame.
pub fn thrust_force(thrust: f64, params: &VehicleParams, coeffs: &AeroCoeffs) -> Vec3 {
    let (s, c) = params.alpha_bar().sin_cos();
    Vec3::new(c * (1.0 - coeffs.c_dt), 0.0, s * (coeffs.c_lt - 1.0)) * thrust
}

/// Flap lift per unit deflection for flap `i` with motor thrust `thrust`:
/// `ν = −c^δ_LT cos ᾱ T − c^δ_LV ‖v‖ v_x^α`, so that `f_δ,z = ν δ`.
pub fn flap_effectiveness(thrust: f64, v_alpha: &Vec3, speed: f64, params: &VehicleParams, coeffs: &AeroCoeffs) -> f64 {
    -coeffs.c_dlt * params.alpha_bar().cos() * thrust - coeffs.c_dlv * speed * v_alpha.x
}

/// Zero-lift force from explicit motor thrusts.
pub fn force_from_thrusts(
    thrusts: [f64; 2],
    delta: [f64; 2],
    v_alpha: &Vec3,
    speed: f64,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> ForceBreakdown {
    let thrust = [
        thrust_force(thrusts[0], params, coeffs),
        thrust_force(thrusts[1], params, coeffs),
    ];
    let flap = [0, 1].map(|i| {
        Vec3::new(
            0.0,
            0.0,
            flap_effectiveness(thrusts[i], v_alpha, speed, params, coeffs) * delta[i],
        )
    });
    let wing = -Vec3::new(coeffs.c_dv * v_alpha.x, 0.0, coeffs.c_lv * v_alpha.z) * speed;
    ForceBreakdown { thrust, flap, wing }
}

/// Total aerodynamic and thrust force in the zero-lift frame.
///
/// `speed` is the total airspeed ‖v‖ that scales the velocity terms.
pub fn force_zero_lift(
    act: &ActuatorState,
    v_alpha: &Vec3,
    speed: f64,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> Result<ForceBreakdown, AeroError> {
    Ok(force_from_thrusts(
        act.thrusts(params)?,
        act.delta,
        v_alpha,
        speed,
        params,
        coeffs,
    ))
}

/// Body moment from explicit thrusts. Motor torques use `μ_i = ∓(c_μ/c_T) T_i`.
pub fn moment_from_thrusts(
    thrusts: [f64; 2],
    delta: [f64; 2],
    v_alpha: &Vec3,
    speed: f64,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> MomentBreakdown {
    let f = force_from_thrusts(thrusts, delta, v_alpha, speed, params, coeffs);
    let alpha_to_body = zero_lift_rotation(params.alpha0).inverse();
    let ft1 = alpha_to_body.apply(&f.thrust[0]);
    let ft2 = alpha_to_body.apply(&f.thrust[1]);
    let thrust = Vec3::new(
        params.l_ty * (ft2.z - ft1.z),
        coeffs.c_mu_t * (thrusts[0] + thrusts[1]),
        params.l_ty * (ft1.x - ft2.x),
    );

    // μ1 = c_μ ω1², μ2 = −c_μ ω2²
    let mu_sum = torque_per_thrust(params) * (thrusts[0] - thrusts[1]);
    let (st, ct) = params.alpha_t.sin_cos();
    let torque = Vec3::new(ct, 0.0, -st) * mu_sum;

    let (s0, c0) = params.alpha0.sin_cos();
    let (fd1, fd2) = (f.flap[0].z, f.flap[1].z);
    let flap = Vec3::new(
        params.l_dy * c0 * (fd2 - fd1),
        params.l_dx * (fd1 + fd2),
        params.l_dy * s0 * (fd2 - fd1),
    );
    MomentBreakdown { thrust, torque, flap }
}

/// `c_μ/c_T`, zero for a vehicle without thrust.
fn torque_per_thrust(params: &VehicleParams) -> f64 {
    if params.c_t > 0.0 {
        params.c_mu / params.c_t
    } else {
        0.0
    }
}

/// Total aerodynamic and thrust moment in the body frame.
pub fn moment_body(
    act: &ActuatorState,
    v_alpha: &Vec3,
    speed: f64,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> Result<MomentBreakdown, AeroError> {
    Ok(moment_from_thrusts(
        act.thrusts(params)?,
        act.delta,
        v_alpha,
        speed,
        params,
        coeffs,
    ))
}

/// Denominator of the differential-thrust inversion: yaw moment per unit ΔT
/// when the flap yaw contribution is neglected.
pub fn yaw_moment_per_differential_thrust(params: &VehicleParams, coeffs: &AeroCoeffs) -> f64 {
    let (s0, c0) = params.alpha0.sin_cos();
    let (sb, cb) = params.alpha_bar().sin_cos();
    params.l_ty * (c0 * cb * (1.0 - coeffs.c_dt) - s0 * sb * (coeffs.c_lt - 1.0))
        - params.alpha_t.sin() * torque_per_thrust(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::defaults;

    fn setup() -> (VehicleParams, AeroCoeffs) {
        (defaults::vehicle_params(), defaults::experimental_coeffs())
    }

    #[test]
    fn thrust_quadratic() {
        let (p, _) = setup();
        assert_eq!(motor_thrust(0.0, &p).unwrap(), 0.0);
        assert!(matches!(motor_thrust(-1.0, &p), Err(AeroError::NegativeSpeed(_))));
        // hover force balance: half the weight per motor at ~200 rev/s
        let omega_hover = 2.0 * std::f64::consts::PI * 200.0;
        let c_t = 0.7 * GRAVITY / 2.0 / (omega_hover * omega_hover);
        assert!((c_t - 2.17e-6).abs() < 0.01e-6);
        let mut q = p.clone();
        q.c_t = c_t;
        assert!((motor_thrust(omega_hover, &q).unwrap() - 3.4335).abs() < 1e-9);
        let mut last = 0.0;
        for k in 1..100 {
            let t = motor_thrust(k as f64 * 25.0, &p).unwrap();
            assert!(t > last);
            last = t;
        }
    }

    #[test]
    fn static_force_is_pure_thrust() {
        let (p, c) = setup();
        let omega = 1200.0;
        let act = ActuatorState {
            omega: [omega; 2],
            delta: [0.0; 2],
        };
        let f = force_zero_lift(&act, &Vec3::zeros(), 0.0, &p, &c).unwrap();
        let t = p.c_t * omega * omega;
        let ab = p.alpha_bar();
        let expected = Vec3::new(
            ab.cos() * (1.0 - c.c_dt) * 2.0 * t,
            0.0,
            ab.sin() * (c.c_lt - 1.0) * 2.0 * t,
        );
        assert!((f.total() - expected).amax() < 1e-12);
    }

    #[test]
    fn flap_force_is_linear_in_deflection() {
        let (p, c) = setup();
        let v = Vec3::new(3.0, 0.5, -0.4);
        let s = v.norm();
        let f1 = force_from_thrusts([2.0, 3.0], [0.1, -0.2], &v, s, &p, &c);
        let f2 = force_from_thrusts([2.0, 3.0], [0.2, -0.4], &v, s, &p, &c);
        assert!((f2.flap_total() - 2.0 * f1.flap_total()).amax() < 1e-15);
        assert_eq!(f1.total().y, 0.0);
    }

    #[test]
    fn symmetric_inputs_cancel_roll_and_yaw() {
        let (p, c) = setup();
        let v = Vec3::new(4.0, 0.0, 0.3);
        let m = moment_from_thrusts([3.0, 3.0], [-0.2, -0.2], &v, v.norm(), &p, &c);
        assert!(m.thrust.x.abs() < 1e-15 && m.thrust.z.abs() < 1e-15);
        assert!(m.flap.x.abs() < 1e-15 && m.flap.z.abs() < 1e-15);
        assert!(m.torque.norm() < 1e-15);
    }

    #[test]
    fn differential_thrust_yaw_matches_inversion_denominator() {
        let (p, c) = setup();
        let (t1, t2) = (4.0, 3.0);
        let m = moment_from_thrusts([t1, t2], [0.0; 2], &Vec3::zeros(), 0.0, &p, &c);
        let den = yaw_moment_per_differential_thrust(&p, &c);
        assert!(den > 0.0);
        assert!((m.total().z - den * (t1 - t2)).abs() < 1e-12);
    }

    #[test]
    fn hover_trim_flaps_cancel_thrust_pitch_moment() {
        let (p, c) = setup();
        let t = p.weight() / 2.0;
        let m = moment_from_thrusts([t, t], [-0.27, -0.27], &Vec3::zeros(), 0.0, &p, &c);
        // c_μT = −0.025 m is the rounded trim value, residual is the rounding
        assert!(m.total().y.abs() < 0.01 * p.weight() * 0.025);
    }

    #[test]
    fn throttle_curve_inverse() {
        let (p, _) = setup();
        for q in [0.1, 0.35, 0.55, 0.9, 1.0] {
            let w = p.throttle.inverse(q);
            assert!((p.throttle.eval(w) - q).abs() < 1e-12);
        }
        assert!((p.throttle.eval(1257.0) - 0.55).abs() < 0.005);
        assert_eq!(p.throttle.inverse(-0.1), 0.0);
    }

    #[test]
    fn default_params_validate() {
        let (p, c) = setup();
        p.validate().unwrap();
        c.validate().unwrap();
        let mut bad = p.clone();
        bad.mass = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.c_dv = -0.1;
        assert!(bad.validate().is_err());
    }
}
