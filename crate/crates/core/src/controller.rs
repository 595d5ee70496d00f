//! Cascaded trajectory-tracking controller with incremental (INDI) force and
//! moment updates.
//!
//! Pipeline per step: PD position/velocity → incremental force command →
//! flatness attitude/thrust → PD attitude with angular-rate feedforward →
//! incremental moment command → flatness input allocation → motor speed
//! integrators.

use serde::{Deserialize, Serialize};

use crate::aero::{flap_effectiveness, force_from_thrusts, moment_from_thrusts, AeroCoeffs, VehicleParams};
use crate::baseline::{direct_force_command, direct_moment_command, AttitudePid, ControllerVariant};
use crate::filters::{BackwardDifference, Biquad, Vec3Filter};
use crate::flatness::{angular_velocity, attitude_thrust, inputs_from_moment_thrust, FlatContext, FlatOutput};
use crate::frames::{rot_y, UnitQuat};
use crate::sim::ActuatorCommand;
use crate::{Mat3, Vec3, GRAVITY};

/// Diagonal gain matrices are stored as their diagonals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerGains {
    /// Position, 1/s², body axes.
    pub k_x: Vec3,
    /// Velocity, 1/s, body axes.
    pub k_v: Vec3,
    /// Acceleration error, dimensionless, body axes.
    pub k_a: Vec3,
    /// Attitude, 1/s².
    pub k_xi: Vec3,
    /// Angular rate, 1/s.
    pub k_omega: Vec3,
    /// Motor speed integrator, throttle/(rad/s·s).
    pub k_i_omega: f64,
    /// Attitude integrator (non-incremental variants only), 1/s³.
    pub k_i_xi: Vec3,
    /// Low-pass cutoff for all measured signals, Hz.
    pub lpf_cutoff: f64,
    /// High-pass cutoff isolating transient flap motion, Hz.
    pub hpf_cutoff: f64,
    /// Control rate, Hz.
    pub rate: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_x: Vec3::repeat(9.0),
            k_v: Vec3::repeat(6.0),
            k_a: Vec3::zeros(),
            k_xi: Vec3::new(250.0, 160.0, 150.0),
            k_omega: Vec3::new(30.0, 26.0, 24.0),
            k_i_omega: 1e-4,
            k_i_xi: Vec3::zeros(),
            lpf_cutoff: 15.0,
            hpf_cutoff: 1.0,
            rate: 2000.0,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.k_x, self.k_v, self.k_a, self.k_xi, self.k_omega, self.k_i_xi];
        if all.iter().any(|g| g.iter().any(|x| !(*x >= 0.0))) || !(self.k_i_omega >= 0.0) {
            return Err("gains must be non-negative".into());
        }
        if self.k_a.iter().any(|x| *x >= 1.0) {
            return Err("acceleration gains must be below 1".into());
        }
        if !(self.rate > 0.0) {
            return Err("control rate must be positive".into());
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate
    }
}

/// One control-rate sample of measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: UnitQuat,
    /// Specific force, body axes, m/s².
    pub accel_body: Vec3,
    pub gyro: Vec3,
    pub omega_meas: [f64; 2],
    pub delta_meas: [f64; 2],
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Flags {
    pub thrust_saturated: bool,
    pub flap_saturated: bool,
    pub throttle_saturated: bool,
    pub degenerate_force: bool,
    /// Allocation failed; previous command held.
    pub fault: bool,
}

impl Flags {
    pub fn any_saturation(&self) -> bool {
        self.thrust_saturated || self.flap_saturated || self.throttle_saturated
    }
}

/// Intermediate commands and implied disturbance estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub accel_cmd: Vec3,
    pub force_cmd: Vec3,
    pub attitude_cmd: UnitQuat,
    pub thrust_cmd: f64,
    pub omega_ref: Vec3,
    pub omega_dot_cmd: Vec3,
    pub moment_cmd: Vec3,
    pub omega_cmd: [f64; 2],
    pub attitude_error: Vec3,
    /// Implied unmodeled world force, N.
    pub f_ext_est: Vec3,
    /// Implied unmodeled body moment, N·m.
    pub m_ext_est: Vec3,
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    /// Throttle in [0, 1].
    pub throttle: [f64; 2],
    /// Flap commands, rad, within ±δ_max.
    pub delta: [f64; 2],
    pub diagnostics: Diagnostics,
}

impl ControlCommand {
    pub fn actuator(&self) -> ActuatorCommand {
        ActuatorCommand {
            throttle: self.throttle,
            delta: self.delta,
        }
    }
}

/// Three-element attitude error from the error quaternion `ξ⁻¹ ∘ ξ_c`.
///
/// Scales the vector part by `2 acos(w)/sqrt(1 − w²)`; the small-angle limit
/// is `2·(x, y, z)`.
pub fn attitude_error(attitude: &UnitQuat, cmd: &UnitQuat) -> Vec3 {
    let e = attitude.inverse().hamilton(cmd);
    let v = Vec3::new(e.x(), e.y(), e.z());
    let n = v.norm();
    if n < 1e-12 {
        return 2.0 * v;
    }
    v * (2.0 * n.atan2(e.w()) / n)
}

/// Position/velocity PD with acceleration feedback and feedforward; gains act
/// in body axes.
pub fn pd_position(
    reference: &FlatOutput,
    position: &Vec3,
    velocity: &Vec3,
    attitude: &UnitQuat,
    accel_filtered: &Vec3,
    gains: &ControllerGains,
) -> Vec3 {
    let e_x = attitude.inverse_rotate(&(reference.position - position));
    let e_v = attitude.inverse_rotate(&(reference.velocity - velocity));
    let e_a = attitude.inverse_rotate(&(reference.acceleration - accel_filtered));
    let body = gains.k_x.component_mul(&e_x) + gains.k_v.component_mul(&e_v) + gains.k_a.component_mul(&e_a);
    attitude.rotate(&body) + reference.acceleration
}

/// `Ω̇_c = K_ξ ζ + K_Ω(Ω_ref − Ω_lpf)`.
pub fn pd_attitude(
    cmd: &UnitQuat,
    attitude: &UnitQuat,
    omega_ref: &Vec3,
    omega_lpf: &Vec3,
    gains: &ControllerGains,
) -> Vec3 {
    let zeta = attitude_error(attitude, cmd);
    gains.k_xi.component_mul(&zeta) + gains.k_omega.component_mul(&(omega_ref - omega_lpf))
}

/// `f_c = m(a_c − ã_lpf) + f_lpf`.
pub fn indi_linear(accel_cmd: &Vec3, accel_filtered: &Vec3, force_lpf: &Vec3, mass: f64) -> Vec3 {
    mass * (accel_cmd - accel_filtered) + force_lpf
}

/// `m_c = J(Ω̇_c − Ω̇_lpf) + m_lpf`.
pub fn indi_angular(omega_dot_cmd: &Vec3, omega_dot_lpf: &Vec3, moment_lpf: &Vec3, inertia: &Mat3) -> Vec3 {
    inertia * (omega_dot_cmd - omega_dot_lpf) + moment_lpf
}

/// Removes the acceleration caused by transient flap motion:
/// `ã = a − m⁻¹ R^i_α f^α_δ(δ_hpf)`. `alpha_to_world` maps zero-lift to world.
pub fn transient_flap_correction(
    accel: &Vec3,
    delta_hpf: [f64; 2],
    thrusts: [f64; 2],
    v_alpha: &Vec3,
    speed: f64,
    alpha_to_world: &Mat3,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> Vec3 {
    let fz: f64 = (0..2)
        .map(|i| flap_effectiveness(thrusts[i], v_alpha, speed, params, coeffs) * delta_hpf[i])
        .sum();
    accel - alpha_to_world * Vec3::new(0.0, 0.0, fz) / params.mass
}

/// Throttle from a speed command with an integrator on the speed error.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotorSpeedController {
    pub integral: f64,
}

impl MotorSpeedController {
    /// Returns the throttle and whether it saturated. The integrator freezes
    /// when saturated in the direction of the error.
    pub fn step(&mut self, omega_cmd: f64, omega_meas: f64, params: &VehicleParams, k_i: f64, dt: f64) -> (f64, bool) {
        let err = omega_cmd - omega_meas;
        let ff = params.throttle.eval(omega_cmd);
        let trial = self.integral + err * dt;
        let q = ff + k_i * trial;
        let sat_hi = q > 1.0 && err > 0.0;
        let sat_lo = q < 0.0 && err < 0.0;
        if !(sat_hi || sat_lo) {
            self.integral = trial;
        }
        let q = ff + k_i * self.integral;
        (q.clamp(0.0, 1.0), !(0.0..=1.0).contains(&q))
    }
}

/// The full controller. Owns all filter and integrator state.
#[derive(Debug, Clone)]
pub struct Controller {
    pub params: VehicleParams,
    pub coeffs: AeroCoeffs,
    pub gains: ControllerGains,
    pub variant: ControllerVariant,
    accel_lpf: Vec3Filter,
    vel_body_lpf: Vec3Filter,
    gyro_lpf: Vec3Filter,
    motor_lpf: [Biquad; 2],
    flap_lpf: [Biquad; 2],
    flap_hpf: [Biquad; 2],
    omega_dot: BackwardDifference,
    motors: [MotorSpeedController; 2],
    attitude_pid: AttitudePid,
    last: Option<ControlCommand>,
}

impl Controller {
    pub fn new(params: VehicleParams, coeffs: AeroCoeffs, gains: ControllerGains, variant: ControllerVariant) -> Self {
        let fs = gains.rate;
        let lp = Biquad::lowpass(gains.lpf_cutoff, fs).expect("valid low-pass cutoff");
        let hp = Biquad::highpass(gains.hpf_cutoff, fs).expect("valid high-pass cutoff");
        Self {
            accel_lpf: Vec3Filter::new(lp.clone()),
            vel_body_lpf: Vec3Filter::new(lp.clone()),
            gyro_lpf: Vec3Filter::new(lp.clone()),
            motor_lpf: [lp.clone(), lp.clone()],
            flap_lpf: [lp.clone(), lp],
            flap_hpf: [hp.clone(), hp],
            omega_dot: BackwardDifference::new(gains.dt()),
            motors: Default::default(),
            attitude_pid: AttitudePid::default(),
            last: None,
            params,
            coeffs,
            gains,
            variant,
        }
    }

    /// One control update.
    pub fn step(&mut self, reference: &FlatOutput, s: &SensorFrame) -> ControlCommand {
        let p = self.params.clone();
        let c = self.coeffs.clone();
        let g = self.gains.clone();
        let dt = g.dt();
        let m = p.mass;
        let mut flags = Flags::default();

        // measurement filtering
        let r_bi = s.attitude.to_matrix();
        let alpha_to_body = rot_y(p.alpha0).transpose();
        let alpha_to_world = r_bi * alpha_to_body;
        let a_b_lpf = self.accel_lpf.step(&s.accel_body);
        let v_b_lpf = self.vel_body_lpf.step(&s.attitude.inverse_rotate(&s.velocity));
        let omega_lpf = self.gyro_lpf.step(&s.gyro);
        let omega_dot_lpf = self.omega_dot.step(&omega_lpf);
        let omega_f: [f64; 2] = std::array::from_fn(|i| self.motor_lpf[i].step(s.omega_meas[i]).max(0.0));
        let delta_lpf: [f64; 2] = std::array::from_fn(|i| self.flap_lpf[i].step(s.delta_meas[i]));
        let delta_hpf: [f64; 2] = std::array::from_fn(|i| self.flap_hpf[i].step(delta_lpf[i]));
        let delta_low = [delta_lpf[0] - delta_hpf[0], delta_lpf[1] - delta_hpf[1]];
        let thrust_lpf = omega_f.map(|w| p.c_t * w * w);

        // filtered model force/moment at the filtered airspeed
        let v_alpha_lpf = rot_y(p.alpha0) * v_b_lpf;
        let speed_lpf = v_b_lpf.norm();
        let f_lpf_alpha = force_from_thrusts(thrust_lpf, delta_low, &v_alpha_lpf, speed_lpf, &p, &c);
        let f_lpf = alpha_to_world * f_lpf_alpha.total();
        let m_lpf = moment_from_thrusts(thrust_lpf, delta_lpf, &v_alpha_lpf, speed_lpf, &p, &c).total();

        let a_lpf = r_bi * a_b_lpf + GRAVITY * Vec3::z();
        let a_tilde = transient_flap_correction(
            &a_lpf,
            delta_hpf,
            thrust_lpf,
            &v_alpha_lpf,
            speed_lpf,
            &alpha_to_world,
            &p,
            &c,
        );

        // outer loop
        let accel_cmd = pd_position(reference, &s.position, &s.velocity, &s.attitude, &a_tilde, &g);
        let force_cmd = if self.variant.incremental {
            indi_linear(&accel_cmd, &a_tilde, &f_lpf, m)
        } else {
            direct_force_command(&accel_cmd, m)
        };

        let delta_sum = delta_low[0] + delta_low[1];
        let sol = attitude_thrust(&force_cmd, reference.yaw, &s.velocity, delta_sum, &s.attitude, &p, &c);
        flags.degenerate_force = sol.degenerate;

        let omega_ref = if self.variant.feedforward {
            let ctx = FlatContext {
                force: force_cmd,
                force_dot: m * reference.jerk,
                force_ddot: m * reference.snap,
                velocity: s.velocity,
                acceleration: reference.acceleration,
                jerk: reference.jerk,
                yaw: reference.yaw,
                yaw_rate: reference.yaw_rate,
                yaw_accel: reference.yaw_accel,
                delta: delta_sum,
            };
            angular_velocity(&ctx, &sol, &p, &c)
        } else {
            Vec3::zeros()
        };

        // inner loop
        let zeta = attitude_error(&s.attitude, &sol.attitude);
        let (omega_dot_cmd, moment_cmd) = if self.variant.incremental {
            let w_dot = pd_attitude(&sol.attitude, &s.attitude, &omega_ref, &omega_lpf, &g);
            (w_dot, indi_angular(&w_dot, &omega_dot_lpf, &m_lpf, &p.inertia))
        } else {
            // the integrator freezes while the previous command saturated
            let saturated = self.last.map(|c| c.diagnostics.flags.any_saturation()).unwrap_or(false);
            let w_dot = self
                .attitude_pid
                .step(&sol.attitude, &s.attitude, &omega_ref, &omega_lpf, &g, dt, saturated);
            (w_dot, direct_moment_command(&w_dot, &omega_lpf, &p.inertia))
        };

        let v_alpha = rot_y(p.alpha0) * s.attitude.inverse_rotate(&s.velocity);
        let speed = s.velocity.norm();
        let f_ext_est = m * (a_lpf - GRAVITY * Vec3::z()) - f_lpf;
        let m_ext_est = p.inertia * omega_dot_lpf - m_lpf + omega_lpf.cross(&(p.inertia * omega_lpf));

        let mut diag = Diagnostics {
            accel_cmd,
            force_cmd,
            attitude_cmd: sol.attitude,
            thrust_cmd: sol.thrust,
            omega_ref,
            omega_dot_cmd,
            moment_cmd,
            omega_cmd: [0.0; 2],
            attitude_error: zeta,
            f_ext_est,
            m_ext_est,
            flags,
        };

        let inputs = match inputs_from_moment_thrust(&moment_cmd, sol.thrust, &v_alpha, speed, &p, &c) {
            Ok(inp) => inp,
            Err(_) => {
                diag.flags.fault = true;
                let mut held = self.last.unwrap_or_default();
                held.diagnostics = diag;
                return held;
            }
        };
        diag.flags.thrust_saturated = inputs.thrust_saturated;
        diag.flags.flap_saturated = inputs.flap_saturated;
        diag.omega_cmd = inputs.omega;

        let mut throttle = [0.0; 2];
        for i in 0..2 {
            let (q, sat) = self.motors[i].step(inputs.omega[i], s.omega_meas[i], &p, g.k_i_omega, dt);
            throttle[i] = q;
            diag.flags.throttle_saturated |= sat;
        }

        let cmd = ControlCommand {
            throttle,
            delta: inputs.delta,
            diagnostics: diag,
        };
        self.last = Some(cmd);
        cmd
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::defaults;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn pd_position_cases() {
        let g = ControllerGains {
            k_x: Vec3::repeat(4.0),
            ..Default::default()
        };
        let q = UnitQuat::identity();
        let mut r = FlatOutput::hover(Vec3::zeros(), 0.0);
        let a = pd_position(&r, &Vec3::zeros(), &Vec3::zeros(), &q, &Vec3::zeros(), &g);
        assert_eq!(a, Vec3::zeros());
        r.acceleration = Vec3::new(1.0, -2.0, 0.5);
        let a = pd_position(&r, &Vec3::zeros(), &Vec3::zeros(), &q, &r.acceleration, &g);
        assert_eq!(a, r.acceleration);
        r.position = Vec3::new(1.0, 0.0, 0.0);
        let a = pd_position(&r, &Vec3::zeros(), &Vec3::zeros(), &q, &r.acceleration, &g);
        assert!((a - (Vec3::new(4.0, 0.0, 0.0) + r.acceleration)).norm() < 1e-12);
    }

    #[test]
    fn body_frame_gains_are_yaw_invariant() {
        let g = ControllerGains {
            k_x: Vec3::new(2.0, 5.0, 7.0),
            k_v: Vec3::new(1.0, 3.0, 0.5),
            ..Default::default()
        };
        let q = UnitQuat::from_axis_angle(Vec3::new(0.3, 1.0, -0.2), 0.8);
        let yaw = UnitQuat::from_axis_angle(Vec3::z(), 1.1);
        let mut r = FlatOutput::hover(Vec3::new(1.0, -2.0, 0.3), 0.0);
        r.velocity = Vec3::new(0.2, 0.1, -0.4);
        let a1 = pd_position(&r, &Vec3::zeros(), &Vec3::zeros(), &q, &Vec3::zeros(), &g);
        let mut r2 = r;
        r2.position = yaw.rotate(&r.position);
        r2.velocity = yaw.rotate(&r.velocity);
        let a2 = pd_position(
            &r2,
            &Vec3::zeros(),
            &Vec3::zeros(),
            &yaw.hamilton(&q),
            &Vec3::zeros(),
            &g,
        );
        assert!((yaw.rotate(&a1) - a2).norm() < 1e-12);
    }

    #[test]
    fn attitude_error_cases() {
        let q = UnitQuat::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7);
        assert!(attitude_error(&q, &q).norm() < 1e-12);
        for th in [1e-3, 1e-6, 1e-9] {
            let c = UnitQuat::from_axis_angle(Vec3::x(), th);
            let z = attitude_error(&UnitQuat::identity(), &c);
            assert!((z - Vec3::new(th, 0.0, 0.0)).norm() < 1e-6 * th);
        }
        let c = UnitQuat::new((FRAC_PI_2 / 2.0).cos(), 0.0, 0.0, (FRAC_PI_2 / 2.0).sin());
        let z = attitude_error(&UnitQuat::identity(), &c);
        assert!((z - Vec3::new(0.0, 0.0, FRAC_PI_2)).norm() < 1e-12);
        let g = ControllerGains::default();
        let w = Vec3::new(0.1, 0.2, 0.3);
        assert!(pd_attitude(&q, &q, &w, &w, &g).norm() < 1e-12);
    }

    #[test]
    fn indi_arithmetic() {
        let f = indi_linear(
            &Vec3::new(1.0, 0.0, 0.0),
            &Vec3::zeros(),
            &Vec3::new(0.0, 0.0, -6.867),
            0.7,
        );
        assert!((f - Vec3::new(0.7, 0.0, -6.867)).norm() < 1e-12);
        let a = Vec3::new(0.3, -0.2, 1.0);
        assert_eq!(
            indi_linear(&a, &a, &Vec3::new(1.0, 2.0, 3.0), 0.7),
            Vec3::new(1.0, 2.0, 3.0)
        );
        let j = defaults::vehicle_params().inertia;
        let m = indi_angular(&Vec3::new(10.0, 0.0, 0.0), &Vec3::zeros(), &Vec3::zeros(), &j);
        assert!((m - Vec3::new(0.04, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn flap_correction_at_hover() {
        let p = defaults::vehicle_params();
        let c = defaults::experimental_coeffs();
        let t = p.weight() / 2.0;
        let a = Vec3::new(0.1, 0.2, 0.3);
        let same = transient_flap_correction(&a, [0.0; 2], [t, t], &Vec3::zeros(), 0.0, &Mat3::identity(), &p, &c);
        assert_eq!(same, a);
        let corr = transient_flap_correction(&a, [0.1, 0.0], [t, t], &Vec3::zeros(), 0.0, &Mat3::identity(), &p, &c);
        let expected = c.c_dlt * p.alpha_bar().cos() * t * 0.1 / p.mass;
        assert!(((corr - a).z - expected).abs() < 1e-12);
    }

    #[test]
    fn motor_integrator_arithmetic() {
        let p = defaults::vehicle_params();
        let mut mc = MotorSpeedController::default();
        let dt = 5e-4;
        let (q, _) = mc.step(1257.0, 1257.0, &p, 1e-4, dt);
        assert_eq!(q, p.throttle.eval(1257.0));
        assert_eq!(mc.integral, 0.0);
        for _ in 0..2000 {
            mc.step(1257.0, 1207.0, &p, 1e-4, dt);
        }
        assert!((1e-4 * mc.integral - 5e-3).abs() < 1e-9);
        // windup is blocked at full throttle
        let mut mc = MotorSpeedController::default();
        for _ in 0..2000 {
            let (q, sat) = mc.step(3000.0, 0.0, &p, 1e-4, dt);
            assert_eq!(q, 1.0);
            assert!(sat);
        }
        assert_eq!(mc.integral, 0.0);
    }
}
