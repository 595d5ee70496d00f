//! Differential-flatness transforms.
//!
//! Given a flat output (position and yaw with derivatives) the vehicle's
//! attitude, collective thrust, body rates, angular acceleration, moment and
//! finally the individual actuator inputs follow in closed form.
//!
//! Conventions: `δ` passed to the attitude transforms is the *sum* of both
//! flap deflections; thrust is split evenly between motors when the flap
//! terms are linearized. Flap rates are neglected throughout.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::aero::{
    flap_effectiveness, moment_from_thrusts, yaw_moment_per_differential_thrust, AeroCoeffs, VehicleParams,
};
use crate::frames::{rot_x, rot_x_d, rot_x_dd, rot_y, rot_y_d, rot_z, rot_z_d, rot_z_dd, wrap_pi};
use crate::frames::{EulerZxy, UnitQuat};
use crate::{Mat3, Vec3, GRAVITY};

/// Below this airspeed the d‖v‖/dt terms are dropped.
pub const SPEED_EPS: f64 = 1e-3;

const DEGENERATE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlatnessError {
    #[error("flap allocation singular (nu1*nu2 = {0:e}): no flap authority")]
    SingularAllocation(f64),
    #[error("non-finite input to flatness transform")]
    NonFinite,
}

/// Flat-output sample: position through snap and yaw through yaw acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatOutput {
    pub position: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub snap: Vec3,
    /// Unwrapped yaw, rad.
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
}

impl FlatOutput {
    pub fn hover(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.position, self.velocity, self.acceleration, self.jerk, self.snap]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
            && self.yaw.is_finite()
            && self.yaw_rate.is_finite()
            && self.yaw_accel.is_finite()
    }
}

/// World-frame aerodynamic force and its derivatives together with the
/// kinematic quantities the rate transforms need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatContext {
    pub force: Vec3,
    pub force_dot: Vec3,
    pub force_ddot: Vec3,
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub jerk: Vec3,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub yaw_accel: f64,
    /// Sum of flap deflections, rad.
    pub delta: f64,
}

impl FlatContext {
    /// `f = m(a − g i_z)`, `ḟ = m j`, `f̈ = m s`.
    pub fn from_flat(flat: &FlatOutput, delta: f64, params: &VehicleParams) -> Self {
        let m = params.mass;
        Self {
            force: m * (flat.acceleration - GRAVITY * Vec3::z()),
            force_dot: m * flat.jerk,
            force_ddot: m * flat.snap,
            velocity: flat.velocity,
            acceleration: flat.acceleration,
            jerk: flat.jerk,
            yaw: flat.yaw,
            yaw_rate: flat.yaw_rate,
            yaw_accel: flat.yaw_accel,
            delta,
        }
    }
}

/// Output of [`attitude_thrust`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttitudeSolution {
    /// `θ = θ̄ + α0`.
    pub euler: EulerZxy,
    /// Pitch of the zero-lift axis relative to the φ frame.
    pub theta_bar: f64,
    /// Collective thrust, N, ≥ 0.
    pub thrust: f64,
    pub attitude: UnitQuat,
    /// `(k_φ, k_θ)`: whether π was added to the principal roll/pitch solution.
    pub branch: (u8, u8),
    /// The force gave no direction information and the hint was used.
    pub degenerate: bool,
}

/// Full flatness state at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatState {
    pub solution: AttitudeSolution,
    pub omega: Vec3,
    pub omega_dot: Vec3,
    pub moment: Vec3,
}

/// Actuator inputs from a moment and thrust request.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InputSolution {
    pub thrusts: [f64; 2],
    pub delta_thrust: f64,
    pub delta: [f64; 2],
    pub omega: [f64; 2],
    pub thrust_saturated: bool,
    pub flap_saturated: bool,
}

/// `A = cos ᾱ (1 − c_DT)`, `B = sin ᾱ (c_LT − 1) − cos ᾱ c^δ_LT δ/2`.
fn thrust_coefficients(delta: f64, params: &VehicleParams, coeffs: &AeroCoeffs) -> (f64, f64) {
    let (sb, cb) = params.alpha_bar().sin_cos();
    let a = cb * (1.0 - coeffs.c_dt);
    let b = sb * (coeffs.c_lt - 1.0) - cb * coeffs.c_dlt * delta / 2.0;
    (a, b)
}

/// Ratio of propwash lift to forward force, η = B/A.
pub fn lift_ratio(delta: f64, params: &VehicleParams, coeffs: &AeroCoeffs) -> f64 {
    let (a, b) = thrust_coefficients(delta, params, coeffs);
    b / a
}

/// `σ` is linear in `(f^φ, w = ‖v‖ v^φ)`; the same map applies to derivatives.
fn sigma(fp: &Vec3, w: &Vec3, eta: f64, delta: f64, c: &AeroCoeffs) -> (f64, f64) {
    let sx = eta * (fp.x + c.c_dv * w.x) - c.c_dlv * delta * w.x - c.c_lv * w.z - fp.z;
    let sz = eta * (fp.z + c.c_dv * w.z) - c.c_dlv * delta * w.z + c.c_lv * w.x + fp.x;
    (sx, sz)
}

/// `R^φ_i = R_x(φ)ᵀ R_z(ψ)ᵀ`.
fn world_to_phi(yaw: f64, roll: f64) -> Mat3 {
    rot_x(roll).transpose() * rot_z(yaw).transpose()
}

fn thrust_for(theta_bar: f64, fp: &Vec3, w: &Vec3, a: f64, c: &AeroCoeffs) -> f64 {
    let (s, co) = theta_bar.sin_cos();
    (co * fp.x - s * fp.z + c.c_dv * (co * w.x - s * w.z)) / a
}

/// Attitude and collective thrust realizing the world-frame aerodynamic force
/// `force` at yaw `yaw` and velocity `velocity`.
///
/// `delta` is the total (low-frequency) flap deflection. Roll is chosen so
/// that the body y-axis agrees in sign with the hint's, pitch so that T ≥ 0.
pub fn attitude_thrust(
    force: &Vec3,
    yaw: f64,
    velocity: &Vec3,
    delta: f64,
    hint: &UnitQuat,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> AttitudeSolution {
    let (sp, cp) = yaw.sin_cos();
    let beta_x = -sp * force.x + cp * force.y;
    let beta_z = force.z;
    let scale = force.norm().max(1.0);
    let hint_m = hint.to_matrix();
    let hint_by = hint_m.column(1).into_owned();
    let mut degenerate = false;

    let (roll, k_phi) = if beta_x.hypot(beta_z) < DEGENERATE_EPS * scale {
        degenerate = true;
        let lateral = hint_by.dot(&Vec3::new(-sp, cp, 0.0));
        (hint_by.z.atan2(lateral), 0)
    } else {
        let phi0 = -beta_x.atan2(beta_z);
        let by = Vec3::new(-sp * phi0.cos(), cp * phi0.cos(), phi0.sin());
        if by.dot(&hint_by) >= 0.0 {
            (phi0, 0)
        } else {
            (wrap_pi(phi0 + PI), 1)
        }
    };

    let p = world_to_phi(yaw, roll);
    let fp = p * force;
    let speed = velocity.norm();
    let w = speed * (p * velocity);
    let (a, b) = thrust_coefficients(delta, params, coeffs);
    let eta = b / a;
    let (sx, sz) = sigma(&fp, &w, eta, delta, coeffs);

    let (theta_bar, thrust, k_theta) = if sx.hypot(sz) < DEGENERATE_EPS * scale {
        degenerate = true;
        let bx = p * hint_m.column(0).into_owned();
        let tb = (-bx.z).atan2(bx.x) - params.alpha0;
        (tb, thrust_for(tb, &fp, &w, a, coeffs).max(0.0), 0)
    } else {
        let tb0 = sx.atan2(sz);
        let t0 = thrust_for(tb0, &fp, &w, a, coeffs);
        if t0 >= 0.0 {
            (tb0, t0, 0)
        } else {
            (wrap_pi(tb0 + PI), -t0, 1)
        }
    };

    let euler = EulerZxy::new(yaw, roll, theta_bar + params.alpha0);
    AttitudeSolution {
        euler,
        theta_bar,
        thrust,
        attitude: euler.to_quat(),
        branch: (k_phi, k_theta),
        degenerate,
    }
}

/// Residuals of the x/z zero-lift force equations for a candidate `(θ̄, T)`.
pub fn force_residuals(
    theta_bar: f64,
    thrust: f64,
    force: &Vec3,
    yaw: f64,
    roll: f64,
    velocity: &Vec3,
    delta: f64,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> (f64, f64) {
    let p = world_to_phi(yaw, roll);
    let fa = rot_y(theta_bar).transpose() * (p * force);
    let speed = velocity.norm();
    let va = rot_y(theta_bar).transpose() * (p * velocity);
    let (a, b) = thrust_coefficients(delta, params, coeffs);
    let rx = a * thrust - coeffs.c_dv * speed * va.x - fa.x;
    let rz = b * thrust - coeffs.c_dlv * delta * speed * va.x - coeffs.c_lv * speed * va.z - fa.z;
    (rx, rz)
}

fn atan2_rates(y: f64, x: f64, yd: f64, xd: f64, ydd: f64, xdd: f64) -> (f64, f64) {
    let n = x * x + y * y;
    if n < 1e-24 {
        return (0.0, 0.0);
    }
    let num = yd * x - y * xd;
    let num_d = ydd * x - y * xdd;
    let n_d = 2.0 * (x * xd + y * yd);
    (num / n, (num_d * n - num * n_d) / (n * n))
}

/// First and second time derivatives of `(φ, θ̄)` along the flat trajectory.
struct AngleRates {
    roll_d: f64,
    roll_dd: f64,
    pitch_d: f64,
    pitch_dd: f64,
}

fn angle_rates(ctx: &FlatContext, sol: &AttitudeSolution, params: &VehicleParams, coeffs: &AeroCoeffs) -> AngleRates {
    let (psi, psi_d, psi_dd) = (ctx.yaw, ctx.yaw_rate, ctx.yaw_accel);
    let (sp, cp) = psi.sin_cos();
    let (f, fd, fdd) = (ctx.force, ctx.force_dot, ctx.force_ddot);

    let bx = -sp * f.x + cp * f.y;
    let bz = f.z;
    let bx_d = -cp * psi_d * f.x - sp * fd.x - sp * psi_d * f.y + cp * fd.y;
    let bz_d = fd.z;
    let bx_dd = (sp * psi_d * psi_d - cp * psi_dd) * f.x
        - 2.0 * cp * psi_d * fd.x
        - sp * fdd.x
        - (cp * psi_d * psi_d + sp * psi_dd) * f.y
        - 2.0 * sp * psi_d * fd.y
        + cp * fdd.y;
    let bz_dd = fdd.z;
    // φ = −atan2(β_x, β_z) (+π)
    let (r_d, r_dd) = atan2_rates(bx, bz, bx_d, bz_d, bx_dd, bz_dd);
    let (roll_d, roll_dd) = (-r_d, -r_dd);

    let phi = sol.euler.roll;
    let (rx, rxd, rxdd) = (
        rot_x(phi).transpose(),
        rot_x_d(phi).transpose(),
        rot_x_dd(phi).transpose(),
    );
    let (rz, rzd, rzdd) = (
        rot_z(psi).transpose(),
        rot_z_d(psi).transpose(),
        rot_z_dd(psi).transpose(),
    );
    let p = rx * rz;
    let p_d = roll_d * rxd * rz + psi_d * rx * rzd;
    let p_dd = roll_dd * rxd * rz
        + roll_d * roll_d * rxdd * rz
        + 2.0 * roll_d * psi_d * rxd * rzd
        + psi_dd * rx * rzd
        + psi_d * psi_d * rx * rzdd;

    let fp = p * f;
    let fp_d = p_d * f + p * fd;
    let fp_dd = p_dd * f + 2.0 * p_d * fd + p * fdd;

    let (v, a, j) = (ctx.velocity, ctx.acceleration, ctx.jerk);
    let vp = p * v;
    let vp_d = p_d * v + p * a;
    let vp_dd = p_dd * v + 2.0 * p_d * a + p * j;
    let s = v.norm();
    let (s_d, s_dd) = if s < SPEED_EPS {
        (0.0, 0.0)
    } else {
        let s_d = v.dot(&a) / s;
        (s_d, (a.dot(&a) + v.dot(&j)) / s - v.dot(&a) * s_d / (s * s))
    };
    let w = s * vp;
    let w_d = s_d * vp + s * vp_d;
    let w_dd = s_dd * vp + 2.0 * s_d * vp_d + s * vp_dd;

    let eta = lift_ratio(ctx.delta, params, coeffs);
    let d = ctx.delta;
    let (sx, sz) = sigma(&fp, &w, eta, d, coeffs);
    let (sx_d, sz_d) = sigma(&fp_d, &w_d, eta, d, coeffs);
    let (sx_dd, sz_dd) = sigma(&fp_dd, &w_dd, eta, d, coeffs);
    let (pitch_d, pitch_dd) = atan2_rates(sx, sz, sx_d, sz_d, sx_dd, sz_dd);

    AngleRates {
        roll_d,
        roll_dd,
        pitch_d,
        pitch_dd,
    }
}

fn assemble_omega(e: &EulerZxy, r: &AngleRates, psi_d: f64) -> Vec3 {
    let ryt = rot_y(e.pitch).transpose();
    let rxt = rot_x(e.roll).transpose();
    Vec3::new(0.0, r.pitch_d, 0.0) + ryt * Vec3::new(r.roll_d, 0.0, 0.0) + ryt * rxt * Vec3::new(0.0, 0.0, psi_d)
}

/// Body angular velocity along the flat trajectory.
pub fn angular_velocity(
    ctx: &FlatContext,
    sol: &AttitudeSolution,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> Vec3 {
    let r = angle_rates(ctx, sol, params, coeffs);
    assemble_omega(&sol.euler, &r, ctx.yaw_rate)
}

/// Body angular acceleration and the aerodynamic/thrust moment realizing it,
/// `m = J Ω̇ + Ω × J Ω`. Returns `(Ω, Ω̇, m)`.
pub fn angular_acceleration(
    ctx: &FlatContext,
    sol: &AttitudeSolution,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> (Vec3, Vec3, Vec3) {
    let r = angle_rates(ctx, sol, params, coeffs);
    let e = &sol.euler;
    let omega = assemble_omega(e, &r, ctx.yaw_rate);
    let (ryt, ryt_d) = (rot_y(e.pitch).transpose(), rot_y_d(e.pitch).transpose());
    let (rxt, rxt_d) = (rot_x(e.roll).transpose(), rot_x_d(e.roll).transpose());
    let ez = Vec3::new(0.0, 0.0, 1.0);
    let omega_dot = Vec3::new(0.0, r.pitch_dd, 0.0)
        + r.pitch_d * ryt_d * Vec3::new(r.roll_d, 0.0, 0.0)
        + ryt * Vec3::new(r.roll_dd, 0.0, 0.0)
        + (r.pitch_d * ryt_d * rxt + r.roll_d * ryt * rxt_d) * ez * ctx.yaw_rate
        + ryt * rxt * ez * ctx.yaw_accel;
    let j = params.inertia;
    let moment = j * omega_dot + omega.cross(&(j * omega));
    (omega, omega_dot, moment)
}

/// Runs the whole chain for a flat output sample.
pub fn flat_state(
    flat: &FlatOutput,
    delta: f64,
    hint: &UnitQuat,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> FlatState {
    let ctx = FlatContext::from_flat(flat, delta, params);
    let solution = attitude_thrust(&ctx.force, ctx.yaw, &ctx.velocity, delta, hint, params, coeffs);
    let (omega, omega_dot, moment) = angular_acceleration(&ctx, &solution, params, coeffs);
    FlatState {
        solution,
        omega,
        omega_dot,
        moment,
    }
}

/// Splits a body moment and collective thrust into motor thrusts, flap
/// deflections and rotor speeds.
///
/// The flap contribution to the yaw moment (∝ sin α0) is neglected when
/// computing the differential thrust.
pub fn inputs_from_moment_thrust(
    moment: &Vec3,
    thrust: f64,
    v_alpha: &Vec3,
    speed: f64,
    params: &VehicleParams,
    coeffs: &AeroCoeffs,
) -> Result<InputSolution, FlatnessError> {
    if !(moment.iter().all(|x| x.is_finite()) && thrust.is_finite()) {
        return Err(FlatnessError::NonFinite);
    }
    let den = yaw_moment_per_differential_thrust(params, coeffs);
    let dt = moment.z / den;
    let raw = [(thrust + dt) / 2.0, (thrust - dt) / 2.0];
    let thrust_saturated = raw.iter().any(|&t| t < 0.0);
    let thrusts = raw.map(|t| t.max(0.0));

    let mt = moment_from_thrusts(thrusts, [0.0; 2], v_alpha, speed, params, coeffs);
    let md = moment - mt.thrust - mt.torque;

    let nu = thrusts.map(|t| flap_effectiveness(t, v_alpha, speed, params, coeffs));
    if (nu[0] * nu[1]).abs() < 1e-9 || params.l_dx.abs() < 1e-12 {
        return Err(FlatnessError::SingularAllocation(nu[0] * nu[1]));
    }
    // m_δx = l_δy cos α0 (ν2 δ2 − ν1 δ1), m_δy = l_δx (ν1 δ1 + ν2 δ2)
    let gx = md.x / (params.l_dy * params.alpha0.cos());
    let gy = md.y / params.l_dx;
    let raw_delta = [(gy - gx) / (2.0 * nu[0]), (gy + gx) / (2.0 * nu[1])];
    let lim = params.delta_max;
    let flap_saturated = raw_delta.iter().any(|d| d.abs() > lim);
    let delta = raw_delta.map(|d| d.clamp(-lim, lim));

    Ok(InputSolution {
        thrusts,
        delta_thrust: dt,
        delta,
        omega: thrusts.map(|t| (t / params.c_t).sqrt()),
        thrust_saturated,
        flap_saturated,
    })
}

/// Velocity in the zero-lift frame for a given attitude.
pub fn velocity_zero_lift(attitude: &UnitQuat, velocity: &Vec3, params: &VehicleParams) -> Vec3 {
    rot_y(params.alpha0) * attitude.inverse_rotate(velocity)
}
