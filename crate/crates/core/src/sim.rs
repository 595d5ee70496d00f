//! Rigid-body plant, actuator lags and sensor emulation.
//!
//! The truth aerodynamics reuse the φ-theory structure; truth-vs-model gaps
//! are injected through per-coefficient multipliers and constant external
//! force/moment.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aero::{force_from_thrusts, moment_from_thrusts, ActuatorState, AeroCoeffs, VehicleParams};
use crate::controller::SensorFrame;
use crate::frames::{rot_y, UnitQuat};
use crate::{Vec3, GRAVITY};
use nalgebra::Quaternion;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("simulation diverged at t = {t:.4} s: {what}")]
    Diverged { t: f64, what: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: UnitQuat,
    /// Body angular velocity.
    pub omega: Vec3,
    pub actuators: ActuatorState,
    pub t: f64,
}

impl Default for SimState {
    fn default() -> Self {
        Self {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            attitude: UnitQuat::identity(),
            omega: Vec3::zeros(),
            actuators: ActuatorState::default(),
            t: 0.0,
        }
    }
}

/// Multipliers applied to the model to obtain the truth plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoeffMultipliers {
    pub c_dv: f64,
    pub c_lv: f64,
    pub c_dt: f64,
    pub c_lt: f64,
    pub c_dlv: f64,
    pub c_dlt: f64,
    pub c_mu_t: f64,
    pub c_t: f64,
    pub c_mu: f64,
}

impl Default for CoeffMultipliers {
    fn default() -> Self {
        Self {
            c_dv: 1.0,
            c_lv: 1.0,
            c_dt: 1.0,
            c_lt: 1.0,
            c_dlv: 1.0,
            c_dlt: 1.0,
            c_mu_t: 1.0,
            c_t: 1.0,
            c_mu: 1.0,
        }
    }
}

impl CoeffMultipliers {
    /// Ratios `to / from`, entry by entry (1 where `from` is zero).
    pub fn ratio(to: &AeroCoeffs, from: &AeroCoeffs) -> Self {
        let r = |a: f64, b: f64| if b == 0.0 { 1.0 } else { a / b };
        Self {
            c_dv: r(to.c_dv, from.c_dv),
            c_lv: r(to.c_lv, from.c_lv),
            c_dt: r(to.c_dt, from.c_dt),
            c_lt: r(to.c_lt, from.c_lt),
            c_dlv: r(to.c_dlv, from.c_dlv),
            c_dlt: r(to.c_dlt, from.c_dlt),
            c_mu_t: r(to.c_mu_t, from.c_mu_t),
            ..Default::default()
        }
    }

    /// Removes every aerodynamic and thrust effect.
    pub fn zero() -> Self {
        Self {
            c_dv: 0.0,
            c_lv: 0.0,
            c_dt: 0.0,
            c_lt: 0.0,
            c_dlv: 0.0,
            c_dlt: 0.0,
            c_mu_t: 0.0,
            c_t: 0.0,
            c_mu: 0.0,
        }
    }

    pub fn apply(&self, c: &AeroCoeffs) -> AeroCoeffs {
        AeroCoeffs {
            c_dv: c.c_dv * self.c_dv,
            c_lv: c.c_lv * self.c_lv,
            c_dt: c.c_dt * self.c_dt,
            c_lt: c.c_lt * self.c_lt,
            c_dlv: c.c_dlv * self.c_dlv,
            c_dlt: c.c_dlt * self.c_dlt,
            c_mu_t: c.c_mu_t * self.c_mu_t,
            provenance: c.provenance,
        }
    }

    pub fn apply_params(&self, p: &VehicleParams) -> VehicleParams {
        let mut q = p.clone();
        q.c_t *= self.c_t;
        q.c_mu *= self.c_mu;
        q
    }
}

/// Sensor noise, as white-noise densities and per-sample standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// m/s²/√Hz
    pub accel_density: f64,
    /// rad/s/√Hz
    pub gyro_density: f64,
    /// m, per pose sample
    pub position_std: f64,
    /// m/s, per pose sample
    pub velocity_std: f64,
    /// rad, per pose sample
    pub attitude_std: f64,
    /// rad, per flap reading
    pub flap_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            accel_density: 13e-6 * GRAVITY,
            gyro_density: 0.003_f64.to_radians(),
            position_std: 1e-3,
            velocity_std: 1e-2,
            attitude_std: 1e-3,
            flap_std: 2e-3,
        }
    }
}

impl NoiseConfig {
    pub fn off() -> Self {
        Self {
            enabled: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantConfig {
    pub multipliers: CoeffMultipliers,
    /// Constant world-frame force, N.
    pub f_ext: Vec3,
    /// Constant body-frame moment, N·m.
    pub m_ext: Vec3,
    pub servo_tau: f64,
    pub motor_tau: f64,
    /// Steady-state rotor speed per commanded speed (battery sag < 1).
    pub motor_gain: f64,
    pub noise: NoiseConfig,
    /// Pose latency, s.
    pub pose_latency: f64,
    /// Pose rate, Hz.
    pub pose_rate: f64,
    /// Propagate delayed pose with IMU data.
    pub propagate_pose: bool,
    /// Rotor speed is measured once per rotation.
    pub encoder_per_rotation: bool,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            multipliers: CoeffMultipliers::default(),
            f_ext: Vec3::zeros(),
            m_ext: Vec3::zeros(),
            servo_tau: 0.045,
            motor_tau: 0.025,
            motor_gain: 1.0,
            noise: NoiseConfig::default(),
            pose_latency: 0.018,
            pose_rate: 360.0,
            propagate_pose: true,
            encoder_per_rotation: true,
        }
    }
}

impl PlantConfig {
    /// Truth equals model, perfect instantaneous sensing.
    pub fn ideal() -> Self {
        Self {
            noise: NoiseConfig::off(),
            pose_latency: 0.0,
            pose_rate: 2000.0,
            encoder_per_rotation: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.servo_tau > 0.0 && self.motor_tau > 0.0) {
            return Err("actuator time constants must be positive".into());
        }
        if !(self.pose_latency >= 0.0) {
            return Err("pose latency must be non-negative".into());
        }
        if !(self.pose_rate > 0.0) {
            return Err("pose rate must be positive".into());
        }
        Ok(())
    }
}

/// Actuator command as seen by the plant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActuatorCommand {
    pub throttle: [f64; 2],
    pub delta: [f64; 2],
}

/// Truth plant.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: VehicleParams,
    pub coeffs: AeroCoeffs,
    pub config: PlantConfig,
    j_inv: crate::Mat3,
}

/// State derivative packed in the same layout as the RK4 state vector.
#[derive(Debug, Clone, Copy)]
struct Deriv {
    x: Vec3,
    v: Vec3,
    q: Quaternion<f64>,
    w: Vec3,
    omega: [f64; 2],
    delta: [f64; 2],
}

#[derive(Debug, Clone, Copy)]
struct Raw {
    x: Vec3,
    v: Vec3,
    q: Quaternion<f64>,
    w: Vec3,
    omega: [f64; 2],
    delta: [f64; 2],
}

impl Raw {
    fn from_state(s: &SimState) -> Self {
        Self {
            x: s.position,
            v: s.velocity,
            q: s.attitude.inner().into_inner(),
            w: s.omega,
            omega: s.actuators.omega,
            delta: s.actuators.delta,
        }
    }

    fn add(&self, d: &Deriv, h: f64) -> Self {
        Self {
            x: self.x + d.x * h,
            v: self.v + d.v * h,
            q: self.q + d.q * h,
            w: self.w + d.w * h,
            omega: [self.omega[0] + d.omega[0] * h, self.omega[1] + d.omega[1] * h],
            delta: [self.delta[0] + d.delta[0] * h, self.delta[1] + d.delta[1] * h],
        }
    }
}

impl Plant {
    /// Truth plant from the controller's model and a plant configuration.
    pub fn new(model_params: &VehicleParams, model_coeffs: &AeroCoeffs, config: PlantConfig) -> Self {
        let params = config.multipliers.apply_params(model_params);
        let coeffs = config.multipliers.apply(model_coeffs);
        let j_inv = params.inertia.try_inverse().expect("inertia is invertible");
        Self {
            params,
            coeffs,
            config,
            j_inv,
        }
    }

    /// Aerodynamic/thrust force (world) and moment (body), including the
    /// external terms.
    pub fn wrench(&self, attitude: &UnitQuat, velocity: &Vec3, act: &ActuatorState) -> (Vec3, Vec3) {
        let p = &self.params;
        let omega = act.omega.map(|w| w.max(0.0));
        let thrusts = omega.map(|w| p.c_t * w * w);
        let v_alpha = rot_y(p.alpha0) * attitude.inverse_rotate(velocity);
        let speed = velocity.norm();
        let f = force_from_thrusts(thrusts, act.delta, &v_alpha, speed, p, &self.coeffs);
        let m = moment_from_thrusts(thrusts, act.delta, &v_alpha, speed, p, &self.coeffs);
        let f_body = rot_y(p.alpha0).transpose() * f.total();
        (
            attitude.rotate(&f_body) + self.config.f_ext,
            m.total() + self.config.m_ext,
        )
    }

    /// World-frame acceleration.
    pub fn acceleration(&self, s: &SimState) -> Vec3 {
        let (f, _) = self.wrench(&s.attitude, &s.velocity, &s.actuators);
        GRAVITY * Vec3::z() + f / self.params.mass
    }

    /// Accelerometer reading without noise: specific force in body axes.
    pub fn specific_force(&self, s: &SimState) -> Vec3 {
        s.attitude.inverse_rotate(&(self.acceleration(s) - GRAVITY * Vec3::z()))
    }

    fn deriv(&self, r: &Raw, cmd: &ActuatorCommand) -> Deriv {
        let q = UnitQuat::from_quaternion(r.q);
        let act = ActuatorState {
            omega: r.omega,
            delta: r.delta,
        };
        let (f, m) = self.wrench(&q, &r.v, &act);
        let j = &self.params.inertia;
        let w_dot = self.j_inv * (m - r.w.cross(&(j * r.w)));
        // quaternion kinematics on the raw (non-canonicalized) quaternion
        let q_dot = r.q * Quaternion::from_imag(r.w) * 0.5;
        let lim = self.params.delta_max;
        let cfg = &self.config;
        let omega_ss = cmd
            .throttle
            .map(|u| self.params.throttle.inverse(u.clamp(0.0, 1.0)) * cfg.motor_gain);
        Deriv {
            x: r.v,
            v: GRAVITY * Vec3::z() + f / self.params.mass,
            q: q_dot,
            w: w_dot,
            omega: [
                (omega_ss[0] - r.omega[0]) / cfg.motor_tau,
                (omega_ss[1] - r.omega[1]) / cfg.motor_tau,
            ],
            delta: [
                (cmd.delta[0].clamp(-lim, lim) - r.delta[0]) / cfg.servo_tau,
                (cmd.delta[1].clamp(-lim, lim) - r.delta[1]) / cfg.servo_tau,
            ],
        }
    }

    /// One RK4 step of length `dt` with the command held constant.
    pub fn dynamics_step(&self, s: &SimState, cmd: &ActuatorCommand, dt: f64) -> Result<SimState, SimError> {
        let r0 = Raw::from_state(s);
        let k1 = self.deriv(&r0, cmd);
        let k2 = self.deriv(&r0.add(&k1, dt / 2.0), cmd);
        let k3 = self.deriv(&r0.add(&k2, dt / 2.0), cmd);
        let k4 = self.deriv(&r0.add(&k3, dt), cmd);
        let comb = |a: Vec3, b: Vec3, c: Vec3, d: Vec3| (a + 2.0 * b + 2.0 * c + d) * (dt / 6.0);
        let comb2 = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]| {
            [0, 1].map(|i| (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) * (dt / 6.0))
        };
        let dq = (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (dt / 6.0);
        let q = r0.q + dq;
        let d_omega = comb2(k1.omega, k2.omega, k3.omega, k4.omega);
        let d_delta = comb2(k1.delta, k2.delta, k3.delta, k4.delta);
        let next = SimState {
            position: r0.x + comb(k1.x, k2.x, k3.x, k4.x),
            velocity: r0.v + comb(k1.v, k2.v, k3.v, k4.v),
            attitude: UnitQuat::from_quaternion(q),
            omega: r0.w + comb(k1.w, k2.w, k3.w, k4.w),
            actuators: ActuatorState {
                omega: [0, 1].map(|i| (r0.omega[i] + d_omega[i]).max(0.0)),
                delta: [0, 1].map(|i| r0.delta[i] + d_delta[i]),
            },
            t: s.t + dt,
        };
        let finite = next.position.iter().all(|x| x.is_finite())
            && next.velocity.iter().all(|x| x.is_finite())
            && next.omega.iter().all(|x| x.is_finite())
            && q.coords.iter().all(|x| x.is_finite());
        if !finite {
            return Err(SimError::Diverged {
                t: next.t,
                what: "non-finite state".into(),
            });
        }
        if next.velocity.norm() > 200.0 || next.omega.norm() > 500.0 {
            return Err(SimError::Diverged {
                t: next.t,
                what: format!(
                    "|v| = {:.1} m/s, |Omega| = {:.1} rad/s",
                    next.velocity.norm(),
                    next.omega.norm()
                ),
            });
        }
        Ok(next)
    }
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    t: f64,
    position: Vec3,
    velocity: Vec3,
    attitude: UnitQuat,
}

#[derive(Debug, Clone, Copy)]
struct ImuSample {
    t: f64,
    accel: Vec3,
    gyro: Vec3,
}

/// Sensor emulation: IMU at the control rate, delayed motion-capture pose
/// propagated with IMU data, once-per-rotation rotor encoders.
#[derive(Debug, Clone)]
pub struct SensorModel {
    config: PlantConfig,
    dt: f64,
    rng: ChaCha8Rng,
    std_normal: Normal<f64>,
    /// Poses captured but not yet delivered.
    in_flight: VecDeque<Pose>,
    next_capture: f64,
    imu_history: VecDeque<ImuSample>,
    estimate: Option<Pose>,
    rotor_angle: [f64; 2],
    rotor_meas: [f64; 2],
    last_t: Option<f64>,
}

impl SensorModel {
    pub fn new(config: &PlantConfig, dt: f64, seed: u64) -> Self {
        Self {
            config: config.clone(),
            dt,
            rng: ChaCha8Rng::seed_from_u64(seed),
            std_normal: Normal::new(0.0, 1.0).expect("unit normal"),
            in_flight: VecDeque::new(),
            next_capture: 0.0,
            imu_history: VecDeque::new(),
            estimate: None,
            rotor_angle: [0.0; 2],
            rotor_meas: [0.0; 2],
            last_t: None,
        }
    }

    fn gauss(&mut self, std: f64) -> f64 {
        if self.config.noise.enabled && std > 0.0 {
            std * self.std_normal.sample(&mut self.rng)
        } else {
            0.0
        }
    }

    fn gauss3(&mut self, std: f64) -> Vec3 {
        Vec3::new(self.gauss(std), self.gauss(std), self.gauss(std))
    }

    fn integrate_imu(p: &mut Pose, imu: &ImuSample, dt: f64) {
        let a = p.attitude.rotate(&imu.accel) + GRAVITY * Vec3::z();
        p.position += p.velocity * dt + 0.5 * a * dt * dt;
        p.velocity += a * dt;
        p.attitude = p.attitude.hamilton(&UnitQuat::from_rotation_vector(imu.gyro * dt));
        p.t += dt;
    }

    /// Produces the sensor frame for the current truth state.
    pub fn sense(&mut self, plant: &Plant, s: &SimState) -> SensorFrame {
        let dt = self.dt;
        let noise = self.config.noise.clone();
        let fs = 1.0 / dt;
        let accel = plant.specific_force(s) + self.gauss3(noise.accel_density * fs.sqrt());
        let gyro = s.omega + self.gauss3(noise.gyro_density * fs.sqrt());
        let imu = ImuSample { t: s.t, accel, gyro };

        // pose capture and delivery
        let period = 1.0 / self.config.pose_rate;
        while s.t + 1e-12 >= self.next_capture {
            let dq = self.gauss3(noise.attitude_std);
            let pose = Pose {
                t: s.t,
                position: s.position + self.gauss3(noise.position_std),
                velocity: s.velocity + self.gauss3(noise.velocity_std),
                attitude: s.attitude.hamilton(&UnitQuat::from_rotation_vector(dq)),
            };
            self.in_flight.push_back(pose);
            self.next_capture += period;
        }
        let mut delivered = None;
        while let Some(p) = self.in_flight.front() {
            if p.t + self.config.pose_latency <= s.t + 1e-12 {
                delivered = self.in_flight.pop_front();
            } else {
                break;
            }
        }

        let horizon = self.config.pose_latency + 2.0 * period + dt;
        while let Some(h) = self.imu_history.front() {
            if h.t < s.t - horizon {
                self.imu_history.pop_front();
            } else {
                break;
            }
        }

        let pose = if self.config.propagate_pose {
            if let Some(p) = delivered {
                // replay IMU from the capture time to now
                let mut est = p;
                for h in self.imu_history.iter().filter(|h| h.t >= p.t - 1e-12) {
                    Self::integrate_imu(&mut est, h, dt);
                }
                self.estimate = Some(est);
            } else if let Some(mut est) = self.estimate {
                if let Some(last) = self.imu_history.back() {
                    Self::integrate_imu(&mut est, last, dt);
                }
                self.estimate = Some(est);
            }
            self.estimate
        } else {
            if delivered.is_some() {
                self.estimate = delivered;
            }
            self.estimate
        };
        self.imu_history.push_back(imu);
        // before the first delivery fall back to truth
        let pose = pose.unwrap_or(Pose {
            t: s.t,
            position: s.position,
            velocity: s.velocity,
            attitude: s.attitude,
        });

        // rotor encoders
        let step = self.last_t.map(|t| s.t - t).unwrap_or(0.0);
        self.last_t = Some(s.t);
        for i in 0..2 {
            let w = s.actuators.omega[i];
            if !self.config.encoder_per_rotation {
                self.rotor_meas[i] = w;
                continue;
            }
            if step == 0.0 {
                self.rotor_meas[i] = w;
            }
            self.rotor_angle[i] += w * step;
            if self.rotor_angle[i] >= std::f64::consts::TAU {
                self.rotor_angle[i] %= std::f64::consts::TAU;
                self.rotor_meas[i] = w;
            }
        }
        let delta = [
            s.actuators.delta[0] + self.gauss(noise.flap_std),
            s.actuators.delta[1] + self.gauss(noise.flap_std),
        ];

        SensorFrame {
            position: pose.position,
            velocity: pose.velocity,
            attitude: pose.attitude,
            accel_body: accel,
            gyro,
            omega_meas: self.rotor_meas,
            delta_meas: delta,
            t: s.t,
        }
    }
}
