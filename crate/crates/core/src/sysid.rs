//! Aerodynamic coefficient estimation: lifting-line seed values and ordinary
//! least squares on logged flight data.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::aero::{flap_effectiveness, force_from_thrusts, AeroCoeffs, Provenance, VehicleParams};
use crate::frames::{rot_y, UnitQuat};
use crate::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum SysidError {
    #[error("invalid wing geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid flight log: {0}")]
    InvalidLog(String),
    #[error("unidentifiable coefficient(s): {}", .0.join(", "))]
    Unidentifiable(Vec<&'static str>),
    #[error("{path}: {message}")]
    Csv { path: String, message: String },
}

/// Planform and propeller geometry used for the lifting-line estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WingGeometry {
    /// 2-D lift slope, 1/rad.
    pub cl_alpha_2d: f64,
    /// Wing area, m².
    pub area: f64,
    pub aspect_ratio: f64,
    pub taper: f64,
    /// Flap chord over wing chord.
    pub flap_chord_ratio: f64,
    /// Propeller diameter, m.
    pub prop_diameter: f64,
    /// Thrust line angle, rad.
    pub alpha_t: f64,
    /// Glauert circulation correction.
    pub tau: f64,
    /// Span efficiency.
    pub e: f64,
    /// Air density, kg/m³.
    pub rho: f64,
}

impl Default for WingGeometry {
    fn default() -> Self {
        Self {
            cl_alpha_2d: 5.73,
            area: 0.070,
            aspect_ratio: 4.3,
            taper: 0.59,
            flap_chord_ratio: 0.5,
            prop_diameter: 0.13,
            alpha_t: -5.0_f64.to_radians(),
            tau: 0.14,
            e: 0.97,
            rho: 1.225,
        }
    }
}

impl WingGeometry {
    pub fn validate(&self) -> Result<(), SysidError> {
        let positive = [
            ("cl_alpha_2d", self.cl_alpha_2d),
            ("area", self.area),
            ("aspect_ratio", self.aspect_ratio),
            ("taper", self.taper),
            ("flap_chord_ratio", self.flap_chord_ratio),
            ("prop_diameter", self.prop_diameter),
            ("tau", self.tau),
            ("e", self.e),
            ("rho", self.rho),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SysidError::InvalidGeometry(format!("{name} must be positive")));
            }
        }
        if self.e > 1.0 {
            return Err(SysidError::InvalidGeometry("span efficiency exceeds 1".into()));
        }
        if self.flap_chord_ratio > 1.0 {
            return Err(SysidError::InvalidGeometry("flap chord exceeds wing chord".into()));
        }
        Ok(())
    }

    /// Finite-wing lift slope, 1/rad.
    pub fn lift_slope(&self) -> f64 {
        let a = self.cl_alpha_2d;
        a / (1.0 + a * (1.0 + self.tau) / (std::f64::consts::PI * self.aspect_ratio))
    }
}

/// Lifting-line and momentum-disc estimates. Drag terms are left at zero and
/// `c_mu_t` is taken from `pitch_coeff` (it is not predicted by the geometry).
pub fn analytical_coeffs(g: &WingGeometry, pitch_coeff: f64) -> Result<AeroCoeffs, SysidError> {
    g.validate()?;
    let cla = g.lift_slope();
    let c_lv = 0.5 * g.rho * g.area * cla;
    let disc = std::f64::consts::PI * g.prop_diameter * g.prop_diameter;
    let c_lt = 2.0 / 3.0 * g.area / disc * cla;
    Ok(AeroCoeffs {
        c_dv: 0.0,
        c_lv,
        c_dt: 0.0,
        c_lt,
        c_dlv: g.flap_chord_ratio / 2.0 * c_lv,
        c_dlt: g.flap_chord_ratio * c_lt,
        c_mu_t: pitch_coeff,
        provenance: Provenance::Analytical,
    })
}

/// Induced axial (leading-edge suction minus induced drag) coefficient at
/// angle `alpha_rel` from zero lift. Positive means a forward force.
pub fn induced_axial_coefficient(g: &WingGeometry, alpha_rel: f64) -> f64 {
    let cla = g.lift_slope();
    (cla - cla * cla / (std::f64::consts::PI * g.aspect_ratio * g.e)) * alpha_rel * alpha_rel
}

/// Pitch coefficient balancing the hover trim flaps: `(δ/2) l_δx c^δ_LT cos ᾱ`.
pub fn pitch_coeff_from_trim(delta_half: f64, params: &VehicleParams, coeffs: &AeroCoeffs) -> f64 {
    delta_half * params.l_dx * coeffs.c_dlt * params.alpha_bar().cos()
}

/// One logged sample of measured quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSample {
    pub t: f64,
    /// World-frame velocity.
    pub velocity: Vec3,
    pub attitude: UnitQuat,
    /// Accelerometer specific force, body frame.
    pub accel_body: Vec3,
    pub gyro: Vec3,
    pub omega: [f64; 2],
    pub delta: [f64; 2],
}

impl LogSample {
    fn is_finite(&self) -> bool {
        self.velocity.iter().all(|x| x.is_finite())
            && self.accel_body.iter().all(|x| x.is_finite())
            && self.gyro.iter().all(|x| x.is_finite())
            && self.attitude.as_array().iter().all(|x| x.is_finite())
            && self.omega.iter().chain(&self.delta).all(|x| x.is_finite())
            && self.t.is_finite()
    }
}

/// Column names read from simulator logs.
pub mod columns {
    pub const TIME: &str = "t_s";
    pub const VELOCITY: [&str; 3] = ["meas_vx_m_s", "meas_vy_m_s", "meas_vz_m_s"];
    pub const ATTITUDE: [&str; 4] = ["meas_qw", "meas_qx", "meas_qy", "meas_qz"];
    pub const ACCEL: [&str; 3] = ["meas_ax_m_s2", "meas_ay_m_s2", "meas_az_m_s2"];
    pub const GYRO: [&str; 3] = ["meas_p_rad_s", "meas_q_rad_s", "meas_r_rad_s"];
    pub const ROTOR: [&str; 2] = ["meas_omega1_rad_s", "meas_omega2_rad_s"];
    pub const FLAP: [&str; 2] = ["meas_delta1_rad", "meas_delta2_rad"];
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlightLog {
    pub samples: Vec<LogSample>,
}

impl FlightLog {
    /// Validates finiteness and a uniform sample period.
    pub fn new(samples: Vec<LogSample>) -> Result<Self, SysidError> {
        if samples.len() < 2 {
            return Err(SysidError::InvalidLog("need at least two samples".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(SysidError::InvalidLog(format!("non-finite value in sample {i}")));
        }
        let dt = samples[1].t - samples[0].t;
        if dt <= 0.0 {
            return Err(SysidError::InvalidLog("time must increase".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if ((w[1].t - w[0].t) - dt).abs() > 1e-6 * dt.max(1e-3) {
                return Err(SysidError::InvalidLog(format!(
                    "non-uniform sample period at sample {}",
                    i + 1
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn sample_period(&self) -> f64 {
        self.samples[1].t - self.samples[0].t
    }

    /// Appends `other`, shifting its time axis to continue this log.
    pub fn concat(mut self, other: &FlightLog) -> Result<Self, SysidError> {
        let dt = self.sample_period();
        let t_end = self.samples.last().map(|s| s.t).unwrap_or(0.0);
        let t0 = other.samples.first().map(|s| s.t).unwrap_or(0.0);
        self.samples.extend(other.samples.iter().map(|s| LogSample {
            t: s.t - t0 + t_end + dt,
            ..*s
        }));
        Self::new(self.samples)
    }

    /// Keeps every `n`-th sample.
    pub fn decimate(&self, n: usize) -> Result<Self, SysidError> {
        Self::new(self.samples.iter().step_by(n.max(1)).copied().collect())
    }

    /// Reads a simulator CSV log (see [`columns`]).
    pub fn from_csv(path: &Path) -> Result<Self, SysidError> {
        let err = |message: String| SysidError::Csv {
            path: path.display().to_string(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| err(e.to_string()))?;
        let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
        let idx = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| err(format!("missing column `{name}`")))
        };
        let t = idx(columns::TIME)?;
        let v = columns::VELOCITY.map(idx);
        let q = columns::ATTITUDE.map(idx);
        let a = columns::ACCEL.map(idx);
        let g = columns::GYRO.map(idx);
        let w = columns::ROTOR.map(idx);
        let d = columns::FLAP.map(idx);
        let unpack3 = |x: [Result<usize, SysidError>; 3]| -> Result<[usize; 3], SysidError> {
            let [a, b, c] = x;
            Ok([a?, b?, c?])
        };
        let v = unpack3(v)?;
        let a = unpack3(a)?;
        let g = unpack3(g)?;
        let [q0, q1, q2, q3] = q;
        let q = [q0?, q1?, q2?, q3?];
        let [w0, w1] = w;
        let w = [w0?, w1?];
        let [d0, d1] = d;
        let d = [d0?, d1?];

        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let f = |i: usize| -> Result<f64, SysidError> {
                rec.get(i)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| err(format!("row {}: column {}: {e}", line + 1, &headers[i])))
            };
            let v3 = |c: [usize; 3]| -> Result<Vec3, SysidError> { Ok(Vec3::new(f(c[0])?, f(c[1])?, f(c[2])?)) };
            samples.push(LogSample {
                t: f(t)?,
                velocity: v3(v)?,
                attitude: UnitQuat::new(f(q[0])?, f(q[1])?, f(q[2])?, f(q[3])?),
                accel_body: v3(a)?,
                gyro: v3(g)?,
                omega: [f(w[0])?, f(w[1])?],
                delta: [f(d[0])?, f(d[1])?],
            });
        }
        Self::new(samples)
    }
}

/// Measured force in the zero-lift frame, `m R_y(α0) a_b`.
pub fn measured_force(s: &LogSample, params: &VehicleParams) -> Vec3 {
    params.mass * (rot_y(params.alpha0) * s.accel_body)
}

fn zero_lift_velocity(s: &LogSample, params: &VehicleParams) -> Vec3 {
    rot_y(params.alpha0) * s.attitude.inverse_rotate(&s.velocity)
}

fn thrusts(s: &LogSample, params: &VehicleParams) -> [f64; 2] {
    s.omega.map(|w| params.c_t * w * w)
}

/// Model force in the zero-lift frame for a logged sample.
pub fn predicted_force(s: &LogSample, params: &VehicleParams, coeffs: &AeroCoeffs) -> Vec3 {
    let va = zero_lift_velocity(s, params);
    force_from_thrusts(thrusts(s, params), s.delta, &va, s.velocity.norm(), params, coeffs).total()
}

/// Coefficient of determination per zero-lift axis between measured and
/// predicted force.
pub fn force_fit_r2(log: &FlightLog, params: &VehicleParams, coeffs: &AeroCoeffs) -> [f64; 3] {
    let meas: Vec<Vec3> = log.samples.iter().map(|s| measured_force(s, params)).collect();
    let pred: Vec<Vec3> = log.samples.iter().map(|s| predicted_force(s, params, coeffs)).collect();
    [0, 1, 2].map(|k| {
        let y: Vec<f64> = meas.iter().map(|v| v[k]).collect();
        let yh: Vec<f64> = pred.iter().map(|v| v[k]).collect();
        r_squared(&y, &yh)
    })
}

fn r_squared(y: &[f64], yhat: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b).powi(2)).sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisFit {
    pub coefficients: Vec<f64>,
    pub r2: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitReport {
    pub samples: usize,
    pub drag: AxisFit,
    pub lift: AxisFit,
    pub notes: Vec<String>,
}

/// Column scaling keeps the condition number about the regressors, not
/// their units.
const MAX_CONDITION: f64 = 1e8;

/// Ordinary least squares with a conditioning guard. Returns `Err(names)`
/// with the coefficients that cannot be separated.
fn ols(a: &DMatrix<f64>, y: &DVector<f64>, names: &[&'static str]) -> Result<AxisFit, Vec<&'static str>> {
    let ncol = a.ncols();
    let norms: Vec<f64> = (0..ncol).map(|j| a.column(j).norm()).collect();
    let scale_ref = norms.iter().cloned().fold(0.0, f64::max);
    let zero: Vec<&'static str> = (0..ncol)
        .filter(|&j| norms[j] <= 1e-12 * scale_ref.max(1e-300))
        .map(|j| names[j])
        .collect();
    if !zero.is_empty() {
        return Err(zero);
    }
    let mut scaled = a.clone();
    for j in 0..ncol {
        scaled.column_mut(j).scale_mut(1.0 / norms[j]);
    }
    let svd = scaled.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let (imin, smin) = svd.singular_values.argmin();
    let condition = smax / smin;
    if !(condition < MAX_CONDITION) {
        let vt = svd.v_t.as_ref().expect("requested V^T");
        let row = vt.row(imin);
        let j = (0..ncol)
            .max_by(|&p, &q| row[p].abs().total_cmp(&row[q].abs()))
            .unwrap_or(0);
        return Err(vec![names[j]]);
    }
    let x = svd.solve(y, 0.0).expect("SVD computed with U and V");
    let coefficients: Vec<f64> = (0..ncol).map(|j| x[j] / norms[j]).collect();
    let yhat = a * DVector::from_column_slice(&coefficients);
    Ok(AxisFit {
        coefficients,
        r2: r_squared(y.as_slice(), yhat.as_slice()),
        condition,
    })
}

/// Fits drag and lift coefficients by linear least squares on the
/// zero-lift-frame force balance. `c_mu_t` is carried over from `prior`.
pub fn regress_coeffs(
    log: &FlightLog,
    params: &VehicleParams,
    prior: &AeroCoeffs,
) -> Result<(AeroCoeffs, FitReport), SysidError> {
    let n = log.samples.len();
    let (sb, cb) = params.alpha_bar().sin_cos();
    let mut ad = DMatrix::zeros(n, 2);
    let mut yd = DVector::zeros(n);
    let mut al = DMatrix::zeros(n, 4);
    let mut yl = DVector::zeros(n);
    for (i, s) in log.samples.iter().enumerate() {
        let f = measured_force(s, params);
        let va = zero_lift_velocity(s, params);
        let speed = s.velocity.norm();
        let t = thrusts(s, params);
        let t_sum = t[0] + t[1];
        yd[i] = f.x - cb * t_sum;
        ad[(i, 0)] = -va.x * speed;
        ad[(i, 1)] = -cb * t_sum;
        yl[i] = f.z + sb * t_sum;
        al[(i, 0)] = -va.z * speed;
        al[(i, 1)] = sb * t_sum;
        al[(i, 2)] = -va.x * speed * (s.delta[0] + s.delta[1]);
        al[(i, 3)] = -cb * (s.delta[0] * t[0] + s.delta[1] * t[1]);
    }
    let drag = ols(&ad, &yd, &["c_dv", "c_dt"]);
    let lift = ols(&al, &yl, &["c_lv", "c_lt", "c_dlv", "c_dlt"]);
    let (mut drag, lift) = match (drag, lift) {
        (Ok(d), Ok(l)) => (d, l),
        (d, l) => {
            let mut names = d.err().unwrap_or_default();
            names.extend(l.err().unwrap_or_default());
            return Err(SysidError::Unidentifiable(names));
        }
    };
    let mut notes = Vec::new();
    for (k, name) in ["c_dv", "c_dt"].iter().enumerate() {
        if drag.coefficients[k] < 0.0 {
            notes.push(format!(
                "{name} = {:.4} is negative (propulsive); clipped to 0",
                drag.coefficients[k]
            ));
            drag.coefficients[k] = 0.0;
        }
    }
    let coeffs = AeroCoeffs {
        c_dv: drag.coefficients[0],
        c_dt: drag.coefficients[1],
        c_lv: lift.coefficients[0],
        c_lt: lift.coefficients[1],
        c_dlv: lift.coefficients[2],
        c_dlt: lift.coefficients[3],
        c_mu_t: prior.c_mu_t,
        provenance: Provenance::Experimental,
    };
    Ok((
        coeffs,
        FitReport {
            samples: n,
            drag,
            lift,
            notes,
        },
    ))
}

/// Diagnostic single-parameter fit of `c_mu_t` from the pitch moment balance,
/// with body rates differentiated numerically. Returns `(c_mu_t, R²)`; the
/// estimate is sensitive to rate noise and is not used for the model.
pub fn pitch_moment_fit(log: &FlightLog, params: &VehicleParams, coeffs: &AeroCoeffs) -> (f64, f64) {
    let dt = log.sample_period();
    let j = &params.inertia;
    let (mut y, mut x) = (Vec::new(), Vec::new());
    for w in log.samples.windows(3) {
        let s = &w[1];
        let w_dot = (w[2].gyro - w[0].gyro) / (2.0 * dt);
        let m = j * w_dot + s.gyro.cross(&(j * s.gyro));
        let va = zero_lift_velocity(s, params);
        let t = thrusts(s, params);
        let speed = s.velocity.norm();
        let flap: f64 = (0..2)
            .map(|i| flap_effectiveness(t[i], &va, speed, params, coeffs) * s.delta[i])
            .sum();
        y.push(m.y - params.l_dx * flap);
        x.push(t[0] + t[1]);
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    let c = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let yhat: Vec<f64> = x.iter().map(|v| c * v).collect();
    (c, r_squared(&y, &yhat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::defaults;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table_values() {
        let g = WingGeometry::default();
        let c = analytical_coeffs(&g, -0.025).unwrap();
        assert!((g.lift_slope() - 3.862).abs() < 1e-3);
        assert!((c.c_lv - 0.17).abs() < 0.01);
        assert!((c.c_lt - 3.4).abs() < 0.01);
        assert!((c.c_dlv - 0.041).abs() < 0.01);
        assert!((c.c_dlt - 1.7).abs() < 0.01);
        assert_eq!(c.c_dv, 0.0);
        assert_eq!(c.c_dt, 0.0);
    }

    #[test]
    fn density_scales_airspeed_terms_only() {
        let g = WingGeometry::default();
        let c1 = analytical_coeffs(&g, 0.0).unwrap();
        let c2 = analytical_coeffs(&WingGeometry { rho: 2.0 * g.rho, ..g }, 0.0).unwrap();
        assert!((c2.c_lv / c1.c_lv - 2.0).abs() < 1e-12);
        assert!((c2.c_dlv / c1.c_dlv - 2.0).abs() < 1e-12);
        assert_eq!(c2.c_lt, c1.c_lt);
        assert_eq!(c2.c_dlt, c1.c_dlt);
    }

    #[test]
    fn infinite_aspect_ratio_limit() {
        let g = WingGeometry {
            aspect_ratio: 1e12,
            ..Default::default()
        };
        assert!((g.lift_slope() - g.cl_alpha_2d).abs() < 1e-9);
    }

    #[test]
    fn geometry_validation() {
        let g = WingGeometry {
            e: 1.2,
            ..Default::default()
        };
        assert!(analytical_coeffs(&g, 0.0).is_err());
        let g = WingGeometry {
            area: 0.0,
            ..Default::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn induced_axial_cases() {
        let g = WingGeometry::default();
        assert_eq!(induced_axial_coefficient(&g, 0.0), 0.0);
        let cla = 3.862_f64;
        let oracle = (cla - cla * cla / (std::f64::consts::PI * 4.3 * 0.97)) * 0.01;
        let v = induced_axial_coefficient(&g, 0.1);
        assert!(v > 0.0);
        assert!((v - oracle).abs() < 1e-4 * oracle);
        // forward force whenever πARe exceeds the lift slope
        assert!(std::f64::consts::PI * g.aspect_ratio * g.e > g.lift_slope());
        for ar in [1.0, 2.0, 8.0, 20.0] {
            let w = WingGeometry { aspect_ratio: ar, ..g };
            let positive = std::f64::consts::PI * ar * w.e > w.lift_slope();
            assert_eq!(induced_axial_coefficient(&w, 0.1) > 0.0, positive);
        }
    }

    #[test]
    fn trim_pitch_coefficient() {
        let p = defaults::vehicle_params();
        let c = defaults::experimental_coeffs();
        let v = pitch_coeff_from_trim(-0.27, &p, &c);
        assert!((v + 0.025).abs() < 5e-4, "{v}");
        assert_eq!(pitch_coeff_from_trim(0.0, &p, &c), 0.0);
        assert!(pitch_coeff_from_trim(0.1, &p, &c) > 0.0);
    }

    /// Log whose accelerometer readings come from the force model.
    fn synthetic(coeffs: &AeroCoeffs, n: usize, speed_max: f64, noise: f64, seed: u64) -> FlightLog {
        let p = defaults::vehicle_params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|i| {
                let v = Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.3..0.3),
                ) * speed_max;
                let att = UnitQuat::from_rotation_vector(Vec3::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(0.5..2.0),
                    rng.random_range(-3.0..3.0),
                ));
                let mut s = LogSample {
                    t: i as f64 * 5e-4,
                    velocity: v,
                    attitude: att,
                    accel_body: Vec3::zeros(),
                    gyro: Vec3::zeros(),
                    omega: [rng.random_range(900.0..1700.0), rng.random_range(900.0..1700.0)],
                    delta: [rng.random_range(-0.6..0.3), rng.random_range(-0.6..0.3)],
                };
                let f = predicted_force(&s, &p, coeffs);
                s.accel_body = rot_y(p.alpha0).transpose() * f / p.mass
                    + Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ) * noise;
                s
            })
            .collect();
        FlightLog::new(samples).unwrap()
    }

    #[test]
    fn noise_free_recovery() {
        let p = defaults::vehicle_params();
        let truth = AeroCoeffs {
            c_dv: 0.03,
            c_dt: 0.05,
            ..defaults::experimental_coeffs()
        };
        let log = synthetic(&truth, 2000, 6.0, 0.0, 1);
        let (c, rep) = regress_coeffs(&log, &p, &defaults::analytical_coeffs()).unwrap();
        for (a, b) in [
            (c.c_dv, truth.c_dv),
            (c.c_dt, truth.c_dt),
            (c.c_lv, truth.c_lv),
            (c.c_lt, truth.c_lt),
            (c.c_dlv, truth.c_dlv),
            (c.c_dlt, truth.c_dlt),
        ] {
            assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
        }
        assert!(rep.lift.r2 > 1.0 - 1e-12);
        assert_eq!(c.provenance, Provenance::Experimental);
        assert!(rep.notes.is_empty());
    }

    #[test]
    fn negative_drag_is_clipped() {
        let p = defaults::vehicle_params();
        let truth = AeroCoeffs {
            c_dv: -0.02,
            ..defaults::experimental_coeffs()
        };
        let log = synthetic(&truth, 500, 6.0, 0.0, 2);
        let (c, rep) = regress_coeffs(&log, &p, &truth).unwrap();
        assert_eq!(c.c_dv, 0.0);
        assert!(rep.notes.iter().any(|n| n.contains("c_dv")));
    }

    #[test]
    fn hover_only_log_is_unidentifiable() {
        let p = defaults::vehicle_params();
        let c = defaults::experimental_coeffs();
        let samples = (0..100)
            .map(|i| LogSample {
                t: i as f64 * 0.01,
                velocity: Vec3::zeros(),
                attitude: UnitQuat::from_axis_angle(Vec3::y(), 1.5),
                accel_body: Vec3::new(-9.81, 0.0, 0.0),
                gyro: Vec3::zeros(),
                omega: [1257.0 + i as f64, 1250.0],
                delta: [-0.27, -0.27 + 0.001 * i as f64],
            })
            .collect();
        let log = FlightLog::new(samples).unwrap();
        match regress_coeffs(&log, &p, &c) {
            Err(SysidError::Unidentifiable(names)) => {
                assert!(names.contains(&"c_dv"));
                assert!(names.contains(&"c_lv"));
                assert!(names.contains(&"c_dlv"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noisy_recovery_and_force_fit() {
        let p = defaults::vehicle_params();
        let truth = defaults::experimental_coeffs();
        // accelerometer white noise at the default density and 2 kHz
        let sigma = 13e-6 * crate::GRAVITY * 2000.0_f64.sqrt() * 3.0_f64.sqrt();
        let log = synthetic(&truth, 20000, 6.0, sigma, 3);
        let (c, rep) = regress_coeffs(&log, &p, &truth).unwrap();
        for (a, b) in [
            (c.c_lv, truth.c_lv),
            (c.c_lt, truth.c_lt),
            (c.c_dlv, truth.c_dlv),
            (c.c_dlt, truth.c_dlt),
        ] {
            assert!((a - b).abs() <= 0.05 * b.abs(), "{a} vs {b}");
        }
        assert!(rep.lift.r2 > 0.95);
        assert!(force_fit_r2(&log, &p, &c)[2] > 0.95);
    }

    #[test]
    fn log_validation() {
        let s = LogSample {
            t: 0.0,
            velocity: Vec3::zeros(),
            attitude: UnitQuat::identity(),
            accel_body: Vec3::zeros(),
            gyro: Vec3::zeros(),
            omega: [0.0; 2],
            delta: [0.0; 2],
        };
        let bad = vec![s, LogSample { t: 0.1, ..s }, LogSample { t: 0.3, ..s }];
        assert!(FlightLog::new(bad).is_err());
        let nan = vec![
            s,
            LogSample {
                t: 0.1,
                omega: [f64::NAN, 0.0],
                ..s
            },
        ];
        assert!(FlightLog::new(nan).is_err());
    }
}
