//! Closed-loop co-simulation of plant, sensors and controller, with CSV logs,
//! summary metrics and cross-run comparison.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aero::{AeroCoeffs, VehicleParams};
use crate::baseline::ControllerVariant;
use crate::config::{defaults, load_parameters, load_toml, parse_toml, ConfigError};
use crate::controller::{ControlCommand, Controller, ControllerGains, SensorFrame};
use crate::flatness::{flat_state, inputs_from_moment_thrust, velocity_zero_lift, FlatOutput};
use crate::frames::{wrap_pi, EulerZxy, UnitQuat};
use crate::sim::{CoeffMultipliers, Plant, PlantConfig, SensorModel, SimState};
use crate::sysid::columns;
use crate::trajectory::{Reference, TrajectoryDef, TrajectoryError};
use crate::{ActuatorState, Vec3, GRAVITY};

/// Version tag written in the first line of every CSV log.
pub const LOG_SCHEMA: &str = "tailsitter-log v1";
/// Version of the JSON metrics layout.
pub const METRICS_SCHEMA: u32 = 1;

/// Position error beyond which a run is declared diverged, m.
pub const DIVERGENCE_DISTANCE: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trajectory: {0}")]
    Trajectory(#[from] TrajectoryError),
    #[error("scenario `{id}`: {message}")]
    Invalid { id: String, message: String },
    #[error("log output: {0}")]
    Io(#[from] std::io::Error),
    #[error("compare: {0}")]
    Compare(String),
}

/// Which coefficient set the truth plant uses, relative to the controller
/// model. Anything other than `model` injects a model error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthCoeffs {
    #[default]
    Model,
    Analytical,
    Experimental,
}

fn default_seed() -> u64 {
    1
}

/// Scenario file contents.
///
/// ```toml
/// id = "lemniscate"
/// variant = "proposed"
/// seed = 7
/// truth = "analytical"
///
/// [trajectory]
/// kind = "lemniscate"
/// speed = 6.0
/// lap_time = 7.0
/// laps = 2.0
///
/// [plant]
/// pose_latency = 0.018
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    pub trajectory: TrajectoryDef,
    #[serde(default)]
    pub variant: ControllerVariant,
    /// Gain file (TOML with [`ControllerGains`] fields); defaults built in.
    #[serde(default)]
    pub gains: Option<PathBuf>,
    /// Parameter file for the controller model; defaults built in.
    #[serde(default)]
    pub params: Option<PathBuf>,
    #[serde(default)]
    pub truth: TruthCoeffs,
    #[serde(default)]
    pub plant: PlantConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Simulated time; defaults to the trajectory duration.
    #[serde(default)]
    pub duration: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn new(id: &str, trajectory: TrajectoryDef) -> Self {
        Self {
            id: id.to_string(),
            trajectory,
            variant: ControllerVariant::PROPOSED,
            gains: None,
            params: None,
            truth: TruthCoeffs::Model,
            plant: PlantConfig::default(),
            seed: default_seed(),
            duration: None,
            output_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Ok(load_toml(path)?)
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(parse_toml(text, "<scenario>")?)
    }

    /// Output file stem: `<id>.<variant>`.
    pub fn stem(&self) -> String {
        format!("{}.{}", self.id, self.variant.name().replace('+', "_"))
    }
}

/// Batch manifest: scenarios, optionally crossed with controller variants.
///
/// ```toml
/// variants = ["proposed", "baseline"]
///
/// [[scenario]]
/// id = "hover"
/// trajectory = { kind = "hover", duration = 5.0 }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchManifest {
    #[serde(default)]
    pub variants: Vec<ControllerVariant>,
    /// Scenario files, relative to the manifest.
    #[serde(default)]
    pub include: Vec<PathBuf>,
    #[serde(default)]
    pub scenario: Vec<ScenarioConfig>,
}

impl BatchManifest {
    pub fn load(path: &Path) -> Result<Vec<ScenarioConfig>, ScenarioError> {
        let m: BatchManifest = load_toml(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut list = m.scenario.clone();
        for inc in &m.include {
            let mut cfg = ScenarioConfig::load(&base.join(inc))?;
            cfg.resolve_paths(base.join(inc).parent().unwrap_or(base));
            list.push(cfg);
        }
        for cfg in list.iter_mut().take(m.scenario.len()) {
            cfg.resolve_paths(base);
        }
        Ok(m.expand(list))
    }

    fn expand(&self, list: Vec<ScenarioConfig>) -> Vec<ScenarioConfig> {
        if self.variants.is_empty() {
            return list;
        }
        list.iter()
            .flat_map(|c| {
                self.variants.iter().map(move |v| ScenarioConfig {
                    variant: *v,
                    ..c.clone()
                })
            })
            .collect()
    }
}

impl ScenarioConfig {
    /// Makes relative file references relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.gains, &mut self.params].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

/// Everything needed to run one closed-loop simulation.
pub struct Scenario {
    pub id: String,
    pub reference: Box<dyn Reference>,
    /// Controller model.
    pub params: VehicleParams,
    pub coeffs: AeroCoeffs,
    pub gains: ControllerGains,
    pub variant: ControllerVariant,
    pub plant: PlantConfig,
    pub seed: u64,
    pub duration: f64,
}

impl Scenario {
    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, ScenarioError> {
        let invalid = |message: String| ScenarioError::Invalid {
            id: cfg.id.clone(),
            message,
        };
        let (params, coeffs) = match &cfg.params {
            Some(p) => load_parameters(p)?,
            None => (defaults::vehicle_params(), defaults::experimental_coeffs()),
        };
        let gains: ControllerGains = match &cfg.gains {
            Some(p) => load_toml(p)?,
            None => defaults::gains(),
        };
        gains.validate().map_err(invalid)?;
        cfg.plant.validate().map_err(invalid)?;
        let reference = cfg.trajectory.build()?;
        let duration = cfg.duration.unwrap_or(reference.duration());
        if !(duration > 0.0 && duration <= reference.duration() + 1e-9) {
            return Err(invalid(format!("duration must be in (0, {}] s", reference.duration())));
        }
        let mut plant = cfg.plant.clone();
        let truth = match cfg.truth {
            TruthCoeffs::Model => coeffs.clone(),
            TruthCoeffs::Analytical => defaults::analytical_coeffs(),
            TruthCoeffs::Experimental => defaults::experimental_coeffs(),
        };
        let r = CoeffMultipliers::ratio(&truth, &coeffs);
        let m = &mut plant.multipliers;
        m.c_dv *= r.c_dv;
        m.c_lv *= r.c_lv;
        m.c_dt *= r.c_dt;
        m.c_lt *= r.c_lt;
        m.c_dlv *= r.c_dlv;
        m.c_dlt *= r.c_dlt;
        m.c_mu_t *= r.c_mu_t;
        Ok(Self {
            id: cfg.id.clone(),
            reference,
            params,
            coeffs,
            gains: cfg.variant.adjust_gains(&gains),
            variant: cfg.variant,
            plant,
            seed: cfg.seed,
            duration,
        })
    }
}

/// Equilibrium-consistent state on the reference at its first sample: the
/// flatness attitude, rates and actuator inputs for the given plant.
pub fn trim_state(flat: &FlatOutput, params: &VehicleParams, coeffs: &AeroCoeffs) -> Result<SimState, ScenarioError> {
    let invalid = |m: &str| ScenarioError::Invalid {
        id: String::new(),
        message: m.to_string(),
    };
    let hint = EulerZxy::new(flat.yaw, 0.0, std::f64::consts::FRAC_PI_2).to_quat();
    let mut delta = 0.0;
    let mut st = flat_state(flat, delta, &hint, params, coeffs);
    let mut inputs = None;
    for _ in 0..50 {
        let va = velocity_zero_lift(&st.solution.attitude, &flat.velocity, params);
        let inp = inputs_from_moment_thrust(
            &st.moment,
            st.solution.thrust,
            &va,
            flat.velocity.norm(),
            params,
            coeffs,
        )
        .map_err(|_| invalid("trim allocation is singular"))?;
        let d = inp.delta[0] + inp.delta[1];
        inputs = Some(inp);
        if (d - delta).abs() < 1e-12 {
            break;
        }
        delta = d;
        st = flat_state(flat, delta, &hint, params, coeffs);
    }
    let inp = inputs.ok_or_else(|| invalid("trim did not converge"))?;
    Ok(SimState {
        position: flat.position,
        velocity: flat.velocity,
        attitude: st.solution.attitude,
        omega: st.omega,
        actuators: ActuatorState {
            omega: inp.omega,
            delta: inp.delta,
        },
        t: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    #[default]
    Completed,
    /// The allocation failed and the controller gave up.
    Fault,
    /// Non-finite state, runaway rates or position error beyond
    /// [`DIVERGENCE_DISTANCE`].
    Diverged,
}

/// Summary metrics of one run. Units are in the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub schema: u32,
    pub id: String,
    pub variant: ControllerVariant,
    pub seed: u64,
    pub status: RunStatus,
    #[serde(default)]
    pub message: String,
    pub sim_time_s: f64,
    pub steps: usize,
    pub max_speed_m_s: f64,
    pub max_load_g: f64,
    pub max_rate_deg_s: f64,
    pub max_pos_error_m: f64,
    pub rms_pos_error_m: f64,
    pub rms_yaw_error_deg: f64,
    pub max_yaw_rate_deg_s: f64,
    pub max_rotor_speed_rad_s: f64,
    pub final_pos_error_m: f64,
    pub saturated_steps: usize,
}

impl Metrics {
    fn new(s: &Scenario) -> Self {
        Self {
            schema: METRICS_SCHEMA,
            id: s.id.clone(),
            variant: s.variant,
            seed: s.seed,
            status: RunStatus::Completed,
            message: String::new(),
            sim_time_s: 0.0,
            steps: 0,
            max_speed_m_s: 0.0,
            max_load_g: 0.0,
            max_rate_deg_s: 0.0,
            max_pos_error_m: 0.0,
            rms_pos_error_m: 0.0,
            rms_yaw_error_deg: 0.0,
            max_yaw_rate_deg_s: 0.0,
            max_rotor_speed_rad_s: 0.0,
            final_pos_error_m: 0.0,
            saturated_steps: 0,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Yaw of an attitude: heading of the horizontal projection of b_y.
pub fn yaw_of(q: &UnitQuat) -> f64 {
    let by = q.rotate(&Vec3::y());
    (-by.x).atan2(by.y)
}

/// Everything known at one control step.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub reference: &'a FlatOutput,
    pub state: &'a SimState,
    pub sensors: &'a SensorFrame,
    pub command: &'a ControlCommand,
}

pub trait LogSink {
    fn row(&mut self, row: &Row<'_>) -> std::io::Result<()>;
    fn finish(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

/// Discards all rows.
pub struct NullSink;

impl LogSink for NullSink {
    fn row(&mut self, _row: &Row<'_>) -> std::io::Result<()> {
        Ok(())
    }
}

fn v3(prefix: &str, unit: &str) -> [String; 3] {
    ["x", "y", "z"].map(|a| format!("{prefix}{a}_{unit}"))
}

fn q4(prefix: &str) -> [String; 4] {
    ["w", "x", "y", "z"].map(|a| format!("{prefix}q{a}"))
}

/// Column names of the CSV log, in order.
pub fn log_header() -> Vec<String> {
    let mut h: Vec<String> = vec![columns::TIME.into()];
    h.extend(v3("ref_", "m"));
    h.extend(v3("ref_v", "m_s"));
    h.extend(v3("ref_a", "m_s2"));
    h.push("ref_yaw_rad".into());
    h.push("ref_yaw_rate_rad_s".into());
    h.extend(v3("", "m"));
    h.extend(v3("v", "m_s"));
    h.extend(q4(""));
    h.extend(["p_rad_s", "q_rad_s", "r_rad_s"].map(String::from));
    h.extend(["omega1_rad_s", "omega2_rad_s", "delta1_rad", "delta2_rad"].map(String::from));
    h.extend(v3("meas_", "m"));
    h.extend(columns::VELOCITY.map(String::from));
    h.extend(columns::ATTITUDE.map(String::from));
    h.extend(columns::ACCEL.map(String::from));
    h.extend(columns::GYRO.map(String::from));
    h.extend(columns::ROTOR.map(String::from));
    h.extend(columns::FLAP.map(String::from));
    h.extend(["cmd_throttle1", "cmd_throttle2", "cmd_delta1_rad", "cmd_delta2_rad"].map(String::from));
    h.extend(v3("cmd_a", "m_s2"));
    h.extend(v3("cmd_f", "n"));
    h.extend(q4("cmd_"));
    h.push("cmd_thrust_n".into());
    h.extend(v3("ref_omega_", "rad_s"));
    h.extend(v3("cmd_omega_dot_", "rad_s2"));
    h.extend(v3("cmd_m", "nm"));
    h.extend(["cmd_omega1_rad_s", "cmd_omega2_rad_s"].map(String::from));
    h.extend(v3("att_err_", "rad"));
    h.extend(v3("f_ext_est_", "n"));
    h.extend(v3("m_ext_est_", "nm"));
    h.push("flags".into());
    h
}

fn row_values(r: &Row<'_>) -> Vec<f64> {
    let mut v = Vec::with_capacity(96);
    let push3 = |v: &mut Vec<f64>, x: &Vec3| v.extend(x.iter());
    let push4 = |v: &mut Vec<f64>, q: &UnitQuat| v.extend(q.as_array());
    let (f, s, m, c) = (r.reference, r.state, r.sensors, r.command);
    let d = &c.diagnostics;
    v.push(s.t);
    push3(&mut v, &f.position);
    push3(&mut v, &f.velocity);
    push3(&mut v, &f.acceleration);
    v.push(f.yaw);
    v.push(f.yaw_rate);
    push3(&mut v, &s.position);
    push3(&mut v, &s.velocity);
    push4(&mut v, &s.attitude);
    push3(&mut v, &s.omega);
    v.extend(s.actuators.omega);
    v.extend(s.actuators.delta);
    push3(&mut v, &m.position);
    push3(&mut v, &m.velocity);
    push4(&mut v, &m.attitude);
    push3(&mut v, &m.accel_body);
    push3(&mut v, &m.gyro);
    v.extend(m.omega_meas);
    v.extend(m.delta_meas);
    v.extend(c.throttle);
    v.extend(c.delta);
    push3(&mut v, &d.accel_cmd);
    push3(&mut v, &d.force_cmd);
    push4(&mut v, &d.attitude_cmd);
    v.push(d.thrust_cmd);
    push3(&mut v, &d.omega_ref);
    push3(&mut v, &d.omega_dot_cmd);
    push3(&mut v, &d.moment_cmd);
    v.extend(d.omega_cmd);
    push3(&mut v, &d.attitude_error);
    push3(&mut v, &d.f_ext_est);
    push3(&mut v, &d.m_ext_est);
    let fl = &d.flags;
    let bits = fl.thrust_saturated as u8
        | (fl.flap_saturated as u8) << 1
        | (fl.throttle_saturated as u8) << 2
        | (fl.degenerate_force as u8) << 3
        | (fl.fault as u8) << 4;
    v.push(bits as f64);
    v
}

/// CSV log: a `# tailsitter-log v1 ...` line, the header, one row per step.
/// `flags` bits: 0 thrust, 1 flap, 2 throttle saturation, 3 degenerate
/// force, 4 fault.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    decimation: usize,
    count: usize,
}

impl<W: Write> CsvSink<W> {
    pub fn new(mut inner: W, id: &str, seed: u64, decimation: usize) -> std::io::Result<Self> {
        writeln!(inner, "# {LOG_SCHEMA} id={id} seed={seed}")?;
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(log_header()).map_err(std::io::Error::other)?;
        Ok(Self {
            writer,
            decimation: decimation.max(1),
            count: 0,
        })
    }
}

impl<W: Write> LogSink for CsvSink<W> {
    fn row(&mut self, row: &Row<'_>) -> std::io::Result<()> {
        let keep = self.count.is_multiple_of(self.decimation);
        self.count += 1;
        if !keep {
            return Ok(());
        }
        let vals = row_values(row);
        self.writer
            .write_record(vals.iter().map(|x| x.to_string()))
            .map_err(std::io::Error::other)
    }

    fn finish(&mut self) -> std::io::Result<()> {
        self.writer.flush()
    }
}

/// Compact in-memory trace for plotting and tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub reference: Vec3,
    pub position: Vec3,
    pub yaw_ref: f64,
    pub yaw: f64,
    pub speed: f64,
    pub rotor: [f64; 2],
    pub delta: [f64; 2],
    pub f_ext_est: Vec3,
    pub m_ext_est: Vec3,
}

#[derive(Debug, Clone, Default)]
pub struct TraceSink {
    pub points: Vec<TracePoint>,
    pub decimation: usize,
    count: usize,
}

impl TraceSink {
    pub fn new(decimation: usize) -> Self {
        Self {
            points: Vec::new(),
            decimation: decimation.max(1),
            count: 0,
        }
    }
}

impl LogSink for TraceSink {
    fn row(&mut self, r: &Row<'_>) -> std::io::Result<()> {
        let keep = self.count.is_multiple_of(self.decimation.max(1));
        self.count += 1;
        if keep {
            self.points.push(TracePoint {
                t: r.state.t,
                reference: r.reference.position,
                position: r.state.position,
                yaw_ref: r.reference.yaw,
                yaw: yaw_of(&r.state.attitude),
                speed: r.state.velocity.norm(),
                rotor: r.state.actuators.omega,
                delta: r.state.actuators.delta,
                f_ext_est: r.command.diagnostics.f_ext_est,
                m_ext_est: r.command.diagnostics.m_ext_est,
            });
        }
        Ok(())
    }
}

/// Runs a scenario at the controller rate: sense, control, integrate.
pub fn run_scenario(s: &Scenario, sink: &mut dyn LogSink) -> Result<Metrics, ScenarioError> {
    let dt = s.gains.dt();
    let plant = Plant::new(&s.params, &s.coeffs, s.plant.clone());
    let mut sensors = SensorModel::new(&s.plant, dt, s.seed);
    let mut controller = Controller::new(s.params.clone(), s.coeffs.clone(), s.gains.clone(), s.variant);
    let first = s.reference.sample(0.0)?;
    let mut state = trim_state(&first, &plant.params, &plant.coeffs).map_err(|e| match e {
        ScenarioError::Invalid { message, .. } => ScenarioError::Invalid {
            id: s.id.clone(),
            message,
        },
        e => e,
    })?;
    let mut m = Metrics::new(s);
    let steps = (s.duration / dt).round() as usize;
    let (mut sum_e2, mut sum_y2) = (0.0, 0.0);

    for k in 0..=steps {
        let t = (k as f64 * dt).min(s.duration);
        state.t = t;
        let reference = s.reference.sample(t)?;
        let frame = sensors.sense(&plant, &state);
        let cmd = controller.step(&reference, &frame);
        sink.row(&Row {
            reference: &reference,
            state: &state,
            sensors: &frame,
            command: &cmd,
        })?;

        let err = (state.position - reference.position).norm();
        let yaw_err = wrap_pi(yaw_of(&state.attitude) - reference.yaw);
        let accel = plant.acceleration(&state);
        m.steps = k + 1;
        m.sim_time_s = t;
        sum_e2 += err * err;
        sum_y2 += yaw_err * yaw_err;
        m.max_pos_error_m = m.max_pos_error_m.max(err);
        m.final_pos_error_m = err;
        m.max_speed_m_s = m.max_speed_m_s.max(state.velocity.norm());
        m.max_load_g = m.max_load_g.max((accel - GRAVITY * Vec3::z()).norm() / GRAVITY);
        m.max_rate_deg_s = m.max_rate_deg_s.max(state.omega.norm().to_degrees());
        let world_rate = state.attitude.rotate(&state.omega);
        m.max_yaw_rate_deg_s = m.max_yaw_rate_deg_s.max(world_rate.z.abs().to_degrees());
        m.max_rotor_speed_rad_s = m
            .max_rotor_speed_rad_s
            .max(state.actuators.omega[0].max(state.actuators.omega[1]));
        if cmd.diagnostics.flags.any_saturation() {
            m.saturated_steps += 1;
        }

        if cmd.diagnostics.flags.fault {
            m.status = RunStatus::Fault;
            m.message = format!("allocation fault at t = {t:.4} s");
            break;
        }
        if err > DIVERGENCE_DISTANCE {
            m.status = RunStatus::Diverged;
            m.message = format!("position error {err:.1} m at t = {t:.4} s");
            break;
        }
        if k == steps {
            break;
        }
        match plant.dynamics_step(&state, &cmd.actuator(), dt) {
            Ok(next) => state = next,
            Err(e) => {
                m.status = RunStatus::Diverged;
                m.message = e.to_string();
                break;
            }
        }
    }
    let n = m.steps.max(1) as f64;
    m.rms_pos_error_m = (sum_e2 / n).sqrt();
    m.rms_yaw_error_deg = (sum_y2 / n).sqrt().to_degrees();
    sink.finish()?;
    Ok(m)
}

/// Runs a configured scenario, writing `<stem>.csv` and `<stem>.json` into
/// `out_dir` (log skipped when `write_log` is false).
pub fn run_to_files(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    write_log: bool,
    decimation: usize,
) -> Result<Metrics, ScenarioError> {
    let scenario = Scenario::from_config(cfg)?;
    std::fs::create_dir_all(out_dir)?;
    let stem = cfg.stem();
    let metrics = if write_log {
        let file = std::fs::File::create(out_dir.join(format!("{stem}.csv")))?;
        let mut sink = CsvSink::new(std::io::BufWriter::new(file), &cfg.id, cfg.seed, decimation)?;
        run_scenario(&scenario, &mut sink)?
    } else {
        run_scenario(&scenario, &mut NullSink)?
    };
    std::fs::write(out_dir.join(format!("{stem}.json")), metrics.to_json())?;
    Ok(metrics)
}

/// Reads a metrics file holding one object or an array of them.
pub fn load_metrics(path: &Path) -> Result<Vec<Metrics>, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let parse_err = |e: serde_json::Error| ConfigError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    Ok(if value.is_array() {
        serde_json::from_value(value).map_err(parse_err)?
    } else {
        vec![serde_json::from_value(value).map_err(parse_err)?]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub label: String,
    pub status: RunStatus,
    pub max_pos_error_m: f64,
    pub rms_pos_error_m: f64,
    pub rms_yaw_error_deg: f64,
    /// Differences from the first set.
    pub delta_max_pos_error_m: f64,
    pub delta_rms_pos_error_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub id: String,
    pub entries: Vec<ComparisonEntry>,
    /// Labels from smallest to largest max position error; failed runs last.
    pub ranking: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    /// Whether `a` ranks strictly before `b` in scenario `id`.
    pub fn ranks_before(&self, id: &str, a: &str, b: &str) -> Option<bool> {
        let row = self.rows.iter().find(|r| r.id == id)?;
        let pa = row.ranking.iter().position(|l| l == a)?;
        let pb = row.ranking.iter().position(|l| l == b)?;
        Some(pa < pb)
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format!("{}\n", row.id));
            out.push_str(&format!(
                "  {:<20} {:>10} {:>12} {:>12} {:>12} {:>12}\n",
                "label", "status", "max err m", "rms err m", "d max m", "d rms m"
            ));
            for e in &row.entries {
                out.push_str(&format!(
                    "  {:<20} {:>10} {:>12.4} {:>12.4} {:>+12.4} {:>+12.4}\n",
                    e.label,
                    format!("{:?}", e.status).to_lowercase(),
                    e.max_pos_error_m,
                    e.rms_pos_error_m,
                    e.delta_max_pos_error_m,
                    e.delta_rms_pos_error_m
                ));
            }
            out.push_str(&format!("  ranking: {}\n", row.ranking.join(" < ")));
        }
        out
    }
}

/// Side-by-side comparison of labelled metric sets. Entries are matched by
/// scenario id and, within a set, by variant when several share an id.
pub fn compare(sets: &[(String, Vec<Metrics>)]) -> Result<Comparison, ScenarioError> {
    if sets.len() < 2 && sets.iter().map(|s| s.1.len()).sum::<usize>() < 2 {
        return Err(ScenarioError::Compare("need at least two metric sets".into()));
    }
    // flatten into (label, metrics); a set with several variants of one id
    // contributes one column per variant
    let mut by_id: BTreeMap<String, Vec<(String, &Metrics)>> = BTreeMap::new();
    for (label, list) in sets {
        let mut count: BTreeMap<&str, usize> = BTreeMap::new();
        for m in list {
            *count.entry(&m.id).or_default() += 1;
        }
        for m in list {
            let l = if count[m.id.as_str()] > 1 || label.is_empty() {
                if label.is_empty() {
                    m.variant.name().to_string()
                } else {
                    format!("{label}:{}", m.variant.name())
                }
            } else {
                label.clone()
            };
            by_id.entry(m.id.clone()).or_default().push((l, m));
        }
    }
    let n_cols = by_id.values().map(|v| v.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for (id, list) in &by_id {
        if list.len() != n_cols || list.len() < 2 {
            return Err(ScenarioError::Compare(format!(
                "scenario `{id}` is missing from some inputs"
            )));
        }
        let (m0max, m0rms) = (list[0].1.max_pos_error_m, list[0].1.rms_pos_error_m);
        let entries: Vec<ComparisonEntry> = list
            .iter()
            .map(|(l, m)| ComparisonEntry {
                label: l.clone(),
                status: m.status,
                max_pos_error_m: m.max_pos_error_m,
                rms_pos_error_m: m.rms_pos_error_m,
                rms_yaw_error_deg: m.rms_yaw_error_deg,
                delta_max_pos_error_m: m.max_pos_error_m - m0max,
                delta_rms_pos_error_m: m.rms_pos_error_m - m0rms,
            })
            .collect();
        let mut ranking: Vec<&ComparisonEntry> = entries.iter().collect();
        ranking.sort_by(|a, b| {
            let fa = a.status != RunStatus::Completed;
            let fb = b.status != RunStatus::Completed;
            fa.cmp(&fb).then(a.max_pos_error_m.total_cmp(&b.max_pos_error_m))
        });
        let ranking = ranking.iter().map(|e| e.label.clone()).collect();
        rows.push(ComparisonRow {
            id: id.clone(),
            entries,
            ranking,
        });
    }
    Ok(Comparison { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hover_cfg(duration: f64) -> ScenarioConfig {
        let mut c = ScenarioConfig::new("hover", TrajectoryDef::hover(duration));
        c.plant = PlantConfig::ideal();
        c
    }

    #[test]
    fn hover_equilibrium() {
        let s = Scenario::from_config(&hover_cfg(2.0)).unwrap();
        let m = run_scenario(&s, &mut NullSink).unwrap();
        assert_eq!(m.status, RunStatus::Completed);
        assert!(m.rms_pos_error_m < 1e-3, "{m:?}");
        assert!(m.max_speed_m_s < 1e-2);
        assert_eq!(m.steps, 4001);
    }

    #[test]
    fn trim_is_static_equilibrium() {
        let p = defaults::vehicle_params();
        let c = defaults::experimental_coeffs();
        let s = trim_state(&FlatOutput::hover(Vec3::zeros(), 0.3), &p, &c).unwrap();
        let plant = Plant::new(&p, &c, PlantConfig::ideal());
        assert!(plant.acceleration(&s).norm() < 1e-9);
        let (_, m) = plant.wrench(&s.attitude, &s.velocity, &s.actuators);
        assert!(m.norm() < 1e-10);
        assert!((yaw_of(&s.attitude) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn csv_log_is_deterministic() {
        let mut cfg = hover_cfg(0.2);
        cfg.plant = PlantConfig::default();
        let run = || {
            let s = Scenario::from_config(&cfg).unwrap();
            let mut buf = Vec::new();
            {
                let mut sink = CsvSink::new(&mut buf, &cfg.id, cfg.seed, 1).unwrap();
                run_scenario(&s, &mut sink).unwrap();
            }
            buf
        };
        let a = run();
        assert_eq!(a, run());
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# tailsitter-log v1"));
        let header = lines.next().unwrap();
        assert_eq!(header.split(',').count(), log_header().len());
        assert_eq!(lines.next().unwrap().split(',').count(), log_header().len());
    }

    #[test]
    fn scenario_toml_roundtrip() {
        let text = r#"
id = "lem"
variant = "baseline+ff"
truth = "analytical"
seed = 9

[trajectory]
kind = "lemniscate"
speed = 6.0
lap_time = 7.0
laps = 1.0

[plant]
pose_latency = 0.02
"#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.variant, ControllerVariant::BASELINE_FF);
        assert_eq!(cfg.truth, TruthCoeffs::Analytical);
        assert_eq!(cfg.plant.pose_latency, 0.02);
        assert_eq!(cfg.plant.pose_rate, 360.0);
        let back: ScenarioConfig = toml::from_str(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        let s = Scenario::from_config(&cfg).unwrap();
        assert!(s.plant.multipliers.c_lv < 1.0);
        assert!(s.gains.k_i_xi.min() > 0.0);
    }

    #[test]
    fn bad_duration_rejected() {
        let mut cfg = hover_cfg(1.0);
        cfg.duration = Some(5.0);
        assert!(Scenario::from_config(&cfg).is_err());
    }

    fn metrics(id: &str, v: ControllerVariant, err: f64) -> Metrics {
        let mut m = Metrics::new(&Scenario {
            id: id.into(),
            reference: TrajectoryDef::hover(1.0).build().unwrap(),
            params: defaults::vehicle_params(),
            coeffs: defaults::experimental_coeffs(),
            gains: defaults::gains(),
            variant: v,
            plant: PlantConfig::ideal(),
            seed: 0,
            duration: 1.0,
        });
        m.max_pos_error_m = err;
        m.rms_pos_error_m = err / 2.0;
        m
    }

    #[test]
    fn compare_identical_is_zero() {
        let a = vec![metrics("h", ControllerVariant::PROPOSED, 0.3)];
        let c = compare(&[("a".into(), a.clone()), ("b".into(), a)]).unwrap();
        assert!(c.rows[0].entries.iter().all(|e| e.delta_max_pos_error_m == 0.0));
    }

    #[test]
    fn compare_missing_id_errors() {
        let a = vec![metrics("h", ControllerVariant::PROPOSED, 0.3)];
        let b = vec![metrics("g", ControllerVariant::PROPOSED, 0.3)];
        assert!(compare(&[("a".into(), a), ("b".into(), b)]).is_err());
    }

    #[test]
    fn compare_ranks_variants() {
        let set = vec![
            metrics("h", ControllerVariant::PROPOSED, 0.1),
            metrics("h", ControllerVariant::BASELINE, 0.5),
        ];
        let c = compare(&[(String::new(), set)]).unwrap();
        assert_eq!(c.ranks_before("h", "proposed", "baseline"), Some(true));
        assert!(c.table().contains("proposed < baseline"));
    }
}
