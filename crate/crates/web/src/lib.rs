//! Browser bindings: reference preview with a feasibility report, a
//! closed-loop run traced for plotting, and filter frequency responses.
//!
//! Every export returns JSON text so the page needs no generated types.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use tailsitter::baseline::ControllerVariant;
use tailsitter::config::defaults;
use tailsitter::filters::{to_db, Biquad, FilterKind};
use tailsitter::scenario::{run_scenario, LogSink, Metrics, Row, Scenario, ScenarioConfig};
use tailsitter::trajectory::{feasibility_check, FeasibilityReport};

const SCENARIOS: &[(&str, &str)] = &[
    ("lemniscate", include_str!("../../../scenarios/lemniscate.toml")),
    ("knife_edge", include_str!("../../../scenarios/knife_edge.toml")),
    ("hover_to_hover", include_str!("../../../scenarios/hover_to_hover.toml")),
    ("from_hover", include_str!("../../../scenarios/from_hover.toml")),
    ("to_hover", include_str!("../../../scenarios/to_hover.toml")),
    (
        "diff_thrust_turn",
        include_str!("../../../scenarios/diff_thrust_turn.toml"),
    ),
];

/// Points in a previewed path.
const PREVIEW_POINTS: usize = 600;
/// Trace rows kept per simulated second.
const TRACE_RATE_HZ: f64 = 50.0;

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

/// Names of the bundled scenarios, as a JSON array.
#[wasm_bindgen]
pub fn scenario_names() -> String {
    json(&SCENARIOS.iter().map(|(n, _)| *n).collect::<Vec<_>>())
}

#[wasm_bindgen]
pub fn scenario_source(name: &str) -> Option<String> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| s.to_string())
}

#[derive(Serialize)]
struct Preview {
    duration: f64,
    /// North, east, altitude; m.
    path: Vec<[f64; 3]>,
    speed: Vec<f64>,
    feasibility: FeasibilityReport,
}

/// Samples the reference of a scenario and runs the flatness chain along it.
#[wasm_bindgen]
pub fn preview(scenario_toml: &str) -> Result<String, String> {
    let cfg = ScenarioConfig::from_toml(scenario_toml).map_err(|e| e.to_string())?;
    let r = cfg.trajectory.build().map_err(|e| e.to_string())?;
    let d = r.duration();
    let mut path = Vec::with_capacity(PREVIEW_POINTS);
    let mut speed = Vec::with_capacity(PREVIEW_POINTS);
    for k in 0..PREVIEW_POINTS {
        let f = r
            .sample(d * k as f64 / (PREVIEW_POINTS - 1) as f64)
            .map_err(|e| e.to_string())?;
        path.push([f.position.x, f.position.y, -f.position.z]);
        speed.push(f.velocity.norm());
    }
    let feasibility = feasibility_check(
        r.as_ref(),
        &defaults::vehicle_params(),
        &defaults::experimental_coeffs(),
        2e-3,
    );
    Ok(json(&Preview {
        duration: d,
        path,
        speed,
        feasibility,
    }))
}

#[derive(Serialize, Default)]
struct Trace {
    t: Vec<f64>,
    reference: Vec<[f64; 3]>,
    flown: Vec<[f64; 3]>,
    error: Vec<f64>,
    /// Rotor speed commands, rad/s.
    rotors: Vec<[f64; 2]>,
    /// Flap commands, deg.
    flaps: Vec<[f64; 2]>,
}

struct TraceSink {
    every: usize,
    n: usize,
    trace: Trace,
}

impl LogSink for TraceSink {
    fn row(&mut self, r: &Row<'_>) -> std::io::Result<()> {
        self.n += 1;
        if !(self.n - 1).is_multiple_of(self.every) {
            return Ok(());
        }
        let (p, q) = (r.reference.position, r.state.position);
        let tr = &mut self.trace;
        tr.t.push(r.state.t);
        tr.reference.push([p.x, p.y, -p.z]);
        tr.flown.push([q.x, q.y, -q.z]);
        tr.error.push((q - p).norm());
        tr.rotors.push(r.command.diagnostics.omega_cmd);
        tr.flaps.push(r.command.delta.map(f64::to_degrees));
        Ok(())
    }
}

#[derive(Serialize)]
struct Run {
    metrics: Metrics,
    trace: Trace,
}

/// Flies a scenario with the given controller variant and returns the
/// metrics plus a decimated trace.
#[wasm_bindgen]
pub fn simulate(scenario_toml: &str, variant: &str, seed: u32) -> Result<String, String> {
    let mut cfg = ScenarioConfig::from_toml(scenario_toml).map_err(|e| e.to_string())?;
    cfg.variant = variant.parse::<ControllerVariant>()?;
    cfg.seed = seed.into();
    let s = Scenario::from_config(&cfg).map_err(|e| e.to_string())?;
    let every = ((1.0 / (TRACE_RATE_HZ * s.gains.dt())).round() as usize).max(1);
    let mut sink = TraceSink {
        every,
        n: 0,
        trace: Trace::default(),
    };
    let metrics = run_scenario(&s, &mut sink).map_err(|e| e.to_string())?;
    Ok(json(&Run {
        metrics,
        trace: sink.trace,
    }))
}

#[derive(Serialize)]
struct Response {
    freq: Vec<f64>,
    digital_db: Vec<f64>,
    analog_db: Vec<f64>,
}

/// Magnitude response of a second-order Butterworth section against the
/// analog prototype it was designed from, on a log frequency grid.
#[wasm_bindgen]
pub fn filter_response(kind: &str, cutoff_hz: f64, sample_rate_hz: f64, points: usize) -> Result<String, String> {
    let kind = match kind {
        "lowpass" => FilterKind::Lowpass,
        "highpass" => FilterKind::Highpass,
        other => return Err(format!("unknown filter kind `{other}`")),
    };
    let f = Biquad::design(kind, cutoff_hz, sample_rate_hz).map_err(|e| e.to_string())?;
    let points = points.max(2);
    let (lo, hi) = ((cutoff_hz / 100.0).ln(), (0.49 * sample_rate_hz).ln());
    let freq: Vec<f64> = (0..points)
        .map(|k| (lo + (hi - lo) * k as f64 / (points - 1) as f64).exp())
        .collect();
    Ok(json(&Response {
        digital_db: freq.iter().map(|&x| to_db(f.magnitude_at(x))).collect(),
        analog_db: freq.iter().map(|&x| to_db(f.analog_magnitude_at(x))).collect(),
        freq,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse_and_preview() {
        let names: Vec<String> = serde_json::from_str(&scenario_names()).unwrap();
        assert_eq!(names.len(), SCENARIOS.len());
        for n in names {
            let out: serde_json::Value =
                serde_json::from_str(&preview(&scenario_source(&n).unwrap()).unwrap()).unwrap();
            assert_eq!(out["path"].as_array().unwrap().len(), PREVIEW_POINTS);
            assert_eq!(out["feasibility"]["feasible"], true, "{n}");
        }
    }

    #[test]
    fn simulate_traces_at_fixed_rate() {
        let toml = "id = \"h\"\n[trajectory]\nkind = \"hover\"\nduration = 2.0\n";
        let out: serde_json::Value = serde_json::from_str(&simulate(toml, "proposed", 1).unwrap()).unwrap();
        assert_eq!(out["metrics"]["status"], "completed");
        let n = out["trace"]["t"].as_array().unwrap().len();
        assert!((100..=102).contains(&n), "{n}");
    }

    #[test]
    fn errors_come_back_as_messages() {
        assert!(simulate("id = 3", "proposed", 1).is_err());
        let toml = "id = \"h\"\n[trajectory]\nkind = \"hover\"\nduration = 1.0\n";
        assert!(simulate(toml, "pid", 1).unwrap_err().contains("unknown variant"));
        assert!(filter_response("bandstop", 15.0, 2000.0, 10).is_err());
    }

    #[test]
    fn lowpass_response_is_minus_three_db_at_cutoff() {
        let out: serde_json::Value =
            serde_json::from_str(&filter_response("lowpass", 15.0, 2000.0, 401).unwrap()).unwrap();
        let freq: Vec<f64> = serde_json::from_value(out["freq"].clone()).unwrap();
        let db: Vec<f64> = serde_json::from_value(out["digital_db"].clone()).unwrap();
        let k = freq.iter().position(|&f| f >= 15.0).unwrap();
        assert!((db[k] + 3.01).abs() < 0.2, "{}", db[k]);
        assert!(db[0].abs() < 1e-3);
    }
}
