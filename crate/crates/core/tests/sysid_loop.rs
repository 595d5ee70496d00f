//! Identification from simulated flight logs: fly hover and coordinated
//! circles against a perturbed truth plant, regress the coefficients from the
//! logged sensor data, and fly again with the identified model.

use tailsitter::aero::AeroCoeffs;
use tailsitter::config::defaults;
use tailsitter::scenario::{run_scenario, CsvSink, NullSink, Scenario, ScenarioConfig};
use tailsitter::sim::CoeffMultipliers;
use tailsitter::sysid::{force_fit_r2, regress_coeffs, FlightLog};
use tailsitter::trajectory::{TrajectoryDef, YawPolicy};

fn perturbation() -> CoeffMultipliers {
    CoeffMultipliers {
        c_dv: 0.7,
        c_lv: 1.3,
        c_dt: 1.25,
        c_lt: 0.75,
        c_dlv: 1.2,
        c_dlt: 0.8,
        ..Default::default()
    }
}

/// Scenario whose controller uses `model` while the plant flies `truth`.
fn scenario(id: &str, def: TrajectoryDef, model: &AeroCoeffs, truth: &AeroCoeffs, seed: u64) -> Scenario {
    let mut cfg = ScenarioConfig::new(id, def);
    cfg.seed = seed;
    let mut s = Scenario::from_config(&cfg).unwrap();
    s.coeffs = model.clone();
    s.plant.multipliers = CoeffMultipliers::ratio(truth, model);
    s
}

fn profile() -> Vec<(&'static str, TrajectoryDef)> {
    vec![
        ("hover", TrajectoryDef::hover(4.0)),
        // quick dashes excite pitch acceleration; in steady flight the pitch
        // balance makes flap lift proportional to thrust
        (
            "dash",
            TrajectoryDef::hover_to_hover(6.0, std::f64::consts::FRAC_PI_2, 2.5),
        ),
        (
            "back",
            TrajectoryDef::hover_to_hover(-6.0, -std::f64::consts::FRAC_PI_2, 2.5),
        ),
        ("circle2", TrajectoryDef::circle(2.0, 1.0, YawPolicy::Coordinated)),
        ("circle3", TrajectoryDef::circle(3.0, 1.0, YawPolicy::Coordinated)),
        ("circle4.5", TrajectoryDef::circle(4.5, 1.0, YawPolicy::Coordinated)),
    ]
}

fn fly_and_log(model: &AeroCoeffs, truth: &AeroCoeffs) -> FlightLog {
    let dir = std::env::temp_dir().join(format!("tailsitter-sysid-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut log: Option<FlightLog> = None;
    for (k, (id, def)) in profile().into_iter().enumerate() {
        let s = scenario(id, def, model, truth, 11 + k as u64);
        let path = dir.join(format!("{id}.csv"));
        let file = std::fs::File::create(&path).unwrap();
        let mut sink = CsvSink::new(std::io::BufWriter::new(file), id, s.seed, 4).unwrap();
        run_scenario(&s, &mut sink).unwrap();
        drop(sink);
        let part = FlightLog::from_csv(&path).unwrap();
        log = Some(match log {
            None => part,
            Some(l) => l.concat(&part).unwrap(),
        });
    }
    std::fs::remove_dir_all(&dir).ok();
    log.unwrap()
}

#[test]
fn identification_loop_recovers_truth_and_improves_tracking() {
    let p = defaults::vehicle_params();
    let seed_model = defaults::analytical_coeffs();
    let truth = perturbation().apply(&seed_model);

    let log = fly_and_log(&seed_model, &truth);
    let (fit, report) = regress_coeffs(&log, &p, &seed_model).unwrap();
    for (name, got, want) in [
        ("c_lv", fit.c_lv, truth.c_lv),
        ("c_lt", fit.c_lt, truth.c_lt),
        ("c_dlv", fit.c_dlv, truth.c_dlv),
        ("c_dlt", fit.c_dlt, truth.c_dlt),
        ("c_dv", fit.c_dv, truth.c_dv),
        ("c_dt", fit.c_dt, truth.c_dt),
    ] {
        // the analytical drag terms are zero; those get an absolute bound
        let tol = if want == 0.0 { 0.01 } else { 0.05 * want.abs() };
        assert!((got - want).abs() <= tol, "{name}: {got} vs {want}");
    }
    assert!(report.lift.r2 >= 0.95, "lift R² {}", report.lift.r2);
    assert!(force_fit_r2(&log, &p, &fit)[2] >= 0.95);

    // tracking on a coordinated circle with the seed model vs the fitted one
    let rms = |model: &AeroCoeffs| {
        let def = TrajectoryDef::circle(4.5, 2.0, YawPolicy::Coordinated);
        let s = scenario("check", def, model, &truth, 5);
        run_scenario(&s, &mut NullSink).unwrap().rms_pos_error_m
    };
    let (before, after) = (rms(&seed_model), rms(&fit));
    eprintln!("rms seed {before:.4} m, identified {after:.4} m");
    assert!(after < before);
}
