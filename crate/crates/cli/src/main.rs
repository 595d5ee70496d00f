use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tailsitter::baseline::ControllerVariant;
use tailsitter::config::{defaults, load_parameters, load_toml, ParameterFile};
use tailsitter::scenario::{compare, load_metrics, run_to_files, BatchManifest, Metrics, RunStatus, ScenarioConfig};
use tailsitter::sysid::{analytical_coeffs, regress_coeffs, FlightLog, WingGeometry};
use tailsitter::trajectory::feasibility_check;

/// Exit status when a run ends in a fault or divergence, or a reference is
/// infeasible.
const EXIT_FLIGHT_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "tailsitter", version, about = "Tailsitter trajectory tracking simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write `<id>.<variant>.csv` and `.json`.
    Run {
        scenario: PathBuf,
        /// Output directory (default: the scenario's `output_dir`, else `out`).
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        variant: Option<ControllerVariant>,
        /// Keep every n-th control step in the log.
        #[arg(long, default_value_t = 1)]
        decimate: usize,
        /// Write metrics only.
        #[arg(long)]
        no_log: bool,
    },
    /// Simulate every scenario of a manifest in parallel.
    Batch {
        manifest: PathBuf,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(short, long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        decimate: usize,
        #[arg(long)]
        no_log: bool,
    },
    /// Side-by-side table of metrics files matched by scenario id.
    Compare {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        /// Also write the comparison as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Fit aerodynamic coefficients from flight logs and write a parameter file.
    Identify {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        /// Vehicle parameters and prior coefficients (default: built-in).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        decimate: usize,
    },
    /// Run the flatness chain along a scenario's reference and check limits.
    Feasibility {
        scenario: PathBuf,
        /// Sample spacing, s.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Lifting-line coefficient estimates from wing and propeller geometry.
    Analytical {
        /// Geometry TOML (default: built-in).
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Pitch moment coefficient c_mu_t to carry into the output, m
        /// (default: built-in).
        #[arg(long, allow_hyphen_values = true)]
        pitch_coeff: Option<f64>,
        /// Write a parameter file with these coefficients.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            seed,
            variant,
            decimate,
            no_log,
        } => run(&scenario, out, seed, variant, decimate, no_log),
        Command::Batch {
            manifest,
            out,
            jobs,
            seed,
            decimate,
            no_log,
        } => batch(&manifest, &out, jobs, seed, decimate, no_log),
        Command::Compare { metrics, json } => compare_files(&metrics, json.as_deref()),
        Command::Identify {
            logs,
            params,
            output,
            decimate,
        } => identify(&logs, params.as_deref(), &output, decimate),
        Command::Feasibility { scenario, dt } => feasibility(&scenario, dt),
        Command::Analytical {
            geometry,
            pitch_coeff,
            output,
        } => analytical(geometry.as_deref(), pitch_coeff, output.as_deref()),
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

fn table_header() -> String {
    format!(
        "{:<24} {:<14} {:<10} {:>9} {:>9} {:>9} {:>7} {:>9} {:>9}",
        "id", "variant", "status", "max err", "rms err", "speed", "load", "rate", "yaw rms"
    )
}

fn table_row(m: &Metrics) -> String {
    format!(
        "{:<24} {:<14} {:<10} {:>9.3} {:>9.3} {:>9.2} {:>7.2} {:>9.0} {:>9.2}",
        m.id,
        m.variant.name(),
        format!("{:?}", m.status).to_lowercase(),
        m.max_pos_error_m,
        m.rms_pos_error_m,
        m.max_speed_m_s,
        m.max_load_g,
        m.max_rate_deg_s,
        m.rms_yaw_error_deg
    )
}

fn run(
    path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    variant: Option<ControllerVariant>,
    decimate: usize,
    no_log: bool,
) -> Result<ExitCode> {
    let mut cfg = load_scenario(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(v) = variant {
        cfg.variant = v;
    }
    let out = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let m = run_to_files(&cfg, &out, !no_log, decimate).with_context(|| format!("running {}", path.display()))?;
    println!("{}\n{}", table_header(), table_row(&m));
    println!("wrote {}", out.join(format!("{}.json", cfg.stem())).display());
    if m.status != RunStatus::Completed {
        eprintln!("{}", m.message);
        return Ok(ExitCode::from(EXIT_FLIGHT_FAILURE));
    }
    Ok(ExitCode::SUCCESS)
}

fn batch(
    manifest: &Path,
    out: &Path,
    jobs: Option<usize>,
    seed: Option<u64>,
    decimate: usize,
    no_log: bool,
) -> Result<ExitCode> {
    let mut configs = BatchManifest::load(manifest)?;
    if configs.is_empty() {
        bail!("{}: no scenarios", manifest.display());
    }
    if let Some(s) = seed {
        configs.iter_mut().for_each(|c| c.seed = s);
    }
    let mut stems: Vec<String> = configs.iter().map(|c| c.stem()).collect();
    stems.sort();
    if let Some(w) = stems.windows(2).find(|w| w[0] == w[1]) {
        bail!(
            "{}: duplicate scenario `{}` would overwrite its outputs",
            manifest.display(),
            w[0]
        );
    }

    let workers = jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, configs.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Metrics>>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(cfg) = configs.get(i) else { break };
                let r = run_to_files(cfg, out, !no_log, decimate).with_context(|| format!("scenario `{}`", cfg.stem()));
                results.lock().expect("no worker panicked")[i] = Some(r);
            });
        }
    });

    let mut metrics = Vec::new();
    for r in results.into_inner().expect("no worker panicked") {
        metrics.push(r.expect("every index visited")?);
    }
    println!("{}", table_header());
    for m in &metrics {
        println!("{}", table_row(m));
    }
    let summary = out.join("summary.json");
    std::fs::write(&summary, serde_json::to_string_pretty(&metrics)?)?;
    println!("wrote {}", summary.display());

    let variants: std::collections::BTreeSet<_> = metrics.iter().map(|m| m.variant.name()).collect();
    if variants.len() > 1 {
        let cmp = compare(&[(String::new(), metrics.clone())])?;
        print!("\n{}", cmp.table());
        let path = out.join("comparison.json");
        std::fs::write(&path, serde_json::to_string_pretty(&cmp)?)?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn compare_files(files: &[PathBuf], json: Option<&Path>) -> Result<ExitCode> {
    let mut sets = Vec::new();
    for f in files {
        // a single file holding several variants is compared variant by variant
        let label = if files.len() == 1 {
            String::new()
        } else {
            f.file_stem()
                .map_or_else(|| f.display().to_string(), |s| s.to_string_lossy().into_owned())
        };
        sets.push((label, load_metrics(f)?));
    }
    let cmp = compare(&sets)?;
    print!("{}", cmp.table());
    if let Some(path) = json {
        std::fs::write(path, serde_json::to_string_pretty(&cmp)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn identify(logs: &[PathBuf], params: Option<&Path>, output: &Path, decimate: usize) -> Result<ExitCode> {
    let (vehicle, prior) = match params {
        Some(p) => load_parameters(p)?,
        None => (defaults::vehicle_params(), defaults::analytical_coeffs()),
    };
    let mut log: Option<FlightLog> = None;
    for path in logs {
        let part = FlightLog::from_csv(path)?.decimate(decimate)?;
        log = Some(match log {
            None => part,
            Some(l) => l
                .concat(&part)
                .with_context(|| format!("appending {}", path.display()))?,
        });
    }
    let log = log.expect("at least one log");
    let (fit, report) = regress_coeffs(&log, &vehicle, &prior)?;

    println!("samples: {}", report.samples);
    println!(
        "drag axis: R^2 {:.4}, condition {:.1}",
        report.drag.r2, report.drag.condition
    );
    println!(
        "lift axis: R^2 {:.4}, condition {:.1}",
        report.lift.r2, report.lift.condition
    );
    for (name, value) in [
        ("c_dv", fit.c_dv),
        ("c_lv", fit.c_lv),
        ("c_dt", fit.c_dt),
        ("c_lt", fit.c_lt),
        ("c_dlv", fit.c_dlv),
        ("c_dlt", fit.c_dlt),
        ("c_mu_t", fit.c_mu_t),
    ] {
        println!("  {name:<7} {value:>10.5}");
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    std::fs::write(output, ParameterFile::from_model(&vehicle, &fit).to_toml())
        .with_context(|| format!("writing {}", output.display()))?;
    println!("wrote {}", output.display());
    Ok(ExitCode::SUCCESS)
}

fn feasibility(path: &Path, dt: f64) -> Result<ExitCode> {
    if !(dt > 0.0) {
        bail!("--dt must be positive");
    }
    let cfg = load_scenario(path)?;
    let (params, coeffs) = match &cfg.params {
        Some(p) => load_parameters(p)?,
        None => (defaults::vehicle_params(), defaults::experimental_coeffs()),
    };
    let reference = cfg.trajectory.build()?;
    let report = feasibility_check(reference.as_ref(), &params, &coeffs, dt);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if report.feasible {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FLIGHT_FAILURE)
    })
}

fn analytical(geometry: Option<&Path>, pitch_coeff: Option<f64>, output: Option<&Path>) -> Result<ExitCode> {
    let pitch_coeff = pitch_coeff.unwrap_or(defaults::analytical_coeffs().c_mu_t);
    let g: WingGeometry = match geometry {
        Some(p) => load_toml(p)?,
        None => WingGeometry::default(),
    };
    let c = analytical_coeffs(&g, pitch_coeff)?;
    println!("lift slope {:.3} 1/rad", g.lift_slope());
    println!(
        "c_lv  {:.4} kg/m\nc_lt  {:.3}\nc_dlv {:.4} kg/m\nc_dlt {:.3}",
        c.c_lv, c.c_lt, c.c_dlv, c.c_dlt
    );
    if let Some(path) = output {
        std::fs::write(
            path,
            ParameterFile::from_model(&defaults::vehicle_params(), &c).to_toml(),
        )?;
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}
