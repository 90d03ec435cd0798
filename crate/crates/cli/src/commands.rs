//! Subcommand implementations. Every command is idempotent: identical
//! config and seed reproduce byte-identical CSV/JSON outputs.

use crate::config::{self, ExperimentConfig};
use crate::error::CliError;
use crate::svg::{self, Series};
use qedlab_core::analysis::{
    self, moment_report, InstantonKind, MomentReport,
};
use qedlab_core::calibrate::{self, FitParams, ParamBounds};
use qedlab_core::models::ModelSpec;
use qedlab_core::potential::{CriticalKind, QuarticPotential};
use qedlab_core::simulate::{quasi_stationary_histogram, simulate, simulate_outcomes, SimConfig};
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Runtime(format!("serializing {}: {e}", path.display())))?;
    w.write_all(b"\n")?;
    Ok(())
}

fn require_model(cfg: &ExperimentConfig) -> Result<ModelSpec, CliError> {
    let value = cfg
        .model
        .as_ref()
        .ok_or_else(|| CliError::Config("config needs a \"model\" section".into()))?;
    config::parse_model(value)
}

fn require_sim(cfg: &ExperimentConfig, seed: Option<u64>) -> Result<SimConfig, CliError> {
    let sim = cfg
        .sim
        .ok_or_else(|| CliError::Config("config needs a \"sim\" section".into()))?
        .to_sim_config(seed);
    sim.validate()?;
    Ok(sim)
}

// ---------------------------------------------------------------- potential

#[derive(Serialize)]
struct CriticalPointReport {
    location: f64,
    kind: CriticalKind,
    potential_value: f64,
    in_price_domain: bool,
}

#[derive(Serialize)]
struct PotentialReport {
    potential: QuarticPotential,
    shape_label: qedlab_core::potential::ShapeLabel,
    barrier_height: Option<f64>,
    critical_points: Vec<CriticalPointReport>,
}

pub fn cmd_potential(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let model = require_model(cfg)?;
    let p = config::model_potential(&model)?;
    let section = cfg.potential.unwrap_or_default();
    if !(section.tol > 0.0) {
        return Err(CliError::Config("potential.tol must be positive".into()));
    }
    let report = p.classify(section.tol);

    let json = PotentialReport {
        potential: p,
        shape_label: report.shape_label,
        barrier_height: report.barrier_height,
        critical_points: report
            .critical_points
            .iter()
            .map(|c| CriticalPointReport {
                location: c.location,
                kind: c.kind,
                potential_value: c.potential_value,
                in_price_domain: c.in_price_domain(),
            })
            .collect(),
    };
    write_json(&out_dir.join("potential_report.json"), &json)?;

    if cfg.plots {
        let (lo, hi) = plot_range(&report, section.x_min, section.x_max);
        let n = section.points.max(2);
        let curve: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (x, p.evaluate(x))
            })
            .collect();
        let markers: Vec<(f64, f64)> = report
            .critical_points
            .iter()
            .map(|c| (c.location, c.potential_value))
            .collect();
        svg::line_plot(
            &out_dir.join("potential.svg"),
            &format!("U(x), shape {:?}", report.shape_label),
            &[Series {
                name: "U(x)",
                points: &curve,
            }],
            &markers,
        )?;
    }
    println!(
        "potential: {:?}, {} critical points, barrier {:?}",
        report.shape_label,
        report.critical_points.len(),
        report.barrier_height
    );
    Ok(())
}

fn plot_range(
    report: &qedlab_core::potential::ShapeReport,
    x_min: Option<f64>,
    x_max: Option<f64>,
) -> (f64, f64) {
    let locs: Vec<f64> = report.critical_points.iter().map(|c| c.location).collect();
    let lo = locs.iter().copied().fold(0.0f64, f64::min);
    let hi = locs.iter().copied().fold(0.0f64, f64::max);
    let pad = 0.6 * (hi - lo).max(1.0);
    (x_min.unwrap_or(lo - pad), x_max.unwrap_or(hi + pad))
}

// ----------------------------------------------------------------- simulate

#[derive(Serialize)]
struct SimulateSummary {
    sim: SimConfig,
    n_steps: usize,
    n_absorbed: usize,
    default_probability: f64,
    default_probability_std_error: f64,
    terminal_mean: f64,
    terminal_variance: f64,
    growth: Option<analysis::GrowthFit>,
    moments: Option<MomentReport>,
    histogram: Option<HistogramSummary>,
}

#[derive(Serialize)]
struct HistogramSummary {
    window: [f64; 2],
    mode_center: f64,
    edges: Vec<f64>,
    density: Vec<f64>,
}

pub fn cmd_simulate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let model = require_model(cfg)?;
    let sim = require_sim(cfg, seed)?;
    let ensemble = simulate(&model, &sim)?;

    {
        let mut csv = BufWriter::new(File::create(out_dir.join("ensemble.csv"))?);
        ensemble.to_csv(&mut csv)?;
    }
    {
        let mut bin = BufWriter::new(File::create(out_dir.join("ensemble.qede"))?);
        ensemble.to_binary(&mut bin)?;
    }

    let report = moment_report(&ensemble);
    let means_for_plot = report.means.clone();
    let n_absorbed = ensemble.n_absorbed();
    let p_default = n_absorbed as f64 / ensemble.n_paths() as f64;
    let terminal_mean = *report.means.last().unwrap();
    let terminal_variance = *report.variances.last().unwrap();

    let histogram = match cfg.analysis.histogram {
        Some(h) => {
            let hist =
                quasi_stationary_histogram(&ensemble, (h.window[0], h.window[1]), h.bins)?;
            Some(HistogramSummary {
                window: h.window,
                mode_center: hist.mode_center(),
                edges: hist.edges,
                density: hist.density,
            })
        }
        None => None,
    };

    let summary = SimulateSummary {
        sim,
        n_steps: sim.n_steps(),
        n_absorbed,
        default_probability: p_default,
        default_probability_std_error: (p_default * (1.0 - p_default)
            / ensemble.n_paths() as f64)
            .sqrt(),
        terminal_mean,
        terminal_variance,
        growth: report.growth,
        moments: cfg.analysis.moments.then_some(report),
        histogram,
    };
    write_json(&out_dir.join("summary.json"), &summary)?;

    if cfg.plots {
        let times = ensemble.times();
        let mean_series: Vec<(f64, f64)> = times
            .iter()
            .zip(&means_for_plot)
            .map(|(&t, &m)| (t, m))
            .collect();
        let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for i in 0..ensemble.n_paths().min(4) {
            series.push((
                format!("path {i}"),
                times
                    .iter()
                    .zip(ensemble.path(i))
                    .map(|(&t, &v)| (t, v))
                    .collect(),
            ));
        }
        if !mean_series.is_empty() {
            series.push(("mean".into(), mean_series));
        }
        let refs: Vec<Series> = series
            .iter()
            .map(|(n, p)| Series {
                name: n,
                points: p,
            })
            .collect();
        svg::line_plot(&out_dir.join("ensemble.svg"), "simulated paths", &refs, &[])?;
    }

    println!(
        "simulate: {} paths x {} steps, {} absorbed, terminal mean {:.6}",
        ensemble.n_paths(),
        sim.n_steps(),
        n_absorbed,
        terminal_mean
    );
    Ok(())
}

// ------------------------------------------------------------- default-prob

#[derive(Serialize)]
struct DefaultProbTable {
    sigmas: Vec<f64>,
    horizons: Vec<f64>,
    n_paths: usize,
    /// `probability[i][j]` for `sigmas[i]`, `horizons[j]`.
    probability: Vec<Vec<f64>>,
    std_error: Vec<Vec<f64>>,
}

pub fn cmd_default_prob(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let model = require_model(cfg)?;
    let sim = require_sim(cfg, seed)?;
    let section = cfg
        .default_prob
        .as_ref()
        .ok_or_else(|| CliError::Config("config needs a \"default_prob\" section".into()))?;
    if section.sigmas.is_empty() || section.horizons.is_empty() {
        return Err(CliError::Config(
            "default_prob grids must be non-empty".into(),
        ));
    }

    let mut probability = Vec::new();
    let mut std_error = Vec::new();
    for &sigma in &section.sigmas {
        if sigma < 0.0 {
            return Err(CliError::Config(format!("negative sigma {sigma}")));
        }
        let m = config::with_sigma(&model, sigma);
        let mut p_row = Vec::new();
        let mut se_row = Vec::new();
        for &horizon in &section.horizons {
            let cell_cfg = SimConfig { horizon, ..sim };
            let dp = analysis::default_probability_mc(&m, &cell_cfg)?;
            p_row.push(dp.probability);
            se_row.push(dp.std_error);
        }
        probability.push(p_row);
        std_error.push(se_row);
    }

    let table = DefaultProbTable {
        sigmas: section.sigmas.clone(),
        horizons: section.horizons.clone(),
        n_paths: sim.n_paths,
        probability,
        std_error,
    };
    write_json(&out_dir.join("default_prob.json"), &table)?;

    let mut csv = BufWriter::new(File::create(out_dir.join("default_prob.csv"))?);
    write!(csv, "sigma")?;
    for h in &table.horizons {
        write!(csv, ",{h}")?;
    }
    writeln!(csv)?;
    for (i, s) in table.sigmas.iter().enumerate() {
        write!(csv, "{s}")?;
        for p in &table.probability[i] {
            write!(csv, ",{p}")?;
        }
        writeln!(csv)?;
    }
    drop(csv);

    println!(
        "default-prob: {} x {} grid written ({} paths per cell)",
        table.sigmas.len(),
        table.horizons.len(),
        sim.n_paths
    );
    Ok(())
}

// ---------------------------------------------------------------- instanton

pub fn cmd_instanton(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let model = require_model(cfg)?;
    let p = config::model_potential(&model)?;
    let section = cfg
        .instanton
        .ok_or_else(|| CliError::Config("config needs an \"instanton\" section".into()))?;
    let path = analysis::instanton_trajectory(&p, section.kind, section.t_span, section.ode_tol)?;

    let name = match section.kind {
        InstantonKind::Instanton => "instanton",
        InstantonKind::AntiInstanton => "anti_instanton",
        InstantonKind::Bounce => "bounce",
    };
    let csv_path = out_dir.join(format!("{name}.csv"));
    let mut csv = BufWriter::new(File::create(&csv_path)?);
    writeln!(csv, "t,x")?;
    for (t, x) in path.times.iter().zip(&path.values) {
        writeln!(csv, "{t},{x}")?;
    }
    drop(csv);

    if cfg.plots {
        let pts: Vec<(f64, f64)> = path
            .times
            .iter()
            .zip(&path.values)
            .map(|(&t, &x)| (t, x))
            .collect();
        svg::line_plot(
            &out_dir.join(format!("{name}.svg")),
            name,
            &[Series {
                name,
                points: &pts,
            }],
            &[],
        )?;
    }
    println!(
        "instanton: {name} with {} samples from {:.6} to {:.6}",
        path.values.len(),
        path.values.first().unwrap(),
        path.values.last().unwrap()
    );
    Ok(())
}

// ---------------------------------------------------------------- calibrate

#[derive(Serialize)]
struct CalibrationReport {
    input: PathBuf,
    n_observations: usize,
    dt: f64,
    params: FitParams,
    loglik: f64,
    converged: bool,
    iterations: usize,
    stderr_estimates: Option<FitParams>,
}

pub fn cmd_calibrate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    input_override: Option<PathBuf>,
) -> Result<(), CliError> {
    let section = cfg
        .calibrate
        .as_ref()
        .ok_or_else(|| CliError::Config("config needs a \"calibrate\" section".into()))?;
    let input = input_override
        .or_else(|| section.input.clone())
        .ok_or_else(|| CliError::Config("no input CSV given (config calibrate.input or --input)".into()))?;

    let (times, mut values) = read_path_csv(&input)?;
    let dt = match section.dt {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => return Err(CliError::Config(format!("calibrate.dt must be positive, got {dt}"))),
        None => infer_dt(&times)?,
    };
    // Absorbed tail carries no density information; strip it.
    while values.last().is_some_and(|&v| v <= 0.0) {
        values.pop();
    }

    let bounds = section
        .bounds
        .map(|b| b.to_bounds())
        .unwrap_or_else(ParamBounds::default);
    let result = calibrate::fit(&values, dt, &section.init.to_params(), &bounds, section.opt_tol)?;

    let report = CalibrationReport {
        input,
        n_observations: values.len(),
        dt,
        params: result.params,
        loglik: result.loglik,
        converged: result.converged,
        iterations: result.iterations,
        stderr_estimates: result.stderr_estimates,
    };
    write_json(&out_dir.join("calibration.json"), &report)?;
    println!(
        "calibrate: θ={:.4} κ={:.4} g={:.4} σ={:.4} (loglik {:.2}, converged {})",
        report.params.theta,
        report.params.kappa,
        report.params.g,
        report.params.sigma,
        report.loglik,
        report.converged
    );
    Ok(())
}

fn read_path_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        let mut fields = line.split(',');
        let (t, x) = (fields.next(), fields.next());
        if fields.next().is_some() {
            return Err(CliError::Config(format!(
                "{}:{}: expected two columns t,x",
                path.display(),
                lineno + 1
            )));
        }
        let parse = |s: Option<&str>| -> Result<f64, CliError> {
            s.and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: malformed number",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        times.push(parse(t)?);
        values.push(parse(x)?);
    }
    if values.len() < 2 {
        return Err(CliError::Config(format!(
            "{}: need at least two observations",
            path.display()
        )));
    }
    Ok((times, values))
}

fn infer_dt(times: &[f64]) -> Result<f64, CliError> {
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(CliError::Config(format!(
            "times must be strictly increasing, got step {dt}"
        )));
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.max(1e-12) {
            return Err(CliError::Config(format!(
                "observations are not equally spaced: {} vs {}",
                w[1] - w[0],
                dt
            )));
        }
    }
    Ok(dt)
}
