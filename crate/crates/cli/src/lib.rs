//! Command-line front end: argument parsing, sample files, command dispatch
//! and result emission.

pub mod args;
pub mod data;
pub mod output;

use std::path::Path;

use anyhow::{bail, Context, Result};
use log::info;
use mirror_ot_core::applications::{correlation_bound, neyman_bound};
use mirror_ot_core::estimator::{rate_diagnostic, replicate_seed, sweep_side};
use mirror_ot_core::gaussian::{
    pi_bound_closed, v_c_general, v_c_location_scale, v_u_general, VcMethod,
};
use mirror_ot_core::ot::{SimplexOptions, SinkhornOptions};
use mirror_ot_core::synthetic::{generate, Preset, SynthConfig, SynthModel};
use mirror_ot_core::{
    estimate_bound, sweep, CostSpec, EstimatorOptions, EtaGrid, GaussianLinearSpec, ObservedSample,
    QuadraticCost, Side, Solver,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use args::{Command, EstimatorArgs, GaussianArgs, InputArgs, SideArg, SolverArgs, SolverKind};
use output::{emit, Cell, Report};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MIRROR_OT_THREADS";

pub fn parse_cost(s: &str) -> Result<CostSpec> {
    Ok(match s {
        "sq-sum" => CostSpec::SqSum,
        "sq-diff" => CostSpec::SqDiff,
        "product" => CostSpec::Product,
        _ => match s.strip_prefix("quadratic:") {
            Some(body) if body.trim_start().starts_with('{') => CostSpec::Quadratic(QuadraticCost::from_json_str(body)?),
            Some(path) => CostSpec::Quadratic(
                QuadraticCost::from_json_file(path).with_context(|| format!("reading cost from {path}"))?,
            ),
            None => bail!("unknown cost `{s}`; expected sq-sum, sq-diff, product or quadratic:<json>"),
        },
    })
}

pub fn parse_grid(s: &str) -> Result<EtaGrid> {
    Ok(s.parse::<EtaGrid>()?)
}

fn parse_preset(s: &str) -> Result<Preset> {
    s.parse::<Preset>().map_err(|e| anyhow::anyhow!("{e}"))
}

fn load_sample(input: &InputArgs) -> Result<(ObservedSample, Value)> {
    match (&input.input, &input.preset) {
        (Some(path), None) => {
            let sample = data::parse_csv(path).with_context(|| format!("reading {}", path.display()))?;
            info!("read {} rows from {}", sample.len(), path.display());
            Ok((sample, json!({ "file": path.display().to_string() })))
        }
        (None, Some(name)) => {
            let preset = parse_preset(name)?;
            let sample = generate(&SynthConfig {
                model: preset.model(),
                n: input.n,
                m: input.m,
                seed: input.seed,
            })?;
            Ok((
                sample,
                json!({ "preset": preset.name(), "n": input.n, "m": input.m, "seed": input.seed }),
            ))
        }
        _ => bail!("give exactly one of --input or --preset"),
    }
}

fn solver_options(args: &SolverArgs) -> Result<(EstimatorOptions, Value)> {
    let (solver, desc) = match args.solver {
        SolverKind::Exact => (Solver::Exact(SimplexOptions::default()), json!({ "kind": "exact" })),
        SolverKind::Sinkhorn => {
            if !(args.epsilon > 0.0 && args.epsilon.is_finite()) {
                bail!("--epsilon must be positive, got {}", args.epsilon);
            }
            (
                Solver::Sinkhorn(SinkhornOptions {
                    epsilon: args.epsilon,
                    max_iters: args.max_iters,
                    tol: args.tol,
                }),
                json!({ "kind": "sinkhorn", "epsilon": args.epsilon, "max_iters": args.max_iters, "tol": args.tol }),
            )
        }
    };
    let opts = EstimatorOptions {
        solver,
        standardize_z: args.standardize_z,
    };
    Ok((opts, json!({ "solver": desc, "standardize_z": args.standardize_z })))
}

fn estimator_options(args: &EstimatorArgs) -> Result<(CostSpec, EstimatorOptions, Value)> {
    let cost = parse_cost(&args.cost)?;
    let (opts, mut desc) = solver_options(&args.solver)?;
    desc["cost"] = Value::from(args.cost.clone());
    Ok((cost, opts, desc))
}

fn gaussian_model(args: &GaussianArgs) -> Result<GaussianLinearSpec> {
    match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(GaussianLinearSpec::from_json_str(&text)?)
        }
        None => Ok(GaussianLinearSpec::scalar(args.beta0, args.beta1, args.sigma0, args.sigma1)?),
    }
}

fn sides(side: SideArg) -> &'static [Side] {
    match side {
        SideArg::Lower => &[Side::Lower],
        SideArg::Upper => &[Side::Upper],
        SideArg::Both => &[Side::Lower, Side::Upper],
    }
}

fn side_name(side: SideArg) -> &'static str {
    match side {
        SideArg::Lower => "lower",
        SideArg::Upper => "upper",
        SideArg::Both => "both",
    }
}

const BOUND_COLUMNS: [&str; 5] = ["eta", "lower", "upper", "lower_penalty", "upper_penalty"];

/// One row per η from per-side estimates; absent sides are left out.
fn bound_rows(
    sample: &ObservedSample,
    cost: &CostSpec,
    grid: &EtaGrid,
    side: SideArg,
    opts: &EstimatorOptions,
) -> Result<Vec<Vec<Cell>>> {
    let mut rows: Vec<Vec<Cell>> = grid
        .values()
        .iter()
        .map(|&eta| vec![Cell::Num(eta), Cell::Missing, Cell::Missing, Cell::Missing, Cell::Missing])
        .collect();
    if side == SideArg::Both {
        for (row, b) in rows.iter_mut().zip(sweep(sample, cost, grid, opts)?) {
            row[1] = Cell::Num(b.lower);
            row[2] = Cell::Num(b.upper);
            row[3] = Cell::Num(b.lower_penalty);
            row[4] = Cell::Num(b.upper_penalty);
        }
        return Ok(rows);
    }
    for &s in sides(side) {
        let (value_col, penalty_col) = if s == Side::Lower { (1, 3) } else { (2, 4) };
        for (row, b) in rows.iter_mut().zip(sweep_side(sample, cost, grid, s, opts)?) {
            row[value_col] = Cell::Num(b.value);
            row[penalty_col] = Cell::Num(b.penalty);
        }
    }
    Ok(rows)
}

fn bounds_report(
    command: &str,
    input: &InputArgs,
    estimator: &EstimatorArgs,
    grid: EtaGrid,
    side: SideArg,
) -> Result<Report> {
    let (sample, source) = load_sample(input)?;
    let (cost, opts, mut config) = estimator_options(estimator)?;
    config["command"] = Value::from(command);
    config["input"] = source;
    config["eta"] = json!(grid.values());
    config["side"] = Value::from(side_name(side));
    let mut report = Report::new(config, BOUND_COLUMNS.to_vec());
    report.rows = if command == "bounds" && side == SideArg::Both {
        let eta = grid.values()[0];
        let lo = estimate_bound(&sample, &cost, eta, Side::Lower, &opts)?;
        let hi = estimate_bound(&sample, &cost, eta, Side::Upper, &opts)?;
        vec![vec![
            Cell::Num(eta),
            Cell::Num(lo.value),
            Cell::Num(hi.value),
            Cell::Num(lo.penalty),
            Cell::Num(hi.penalty),
        ]]
    } else {
        bound_rows(&sample, &cost, &grid, side, &opts)?
    };
    Ok(report.prune())
}

fn oracle_report(model: &GaussianArgs, grid: EtaGrid) -> Result<Report> {
    let spec = gaussian_model(model)?;
    let config = json!({ "command": "oracle", "model": spec.to_json_value(), "eta": grid.values() });
    let v_u = v_u_general(&spec)?;
    let v_c = v_c_general(&spec)?;
    let mut report = Report::new(config, vec!["eta", "v_u", "v_c", "v_ip"]);
    for &eta in grid.values() {
        let v_ip = pi_bound_closed(&spec, &CostSpec::SqSum, Side::Lower, eta)?;
        report.rows.push(vec![Cell::Num(eta), Cell::Num(v_u), Cell::Num(v_c), Cell::Num(v_ip)]);
    }
    Ok(report)
}

struct SynthRun<'a> {
    preset: &'a str,
    sizes: &'a [usize],
    grid: EtaGrid,
    seeds: usize,
    seed: u64,
    mc_draws: usize,
    solver: &'a SolverArgs,
}

fn synth_report(run: &SynthRun) -> Result<(Report, Option<ObservedSample>)> {
    if run.sizes.is_empty() || run.sizes.contains(&0) {
        bail!("--sizes needs positive values");
    }
    if run.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let preset = parse_preset(run.preset)?;
    let model = preset.model();
    let (opts, mut config) = solver_options(run.solver)?;
    config["command"] = Value::from("synth");
    config["preset"] = Value::from(preset.name());
    config["sizes"] = json!(run.sizes);
    config["eta"] = json!(run.grid.values());
    config["seeds"] = Value::from(run.seeds);
    config["seed"] = Value::from(run.seed);
    config["cost"] = Value::from("sq-sum");
    // Location/scale models only have the conditional (η → ∞) value in
    // closed form, so their error is measured against it.
    let targets: Vec<f64> = match &model {
        SynthModel::Linear(spec) => run
            .grid
            .values()
            .iter()
            .map(|&eta| pi_bound_closed(spec, &CostSpec::SqSum, Side::Lower, eta))
            .collect::<Result<_, _>>()?,
        SynthModel::LocationScale(spec) => {
            let vc = v_c_location_scale(spec, VcMethod::Auto, run.mc_draws, run.seed)?;
            config["target_std_error"] = Value::from(vc.std_error);
            vec![vc.value; run.grid.len()]
        }
    };
    config["target"] = Value::from(if model.as_linear().is_some() { "v_ip" } else { "v_c" });
    let mut report = Report::new(
        config,
        vec!["model", "n", "eta", "target", "mean_abs_error", "std_error", "seeds"],
    );
    for &n in run.sizes {
        let values: Vec<Vec<f64>> = (0..run.seeds)
            .into_par_iter()
            .map(|rep| {
                let sample = generate(&SynthConfig {
                    model: model.clone(),
                    n,
                    m: n,
                    seed: replicate_seed(run.seed, n, rep),
                })?;
                let est = sweep_side(&sample, &CostSpec::SqSum, &run.grid, Side::Lower, &opts)?;
                Ok(est.into_iter().map(|b| b.value).collect())
            })
            .collect::<Result<_, mirror_ot_core::Error>>()?;
        for (k, &eta) in run.grid.values().iter().enumerate() {
            let errs: Vec<f64> = values.iter().map(|v| (v[k] - targets[k]).abs()).collect();
            let count = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / count;
            let se = if errs.len() > 1 {
                (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (count - 1.0) / count).sqrt()
            } else {
                0.0
            };
            report.rows.push(vec![
                Cell::Text(preset.name().into()),
                Cell::Int(n as u64),
                Cell::Num(eta),
                Cell::Num(targets[k]),
                Cell::Num(mean),
                Cell::Num(se),
                Cell::Int(run.seeds as u64),
            ]);
        }
        info!("finished n = {n}");
    }
    let first = generate(&SynthConfig {
        model,
        n: run.sizes[0],
        m: run.sizes[0],
        seed: replicate_seed(run.seed, run.sizes[0], 0),
    })?;
    Ok((report, Some(first)))
}

fn rate_report(
    model: &GaussianArgs,
    sizes: &[usize],
    eta: f64,
    seeds: usize,
    seed: u64,
    estimator: &EstimatorArgs,
) -> Result<Report> {
    let spec = gaussian_model(model)?;
    let (cost, opts, mut config) = estimator_options(estimator)?;
    config["command"] = Value::from("rate");
    config["model"] = spec.to_json_value();
    config["sizes"] = json!(sizes);
    config["eta"] = Value::from(eta);
    config["seeds"] = Value::from(seeds);
    config["seed"] = Value::from(seed);
    let rate = rate_diagnostic(&spec, &cost, eta, sizes, seeds, seed, &opts)?;
    let mut report = Report::new(config, vec!["n", "mean_abs_error", "std_error", "seeds"]);
    for r in &rate.rows {
        report.rows.push(vec![
            Cell::Int(r.n as u64),
            Cell::Num(r.mean_abs_error),
            Cell::Num(r.std_error),
            Cell::Int(r.seeds as u64),
        ]);
    }
    report.summary = Some(json!({ "eta": rate.eta, "target": rate.target, "slope": rate.slope }));
    report.table = Some(format!(
        "{}slope = {:.6}, target = {:.6}\n",
        String::from_utf8(report.render(output::Format::Table)?)?,
        rate.slope,
        rate.target
    ));
    Ok(report)
}

fn neyman_report(input: &InputArgs, solver: &SolverArgs, grid: EtaGrid) -> Result<Report> {
    let (sample, source) = load_sample(input)?;
    let (opts, mut config) = solver_options(solver)?;
    config["command"] = Value::from("neyman");
    config["input"] = source;
    config["eta"] = json!(grid.values());
    let r = neyman_bound(&sample, &grid, &opts)?;
    let mut report = Report::new(
        config,
        vec!["eta", "sq_diff_lower", "s_tau_lb", "v_estimate", "relative_sample_size"],
    );
    for row in &r.rows {
        report.rows.push(vec![
            Cell::Num(row.eta),
            Cell::Num(row.sq_diff_lower),
            Cell::Num(row.s_tau_lb),
            Cell::Num(row.v_estimate),
            Cell::Num(row.relative_sample_size),
        ]);
    }
    report.summary = Some(json!({ "n": r.n, "m": r.m, "s0_sq": r.s0_sq, "s1_sq": r.s1_sq, "tau_hat": r.tau_hat }));
    report.table = Some(r.to_table());
    Ok(report)
}

fn corr_report(input: &InputArgs, solver: &SolverArgs, grid: EtaGrid, clamp: bool) -> Result<Report> {
    let (sample, source) = load_sample(input)?;
    let (opts, mut config) = solver_options(solver)?;
    config["command"] = Value::from("corr");
    config["input"] = source;
    config["eta"] = json!(grid.values());
    config["clamp"] = Value::from(clamp);
    let r = correlation_bound(&sample, &grid, &opts, clamp)?;
    let mut report = Report::new(
        config,
        vec!["eta", "product_lower", "product_upper", "rho_lower", "rho_upper"],
    );
    for row in &r.rows {
        report.rows.push(vec![
            Cell::Num(row.eta),
            Cell::Num(row.product_lower),
            Cell::Num(row.product_upper),
            Cell::Num(row.rho_lower),
            Cell::Num(row.rho_upper),
        ]);
    }
    report.summary = Some(json!({ "mean0": r.mean0, "mean1": r.mean1, "var0": r.var0, "var1": r.var1 }));
    report.table = Some(r.to_table());
    Ok(report)
}

/// Runs one command and writes its output. Nothing is written unless the
/// whole computation succeeds.
pub fn run(command: Command) -> Result<()> {
    let (report, out, extra): (Report, args::OutputArgs, Option<(ObservedSample, std::path::PathBuf)>) = match command {
        Command::Bounds {
            input,
            estimator,
            eta,
            side,
            out,
        } => {
            let grid = EtaGrid::new(vec![eta])?;
            (bounds_report("bounds", &input, &estimator, grid, side)?, out, None)
        }
        Command::Sweep {
            input,
            estimator,
            eta,
            side,
            out,
        } => (bounds_report("sweep", &input, &estimator, parse_grid(&eta)?, side)?, out, None),
        Command::Oracle { model, eta, out } => (oracle_report(&model, parse_grid(&eta)?)?, out, None),
        Command::Synth {
            preset,
            sizes,
            eta,
            seeds,
            seed,
            mc_draws,
            sample_output,
            solver,
            out,
        } => {
            let run = SynthRun {
                preset: &preset,
                sizes: &sizes,
                grid: parse_grid(&eta)?,
                seeds,
                seed,
                mc_draws,
                solver: &solver,
            };
            let (report, sample) = synth_report(&run)?;
            let extra = sample.zip(sample_output);
            (report, out, extra)
        }
        Command::Rate {
            model,
            sizes,
            eta,
            seeds,
            seed,
            estimator,
            out,
        } => (rate_report(&model, &sizes, eta, seeds, seed, &estimator)?, out, None),
        Command::Neyman {
            input,
            solver,
            eta,
            out,
        } => (neyman_report(&input, &solver, parse_grid(&eta)?)?, out, None),
        Command::Corr {
            input,
            solver,
            eta,
            clamp,
            out,
        } => (corr_report(&input, &solver, parse_grid(&eta)?, clamp)?, out, None),
    };
    let bytes = report.render(out.format)?;
    let sample_bytes = match &extra {
        Some((sample, _)) => {
            let mut buf = Vec::new();
            data::write_csv(sample, &mut buf)?;
            Some(buf)
        }
        None => None,
    };
    emit(&bytes, out.output.as_deref())?;
    if let (Some((_, path)), Some(buf)) = (&extra, sample_bytes) {
        output::write_atomic(Path::new(path), &buf)?;
    }
    Ok(())
}

/// Sizes the global thread pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}
