//! The four subcommands. `simulate` writes the trajectory CSV, `fit` turns
//! it into posterior samples, `evaluate` turns those into metrics and figure
//! data, and `reproduce` drives whole benchmark tables/figures cell by cell.
//!
//! Each later stage transparently runs the earlier ones when their outputs
//! are missing, so `evaluate` on a fresh directory performs the whole
//! pipeline. All outputs are deterministic functions of the configuration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use driftlearn_core::estimator::FitOptions;
use driftlearn_core::eval::{
    benchmark_drift_grid, drift_eval_grid, figure_data, kolmogorov_metric, mse_grid,
    stationary_axis_padded, true_stationary_density, stationary_density_from_drift_1d,
    DensityGrid,
};
use driftlearn_core::gibbs::{
    near_zero_fraction, summarize_posterior, ChainState, LocalScales, PosteriorSamples,
    PosteriorSummary,
};
use driftlearn_core::randdist::RngStream;
use driftlearn_core::rkhs::MatrixKernel;
use driftlearn_core::sde::{euler_maruyama_simulate_discarding, ModelSpec, Trajectory};

use crate::config::{fnv1a, preset_json, PriorConfig, RunConfig};
use crate::io::{
    load_manifest, read_samples, read_trajectory, sigma_rows, write_figures, write_json,
    write_samples, write_trajectory, MetricsSummary, ResultManifest,
};
use crate::{CliError, CliResult};

fn out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(&cfg.output_dir)
}

fn trajectory_path(cfg: &RunConfig) -> PathBuf {
    out_dir(cfg).join("trajectory.csv")
}

fn samples_path(cfg: &RunConfig, chain: usize) -> PathBuf {
    if chain == 0 {
        out_dir(cfg).join("samples.csv")
    } else {
        out_dir(cfg).join(format!("samples_{}.csv", chain + 1))
    }
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

/// Simulates the configured path with the simulation seed (stream 0).
pub fn simulate_path(cfg: &RunConfig, model: &ModelSpec) -> CliResult<Trajectory> {
    let x0 = cfg
        .simulation
        .x0
        .clone()
        .unwrap_or_else(|| model.default_x0().to_vec());
    let mut rng = RngStream::new(cfg.simulation.seed, 0);
    let traj = euler_maruyama_simulate_discarding(
        model,
        &x0,
        cfg.simulation.delta,
        cfg.steps(),
        cfg.simulation.discard,
        &mut rng,
    )?;
    Ok(traj)
}

/// Returns the trajectory for this run, reading `trajectory.csv` when it
/// exists and simulating (and writing it) otherwise.
fn ensure_trajectory(cfg: &RunConfig, model: &ModelSpec) -> CliResult<Trajectory> {
    let path = trajectory_path(cfg);
    if path.exists() {
        let traj = read_trajectory(&path)?;
        if traj.dim() != model.dim() {
            return Err(CliError::Config(format!(
                "{} holds a {}-dimensional path but the model is {}-dimensional",
                path.display(),
                traj.dim(),
                model.dim()
            )));
        }
        return Ok(traj);
    }
    let traj = simulate_path(cfg, model)?;
    write_trajectory(&path, &traj)?;
    Ok(traj)
}

/// The in-memory products of a fit: pooled retained states plus their
/// summary on the drift grid.
pub struct FitProducts {
    pub samples: PosteriorSamples,
    pub summary: PosteriorSummary,
    pub grid: Vec<Vec<f64>>,
}

/// Fits the configured estimator, pooling states across `n_chains` chains
/// (chain c draws from stream c of the chain seed). The ridge baseline
/// contributes a single deterministic pseudo-state so every downstream
/// consumer sees the same shape.
pub fn fit_products(
    cfg: &RunConfig,
    model: &ModelSpec,
    kernel: &MatrixKernel,
    traj: &Trajectory,
) -> CliResult<FitProducts> {
    let estimator = cfg.build_estimator()?;
    let opts = FitOptions {
        iterations: cfg.chain.iterations,
        burn_in: cfg.chain.burn_in,
        thin: cfg.chain.thin,
        summary_grid: Vec::new(),
    };
    let mut pooled: Vec<ChainState> = Vec::new();
    for c in 0..cfg.chain.n_chains {
        let mut rng = RngStream::new(cfg.chain.seed, c as u64);
        let outcome = estimator.fit(traj, kernel, model, &opts, &mut rng)?;
        match outcome.samples {
            Some(samples) => pooled.extend(samples.states().iter().cloned()),
            None => {
                pooled.push(ChainState {
                    beta: outcome.drift.weights().to_vec(),
                    sigma: outcome.sigma.clone(),
                    local_scales: LocalScales::Scalar(Vec::new()),
                    global_scale: None,
                    rate_hypers: None,
                });
                break; // deterministic baseline: one state carries everything
            }
        }
    }
    let samples = PosteriorSamples::from_parts(
        pooled,
        cfg.chain.burn_in,
        cfg.chain.thin,
        kernel.clone(),
        traj.states.clone(),
        model.dim(),
    )?;
    let grid = drift_eval_grid(traj, cfg.eval.drift_grid_points)?;
    let summary = summarize_posterior(&samples, &grid)?;
    Ok(FitProducts {
        samples,
        summary,
        grid,
    })
}

/// Returns fit products, reading `samples.csv` when present and fitting
/// (and writing all sample files) otherwise.
fn ensure_fit(
    cfg: &RunConfig,
    model: &ModelSpec,
    kernel: &MatrixKernel,
    traj: &Trajectory,
) -> CliResult<FitProducts> {
    let first = samples_path(cfg, 0);
    if !first.exists() {
        let products = fit_products(cfg, model, kernel, traj)?;
        write_samples(
            &first,
            products.samples.states(),
            cfg.chain.burn_in,
            cfg.chain.thin,
            products.samples.num_centers(),
            products.samples.dim(),
        )?;
        return Ok(products);
    }
    let parsed = read_samples(&first)?;
    if parsed.dim != model.dim() || parsed.num_centers != traj.len() {
        return Err(CliError::Config(format!(
            "{} holds {} centers in dimension {}, expected {} centers in dimension {}",
            first.display(),
            parsed.num_centers,
            parsed.dim,
            traj.len(),
            model.dim()
        )));
    }
    let samples = PosteriorSamples::from_parts(
        parsed.states,
        cfg.chain.burn_in,
        cfg.chain.thin,
        kernel.clone(),
        traj.states.clone(),
        model.dim(),
    )?;
    let grid = drift_eval_grid(traj, cfg.eval.drift_grid_points)?;
    let summary = summarize_posterior(&samples, &grid)?;
    Ok(FitProducts {
        samples,
        summary,
        grid,
    })
}

/// Names of models with a closed-form stationary law for evaluation.
fn has_stationary_truth(model: &ModelSpec) -> bool {
    model.dim() == 1
        && matches!(model.name(), "double_well" | "double_well_variant")
}

/// Stationary densities of the true and the fitted SDE on a shared axis.
pub struct StationaryPair {
    pub truth: DensityGrid,
    pub estimate: DensityGrid,
}

/// Builds both stationary densities for a 1-D run: the model's closed form
/// and the speed-measure law of the fitted drift, driven by the estimated
/// σ̂² (or the true ς² when `use_estimated_sigma` is off).
pub fn stationary_pair(
    cfg: &RunConfig,
    model: &ModelSpec,
    traj: &Trajectory,
    summary: &PosteriorSummary,
) -> CliResult<StationaryPair> {
    let axis = stationary_axis_padded(
        traj,
        cfg.eval.stationary_points,
        cfg.eval.domain_extension,
    )?;
    let sigma_true = model.noise()[(0, 0)];
    let truth = true_stationary_density(model.name(), sigma_true, &axis)?;
    let sigma_sq_hat = if cfg.eval.use_estimated_sigma {
        summary.mean_sigma[(0, 0)]
    } else {
        sigma_true * sigma_true
    };
    let drift_hat = &summary.mean_drift;
    let estimate = stationary_density_from_drift_1d(
        |x| drift_hat.eval(&[x])[0],
        |x| {
            let s0 = model.sigma0(&[x])[(0, 0)];
            s0 * s0 * sigma_sq_hat
        },
        &axis,
    )?;
    Ok(StationaryPair { truth, estimate })
}

/// Single-run metrics document (`metrics.json`).
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub estimator: String,
    pub mse: f64,
    pub kolmogorov: Option<f64>,
    pub sigma_sq: Vec<Vec<f64>>,
    pub near_zero_fraction: f64,
    pub tail_warning_true: Option<bool>,
    pub tail_warning_estimated: Option<bool>,
}

/// Computes metrics and the figure bundle for finished fit products.
///
/// `mse_grid_override` replaces the default path-spanning grid for the MSE
/// alone; benchmark tables pass a fixed grid so their cells are comparable.
pub fn evaluate_products(
    cfg: &RunConfig,
    model: &ModelSpec,
    traj: &Trajectory,
    products: &FitProducts,
    mse_grid_override: Option<&[Vec<f64>]>,
) -> CliResult<(RunMetrics, driftlearn_core::eval::FigureData)> {
    let truth = |x: &[f64]| model.drift(x);
    let grid = mse_grid_override.unwrap_or(&products.grid);
    let mse = mse_grid(&products.summary.mean_drift, truth, grid)?;
    let (kolmogorov, tails, densities) = if has_stationary_truth(model) {
        let pair = stationary_pair(cfg, model, traj, &products.summary)?;
        let k = kolmogorov_metric(&pair.truth, &pair.estimate);
        let tails = (
            Some(pair.truth.tail_warning),
            Some(pair.estimate.tail_warning),
        );
        (Some(k), tails, Some(pair))
    } else {
        (None, (None, None), None)
    };
    let fig = figure_data(
        &products.summary,
        truth,
        densities.as_ref().map(|p| &p.truth),
        densities.as_ref().map(|p| &p.estimate),
    )?;
    let metrics = RunMetrics {
        estimator: cfg.prior.estimator_name().to_string(),
        mse,
        kolmogorov,
        sigma_sq: sigma_rows(&products.summary.mean_sigma),
        near_zero_fraction: near_zero_fraction(&products.summary.weight_magnitudes, 1e-3),
        tail_warning_true: tails.0,
        tail_warning_estimated: tails.1,
    };
    Ok((metrics, fig))
}

// ---------------------------------------------------------------------------
// Subcommand entry points
// ---------------------------------------------------------------------------

fn finish_manifest(
    cfg: &RunConfig,
    update: impl FnOnce(&mut ResultManifest),
    started: Instant,
) -> CliResult<()> {
    let path = out_dir(cfg).join("manifest.json");
    let mut manifest = match load_manifest(&path) {
        Some(m) if m.config_hash == cfg.hash() => m,
        _ => ResultManifest::new(cfg.hash()),
    };
    update(&mut manifest);
    manifest.wall_clock_seconds += started.elapsed().as_secs_f64();
    write_json(&path, &manifest)
}

pub fn run_simulate(cfg: &RunConfig) -> CliResult<()> {
    let started = Instant::now();
    let model = cfg.build_model()?;
    let traj = simulate_path(cfg, &model)?;
    let path = trajectory_path(cfg);
    write_trajectory(&path, &traj)?;
    println!(
        "simulated {} steps of `{}` (d={}) -> {}",
        traj.len(),
        model.name(),
        model.dim(),
        path.display()
    );
    finish_manifest(
        cfg,
        |m| m.trajectory_file = Some(path.display().to_string()),
        started,
    )
}

/// Summary JSON written by `fit`.
#[derive(Debug, Serialize)]
struct FitSummaryDoc {
    estimator: String,
    num_centers: usize,
    dim: usize,
    stored_states: usize,
    iterations: usize,
    burn_in: usize,
    thin: usize,
    n_chains: usize,
    sigma_sq: Vec<Vec<f64>>,
    near_zero_fraction: f64,
    weight_magnitude_max: f64,
}

pub fn run_fit(cfg: &RunConfig) -> CliResult<()> {
    let started = Instant::now();
    let model = cfg.build_model()?;
    let kernel = cfg.build_kernel(model.dim())?;
    let traj = ensure_trajectory(cfg, &model)?;
    let products = fit_products(cfg, &model, &kernel, &traj)?;

    let path = samples_path(cfg, 0);
    write_samples(
        &path,
        products.samples.states(),
        cfg.chain.burn_in,
        cfg.chain.thin,
        products.samples.num_centers(),
        products.samples.dim(),
    )?;

    let summary = FitSummaryDoc {
        estimator: cfg.prior.estimator_name().to_string(),
        num_centers: products.samples.num_centers(),
        dim: products.samples.dim(),
        stored_states: products.samples.states().len(),
        iterations: cfg.chain.iterations,
        burn_in: cfg.chain.burn_in,
        thin: cfg.chain.thin,
        n_chains: cfg.chain.n_chains,
        sigma_sq: sigma_rows(&products.summary.mean_sigma),
        near_zero_fraction: near_zero_fraction(&products.summary.weight_magnitudes, 1e-3),
        weight_magnitude_max: products
            .summary
            .weight_magnitudes
            .iter()
            .cloned()
            .fold(0.0, f64::max),
    };
    write_json(&out_dir(cfg).join("summary.json"), &summary)?;
    println!(
        "fitted `{}` on {} observations: {} retained states -> {}",
        summary.estimator,
        traj.len(),
        summary.stored_states,
        path.display()
    );
    finish_manifest(
        cfg,
        |m| m.sample_files = vec![path.display().to_string()],
        started,
    )
}

pub fn run_evaluate(cfg: &RunConfig) -> CliResult<()> {
    let started = Instant::now();
    let model = cfg.build_model()?;
    let kernel = cfg.build_kernel(model.dim())?;
    let traj = ensure_trajectory(cfg, &model)?;
    let products = ensure_fit(cfg, &model, &kernel, &traj)?;
    let (metrics, fig) = evaluate_products(cfg, &model, &traj, &products, None)?;

    let dir = out_dir(cfg);
    write_json(&dir.join("metrics.json"), &metrics)?;
    write_figures(&dir, &fig)?;
    match metrics.kolmogorov {
        Some(k) => println!(
            "evaluated `{}`: MSE {:.4}, Kolmogorov {:.4}",
            metrics.estimator, metrics.mse, k
        ),
        None => println!("evaluated `{}`: MSE {:.4}", metrics.estimator, metrics.mse),
    }
    finish_manifest(
        cfg,
        |m| {
            m.metrics = Some(MetricsSummary {
                mse: Some(metrics.mse),
                kolmogorov: metrics.kolmogorov,
                sigma_sq: metrics.sigma_sq.clone(),
            });
        },
        started,
    )
}

// ---------------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------------

/// The benchmark grid shared by all four tables, in publication column
/// order: (T, Δ).
pub const TABLE_CELLS: [(f64, f64); 6] = [
    (40.0, 0.025),
    (40.0, 0.05),
    (40.0, 0.1),
    (80.0, 0.05),
    (60.0, 0.05),
    (20.0, 0.05),
];

/// One row of a table metrics document; `table1`/`table3` read the MSE
/// columns and `table2`/`table4` the Kolmogorov columns, computed from the
/// same pair of chains.
#[derive(Debug, Clone, Serialize)]
pub struct CellMetrics {
    #[serde(rename = "T")]
    pub t: f64,
    pub delta: f64,
    pub mse_t_prior: f64,
    pub mse_hs_prior: f64,
    pub kolmogorov_t_prior: Option<f64>,
    pub kolmogorov_hs_prior: Option<f64>,
    pub sigma_sq_t_prior: f64,
    pub sigma_sq_hs_prior: f64,
}

#[derive(Debug, Serialize)]
struct TableDoc {
    target: String,
    master_seed: u64,
    cells: Vec<CellMetrics>,
}

/// Derives a per-cell seed from the master seed and a role string, so cells
/// (and the two priors within a cell) are independent yet reproducible.
fn cell_seed(master: u64, role: &str, t: f64, delta: f64, prior: &str) -> u64 {
    let descriptor = format!("{role}|T={t}|delta={delta}|prior={prior}");
    master ^ fnv1a(descriptor.as_bytes())
}

fn parse_cells_filter(filter: &str) -> CliResult<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for spec in filter.split(';') {
        let mut t = None;
        let mut delta = None;
        for part in spec.split(',') {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                CliError::Config(format!("--cells expects key=value pairs, got `{part}`"))
            })?;
            let v: f64 = value.trim().parse().map_err(|_| {
                CliError::Config(format!("--cells: `{value}` is not a number"))
            })?;
            match key.trim() {
                "T" | "t" => t = Some(v),
                "delta" | "Δ" => delta = Some(v),
                other => {
                    return Err(CliError::Config(format!(
                        "--cells: unknown key `{other}` (use T and delta)"
                    )))
                }
            }
        }
        let (t, delta) = match (t, delta) {
            (Some(t), Some(d)) => (t, d),
            _ => {
                return Err(CliError::Config(
                    "--cells: each cell needs both T and delta".to_string(),
                ))
            }
        };
        if !TABLE_CELLS.contains(&(t, delta)) {
            let known: Vec<String> = TABLE_CELLS
                .iter()
                .map(|(t, d)| format!("T={t},delta={d}"))
                .collect();
            return Err(CliError::Config(format!(
                "--cells: (T={t}, delta={delta}) is not a benchmark cell (available: {})",
                known.join("; ")
            )));
        }
        out.push((t, delta));
    }
    Ok(out)
}

fn preset_config(name: &str) -> RunConfig {
    let text = preset_json(name).expect("bundled preset");
    serde_json::from_str(text).expect("bundled preset parses")
}

/// The (t-prior, hs-prior) pair used for a table target's two rows.
fn table_priors(target: &str) -> (PriorConfig, PriorConfig) {
    let t_prior = preset_config("double_well_t").prior;
    let hs_prior = match target {
        // Model 1 tables: classical Horseshoe.
        "table1" | "table2" => preset_config("double_well_hs").prior,
        // Model 2 tables: the heavy-tailed variant.
        _ => preset_config("dw_variant_s1").prior,
    };
    (t_prior, hs_prior)
}

fn base_config_for(target: &str) -> RunConfig {
    match target {
        "table1" | "table2" | "fig1" => preset_config("double_well_t"),
        "table3" | "table4" | "fig2" => preset_config("dw_variant_s1"),
        "fig3" => preset_config("dw_variant_s05"),
        "fig4" => preset_config("michaelis_menten"),
        _ => unreachable!("caller checked the target"),
    }
}

/// Runs one (cell, prior) chain and evaluates it, entirely in memory. The
/// MSE is computed on the model's fixed benchmark grid so it is comparable
/// across cells.
pub fn run_cell_prior(
    base: &RunConfig,
    t: f64,
    delta: f64,
    prior: &PriorConfig,
    master_seed: u64,
) -> CliResult<RunMetrics> {
    let mut cfg = base.clone();
    cfg.simulation.delta = delta;
    cfg.simulation.t_end = Some(t);
    cfg.simulation.steps = None;
    cfg.simulation.seed = cell_seed(master_seed, "data", t, delta, "shared");
    cfg.prior = prior.clone();
    cfg.chain.seed = cell_seed(master_seed, "chain", t, delta, prior.estimator_name());

    let model = cfg.build_model()?;
    let kernel = cfg.build_kernel(model.dim())?;
    let traj = simulate_path(&cfg, &model)?;
    let products = fit_products(&cfg, &model, &kernel, &traj)?;
    let bench = benchmark_drift_grid(
        model.name(),
        model.noise()[(0, 0)],
        cfg.eval.drift_grid_points,
    )?;
    let (metrics, _fig) = evaluate_products(&cfg, &model, &traj, &products, Some(&bench))?;
    Ok(metrics)
}

fn run_table(
    target: &str,
    base: &RunConfig,
    cells: &[(f64, f64)],
    master_seed: u64,
    jobs: usize,
    out: &Path,
) -> CliResult<()> {
    let started = Instant::now();
    let (t_prior, hs_prior) = table_priors(target);

    // One work item per (cell, prior); results are reassembled in cell order
    // so the output is independent of scheduling.
    let mut tasks: Vec<(usize, &PriorConfig)> = Vec::new();
    for idx in 0..cells.len() {
        tasks.push((idx, &t_prior));
        tasks.push((idx, &hs_prior));
    }
    let results: Vec<CliResult<(usize, &'static str, RunMetrics)>> =
        run_parallel(jobs, &tasks, |&(idx, prior)| {
            let (t, delta) = cells[idx];
            let metrics = run_cell_prior(base, t, delta, prior, master_seed)?;
            Ok((idx, prior.estimator_name(), metrics))
        });

    let mut per_cell: Vec<(Option<RunMetrics>, Option<RunMetrics>)> =
        (0..cells.len()).map(|_| (None, None)).collect();
    for r in results {
        let (idx, name, metrics) = r?;
        match name {
            "t" => per_cell[idx].0 = Some(metrics),
            _ => per_cell[idx].1 = Some(metrics),
        }
    }

    let mut rows = Vec::with_capacity(cells.len());
    for (idx, (t_m, hs_m)) in per_cell.into_iter().enumerate() {
        let (t, delta) = cells[idx];
        let t_m = t_m.expect("every cell ran the t prior");
        let hs_m = hs_m.expect("every cell ran the hs prior");
        rows.push(CellMetrics {
            t,
            delta,
            mse_t_prior: t_m.mse,
            mse_hs_prior: hs_m.mse,
            kolmogorov_t_prior: t_m.kolmogorov,
            kolmogorov_hs_prior: hs_m.kolmogorov,
            sigma_sq_t_prior: t_m.sigma_sq[0][0],
            sigma_sq_hs_prior: hs_m.sigma_sq[0][0],
        });
    }

    let doc = TableDoc {
        target: target.to_string(),
        master_seed,
        cells: rows,
    };
    let metrics_path = out.join("metrics.json");
    write_json(&metrics_path, &doc)?;

    let mut manifest = ResultManifest::new(base.hash());
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    write_json(&out.join("manifest.json"), &manifest)?;
    println!(
        "{target}: {} cell(s) -> {}",
        doc.cells.len(),
        metrics_path.display()
    );
    Ok(())
}

fn run_figure(
    target: &str,
    base: &RunConfig,
    master_seed: u64,
    jobs: usize,
    out: &Path,
) -> CliResult<()> {
    // Figures compare both priors on the same data, except the 3-D kinetics
    // figure, which uses the preset's own prior.
    let priors: Vec<PriorConfig> = if target == "fig4" {
        vec![base.prior.clone()]
    } else {
        let (t_prior, hs_prior) = table_priors(match target {
            "fig1" => "table1",
            _ => "table3",
        });
        vec![t_prior, hs_prior]
    };
    let t = base
        .simulation
        .t_end
        .unwrap_or(base.steps() as f64 * base.simulation.delta);
    let delta = base.simulation.delta;

    let tasks: Vec<PriorConfig> = priors;
    let results = run_parallel(jobs, &tasks, |prior| {
        let mut cfg = base.clone();
        cfg.simulation.seed = cell_seed(master_seed, "data", t, delta, "shared");
        cfg.prior = prior.clone();
        cfg.chain.seed = cell_seed(master_seed, "chain", t, delta, prior.estimator_name());
        cfg.output_dir = out
            .join(prior.estimator_name())
            .to_string_lossy()
            .into_owned();
        run_simulate(&cfg)?;
        run_fit(&cfg)?;
        run_evaluate(&cfg)?;
        Ok(prior.estimator_name())
    });
    for r in results {
        let name = r?;
        println!("{target}: wrote figure data for `{name}` prior");
    }
    Ok(())
}

/// Runs `work` over `tasks` on up to `jobs` threads, preserving order.
fn run_parallel<'t, T: Sync, R: Send>(
    jobs: usize,
    tasks: &'t [T],
    work: impl Fn(&'t T) -> CliResult<R> + Sync,
) -> Vec<CliResult<R>> {
    let jobs = jobs.max(1).min(tasks.len().max(1));
    if jobs <= 1 {
        return tasks.iter().map(work).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: std::sync::Mutex<Vec<Option<CliResult<R>>>> =
        std::sync::Mutex::new((0..tasks.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let result = work(&tasks[i]);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|s| s.expect("task ran"))
        .collect()
}

/// Targets accepted by [`run_reproduce`].
pub const REPRODUCE_TARGETS: [&str; 8] = [
    "table1", "table2", "table3", "table4", "fig1", "fig2", "fig3", "fig4",
];

/// Entry point for `reproduce`. `base_config` overrides the target's preset
/// base (model/simulation/chain/eval); the prior pair for tables is always
/// the target's own.
pub fn run_reproduce(
    target: &str,
    base_config: Option<RunConfig>,
    cells_filter: Option<&str>,
    master_seed: Option<u64>,
    jobs: usize,
    out: Option<&Path>,
) -> CliResult<()> {
    if !REPRODUCE_TARGETS.contains(&target) {
        return Err(CliError::Config(format!(
            "unknown reproduce target `{target}` (available: {})",
            REPRODUCE_TARGETS.join(", ")
        )));
    }
    let base = base_config.unwrap_or_else(|| base_config_for(target));
    let master_seed = master_seed.unwrap_or(base.simulation.seed);
    let out = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("out").join(target));

    if target.starts_with("table") {
        let cells: Vec<(f64, f64)> = match cells_filter {
            Some(f) => parse_cells_filter(f)?,
            None => TABLE_CELLS.to_vec(),
        };
        run_table(target, &base, &cells, master_seed, jobs, &out)
    } else {
        run_figure(target, &base, master_seed, jobs, &out)
    }
}
