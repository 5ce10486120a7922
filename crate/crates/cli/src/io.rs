//! File formats: the trajectory CSV interchange format, samples CSV,
//! figure CSVs, and JSON summaries/manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! file re-parses to the exact bits that produced it and repeated runs are
//! byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use driftlearn_core::eval::FigureData;
use driftlearn_core::gibbs::{ChainState, LocalScales};
use driftlearn_core::linalg;
use driftlearn_core::sde::Trajectory;
use driftlearn_core::Mat;

use crate::{CliError, CliResult};

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

/// Writes the interchange trajectory format:
///
/// ```text
/// # x0=0.5
/// # delta=0.05
/// t,x1
/// 0.05,0.4931…
/// ```
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> CliResult<()> {
    let d = traj.dim();
    let mut out = String::new();
    let x0: Vec<String> = traj.x0.iter().map(|&v| fmt_f64(v)).collect();
    let _ = writeln!(out, "# x0={}", x0.join(","));
    let _ = writeln!(out, "# delta={}", fmt_f64(traj.delta));
    let header: Vec<String> = (1..=d).map(|c| format!("x{c}")).collect();
    let _ = writeln!(out, "t,{}", header.join(","));
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let row: Vec<String> = state.iter().map(|&v| fmt_f64(v)).collect();
        let _ = writeln!(out, "{},{}", fmt_f64(*t), row.join(","));
    }
    write_file(path, &out)
}

fn parse_f64(field: &str, path: &Path) -> CliResult<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        CliError::Io(format!(
            "{}: `{field}` is not a number",
            path.display()
        ))
    })
}

/// Parses a trajectory CSV written by [`write_trajectory`].
pub fn read_trajectory(path: &Path) -> CliResult<Trajectory> {
    let text = read_file(path)?;
    let mut x0: Option<Vec<f64>> = None;
    let mut delta: Option<f64> = None;
    let mut header_seen = false;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(v) = meta.strip_prefix("x0=") {
                x0 = Some(
                    v.split(',')
                        .map(|f| parse_f64(f, path))
                        .collect::<CliResult<_>>()?,
                );
            } else if let Some(v) = meta.strip_prefix("delta=") {
                delta = Some(parse_f64(v, path)?);
            }
            continue;
        }
        if !header_seen {
            if !line.starts_with("t,") {
                return Err(CliError::Io(format!(
                    "{}: expected header `t,x1,…`, got `{line}`",
                    path.display()
                )));
            }
            header_seen = true;
            continue;
        }
        let mut fields = line.split(',');
        let t = parse_f64(fields.next().unwrap_or(""), path)?;
        let state: Vec<f64> = fields
            .map(|f| parse_f64(f, path))
            .collect::<CliResult<_>>()?;
        times.push(t);
        states.push(state);
    }
    let x0 = x0.ok_or_else(|| {
        CliError::Io(format!("{}: missing `# x0=` metadata line", path.display()))
    })?;
    let delta = delta.ok_or_else(|| {
        CliError::Io(format!(
            "{}: missing `# delta=` metadata line",
            path.display()
        ))
    })?;
    Trajectory::new(x0, delta, times, states).map_err(|e| {
        CliError::Io(format!("{}: {e}", path.display()))
    })
}

// ---------------------------------------------------------------------------
// Samples CSV
// ---------------------------------------------------------------------------

/// Writes retained chain states: one row per state with the global sweep
/// index, the m·d weights, the d² entries of ςςᵀ (row-major), and — for the
/// Horseshoe — the global scale τ.
pub fn write_samples(
    path: &Path,
    states: &[ChainState],
    burn_in: usize,
    thin: usize,
    num_centers: usize,
    dim: usize,
) -> CliResult<()> {
    let with_tau = states.iter().any(|s| s.global_scale.is_some());
    let mut out = String::new();
    out.push_str("iter");
    for i in 0..num_centers {
        for c in 0..dim {
            let _ = write!(out, ",beta_{i}_{c}");
        }
    }
    for r in 0..dim {
        for c in 0..dim {
            let _ = write!(out, ",sigma_{r}_{c}");
        }
    }
    if with_tau {
        out.push_str(",tau");
    }
    out.push('\n');
    for (k, state) in states.iter().enumerate() {
        let iter = burn_in + 1 + k * thin;
        let _ = write!(out, "{iter}");
        for v in &state.beta {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        for r in 0..dim {
            for c in 0..dim {
                let _ = write!(out, ",{}", fmt_f64(state.sigma[(r, c)]));
            }
        }
        if with_tau {
            let _ = write!(out, ",{}", fmt_f64(state.global_scale.unwrap_or(f64::NAN)));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// States parsed back out of a samples CSV, with the layout inferred from
/// the header.
pub struct ParsedSamples {
    pub states: Vec<ChainState>,
    pub num_centers: usize,
    pub dim: usize,
}

/// Parses a samples CSV written by [`write_samples`].
pub fn read_samples(path: &Path) -> CliResult<ParsedSamples> {
    let text = read_file(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| {
        CliError::Io(format!("{}: empty samples file", path.display()))
    })?;
    let columns: Vec<&str> = header.split(',').collect();
    let beta_cols = columns.iter().filter(|c| c.starts_with("beta_")).count();
    let sigma_cols = columns.iter().filter(|c| c.starts_with("sigma_")).count();
    let with_tau = columns.last() == Some(&"tau");
    let dim = (sigma_cols as f64).sqrt().round() as usize;
    if columns.first() != Some(&"iter") || dim * dim != sigma_cols || beta_cols == 0 {
        return Err(CliError::Io(format!(
            "{}: unrecognized samples header",
            path.display()
        )));
    }
    if beta_cols % dim != 0 {
        return Err(CliError::Io(format!(
            "{}: {beta_cols} weight columns are not divisible by dimension {dim}",
            path.display()
        )));
    }
    let num_centers = beta_cols / dim;
    let expected = 1 + beta_cols + sigma_cols + usize::from(with_tau);

    let mut states = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != expected {
            return Err(CliError::Io(format!(
                "{}: row has {} fields, expected {expected}",
                path.display(),
                fields.len()
            )));
        }
        let beta: Vec<f64> = fields[1..1 + beta_cols]
            .iter()
            .map(|f| parse_f64(f, path))
            .collect::<CliResult<_>>()?;
        let mut sigma = Mat::<f64>::zeros(dim, dim);
        for r in 0..dim {
            for c in 0..dim {
                sigma[(r, c)] = parse_f64(fields[1 + beta_cols + r * dim + c], path)?;
            }
        }
        let global_scale = if with_tau {
            Some(parse_f64(fields[expected - 1], path)?)
        } else {
            None
        };
        states.push(ChainState {
            beta,
            sigma,
            local_scales: LocalScales::Scalar(Vec::new()),
            global_scale,
            rate_hypers: None,
        });
    }
    Ok(ParsedSamples {
        states,
        num_centers,
        dim,
    })
}

// ---------------------------------------------------------------------------
// Figure CSVs
// ---------------------------------------------------------------------------

/// Writes the four figure files into `dir`, returning the paths written.
/// `fig_stationary.csv` and `fig_pp.csv` appear only when the bundle has a
/// stationary panel.
pub fn write_figures(dir: &Path, fig: &FigureData) -> CliResult<Vec<PathBuf>> {
    let d = fig
        .drift_grid
        .first()
        .map(Vec::len)
        .unwrap_or(0);
    let mut written = Vec::new();

    let mut drift = String::new();
    let mut header = Vec::new();
    for c in 1..=d {
        header.push(format!("x{c}"));
    }
    for label in ["true", "mean", "lower", "upper"] {
        for c in 1..=d {
            header.push(format!("{label}_{c}"));
        }
    }
    drift.push_str(&header.join(","));
    drift.push('\n');
    for g in 0..fig.drift_grid.len() {
        let mut row: Vec<String> = Vec::with_capacity(5 * d);
        for block in [
            &fig.drift_grid[g],
            &fig.drift_true[g],
            &fig.drift_mean[g],
            &fig.drift_lower[g],
            &fig.drift_upper[g],
        ] {
            row.extend(block.iter().map(|&v| fmt_f64(v)));
        }
        drift.push_str(&row.join(","));
        drift.push('\n');
    }
    let drift_path = dir.join("fig_drift.csv");
    write_file(&drift_path, &drift)?;
    written.push(drift_path);

    let mut hist = String::from("bin_left,bin_right,count\n");
    for (b, count) in fig.hist_counts.iter().enumerate() {
        let _ = writeln!(
            hist,
            "{},{},{count}",
            fmt_f64(fig.hist_edges[b]),
            fmt_f64(fig.hist_edges[b + 1])
        );
    }
    let hist_path = dir.join("fig_hist.csv");
    write_file(&hist_path, &hist)?;
    written.push(hist_path);

    if let Some(st) = &fig.stationary {
        let mut stationary = String::from("x,true_pdf,est_pdf\n");
        for i in 0..st.xs.len() {
            let _ = writeln!(
                stationary,
                "{},{},{}",
                fmt_f64(st.xs[i]),
                fmt_f64(st.true_pdf[i]),
                fmt_f64(st.est_pdf[i])
            );
        }
        let st_path = dir.join("fig_stationary.csv");
        write_file(&st_path, &stationary)?;
        written.push(st_path);

        let mut pp = String::from("true_cdf,est_cdf\n");
        for (a, b) in st.pp_true.iter().zip(&st.pp_est) {
            let _ = writeln!(pp, "{},{}", fmt_f64(*a), fmt_f64(*b));
        }
        let pp_path = dir.join("fig_pp.csv");
        write_file(&pp_path, &pp)?;
        written.push(pp_path);
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, &text)
}

/// Summary metrics kept in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub mse: Option<f64>,
    pub kolmogorov: Option<f64>,
    pub sigma_sq: Vec<Vec<f64>>,
}

/// Record of what a run produced. Every listed file exists once the run
/// that wrote the manifest has returned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultManifest {
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_file: Option<String>,
    #[serde(default)]
    pub sample_files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSummary>,
    pub wall_clock_seconds: f64,
}

impl ResultManifest {
    pub fn new(config_hash: String) -> Self {
        ResultManifest {
            config_hash,
            trajectory_file: None,
            sample_files: Vec::new(),
            metrics: None,
            wall_clock_seconds: 0.0,
        }
    }
}

/// Loads an existing manifest if present and parseable, so consecutive
/// subcommands extend one record.
pub fn load_manifest(path: &Path) -> Option<ResultManifest> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Converts a ςςᵀ matrix into nested rows for JSON output.
pub fn sigma_rows(sigma: &Mat<f64>) -> Vec<Vec<f64>> {
    let d = sigma.nrows();
    (0..d)
        .map(|r| (0..d).map(|c| sigma[(r, c)]).collect())
        .collect()
}

/// Parses [`sigma_rows`] output back into a matrix.
pub fn rows_to_mat(rows: &[Vec<f64>]) -> Mat<f64> {
    linalg::mat_from_rows(rows)
}
