//! Run configuration: JSON schema, bundled presets, `--set` overrides, and
//! validation that names the offending field.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use driftlearn_core::estimator::{
    DriftEstimator, HorseshoeEstimator, RidgeEstimator, TPriorEstimator,
};
use driftlearn_core::gibbs::{HsPriorConfig, TPriorConfig};
use driftlearn_core::linalg;
use driftlearn_core::rkhs::{MatrixKernel, ScalarKernel};
use driftlearn_core::sde::{builtin_model, ModelParams, ModelSpec, BUILTIN_MODEL_NAMES};

use crate::{CliError, CliResult};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub simulation: SimulationConfig,
    pub kernel: KernelConfig,
    pub prior: PriorConfig,
    pub chain: ChainConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default)]
    pub params: ModelParams,
}

/// Path settings. Exactly one of `steps` (m) and `t_end` (T) must pin the
/// length; when both are present they must agree via T = m·Δ.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Starting state; defaults to the model's own x₀.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub seed: u64,
    /// Equilibration steps simulated and dropped before recording starts.
    #[serde(default)]
    pub discard: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub kind: String,
    pub bandwidth: f64,
}

/// Tagged union over the three estimation strategies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorConfig {
    T {
        dof: f64,
        scale: Vec<Vec<f64>>,
        sigma_dof: f64,
        sigma_scale: Vec<Vec<f64>>,
        #[serde(default)]
        scalar_mode: bool,
        #[serde(default)]
        paper_literal_scale: bool,
    },
    Horseshoe {
        local_shape: f64,
        global_shape: f64,
        local_rate_hypers: (f64, f64),
        global_rate_hypers: (f64, f64),
        sigma_dof: f64,
        sigma_scale: Vec<Vec<f64>>,
    },
    Ridge {
        ridge: f64,
    },
}

impl PriorConfig {
    /// Registry name of the strategy this prior selects.
    pub fn estimator_name(&self) -> &'static str {
        match self {
            PriorConfig::T { .. } => "t",
            PriorConfig::Horseshoe { .. } => "horseshoe",
            PriorConfig::Ridge { .. } => "ridge",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    #[serde(default = "default_one")]
    pub thin: usize,
    #[serde(default = "default_one")]
    pub n_chains: usize,
    pub seed: u64,
}

fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Points per coordinate of the drift/MSE grid.
    pub drift_grid_points: usize,
    /// Points on the stationary-density axis.
    pub stationary_points: usize,
    /// Fractional extension of the data range per side for that axis.
    pub domain_extension: f64,
    /// Drive the estimated stationary law with the posterior-mean σ̂²
    /// rather than the true ς².
    pub use_estimated_sigma: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            drift_grid_points: 200,
            stationary_points: 2001,
            domain_extension: 0.2,
            use_estimated_sigma: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

/// Bundled configurations, resolvable by name wherever a config path is
/// accepted.
pub const PRESET_NAMES: [&str; 5] = [
    "double_well_t",
    "double_well_hs",
    "dw_variant_s1",
    "dw_variant_s05",
    "michaelis_menten",
];

/// Returns the JSON text of a bundled preset.
pub fn preset_json(name: &str) -> Option<&'static str> {
    match name {
        "double_well_t" => Some(PRESET_DOUBLE_WELL_T),
        "double_well_hs" => Some(PRESET_DOUBLE_WELL_HS),
        "dw_variant_s1" => Some(PRESET_DW_VARIANT_S1),
        "dw_variant_s05" => Some(PRESET_DW_VARIANT_S05),
        "michaelis_menten" => Some(PRESET_MICHAELIS_MENTEN),
        _ => None,
    }
}

/// Double-well, Algorithm 1: scalar-mode t hierarchy with λᵢ ~ IG(1, 2) and
/// σ² ~ IG(1, 2).
const PRESET_DOUBLE_WELL_T: &str = r#"{
  "model": { "name": "double_well", "params": { "sigma": 1.0 } },
  "simulation": { "delta": 0.05, "t_end": 40.0, "seed": 101 },
  "kernel": { "kind": "gaussian", "bandwidth": 1.0 },
  "prior": {
    "type": "t",
    "dof": 2.0,
    "scale": [[4.0]],
    "sigma_dof": 2.0,
    "sigma_scale": [[4.0]],
    "scalar_mode": true
  },
  "chain": { "iterations": 2000, "burn_in": 500, "thin": 1, "n_chains": 1, "seed": 202 },
  "eval": {
    "drift_grid_points": 200,
    "stationary_points": 2001,
    "domain_extension": 0.2,
    "use_estimated_sigma": true
  },
  "output_dir": "out/double_well_t"
}"#;

/// Double-well, Algorithm 2: classical Horseshoe (all shapes and rate-hyper
/// shapes ½, rates 1).
const PRESET_DOUBLE_WELL_HS: &str = r#"{
  "model": { "name": "double_well", "params": { "sigma": 1.0 } },
  "simulation": { "delta": 0.05, "t_end": 40.0, "seed": 101 },
  "kernel": { "kind": "gaussian", "bandwidth": 1.0 },
  "prior": {
    "type": "horseshoe",
    "local_shape": 0.5,
    "global_shape": 0.5,
    "local_rate_hypers": [0.5, 1.0],
    "global_rate_hypers": [0.5, 1.0],
    "sigma_dof": 2.0,
    "sigma_scale": [[4.0]]
  },
  "chain": { "iterations": 2000, "burn_in": 500, "thin": 1, "n_chains": 1, "seed": 202 },
  "eval": {
    "drift_grid_points": 200,
    "stationary_points": 2001,
    "domain_extension": 0.2,
    "use_estimated_sigma": true
  },
  "output_dir": "out/double_well_hs"
}"#;

/// Double-well variant (multiplicative noise), ς = 1, heavy-tailed
/// Horseshoe: scaled-F(ν₁=1, ν₂=0.3, c=1) on the local scales maps to local
/// shape ν₂/2 = 0.15 with rate hypers (½, 1).
const PRESET_DW_VARIANT_S1: &str = r#"{
  "model": { "name": "double_well_variant", "params": { "sigma": 1.0 } },
  "simulation": { "delta": 0.05, "t_end": 40.0, "seed": 101 },
  "kernel": { "kind": "gaussian", "bandwidth": 1.0 },
  "prior": {
    "type": "horseshoe",
    "local_shape": 0.15,
    "global_shape": 0.5,
    "local_rate_hypers": [0.5, 1.0],
    "global_rate_hypers": [0.5, 1.0],
    "sigma_dof": 2.0,
    "sigma_scale": [[4.0]]
  },
  "chain": { "iterations": 2000, "burn_in": 500, "thin": 1, "n_chains": 1, "seed": 202 },
  "eval": {
    "drift_grid_points": 200,
    "stationary_points": 2001,
    "domain_extension": 0.2,
    "use_estimated_sigma": true
  },
  "output_dir": "out/dw_variant_s1"
}"#;

/// Double-well variant at ς = 0.5 (distinctly bimodal stationary law); same
/// hierarchy as the ς = 1 preset. The default seed is chosen so the T = 40
/// window visits both wells — at this noise level an unlucky path can spend
/// the whole window on one side, which says nothing about the estimator.
const PRESET_DW_VARIANT_S05: &str = r#"{
  "model": { "name": "double_well_variant", "params": { "sigma": 0.5 } },
  "simulation": { "delta": 0.05, "t_end": 40.0, "seed": 3 },
  "kernel": { "kind": "gaussian", "bandwidth": 1.0 },
  "prior": {
    "type": "horseshoe",
    "local_shape": 0.15,
    "global_shape": 0.5,
    "local_rate_hypers": [0.5, 1.0],
    "global_rate_hypers": [0.5, 1.0],
    "sigma_dof": 2.0,
    "sigma_scale": [[4.0]]
  },
  "chain": { "iterations": 2000, "burn_in": 500, "thin": 1, "n_chains": 1, "seed": 202 },
  "eval": {
    "drift_grid_points": 200,
    "stationary_points": 2001,
    "domain_extension": 0.2,
    "use_estimated_sigma": true
  },
  "output_dir": "out/dw_variant_s05"
}"#;

/// Michaelis–Menten kinetics: matrix-mode t hierarchy with ν = 5, U = 8I₃,
/// and ςςᵀ ~ IW₃(4, 2I₃). The chain is shorter than the 1-D presets because
/// each sweep factors a 3000×3000 precision matrix; 500 sweeps keep a full
/// run within minutes on one core while leaving 350 retained states.
///
/// The first 500 steps (20 time units) are discarded so the recorded window
/// starts in the reaction's stationary regime: the deterministic relaxation
/// from (1, 5, 0) sweeps concentration combinations that never recur, and
/// evaluation slices through that transient would probe the estimator where
/// there is no data.
const PRESET_MICHAELIS_MENTEN: &str = r#"{
  "model": {
    "name": "michaelis_menten",
    "params": { "sigma": 0.1, "rates": [1.0, 1.0, 1.0, 0.5], "c_tot": 2.0, "x0": [1.0, 5.0, 0.0] }
  },
  "simulation": { "delta": 0.04, "t_end": 40.0, "seed": 101, "discard": 500 },
  "kernel": { "kind": "gaussian", "bandwidth": 1.0 },
  "prior": {
    "type": "t",
    "dof": 5.0,
    "scale": [[8.0, 0.0, 0.0], [0.0, 8.0, 0.0], [0.0, 0.0, 8.0]],
    "sigma_dof": 4.0,
    "sigma_scale": [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]],
    "scalar_mode": false
  },
  "chain": { "iterations": 500, "burn_in": 150, "thin": 1, "n_chains": 1, "seed": 202 },
  "eval": { "drift_grid_points": 200 },
  "output_dir": "out/michaelis_menten"
}"#;

// ---------------------------------------------------------------------------
// Loading and overrides
// ---------------------------------------------------------------------------

/// Reads the raw JSON for `source`, which is either a bundled preset name or
/// a file path.
pub fn read_config_text(source: &str) -> CliResult<String> {
    if let Some(text) = preset_json(source) {
        return Ok(text.to_string());
    }
    let path = Path::new(source);
    std::fs::read_to_string(path).map_err(|e| {
        if path.extension().is_none() && !path.exists() {
            CliError::Config(format!(
                "`{source}` is neither a bundled preset ({}) nor a readable file: {e}",
                PRESET_NAMES.join(", ")
            ))
        } else {
            CliError::io(path, e)
        }
    })
}

/// Applies one `--set key=value` override to the parsed JSON. Dotted keys
/// descend into objects (created as needed); the value is parsed as JSON
/// when possible and kept as a string otherwise.
pub fn apply_override(root: &mut serde_json::Value, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!("--set expects key=value, got `{assignment}`"))
    })?;
    if key.is_empty() {
        return Err(CliError::Config(format!(
            "--set expects a nonempty key in `{assignment}`"
        )));
    }
    let value: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        if !node.is_object() {
            return Err(CliError::Config(format!(
                "--set {key}: `{part}` is not an object"
            )));
        }
        node = node
            .as_object_mut()
            .unwrap()
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    match node.as_object_mut() {
        Some(obj) => {
            obj.insert(parts[parts.len() - 1].to_string(), value);
            Ok(())
        }
        None => Err(CliError::Config(format!(
            "--set {key}: parent of `{}` is not an object",
            parts[parts.len() - 1]
        ))),
    }
}

/// Loads, overrides, and validates a configuration. `seed` (from `--seed`)
/// replaces the simulation seed and sets the chain seed to `seed + 1`;
/// `out` (from `--out`) replaces `output_dir`.
pub fn load_config(
    source: &str,
    sets: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> CliResult<RunConfig> {
    let text = read_config_text(source)?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    for assignment in sets {
        apply_override(&mut value, assignment)?;
    }
    let mut config: RunConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    if let Some(s) = seed {
        config.simulation.seed = s;
        config.chain.seed = s.wrapping_add(1);
    }
    if let Some(dir) = out {
        config.output_dir = dir.to_string_lossy().into_owned();
    }
    let diagnostics = config.validate();
    if !diagnostics.is_empty() {
        let mut msg = format!("{source}: {} problem(s)", diagnostics.len());
        for d in &diagnostics {
            msg.push_str(&format!("\n  {d}"));
        }
        return Err(CliError::Config(msg));
    }
    Ok(config)
}

/// Reads and parses a config file or preset, returning its validation
/// diagnostics (empty iff the configuration is usable).
pub fn validate_config(source: &str) -> CliResult<Vec<Diagnostic>> {
    let text = read_config_text(source)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    match serde_json::from_value::<RunConfig>(value) {
        Ok(config) => Ok(config.validate()),
        Err(e) => Ok(vec![Diagnostic::new("<schema>", e.to_string())]),
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One validation failure, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn check_square_spd(
    rows: &[Vec<f64>],
    d: usize,
    field: &str,
    out: &mut Vec<Diagnostic>,
) {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        out.push(Diagnostic::new(
            field,
            format!("must be a {d}x{d} matrix for a {d}-dimensional model"),
        ));
        return;
    }
    for i in 0..d {
        for j in 0..d {
            if !rows[i][j].is_finite() {
                out.push(Diagnostic::new(field, "entries must be finite"));
                return;
            }
            if (rows[i][j] - rows[j][i]).abs() > 1e-12 {
                out.push(Diagnostic::new(field, "must be symmetric"));
                return;
            }
        }
        if rows[i][i] <= 0.0 {
            out.push(Diagnostic::new(field, "diagonal entries must be positive"));
            return;
        }
    }
}

impl RunConfig {
    /// Checks every invariant, returning one diagnostic per violation. An
    /// empty list means the configuration is runnable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();

        let model_dim = match self.build_model() {
            Ok(model) => Some(model.dim()),
            Err(e) => {
                let field = if BUILTIN_MODEL_NAMES.contains(&self.model.name.as_str()) {
                    "model.params"
                } else {
                    "model.name"
                };
                out.push(Diagnostic::new(field, e.to_string()));
                None
            }
        };

        let sim = &self.simulation;
        if !(sim.delta > 0.0) || !sim.delta.is_finite() {
            out.push(Diagnostic::new(
                "simulation.delta",
                format!("must be a positive real, got {}", sim.delta),
            ));
        }
        match (sim.steps, sim.t_end) {
            (None, None) => out.push(Diagnostic::new(
                "simulation.steps",
                "either steps or t_end must be given",
            )),
            (Some(0), _) => out.push(Diagnostic::new(
                "simulation.steps",
                "must be at least 1",
            )),
            (Some(m), Some(t)) if sim.delta > 0.0 => {
                let implied = m as f64 * sim.delta;
                if (implied - t).abs() > 1e-9 * t.abs().max(1.0) {
                    out.push(Diagnostic::new(
                        "simulation.t_end",
                        format!(
                            "t_end = {t} is inconsistent with steps·delta = {implied} (T = m·Δ)"
                        ),
                    ));
                }
            }
            (None, Some(t)) if !(t > 0.0) || !t.is_finite() => out.push(Diagnostic::new(
                "simulation.t_end",
                format!("must be a positive real, got {t}"),
            )),
            _ => {}
        }
        if let (Some(x0), Some(d)) = (&sim.x0, model_dim) {
            if x0.len() != d {
                out.push(Diagnostic::new(
                    "simulation.x0",
                    format!("has length {}, model dimension is {d}", x0.len()),
                ));
            }
        }

        if self.kernel.kind != "gaussian" {
            out.push(Diagnostic::new(
                "kernel.kind",
                format!("unknown kind `{}` (available: gaussian)", self.kernel.kind),
            ));
        }
        if !(self.kernel.bandwidth > 0.0) || !self.kernel.bandwidth.is_finite() {
            out.push(Diagnostic::new(
                "kernel.bandwidth",
                format!("must be a positive real, got {}", self.kernel.bandwidth),
            ));
        }

        self.validate_prior(model_dim, &mut out);

        let chain = &self.chain;
        if chain.iterations == 0 {
            out.push(Diagnostic::new("chain.iterations", "must be at least 1"));
        }
        if chain.burn_in >= chain.iterations && chain.iterations > 0 {
            out.push(Diagnostic::new(
                "chain.burn_in",
                format!(
                    "burn-in {} leaves no retained sweeps out of {}",
                    chain.burn_in, chain.iterations
                ),
            ));
        }
        if chain.thin == 0 {
            out.push(Diagnostic::new("chain.thin", "must be at least 1"));
        }
        if chain.n_chains == 0 {
            out.push(Diagnostic::new("chain.n_chains", "must be at least 1"));
        }

        if self.eval.drift_grid_points == 0 {
            out.push(Diagnostic::new("eval.drift_grid_points", "must be at least 1"));
        }
        if self.eval.stationary_points < 2 {
            out.push(Diagnostic::new(
                "eval.stationary_points",
                "must be at least 2",
            ));
        }
        if !(self.eval.domain_extension >= 0.0) || !self.eval.domain_extension.is_finite() {
            out.push(Diagnostic::new(
                "eval.domain_extension",
                format!("must be nonnegative, got {}", self.eval.domain_extension),
            ));
        }

        if self.output_dir.is_empty() {
            out.push(Diagnostic::new("output_dir", "must not be empty"));
        }

        out
    }

    fn validate_prior(&self, model_dim: Option<usize>, out: &mut Vec<Diagnostic>) {
        let d = model_dim.unwrap_or(1);
        match &self.prior {
            PriorConfig::T {
                dof,
                scale,
                sigma_dof,
                sigma_scale,
                scalar_mode,
                ..
            } => {
                if !(*dof > d as f64 - 1.0) {
                    out.push(Diagnostic::new(
                        "prior.dof",
                        format!("needs ν > d − 1 = {}, got {dof}", d - 1),
                    ));
                }
                if *scalar_mode {
                    let ragged = scale
                        .first()
                        .is_some_and(|r0| scale.iter().any(|r| r.len() != r0.len()));
                    if scale.is_empty() || scale[0].is_empty() || !(scale[0][0] > 0.0) || ragged {
                        out.push(Diagnostic::new(
                            "prior.scale",
                            "scalar mode reads U₁₁ of a rectangular matrix, which must be positive",
                        ));
                    }
                } else if model_dim.is_some() {
                    check_square_spd(scale, d, "prior.scale", out);
                }
                if !(*sigma_dof > d as f64 - 1.0) {
                    out.push(Diagnostic::new(
                        "prior.sigma_dof",
                        format!("needs n > d − 1 = {}, got {sigma_dof}", d - 1),
                    ));
                }
                if model_dim.is_some() {
                    check_square_spd(sigma_scale, d, "prior.sigma_scale", out);
                }
            }
            PriorConfig::Horseshoe {
                local_shape,
                global_shape,
                local_rate_hypers,
                global_rate_hypers,
                sigma_dof,
                sigma_scale,
            } => {
                if !(*local_shape > 0.0) {
                    out.push(Diagnostic::new(
                        "prior.local_shape",
                        format!("must be positive, got {local_shape}"),
                    ));
                }
                if !(*global_shape > 0.0) {
                    out.push(Diagnostic::new(
                        "prior.global_shape",
                        format!("must be positive, got {global_shape}"),
                    ));
                }
                if !(local_rate_hypers.0 > 0.0) || !(local_rate_hypers.1 > 0.0) {
                    out.push(Diagnostic::new(
                        "prior.local_rate_hypers",
                        format!(
                            "both 𝔞 and 𝔟 must be positive, got ({}, {})",
                            local_rate_hypers.0, local_rate_hypers.1
                        ),
                    ));
                }
                if !(global_rate_hypers.0 > 0.0) || !(global_rate_hypers.1 > 0.0) {
                    out.push(Diagnostic::new(
                        "prior.global_rate_hypers",
                        format!(
                            "both 𝔞⁰ and 𝔟⁰ must be positive, got ({}, {})",
                            global_rate_hypers.0, global_rate_hypers.1
                        ),
                    ));
                }
                if !(*sigma_dof > d as f64 - 1.0) {
                    out.push(Diagnostic::new(
                        "prior.sigma_dof",
                        format!("needs n > d − 1 = {}, got {sigma_dof}", d - 1),
                    ));
                }
                if model_dim.is_some() {
                    check_square_spd(sigma_scale, d, "prior.sigma_scale", out);
                }
            }
            PriorConfig::Ridge { ridge } => {
                if !(*ridge > 0.0) || !ridge.is_finite() {
                    out.push(Diagnostic::new(
                        "prior.ridge",
                        format!("must be a positive real, got {ridge}"),
                    ));
                }
            }
        }
    }

    // -- builders ----------------------------------------------------------

    pub fn build_model(&self) -> driftlearn_core::Result<ModelSpec> {
        builtin_model(&self.model.name, &self.model.params)
    }

    pub fn build_kernel(&self, dim: usize) -> driftlearn_core::Result<MatrixKernel> {
        MatrixKernel::isotropic(ScalarKernel::gaussian(self.kernel.bandwidth)?, dim)
    }

    /// Number of recorded observations m, from `steps` or `t_end`.
    pub fn steps(&self) -> usize {
        match (self.simulation.steps, self.simulation.t_end) {
            (Some(m), _) => m,
            (None, Some(t)) => (t / self.simulation.delta).round() as usize,
            (None, None) => 0,
        }
    }

    /// Instantiates the configured estimation strategy.
    pub fn build_estimator(&self) -> CliResult<Box<dyn DriftEstimator>> {
        match &self.prior {
            PriorConfig::Ridge { ridge } => Ok(Box::new(RidgeEstimator { ridge: *ridge })),
            PriorConfig::T {
                dof,
                scale,
                sigma_dof,
                sigma_scale,
                scalar_mode,
                paper_literal_scale,
            } => Ok(Box::new(TPriorEstimator {
                config: TPriorConfig {
                    dof: *dof,
                    scale: linalg::mat_from_rows(scale),
                    sigma_dof: *sigma_dof,
                    sigma_scale: linalg::mat_from_rows(sigma_scale),
                    scalar_mode: *scalar_mode,
                    paper_literal_scale: *paper_literal_scale,
                },
            })),
            PriorConfig::Horseshoe {
                local_shape,
                global_shape,
                local_rate_hypers,
                global_rate_hypers,
                sigma_dof,
                sigma_scale,
            } => Ok(Box::new(HorseshoeEstimator {
                config: HsPriorConfig {
                    local_shape: *local_shape,
                    global_shape: *global_shape,
                    local_rate_hypers: *local_rate_hypers,
                    global_rate_hypers: *global_rate_hypers,
                    sigma_dof: *sigma_dof,
                    sigma_scale: linalg::mat_from_rows(sigma_scale),
                },
            })),
        }
    }

    /// Stable 64-bit hash of the canonical JSON form, for the manifest.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(canonical.as_bytes()))
    }
}

/// 64-bit FNV-1a, used for config hashes and per-cell seed derivation.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
