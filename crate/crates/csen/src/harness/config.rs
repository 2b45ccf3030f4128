//! Experiment configuration, mirrored one-to-one by the JSON config file.
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SeTable,
    NoiseSweep,
    PhaseTransition,
    RecoveryComparison,
    #[serde(rename = "dictclass-bench")]
    DictClassBench,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SeTable => "se-table",
            ExperimentKind::NoiseSweep => "noise-sweep",
            ExperimentKind::PhaseTransition => "phase-transition",
            ExperimentKind::RecoveryComparison => "recovery-comparison",
            ExperimentKind::DictClassBench => "dictclass-bench",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Measurement rates; m = round(mr·n).
    #[serde(default = "d_mr_list")]
    pub mr_list: Vec<f64>,
    /// Test-time measurement noise for se-table (null/absent = clean).
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Noise sweep grid; `null` entries mean the clean condition.
    #[serde(default = "d_snr_list")]
    pub snr_db_list: Vec<Option<f64>>,
    #[serde(default = "d_methods")]
    pub methods: Vec<String>,
    /// Trials per phase cell.
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Directory holding the MNIST IDX files (plain or .gz).
    #[serde(default = "d_dataset")]
    pub dataset: PathBuf,
    #[serde(default = "d_out")]
    pub out_dir: PathBuf,
    #[serde(default = "d_train_size")]
    pub train_size: usize,
    #[serde(default = "d_val_size")]
    pub val_size: usize,
    #[serde(default = "d_test_size")]
    pub test_size: usize,
    /// ρ bins for the phase grid (equal-mass over the empirical
    /// distribution).
    #[serde(default = "d_rho_bins")]
    pub rho_bins: usize,
    /// Digits scored in the recovery comparison.
    #[serde(default = "d_sample_count")]
    pub sample_count: usize,
    /// Reconstructions dumped as CSM1 grids per method.
    #[serde(default)]
    pub dump_reconstructions: usize,
    #[serde(default)]
    pub proxy: ProxyParams,
    #[serde(default)]
    pub csen: CsenParams,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub dictclass: DictBenchParams,
}

fn d_mr_list() -> Vec<f64> {
    vec![0.25]
}
fn d_snr_list() -> Vec<Option<f64>> {
    vec![None]
}
fn d_methods() -> Vec<String> {
    vec!["csen1".into(), "csen2".into()]
}
fn d_trials() -> usize {
    20
}
fn d_dataset() -> PathBuf {
    PathBuf::from("data/mnist")
}
fn d_out() -> PathBuf {
    PathBuf::from("out")
}
fn d_train_size() -> usize {
    10_000
}
fn d_val_size() -> usize {
    2_000
}
fn d_test_size() -> usize {
    10_000
}
fn d_rho_bins() -> usize {
    8
}
fn d_sample_count() -> usize {
    500
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProxyParams {
    /// "lmmse" or "mc".
    #[serde(default = "d_proxy_kind")]
    pub kind: String,
    /// Regularizer for the lmmse denoiser. The value always lands in the
    /// emitted records.
    #[serde(default = "d_proxy_lambda")]
    pub lambda: f64,
}

fn d_proxy_kind() -> String {
    "lmmse".into()
}
fn d_proxy_lambda() -> f64 {
    1e-2
}

impl Default for ProxyParams {
    fn default() -> Self {
        ProxyParams {
            kind: d_proxy_kind(),
            lambda: d_proxy_lambda(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsenParams {
    /// Architecture backing learned weights in phase/recovery runs:
    /// "csen1" or "csen2".
    #[serde(default = "d_arch")]
    pub arch: String,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_beta1")]
    pub beta1: f64,
    #[serde(default = "d_beta2")]
    pub beta2: f64,
    #[serde(default = "d_adam_eps")]
    pub adam_eps: f64,
    /// Fixed support threshold; absent = validation sweep.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Training set size for auxiliary models in phase/recovery runs.
    #[serde(default = "d_aux_train")]
    pub aux_train_size: usize,
    /// Epochs for auxiliary models in phase/recovery runs.
    #[serde(default = "d_aux_epochs")]
    pub aux_epochs: usize,
}

fn d_arch() -> String {
    "csen2".into()
}
fn d_epochs() -> usize {
    100
}
fn d_batch() -> usize {
    128
}
fn d_lr() -> f64 {
    0.001
}
fn d_beta1() -> f64 {
    0.9
}
fn d_beta2() -> f64 {
    0.999
}
fn d_adam_eps() -> f64 {
    1e-8
}
fn d_aux_train() -> usize {
    2_000
}
fn d_aux_epochs() -> usize {
    12
}

impl Default for CsenParams {
    fn default() -> Self {
        CsenParams {
            arch: d_arch(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            lr: d_lr(),
            beta1: d_beta1(),
            beta2: d_beta2(),
            adam_eps: d_adam_eps(),
            tau: None,
            aux_train_size: d_aux_train(),
            aux_epochs: d_aux_epochs(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    /// λ for the single-λ Lasso support baseline.
    #[serde(default = "d_lasso_lambda")]
    pub lasso_lambda: f64,
    /// λ grid swept where a per-method best λ is reported.
    #[serde(default = "d_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "d_max_iters")]
    pub max_iters: usize,
    #[serde(default = "d_rel_tol")]
    pub rel_tol: f64,
    /// Continuation stages for the Basis-Pursuit-style path.
    #[serde(default = "d_path_stages")]
    pub path_stages: usize,
    #[serde(default = "d_path_decay")]
    pub path_decay: f64,
    #[serde(default = "d_path_iters")]
    pub path_stage_iters: usize,
    #[serde(default = "d_omp_k_max")]
    pub omp_k_max: usize,
    #[serde(default = "d_omp_res_tol")]
    pub omp_res_tol: f64,
    #[serde(default = "d_crc_lambda")]
    pub crc_lambda: f64,
    /// ε in w = 1/(p+ε) for learned weights.
    #[serde(default = "d_weight_eps")]
    pub weight_epsilon: f64,
}

fn d_lasso_lambda() -> f64 {
    0.05
}
fn d_lambda_grid() -> Vec<f64> {
    // 10-point log grid over [1e-4, 10].
    (0..10)
        .map(|i| 10f64.powf(-4.0 + 5.0 * i as f64 / 9.0))
        .collect()
}
fn d_max_iters() -> usize {
    2_000
}
fn d_rel_tol() -> f64 {
    1e-10
}
fn d_path_stages() -> usize {
    12
}
fn d_path_decay() -> f64 {
    0.3
}
fn d_path_iters() -> usize {
    250
}
fn d_omp_k_max() -> usize {
    200
}
fn d_omp_res_tol() -> f64 {
    1e-6
}
fn d_crc_lambda() -> f64 {
    1e-2
}
fn d_weight_eps() -> f64 {
    1e-2
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            lasso_lambda: d_lasso_lambda(),
            lambda_grid: d_lambda_grid(),
            max_iters: d_max_iters(),
            rel_tol: d_rel_tol(),
            path_stages: d_path_stages(),
            path_decay: d_path_decay(),
            path_stage_iters: d_path_iters(),
            omp_k_max: d_omp_k_max(),
            omp_res_tol: d_omp_res_tol(),
            crc_lambda: d_crc_lambda(),
            weight_epsilon: d_weight_eps(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictBenchParams {
    #[serde(default = "d_classes")]
    pub classes: usize,
    #[serde(default = "d_atoms")]
    pub atoms_per_class: usize,
    #[serde(default = "d_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "d_grid_h")]
    pub grid_h: usize,
    #[serde(default = "d_train_queries")]
    pub train_queries: usize,
    #[serde(default = "d_test_queries")]
    pub test_queries: usize,
    #[serde(default = "d_noise")]
    pub noise: f64,
}

fn d_classes() -> usize {
    5
}
fn d_atoms() -> usize {
    8
}
fn d_feature_dim() -> usize {
    30
}
fn d_grid_h() -> usize {
    4
}
fn d_train_queries() -> usize {
    400
}
fn d_test_queries() -> usize {
    300
}
fn d_noise() -> f64 {
    0.15
}

impl Default for DictBenchParams {
    fn default() -> Self {
        DictBenchParams {
            classes: d_classes(),
            atoms_per_class: d_atoms(),
            feature_dim: d_feature_dim(),
            grid_h: d_grid_h(),
            train_queries: d_train_queries(),
            test_queries: d_test_queries(),
            noise: d_noise(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for &mr in &self.mr_list {
            if !(mr > 0.0 && mr <= 1.0) {
                return Err(Error::Config(format!("mr {mr} outside (0, 1]")));
            }
        }
        if self.mr_list.is_empty() {
            return Err(Error::Config("mr_list is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods is empty".into()));
        }
        for m in &self.methods {
            if !KNOWN_METHODS.contains(&m.as_str()) {
                return Err(Error::Config(format!(
                    "unknown method {m:?}; known: {}",
                    KNOWN_METHODS.join(", ")
                )));
            }
        }
        match self.proxy.kind.as_str() {
            "lmmse" | "mc" => {}
            other => return Err(Error::Config(format!("unknown proxy kind {other:?}"))),
        }
        if !(self.proxy.lambda > 0.0) {
            return Err(Error::Config("proxy lambda must be positive".into()));
        }
        match self.csen.arch.as_str() {
            "csen1" | "csen2" => {}
            other => return Err(Error::Config(format!("unknown csen arch {other:?}"))),
        }
        Ok(())
    }
}

pub const KNOWN_METHODS: &[&str] = &[
    "csen1",
    "csen2",
    "mc",
    "lmmse",
    "lasso",
    "weighted-lasso-csen",
    "omp",
    "crc",
    "src",
    "csen",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json_str(r#"{"experiment": "se-table"}"#).unwrap();
        assert_eq!(cfg.mr_list, vec![0.25]);
        assert_eq!(cfg.train_size, 10_000);
        assert_eq!(cfg.csen.epochs, 100);
        assert_eq!(cfg.proxy.lambda, 1e-2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_json_str(
            r#"{"experiment": "se-table", "not_a_field": 1}"#,
        );
        assert!(err.is_err());
        let err = ExperimentConfig::from_json_str(
            r#"{"experiment": "se-table", "csen": {"epoochs": 5}}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(ExperimentConfig::from_json_str(
            r#"{"experiment": "se-table", "mr_list": [1.5]}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json_str(
            r#"{"experiment": "se-table", "methods": ["nope"]}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json_str(
            r#"{"experiment": "se-table", "proxy": {"kind": "banana"}}"#
        )
        .is_err());
    }

    #[test]
    fn roundtrips_through_json() {
        let cfg = ExperimentConfig::from_json_str(r#"{"experiment": "phase-transition"}"#).unwrap();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back = ExperimentConfig::from_json_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&cfg).unwrap());
    }
}
