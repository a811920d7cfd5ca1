//! End-to-end stages driven by a single JSON config.
//!
//! Every stage reads its inputs from the previous stage's files in
//! `paths.output_dir`, so stages can be rerun individually.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::backtest::{run_backtest, BacktestConfig, BacktestReport};
use crate::error::{Error, Result};
use crate::explain::{impurity_importance, shap_summary, ImportanceMethod};
use crate::factors::{compute_base_factors, compute_interaction_factors, finalize, ExtraColumns, FactorConfig, FactorPanel};
use crate::ingest::{clean, load_membership, load_prices, merge_and_filter, write_prices};
use crate::models::{evaluate, BoostingConfig, EvalMetrics, ForestConfig, Model, ModelSpec};
use crate::report::{bar_chart_svg, line_chart_svg, ranked_csv, write_text};
use crate::selection::{chronological_split, feature_matrix, SelectionConfig, SelectionReport};
use crate::synth::{generate, SynthConfig};

pub const PANEL_FILE: &str = "panel.csv";
pub const FACTORS_FILE: &str = "factors.csv";
pub const SELECTION_FILE: &str = "selection_report.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const MODELS_DIR: &str = "models";
pub const IMPORTANCE_FILE: &str = "importance.csv";
pub const SHAP_FILE: &str = "shap_summary.csv";
pub const SHAP_SVG_FILE: &str = "shap_summary.svg";
pub const BACKTEST_FILE: &str = "backtest_report.json";
pub const CURVES_FILE: &str = "backtest_curves.csv";
pub const CURVES_SVG_FILE: &str = "backtest_cumulative.svg";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub prices: PathBuf,
    pub membership: PathBuf,
    pub output_dir: PathBuf,
    /// Optional `permno,date,<columns...>` CSV joined onto the factor matrix.
    #[serde(default)]
    pub extra_features: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            prices: "prices.csv".into(),
            membership: "membership.csv".into(),
            output_dir: "out".into(),
            extra_features: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeConfig {
    pub alpha: f64,
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub ridge: RidgeConfig,
    pub random_forest: ForestConfig,
    pub gradient_boosting: BoostingConfig,
    /// Chronological train fraction for `train`.
    pub split: f64,
    /// Empty means "use the selected subset".
    pub features: Vec<String>,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        Self {
            ridge: RidgeConfig::default(),
            random_forest: ForestConfig::default(),
            gradient_boosting: BoostingConfig::default(),
            split: 0.8,
            features: Vec::new(),
        }
    }
}

impl ModelsConfig {
    /// The four models in reporting order.
    pub fn specs(&self) -> [ModelSpec; 4] {
        [
            ModelSpec::Ols,
            ModelSpec::Ridge { alpha: self.ridge.alpha },
            ModelSpec::RandomForest(self.random_forest),
            ModelSpec::GradientBoosting(self.gradient_boosting),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Model name as written by `train` (e.g. `random_forest`).
    pub model: String,
    /// Cap on held-out rows explained; rows are taken at an even stride.
    pub max_rows: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            model: "random_forest".into(),
            max_rows: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    /// Replaces the seed of every stochastic model when the config is loaded.
    pub seed: u64,
    pub factors: FactorConfig,
    pub selection: SelectionConfig,
    pub models: ModelsConfig,
    pub backtest: BacktestConfig,
    pub explain: ExplainConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut cfg = Self {
            paths: Paths::default(),
            seed: 42,
            factors: FactorConfig::default(),
            selection: SelectionConfig::default(),
            models: ModelsConfig::default(),
            backtest: BacktestConfig::default(),
            explain: ExplainConfig::default(),
            synth: SynthConfig::default(),
        };
        cfg.set_seed(42);
        cfg
    }
}

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(s)?;
        cfg.set_seed(cfg.seed);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_relative_to(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    /// Interpret relative paths against `base` (the config file's directory).
    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.prices);
        fix(&mut self.paths.membership);
        fix(&mut self.paths.output_dir);
        if let Some(p) = self.paths.extra_features.as_mut() {
            fix(p);
        }
    }

    /// Set the top-level seed and push it into every seeded component.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.models.random_forest.seed = seed;
        self.models.gradient_boosting.seed = seed;
        self.selection.scoring_model = self.selection.scoring_model.with_seed(seed);
        self.backtest.model = self.backtest.model.with_seed(seed);
        self.synth.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.factors.validate()?;
        self.selection.validate()?;
        self.backtest.validate()?;
        self.models.random_forest.validate()?;
        self.models.gradient_boosting.validate()?;
        if !(self.models.split > 0.0 && self.models.split < 1.0) {
            return Err(Error::Config("models.split must lie in (0, 1)".into()));
        }
        if !(self.models.ridge.alpha >= 0.0) {
            return Err(Error::Config("models.ridge.alpha must be >= 0".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(self)?.as_bytes()))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(MODELS_DIR).join(format!("{name}.json"))
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub artifacts: Vec<Artifact>,
    pub details: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl StageSummary {
    fn new(stage: &str, cfg: &PipelineConfig, files: &[PathBuf], details: Value) -> Result<Self> {
        let artifacts = files
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
                let rel = p.strip_prefix(&cfg.paths.output_dir).unwrap_or(p);
                Ok(Artifact {
                    path: rel.to_string_lossy().replace('\\', "/"),
                    sha256: sha256_hex(&bytes),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            stage: stage.to_string(),
            artifacts,
            details,
            warnings: Vec::new(),
        })
    }
}

fn ensure_out_dir(cfg: &PipelineConfig) -> Result<()> {
    let dir = &cfg.paths.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_selection(cfg: &PipelineConfig) -> Result<SelectionReport> {
    let p = cfg.out(SELECTION_FILE);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Configured features, or the selected subset when none are configured.
fn resolve_features(cfg: &PipelineConfig, configured: &[String]) -> Result<Vec<String>> {
    let features = if configured.is_empty() {
        read_selection(cfg)?.best_subset
    } else {
        configured.to_vec()
    };
    if features.is_empty() {
        return Err(Error::Empty("feature list"));
    }
    Ok(features)
}

/// load -> merge/filter -> clean; writes `panel.csv`.
pub fn cmd_ingest(cfg: &PipelineConfig) -> Result<StageSummary> {
    ensure_out_dir(cfg)?;
    let prices = load_prices(&cfg.paths.prices)?;
    let membership = load_membership(&cfg.paths.membership)?;
    let merged = merge_and_filter(&prices, &membership);
    let cleaned = clean(&merged);
    let path = cfg.out(PANEL_FILE);
    write_prices(&path, &cleaned)?;
    let details = json!({
        "loaded_rows": prices.len(),
        "membership_rows": membership.len(),
        "merged_rows": merged.len(),
        "clean_rows": cleaned.len(),
        "securities": cleaned.permnos().len(),
    });
    let mut summary = StageSummary::new("ingest", cfg, &[path], details)?;
    if membership.is_empty() {
        summary.warnings.push("membership file has no rows; panel is empty".into());
    }
    Ok(summary)
}

/// Factor catalog over `panel.csv`, extra columns joined; writes `factors.csv`.
pub fn cmd_factors(cfg: &PipelineConfig) -> Result<StageSummary> {
    cfg.factors.validate()?;
    ensure_out_dir(cfg)?;
    let panel = load_prices(cfg.out(PANEL_FILE))?;
    let mut fp = compute_base_factors(&panel, &cfg.factors);
    compute_interaction_factors(&mut fp, &panel, &cfg.factors)?;
    let mut extra_columns = Vec::new();
    if let Some(p) = &cfg.paths.extra_features {
        let extra = ExtraColumns::load(p)?;
        extra_columns = extra.names.clone();
        fp.join(&extra);
    }
    finalize(&mut fp);
    let path = cfg.out(FACTORS_FILE);
    fp.write_csv(&path)?;
    let details = json!({
        "rows": fp.n_rows(),
        "factor_columns": fp.names().len(),
        "extra_columns": extra_columns,
    });
    StageSummary::new("factors", cfg, &[path], details)
}

/// Two-layer filter plus subset search; writes `selection_report.json`.
pub fn cmd_select(cfg: &PipelineConfig) -> Result<StageSummary> {
    ensure_out_dir(cfg)?;
    let fp = FactorPanel::read_csv(cfg.out(FACTORS_FILE))?;
    let report = crate::selection::select_factors(&fp, &cfg.selection)?;
    let path = cfg.out(SELECTION_FILE);
    write_json(&path, &report)?;
    let details = json!({
        "layer1_kept": report.layer1_kept.len(),
        "layer1_dropped": report.layer1_dropped.iter().map(|e| &e.factor).collect::<Vec<_>>(),
        "low_corr_factors": report.low_corr_factors,
        "best_subset": report.best_subset,
        "best_score": report.best_score,
        "evaluated_count": report.evaluated_count,
    });
    StageSummary::new("select", cfg, &[path], details)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetrics {
    pub model: String,
    pub train: EvalMetrics,
    pub test: EvalMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub features: Vec<String>,
    pub split: f64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub models: Vec<ModelMetrics>,
}

fn read_train_report(cfg: &PipelineConfig) -> Result<TrainReport> {
    let p = cfg.out(TRAIN_REPORT_FILE);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Fit OLS, ridge, forest and boosting on a chronological split; writes the
/// model files, `metrics.csv` (test set) and `train_report.json`.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<StageSummary> {
    cfg.validate()?;
    ensure_out_dir(cfg)?;
    let fp = FactorPanel::read_csv(cfg.out(FACTORS_FILE))?;
    let features = resolve_features(cfg, &cfg.models.features)?;
    let (train, test) = chronological_split(&fp, cfg.models.split)?;
    let x_train = feature_matrix(&fp, &features, &train)?;
    let x_test = feature_matrix(&fp, &features, &test)?;
    let y_train: Vec<f64> = train.iter().map(|&i| fp.ret[i]).collect();
    let y_test: Vec<f64> = test.iter().map(|&i| fp.ret[i]).collect();

    let models_dir = cfg.paths.output_dir.join(MODELS_DIR);
    std::fs::create_dir_all(&models_dir).map_err(|e| Error::io(&models_dir, e))?;
    let mut files = Vec::new();
    let mut metrics = Vec::new();
    let mut csv = String::from("model,mse,r2\n");
    for spec in cfg.models.specs() {
        let model = spec.fit(&x_train, &y_train)?;
        let path = cfg.model_path(spec.name());
        model.save(&path)?;
        files.push(path);
        let m = ModelMetrics {
            model: spec.name().to_string(),
            train: evaluate(&y_train, &model.predict(&x_train)?)?,
            test: evaluate(&y_test, &model.predict(&x_test)?)?,
        };
        csv.push_str(&format!("{},{},{}\n", m.model, m.test.mse, m.test.r2));
        metrics.push(m);
    }
    let metrics_path = cfg.out(METRICS_FILE);
    write_text(&metrics_path, &csv)?;
    let report = TrainReport {
        features,
        split: cfg.models.split,
        train_rows: train.len(),
        test_rows: test.len(),
        models: metrics,
    };
    let report_path = cfg.out(TRAIN_REPORT_FILE);
    write_json(&report_path, &report)?;
    files.push(metrics_path);
    files.push(report_path);
    let details = json!({
        "features": report.features,
        "train_rows": report.train_rows,
        "test_rows": report.test_rows,
        "test_r2": report.models.iter().map(|m| (m.model.clone(), json!(m.test.r2))).collect::<serde_json::Map<_, _>>(),
    });
    StageSummary::new("train", cfg, &files, details)
}

fn stride_sample(rows: &[usize], max_rows: usize) -> Vec<usize> {
    if max_rows == 0 || rows.len() <= max_rows {
        return rows.to_vec();
    }
    (0..max_rows).map(|k| rows[k * rows.len() / max_rows]).collect()
}

/// Importance and mean |SHAP| for a trained model on held-out rows.
/// `model_file` defaults to the model named in `explain.model`.
pub fn cmd_explain(cfg: &PipelineConfig, model_file: Option<&Path>) -> Result<StageSummary> {
    ensure_out_dir(cfg)?;
    let model_path = model_file.map(Path::to_path_buf).unwrap_or_else(|| cfg.model_path(&cfg.explain.model));
    let model = Model::load(&model_path)?;
    let train_report = read_train_report(cfg)?;
    let features = train_report.features;
    if features.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            actual: features.len(),
        });
    }
    let fp = FactorPanel::read_csv(cfg.out(FACTORS_FILE))?;
    let (train, test) = chronological_split(&fp, train_report.split)?;
    let rows = stride_sample(&test, cfg.explain.max_rows);
    let x = feature_matrix(&fp, &features, &rows)?;
    let background = feature_matrix(&fp, &features, &train)?;
    let shap = shap_summary(&model, &x, &background)?;

    let (importance, method) = match impurity_importance(&model) {
        Ok(r) => (r.importance, r.method),
        Err(_) => {
            let total: f64 = shap.mean_abs_shap.iter().sum();
            let norm = shap
                .mean_abs_shap
                .iter()
                .map(|v| if total > 0.0 { v / total } else { 0.0 })
                .collect();
            (norm, ImportanceMethod::ShapMeanAbs)
        }
    };
    let imp_path = cfg.out(IMPORTANCE_FILE);
    write_text(&imp_path, &ranked_csv(&features, &importance, "importance"))?;
    let shap_path = cfg.out(SHAP_FILE);
    write_text(&shap_path, &ranked_csv(&features, &shap.mean_abs_shap, "mean_abs_shap"))?;
    let bars: Vec<(String, f64)> = shap
        .ranking()
        .into_iter()
        .map(|i| (features[i].clone(), shap.mean_abs_shap[i]))
        .collect();
    let svg_path = cfg.out(SHAP_SVG_FILE);
    write_text(&svg_path, &bar_chart_svg("Mean |SHAP| per feature", &bars))?;

    let details = json!({
        "model_file": model_path.file_name().map(|n| n.to_string_lossy().into_owned()),
        "attribution": shap.method,
        "importance_method": method,
        "rows_explained": rows.len(),
        "max_local_accuracy_error": shap.max_local_accuracy_error,
        "local_accuracy_ok": shap.max_local_accuracy_error < 1e-9,
        "top_feature_importance": features[crate::explain::rank_descending(&importance)[0]],
        "top_feature_shap": features[shap.ranking()[0]],
    });
    let mut summary = StageSummary::new("explain", cfg, &[imp_path, shap_path, svg_path], details)?;
    if matches!(model, Model::Linear(_)) {
        summary
            .warnings
            .push("linear model: exact linear attribution used in place of TreeSHAP".into());
    }
    Ok(summary)
}

/// Walk-forward backtest; writes the report, curves CSV and chart.
pub fn cmd_backtest(cfg: &PipelineConfig) -> Result<StageSummary> {
    ensure_out_dir(cfg)?;
    let fp = FactorPanel::read_csv(cfg.out(FACTORS_FILE))?;
    let mut bt = cfg.backtest.clone();
    bt.features = resolve_features(cfg, &bt.features)?;
    let report: BacktestReport = run_backtest(&fp, &bt)?;
    let json_path = cfg.out(BACKTEST_FILE);
    write_json(&json_path, &report)?;
    let csv_path = cfg.out(CURVES_FILE);
    report.write_curves_csv(&csv_path)?;
    let svg_path = cfg.out(CURVES_SVG_FILE);
    let svg = line_chart_svg(
        "Cumulative return",
        ("Top-k portfolio", "Equal-weight benchmark"),
        &report.cumulative_portfolio,
        &report.cumulative_benchmark,
    );
    write_text(&svg_path, &svg)?;
    let details = json!({
        "windows": report.windows.len(),
        "portfolio": {"mean": report.portfolio.mean, "std": report.portfolio.std, "sharpe": report.portfolio.sharpe},
        "benchmark": {"mean": report.benchmark.mean, "std": report.benchmark.std, "sharpe": report.benchmark.sharpe},
        "final_cumulative_portfolio": report.cumulative_portfolio.last(),
        "final_cumulative_benchmark": report.cumulative_benchmark.last(),
    });
    StageSummary::new("backtest", cfg, &[json_path, csv_path, svg_path], details)
}

/// Synthetic prices and membership (plus `leak.csv` when enabled) into `dir`.
pub fn cmd_synth(cfg: &SynthConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    generate(cfg)?.write(dir)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub stages: Vec<StageSummary>,
}

fn in_stage<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage {
        stage,
        source: Box::new(e),
    })
}

/// All six stages in order; writes `summary.json`. The first failure aborts
/// and is reported as [`Error::Stage`].
pub fn cmd_run_all(cfg: &PipelineConfig, mut on_stage: impl FnMut(&StageSummary)) -> Result<RunSummary> {
    in_stage("config", cfg.validate())?;
    let mut stages = Vec::new();
    let mut record = |s: StageSummary| {
        on_stage(&s);
        stages.push(s);
    };
    record(in_stage("ingest", cmd_ingest(cfg))?);
    record(in_stage("factors", cmd_factors(cfg))?);
    record(in_stage("select", cmd_select(cfg))?);
    record(in_stage("train", cmd_train(cfg))?);
    record(in_stage("explain", cmd_explain(cfg, None))?);
    record(in_stage("backtest", cmd_backtest(cfg))?);
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config_hash: in_stage("config", cfg.hash())?,
        stages,
    };
    in_stage("summary", write_json(&cfg.out(SUMMARY_FILE), &summary))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_reaches_every_model() {
        let cfg = PipelineConfig::from_json(r#"{"seed": 7}"#).unwrap();
        assert_eq!(cfg.models.random_forest.seed, 7);
        assert_eq!(cfg.models.gradient_boosting.seed, 7);
        assert_eq!(cfg.selection.scoring_model, cfg.selection.scoring_model.with_seed(7));
        assert_eq!(cfg.backtest.model, cfg.backtest.model.with_seed(7));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_json(r#"{"sede": 7}"#).is_err());
    }

    #[test]
    fn stride_sample_is_even() {
        let rows: Vec<usize> = (0..10).collect();
        assert_eq!(stride_sample(&rows, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(stride_sample(&rows, 20), rows);
    }

    #[test]
    fn config_round_trips() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }
}
