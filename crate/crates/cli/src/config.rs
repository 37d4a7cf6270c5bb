//! Pipeline configuration (TOML or JSON), validated before any stage runs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use beliefnet::external::InfluenceMetric;
use beliefnet::ggm::Constraint;
use beliefnet::influence::InfluenceParams;
use beliefnet::ingest::{GroupingSpec, ItemMeta};
use beliefnet::uva::UvaConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Survey CSV, relative to the config file.
    pub survey: PathBuf,
    /// Text columns read verbatim as group labels (e.g. a country code).
    #[serde(default)]
    pub label_columns: Vec<String>,
    #[serde(default)]
    pub missing_codes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Model ids of the comparison suite.
    #[serde(default = "default_models")]
    pub models: Vec<u8>,
    /// Grouping variables to fit; all configured groupings and label columns by default.
    #[serde(default)]
    pub groupings: Option<Vec<String>>,
    /// Model used downstream; the lowest-BIC model when unset.
    #[serde(default)]
    pub use_model: Option<u8>,
}

fn default_alpha() -> f64 {
    1e-4
}

fn default_models() -> Vec<u8> {
    (1..=8).collect()
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            alpha: default_alpha(),
            models: default_models(),
            groupings: None,
            use_model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldBankSource {
    pub indicator: String,
    pub countries: Vec<String>,
    pub first_year: i32,
    pub last_year: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelateConfig {
    /// Grouping whose groups are countries.
    pub country_grouping: String,
    #[serde(default)]
    pub indicator_files: Vec<PathBuf>,
    #[serde(default)]
    pub worldbank: Vec<WorldBankSource>,
    /// `[belief, indicator]` pairs.
    pub pairs: Vec<(String, String)>,
    pub base_year: i32,
    #[serde(default = "default_lags")]
    pub lags: Vec<i32>,
}

fn default_lags() -> Vec<i32> {
    vec![0, 5, 10]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSpec {
    /// Column of the group summary for the horizontal axis.
    pub x: String,
    pub y: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub scatter: Vec<ScatterSpec>,
    /// Also plot influence against indicator values for every correlation pair.
    #[serde(default)]
    pub correlation_scatter: bool,
    #[serde(default)]
    pub correlation_metric: InfluenceMetric,
}

pub const SUMMARY_COLUMNS: [&str; 6] = [
    "mean_energy",
    "abs_mean_energy",
    "temperature",
    "mean_gic",
    "mean_gsm",
    "sd_gsm",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataConfig,
    pub items: Vec<ItemMeta>,
    #[serde(default)]
    pub groupings: Vec<GroupingSpec>,
    #[serde(default)]
    pub uva: UvaConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub influence: InfluenceParams,
    #[serde(default)]
    pub correlate: Option<CorrelateConfig>,
    #[serde(default)]
    pub report: ReportConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

/// A parsed config together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: PipelineConfig,
    pub base_dir: PathBuf,
    /// Raw bytes of the config file, hashed into the manifest.
    pub raw: Vec<u8>,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub fn parse_config(text: &str, json: bool) -> Result<PipelineConfig, CliError> {
    if json {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON config: {e}")))
    } else {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid TOML config: {e}")))
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, CliError> {
    let raw = std::fs::read(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let text = String::from_utf8(raw.clone()).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let config = parse_config(&text, json)?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = LoadedConfig { config, base_dir, raw };
    validate(&loaded)?;
    Ok(loaded)
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Checks the whole configuration, including that input files exist.
pub fn validate(loaded: &LoadedConfig) -> Result<(), CliError> {
    let c = &loaded.config;
    let survey = loaded.resolve(&c.data.survey);
    if !survey.is_file() {
        return Err(bad(format!("survey file {} does not exist", survey.display())));
    }
    if c.items.iter().filter(|i| i.is_belief()).count() < 2 {
        return Err(bad("at least two belief items are required"));
    }
    let mut names = BTreeSet::new();
    for it in &c.items {
        if !names.insert(it.name.as_str()) {
            return Err(bad(format!("duplicate item `{}`", it.name)));
        }
        match it.scale {
            Some(b) if !(b.min < b.max) => {
                return Err(bad(format!("item `{}` has an empty scale", it.name)));
            }
            None if it.is_belief() => {
                return Err(bad(format!("belief item `{}` needs scale bounds", it.name)));
            }
            _ => {}
        }
    }
    let mut group_vars: BTreeSet<&str> = c.data.label_columns.iter().map(String::as_str).collect();
    for g in &c.groupings {
        g.validate().map_err(|e| bad(format!("grouping `{}`: {e}", g.variable)))?;
        match c.items.iter().find(|i| i.name == g.variable) {
            Some(it) if !it.is_belief() => {}
            Some(_) => return Err(bad(format!("grouping variable `{}` must be a grouping item", g.variable))),
            None => return Err(bad(format!("grouping variable `{}` is not a configured item", g.variable))),
        }
        if !group_vars.insert(g.variable.as_str()) {
            return Err(bad(format!("grouping `{}` is defined twice", g.variable)));
        }
    }
    for it in &c.items {
        if !it.is_belief() && c.data.label_columns.contains(&it.name) {
            return Err(bad(format!("`{}` is both an item and a label column", it.name)));
        }
    }
    if !(c.uva.threshold > 0.0 && c.uva.threshold < 1.0) {
        return Err(bad("uva.threshold must lie in (0, 1)"));
    }
    if c.uva.max_rounds < 1 {
        return Err(bad("uva.max_rounds must be >= 1"));
    }
    c.uva.glasso.validate().map_err(|e| bad(e.to_string()))?;
    for k in &c.uva.keep {
        if !c.items.iter().any(|i| &i.name == k && i.is_belief()) {
            return Err(bad(format!("uva.keep names unknown belief item `{k}`")));
        }
    }
    if !(c.fit.alpha > 0.0 && c.fit.alpha < 1.0) {
        return Err(bad("fit.alpha must lie in (0, 1)"));
    }
    if c.fit.models.is_empty() {
        return Err(bad("fit.models must not be empty"));
    }
    for &id in &c.fit.models {
        if Constraint::from_model_id(id).is_none() {
            return Err(bad(format!("fit.models contains unknown model id {id}")));
        }
    }
    if let Some(id) = c.fit.use_model {
        if !c.fit.models.contains(&id) {
            return Err(bad(format!("fit.use_model {id} is not among fit.models")));
        }
    }
    if let Some(gs) = &c.fit.groupings {
        for g in gs {
            if !group_vars.contains(g.as_str()) {
                return Err(bad(format!("fit.groupings names unknown grouping `{g}`")));
            }
        }
    }
    c.influence.validate().map_err(|e| bad(e.to_string()))?;
    if let Some(cc) = &c.correlate {
        if !group_vars.contains(cc.country_grouping.as_str()) {
            return Err(bad(format!("correlate.country_grouping `{}` is not a grouping", cc.country_grouping)));
        }
        if let Some(gs) = &c.fit.groupings {
            if !gs.contains(&cc.country_grouping) {
                return Err(bad("correlate.country_grouping must be among fit.groupings"));
            }
        }
        for f in &cc.indicator_files {
            let p = loaded.resolve(f);
            if !p.is_file() {
                return Err(bad(format!("indicator file {} does not exist", p.display())));
            }
        }
        for w in &cc.worldbank {
            if w.countries.is_empty() || w.first_year > w.last_year {
                return Err(bad(format!("worldbank source `{}` needs countries and a year range", w.indicator)));
            }
        }
        if cc.lags.iter().any(|&l| l < 0) {
            return Err(bad("correlate.lags must be >= 0"));
        }
        for (belief, _) in &cc.pairs {
            if !c.items.iter().any(|i| &i.name == belief && i.is_belief()) {
                return Err(bad(format!("correlate pair names unknown belief `{belief}`")));
            }
        }
    }
    for s in &c.report.scatter {
        for col in [&s.x, &s.y] {
            if !SUMMARY_COLUMNS.contains(&col.as_str()) {
                return Err(bad(format!(
                    "report.scatter column `{col}` is not one of {}",
                    SUMMARY_COLUMNS.join(", ")
                )));
            }
        }
    }
    Ok(())
}

/// Grouping variables to fit, in a stable order.
pub fn fit_groupings(c: &PipelineConfig) -> Vec<String> {
    match &c.fit.groupings {
        Some(gs) => gs.clone(),
        None => c
            .groupings
            .iter()
            .map(|g| g.variable.clone())
            .chain(c.data.label_columns.iter().cloned())
            .collect(),
    }
}
