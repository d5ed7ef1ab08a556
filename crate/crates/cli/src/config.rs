//! Flat key-value run configuration.
//!
//! Grammar: one `key = value` per line, `#` starts a comment, blank lines
//! ignored. Repeating a key forms a list; scalar-valued keys take the last
//! occurrence. Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lagcast::data::{ClimateVar, FeatureSet, LagSpec};
use lagcast::evaluation::ModelFamily;
use lagcast::mlp::MlpConfig;
use lagcast::sarimax::SarimaxOrder;
use lagcast::stl::LoessConfig;

use crate::CliError;

/// Ordered raw entries, exactly as parsed.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: Vec<(String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(at) => &line[..at],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", idx + 1)));
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.push((key.to_string(), value));
    }

    /// Last occurrence wins for scalar keys.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// All occurrences, in file order.
    pub fn get_all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn parse_scalar<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{raw}`"))),
        }
    }
}

/// One division's input files.
#[derive(Debug, Clone)]
pub struct DivisionInput {
    pub label: String,
    pub cases_file: PathBuf,
    pub climate_file: PathBuf,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub divisions: Vec<DivisionInput>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub test_months: usize,
    pub correlation_max_lag: u32,
    pub acf_lags: usize,
    pub lag_spec: LagSpec,
    pub feature_sets: Vec<FeatureSet>,
    pub families: Vec<ModelFamily>,
    pub sarimax_grid: Vec<SarimaxOrder>,
    pub mlp_iterations: usize,
    pub mlp_validation_months: usize,
    pub gbt_cv_folds: usize,
    pub recursive_case_lag: bool,
    pub divergence_factor: f64,
    pub stl: LoessConfig,
    pub fetch_url: Option<String>,
    /// Raw entries echoed into the run manifest.
    pub raw: RawConfig,
}

fn parse_bool(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Config(format!(
            "key `{key}`: expected a boolean, got `{raw}`"
        ))),
    }
}

/// Parses "(p,d,q)(P,D,Q,s)".
pub fn parse_order(text: &str) -> Result<SarimaxOrder, CliError> {
    let cleaned = text.trim();
    let inner: Vec<&str> = cleaned
        .trim_start_matches('(')
        .trim_end_matches(')')
        .split(")(")
        .collect();
    let bad = || {
        CliError::Config(format!(
            "cannot parse order `{text}`; expected (p,d,q)(P,D,Q,s)"
        ))
    };
    if inner.len() != 2 {
        return Err(bad());
    }
    let nums = |s: &str| -> Result<Vec<usize>, CliError> {
        s.split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
            .collect()
    };
    let nonseasonal = nums(inner[0])?;
    let seasonal = nums(inner[1])?;
    if nonseasonal.len() != 3 || seasonal.len() != 4 {
        return Err(bad());
    }
    SarimaxOrder::new(
        nonseasonal[0],
        nonseasonal[1],
        nonseasonal[2],
        seasonal[0],
        seasonal[1],
        seasonal[2],
        seasonal[3],
    )
    .map_err(|e| CliError::Config(e.to_string()))
}

impl RunConfig {
    /// Resolves a configuration from an optional file plus override entries
    /// (flags are appended after the file, so they win).
    pub fn resolve(file: Option<&Path>, overrides: &RawConfig) -> Result<Self, CliError> {
        let mut raw = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                RawConfig::parse(&text)?
            }
            None => RawConfig::default(),
        };
        for (k, v) in overrides.entries() {
            raw.set(k, v.clone());
        }

        let mut divisions = Vec::new();
        for label in raw.get_all("division") {
            let cases_key = format!("cases_file.{label}");
            let climate_key = format!("climate_file.{label}");
            let cases_file = raw
                .get(&cases_key)
                .ok_or_else(|| CliError::Config(format!("missing key `{cases_key}`")))?;
            let climate_file = raw
                .get(&climate_key)
                .ok_or_else(|| CliError::Config(format!("missing key `{climate_key}`")))?;
            divisions.push(DivisionInput {
                label: label.to_string(),
                cases_file: PathBuf::from(cases_file),
                climate_file: PathBuf::from(climate_file),
            });
        }
        // Duplicate division labels would silently collide on output files.
        let mut seen = BTreeMap::new();
        for d in &divisions {
            if seen.insert(d.label.clone(), ()).is_some() {
                return Err(CliError::Config(format!(
                    "division `{}` listed twice",
                    d.label
                )));
            }
        }

        let mut lag_spec = LagSpec::standard();
        for var in ClimateVar::ALL {
            if let Some(lag) = raw.parse_scalar::<u32>(&format!("lag.{}", var.name()))? {
                lag_spec = lag_spec
                    .with_lag(var, lag)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
        }

        let feature_sets = {
            let listed = raw.get_all("feature_set");
            if listed.is_empty() {
                FeatureSet::ALL.to_vec()
            } else {
                listed
                    .iter()
                    .map(|s| {
                        FeatureSet::parse(s)
                            .ok_or_else(|| CliError::Config(format!("unknown feature set `{s}`")))
                    })
                    .collect::<Result<_, _>>()?
            }
        };

        let families = {
            let listed = raw.get_all("family");
            if listed.is_empty() {
                ModelFamily::ALL.to_vec()
            } else {
                listed
                    .iter()
                    .map(|s| match s.to_ascii_lowercase().as_str() {
                        "sarimax" => Ok(ModelFamily::Sarimax),
                        "mpr" | "poisson" => Ok(ModelFamily::Mpr),
                        "ann" | "mlp" => Ok(ModelFamily::Ann),
                        "xgb" | "gbt" => Ok(ModelFamily::Xgb),
                        other => Err(CliError::Config(format!("unknown family `{other}`"))),
                    })
                    .collect::<Result<_, _>>()?
            }
        };

        let sarimax_grid = {
            let listed = raw.get_all("sarimax_order");
            if listed.is_empty() {
                SarimaxOrder::standard_grid()
            } else {
                listed
                    .iter()
                    .map(|s| parse_order(s))
                    .collect::<Result<_, _>>()?
            }
        };

        let stl = LoessConfig::new(
            raw.parse_scalar("stl_seasonal_window")?.unwrap_or(13),
            raw.parse_scalar("stl_trend_window")?.unwrap_or(23),
            raw.parse_scalar("stl_inner")?.unwrap_or(2),
            raw.parse_scalar("stl_robust")?.unwrap_or(1),
            raw.parse_scalar("stl_degree")?.unwrap_or(1),
        )
        .map_err(|e| CliError::Config(e.to_string()))?;

        let recursive_case_lag = match raw.get("recursive_case_lag") {
            Some(v) => parse_bool("recursive_case_lag", v)?,
            None => false,
        };

        Ok(RunConfig {
            divisions,
            output_dir: PathBuf::from(raw.get("output_dir").unwrap_or("out")),
            seed: raw.parse_scalar("seed")?.unwrap_or(42),
            test_months: raw.parse_scalar("test_months")?.unwrap_or(9),
            correlation_max_lag: raw.parse_scalar("max_lag")?.unwrap_or(4),
            acf_lags: raw.parse_scalar("acf_lags")?.unwrap_or(24),
            lag_spec,
            feature_sets,
            families,
            sarimax_grid,
            mlp_iterations: raw.parse_scalar("mlp_iterations")?.unwrap_or(20_000),
            mlp_validation_months: raw.parse_scalar("mlp_validation_months")?.unwrap_or(6),
            gbt_cv_folds: raw.parse_scalar("gbt_cv_folds")?.unwrap_or(3),
            recursive_case_lag,
            divergence_factor: raw.parse_scalar("divergence_factor")?.unwrap_or(10.0),
            stl,
            fetch_url: raw.get("fetch_url").map(str::to_string),
            raw,
        })
    }

    /// The evaluation-harness view of this configuration.
    pub fn matrix_config(&self) -> lagcast::evaluation::MatrixConfig {
        let mut mc = lagcast::evaluation::MatrixConfig::new(self.seed);
        mc.lag_spec = self.lag_spec.clone();
        mc.test_months = self.test_months;
        mc.families = self.families.clone();
        mc.feature_sets = self.feature_sets.clone();
        mc.sarimax_grid = self.sarimax_grid.clone();
        mc.mlp_grid = MlpConfig::default_grid(self.seed, self.mlp_iterations);
        mc.mlp_validation_months = self.mlp_validation_months;
        mc.gbt_cv_folds = self.gbt_cv_folds;
        mc.recursive_case_lag = self.recursive_case_lag;
        mc.divergence_factor = self.divergence_factor;
        mc
    }
}
