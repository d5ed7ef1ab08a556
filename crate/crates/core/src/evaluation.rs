//! Forecast error metrics, the model x feature-set experiment matrix, and
//! division champion selection.

use rayon::prelude::*;
use thiserror::Error;

use crate::data::{
    build_design, split_design, AlignedPanel, DesignMatrix, FeatureSet, LagSpec, MonthIndex,
};
use crate::diagnostics;
use crate::gbt;
use crate::mlp;
use crate::poisson::{self, PoissonVariant};
use crate::sarimax::{self, SarimaxOrder};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("observed and predicted lengths differ ({observed} vs {predicted})")]
    LengthMismatch { observed: usize, predicted: usize },
    #[error("metrics need at least one observation")]
    EmptyInput,
    #[error("no valid records to select from")]
    NoValidRecords,
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
}

/// RMSE, MAE, and MAPE for a forecast window.
///
/// MAPE is computed over months with nonzero observed cases; the excluded
/// count travels with the value, and a window with no nonzero month reports
/// no MAPE at all.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTriple {
    pub rmse: f64,
    pub mae: f64,
    pub mape_pct: Option<f64>,
    pub mape_excluded: usize,
}

pub fn metrics(observed: &[f64], predicted: &[f64]) -> Result<MetricTriple, EvalError> {
    if observed.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            observed: observed.len(),
            predicted: predicted.len(),
        });
    }
    if observed.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = observed.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut pct = 0.0;
    let mut pct_n = 0usize;
    for (y, yhat) in observed.iter().zip(predicted) {
        let err = y - yhat;
        sq += err * err;
        abs += err.abs();
        if *y > 0.0 {
            pct += err.abs() / y;
            pct_n += 1;
        }
    }
    Ok(MetricTriple {
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        mape_pct: (pct_n > 0).then(|| 100.0 * pct / pct_n as f64),
        mape_excluded: observed.len() - pct_n,
    })
}

/// The four model classes of the comparison matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    Sarimax,
    Mpr,
    Ann,
    Xgb,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 4] = [
        ModelFamily::Sarimax,
        ModelFamily::Mpr,
        ModelFamily::Ann,
        ModelFamily::Xgb,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ModelFamily::Sarimax => "SARIMAX",
            ModelFamily::Mpr => "MPR",
            ModelFamily::Ann => "ANN",
            ModelFamily::Xgb => "XGB",
        }
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|f| f == self).unwrap()
    }
}

/// Variant 1 uses lagged climate only; variant 2 adds the prior month's
/// case count. SARIMAX runs climate-only (no case-lag variant is defined
/// for it).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    ClimateOnly,
    CaseLag,
}

impl Variant {
    pub fn number(&self) -> u8 {
        match self {
            Variant::ClimateOnly => 1,
            Variant::CaseLag => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordStatus {
    Ok,
    Diverged,
    Failed,
}

impl RecordStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Diverged => "diverged",
            RecordStatus::Failed => "failed",
        }
    }
}

/// Test-window forecast attached to a record, for the plot-data CSVs.
#[derive(Debug, Clone)]
pub struct ForecastSeries {
    pub months: Vec<MonthIndex>,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// One cell of the comparison matrix.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub division: String,
    pub family: ModelFamily,
    pub variant: Variant,
    pub feature_set: FeatureSet,
    /// Chosen order / tuned configuration, human readable.
    pub hyperparameters: String,
    pub n_params: usize,
    pub metrics: Option<MetricTriple>,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub ljung_box_p: Option<f64>,
    pub status: RecordStatus,
    /// Failure reason or divergence detail; empty when ok.
    pub note: String,
    pub forecast: Option<ForecastSeries>,
}

impl ResultRecord {
    fn canonical_key(&self) -> (usize, usize, u8) {
        let set_idx = FeatureSet::ALL
            .iter()
            .position(|s| *s == self.feature_set)
            .unwrap();
        (self.family.index(), set_idx, self.variant.number())
    }
}

/// Harness configuration; defaults reproduce the full experiment grid.
#[derive(Debug, Clone)]
pub struct MatrixConfig {
    pub lag_spec: LagSpec,
    pub test_months: usize,
    pub seed: u64,
    pub families: Vec<ModelFamily>,
    pub feature_sets: Vec<FeatureSet>,
    pub sarimax_grid: Vec<SarimaxOrder>,
    pub mlp_grid: Vec<mlp::MlpConfig>,
    /// Months carved off the end of the training window to drive ANN tuning.
    pub mlp_validation_months: usize,
    pub gbt_grid: Vec<gbt::GbtConfig>,
    pub gbt_cv_folds: usize,
    /// Feed predicted (instead of observed) prior-month cases through the
    /// test window for variant-2 models.
    pub recursive_case_lag: bool,
    /// A variant-2 run whose predictions exceed this multiple of the largest
    /// training count is recorded as diverged and excluded from selection.
    pub divergence_factor: f64,
}

impl MatrixConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            lag_spec: LagSpec::standard(),
            test_months: 9,
            seed,
            families: ModelFamily::ALL.to_vec(),
            feature_sets: FeatureSet::ALL.to_vec(),
            sarimax_grid: SarimaxOrder::standard_grid(),
            mlp_grid: mlp::MlpConfig::default_grid(seed, 20_000),
            mlp_validation_months: 6,
            gbt_grid: gbt::GbtConfig::default_grid(seed),
            gbt_cv_folds: 3,
            recursive_case_lag: false,
            divergence_factor: 10.0,
        }
    }

    /// Trimmed grids for tests and smoke runs.
    pub fn fast(seed: u64) -> Self {
        let mut config = Self::new(seed);
        config.sarimax_grid = vec![
            SarimaxOrder::new(0, 1, 1, 1, 0, 0, 12).unwrap(),
            SarimaxOrder::new(1, 1, 0, 1, 0, 0, 12).unwrap(),
        ];
        config.mlp_grid = vec![mlp::MlpConfig {
            hidden_layers: vec![8],
            learning_rate: 1e-2,
            l2_penalty: 1e-4,
            max_iterations: 1500,
            seed,
        }];
        config.gbt_grid = vec![
            gbt::GbtConfig {
                n_rounds: 60,
                learning_rate: 0.1,
                max_depth: 2,
                lambda: 1.0,
                gamma: 0.0,
                min_child_weight: 1.0,
                seed,
            },
            gbt::GbtConfig {
                n_rounds: 150,
                learning_rate: 0.1,
                max_depth: 3,
                lambda: 1.0,
                gamma: 0.0,
                min_child_weight: 1.0,
                seed,
            },
        ];
        config
    }
}

struct Cell {
    family: ModelFamily,
    variant: Variant,
    feature_set: FeatureSet,
}

/// Runs every (family, variant, feature set) combination on one division's
/// panel. Failures and divergences become records, never a panic or abort;
/// results are deterministic for a given seed.
pub fn run_matrix(panel: &AlignedPanel, config: &MatrixConfig) -> Vec<ResultRecord> {
    let mut cells = Vec::new();
    for &family in &config.families {
        let variants: &[Variant] = match family {
            ModelFamily::Sarimax => &[Variant::ClimateOnly],
            _ => &[Variant::ClimateOnly, Variant::CaseLag],
        };
        for &variant in variants {
            for &feature_set in &config.feature_sets {
                cells.push(Cell {
                    family,
                    variant,
                    feature_set,
                });
            }
        }
    }

    cells
        .par_iter()
        .map(|cell| run_cell(panel, config, cell))
        .collect()
}

fn failed_record(panel: &AlignedPanel, cell: &Cell, note: String) -> ResultRecord {
    ResultRecord {
        division: panel.division().to_string(),
        family: cell.family,
        variant: cell.variant,
        feature_set: cell.feature_set,
        hyperparameters: String::new(),
        n_params: 0,
        metrics: None,
        aic: None,
        bic: None,
        ljung_box_p: None,
        status: RecordStatus::Failed,
        note,
        forecast: None,
    }
}

fn run_cell(panel: &AlignedPanel, config: &MatrixConfig, cell: &Cell) -> ResultRecord {
    let lags = config
        .lag_spec
        .clone()
        .with_case_lag(cell.variant == Variant::CaseLag);
    let design = match build_design(panel, cell.feature_set, &lags) {
        Ok(d) => d,
        Err(e) => return failed_record(panel, cell, e.to_string()),
    };
    let (train, test) = match split_design(&design, config.test_months) {
        Ok(parts) => parts,
        Err(e) => return failed_record(panel, cell, e.to_string()),
    };

    // Stable per-cell seed, independent of execution order.
    let cell_seed = config
        .seed
        .wrapping_mul(1_000_003)
        .wrapping_add((cell.family.index() * 100 + cell.variant.number() as usize * 10) as u64)
        .wrapping_add(
            FeatureSet::ALL
                .iter()
                .position(|s| *s == cell.feature_set)
                .unwrap() as u64,
        );

    let outcome = match cell.family {
        ModelFamily::Sarimax => run_sarimax_cell(&train, &test, config),
        ModelFamily::Mpr => run_mpr_cell(&train, &test, config),
        ModelFamily::Ann => run_ann_cell(&train, &test, config, cell_seed),
        ModelFamily::Xgb => run_gbt_cell(&train, &test, config, cell_seed),
    };

    match outcome {
        Ok(partial) => {
            let mut record = ResultRecord {
                division: panel.division().to_string(),
                family: cell.family,
                variant: cell.variant,
                feature_set: cell.feature_set,
                hyperparameters: partial.hyperparameters,
                n_params: partial.n_params,
                metrics: None,
                aic: partial.aic,
                bic: partial.bic,
                ljung_box_p: partial.ljung_box_p,
                status: RecordStatus::Ok,
                note: String::new(),
                forecast: None,
            };
            let observed = test.y().to_vec();
            let predicted = partial.predicted;
            match metrics(&observed, &predicted) {
                Ok(m) => record.metrics = Some(m),
                Err(e) => {
                    record.status = RecordStatus::Failed;
                    record.note = e.to_string();
                    return record;
                }
            }
            // Explosive-forecast flagging: unrealistic test predictions are
            // kept in the matrix but excluded from model selection.
            let train_max = train.y().iter().cloned().fold(0.0_f64, f64::max).max(1.0);
            let pred_max = predicted.iter().cloned().fold(0.0_f64, f64::max);
            if !pred_max.is_finite() || pred_max > config.divergence_factor * train_max {
                record.status = RecordStatus::Diverged;
                record.note = format!(
                    "explosive forecast: max prediction {pred_max:.1} vs train max {train_max:.1}"
                );
            }
            record.forecast = Some(ForecastSeries {
                months: test.months().to_vec(),
                observed,
                predicted,
            });
            record
        }
        Err(CellFailure::Diverged(note)) => ResultRecord {
            status: RecordStatus::Diverged,
            note,
            ..failed_record(panel, cell, String::new())
        },
        Err(CellFailure::Other(note)) => failed_record(panel, cell, note),
    }
}

struct CellOutcome {
    hyperparameters: String,
    n_params: usize,
    predicted: Vec<f64>,
    aic: Option<f64>,
    bic: Option<f64>,
    ljung_box_p: Option<f64>,
}

enum CellFailure {
    Diverged(String),
    Other(String),
}

fn columns_of(design: &DesignMatrix) -> Vec<Vec<f64>> {
    (0..design.ncols()).map(|j| design.column(j)).collect()
}

fn run_sarimax_cell(
    train: &DesignMatrix,
    test: &DesignMatrix,
    config: &MatrixConfig,
) -> Result<CellOutcome, CellFailure> {
    let result = sarimax::grid_search(
        train.y(),
        test.y(),
        &columns_of(train),
        &columns_of(test),
        &config.sarimax_grid,
    )
    .map_err(|e| CellFailure::Other(e.to_string()))?;
    let best = result.best();
    Ok(CellOutcome {
        hyperparameters: best.order.to_string(),
        n_params: best.fit.n_params(),
        predicted: best.forecast.clone(),
        aic: Some(best.aic),
        bic: Some(best.bic),
        ljung_box_p: best.ljung_box_p,
    })
}

/// Walks the test window row by row so variant-2 predictions can feed the
/// previous month's prediction back into the case-lag column.
fn predict_rows<F>(
    test: &DesignMatrix,
    recursive: bool,
    mut predict_row: F,
) -> Result<Vec<f64>, String>
where
    F: FnMut(&[f64]) -> Result<f64, String>,
{
    let mut predictions: Vec<f64> = Vec::with_capacity(test.nrows());
    let case_col = test.case_lag_col();
    for i in 0..test.nrows() {
        let mut row = test.row(i).to_vec();
        if recursive && i > 0 {
            if let Some(c) = case_col {
                row[c] = predictions[i - 1].max(0.0);
            }
        }
        predictions.push(predict_row(&row)?);
    }
    Ok(predictions)
}

fn run_mpr_cell(
    train: &DesignMatrix,
    test: &DesignMatrix,
    config: &MatrixConfig,
) -> Result<CellOutcome, CellFailure> {
    let variant = if train.case_lag_col().is_some() {
        PoissonVariant::Mpr2
    } else {
        PoissonVariant::Mpr1
    };
    let fit = poisson::fit_irls(train, variant).map_err(|e| match e {
        poisson::PoissonError::Diverged => CellFailure::Diverged(e.to_string()),
        other => CellFailure::Other(other.to_string()),
    })?;

    let single = |row: &[f64]| -> Result<f64, String> {
        let probe = DesignMatrix::new(
            vec![test.months()[0]],
            test.col_names().to_vec(),
            row.to_vec(),
            vec![0.0],
            test.case_lag_col(),
        )
        .map_err(|e| e.to_string())?;
        poisson::predict(&fit, &probe)
            .map(|mu| mu[0])
            .map_err(|e| e.to_string())
    };
    let predicted =
        predict_rows(test, config.recursive_case_lag, single).map_err(CellFailure::Other)?;

    let (aic, bic) = diagnostics::aic_bic(fit.loglik, fit.n_params(), train.nrows());
    let train_mu = poisson::predict(&fit, train).map_err(|e| CellFailure::Other(e.to_string()))?;
    let pearson_residuals: Vec<f64> = train
        .y()
        .iter()
        .zip(&train_mu)
        .map(|(y, mu)| (y - mu) / mu.sqrt())
        .collect();
    let ljung_box_p = diagnostics::ljung_box(&pearson_residuals, 12, fit.n_params())
        .ok()
        .map(|r| r.p);

    let coef_summary = fit
        .case_lag_coef
        .map(|c| format!("c={c:.3e}"))
        .unwrap_or_default();
    Ok(CellOutcome {
        hyperparameters: format!("log-link IRLS {coef_summary}").trim().to_string(),
        n_params: fit.n_params(),
        predicted,
        aic: Some(aic),
        bic: Some(bic),
        ljung_box_p,
    })
}

fn design_rows(design: &DesignMatrix) -> Vec<Vec<f64>> {
    (0..design.nrows())
        .map(|i| design.row(i).to_vec())
        .collect()
}

fn run_ann_cell(
    train: &DesignMatrix,
    test: &DesignMatrix,
    config: &MatrixConfig,
    cell_seed: u64,
) -> Result<CellOutcome, CellFailure> {
    let rows = design_rows(train);
    let y = train.y();
    let validation = config.mlp_validation_months.min(train.nrows() / 3).max(2);
    let cut = train.nrows() - validation;

    let grid: Vec<mlp::MlpConfig> = config
        .mlp_grid
        .iter()
        .map(|c| mlp::MlpConfig {
            seed: cell_seed,
            ..c.clone()
        })
        .collect();
    let (winner, _) = mlp::tune(&grid, &rows[..cut], &y[..cut], &rows[cut..], &y[cut..])
        .map_err(|e| CellFailure::Other(e.to_string()))?;
    // Refit the winning configuration on the full training window.
    let network = mlp::train(&winner, &rows, y).map_err(|e| CellFailure::Other(e.to_string()))?;

    let predicted = predict_rows(test, config.recursive_case_lag, |row| {
        mlp::forward(&network, row)
            .map(|v| v.max(0.0))
            .map_err(|e| e.to_string())
    })
    .map_err(CellFailure::Other)?;

    Ok(CellOutcome {
        hyperparameters: format!(
            "hidden={:?} lr={} l2={}",
            winner.hidden_layers, winner.learning_rate, winner.l2_penalty
        ),
        n_params: network.parameter_count(),
        predicted,
        aic: None,
        bic: None,
        ljung_box_p: None,
    })
}

fn run_gbt_cell(
    train: &DesignMatrix,
    test: &DesignMatrix,
    config: &MatrixConfig,
    cell_seed: u64,
) -> Result<CellOutcome, CellFailure> {
    let rows = design_rows(train);
    let y = train.y();
    let grid: Vec<gbt::GbtConfig> = config
        .gbt_grid
        .iter()
        .map(|c| gbt::GbtConfig {
            seed: cell_seed,
            ..c.clone()
        })
        .collect();
    let winner = gbt::grid_search_cv(&grid, &rows, y, config.gbt_cv_folds)
        .map_err(|e| CellFailure::Other(e.to_string()))?;
    let model = gbt::boost(&rows, y, &winner).map_err(|e| CellFailure::Other(e.to_string()))?;

    let predicted = predict_rows(test, config.recursive_case_lag, |row| {
        model
            .predict_row(row)
            .map(|v| v.max(0.0))
            .map_err(|e| e.to_string())
    })
    .map_err(CellFailure::Other)?;

    let n_params = model
        .trees
        .iter()
        .map(|t| count_leaves(&t.root))
        .sum::<usize>();
    Ok(CellOutcome {
        hyperparameters: format!(
            "rounds={} eta={} depth={} lambda={}",
            winner.n_rounds, winner.learning_rate, winner.max_depth, winner.lambda
        ),
        n_params,
        predicted,
        aic: None,
        bic: None,
        ljung_box_p: None,
    })
}

fn count_leaves(node: &gbt::TreeNode) -> usize {
    match node {
        gbt::TreeNode::Leaf { .. } => 1,
        gbt::TreeNode::Split { left, right, .. } => count_leaves(left) + count_leaves(right),
    }
}

/// Winners at each aggregation level, with exclusions listed.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    /// Best ok record within each (family, feature set) pair.
    pub per_family_set: Vec<ResultRecord>,
    /// Best record per family across feature sets.
    pub per_family: Vec<ResultRecord>,
    /// Overall champion for the division.
    pub champion: ResultRecord,
    /// Diverged and failed records, excluded from the rankings above.
    pub excluded: Vec<ResultRecord>,
}

fn better_of<'a>(a: &'a ResultRecord, b: &'a ResultRecord) -> &'a ResultRecord {
    let ka = selection_key(a);
    let kb = selection_key(b);
    if kb < ka {
        b
    } else {
        a
    }
}

fn selection_key(r: &ResultRecord) -> (f64, f64, usize, (usize, usize, u8)) {
    let m = r.metrics.expect("ok records carry metrics");
    (m.rmse, m.mae, r.n_params, r.canonical_key())
}

/// Picks per-(family, set) winners by test RMSE, then per-family winners,
/// then the division champion. Ties break toward lower MAE, then fewer
/// parameters. Diverged and failed records are excluded and listed.
pub fn select_best(records: &[ResultRecord]) -> Result<SelectionReport, EvalError> {
    let mut ok: Vec<&ResultRecord> = records
        .iter()
        .filter(|r| r.status == RecordStatus::Ok && r.metrics.is_some())
        .collect();
    if ok.is_empty() {
        return Err(EvalError::NoValidRecords);
    }
    // Canonical scan order makes the output independent of input order.
    ok.sort_by_key(|r| r.canonical_key());

    let mut per_family_set: Vec<ResultRecord> = Vec::new();
    for family in ModelFamily::ALL {
        for set in FeatureSet::ALL {
            let winner = ok
                .iter()
                .filter(|r| r.family == family && r.feature_set == set)
                .fold(None::<&ResultRecord>, |best, r| {
                    Some(match best {
                        None => r,
                        Some(b) => better_of(b, r),
                    })
                });
            if let Some(w) = winner {
                per_family_set.push(w.clone());
            }
        }
    }

    let mut per_family: Vec<ResultRecord> = Vec::new();
    for family in ModelFamily::ALL {
        let winner = per_family_set.iter().filter(|r| r.family == family).fold(
            None::<&ResultRecord>,
            |best, r| {
                Some(match best {
                    None => r,
                    Some(b) => better_of(b, r),
                })
            },
        );
        if let Some(w) = winner {
            per_family.push(w.clone());
        }
    }

    let champion = per_family
        .iter()
        .fold(None::<&ResultRecord>, |best, r| {
            Some(match best {
                None => r,
                Some(b) => better_of(b, r),
            })
        })
        .expect("nonempty by construction")
        .clone();

    let excluded = records
        .iter()
        .filter(|r| r.status != RecordStatus::Ok)
        .cloned()
        .collect();

    Ok(SelectionReport {
        per_family_set,
        per_family,
        champion,
        excluded,
    })
}
