//! CSV emission for every stage. All files are UTF-8 with a header row;
//! absent values (for example MAPE over an all-zero window) are empty cells.

use std::io::Write;

use lagcast::correlation::{BestLagSummary, LagCorrelationMatrix};
use lagcast::data::AlignedPanel;
use lagcast::evaluation::{ForecastSeries, ResultRecord, SelectionReport};
use lagcast::poisson::PoissonFit;
use lagcast::sarimax::GridSearchResult;
use lagcast::stl::StlComponents;

fn opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_stl_csv<W: Write>(
    panel: &AlignedPanel,
    components: &StlComponents,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "month,observed,trend,seasonal,remainder")?;
    for (i, month) in panel.months().iter().enumerate() {
        writeln!(
            w,
            "{month},{},{},{},{}",
            panel.cases()[i],
            components.trend[i],
            components.seasonal[i],
            components.remainder[i]
        )?;
    }
    Ok(())
}

pub fn write_correlation_csv<W: Write>(
    matrix: &LagCorrelationMatrix,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "variable,lag,r")?;
    for (variable, row) in matrix.variables.iter().zip(&matrix.r) {
        for (lag, r) in row.iter().enumerate() {
            writeln!(w, "{},{lag},{r}", variable.name())?;
        }
    }
    Ok(())
}

pub fn write_best_lags_csv<W: Write>(summary: &BestLagSummary, mut w: W) -> std::io::Result<()> {
    writeln!(w, "variable,best_lag,r")?;
    for entry in &summary.entries {
        writeln!(w, "{},{},{}", entry.variable.name(), entry.lag, entry.r)?;
    }
    Ok(())
}

pub fn write_acf_pacf_csv<W: Write>(acf: &[f64], pacf: &[f64], mut w: W) -> std::io::Result<()> {
    writeln!(w, "lag,acf,pacf")?;
    for (k, value) in pacf.iter().enumerate() {
        writeln!(w, "{},{},{}", k + 1, acf[k + 1], value)?;
    }
    Ok(())
}

/// Grid-search report: one row per candidate, ranked by test RMSE, followed
/// by the candidates that failed to fit.
pub fn write_sarimax_grid_csv<W: Write>(
    feature_set: &str,
    result: &GridSearchResult,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(
        w,
        "feature_set,order,rmse,mae,mape,aic,bic,ljung_box_p,status"
    )?;
    for entry in &result.ranked {
        writeln!(
            w,
            "{feature_set},{},{},{},{},{},{},{},ok",
            entry.order,
            entry.metrics.rmse,
            entry.metrics.mae,
            opt(entry.metrics.mape_pct),
            entry.aic,
            entry.bic,
            opt(entry.ljung_box_p),
        )?;
    }
    for (order, reason) in &result.failed {
        writeln!(
            w,
            "{feature_set},{order},,,,,,,failed: {}",
            reason.replace(',', ";")
        )?;
    }
    Ok(())
}

pub fn write_poisson_coefficients_csv<W: Write>(fit: &PoissonFit, mut w: W) -> std::io::Result<()> {
    writeln!(w, "term,estimate_standardized,estimate_raw")?;
    writeln!(w, "intercept,{},{}", fit.beta0_std, fit.beta0)?;
    let mut slope_at = 0usize;
    for name in &fit.col_names {
        if name == "cases_lag1" {
            continue;
        }
        writeln!(
            w,
            "{name},{},{}",
            fit.betas_std[slope_at], fit.betas[slope_at]
        )?;
        slope_at += 1;
    }
    if let (Some(std), Some(raw)) = (fit.case_lag_coef_std, fit.case_lag_coef) {
        writeln!(w, "cases_lag1,{std},{raw}")?;
    }
    Ok(())
}

pub fn write_matrix_csv<W: Write>(records: &[ResultRecord], mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "division,family,variant,feature_set,hyperparameters,status,rmse,mae,mape_pct,mape_excluded,aic,bic,ljung_box_p,n_params,note"
    )?;
    for r in records {
        let m = r.metrics;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.division,
            r.family.label(),
            r.variant.number(),
            r.feature_set.label(),
            r.hyperparameters.replace(',', ";"),
            r.status.label(),
            opt(m.map(|m| m.rmse)),
            opt(m.map(|m| m.mae)),
            opt(m.and_then(|m| m.mape_pct)),
            m.map(|m| m.mape_excluded.to_string()).unwrap_or_default(),
            opt(r.aic),
            opt(r.bic),
            opt(r.ljung_box_p),
            r.n_params,
            r.note.replace(',', ";")
        )?;
    }
    Ok(())
}

/// Per-division summary: the per-(family, set) winners with a champion mark.
pub fn write_summary_csv<W: Write>(report: &SelectionReport, mut w: W) -> std::io::Result<()> {
    writeln!(
        w,
        "family,variant,feature_set,model,rmse,mae,mape_pct,aic,bic,ljung_box_p,champion"
    )?;
    let is_champion = |r: &ResultRecord| {
        r.family == report.champion.family
            && r.variant == report.champion.variant
            && r.feature_set == report.champion.feature_set
    };
    for r in &report.per_family_set {
        let m = r.metrics.expect("winners carry metrics");
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.family.label(),
            r.variant.number(),
            r.feature_set.label(),
            r.hyperparameters.replace(',', ";"),
            m.rmse,
            m.mae,
            opt(m.mape_pct),
            opt(r.aic),
            opt(r.bic),
            opt(r.ljung_box_p),
            if is_champion(r) { "yes" } else { "" }
        )?;
    }
    Ok(())
}

pub fn write_forecast_csv<W: Write>(series: &ForecastSeries, mut w: W) -> std::io::Result<()> {
    writeln!(w, "month,observed,predicted")?;
    for i in 0..series.months.len() {
        writeln!(
            w,
            "{},{},{}",
            series.months[i], series.observed[i], series.predicted[i]
        )?;
    }
    Ok(())
}

pub fn write_feature_importance_csv<W: Write>(
    names: &[String],
    gains: &[f64],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "feature,total_gain")?;
    for (name, gain) in names.iter().zip(gains) {
        writeln!(w, "{name},{gain}")?;
    }
    Ok(())
}
