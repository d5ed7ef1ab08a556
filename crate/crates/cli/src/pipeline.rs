//! Stage implementations and the end-to-end pipeline:
//! align -> decompose -> correlate -> diagnose -> evaluate -> select,
//! writing one CSV set per division plus a run manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use lagcast::correlation::{best_lags, lagged_matrix};
use lagcast::data::{
    align_panel, build_design, read_cases_csv, read_climate_csv, split_design, AlignedPanel,
    ClimateVar, DesignMatrix,
};
use lagcast::diagnostics::{acf, pacf};
use lagcast::evaluation::{
    run_matrix, select_best, ModelFamily, ResultRecord, SelectionReport,
};
use lagcast::mlp;
use lagcast::poisson::{self, PoissonVariant};
use lagcast::sarimax;
use lagcast::stl::stl_decompose;

use crate::config::{DivisionInput, RunConfig};
use crate::fetch::sha256_hex;
use crate::output;
use crate::CliError;

pub fn load_panel(input: &DivisionInput) -> Result<AlignedPanel, CliError> {
    let cases_file = File::open(&input.cases_file)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", input.cases_file.display())))?;
    let cases = read_cases_csv(cases_file, &input.label)?;
    let climate_file = File::open(&input.climate_file).map_err(|e| {
        CliError::Data(format!("cannot open {}: {e}", input.climate_file.display()))
    })?;
    let climate = read_climate_csv(climate_file)?;
    Ok(align_panel(&cases, &climate)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

pub fn stage_decompose(
    panel: &AlignedPanel,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let components = stl_decompose(&panel.cases_f64(), 12, &config.stl)?;
    let path = out_dir.join(format!("{}_stl.csv", panel.division()));
    output::write_stl_csv(panel, &components, create(&path)?)?;
    Ok(path)
}

pub fn stage_correlate(
    panel: &AlignedPanel,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let matrix = lagged_matrix(panel, config.correlation_max_lag)?;
    let summary = best_lags(&matrix);
    let heatmap = out_dir.join(format!("{}_correlation.csv", panel.division()));
    output::write_correlation_csv(&matrix, create(&heatmap)?)?;
    let best = out_dir.join(format!("{}_best_lags.csv", panel.division()));
    output::write_best_lags_csv(&summary, create(&best)?)?;
    Ok(vec![heatmap, best])
}

pub fn stage_diagnose(
    panel: &AlignedPanel,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<PathBuf, CliError> {
    let y = panel.cases_f64();
    let max_lag = config.acf_lags.min(y.len().saturating_sub(2));
    let acf_values = acf(&y, max_lag)?;
    let pacf_values = pacf(&y, max_lag)?;
    let path = out_dir.join(format!("{}_acf_pacf.csv", panel.division()));
    output::write_acf_pacf_csv(&acf_values.values, &pacf_values, create(&path)?)?;
    Ok(path)
}

fn design_for(
    panel: &AlignedPanel,
    set: lagcast::data::FeatureSet,
    config: &RunConfig,
    case_lag: bool,
) -> Result<(DesignMatrix, DesignMatrix), CliError> {
    let lags = config.lag_spec.clone().with_case_lag(case_lag);
    let design = build_design(panel, set, &lags)?;
    Ok(split_design(&design, config.test_months)?)
}

fn columns_of(design: &DesignMatrix) -> Vec<Vec<f64>> {
    (0..design.ncols()).map(|j| design.column(j)).collect()
}

fn design_rows(design: &DesignMatrix) -> Vec<Vec<f64>> {
    (0..design.nrows())
        .map(|i| design.row(i).to_vec())
        .collect()
}

/// Family-specific artifacts: grid reports, coefficient tables, serialized
/// networks and ensembles.
pub fn stage_fit(
    panel: &AlignedPanel,
    family: ModelFamily,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    let division = panel.division();
    let mut files = Vec::new();
    match family {
        ModelFamily::Sarimax => {
            for &set in &config.feature_sets {
                let (train, test) = design_for(panel, set, config, false)?;
                let result = sarimax::grid_search(
                    train.y(),
                    test.y(),
                    &columns_of(&train),
                    &columns_of(&test),
                    &config.sarimax_grid,
                )?;
                let path = out_dir.join(format!("{division}_sarimax_grid_{}.csv", set.label()));
                output::write_sarimax_grid_csv(set.label(), &result, create(&path)?)?;
                files.push(path);
            }
        }
        ModelFamily::Mpr => {
            for &set in &config.feature_sets {
                for case_lag in [false, true] {
                    let (train, _) = design_for(panel, set, config, case_lag)?;
                    let variant = if case_lag {
                        PoissonVariant::Mpr2
                    } else {
                        PoissonVariant::Mpr1
                    };
                    let fit = match poisson::fit_irls(&train, variant) {
                        Ok(fit) => fit,
                        Err(poisson::PoissonError::Diverged) => continue, // recorded by evaluate
                        Err(e) => return Err(e.into()),
                    };
                    let path = out_dir.join(format!(
                        "{division}_mpr{}_coefficients_{}.csv",
                        if case_lag { 2 } else { 1 },
                        set.label()
                    ));
                    output::write_poisson_coefficients_csv(&fit, create(&path)?)?;
                    files.push(path);
                }
            }
        }
        ModelFamily::Ann => {
            for &set in &config.feature_sets {
                for case_lag in [false, true] {
                    let (train, _) = design_for(panel, set, config, case_lag)?;
                    let rows = design_rows(&train);
                    let y = train.y();
                    let validation = config.mlp_validation_months.min(train.nrows() / 3).max(2);
                    let cut = train.nrows() - validation;
                    let grid = mlp::MlpConfig::default_grid(config.seed, config.mlp_iterations);
                    let (winner, _) =
                        mlp::tune(&grid, &rows[..cut], &y[..cut], &rows[cut..], &y[cut..])?;
                    let network = mlp::train(&winner, &rows, y)?;
                    let path = out_dir.join(format!(
                        "{division}_ann{}_network_{}.json",
                        if case_lag { 2 } else { 1 },
                        set.label()
                    ));
                    let mut w = create(&path)?;
                    w.write_all(network.to_json().as_bytes())?;
                    files.push(path);
                }
            }
        }
        ModelFamily::Xgb => {
            for &set in &config.feature_sets {
                for case_lag in [false, true] {
                    let (train, _) = design_for(panel, set, config, case_lag)?;
                    let rows = design_rows(&train);
                    let grid = lagcast::gbt::GbtConfig::default_grid(config.seed);
                    let winner =
                        lagcast::gbt::grid_search_cv(&grid, &rows, train.y(), config.gbt_cv_folds)?;
                    let model = lagcast::gbt::boost(&rows, train.y(), &winner)?;
                    let suffix = if case_lag { 2 } else { 1 };
                    let json_path = out_dir.join(format!(
                        "{division}_xgb{suffix}_ensemble_{}.json",
                        set.label()
                    ));
                    let mut w = create(&json_path)?;
                    w.write_all(model.to_json().as_bytes())?;
                    files.push(json_path);
                    let gain_path = out_dir.join(format!(
                        "{division}_xgb{suffix}_feature_gain_{}.csv",
                        set.label()
                    ));
                    output::write_feature_importance_csv(
                        train.col_names(),
                        &model.feature_importance(),
                        create(&gain_path)?,
                    )?;
                    files.push(gain_path);
                }
            }
        }
    }
    Ok(files)
}

/// Runs the comparison matrix and writes matrix, summary, and per-winner
/// forecast CSVs.
pub fn stage_evaluate(
    panel: &AlignedPanel,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<(Vec<ResultRecord>, SelectionReport, Vec<PathBuf>), CliError> {
    let records = run_matrix(panel, &config.matrix_config());
    let report = select_best(&records)?;
    let division = panel.division();
    let mut files = Vec::new();

    let matrix_path = out_dir.join(format!("{division}_matrix.csv"));
    output::write_matrix_csv(&records, create(&matrix_path)?)?;
    files.push(matrix_path);

    let summary_path = out_dir.join(format!("{division}_summary.csv"));
    output::write_summary_csv(&report, create(&summary_path)?)?;
    files.push(summary_path);

    for winner in &report.per_family {
        if let Some(series) = &winner.forecast {
            let path = out_dir.join(format!(
                "{division}_forecast_{}.csv",
                winner.family.label().to_lowercase()
            ));
            output::write_forecast_csv(series, create(&path)?)?;
            files.push(path);
        }
    }
    Ok((records, report, files))
}

pub struct PipelineSummary {
    pub champions: Vec<ResultRecord>,
    pub files: Vec<PathBuf>,
    pub wall_time_ms: u128,
}

/// The full run. Any stage error aborts with the stage name and cause.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineSummary, CliError> {
    if config.divisions.is_empty() {
        return Err(CliError::Config(
            "no divisions configured; add `division = NAME` plus its input files".into(),
        ));
    }
    let started = Instant::now();
    let out_dir = &config.output_dir;
    std::fs::create_dir_all(out_dir)?;

    let mut files = Vec::new();
    let mut champions = Vec::new();
    let mut input_hashes = Vec::new();

    for input in &config.divisions {
        for (role, path) in [
            ("cases", &input.cases_file),
            ("climate", &input.climate_file),
        ] {
            let bytes = std::fs::read(path).map_err(|e| {
                CliError::Data(format!("cannot read {}: {e}", path.display())).at_stage("align")
            })?;
            input_hashes.push((format!("{}.{role}", input.label), sha256_hex(&bytes)));
        }
        let panel = load_panel(input).map_err(|e| e.at_stage("align"))?;

        files.push(stage_decompose(&panel, config, out_dir).map_err(|e| e.at_stage("decompose"))?);
        files
            .extend(stage_correlate(&panel, config, out_dir).map_err(|e| e.at_stage("correlate"))?);
        files.push(stage_diagnose(&panel, config, out_dir).map_err(|e| e.at_stage("diagnose"))?);
        let (_, report, eval_files) =
            stage_evaluate(&panel, config, out_dir).map_err(|e| e.at_stage("evaluate"))?;
        files.extend(eval_files);
        champions.push(report.champion.clone());
    }

    let champions_path = out_dir.join("champions.csv");
    output::write_matrix_csv(&champions, create(&champions_path)?)?;
    files.push(champions_path);

    let wall_time_ms = started.elapsed().as_millis();
    let manifest_path = out_dir.join("run_manifest.txt");
    write_manifest(config, &input_hashes, wall_time_ms, create(&manifest_path)?)?;
    files.push(manifest_path);

    Ok(PipelineSummary {
        champions,
        files,
        wall_time_ms,
    })
}

/// The manifest echoes the fully resolved configuration in the config-file
/// grammar (comments carry run metadata), so it can be replayed directly.
fn write_manifest<W: Write>(
    config: &RunConfig,
    input_hashes: &[(String, String)],
    wall_time_ms: u128,
    mut w: W,
) -> Result<(), CliError> {
    writeln!(w, "# lagcast run manifest (replayable as a config file)")?;
    writeln!(w, "# tool_version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# wall_time_ms = {wall_time_ms}")?;
    for (key, hash) in input_hashes {
        writeln!(w, "# input_sha256.{key} = {hash}")?;
    }
    for input in &config.divisions {
        writeln!(w, "division = {}", input.label)?;
        writeln!(
            w,
            "cases_file.{} = {}",
            input.label,
            input.cases_file.display()
        )?;
        writeln!(
            w,
            "climate_file.{} = {}",
            input.label,
            input.climate_file.display()
        )?;
    }
    writeln!(w, "output_dir = {}", config.output_dir.display())?;
    writeln!(w, "seed = {}", config.seed)?;
    writeln!(w, "test_months = {}", config.test_months)?;
    writeln!(w, "max_lag = {}", config.correlation_max_lag)?;
    writeln!(w, "acf_lags = {}", config.acf_lags)?;
    for var in ClimateVar::ALL {
        writeln!(w, "lag.{} = {}", var.name(), config.lag_spec.lag(var))?;
    }
    for set in &config.feature_sets {
        writeln!(w, "feature_set = {}", set.label())?;
    }
    for family in &config.families {
        writeln!(w, "family = {}", family.label().to_lowercase())?;
    }
    for order in &config.sarimax_grid {
        writeln!(w, "sarimax_order = {order}")?;
    }
    writeln!(w, "mlp_iterations = {}", config.mlp_iterations)?;
    writeln!(
        w,
        "mlp_validation_months = {}",
        config.mlp_validation_months
    )?;
    writeln!(w, "gbt_cv_folds = {}", config.gbt_cv_folds)?;
    writeln!(w, "recursive_case_lag = {}", config.recursive_case_lag)?;
    writeln!(w, "divergence_factor = {}", config.divergence_factor)?;
    writeln!(w, "stl_seasonal_window = {}", config.stl.seasonal_window)?;
    writeln!(w, "stl_trend_window = {}", config.stl.trend_window)?;
    writeln!(w, "stl_inner = {}", config.stl.inner_iterations)?;
    writeln!(w, "stl_robust = {}", config.stl.robust_iterations)?;
    writeln!(w, "stl_degree = {}", config.stl.local_degree)?;
    if let Some(url) = &config.fetch_url {
        writeln!(w, "fetch_url = {url}")?;
    }
    Ok(())
}

/// Writes the bundled synthetic fixture as input CSVs for a division.
pub fn write_fixture(
    division: &str,
    months: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf), CliError> {
    let panel = lagcast::synthetic::generate_panel(division, months, seed);
    let cases_path = out_dir.join(format!("{division}_cases.csv"));
    let climate_path = out_dir.join(format!("{division}_climate.csv"));
    lagcast::data::write_cases_csv(&panel, create(&cases_path)?)?;
    lagcast::data::write_climate_csv(&panel, create(&climate_path)?)?;
    Ok((cases_path, climate_path))
}
