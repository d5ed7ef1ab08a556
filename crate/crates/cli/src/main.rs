//! `lagcast` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lagcast_cli::config::{RawConfig, RunConfig};
use lagcast_cli::evaluation_family;
use lagcast_cli::fetch::{fetch, FileKind};
use lagcast_cli::pipeline;
use lagcast_cli::CliError;

#[derive(Parser)]
#[command(
    name = "lagcast",
    version,
    about = "Climate-lagged monthly case forecasting toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOptions {
    /// Flat key=value config file (`#` comments, repeated keys form lists).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Division label; repeat for several (requires per-division file keys
    /// in the config unless --cases-file/--climate-file are given).
    #[arg(long)]
    division: Vec<String>,
    /// Cases CSV for a single --division.
    #[arg(long)]
    cases_file: Option<PathBuf>,
    /// Climate CSV for a single --division.
    #[arg(long)]
    climate_file: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Global random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Test window length in months.
    #[arg(long)]
    test_months: Option<usize>,
    /// Extra `key=value` override; repeatable, wins over the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Download a dataset file, validate its schema, and checksum it.
    Fetch {
        /// Source URL (http or https).
        #[arg(long)]
        url: String,
        /// Destination path.
        #[arg(long)]
        dest: PathBuf,
        /// Schema to validate against: cases, climate, or auto.
        #[arg(long, default_value = "auto")]
        kind: String,
        /// Expected SHA-256 (hex), verified when given.
        #[arg(long)]
        sha256: Option<String>,
    },
    /// Write the bundled synthetic fixture as input CSVs.
    Fixture {
        #[arg(long, default_value = "fixture")]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 46)]
        months: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Division labels to generate (each gets its own seeded panel).
        #[arg(long, default_values_t = [String::from("alpha")])]
        division: Vec<String>,
    },
    /// Seasonal-trend decomposition CSV per division.
    Decompose(CommonOptions),
    /// Lagged correlation heatmap and best-lag CSVs per division.
    Correlate(CommonOptions),
    /// ACF/PACF CSV per division.
    Diagnose(CommonOptions),
    /// Fit one model family and write its artifacts.
    Fit {
        /// Model family: sarimax, mpr, ann, or xgb.
        family: String,
        #[command(flatten)]
        common: CommonOptions,
    },
    /// Run the model x feature-set matrix and champion selection.
    Evaluate(CommonOptions),
    /// Full pipeline: decompose, correlate, diagnose, evaluate, manifest.
    Pipeline(CommonOptions),
}

fn overrides_from(common: &CommonOptions) -> Result<RawConfig, CliError> {
    let mut raw = RawConfig::default();
    for label in &common.division {
        raw.set("division", label.clone());
    }
    if common.cases_file.is_some() || common.climate_file.is_some() {
        if common.division.len() != 1 {
            return Err(CliError::Config(
                "--cases-file/--climate-file require exactly one --division".into(),
            ));
        }
        let label = &common.division[0];
        if let Some(path) = &common.cases_file {
            raw.set(&format!("cases_file.{label}"), path.display().to_string());
        }
        if let Some(path) = &common.climate_file {
            raw.set(&format!("climate_file.{label}"), path.display().to_string());
        }
    }
    if let Some(dir) = &common.output_dir {
        raw.set("output_dir", dir.display().to_string());
    }
    if let Some(seed) = common.seed {
        raw.set("seed", seed.to_string());
    }
    if let Some(months) = common.test_months {
        raw.set("test_months", months.to_string());
    }
    for pair in &common.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{pair}`")))?;
        raw.set(key.trim(), value.trim().to_string());
    }
    Ok(raw)
}

fn resolve(common: &CommonOptions) -> Result<RunConfig, CliError> {
    let overrides = overrides_from(common)?;
    RunConfig::resolve(common.config.as_deref(), &overrides)
}

fn require_divisions(config: &RunConfig) -> Result<(), CliError> {
    if config.divisions.is_empty() {
        return Err(CliError::Config(
            "no divisions configured; pass --division with file flags or a config file".into(),
        ));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fetch {
            url,
            dest,
            kind,
            sha256,
        } => {
            let kind = match kind.as_str() {
                "cases" => FileKind::Cases,
                "climate" => FileKind::Climate,
                "auto" => FileKind::Auto,
                other => {
                    return Err(CliError::Config(format!(
                        "unknown kind `{other}` (expected cases, climate, or auto)"
                    )))
                }
            };
            let outcome = fetch(&url, &dest, kind, sha256.as_deref())?;
            println!(
                "{} {} ({} bytes, sha256 {})",
                if outcome.written {
                    "fetched"
                } else {
                    "unchanged"
                },
                dest.display(),
                outcome.bytes,
                outcome.sha256
            );
        }
        Command::Fixture {
            output_dir,
            months,
            seed,
            division,
        } => {
            for (idx, label) in division.iter().enumerate() {
                let (cases, climate) =
                    pipeline::write_fixture(label, months, seed + idx as u64, &output_dir)?;
                println!("wrote {} and {}", cases.display(), climate.display());
            }
        }
        Command::Decompose(common) => {
            let config = resolve(&common)?;
            require_divisions(&config)?;
            std::fs::create_dir_all(&config.output_dir)?;
            for input in &config.divisions {
                let panel = pipeline::load_panel(input)?;
                let path = pipeline::stage_decompose(&panel, &config, &config.output_dir)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Correlate(common) => {
            let config = resolve(&common)?;
            require_divisions(&config)?;
            std::fs::create_dir_all(&config.output_dir)?;
            for input in &config.divisions {
                let panel = pipeline::load_panel(input)?;
                for path in pipeline::stage_correlate(&panel, &config, &config.output_dir)? {
                    println!("wrote {}", path.display());
                }
            }
        }
        Command::Diagnose(common) => {
            let config = resolve(&common)?;
            require_divisions(&config)?;
            std::fs::create_dir_all(&config.output_dir)?;
            for input in &config.divisions {
                let panel = pipeline::load_panel(input)?;
                let path = pipeline::stage_diagnose(&panel, &config, &config.output_dir)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Fit { family, common } => {
            let family = evaluation_family(&family)?;
            let config = resolve(&common)?;
            require_divisions(&config)?;
            std::fs::create_dir_all(&config.output_dir)?;
            for input in &config.divisions {
                let panel = pipeline::load_panel(input)?;
                for path in pipeline::stage_fit(&panel, family, &config, &config.output_dir)? {
                    println!("wrote {}", path.display());
                }
            }
        }
        Command::Evaluate(common) => {
            let config = resolve(&common)?;
            require_divisions(&config)?;
            std::fs::create_dir_all(&config.output_dir)?;
            for input in &config.divisions {
                let panel = pipeline::load_panel(input)?;
                let (_, report, files) =
                    pipeline::stage_evaluate(&panel, &config, &config.output_dir)?;
                for path in files {
                    println!("wrote {}", path.display());
                }
                let champion = &report.champion;
                println!(
                    "{} champion: {}-{} {} (RMSE {:.2})",
                    input.label,
                    champion.family.label(),
                    champion.variant.number(),
                    champion.feature_set.label(),
                    champion.metrics.map(|m| m.rmse).unwrap_or(f64::NAN)
                );
            }
        }
        Command::Pipeline(common) => {
            let config = resolve(&common)?;
            let summary = pipeline::run_pipeline(&config)?;
            for champion in &summary.champions {
                println!(
                    "{} champion: {}-{} {} (RMSE {:.2})",
                    champion.division,
                    champion.family.label(),
                    champion.variant.number(),
                    champion.feature_set.label(),
                    champion.metrics.map(|m| m.rmse).unwrap_or(f64::NAN)
                );
            }
            println!(
                "{} files in {} ({} ms)",
                summary.files.len(),
                config.output_dir.display(),
                summary.wall_time_ms
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
