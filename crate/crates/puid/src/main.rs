//! Command-line surface: data generation and preparation, sensitivity
//! estimation, training, evaluation, experiment grids, and report emission.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use puid::bounds::{fit_propensity, PropensityConfig, PropensityMode};
use puid::data::{apply_mask, load_triples, split, write_triples, Dataset, FileFormat, MaskMode};
use puid::grid::{emit_report, rows_from_csv, rows_to_csv, run_experiment_grid, ExperimentGrid, ReportFormat};
use puid::math::fnv1a_hex;
use puid::metrics::evaluate;
use puid::model::{ErrorType, FactorModel, ModelConfig};
use puid::synth::{generate_synthetic, write_ground_truth};
use puid::train::{prepare_artifacts, train, Estimator, TrainConfig};
use puid::{PuidError, Result};

#[derive(Parser)]
#[command(name = "puid", about = "Confounding-robust rating prediction on MNAR feedback", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Triple,
    Coat,
}

impl From<FormatArg> for FileFormat {
    fn from(f: FormatArg) -> FileFormat {
        match f {
            FormatArg::Triple => FileFormat::TripleTsv,
            FormatArg::Coat => FileFormat::CoatMatrix,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ErrorTypeArg {
    Absolute,
    Squared,
}

impl From<ErrorTypeArg> for ErrorType {
    fn from(e: ErrorTypeArg) -> ErrorType {
        match e {
            ErrorTypeArg::Absolute => ErrorType::Absolute,
            ErrorTypeArg::Squared => ErrorType::Squared,
        }
    }
}

/// Flags shared by every training-like command.
#[derive(Args, Clone)]
struct TrainFlags {
    #[arg(long, default_value = "puid_ips")]
    estimator: String,
    #[arg(long, default_value_t = 2.0)]
    gamma_max: f64,
    /// Uniform bound for the rd/brd baselines (defaults to --gamma-max).
    #[arg(long)]
    gamma_global: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 8)]
    bins_user: usize,
    #[arg(long, default_value_t = 8)]
    bins_item: usize,
    #[arg(long, default_value_t = 40)]
    min_cell: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 512)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 1e-5)]
    l2: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, value_enum, default_value_t = ErrorTypeArg::Squared)]
    error_type: ErrorTypeArg,
    #[arg(long, default_value_t = 4.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl TrainFlags {
    fn to_config(&self) -> Result<TrainConfig> {
        let estimator: Estimator = self.estimator.parse()?;
        let gamma_max = match self.gamma_global {
            Some(g) if matches!(estimator, Estimator::RdIps | Estimator::RdDr | Estimator::BrdIps | Estimator::BrdDr) => g,
            _ => self.gamma_max,
        };
        Ok(TrainConfig {
            estimator,
            model: ModelConfig { dim: self.dim, l2: self.l2, ..Default::default() },
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            learning_rate_imputation: self.lr,
            gamma_max,
            alpha: self.alpha,
            beta: self.beta,
            groups_user: self.bins_user,
            groups_item: self.bins_item,
            min_cell_count: self.min_cell,
            error_type: self.error_type.into(),
            threshold: self.threshold,
            seed: self.seed,
            ..Default::default()
        })
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic confounded dataset with known ground truth.
    Synth {
        #[arg(long, default_value_t = 200)]
        users: usize,
        #[arg(long, default_value_t = 200)]
        items: usize,
        #[arg(long, default_value_t = 8)]
        latent_dim: usize,
        /// Hidden-confounder strength (ln(2)/2 plants Gamma* ~= 2).
        #[arg(long, default_value_t = 0.346574)]
        confounding: f64,
        #[arg(long, default_value_t = 0.05)]
        base_exposure: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load a dataset, optionally mask it, and write train/val/test splits.
    Prepare {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Triple)]
        format: FormatArg,
        #[arg(long, default_value_t = 0.0)]
        mask_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate propensities, sensitivity scores, and the uncertainty box.
    Sensitivity {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Triple)]
        format: FormatArg,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one estimator and write its checkpoints.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Optional validation triples (default: a 10% split of --dataset).
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Triple)]
        format: FormatArg,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on held-out triples.
    Eval {
        /// Training triples (for model context, e.g. pair features).
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Triple)]
        format: FormatArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "checkpoint")]
        estimator: String,
        #[arg(long, default_value_t = 5)]
        ndcg_k: usize,
        #[arg(long, default_value_t = 4.0)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an (estimator x mask_ratio x seed) experiment grid.
    Grid {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Triple)]
        format: FormatArg,
        #[arg(long, value_delimiter = ',', default_value = "ips,puid_ips")]
        estimators: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0.0")]
        mask_ratios: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 5)]
        ndcg_k: usize,
        #[command(flatten)]
        flags: TrainFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a grid results CSV as an aggregated report.
    Report {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn load(dataset: &Path, format: FormatArg) -> Result<Dataset> {
    let (ds, stats) = load_triples(dataset, format.into(), (1.0, 5.0))?;
    if stats.duplicates > 0 {
        eprintln!("warning: dropped {} duplicate entries (keep-last)", stats.duplicates);
    }
    Ok(ds)
}

fn config_hash_of(cfg: &TrainConfig) -> String {
    fnv1a_hex(&serde_json::to_string(cfg).expect("config serializes"))
}

fn holdout(ds: &Dataset, frac_val: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let spec = split(ds.num_observed(), (1.0 - frac_val, frac_val, 0.0), seed)?;
    Ok((ds.retain_interactions(&spec.train), ds.retain_interactions(&spec.validation)))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Synth { users, items, latent_dim, confounding, base_exposure, seed, out } => {
            ensure_dir(&out)?;
            let (ds, gt) = generate_synthetic(users, items, latent_dim, confounding, base_exposure, seed)?;
            write_triples(&ds, &out.join("ratings.tsv"))?;
            write_ground_truth(&gt, &ds, &out.join("ground_truth.csv"))?;
            println!(
                "synth: {} users x {} items, {} observed, true_gamma {:.4}",
                users,
                items,
                ds.num_observed(),
                gt.true_gamma
            );
        }
        Cmd::Prepare { dataset, format, mask_ratio, seed, out } => {
            ensure_dir(&out)?;
            let ds = load(&dataset, format)?;
            let ds = if mask_ratio > 0.0 {
                let pf = fit_propensity(
                    &ds,
                    &PropensityConfig { mode: PropensityMode::Popularity, ..Default::default() },
                )?;
                apply_mask(&ds, mask_ratio, &pf.p_hat, MaskMode::ProportionalToPropensity, seed)?
            } else {
                ds
            };
            let spec = split(ds.num_observed(), (0.6, 0.2, 0.2), seed)?;
            write_triples(&ds.retain_interactions(&spec.train), &out.join("train.tsv"))?;
            write_triples(&ds.retain_interactions(&spec.validation), &out.join("validation.tsv"))?;
            write_triples(&ds.retain_interactions(&spec.test), &out.join("test.tsv"))?;
            println!(
                "prepare: {} observed -> {}/{}/{} train/val/test",
                ds.num_observed(),
                spec.train.len(),
                spec.validation.len(),
                spec.test.len()
            );
        }
        Cmd::Sensitivity { dataset, format, flags, out } => {
            ensure_dir(&out)?;
            let ds = load(&dataset, format)?;
            let mut cfg = flags.to_config()?;
            // the sensitivity command always builds the personalized field
            if !matches!(cfg.estimator, Estimator::PuidIps | Estimator::PuidDr | Estimator::BpuidIps | Estimator::BpuidDr) {
                cfg.estimator = Estimator::PuidIps;
            }
            let art = prepare_artifacts(&ds, &cfg)?;
            let hash = config_hash_of(&cfg);
            let sf = art.sensitivity.expect("personalized artifacts");
            let ubox = art.ubox.expect("personalized artifacts");
            let pf = art.propensity.expect("personalized artifacts");
            sf.write_csv(ds.num_items, &out.join(format!("sensitivity_{hash}.csv")))?;
            ubox.write_csv(&pf, &sf, ds.num_items, &out.join(format!("box_{hash}.csv")))?;
            let lo = sf.gamma.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = sf.gamma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            println!("sensitivity: gamma in [{lo:.4}, {hi:.4}], artifacts {hash}");
        }
        Cmd::Train { dataset, validation, format, flags, out } => {
            ensure_dir(&out)?;
            let ds = load(&dataset, format)?;
            let cfg = flags.to_config()?;
            let (tr, va) = match validation {
                Some(v) => (ds, load(&v, format)?),
                None => holdout(&ds, 0.1, cfg.seed)?,
            };
            let result = train(&tr, &va, &cfg)?;
            let hash = config_hash_of(&cfg);
            let phi_path = out.join(format!("phi_{}_{hash}.json", cfg.estimator));
            result.phi.save(&phi_path)?;
            if let Some(theta) = &result.theta {
                theta.save(&out.join(format!("theta_{}_{hash}.json", cfg.estimator)))?;
            }
            let history = serde_json::to_string_pretty(&result.history)
                .map_err(|e| PuidError::Data(e.to_string()))?;
            std::fs::write(out.join(format!("history_{}_{hash}.json", cfg.estimator)), history)?;
            println!(
                "train: {} final loss {:.6e}, checkpoint {}",
                cfg.estimator,
                result.final_train_loss,
                phi_path.display()
            );
        }
        Cmd::Eval { dataset, test, format, checkpoint, estimator, ndcg_k, threshold, out } => {
            let ds = load(&dataset, format)?;
            let te = load(&test, format)?;
            if te.num_users > ds.num_users || te.num_items > ds.num_items {
                return Err(PuidError::Data("test set addresses users/items beyond the training grid".into()));
            }
            let model = FactorModel::load(&checkpoint)?;
            let report = evaluate(&estimator, &model, &ds, &te, &[ndcg_k], threshold)?;
            report.write_json(&out)?;
            println!("eval: uauc {:.4}, ndcg@{ndcg_k} {:.4} -> {}", report.uauc, report.ndcg[&format!("ndcg@{ndcg_k}")], out.display());
        }
        Cmd::Grid { dataset, format, estimators, mask_ratios, seeds, ndcg_k, flags, out } => {
            ensure_dir(&out)?;
            let ds = load(&dataset, format)?;
            let ests: Vec<Estimator> = estimators.iter().map(|s| s.parse()).collect::<Result<_>>()?;
            let base = flags.to_config()?;
            let pf = fit_propensity(&ds, &base.propensity)?;
            let grid = ExperimentGrid {
                estimators: ests,
                mask_ratios,
                seeds,
                base,
                mask_mode: MaskMode::ProportionalToPropensity,
                ndcg_k,
                fractions: (0.6, 0.2, 0.2),
                external_test: None,
            };
            let rows = run_experiment_grid(&ds, &pf.p_hat, &grid)?;
            let hash = grid.config_hash();
            let csv_path = out.join(format!("results_{hash}.csv"));
            std::fs::write(&csv_path, rows_to_csv(&rows))?;
            let md = emit_report(&rows, ReportFormat::Markdown)?;
            std::fs::write(out.join(format!("report_{hash}.md")), md)?;
            let failures = rows.iter().filter(|r| r.error.is_some()).count();
            println!("grid: {} rows ({failures} failed) -> {}", rows.len(), csv_path.display());
        }
        Cmd::Report { results, format, out } => {
            let text = std::fs::read_to_string(&results)?;
            let rows = rows_from_csv(&text)?;
            let fmt = match format.as_str() {
                "markdown" | "md" => ReportFormat::Markdown,
                "csv" => ReportFormat::Csv,
                other => return Err(PuidError::Usage(format!("unknown report format '{other}'"))),
            };
            std::fs::write(&out, emit_report(&rows, fmt)?)?;
            println!("report: {} rows -> {}", rows.len(), out.display());
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
