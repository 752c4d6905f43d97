//! Command-line front end. Every command is deterministic given its flags.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::align::DelaySpec;
use crate::data::{generate_synthetic, load_corpus, write_corpus, Corpus, SynthConfig};
use crate::domain::{Dimension, FeatureDims};
use crate::error::{Error, Result};
use crate::experiment::{
    delay_curve, late_fusion, score_all_scalers, train_model, ModelCheckpoint, ModelKind, ScoringOptions,
};
use crate::nn::{Monitor, OptimizerKind, TrainConfig};
use crate::postproc::{ScalerKind, StdRatioForm};
use crate::report::{self, EvalRow, LATE_STEM};

#[derive(Debug, Parser)]
#[command(name = "mmfusion", version, about = "Multimodal continuous emotion regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic corpus.
    Synth(SynthArgs),
    /// Train a model per dimension; writes a checkpoint and an epoch log.
    Train(TrainArgs),
    /// Score a checkpoint on the dev test subjects under every scaler.
    Eval(EvalArgs),
    /// CCC as a function of the compensation delay.
    DelayScan(DelayScanArgs),
    /// Least-squares combination of unimodal checkpoints.
    FuseLate(FuseLateArgs),
    /// Aggregate a run directory into tables and curves.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; must not exist or be empty.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(2..))]
    pub subjects: u32,
    /// Development subjects among `--subjects` [default: 40% of them].
    #[arg(long)]
    pub dev_subjects: Option<usize>,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u32).range(1..))]
    pub frames: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = FeatureDims::STANDARD.audio)]
    pub audio_dim: usize,
    #[arg(long, default_value_t = FeatureDims::STANDARD.video)]
    pub video_dim: usize,
    #[arg(long, default_value_t = FeatureDims::STANDARD.text)]
    pub text_dim: usize,
    #[arg(long, default_value_t = 6)]
    pub latent_dim: usize,
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    /// Signal gain of audio,video,text.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0])]
    pub snr: Vec<f64>,
    /// Annotation delay of arousal,valence,liking in seconds.
    #[arg(long, value_delimiter = ',')]
    pub delay: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.1)]
    pub frame_period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MonitorArg {
    Ccc,
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    pub dimension: Option<Dimension>,
    /// Train arousal, valence and liking in turn.
    #[arg(long)]
    pub all: bool,
    /// proposed, early or unimodal:<audio|video|text>.
    #[arg(long, default_value = "proposed")]
    pub model: ModelKind,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for weight initialization and batch shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long, value_enum, default_value_t = MonitorArg::Ccc)]
    pub monitor: MonitorArg,
    /// Dev subjects used for checkpoint selection [default: 5/14 of them].
    #[arg(long)]
    pub n_select: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Compensation delay in seconds.
    #[arg(long, default_value_t = 0.0)]
    pub delay: f64,
    /// Multiply by σ_pred/σ_label instead of σ_label/σ_pred.
    #[arg(long)]
    pub std_ratio_literal: bool,
}

impl ScoringArgs {
    fn options(&self, frame_period: f64) -> Result<ScoringOptions> {
        Ok(ScoringOptions {
            delay_frames: DelaySpec::new(self.delay, frame_period)?.frames(),
            std_ratio_form: if self.std_ratio_literal {
                StdRatioForm::Literal
            } else {
                StdRatioForm::LabelOverPrediction
            },
        })
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory for `eval_<model>_<dimension>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print only this scaler (the file always holds all of them).
    #[arg(long)]
    pub scaler: Option<ScalerKind>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    DevTest,
    DevSelect,
    Dev,
}

#[derive(Debug, Args)]
pub struct DelayScanArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long, value_enum, default_value_t = Subset::DevTest)]
    pub subset: Subset,
    /// Directory for `delay_<model>_<dimension>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FuseLateArgs {
    /// Unimodal checkpoints of one dimension.
    #[arg(long, num_args = 2..=3, required = true)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Directory for `late_<dimension>.csv` and `eval_late_<dimension>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scale each unimodal prediction before fitting the combiner.
    #[arg(long)]
    pub fuse_scaled: Option<ScalerKind>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory holding eval, delay and late-fusion files.
    #[arg(long)]
    pub run: PathBuf,
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a, out),
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::DelayScan(a) => cmd_delay_scan(&a, out),
        Command::FuseLate(a) => cmd_fuse_late(&a, out),
        Command::Report(a) => cmd_report(&a, out),
    }
}

fn say(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn triple(flag: &str, v: &[f64]) -> Result<[f64; 3]> {
    v.try_into()
        .map_err(|_| Error::Input(format!("--{flag} takes three comma-separated values, got {}", v.len())))
}

pub fn cmd_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    if a.out.exists() {
        let mut entries = fs::read_dir(&a.out).map_err(|e| Error::io(&a.out, e))?;
        if entries.next().is_some() {
            return Err(Error::Input(format!("{} exists and is not empty", a.out.display())));
        }
    }
    let n_subjects = a.subjects as usize;
    let cfg = SynthConfig {
        n_subjects,
        n_dev_subjects: a.dev_subjects.unwrap_or((n_subjects * 2 / 5).max(1)),
        frames_per_subject: a.frames as usize,
        latent_dim: a.latent_dim,
        noise_sigma: a.noise,
        modality_snr: triple("snr", &a.snr)?,
        rng_seed: a.seed,
        delay_seconds: a.delay.as_deref().map(|v| triple("delay", v)).transpose()?,
        frame_period: a.frame_period,
        dims: FeatureDims::new(a.audio_dim, a.video_dim, a.text_dim)?,
    };
    let corpus = generate_synthetic(&cfg)?;
    write_corpus(&corpus, &a.out)?;
    say(
        out,
        &format!(
            "wrote {} subjects ({} dev) x {} frames to {}\n",
            n_subjects,
            cfg.n_dev_subjects,
            cfg.frames_per_subject,
            a.out.display()
        ),
    )
}

/// Dev subjects used for selection when not given: 5 of every 14.
pub fn default_n_select(n_dev: usize) -> usize {
    let n = (n_dev as f64 * 5.0 / 14.0).round() as usize;
    n.clamp(1, n_dev.saturating_sub(1).max(1))
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let n_dev = corpus.train_dev_ids().1.len();
    let partition = corpus.partition(a.n_select.unwrap_or_else(|| default_n_select(n_dev)), a.split_seed)?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        batch_size: a.batch_size,
        rng_seed: a.seed,
        optimizer: match a.optimizer {
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Adam => OptimizerKind::Adam,
        },
        monitor: match a.monitor {
            MonitorArg::Ccc => Monitor::Ccc,
            MonitorArg::Loss => Monitor::Loss,
        },
    };
    cfg.validate()?;
    let dims: Vec<Dimension> = match a.dimension {
        Some(d) => vec![d],
        None => Dimension::ALL.to_vec(),
    };
    ensure_dir(&a.out)?;
    for d in dims {
        let trained = train_model(&corpus, &partition, a.model, d, &cfg, a.seed)?;
        let ck = &trained.checkpoint;
        ck.save(report::checkpoint_path(&a.out, a.model, d))?;
        report::write_epoch_log(&report::log_path(&a.out, a.model, d), &trained.log)?;
        say(
            out,
            &format!(
                "{} {d}: best epoch {} of {}, dev_select CCC {:.4}, MSE {:.4}\n",
                a.model, ck.best_epoch, cfg.epochs, ck.best_dev_ccc, ck.best_dev_mse
            ),
        )?;
    }
    Ok(())
}

fn load_pair(checkpoint: &Path, corpus: &Path) -> Result<(ModelCheckpoint, Corpus)> {
    let ck = ModelCheckpoint::load(checkpoint)?;
    let corpus = load_corpus(corpus)?;
    ck.check_corpus(&corpus)?;
    Ok((ck, corpus))
}

fn scaler_table(rows: &[EvalRow], only: Option<ScalerKind>) -> String {
    let shown: Vec<&EvalRow> = rows.iter().filter(|r| only.is_none_or(|s| s == r.scaler)).collect();
    let mut head = format!("{:<16} {:<9}", "model", "dimension");
    let mut line = format!("{:<16} {:<9}", rows[0].model, rows[0].dimension.to_string());
    for r in shown {
        head.push_str(&format!(" {:>9}", r.scaler.name()));
        line.push_str(&format!(" {:>9.4}", r.ccc));
    }
    format!("{head}\n{line}\n")
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let (ck, corpus) = load_pair(&a.checkpoint, &a.corpus)?;
    let opts = a.scoring.options(corpus.frame_period())?;
    let pred = ck.predict(&corpus, &ck.partition.dev_test)?;
    let rows: Vec<EvalRow> = score_all_scalers(&pred, &ck.label_stats, &opts)?
        .into_iter()
        .map(|(scaler, ccc)| EvalRow {
            model: ck.model.to_string(),
            dimension: ck.dimension,
            scaler,
            delay_seconds: a.scoring.delay,
            ccc,
        })
        .collect();
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        report::write_eval(&report::eval_path(dir, &ck.model.file_stem(), ck.dimension), &rows)?;
    }
    say(out, &scaler_table(&rows, a.scaler))
}

pub fn cmd_delay_scan(a: &DelayScanArgs, out: &mut dyn Write) -> Result<()> {
    let (ck, corpus) = load_pair(&a.checkpoint, &a.corpus)?;
    let ids: Vec<String> = match a.subset {
        Subset::DevTest => ck.partition.dev_test.clone(),
        Subset::DevSelect => ck.partition.dev_select.clone(),
        Subset::Dev => {
            let mut v = ck.partition.dev_select.clone();
            v.extend(ck.partition.dev_test.iter().cloned());
            v
        }
    };
    let curve = delay_curve(&ck, &corpus, &ids, a.max, a.step)?;
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        report::write_delay_curve(&report::delay_path(dir, &ck.model.file_stem(), ck.dimension), &curve)?;
    }
    say(
        out,
        &format!(
            "{} {}: best delay {} s, CCC {:.4} (no delay {:.4})\n",
            ck.model, ck.dimension, curve.best_delay, curve.best_ccc, curve.points[0].1
        ),
    )
}

pub fn cmd_fuse_late(a: &FuseLateArgs, out: &mut dyn Write) -> Result<()> {
    let corpus = load_corpus(&a.corpus)?;
    let cks = a
        .checkpoints
        .iter()
        .map(ModelCheckpoint::load)
        .collect::<Result<Vec<_>>>()?;
    let opts = a.scoring.options(corpus.frame_period())?;
    let outcome = late_fusion(&corpus, &cks, a.fuse_scaled, &opts)?;
    let dim = outcome.dimension;

    // scaler columns for the fused output reuse the training-label statistics
    let rows: Vec<EvalRow> = score_all_scalers(&outcome.test_predictions, &cks[0].label_stats, &opts)?
        .into_iter()
        .map(|(scaler, ccc)| EvalRow {
            model: LATE_STEM.to_string(),
            dimension: dim,
            scaler,
            delay_seconds: a.scoring.delay,
            ccc,
        })
        .collect();
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        report::write_late(&report::late_path(dir, dim), &outcome)?;
        report::write_eval(&report::eval_path(dir, LATE_STEM, dim), &rows)?;
    }

    let mut text = String::new();
    for (i, m) in outcome.model.modalities.iter().enumerate() {
        let imp = outcome
            .importance
            .as_ref()
            .map_or("NA".to_string(), |v| format!("{:.1}%", v[i]));
        text.push_str(&format!(
            "{m:<6} weight {:>9.4}  importance {imp:>7}  unimodal CCC {:.4}\n",
            outcome.model.coefficients[i], outcome.unimodal_test_ccc[i]
        ));
    }
    text.push_str(&format!(
        "late {dim}: intercept {:.4}, dev_test CCC {:.4}{}\n",
        outcome.model.intercept,
        outcome.test_ccc,
        if outcome.model.rank_deficient { " (rank-deficient fit)" } else { "" }
    ));
    say(out, &text)
}

pub fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let files = report::build_report(&a.run)?;
    let table = fs::read_to_string(&files.table_txt).map_err(|e| Error::io(&files.table_txt, e))?;
    say(out, &table)
}

/// Error text on one line.
pub fn diagnostic(e: &Error) -> String {
    let text = e.to_string();
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
