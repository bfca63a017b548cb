//! Command-line front end. Every flag can also come from the `--config`
//! file (`key = value`); flags win over the file, which wins over the preset.

use std::collections::HashMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::config::{ConfigFile, OptimizerKind, PipelineConfig};
use crate::domain::Modality;
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, EvalOptions};
use crate::infer::{erf_record, renms_record, run_inference};
use crate::io::{
    generate_synthetic_dataset, load_checkpoint, load_manifest, load_predictions, save_predictions,
    write_atomic, write_json_atomic, Split, SyntheticSpec,
};
use crate::train::run_training;

/// Keys a config file may carry besides pipeline fields.
const PATH_KEYS: [&str; 12] =
    ["preset", "spec", "out", "manifest", "ckpt", "pred", "gt", "report", "in", "split", "modality", "table"];

#[derive(Debug, Parser)]
#[command(name = "avtfl", version, about = "Audio-visual temporal forgery localization")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// `key = value` file with pipeline fields and subcommand paths.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base configuration before the file and flags are applied.
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full-scale defaults: T = 512, D = 40 s, C = 256.
    Full,
    /// Desk scale: T = 64, D = 8 s, C = 32.
    Toy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

impl SplitArg {
    fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Val => Some(Split::Val),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Fused,
    Visual,
    Audio,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic dataset.
    Synth {
        /// JSON synthetic spec; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train on a manifest's train split and write a checkpoint directory.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long, value_parser = ["sgd", "adam"])]
        optimizer: Option<String>,
    },
    /// Run the full pipeline and write a predictions file.
    Infer {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        ckpt: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
    },
    /// Re-apply soft-NMS to a predictions file.
    Nms {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Defaults to rewriting the input.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        t2: Option<f64>,
    },
    /// Apply the ERF rule set to a predictions file.
    Erf {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Defaults to rewriting the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against annotations.
    Eval {
        #[arg(long)]
        pred: Option<PathBuf>,
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Also write the plain-text table here.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum)]
        modality: Option<ModalityArg>,
    },
}

/// Resolved configuration plus the non-pipeline keys from the file.
struct Settings {
    cfg: PipelineConfig,
    extra: HashMap<String, String>,
}

impl Settings {
    fn load(common: &CommonArgs) -> Result<Self> {
        let file = match &common.config {
            Some(p) => ConfigFile::read(p)?,
            None => ConfigFile::default(),
        };
        let file_preset = file.entries.iter().find(|(k, _)| k == "preset").map(|(_, v)| v.as_str());
        let preset = match (common.preset, file_preset) {
            (Some(p), _) => p,
            (None, Some("toy")) => Preset::Toy,
            (None, Some("full")) | (None, None) => Preset::Full,
            (None, Some(other)) => return Err(Error::Config(format!("preset: unknown value {other:?}"))),
        };
        let mut cfg = match preset {
            Preset::Full => PipelineConfig::default(),
            Preset::Toy => PipelineConfig::toy(),
        };
        let mut extra = HashMap::new();
        for (k, v) in cfg.apply_entries(&file)? {
            if !PATH_KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown config key {k:?}")));
            }
            extra.insert(k, v);
        }
        for o in &common.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {o:?}")))?;
            if !cfg.set(k.trim(), v.trim())? {
                return Err(Error::Config(format!("--set: unknown pipeline key {:?}", k.trim())));
            }
        }
        Ok(Settings { cfg, extra })
    }

    fn path(&self, flag: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.opt_path(flag, key).ok_or_else(|| Error::Config(format!("missing --{key} (flag or config key)")))
    }

    fn opt_path(&self, flag: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.clone().or_else(|| self.extra.get(key).map(PathBuf::from))
    }

    fn choice<T: ValueEnum>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.extra
            .get(key)
            .map(|v| T::from_str(v, true).map_err(|e| Error::Config(format!("{key}: {e}"))))
            .transpose()
    }
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let mut s = Settings::load(&cli.common)?;
    match cli.command {
        Command::Synth { spec, out, seed } => {
            let mut sp = match s.opt_path(&spec, "spec") {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    serde_json::from_str::<SyntheticSpec>(&text)
                        .map_err(|e| Error::Parse { path: p.clone(), message: e.to_string() })?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(seed) = seed {
                sp.rng_seed = seed;
            }
            let out = s.path(&out, "out")?;
            let m = generate_synthetic_dataset(&sp, &out)?;
            info!("wrote {} videos to {}", m.videos.len(), out.display());
        }
        Command::Train { manifest, out, epochs, lr, seed, batch_size, optimizer } => {
            if let Some(v) = epochs {
                s.cfg.epochs = v;
            }
            if let Some(v) = lr {
                s.cfg.learning_rate = v;
            }
            if let Some(v) = seed {
                s.cfg.rng_seed = v;
            }
            if let Some(v) = batch_size {
                s.cfg.batch_size = v;
            }
            if let Some(v) = optimizer {
                s.cfg.optimizer = if v == "adam" { OptimizerKind::Adam } else { OptimizerKind::Sgd };
            }
            s.cfg.validate()?;
            let m = load_manifest(&s.path(&manifest, "manifest")?)?;
            let out = s.path(&out, "out")?;
            let log = run_training(&m, &s.cfg, &out)?;
            if let Some(last) = log.last() {
                info!("final epoch {}: total loss {:.6}", last.epoch, last.train.total);
            }
        }
        Command::Infer { manifest, ckpt, out, split } => {
            let m = load_manifest(&s.path(&manifest, "manifest")?)?;
            let model = load_checkpoint(&s.path(&ckpt, "ckpt")?)?;
            // without an explicit config the checkpoint's own shape is used
            let cfg = if cli.common.config.is_none() && cli.common.preset.is_none() {
                let mut c = model.config.clone();
                for o in &cli.common.overrides {
                    if let Some((k, v)) = o.split_once('=') {
                        c.set(k.trim(), v.trim())?;
                    }
                }
                c
            } else {
                s.cfg.clone()
            };
            cfg.validate()?;
            let split = s.choice(split, "split")?.unwrap_or(SplitArg::Test).split();
            let out = s.path(&out, "out")?;
            let recs = run_inference(&m, &model, &cfg, split, &out)?;
            info!("wrote {} predictions to {}", recs.len(), out.display());
        }
        Command::Nms { input, out, alpha, t1, t2 } => {
            let input = s.path(&input, "in")?;
            let out = s.opt_path(&out, "out").unwrap_or_else(|| input.clone());
            let alpha = alpha.unwrap_or(s.cfg.nms_alpha);
            let t1 = t1.unwrap_or(s.cfg.nms_t1);
            let t2 = t2.unwrap_or(s.cfg.nms_t2);
            // reject bad thresholds even when there is nothing to suppress
            check_nms(alpha, t1, t2)?;
            let recs = load_predictions(&input)?
                .iter()
                .map(|r| renms_record(r, alpha, t1, t2))
                .collect::<Result<Vec<_>>>()?;
            save_predictions(&out, &recs)?;
        }
        Command::Erf { input, out } => {
            s.cfg.validate()?;
            let input = s.path(&input, "in")?;
            let out = s.opt_path(&out, "out").unwrap_or_else(|| input.clone());
            let recs: Vec<_> = load_predictions(&input)?.iter().map(|r| erf_record(r, &s.cfg)).collect();
            save_predictions(&out, &recs)?;
        }
        Command::Eval { pred, gt, report, table, modality } => {
            let modality = match s.choice(modality, "modality")?.unwrap_or(ModalityArg::Fused) {
                ModalityArg::Fused => Modality::Fused,
                ModalityArg::Visual => Modality::Visual,
                ModalityArg::Audio => Modality::Audio,
            };
            let opts = EvalOptions { modality, ..EvalOptions::default() };
            let rep = evaluate_run(&s.path(&pred, "pred")?, &s.path(&gt, "gt")?, &opts)?;
            write_json_atomic(&s.path(&report, "report")?, &rep)?;
            let text = rep.to_table();
            if let Some(t) = s.opt_path(&table, "table") {
                write_atomic(&t, text.as_bytes())?;
            }
            print!("{text}");
            for d in &rep.per_video_diagnostics {
                log::warn!("{}: {}", d.video_id, d.message);
            }
        }
    }
    Ok(())
}

fn check_nms(alpha: f64, t1: f64, t2: f64) -> Result<()> {
    crate::postprocess::soft_nms(&crate::postprocess::ProposalList::new("", 1.0, Vec::new()), alpha, t1, t2).map(|_| ())
}

/// Parses `args` (including the program name) and runs them.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli)
}

/// Initializes logging from `AVTFL_LOG` (default `info`).
pub fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or("AVTFL_LOG", "info"))
        .format_timestamp(None)
        .try_init();
}
