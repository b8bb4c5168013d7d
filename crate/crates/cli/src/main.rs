//! `mip`: data preparation, training, evaluation and experiment driver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use mip_core::checkpoint::{load_checkpoint, save_checkpoint};
use mip_core::clustering::ClusterMethod;
use mip_core::config::RunConfig;
use mip_core::data::{ingest, prepare_split, read_features, read_split, synth_generate, write_split, DatasetSplit};
use mip_core::experiments::{recluster_sweep, run_ablation, AblationAxis, SweepConfig};
use mip_core::metrics::{evaluate, profile_latency, reports_markdown, EvalOptions, LatencyOptions, LatencyProbe};
use mip_core::model::MipModel;
use mip_core::preference::WeightMode;
use mip_core::training::train;

#[derive(Parser)]
#[command(name = "mip", version, about = "Multi-interest preference retrieval experiments")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed applied to every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Zero wall-clock fields so outputs are byte-identical across runs.
    #[arg(long, global = true)]
    stable: bool,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Filter, window and split a raw interaction file.
    Prepare {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Dense-feature sidecar (`item,f1,...,fd`).
        #[arg(long)]
        features: Option<PathBuf>,
        /// Gap in days between inputs and labels (metadata mode).
        #[arg(long)]
        gap_days: Option<f64>,
    },
    /// Train a model on a prepared split.
    Train {
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Evaluate a checkpoint, optionally with a different inference clusterer.
    Eval {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        method: Option<ClusterMethod>,
        #[arg(long)]
        k: Option<usize>,
        /// learned, equal or exp_decay.
        #[arg(long)]
        weights: Option<String>,
        /// Cutoffs, comma separated.
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
    /// Evaluate a checkpoint under many inference clusterers.
    ReclusterSweep {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<ClusterMethod>>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
    },
    /// Train and compare the arms of one ablation axis.
    Ablate {
        #[arg(long)]
        axis: AblationAxis,
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Batch-size-1 latency of training steps, inference and clustering.
    Latency {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Generate a synthetic multi-interest split.
    Synth {
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        interests: Option<usize>,
    },
}

#[derive(Args)]
struct Target {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config_hash: String,
    seed: u64,
    version: &'a str,
}

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    stable: bool,
}

impl Ctx {
    fn write(&self, name: &str, body: &str) -> Result<()> {
        let path = self.out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write(name, &(serde_json::to_string_pretty(value)? + "\n"))
    }

    /// Effective config and a small run manifest next to every output.
    fn finish(&self, command: &str) -> Result<()> {
        self.write("config.json", &(self.cfg.to_json() + "\n"))?;
        self.write_json(
            "run.json",
            &RunManifest {
                command,
                config_hash: self.cfg.hash(),
                seed: self.cfg.train.seed,
                version: env!("CARGO_PKG_VERSION"),
            },
        )
    }

    fn split_path(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        match flag.or_else(|| self.cfg.data.split.clone()) {
            Some(p) => Ok(p),
            None => bail!(mip_core::Error::Usage("no split directory: pass --split or set data.split".into())),
        }
    }
}

fn load_split(path: &Path) -> Result<DatasetSplit> {
    let (split, manifest) = read_split(path)?;
    info!(
        "split {}: {} train / {} valid / {} test, {} items",
        path.display(),
        manifest.train,
        manifest.valid,
        manifest.test,
        manifest.items
    );
    Ok(split)
}

fn build_model(cfg: &RunConfig, split: &DatasetSplit) -> Result<MipModel> {
    let features = if cfg.model.metadata_present {
        Some(split.features.as_ref().ok_or_else(|| {
            mip_core::Error::Config("model.metadata_present is set but the split has no features".into())
        })?)
    } else {
        None
    };
    Ok(MipModel::new(cfg.model.clone(), split.vocab.len(), features, cfg.train.seed)?)
}

fn parse_weights(s: &str) -> Result<WeightMode> {
    Ok(match s {
        "learned" => WeightMode::Learned,
        "equal" => WeightMode::Equal,
        "exp_decay" => WeightMode::exp_decay(),
        other => bail!(mip_core::Error::Usage(format!("unknown weight mode `{other}` (learned, equal, exp_decay)"))),
    })
}

fn strip_latency(probes: Vec<LatencyProbe>, stable: bool) -> Vec<LatencyProbe> {
    if stable {
        probes.into_iter().map(LatencyProbe::without_timing).collect()
    } else {
        probes
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.set_seed(seed);
    }
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    fs::create_dir_all(&cli.global.out).with_context(|| format!("creating {}", cli.global.out.display()))?;
    let mut ctx = Ctx {
        cfg,
        out: cli.global.out.clone(),
        stable: cli.global.stable,
    };

    match cli.command {
        Command::Prepare {
            input,
            features,
            gap_days,
        } => {
            if let Some(p) = input {
                ctx.cfg.data.input = Some(p);
            }
            if let Some(p) = features {
                ctx.cfg.data.features = Some(p);
            }
            if gap_days.is_some() {
                ctx.cfg.prepare.gap_days = gap_days;
            }
            ctx.cfg.validate()?;
            let Some(input) = ctx.cfg.data.input.clone() else {
                bail!(mip_core::Error::Usage("no input file: pass --input or set data.input".into()));
            };
            let raw = ingest(&input, &ctx.cfg.ingest)?;
            let features = match &ctx.cfg.data.features {
                Some(p) => Some(read_features(p)?.into_iter().collect()),
                None => None,
            };
            let split = prepare_split(&raw, &ctx.cfg.prepare, features.as_ref())?;
            let m = write_split(&ctx.out, &split, ctx.cfg.prepare.seed, &ctx.cfg.hash())?;
            println!(
                "prepared {} train / {} valid / {} test sequences over {} items into {}",
                m.train,
                m.valid,
                m.test,
                m.items,
                ctx.out.display()
            );
            ctx.finish("prepare")?;
        }
        Command::Synth { users, interests } => {
            if let Some(u) = users {
                ctx.cfg.synth.num_users = u;
            }
            if let Some(k) = interests {
                ctx.cfg.synth.interests_per_user = k;
            }
            ctx.cfg.validate()?;
            let data = synth_generate(&ctx.cfg.synth)?;
            let m = write_split(&ctx.out, &data.split, ctx.cfg.synth.seed, &ctx.cfg.hash())?;
            println!(
                "synthesized {} train / {} valid / {} test sequences over {} items into {}",
                m.train,
                m.valid,
                m.test,
                m.items,
                ctx.out.display()
            );
            ctx.finish("synth")?;
        }
        Command::Train { split } => {
            let path = ctx.split_path(split)?;
            ctx.cfg.data.split = Some(path.clone());
            ctx.cfg.validate()?;
            let data = load_split(&path)?;
            let mut model = build_model(&ctx.cfg, &data)?;
            let mut report = train(&mut model, &data, &ctx.cfg.train)?;
            if ctx.stable {
                report = report.without_timing();
            }
            save_checkpoint(&ctx.out.join("model.ckpt"), &model)?;
            ctx.write_json("train_report.json", &report)?;
            let md = report.markdown();
            ctx.write("train_report.md", &md)?;
            println!("{md}");
            ctx.finish("train")?;
        }
        Command::Eval {
            target,
            method,
            k,
            weights,
            ks,
        } => {
            let model = load_checkpoint(&target.checkpoint)?;
            let data = load_split(&ctx.split_path(target.split)?)?;
            let mut clusterer = model.config().clusterer;
            if let Some(m) = method {
                clusterer.method = m;
            }
            if let Some(k) = k {
                clusterer.k = k;
            }
            if let Some(ks) = ks {
                ctx.cfg.eval.ks = ks;
            }
            let weight_mode = match weights {
                Some(w) => parse_weights(&w)?,
                None => model.config().weight_mode,
            };
            ctx.cfg.model = model.config().clone();
            ctx.cfg.validate()?;
            let opts = EvalOptions {
                clusterer,
                weight_mode,
                ks: ctx.cfg.eval.ks.clone(),
            };
            let report = evaluate(&model.view(), &data.test, &opts)?;
            ctx.write_json("eval_report.json", &report)?;
            let md = reports_markdown(std::slice::from_ref(&report));
            ctx.write("eval_report.md", &md)?;
            println!("{md}");
            ctx.finish("eval")?;
        }
        Command::ReclusterSweep { target, methods, ks } => {
            let model = load_checkpoint(&target.checkpoint)?;
            let path = ctx.split_path(target.split)?;
            let data = load_split(&path)?;
            if let Some(m) = methods {
                ctx.cfg.sweep.methods = m;
            }
            if let Some(k) = ks {
                ctx.cfg.sweep.ks = k;
            }
            ctx.cfg.model = model.config().clone();
            ctx.cfg.validate()?;
            let sweep = SweepConfig {
                eval_ks: ctx.cfg.eval.ks.clone(),
                ..ctx.cfg.sweep.clone()
            };
            let name = split_name(&path);
            let table = recluster_sweep(&model, &data.test, &model.config().clusterer, &sweep, &name)?;
            ctx.write_json("recluster_sweep.json", &table)?;
            let md = table.markdown();
            ctx.write("recluster_sweep.md", &md)?;
            println!("{md}");
            ctx.finish("recluster-sweep")?;
        }
        Command::Ablate { axis, split } => {
            let path = ctx.split_path(split)?;
            ctx.cfg.data.split = Some(path.clone());
            ctx.cfg.validate()?;
            let data = load_split(&path)?;
            let table = run_ablation(axis, &ctx.cfg.model, &ctx.cfg.train, &data, &ctx.cfg.eval.ks)?;
            let stem = format!("ablation_{}", serde_json::to_value(axis)?.as_str().unwrap_or("axis"));
            ctx.write_json(&format!("{stem}.json"), &table)?;
            let md = table.markdown();
            ctx.write(&format!("{stem}.md"), &md)?;
            println!("{md}");
            ctx.finish("ablate")?;
        }
        Command::Latency { target, samples } => {
            let model = load_checkpoint(&target.checkpoint)?;
            let data = load_split(&ctx.split_path(target.split)?)?;
            if let Some(s) = samples {
                ctx.cfg.eval.latency_samples = s;
            }
            ctx.cfg.model = model.config().clone();
            ctx.cfg.validate()?;
            let opts = LatencyOptions {
                samples: ctx.cfg.eval.latency_samples,
                warmup: ctx.cfg.eval.latency_warmup,
                clusterer: model.config().clusterer,
                weight_mode: model.config().weight_mode,
                loss: ctx.cfg.train.loss,
                adam: ctx.cfg.train.adam,
            };
            let probes = strip_latency(profile_latency(&model, &data.test, &opts)?, ctx.stable);
            ctx.write_json("latency.json", &probes)?;
            let mut md = String::from("| phase | samples | mean ms | std ms |\n|---|---|---|---|\n");
            for p in &probes {
                md += &format!("| {} | {} | {:.4} | {:.4} |\n", p.phase.name(), p.samples, p.mean_ms, p.std_ms);
            }
            ctx.write("latency.md", &md)?;
            println!("{md}");
            ctx.finish("latency")?;
        }
    }
    Ok(())
}

fn split_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "test".into())
}

/// Exit code per error category.
fn exit_code(kind: &str) -> u8 {
    match kind {
        "usage" => 2,
        "config" => 3,
        "io" => 4,
        "parse" | "json" => 5,
        "version" => 6,
        "validation" | "dimension" => 7,
        "training" => 8,
        _ => 1,
    }
}

fn explain(kind: &str) -> &'static str {
    match kind {
        "usage" => "a required argument is missing or malformed; see `mip --help`",
        "config" => "the configuration was rejected; check field names and values",
        "io" => "a file could not be read or written; check the path and permissions",
        "parse" | "json" => "an input file is malformed at the reported location",
        "version" => "the file was written by an incompatible version; regenerate it",
        "validation" | "dimension" => "the inputs are inconsistent with each other or the model",
        "training" => "training diverged; try a smaller learning rate",
        _ => "unexpected failure",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MIP_LOG", "error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err.chain().find_map(|e| e.downcast_ref::<mip_core::Error>()).map_or("internal", |e| e.kind());
            // Library errors already include their source in the message.
            let mut parts = Vec::new();
            for e in err.chain() {
                parts.push(e.to_string());
                if e.is::<mip_core::Error>() {
                    break;
                }
            }
            let message = parts.join(": ").replace('\n', " ");
            eprintln!("error kind={kind}: {message}");
            eprintln!("{}", explain(kind));
            ExitCode::from(exit_code(kind))
        }
    }
}
