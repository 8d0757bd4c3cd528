use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use camid::evalstat::{mcnemar_test, McNemarMethod};
use camid::fusion::{predict_classes, FusionRule, ProbabilityMatrix};
use camid::pipeline::{extract, format_p, generate_fixture, Modality, RunConfig, SynthSpec, Workspace};
use camid::{Error, Result};

#[derive(Parser)]
#[command(name = "camid", version, about = "Camera model identification from audio and visual content")]
struct Cli {
    /// Seed for fold assignment, training and fixture generation
    /// (overrides the configuration; the configuration default is 42).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModalityArg {
    Audio,
    Visual,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Product,
    Sum,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    ChiSquare,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the manifest, assign folds and extract features.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// JSON run configuration; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train models for one fold (all folds when omitted).
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fold: Option<usize>,
        /// Both modalities when omitted.
        #[arg(long, value_enum)]
        modality: Option<ModalityArg>,
    },
    /// Write test-set probability CSVs from trained checkpoints.
    Predict {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fold: Option<usize>,
        #[arg(long, value_enum)]
        modality: Option<ModalityArg>,
    },
    /// Fuse the audio and visual probabilities of each fold.
    Fuse {
        #[arg(long)]
        out: PathBuf,
        /// Both rules when omitted.
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
        #[arg(long)]
        fold: Option<usize>,
    },
    /// Accuracy and McNemar records for every fold and category.
    Evaluate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the report tables from the evaluation records.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
    /// McNemar test between two probability CSVs over the samples of `--a`.
    Mcnemar {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// CSV with `sample_id` (or `video_id`) and `class_id` (or `label`) columns.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_enum, default_value = "exact")]
        method: MethodArg,
    },
    /// Generate the synthetic 5-class acceptance dataset.
    SynthFixture {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 50)]
        videos_per_class: usize,
    },
    /// extract, then train, predict, fuse, evaluate and report every fold.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn open(out: &Path, seed: Option<u64>) -> Result<Workspace> {
    let ws = Workspace::open(out)?;
    Ok(match seed {
        Some(s) => ws.with_seed(s),
        None => ws,
    })
}

fn folds_of(ws: &Workspace, fold: Option<usize>) -> Vec<usize> {
    fold.map_or_else(|| (0..ws.folds.len()).collect(), |f| vec![f])
}

fn modalities_of(m: Option<ModalityArg>) -> Vec<Modality> {
    match m {
        Some(ModalityArg::Audio) => vec![Modality::Audio],
        Some(ModalityArg::Visual) => vec![Modality::Visual],
        None => Modality::ALL.to_vec(),
    }
}

fn read_truth(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    let col = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.contains(&h))
            .ok_or_else(|| Error::format(path, format!("missing column {}", names.join(" or "))))
    };
    let (id_col, class_col) = (col(&["sample_id", "video_id"])?, col(&["class_id", "label"])?);
    reader
        .records()
        .map(|r| {
            let r = r.map_err(|e| Error::format(path, e.to_string()))?;
            Ok((r[id_col].to_string(), r[class_col].to_string()))
        })
        .collect()
}

fn mcnemar_cmd(a: &Path, b: &Path, truth: &Path, method: McNemarMethod) -> Result<()> {
    let truth: HashMap<String, String> = read_truth(truth)?.into_iter().collect();
    let pa = ProbabilityMatrix::read_csv(a)?;
    let ids = pa.sample_ids().to_vec();
    let pb = ProbabilityMatrix::read_csv(b)?.select(&ids)?;
    if pa.class_ids() != pb.class_ids() {
        return Err(Error::Alignment("the two probability files use different class ids".into()));
    }
    let index: HashMap<&str, usize> = pa.class_ids().iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let labels = ids
        .iter()
        .map(|id| {
            let c = truth
                .get(id)
                .ok_or_else(|| Error::Alignment(format!("sample {id:?} missing from the truth file")))?;
            index
                .get(c.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("{id}: class {c:?} not among the probability columns")))
        })
        .collect::<Result<Vec<_>>>()?;
    let r = mcnemar_test(&predict_classes(&pa)?, &predict_classes(&pb)?, &labels, method)?;
    println!("n,b,c,p_value,verdict");
    println!("{},{},{},{},{}", r.table.total(), r.table.b, r.table.c, format_p(r.p_value), r.verdict);
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Extract { manifest, config, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let ws = extract(&manifest, &cfg, &out)?;
            eprintln!("extracted {} videos into {}", ws.manifest.len(), out.display());
        }
        Command::Train { out, fold, modality } => {
            let ws = open(&out, seed)?;
            for f in folds_of(&ws, fold) {
                for m in modalities_of(modality) {
                    ws.train_fold(f, m)?;
                    eprintln!("trained fold {f} {m}");
                }
            }
        }
        Command::Predict { out, fold, modality } => {
            let ws = open(&out, seed)?;
            for f in folds_of(&ws, fold) {
                for m in modalities_of(modality) {
                    ws.predict_fold(f, m)?;
                }
            }
        }
        Command::Fuse { out, rule, fold } => {
            let ws = open(&out, seed)?;
            let rules = match rule {
                Some(RuleArg::Product) => vec![FusionRule::Product],
                Some(RuleArg::Sum) => vec![FusionRule::Sum],
                None => FusionRule::ALL.to_vec(),
            };
            for f in folds_of(&ws, fold) {
                for &r in &rules {
                    ws.fuse_fold(f, r)?;
                }
            }
        }
        Command::Evaluate { out } => {
            open(&out, seed)?.evaluate()?;
        }
        Command::Report { out } => {
            open(&out, seed)?.report()?;
            eprintln!("reports written to {}", out.join("reports").display());
        }
        Command::Mcnemar { a, b, truth, method } => {
            let method = match method {
                MethodArg::Exact => McNemarMethod::Exact,
                MethodArg::ChiSquare => McNemarMethod::ChiSquareAbove25,
            };
            mcnemar_cmd(&a, &b, &truth, method)?;
        }
        Command::SynthFixture {
            out,
            classes,
            videos_per_class,
        } => {
            let spec = SynthSpec {
                classes,
                videos_per_class,
                seed: seed.unwrap_or(SynthSpec::default().seed),
                ..SynthSpec::default()
            };
            let manifest = generate_fixture(&out, &spec)?;
            eprintln!("wrote {} and {}", manifest.display(), out.join("config.json").display());
        }
        Command::Run { manifest, config, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            extract(&manifest, &cfg, &out)?.run_all()?;
            let tables = out.join("reports").join("tables.md");
            match std::fs::read_to_string(&tables) {
                Ok(text) => println!("{text}"),
                Err(e) => return Err(Error::io(tables, e)),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
