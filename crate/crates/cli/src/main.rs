//! Command-line pipeline: synthesize, featurize, train, refine, evaluate,
//! ablate and report.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use infant_motion::classify::{condition_from_labels, fit, ClassifierKind, Example};
use infant_motion::data::Track;
use infant_motion::dataset::{synthesize, write_synthetic, Dataset, SubjectData, SynthConfig};
use infant_motion::eval::{ablate, loso_run};
use infant_motion::features::FeatureMatrix;
use infant_motion::iar::{iar_refine, write_labels};
use infant_motion::report::{read_bundle, render, write_bundle, Bundle};
use infant_motion::synth::{AnnotatorNoise, Scenario};

use config::{OnOff, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "infant-motion", version, about = "Posture and movement classification from four limb-worn inertial sensors")]
struct Cli {
    /// Worker threads for folds and inner training (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset with simulated annotators.
    Synth(SynthArgs),
    /// Write per-frame feature tables.
    Featurize(PipelineArgs),
    /// Fit final models on every subject of a dataset.
    Train(PipelineArgs),
    /// Refine training labels and export them as JSON lines.
    Refine(PipelineArgs),
    /// Leave-one-subject-out evaluation; writes a report bundle.
    Eval(PipelineArgs),
    /// LOSO evaluation per sensor configuration; writes a report bundle.
    Ablate(AblateArgs),
    /// Render tables and figures from one or more report bundles.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Number of synthetic subjects.
    #[arg(long, default_value_t = 12)]
    subjects: usize,
    /// Number of simulated annotators.
    #[arg(long, default_value_t = 3)]
    annotators: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scenario JSON file; defaults to the built-in scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Recording length in seconds (overrides the scenario).
    #[arg(long)]
    duration: Option<f64>,
    /// Probability that an annotator mislabels an interval.
    #[arg(long, default_value_t = 0.1)]
    confusion: f64,
    /// Standard deviation of annotator boundary jitter, seconds.
    #[arg(long, default_value_t = 0.3)]
    jitter: f64,
}

/// Options shared by the dataset-consuming commands.
#[derive(Args, Debug, Clone)]
pub struct PipelineArgs {
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON run configuration; its fields override command-line flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    classifier: Option<config::ClassifierArg>,
    #[arg(long, value_enum)]
    track: Option<config::TrackArg>,
    /// Iterative annotation refinement of training labels.
    #[arg(long, value_enum)]
    iar: Option<OnOff>,
    /// Refinement iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Sensor subset, e.g. `all`, `la`, `la+rl`.
    #[arg(long)]
    sensors: Option<String>,
    /// Seed of every classifier.
    #[arg(long)]
    seed: Option<u64>,
    /// Network training epochs.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Semicolon-separated sensor subsets; defaults to the six standard ones.
    #[arg(long)]
    configs: Option<String>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Bundle directory; repeat to merge an evaluation and an ablation.
    #[arg(long, required = true)]
    bundle: Vec<PathBuf>,
    /// Output directory (defaults to the first bundle).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            std::process::exit(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().expect("thread pool configured once");
    }
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => cmd_synth(a),
        Command::Featurize(a) => cmd_featurize(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Refine(a) => cmd_refine(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut scenario = match &a.scenario {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading scenario {}", p.display()))?;
            serde_json::from_str::<Scenario>(&text).with_context(|| format!("invalid scenario {}", p.display()))?
        }
        None => Scenario::default(),
    };
    if let Some(d) = a.duration {
        scenario.duration_s = d;
    }
    let cfg = SynthConfig {
        scenario,
        subjects: a.subjects,
        annotators: a.annotators,
        noise: AnnotatorNoise {
            jitter_s: a.jitter,
            confusion_rate: a.confusion,
            seed: a.seed,
        },
        seed: a.seed,
    };
    let subjects = synthesize(&cfg)?;
    write_synthetic(&a.out, &cfg, &subjects)?;
    println!("wrote {} subjects to {}", subjects.len(), a.out.display());
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    let dir = cfg.data.as_ref().context("no dataset given (use --data or the config file)")?;
    if !dir.is_dir() {
        bail!("dataset directory {} does not exist", dir.display());
    }
    let ds = Dataset::load(dir, cfg.window_len, cfg.hop)?;
    for w in &ds.warnings {
        log::warn!("{w}");
    }
    Ok(ds)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_featurize(a: &PipelineArgs) -> Result<()> {
    let cfg = RunConfig::resolve(a)?;
    let ds = load(&cfg)?;
    fs::create_dir_all(&a.out)?;
    let columns = infant_motion::classify::sensor_columns(cfg.sensor_set()?);
    for s in &ds.subjects {
        let mut names = vec!["frame".to_string()];
        names.extend(columns.iter().map(|&j| s.features.names[j].clone()));
        let mut m = FeatureMatrix::new(names);
        for (r, &t) in s.feature_frames.iter().enumerate() {
            let row = s.features.row(r);
            let mut out = vec![t as f64];
            out.extend(columns.iter().map(|&j| row[j]));
            m.push_row(&out)?;
        }
        let path = a.out.join(format!("{}.features.csv", s.id));
        m.write_csv(BufWriter::new(File::create(&path)?))?;
    }
    println!("wrote features of {} subjects to {}", ds.len(), a.out.display());
    Ok(())
}

fn refined_or_priors(
    cfg: &RunConfig,
    subjects: &[&SubjectData],
    track: Track,
    conditions: Option<&[Vec<usize>]>,
) -> Result<Vec<Vec<Option<infant_motion::data::SoftLabel>>>> {
    Ok(match cfg.iar_config() {
        Some(iar) => iar_refine(subjects, track, &cfg.classifier_config()?, &iar, conditions)?.state.labels,
        None => subjects.iter().map(|s| s.track(track).priors.clone()).collect(),
    })
}

fn cmd_train(a: &PipelineArgs) -> Result<()> {
    let cfg = RunConfig::resolve(a)?;
    let ds = load(&cfg)?;
    let clf = cfg.classifier_config()?;
    let subjects: Vec<&SubjectData> = ds.subjects.iter().collect();
    fs::create_dir_all(&a.out)?;
    let tracks = cfg.track.tracks();
    let cnn = clf.kind == ClassifierKind::Cnn;
    let mut posture_labels = None;
    if tracks.contains(&Track::Posture) || cnn {
        posture_labels = Some(refined_or_priors(&cfg, &subjects, Track::Posture, None)?);
    }
    for track in tracks.iter().copied().chain((cnn && !tracks.contains(&Track::Posture)).then_some(Track::Posture)) {
        let conditions: Option<Vec<Vec<usize>>> = (cnn && track == Track::Movement)
            .then(|| posture_labels.as_ref().unwrap().iter().map(|l| condition_from_labels(l)).collect());
        let labels = match track {
            Track::Posture => posture_labels.clone().unwrap(),
            _ => refined_or_priors(&cfg, &subjects, track, conditions.as_deref())?,
        };
        let examples: Vec<Example> = subjects
            .iter()
            .enumerate()
            .map(|(i, s)| Example {
                subject: s,
                labels: &labels[i],
                condition: conditions.as_ref().map(|c| c[i].as_slice()),
            })
            .collect();
        let model = fit(&clf, track, &examples)?;
        write_json(&a.out.join(format!("model_{}.json", track.name())), &model)?;
    }
    write_json(&a.out.join("run_config.json"), &cfg)?;
    println!("wrote models to {}", a.out.display());
    Ok(())
}

fn cmd_refine(a: &PipelineArgs) -> Result<()> {
    let mut cfg = RunConfig::resolve(a)?;
    cfg.iar.enabled = true;
    let ds = load(&cfg)?;
    let subjects: Vec<&SubjectData> = ds.subjects.iter().collect();
    let ids: Vec<&str> = subjects.iter().map(|s| s.id.as_str()).collect();
    fs::create_dir_all(&a.out)?;
    let cnn = cfg.classifier == ClassifierKind::Cnn;
    let mut posture_refined = None;
    for track in cfg.track.tracks() {
        let conditions: Option<Vec<Vec<usize>>> = if cnn && track == Track::Movement {
            let posture = match &posture_refined {
                Some(p) => p,
                None => {
                    posture_refined = Some(refined_or_priors(&cfg, &subjects, Track::Posture, None)?);
                    posture_refined.as_ref().unwrap()
                }
            };
            Some(posture.iter().map(|l| condition_from_labels(l)).collect())
        } else {
            None
        };
        let labels = refined_or_priors(&cfg, &subjects, track, conditions.as_deref())?;
        let originals: Vec<_> = subjects.iter().map(|s| s.track(track).priors.clone()).collect();
        write_labels(&ids, &labels, BufWriter::new(File::create(a.out.join(format!("refined_{}.jsonl", track.name())))?))?;
        write_labels(&ids, &originals, BufWriter::new(File::create(a.out.join(format!("priors_{}.jsonl", track.name())))?))?;
        if track == Track::Posture {
            posture_refined = Some(labels);
        }
    }
    write_json(&a.out.join("run_config.json"), &cfg)?;
    println!("wrote refined labels to {}", a.out.display());
    Ok(())
}

fn cmd_eval(a: &PipelineArgs) -> Result<()> {
    let cfg = RunConfig::resolve(a)?;
    let ds = load(&cfg)?;
    let report = loso_run(&ds, &cfg.loso_config()?)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut bundle = Bundle::new(serde_json::to_value(&cfg)?);
    bundle.loso = Some(report);
    let files = write_bundle(&a.out, &bundle)?;
    print!("{}", infant_motion::report::table1_markdown(bundle.loso.as_ref().unwrap()));
    println!("wrote {} files to {}", files.len(), a.out.display());
    Ok(())
}

fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let mut cfg = RunConfig::resolve(&a.pipeline)?;
    if let Some(c) = &a.configs {
        cfg.ablation_configs = c.split(';').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    let ds = load(&cfg)?;
    let configs = cfg.ablation_sets()?;
    let table = ablate(&ds, &configs, &cfg.loso_config()?)?;
    let mut bundle = Bundle::new(serde_json::to_value(&cfg)?);
    bundle.ablation = Some(table);
    let files = write_bundle(&a.pipeline.out, &bundle)?;
    print!("{}", infant_motion::report::ablation_markdown(bundle.ablation.as_ref().unwrap()));
    println!("wrote {} files to {}", files.len(), a.pipeline.out.display());
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut merged: Option<Bundle> = None;
    for dir in &a.bundle {
        let b = read_bundle(dir).with_context(|| format!("reading bundle {}", dir.display()))?;
        merged = Some(match merged {
            None => b,
            Some(mut m) => {
                m.loso = m.loso.or(b.loso);
                m.ablation = m.ablation.or(b.ablation);
                m
            }
        });
    }
    let bundle = merged.expect("clap requires one bundle");
    let out = a.out.clone().unwrap_or_else(|| a.bundle[0].clone());
    fs::create_dir_all(&out)?;
    let files = render(&out, &bundle)?;
    println!("rendered {} files to {}", files.len(), out.display());
    Ok(())
}
