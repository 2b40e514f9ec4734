//! Argument parsing and subcommand drivers.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anticipation_core::diagnostics::{
    divergence_trace, enforcement_rate, oracle_constrained_distribution, ratio_report, DivergenceKind,
    MarkovChain,
};
use anticipation_core::encoding::{augment, parse_corpus};
use anticipation_core::numerics::AdamConfig;
use anticipation_core::sampler::{generate, generate_with_rng};
use anticipation_core::trainer::{evaluate_nll, train, EpochStats, TrainConfig, TrainMonitor};
use anticipation_core::{Checkpoint, ConstraintSet, Corpus, EnforceMode, MaskPolicy, ModelConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::plot::{self, Series, Style};
use crate::{api, checkpoint, reports, CliError};

#[derive(Debug, Parser)]
#[command(name = "anticipation", version, about = "Constrained melody generation with an Anticipation-RNN")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a corpus file.
    Train(TrainArgs),
    /// Generate one sequence and print it as a corpus line.
    Sample(SampleArgs),
    /// Diagnostics on a trained checkpoint.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Serve the HTTP API (and optionally static UI assets).
    Serve(ServeArgs),
    /// Render a report file as SVG.
    Plot(PlotArgs),
    /// Write a corpus sampled from a built-in Markov chain.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 16)]
    pub window: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "uniform")]
    pub mask_policy: MaskPolicy,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch report; defaults to `<out>.report.txt`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// Add every transposition that stays within the corpus pitch range.
    #[arg(long)]
    pub augment: bool,
}

#[derive(Debug, Args)]
pub struct ConstraintArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Comma-separated `position:TOKEN` pairs, positions from 1.
    #[arg(long, default_value = "")]
    pub constraints: String,
    #[arg(long, default_value_t = 16)]
    pub length: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub common: ConstraintArgs,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Random when omitted; the seed used is reported on stderr.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "learned")]
    pub mode: EnforceMode,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Fraction of generations satisfying every constraint.
    Enforce {
        #[command(flatten)]
        common: ConstraintArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "learned")]
        mode: EnforceMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Log-log regression of constrained on unconstrained probability.
    Ratio {
        #[command(flatten)]
        common: ConstraintArgs,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-step divergence between unconstrained and constrained models.
    Trace {
        #[command(flatten)]
        common: ConstraintArgs,
        /// Sequence to score; sampled under the constraints when omitted.
        #[arg(long)]
        sequence: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "reversed-kl", value_parser = parse_divergence)]
        divergence: DivergenceKind,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact constrained distribution by enumeration.
    Oracle {
        #[command(flatten)]
        common: ConstraintArgs,
        /// Comma-separated tokens; all notes and the hold by default.
        #[arg(long)]
        alphabet: Option<String>,
        /// Learned-mode samples to compare against (total variation).
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean teacher-forced NLL of a corpus.
    Nll {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 16)]
        window: usize,
        #[arg(long, default_value = "none")]
        mask_policy: MaskPolicy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Directory served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlotKind {
    Train,
    Trace,
    Ratio,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ChainKind {
    FiveNote,
    ThreeSymbol,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "five-note")]
    pub chain: ChainKind,
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    #[arg(long, default_value_t = 16)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_divergence(s: &str) -> Result<DivergenceKind, String> {
    s.parse().map_err(|e: anticipation_core::Error| e.to_string())
}

pub fn read_corpus(path: &Path) -> Result<Corpus, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read corpus {}: {e}", path.display())))?;
    let name = path.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().into_owned());
    parse_corpus(&text, &name).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::failure(format!("cannot write {}: {e}", path.display())))
}

fn load_constraints(args: &ConstraintArgs) -> Result<(Checkpoint, ConstraintSet), CliError> {
    let cp = checkpoint::load(&args.checkpoint)?;
    let cs = ConstraintSet::parse(&args.constraints, args.length, &cp.vocabulary).map_err(|e| match e {
        anticipation_core::Error::UnknownToken(t) => CliError::usage(format!("unknown token `{t}` in constraints")),
        other => CliError::usage(other.to_string()),
    })?;
    Ok((cp, cs))
}

struct Progress {
    start: Instant,
    out: Option<PathBuf>,
}

impl TrainMonitor for Progress {
    fn now(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn epoch_done(&mut self, s: &EpochStats) {
        let val = s.val_nll.map_or("-".into(), |v| format!("{v:.4}"));
        eprintln!("epoch {:>3}  train {:.4}  val {val}  {:.1}s", s.epoch, s.train_nll, s.seconds);
    }

    fn new_best(&mut self, cp: &Checkpoint, _: &EpochStats) {
        if let Some(path) = &self.out {
            if let Err(e) = checkpoint::save(cp, path) {
                eprintln!("warning: {e}");
            }
        }
    }
}

fn cmd_train(a: &TrainArgs) -> Result<(), CliError> {
    let mut corpus = read_corpus(&a.corpus)?;
    if a.augment {
        let aug = augment(&corpus, None);
        corpus = aug.corpus;
    }
    let model = ModelConfig::new(0).with_hidden(a.hidden).with_dropout(a.dropout);
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        window: a.window,
        mask_policy: a.mask_policy,
        adam: AdamConfig {
            learning_rate: a.learning_rate,
            ..AdamConfig::default()
        },
        validation_fraction: a.validation_fraction,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let mut monitor = Progress {
        start: Instant::now(),
        out: Some(a.out.clone()),
    };
    let (cp, report) = train(&corpus, model, &config, &mut monitor)?;
    checkpoint::save(&cp, &a.out)?;
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".report.txt");
        p.into()
    });
    write(&report_path, &reports::train_report(&report))?;
    match report.best() {
        Some(b) => println!(
            "trained {} epochs, best epoch {} (val nll {})",
            report.epochs.len(),
            b.epoch,
            b.val_nll.map_or("-".into(), |v| format!("{v:.4}"))
        ),
        None => println!("wrote initial parameters"),
    }
    Ok(())
}

fn cmd_sample(a: &SampleArgs) -> Result<(), CliError> {
    let (cp, cs) = load_constraints(&a.common)?;
    let seed = a.seed.unwrap_or_else(rand::random);
    let rec = generate(&cp, &cs, a.temperature, seed, a.mode)?;
    let v = &cp.vocabulary;
    // Print the melody up to the first special token so that the line is
    // itself valid corpus input.
    let end = rec.sequence.iter().position(|&id| v.is_special(id)).unwrap_or(rec.sequence.len());
    let line = v.render(&rec.sequence[..end]);
    parse_corpus(&line, "sample")
        .ok()
        .filter(|c| c.len() == 1)
        .ok_or_else(|| CliError::failure(format!("generated sequence is not a melody: {}", v.render(&rec.sequence))))?;
    eprintln!("seed {seed}");
    println!("{line}");
    Ok(())
}

fn cmd_eval(e: &EvalCommand) -> Result<(), CliError> {
    match e {
        EvalCommand::Enforce {
            common,
            samples,
            seed,
            mode,
            out,
        } => {
            let (cp, cs) = load_constraints(common)?;
            let rate = enforcement_rate(&cp, &cs, *samples, *seed, *mode)?;
            if let Some(p) = out {
                write(p, &format!("# samples rate\n{samples} {rate}\n"))?;
            }
            println!("enforcement {rate:.3} over {samples} samples ({})", mode.as_str());
        }
        EvalCommand::Ratio {
            common,
            samples,
            seed,
            out,
        } => {
            let (cp, cs) = load_constraints(common)?;
            let r = ratio_report(&cp, &cs, *samples, *seed)?;
            if let Some(p) = out {
                write(p, &reports::ratio(&r))?;
            }
            println!("slope {:.3} intercept {:.3} over {} samples", r.slope, r.intercept, r.samples());
        }
        EvalCommand::Trace {
            common,
            sequence,
            seed,
            divergence,
            out,
        } => {
            let (cp, cs) = load_constraints(common)?;
            let seq = match sequence {
                Some(text) => text
                    .split_whitespace()
                    .map(|t| cp.vocabulary.lookup(t))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::usage(e.to_string()))?,
                None => generate(&cp, &cs, 1.0, *seed, EnforceMode::Learned)?.sequence,
            };
            let trace = divergence_trace(&cp, &cs, &seq, *divergence)?;
            if let Some(p) = out {
                write(p, &reports::trace(&trace))?;
            }
            let (t, max) = trace
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i + 1, v) } else { a });
            println!("{} trace of `{}`: max {max:.4} at t={t}", divergence.as_str(), cp.vocabulary.render(&seq));
        }
        EvalCommand::Oracle {
            common,
            alphabet,
            samples,
            seed,
            out,
        } => {
            let (cp, cs) = load_constraints(common)?;
            let v = &cp.vocabulary;
            let alphabet = match alphabet {
                Some(text) => text
                    .split(',')
                    .map(|t| v.lookup(t.trim()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::usage(e.to_string()))?,
                None => v.alphabet(),
            };
            let r = oracle_constrained_distribution(&cp, &cs, &alphabet)?;
            if let Some(p) = out {
                write(p, &reports::oracle(&r, v))?;
            }
            let support: Vec<String> = r
                .support()
                .iter()
                .take(8)
                .map(|(s, p)| format!("{}: {p:.4}", v.render(s).replace(' ', "")))
                .collect();
            let more = if r.support().len() > 8 { ", ..." } else { "" };
            print!("alpha {:.6} {{{}{more}}}", r.alpha, support.join(", "));
            if *samples > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let seqs = (0..*samples)
                    .map(|_| generate_with_rng(&cp, &cs, 1.0, EnforceMode::Learned, &mut rng).map(|r| r.sequence))
                    .collect::<Result<Vec<_>, _>>()?;
                let tv = r.total_variation(seqs.iter().map(Vec::as_slice))?;
                print!(" tv {tv:.4} over {samples} samples");
            }
            println!();
        }
        EvalCommand::Nll {
            checkpoint: path,
            corpus,
            window,
            mask_policy,
            seed,
        } => {
            let cp = checkpoint::load(path)?;
            let corpus = read_corpus(corpus)?;
            let nll = evaluate_nll(&cp, &corpus, *window, *mask_policy, *seed)?;
            println!("nll {nll} ({})", mask_policy.as_str());
        }
    }
    Ok(())
}

fn cmd_serve(a: &ServeArgs) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .map_err(|e| CliError::failure(format!("cannot bind {}: {e}", a.addr)))?;
        let state = api::AppState::loading();
        let loader = state.clone();
        let path = a.checkpoint.clone();
        tokio::task::spawn_blocking(move || match checkpoint::load(&path) {
            Ok(cp) => {
                loader.install(cp);
                eprintln!("model loaded from {}", path.display());
            }
            Err(e) => {
                eprintln!("error: {e}");
                std::process::exit(e.code);
            }
        });
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, api::router(state, a.static_dir.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn cmd_plot(a: &PlotArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.input)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", a.input.display())))?;
    let rows = reports::parse_columns(&text)?;
    let col = |i: usize, j: usize| -> Vec<(f64, f64)> {
        rows.iter().filter(|r| r.len() > i.max(j)).map(|r| (r[i], r[j])).collect()
    };
    let svg = match a.kind {
        PlotKind::Train => plot::render(
            "Training",
            "epoch",
            "mean NLL (nats)",
            &[
                Series {
                    label: "train".into(),
                    points: col(0, 1),
                    style: Style::Line,
                },
                Series {
                    label: "validation".into(),
                    points: col(0, 2),
                    style: Style::Line,
                },
            ],
        ),
        PlotKind::Trace => plot::render(
            "Divergence trace",
            "t",
            "sqrt divergence",
            &[Series {
                label: "trace".into(),
                points: col(0, 1),
                style: Style::Line,
            }],
        ),
        PlotKind::Ratio => {
            let pts = col(0, 1);
            let mut series = vec![Series {
                label: "samples".into(),
                points: pts.clone(),
                style: Style::Points,
            }];
            if let Ok(r) = anticipation_core::diagnostics::RatioReport::from_points(pts.clone()) {
                let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
                series.push(Series {
                    label: format!("fit slope {:.3}", r.slope),
                    points: vec![(lo, r.slope * lo + r.intercept), (hi, r.slope * hi + r.intercept)],
                    style: Style::Line,
                });
                series.push(Series {
                    label: "identity".into(),
                    points: vec![(lo, lo), (hi, hi)],
                    style: Style::Line,
                });
            }
            plot::render("Constrained vs unconstrained", "log p unconstrained", "log p constrained", &series)
        }
    };
    write(&a.out, &svg)
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let chain = match a.chain {
        ChainKind::FiveNote => MarkovChain::five_note(),
        ChainKind::ThreeSymbol => MarkovChain::three_symbol(),
    };
    let corpus = chain.sample_corpus(a.count, a.length, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    write(&a.out, &corpus.to_text())?;
    println!(
        "wrote {} sequences; entropy {:.6} nats/token",
        corpus.len(),
        chain.entropy_per_token(a.length)?
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Eval(e) => cmd_eval(e),
        Command::Serve(a) => cmd_serve(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Synth(a) => cmd_synth(a),
    }
}
