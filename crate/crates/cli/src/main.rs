use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use stylesync::corpus::{ingest, ingest_reader, Corpus};
use stylesync::lexicon::Lexicon;
use stylesync::pipeline::{
    run_hypotheses, run_scores, scores_csv, write_report, write_summary, ReportFormat, RunConfig, Summary,
};
use stylesync::report::{render_text, ErrorBars};
use stylesync::roles::{build_groups, group_algebra_check, GroupName};
use stylesync::synth::{generate_records, write_records, Behavior, GeneratorConfig};

mod selftest;

#[derive(Parser)]
#[command(name = "stylesync", version, about = "Linguistic style coordination on threaded discussions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and print its summary counts.
    Ingest {
        #[command(flatten)]
        run: RunArgs,
        /// Write the normalized corpus here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write role-group memberships as CSV.
    Groups {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump per-speaker coordination scores as CSV.
    Coord {
        #[command(flatten)]
        run: RunArgs,
        /// Replier group.
        #[arg(long, default_value = "U")]
        group_b: GroupName,
        /// Target group.
        #[arg(long, default_value = "U")]
        group_a: GroupName,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run hypothesis tests and write one CSV per hypothesis plus summary.json.
    Hypotheses {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Render stored results as CSV, text, or SVG.
    Report {
        /// A summary.json written by `hypotheses`.
        #[arg(long)]
        summary: PathBuf,
        #[arg(long, default_value = "txt")]
        format: ReportFormat,
        /// `se` or `ci95`.
        #[arg(long, default_value = "se")]
        error_bars: ErrorBars,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check the engine against reference computations on generated corpora.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        corpora: usize,
    },
}

#[derive(Args, Default)]
struct RunArgs {
    /// key = value run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus file, `-` for standard input.
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    lexicon: Option<String>,
    #[arg(long)]
    min_support: Option<String>,
    /// `target`, `reply` or `total`.
    #[arg(long)]
    support_rule: Option<String>,
    /// `welch` or `student`.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    bonferroni: bool,
    /// Comma-separated scopes.
    #[arg(long)]
    scopes: Option<String>,
    /// Comma-separated hypothesis names.
    #[arg(long)]
    hypotheses: Option<String>,
    #[arg(long)]
    out_dir: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    /// `metadata` or `scan`.
    #[arg(long)]
    delta_mode: Option<String>,
    #[arg(long)]
    strip_quotes: bool,
    #[arg(long)]
    lax: bool,
    /// Comma-separated speakers to drop; empty keeps everyone.
    #[arg(long)]
    exclude_speakers: Option<String>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("corpus", &self.corpus),
            ("lexicon", &self.lexicon),
            ("min_support", &self.min_support),
            ("support_rule", &self.support_rule),
            ("variant", &self.variant),
            ("scopes", &self.scopes),
            ("hypotheses", &self.hypotheses),
            ("out_dir", &self.out_dir),
            ("workers", &self.workers),
            ("delta_mode", &self.delta_mode),
            ("exclude_speakers", &self.exclude_speakers),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        if self.bonferroni {
            config.bonferroni = true;
        }
        if self.strip_quotes {
            config.strip_quotes = true;
        }
        if self.lax {
            config.lax = true;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    n_conversations: usize,
    #[arg(long, default_value_t = 100)]
    n_speakers: usize,
    #[arg(long, default_value_t = 8)]
    speakers_per_conversation: usize,
    #[arg(long, default_value_t = 1.5)]
    branching: f64,
    #[arg(long, default_value_t = 8)]
    max_children: usize,
    #[arg(long, default_value_t = 12)]
    depth_limit: usize,
    #[arg(long, default_value_t = 60)]
    max_utterances: usize,
    #[arg(long, default_value_t = 0.3)]
    op_reply_share: f64,
    /// Marker rate of roots.
    #[arg(long, default_value_t = 0.5)]
    target_rate: f64,
    /// Echo probability of non-OP repliers; comma list for per-marker values.
    #[arg(long, default_value = "0.8")]
    echo: String,
    #[arg(long, default_value = "0.2")]
    base: String,
    /// OP echo probability; defaults to --echo.
    #[arg(long)]
    op_echo: Option<String>,
    #[arg(long)]
    op_base: Option<String>,
    /// Echo probability of non-OPs replying to the OP; defaults to --echo.
    #[arg(long)]
    toward_op_echo: Option<String>,
    #[arg(long)]
    toward_op_base: Option<String>,
    #[arg(long, default_value_t = 0.02)]
    op_delta_prob: f64,
    #[arg(long, default_value_t = 0.01)]
    reg_delta_prob: f64,
    #[arg(long, default_value_t = 3)]
    filler_tokens: usize,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn probabilities(flag: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| stylesync::Error::InvalidConfig(format!("--{flag}: `{s}` is not a number")).into())
        })
        .collect()
}

impl SynthArgs {
    fn generator(&self) -> Result<GeneratorConfig> {
        let echo = probabilities("echo", &self.echo)?;
        let base = probabilities("base", &self.base)?;
        let behavior = |e: &Option<String>, b: &Option<String>, ef: &str, bf: &str| -> Result<Behavior> {
            Ok(Behavior {
                echo: e.as_deref().map_or(Ok(echo.clone()), |v| probabilities(ef, v))?,
                base: b.as_deref().map_or(Ok(base.clone()), |v| probabilities(bf, v))?,
            })
        };
        let toward_op = if self.toward_op_echo.is_some() || self.toward_op_base.is_some() {
            Some(behavior(&self.toward_op_echo, &self.toward_op_base, "toward-op-echo", "toward-op-base")?)
        } else {
            None
        };
        Ok(GeneratorConfig {
            n_conversations: self.n_conversations,
            n_speakers: self.n_speakers,
            speakers_per_conversation: self.speakers_per_conversation,
            branching: self.branching,
            max_children: self.max_children,
            depth_limit: self.depth_limit,
            max_utterances: self.max_utterances,
            op_reply_share: self.op_reply_share,
            target_marker_rate: self.target_rate,
            op: behavior(&self.op_echo, &self.op_base, "op-echo", "op-base")?,
            others: Behavior { echo, base },
            toward_op,
            op_delta_prob: self.op_delta_prob,
            reg_delta_prob: self.reg_delta_prob,
            filler_tokens: self.filler_tokens,
            seed: self.seed,
        })
    }
}

fn load_corpus(config: &RunConfig) -> Result<Corpus> {
    let options = config.ingest_options();
    Ok(match &config.corpus {
        Some(p) => ingest(p, &options)?,
        None => ingest_reader(io::stdin().lock(), &options)?,
    })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn list_written(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest { run, out } => {
            let config = run.config()?;
            let corpus = load_corpus(&config)?;
            println!("{}", serde_json::to_string_pretty(&corpus.summary())?);
            if let Some(path) = out {
                let mut w = output(&Some(path))?;
                corpus.write_jsonl(&mut w)?;
                w.flush()?;
            }
        }
        Command::Groups { run, out } => {
            let config = run.config()?;
            let corpus = load_corpus(&config)?;
            let roles = build_groups(&corpus)?;
            for problem in group_algebra_check(&roles) {
                eprintln!("warning: {problem}");
            }
            let mut w = output(&out)?;
            roles.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Coord {
            run,
            group_b,
            group_a,
            out,
        } => {
            let config = run.config()?;
            let corpus = load_corpus(&config)?;
            let lexicon = config.load_lexicon()?;
            let rows = run_scores(&corpus, &lexicon, &[(group_b, group_a)], &config)?;
            let mut w = output(&out)?;
            w.write_all(scores_csv(&rows)?.as_bytes())?;
            w.flush()?;
        }
        Command::Hypotheses { run } => {
            let config = run.config()?;
            if config.corpus.is_none() {
                anyhow::bail!(stylesync::Error::InvalidConfig(
                    "--corpus is required (use `-` for standard input)".into()
                ));
            }
            let corpus = load_corpus(&config)?;
            let lexicon = config.load_lexicon()?;
            let summary = run_hypotheses(&corpus, &lexicon, &config)?;
            list_written(&write_summary(&summary, &config.out_dir)?);
        }
        Command::Synth(args) => {
            let lexicon = match &args.lexicon {
                Some(p) => stylesync::load_lexicon(p)?,
                None => Lexicon::default_markers(),
            };
            let records = generate_records(&args.generator()?, &lexicon)?;
            let mut w = output(&args.out)?;
            write_records(&records, &mut w)?;
            w.flush()?;
        }
        Command::Report {
            summary,
            format,
            error_bars,
            out_dir,
        } => {
            let stored = Summary::load(&summary)?;
            match out_dir {
                Some(dir) => list_written(&write_report(&stored.results, format, error_bars, &dir)?),
                None if format == ReportFormat::Txt => print!("{}", render_text(&stored.results)),
                None => anyhow::bail!(stylesync::Error::InvalidConfig(
                    "--out-dir is required for csv and svg reports".into()
                )),
            }
        }
        Command::Selftest { seed, corpora } => {
            if !selftest::run(seed, corpora)? {
                anyhow::bail!("selftest failed");
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<stylesync::Error>() {
        Some(e) if !e.is_data_error() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
