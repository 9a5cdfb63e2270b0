//! Run configuration and the on-disk outputs of a full run.
//!
//! A run is configured from a plain `key = value` file, overridden key by key
//! from the command line. Output bytes never depend on the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coordination::{Analysis, CoordinationParams, SupportRule};
use crate::corpus::{Corpus, CorpusSummary, DeltaMode, IngestOptions, Scope, DEFAULT_EXCLUDED_SPEAKERS};
use crate::error::{Error, Result};
use crate::hypotheses::{run_specs, HypothesisConfig, HypothesisResult, HypothesisSpec, TTestVariant};
use crate::lexicon::{load_lexicon, Lexicon};
use crate::report::{render_figure, render_table, render_text, score_rows, write_scores, ErrorBars, FigureSpec, ScoreRow};
use crate::roles::GroupName;

pub const WORKERS_ENV: &str = "STYLESYNC_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `None` reads the corpus from standard input.
    pub corpus: Option<PathBuf>,
    /// `None` uses the built-in lexicon.
    pub lexicon: Option<PathBuf>,
    pub min_support: u64,
    pub support_rule: SupportRule,
    pub variant: TTestVariant,
    pub bonferroni: bool,
    pub scopes: Vec<Scope>,
    /// Hypothesis names; empty runs the shipped battery.
    pub hypotheses: Vec<String>,
    pub out_dir: PathBuf,
    /// `None` falls back to the environment, then to the machine's parallelism.
    pub workers: Option<usize>,
    pub seed: u64,
    pub error_bars: ErrorBars,
    pub delta_mode: DeltaMode,
    pub strip_quotes: bool,
    pub lax: bool,
    pub exclude_speakers: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            lexicon: None,
            min_support: 3,
            support_rule: SupportRule::Target,
            variant: TTestVariant::Welch,
            bonferroni: false,
            scopes: vec![Scope::All],
            hypotheses: Vec::new(),
            out_dir: PathBuf::from("out"),
            workers: None,
            seed: 0,
            error_bars: ErrorBars::StdErr,
            delta_mode: DeltaMode::MetadataOnly,
            strip_quotes: false,
            lax: false,
            exclude_speakers: DEFAULT_EXCLUDED_SPEAKERS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: `{value}` is not a boolean"))),
    }
}

impl RunConfig {
    /// Sets one key. Keys use underscores; dashes are accepted.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "corpus" => self.corpus = (value != "-" && !value.is_empty()).then(|| PathBuf::from(value)),
            "lexicon" => self.lexicon = (!value.is_empty() && value != "default").then(|| PathBuf::from(value)),
            "min_support" => self.min_support = parse(&key, value)?,
            "support_rule" => self.support_rule = value.parse()?,
            "variant" | "ttest" => self.variant = value.parse()?,
            "bonferroni" => self.bonferroni = parse_bool(&key, value)?,
            "scopes" => self.scopes = list(value).map(Scope::from_str).collect::<Result<_>>()?,
            "hypotheses" => self.hypotheses = list(value).map(str::to_string).collect(),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "workers" => {
                let n: usize = parse(&key, value)?;
                if n == 0 {
                    return Err(Error::InvalidConfig("workers must be at least 1".into()));
                }
                self.workers = Some(n);
            }
            "seed" => self.seed = parse(&key, value)?,
            "error_bars" => self.error_bars = value.parse()?,
            "delta_mode" => self.delta_mode = value.parse()?,
            "strip_quotes" => self.strip_quotes = parse_bool(&key, value)?,
            "lax" => self.lax = parse_bool(&key, value)?,
            "exclude_speakers" => self.exclude_speakers = list(value).map(str::to_string).collect(),
            _ => return Err(Error::InvalidConfig(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file on top of `self`. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::InvalidConfig(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = RunConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn params(&self) -> CoordinationParams {
        CoordinationParams {
            min_support: self.min_support,
            support_rule: self.support_rule,
        }
    }

    pub fn hypothesis_config(&self) -> HypothesisConfig {
        HypothesisConfig {
            params: self.params(),
            variant: self.variant,
            bonferroni: self.bonferroni,
        }
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            exclude_speakers: self.exclude_speakers.clone(),
            delta_mode: self.delta_mode,
            lax: self.lax,
            strip_quotes: self.strip_quotes,
        }
    }

    pub fn specs(&self) -> Result<Vec<HypothesisSpec>> {
        if self.hypotheses.is_empty() {
            return Ok(HypothesisSpec::shipped());
        }
        self.hypotheses
            .iter()
            .map(|n| HypothesisSpec::by_name(n).ok_or_else(|| Error::InvalidConfig(format!("unknown hypothesis `{n}`"))))
            .collect()
    }

    pub fn load_lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon {
            Some(p) => load_lexicon(p),
            None => Ok(Lexicon::default_markers()),
        }
    }

    /// Worker count from the config, else `STYLESYNC_WORKERS`, else the
    /// available parallelism.
    pub fn resolve_workers(&self) -> Result<usize> {
        if let Some(n) = self.workers {
            return Ok(n);
        }
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(n),
                _ => Err(Error::InvalidConfig(format!("{WORKERS_ENV}: `{v}` is not a positive integer"))),
            },
            Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
        }
    }

    /// Runs `f` on a dedicated pool of the resolved worker count.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.resolve_workers()?)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// The settings that shape results, recorded alongside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub params: CoordinationParams,
    pub variant: TTestVariant,
    pub bonferroni: bool,
    pub delta_mode: DeltaMode,
    pub strip_quotes: bool,
    pub exclude_speakers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub corpus: CorpusSummary,
    pub settings: RunSettings,
    pub results: Vec<HypothesisResult>,
}

impl Summary {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn run_hypotheses(corpus: &Corpus, lexicon: &Lexicon, config: &RunConfig) -> Result<Summary> {
    let specs = config.specs()?;
    let results = config.install(|| -> Result<Vec<HypothesisResult>> {
        let analysis = Analysis::new(corpus, lexicon)?;
        Ok(run_specs(&analysis, &specs, &config.hypothesis_config()))
    })??;
    Ok(Summary {
        corpus: corpus.summary(),
        settings: RunSettings {
            params: config.params(),
            variant: config.variant,
            bonferroni: config.bonferroni,
            delta_mode: config.delta_mode,
            strip_quotes: config.strip_quotes,
            exclude_speakers: config.exclude_speakers.clone(),
        },
        results,
    })
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// One CSV per hypothesis plus `summary.json`. Returns the written paths.
pub fn write_summary(summary: &Summary, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    let mut written = Vec::new();
    for r in &summary.results {
        written.push(write(dir, &format!("{}.csv", r.name), &render_table(r))?);
    }
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    written.push(write(dir, "summary.json", &json)?);
    Ok(written)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Txt,
    Svg,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "txt" | "text" => Ok(ReportFormat::Txt),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(Error::InvalidConfig(format!("unknown report format `{other}`"))),
        }
    }
}

/// Renders stored results: a CSV or SVG per hypothesis, or one `report.txt`.
pub fn write_report(results: &[HypothesisResult], format: ReportFormat, error_bars: ErrorBars, dir: &Path) -> Result<Vec<PathBuf>> {
    create_dir(dir)?;
    match format {
        ReportFormat::Txt => Ok(vec![write(dir, "report.txt", &render_text(results))?]),
        ReportFormat::Csv => results
            .iter()
            .map(|r| write(dir, &format!("{}.csv", r.name), &render_table(r)))
            .collect(),
        ReportFormat::Svg => results
            .iter()
            .map(|r| {
                let svg = render_figure(&FigureSpec::from_result(r, error_bars));
                write(dir, &format!("{}.svg", r.name), &svg)
            })
            .collect(),
    }
}

/// Per-speaker scores for every `(repliers, targets)` pair in every scope.
pub fn run_scores(
    corpus: &Corpus,
    lexicon: &Lexicon,
    pairs: &[(GroupName, GroupName)],
    config: &RunConfig,
) -> Result<Vec<ScoreRow>> {
    config.install(|| -> Result<Vec<ScoreRow>> {
        let analysis = Analysis::new(corpus, lexicon)?;
        let mut rows = Vec::new();
        for &scope in &config.scopes {
            for &(b, a) in pairs {
                rows.extend(score_rows(&analysis, b, a, scope, config.params()));
            }
        }
        Ok(rows)
    })?
}

pub fn scores_csv(rows: &[ScoreRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_scores(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}
