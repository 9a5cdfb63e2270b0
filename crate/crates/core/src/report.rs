//! Tables, bar-chart figures, and score dumps.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coordination::{aggregate_values, AggregateKind, Analysis, CoordinationParams};
use crate::corpus::Scope;
use crate::error::{Error, Result};
use crate::hypotheses::{CellResult, CellStatus, Direction, HypothesisResult};
use crate::roles::GroupName;

pub const TABLE_HEADER: [&str; 13] = [
    "marker_or_aggregate",
    "mean1",
    "mean2",
    "n1",
    "n2",
    "t",
    "df",
    "p",
    "stars",
    "direction",
    "stderr1",
    "stderr2",
    "status",
];

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn parse_num(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field.parse().map(Some).map_err(|_| Error::MalformedRecord {
        line,
        reason: format!("`{field}` is not a number"),
    })
}

/// One CSV row per marker and aggregate. Floats are written in shortest
/// round-trip form; untestable fields are empty.
pub fn render_table(result: &HypothesisResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TABLE_HEADER).expect("writing to memory");
    for c in &result.cells {
        w.write_record([
            c.label.clone(),
            num(c.mean1),
            num(c.mean2),
            c.n1.to_string(),
            c.n2.to_string(),
            num(c.t),
            num(c.df),
            num(c.p),
            c.stars.clone(),
            c.direction.map(|d| d.symbol().to_string()).unwrap_or_default(),
            num(c.stderr1),
            num(c.stderr2),
            c.status.as_str().to_string(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("writing to memory")).expect("csv output is utf-8")
}

/// Reads back the rows written by [`render_table`].
pub fn parse_table<R: Read>(input: R) -> Result<Vec<CellResult>> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(TABLE_HEADER) {
        return Err(Error::MalformedRecord {
            line: 1,
            reason: "unexpected table header".into(),
        });
    }
    let mut cells = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let bad = |reason: String| Error::MalformedRecord { line, reason };
        let count = |f: &str| f.parse::<usize>().map_err(|_| bad(format!("`{f}` is not a count")));
        let label = row[0].to_string();
        let aggregate = AggregateKind::ALL.into_iter().find(|k| k.as_str() == label);
        let direction = match &row[9] {
            "" => None,
            s => Some(Direction::from_symbol(s).ok_or_else(|| bad(format!("unknown direction `{s}`")))?),
        };
        let status = match &row[12] {
            "tested" => CellStatus::Tested,
            "insufficient" => CellStatus::Insufficient,
            "degenerate" => CellStatus::Degenerate,
            s => return Err(bad(format!("unknown status `{s}`"))),
        };
        cells.push(CellResult {
            label,
            aggregate,
            mean1: parse_num(&row[1], line)?,
            mean2: parse_num(&row[2], line)?,
            n1: count(&row[3])?,
            n2: count(&row[4])?,
            t: parse_num(&row[5], line)?,
            df: parse_num(&row[6], line)?,
            p: parse_num(&row[7], line)?,
            stars: row[8].to_string(),
            direction,
            stderr1: parse_num(&row[10], line)?,
            stderr2: parse_num(&row[11], line)?,
            status,
        });
    }
    Ok(cells)
}

fn fixed(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(x) if x != 0.0 && x.abs() < 10f64.powi(-(digits as i32)) => format!("{x:.2e}"),
        Some(x) => format!("{x:.digits$}"),
        None => "-".into(),
    }
}

/// Aligned plain-text tables, one block per result.
pub fn render_text(results: &[HypothesisResult]) -> String {
    let mut out = String::new();
    for r in results {
        let _ = writeln!(out, "{}: {} vs {}", r.name, r.side1, r.side2);
        if !r.description.is_empty() {
            let _ = writeln!(out, "  {}", r.description);
        }
        let _ = writeln!(
            out,
            "  {:<22} {:>9} {:>9} {:>6} {:>6} {:>8} {:>8} {:>10} {:<4} {:<3} status",
            "marker", "mean1", "mean2", "n1", "n2", "t", "df", "p", "sig", "dir"
        );
        for c in &r.cells {
            let _ = writeln!(
                out,
                "  {:<22} {:>9} {:>9} {:>6} {:>6} {:>8} {:>8} {:>10} {:<4} {:<3} {}",
                c.label,
                fixed(c.mean1, 4),
                fixed(c.mean2, 4),
                c.n1,
                c.n2,
                fixed(c.t, 3),
                fixed(c.df, 1),
                fixed(c.p, 4),
                c.stars,
                c.direction.map_or("", |d| d.symbol()),
                c.status
            );
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorBars {
    /// Standard error of the mean.
    #[default]
    StdErr,
    /// 1.96 standard errors.
    Ci95,
}

impl FromStr for ErrorBars {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "se" | "stderr" => Ok(ErrorBars::StdErr),
            "ci95" | "ci" => Ok(ErrorBars::Ci95),
            other => Err(Error::InvalidConfig(format!("unknown error bar kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureBar {
    pub label: String,
    pub mean1: Option<f64>,
    pub mean2: Option<f64>,
    pub err1: Option<f64>,
    pub err2: Option<f64>,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureSpec {
    pub name: String,
    pub side1: String,
    pub side2: String,
    pub bars: Vec<FigureBar>,
    pub error_bars: ErrorBars,
    /// Speakers behind the first and second aggregate kinds, per side.
    pub counts1: (usize, usize),
    pub counts2: (usize, usize),
}

impl FigureSpec {
    pub fn from_result(result: &HypothesisResult, error_bars: ErrorBars) -> Self {
        let scale = match error_bars {
            ErrorBars::StdErr => 1.0,
            ErrorBars::Ci95 => 1.96,
        };
        let bars = result
            .cells
            .iter()
            .map(|c| FigureBar {
                label: c.label.clone(),
                mean1: c.mean1,
                mean2: c.mean2,
                err1: c.stderr1.map(|s| s * scale),
                err2: c.stderr2.map(|s| s * scale),
                stars: c.stars.clone(),
            })
            .collect();
        let n = |kind, side: fn(&CellResult) -> usize| result.aggregate_cell(kind).map_or(0, side);
        FigureSpec {
            name: result.name.clone(),
            side1: result.side1.clone(),
            side2: result.side2.clone(),
            bars,
            error_bars,
            counts1: (n(AggregateKind::Agg1, |c| c.n1), n(AggregateKind::Agg2, |c| c.n1)),
            counts2: (n(AggregateKind::Agg1, |c| c.n2), n(AggregateKind::Agg2, |c| c.n2)),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 60.0;
const BOTTOM: f64 = 110.0;
const COLOR1: &str = "#4c72b0";
const COLOR2: &str = "#dd8452";

/// Smallest of 1, 2 or 5 times a power of ten that is at least `raw`.
fn tick_step(raw: f64) -> f64 {
    let scale = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|f| f * scale)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * scale)
}

/// A self-contained SVG grouped bar chart. Output depends only on `spec`.
pub fn render_figure(spec: &FigureSpec) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;

    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for b in &spec.bars {
        for (m, e) in [(b.mean1, b.err1), (b.mean2, b.err2)] {
            if let Some(m) = m {
                let e = e.unwrap_or(0.0);
                lo = lo.min(m - e);
                hi = hi.max(m + e);
            }
        }
    }
    if hi - lo < 1e-9 {
        hi = lo + 1.0;
    }
    let pad = (hi - lo) * 0.15;
    let (lo, hi) = (if lo < 0.0 { lo - pad } else { lo }, hi + pad);
    let y = |v: f64| TOP + (hi - v) / (hi - lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&spec.name)
    );

    // legend
    let legend = [
        (COLOR1, &spec.side1, spec.counts1),
        (COLOR2, &spec.side2, spec.counts2),
    ];
    for (i, (color, label, (n_a, n_b))) in legend.iter().enumerate() {
        let lx = LEFT + i as f64 * plot_w / 2.0;
        let _ = writeln!(s, r#"<rect x="{lx:.2}" y="32" width="12" height="12" fill="{color}"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="42">{} (n = {n_a}, {n_b})</text>"#,
            lx + 16.0,
            escape(label)
        );
    }

    // axes and ticks
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        TOP + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="black"/>"#,
        y(0.0),
        LEFT + plot_w
    );
    let step = tick_step((hi - lo) / 5.0);
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let mut k = (lo / step).ceil() as i64;
    while k as f64 * step <= hi {
        let v = k as f64 * step;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{1:.2}" x2="{LEFT}" y2="{1:.2}" stroke="black"/>"#,
            LEFT - 3.0,
            y(v)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.digits$}</text>"#,
            LEFT - 6.0,
            y(v) + 4.0
        );
        k += 1;
    }

    let n = spec.bars.len().max(1) as f64;
    let slot = plot_w / n;
    let bar_w = slot * 0.35;
    for (i, b) in spec.bars.iter().enumerate() {
        let cx = LEFT + slot * (i as f64 + 0.5);
        let mut top = y(0.0);
        for (k, (mean, err, color)) in [(b.mean1, b.err1, COLOR1), (b.mean2, b.err2, COLOR2)].into_iter().enumerate() {
            let Some(m) = mean else { continue };
            let x = cx - bar_w + k as f64 * bar_w;
            let (y0, y1) = (y(m.max(0.0)), y(m.min(0.0)));
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y0:.2}" width="{bar_w:.2}" height="{:.2}" fill="{color}"/>"#,
                y1 - y0
            );
            top = top.min(y0);
            if let Some(e) = err {
                let ex = x + bar_w / 2.0;
                let (ea, eb) = (y(m + e), y(m - e));
                let _ = writeln!(
                    s,
                    r#"<line x1="{ex:.2}" y1="{ea:.2}" x2="{ex:.2}" y2="{eb:.2}" stroke="black"/>"#
                );
                top = top.min(ea);
            }
        }
        if !b.stars.is_empty() {
            let _ = writeln!(
                s,
                r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#,
                top - 4.0,
                b.stars
            );
        }
        let ly = TOP + plot_h + 12.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-40 {cx:.2} {ly:.2})">{}</text>"#,
            escape(&b.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One line of a score dump. Aggregate rows carry no support or pair count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub scope: String,
    pub group_b: String,
    pub group_a: String,
    pub marker_or_aggregate: String,
    pub speaker: String,
    pub value: Option<f64>,
    pub delta_support: Option<u64>,
    pub n_pairs: Option<u64>,
}

/// Per-speaker scores of `repliers` toward `targets`: every marker, then the
/// three aggregates.
pub fn score_rows(
    analysis: &Analysis<'_>,
    repliers: GroupName,
    targets: GroupName,
    scope: Scope,
    params: CoordinationParams,
) -> Vec<ScoreRow> {
    let roles = analysis.roles();
    let scores = analysis.speaker_scores(roles.group(repliers), roles.group(targets), scope, params);
    let names: Vec<String> = scores.speakers.iter().map(|&d| roles.dummy(d).to_string()).collect();
    let row = |label: &str, i: usize, value, support, pairs| ScoreRow {
        scope: scope.as_str().to_string(),
        group_b: repliers.as_str().to_string(),
        group_a: targets.as_str().to_string(),
        marker_or_aggregate: label.to_string(),
        speaker: names[i].clone(),
        value,
        delta_support: support,
        n_pairs: pairs,
    };
    let mut rows = Vec::new();
    for (m, name) in analysis.lexicon().names().enumerate() {
        for (i, s) in scores.per_marker[m].iter().enumerate() {
            rows.push(row(name, i, s.value, Some(s.support), Some(s.n_pairs)));
        }
    }
    let matrix = scores.value_matrix();
    for kind in AggregateKind::ALL {
        for (i, v) in aggregate_values(&matrix, kind).into_iter().enumerate() {
            rows.push(row(kind.as_str(), i, v, None, None));
        }
    }
    rows
}

pub const SCORE_HEADER: [&str; 8] = [
    "scope",
    "group_B",
    "group_A",
    "marker_or_aggregate",
    "speaker",
    "value",
    "delta_support",
    "n_pairs",
];

pub fn write_scores<W: Write>(rows: &[ScoreRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_HEADER)?;
    for r in rows {
        w.write_record([
            r.scope.as_str(),
            &r.group_b,
            &r.group_a,
            &r.marker_or_aggregate,
            &r.speaker,
            &num(r.value),
            &r.delta_support.map(|v| v.to_string()).unwrap_or_default(),
            &r.n_pairs.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<scores>", e))?;
    Ok(())
}
