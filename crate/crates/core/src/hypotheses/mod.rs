//! Two-sample comparisons of group coordination.
//!
//! A hypothesis compares two sides, each a `(repliers, targets, scope)`
//! triple. For every marker and every aggregate the per-speaker scores of the
//! two sides are compared with a two-sample t-test.

mod ttest;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use ttest::{mean_var, std_error, stars, t_test, two_sided_p, TTest, TTestVariant};

use crate::coordination::{aggregate_values, mean, AggregateKind, Analysis, CoordinationParams};
use crate::corpus::Scope;
use crate::roles::GroupName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Side {
    pub repliers: GroupName,
    pub targets: GroupName,
    pub scope: Scope,
}

impl Side {
    pub const fn new(repliers: GroupName, targets: GroupName, scope: Scope) -> Self {
        Side {
            repliers,
            targets,
            scope,
        }
    }

    pub fn label(&self) -> String {
        let scope = match self.scope {
            Scope::All => "",
            Scope::DeltaBranches => "^Δ",
            Scope::NonDeltaBranches => "^~Δ",
            Scope::PreDelta => "_pre-Δ",
        };
        format!("C{scope}({}, {})", self.repliers.notation(), self.targets.notation())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    None,
}

impl Direction {
    fn of(diff: f64) -> Self {
        if diff > 0.0 {
            Direction::Positive
        } else if diff < 0.0 {
            Direction::Negative
        } else {
            Direction::None
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Positive => "+",
            Direction::Negative => "-",
            Direction::None => "0",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        match s {
            "+" => Some(Direction::Positive),
            "-" => Some(Direction::Negative),
            "0" => Some(Direction::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    pub name: String,
    pub description: String,
    pub side1: Side,
    pub side2: Side,
    /// Expected sign of `mean1 - mean2` under the research hypothesis.
    pub expected: Direction,
}

impl HypothesisSpec {
    fn new(name: &str, description: &str, side1: Side, side2: Side, expected: Direction) -> Self {
        HypothesisSpec {
            name: name.into(),
            description: description.into(),
            side1,
            side2,
            expected,
        }
    }

    /// The eight shipped hypotheses, in execution order.
    pub fn shipped() -> Vec<HypothesisSpec> {
        use GroupName::*;
        use Scope::{DeltaBranches, NonDeltaBranches, PreDelta};
        vec![
            Self::new(
                "H1.1",
                "OPs vs non-OPs, coordination toward everyone",
                Side::new(Ops, All, Scope::All),
                Side::new(NonOps, All, Scope::All),
                Direction::Positive,
            ),
            Self::new(
                "H1.2",
                "OPs in their own threads vs OP accounts elsewhere",
                Side::new(Ops, All, Scope::All),
                Side::new(ReturningOps, All, Scope::All),
                Direction::Positive,
            ),
            Self::new(
                "H2",
                "non-OP delta givers vs non-givers",
                Side::new(DeltaRegulars, All, Scope::All),
                Side::new(NonDeltaGivers, All, Scope::All),
                Direction::Positive,
            ),
            Self::new(
                "H3",
                "delta branches vs non-delta branches",
                Side::new(All, All, DeltaBranches),
                Side::new(All, All, NonDeltaBranches),
                Direction::None,
            ),
            Self::new(
                "H4",
                "coordination toward delta givers vs non-givers, before the award",
                Side::new(All, DeltaGivers, PreDelta),
                Side::new(All, NonDeltaGivers, PreDelta),
                Direction::None,
            ),
            Self::new(
                "H4.1",
                "toward non-OP delta givers vs non-givers, before the award",
                Side::new(All, DeltaRegulars, PreDelta),
                Side::new(All, NonDeltaGivers, PreDelta),
                Direction::None,
            ),
            Self::new(
                "H4.2",
                "toward delta-giving OPs vs OPs without a delta, before the award",
                Side::new(All, DeltaOps, PreDelta),
                Side::new(All, OpsWithoutDelta, PreDelta),
                Direction::None,
            ),
            Self::new(
                "H4.3",
                "toward OPs vs toward non-OPs",
                Side::new(All, Ops, Scope::All),
                Side::new(All, NonOps, Scope::All),
                Direction::None,
            ),
        ]
    }

    /// OP accounts outside their own threads vs accounts that never open one.
    pub fn returning_op_control() -> HypothesisSpec {
        Self::new(
            "H1.2-control",
            "OP accounts outside their own threads vs never-OP accounts",
            Side::new(GroupName::ReturningOps, GroupName::All, Scope::All),
            Side::new(GroupName::NeverOps, GroupName::All, Scope::All),
            Direction::None,
        )
    }

    pub fn by_name(name: &str) -> Option<HypothesisSpec> {
        Self::shipped()
            .into_iter()
            .chain([Self::returning_op_control()])
            .find(|s| s.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisConfig {
    pub params: CoordinationParams,
    pub variant: TTestVariant,
    /// Multiply each p-value by the number of tested cells of the hypothesis.
    pub bonferroni: bool,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        HypothesisConfig {
            params: CoordinationParams::default(),
            variant: TTestVariant::Welch,
            bonferroni: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Tested,
    /// Fewer than two defined speakers on a side.
    Insufficient,
    /// Both samples constant.
    Degenerate,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Tested => "tested",
            CellStatus::Insufficient => "insufficient",
            CellStatus::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One marker or aggregate of a hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub label: String,
    pub aggregate: Option<AggregateKind>,
    pub mean1: Option<f64>,
    pub mean2: Option<f64>,
    pub n1: usize,
    pub n2: usize,
    pub stderr1: Option<f64>,
    pub stderr2: Option<f64>,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
    pub stars: String,
    pub direction: Option<Direction>,
    pub status: CellStatus,
}

impl CellResult {
    fn compare(label: String, aggregate: Option<AggregateKind>, s1: &[f64], s2: &[f64], variant: TTestVariant) -> Self {
        let (mean1, mean2) = (mean(s1), mean(s2));
        let direction = mean1.zip(mean2).map(|(a, b)| Direction::of(a - b));
        let (test, status) = if s1.len() < 2 || s2.len() < 2 {
            (None, CellStatus::Insufficient)
        } else {
            match t_test(s1, s2, variant) {
                Ok(t) => (Some(t), CellStatus::Tested),
                Err(_) => (None, CellStatus::Degenerate),
            }
        };
        CellResult {
            label,
            aggregate,
            mean1,
            mean2,
            n1: s1.len(),
            n2: s2.len(),
            stderr1: std_error(s1),
            stderr2: std_error(s2),
            t: test.map(|t| t.t),
            df: test.map(|t| t.df),
            p: test.map(|t| t.p),
            stars: test.map_or("", |t| stars(t.p)).to_string(),
            direction,
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub name: String,
    pub description: String,
    pub side1: String,
    pub side2: String,
    pub expected: Direction,
    pub variant: TTestVariant,
    pub bonferroni: bool,
    /// Markers in lexicon order, then the three aggregates.
    pub cells: Vec<CellResult>,
}

impl HypothesisResult {
    pub fn cell(&self, label: &str) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.label == label)
    }

    pub fn aggregate_cell(&self, kind: AggregateKind) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.aggregate == Some(kind))
    }

    pub fn marker_cells(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(|c| c.aggregate.is_none())
    }
}

pub fn run_hypothesis(analysis: &Analysis<'_>, spec: &HypothesisSpec, config: &HypothesisConfig) -> HypothesisResult {
    let roles = analysis.roles();
    let side_scores = |side: &Side| {
        analysis
            .speaker_scores(roles.group(side.repliers), roles.group(side.targets), side.scope, config.params)
            .value_matrix()
    };
    let (m1, m2) = rayon::join(|| side_scores(&spec.side1), || side_scores(&spec.side2));
    let defined = |col: &[Option<f64>]| col.iter().flatten().copied().collect::<Vec<f64>>();

    let mut cells: Vec<CellResult> = analysis
        .lexicon()
        .names()
        .enumerate()
        .map(|(m, name)| CellResult::compare(name.to_string(), None, &defined(&m1[m]), &defined(&m2[m]), config.variant))
        .collect();
    for kind in AggregateKind::ALL {
        let a1 = defined(&aggregate_values(&m1, kind));
        let a2 = defined(&aggregate_values(&m2, kind));
        cells.push(CellResult::compare(kind.as_str().to_string(), Some(kind), &a1, &a2, config.variant));
    }

    if config.bonferroni {
        let tested = cells.iter().filter(|c| c.p.is_some()).count() as f64;
        for c in cells.iter_mut() {
            if let Some(p) = c.p.as_mut() {
                *p = (*p * tested).min(1.0);
                c.stars = stars(*p).to_string();
            }
        }
    }

    HypothesisResult {
        name: spec.name.clone(),
        description: spec.description.clone(),
        side1: spec.side1.label(),
        side2: spec.side2.label(),
        expected: spec.expected,
        variant: config.variant,
        bonferroni: config.bonferroni,
        cells,
    }
}

/// Runs `specs` as independent jobs; results keep the order of `specs`.
pub fn run_specs(analysis: &Analysis<'_>, specs: &[HypothesisSpec], config: &HypothesisConfig) -> Vec<HypothesisResult> {
    specs.par_iter().map(|s| run_hypothesis(analysis, s, config)).collect()
}

/// The eight shipped hypotheses.
pub fn run_all(analysis: &Analysis<'_>, config: &HypothesisConfig) -> Vec<HypothesisResult> {
    run_specs(analysis, &HypothesisSpec::shipped(), config)
}
