//! Row and bound bookkeeping: every constraint row and every variable bound
//! carries a tag naming the condition it encodes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Condition encoded by a constraint row or a variable bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    /// Collocated dynamics, one row per state component and point.
    Defect,
    /// `c² + s² = 1` for each static pair.
    StaticUnit,
    /// Initial orbit state and `τ = 0` at the start of the first coast.
    InitialState,
    /// Coast along the initial orbit for the fraction set by `(c₀, s₀)`.
    InitialCoastDuration,
    /// Terminal orbit state at the end of the last coast.
    TerminalState,
    /// Coast along the terminal orbit for the fraction set by `(c_f, s_f)`.
    TerminalCoastDuration,
    /// `ν_f` of one phase equals `ν₀` of the next.
    AnomalyContinuity,
    /// `ν₀` of the first coast from `(c_ν0, s_ν0)`.
    InitialAnomaly,
    /// Dimensional position continuity between coast and transfer.
    PositionLink,
    /// Dimensional velocity continuity between coast and transfer.
    VelocityLink,
    /// `τ` continuity between coast and transfer.
    TimeContinuity,
    /// Normalized mass is 1 when the transfer starts.
    InitialMass,
    /// Mode-1 propellant integral, by quadrature.
    PropellantIntegral,
    /// Bounds on the mode-1 propellant integral.
    PropellantBound,
    /// Unit thrust direction.
    UnitDirection,
    /// At most one mode active.
    Complementarity,
    /// Throttles within `[0, 1]`.
    ThrottleBounds,
    /// Minimum altitude above either primary.
    Altitude,
    /// Full state continuity between transfer domains.
    DomainContinuity,
    /// Throttles and direction fixed by the domain's activity.
    ThrottleStructure,
    /// Nonnegative phase span.
    Ordering,
    /// Static parameters within `[-1, 1]`.
    StaticRange,
    /// Normalized mass kept away from zero.
    MassPositivity,
}

impl Tag {
    pub const ALL: [Tag; 23] = [
        Tag::Defect,
        Tag::StaticUnit,
        Tag::InitialState,
        Tag::InitialCoastDuration,
        Tag::TerminalState,
        Tag::TerminalCoastDuration,
        Tag::AnomalyContinuity,
        Tag::InitialAnomaly,
        Tag::PositionLink,
        Tag::VelocityLink,
        Tag::TimeContinuity,
        Tag::InitialMass,
        Tag::PropellantIntegral,
        Tag::PropellantBound,
        Tag::UnitDirection,
        Tag::Complementarity,
        Tag::ThrottleBounds,
        Tag::Altitude,
        Tag::DomainContinuity,
        Tag::ThrottleStructure,
        Tag::Ordering,
        Tag::StaticRange,
        Tag::MassPositivity,
    ];

    /// Tags that state the optimal control problem itself, as opposed to
    /// bookkeeping introduced by the transcription.
    pub const PROBLEM: [Tag; 18] = [
        Tag::Defect,
        Tag::StaticUnit,
        Tag::InitialState,
        Tag::InitialCoastDuration,
        Tag::TerminalState,
        Tag::TerminalCoastDuration,
        Tag::AnomalyContinuity,
        Tag::InitialAnomaly,
        Tag::PositionLink,
        Tag::VelocityLink,
        Tag::TimeContinuity,
        Tag::InitialMass,
        Tag::PropellantIntegral,
        Tag::PropellantBound,
        Tag::UnitDirection,
        Tag::Complementarity,
        Tag::ThrottleBounds,
        Tag::Altitude,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }
}

/// Metadata of one constraint row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowInfo {
    pub tag: Tag,
    pub phase: Option<usize>,
    pub interval: Option<usize>,
    pub lower: f64,
    pub upper: f64,
}

/// A bound on one decision variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub tag: Tag,
    pub variable: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub rows: Vec<RowInfo>,
    pub bounds: Vec<BoundRecord>,
}

impl ConstraintSet {
    pub fn rows_tagged(&self, tag: Tag) -> Vec<usize> {
        self.rows.iter().enumerate().filter(|(_, r)| r.tag == tag).map(|(i, _)| i).collect()
    }

    /// Tags with at least one row or bound.
    pub fn coverage(&self) -> std::collections::BTreeSet<Tag> {
        self.rows.iter().map(|r| r.tag).chain(self.bounds.iter().map(|b| b.tag)).collect()
    }

    /// Amount by which row `i` with value `g` violates its bounds.
    pub fn violation(&self, i: usize, g: f64) -> f64 {
        let r = &self.rows[i];
        (r.lower - g).max(g - r.upper).max(0.0)
    }

    /// Plain-text listing of every row with its residual at a point.
    pub fn dump(&self, values: &[f64]) -> String {
        let mut s = String::from("# row tag phase interval lower upper value violation\n");
        for (i, (r, g)) in self.rows.iter().zip(values).enumerate() {
            let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
            let _ = writeln!(
                s,
                "{i} {} {} {} {:e} {:e} {:.17e} {:e}",
                r.tag.name(),
                opt(r.phase),
                opt(r.interval),
                r.lower,
                r.upper,
                g,
                self.violation(i, *g)
            );
        }
        s.push_str("# bounds: variable tag lower upper\n");
        for b in &self.bounds {
            let _ = writeln!(s, "{} {} {:e} {:e}", b.variable, b.tag.name(), b.lower, b.upper);
        }
        s
    }
}
