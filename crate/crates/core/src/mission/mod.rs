//! Problem assembly, throttle-structure handling and the solve workflow.

mod guess;
mod problem;
mod workflow;

pub use guess::{stacked_guess, StackingOptions};

pub use problem::{
    free_domain, three_domain_template, Activity, Domain, ModeSelection, ProblemError, TransferProblem,
    DEFAULT_MIN_ALTITUDES,
};
pub use workflow::{
    continuation_sweep, metrics, partition_from_structure, solve_baseline, solve_constrained, solve_seeded, switch_estimates,
    ArcMetrics, ContinuationPlan, Metrics, MissionError, MultiStart, SolveOptions, SweepEntry, TransferSolution,
    VANISHING_ARC_DAYS,
};
