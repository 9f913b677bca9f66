//! One-parameter families of rational maps and the parameter-space solvers
//! built on them.

mod continuation;
mod family;
mod parabolic;
mod preperiodic;
mod scenario;
mod transversality;

pub use continuation::{continue_critical, continue_cycle, MAX_DRIFT};
pub use family::{Builtin, CoefficientDirection, FamilyKind, FamilySpec, BOUNDARY_SAMPLES};
pub use parabolic::{
    dwell_seeds, solve_parabolic, solve_parabolic_seed, DwellSeed, ExactPeriodFailure, ParabolicOptions, ParabolicReport, ParabolicSeed, ParabolicSolution,
    SeedFailure, SeedOutcome, EXACT_PERIOD_TOL, F64_RESOLVED_TOL, VERIFY_TOL,
};
pub use preperiodic::{grid_starts, solve_preperiodic, PreperiodicOptions, PreperiodicRoot, ROOT_TOL};
pub use scenario::{
    scenario_driver, DiagnosticStage, FamilyStage, ParabolicStage, PreperiodicStage, ScenarioBudgets, ScenarioReport, SolutionSummary,
    StageFailure, SCHEMA_VERSION,
};
pub use transversality::{keep_others_direction, transversality_rank, Relation, Target, RelationSystem, TransversalityReport, RANK_TOL};
