//! Model checker for information-erasure properties of finite interactive
//! systems and their users: system-side input erasure, user-side erasure
//! friendliness, liveness, and the composite erasure of the synchronized
//! composition, with counterexample traces and an independent brute-force
//! oracle for cross-checking every verdict.

pub mod compose;
pub mod composite;
pub mod corpus;
pub mod driver;
pub mod dsl;
pub mod lts;
pub mod oracle;
pub mod report;
pub mod system;
pub mod user;
pub mod verdict;

pub use compose::{
    check_liveness, compose, project_system, project_user, ComposedLts, ComposedState,
};
pub use composite::{
    check_composite_erasure, enumerate_composite_points, validate_soundness_theorem,
    CompositeErasurePoint, TheoremReport,
};
pub use dsl::{expand, load_model, parse_spec, render_model, LoadedModel, ParseDiagnostic};
pub use lts::{ChannelId, Label, Lts, LtsKind, MemIndex, StateId, Trace, Value, ValueDomain};
pub use oracle::{oracle_check, OracleInput, DEFAULT_ORACLE_BUDGET};
pub use report::{render_counterexample, ReportFormat};
pub use system::{
    check_input_erasure, check_system_well_formed, enumerate_erasure_points, input_count,
    refine_with_stream, InputStream, SystemSpec,
};
pub use user::{
    check_erasure_friendly, check_secret_confinement, check_secret_singularity,
    check_stream_ability, check_user_well_formed, erasure_frontier, erasure_zone, instantiate,
    output_equal, EfReport, Memory, UserInstance, UserSpec,
};
pub use verdict::{DepthBound, Outcome, PropertyId, Verdict, Witness};
