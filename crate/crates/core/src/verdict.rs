//! Verdicts: the pass/fail result of a property check, with witnesses and
//! the depth bound under which the result holds.

use std::fmt;

use crate::lts::{StateId, Trace};

/// Result category of a property check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Pass => write!(f, "PASS"),
            Outcome::Fail => write!(f, "FAIL"),
            Outcome::Inconclusive => write!(f, "INCONCLUSIVE"),
        }
    }
}

/// How far the check looked. `Exhaustive` means the verdict is exact; a
/// finite bound means "no violation within the bound" for a Pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DepthBound {
    Exhaustive,
    Bounded(usize),
}

impl fmt::Display for DepthBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DepthBound::Exhaustive => write!(f, "exhaustive"),
            DepthBound::Bounded(d) => write!(f, "depth={d}"),
        }
    }
}

/// A counterexample trace or certificate attached to a verdict.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Witness {
    pub description: String,
    pub trace: Trace,
    /// States visited along the trace (one more than the labels when known).
    pub states: Vec<StateId>,
}

impl Witness {
    pub fn new(description: impl Into<String>, trace: Trace, states: Vec<StateId>) -> Self {
        Witness {
            description: description.into(),
            trace,
            states,
        }
    }

    /// A witness that is a message only (no trace to replay).
    pub fn note(description: impl Into<String>) -> Self {
        Witness {
            description: description.into(),
            trace: Trace::empty(),
            states: Vec::new(),
        }
    }
}

/// Outcome of a property check together with its witnesses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub depth_bound: DepthBound,
    pub witnesses: Vec<Witness>,
}

impl Verdict {
    pub fn pass_exhaustive() -> Self {
        Verdict {
            outcome: Outcome::Pass,
            depth_bound: DepthBound::Exhaustive,
            witnesses: Vec::new(),
        }
    }

    pub fn pass_bounded(depth: usize) -> Self {
        Verdict {
            outcome: Outcome::Pass,
            depth_bound: DepthBound::Bounded(depth),
            witnesses: Vec::new(),
        }
    }

    /// Fail verdicts must carry at least one witness.
    pub fn fail(depth_bound: DepthBound, witnesses: Vec<Witness>) -> Self {
        debug_assert!(!witnesses.is_empty(), "Fail verdict without witnesses");
        Verdict {
            outcome: Outcome::Fail,
            depth_bound,
            witnesses,
        }
    }

    pub fn inconclusive(depth: usize, witnesses: Vec<Witness>) -> Self {
        Verdict {
            outcome: Outcome::Inconclusive,
            depth_bound: DepthBound::Bounded(depth),
            witnesses,
        }
    }

    pub fn is_pass(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn is_fail(&self) -> bool {
        self.outcome == Outcome::Fail
    }
}

/// The ten checkable properties, as named by the CLI and the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropertyId {
    Determinism,
    InputEnabled,
    SystemWellFormed,
    InputErasure,
    UserWellFormed,
    Singularity,
    Confinement,
    StreamAbility,
    Liveness,
    CompositeErasure,
}

impl PropertyId {
    pub const ALL: [PropertyId; 10] = [
        PropertyId::Determinism,
        PropertyId::InputEnabled,
        PropertyId::SystemWellFormed,
        PropertyId::InputErasure,
        PropertyId::UserWellFormed,
        PropertyId::Singularity,
        PropertyId::Confinement,
        PropertyId::StreamAbility,
        PropertyId::Liveness,
        PropertyId::CompositeErasure,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PropertyId::Determinism => "determinism",
            PropertyId::InputEnabled => "input-enabled",
            PropertyId::SystemWellFormed => "system-well-formed",
            PropertyId::InputErasure => "input-erasure",
            PropertyId::UserWellFormed => "user-well-formed",
            PropertyId::Singularity => "singularity",
            PropertyId::Confinement => "confinement",
            PropertyId::StreamAbility => "stream-ability",
            PropertyId::Liveness => "liveness",
            PropertyId::CompositeErasure => "composite-erasure",
        }
    }

    /// Whether the property takes a user model, a system model, or both.
    pub fn takes(&self) -> ModelArity {
        match self {
            PropertyId::Determinism | PropertyId::InputEnabled => ModelArity::Single,
            PropertyId::SystemWellFormed | PropertyId::InputErasure => ModelArity::System,
            PropertyId::UserWellFormed
            | PropertyId::Singularity
            | PropertyId::Confinement
            | PropertyId::StreamAbility => ModelArity::User,
            PropertyId::Liveness | PropertyId::CompositeErasure => ModelArity::Pair,
        }
    }
}

/// Which model kinds a property applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelArity {
    /// Any single model.
    Single,
    /// A system model.
    System,
    /// A user model.
    User,
    /// A user and a system.
    Pair,
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

impl std::str::FromStr for PropertyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PropertyId::ALL
            .iter()
            .find(|p| p.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown property '{s}'"))
    }
}
