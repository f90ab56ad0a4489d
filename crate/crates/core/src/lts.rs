//! Labelled transition systems, traces and the structural checks every other
//! module builds on: validation, determinism, input-enabledness and erasure
//! bracket balance.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::verdict::{DepthBound, Verdict, Witness};

/// A value of the model's finite domain, stored as an index into the declared
/// [`ValueDomain`]. Ordering follows the declaration order of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Value(u8);

impl Value {
    pub fn index(&self) -> usize {
        self.0 as usize
    }
}

/// Ordered finite set of distinct values. Declared per model file; the
/// declaration order is the tie-break order used in every enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValueDomain {
    literals: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("value domain must contain at least 2 values, got {0}")]
    TooSmall(usize),
    #[error("value domain too large ({0} values, max 256)")]
    TooLarge(usize),
    #[error("duplicate value '{0}' in domain")]
    Duplicate(String),
}

impl ValueDomain {
    pub fn new<S: Into<String>>(literals: Vec<S>) -> Result<Self, DomainError> {
        let literals: Vec<String> = literals.into_iter().map(Into::into).collect();
        if literals.len() < 2 {
            return Err(DomainError::TooSmall(literals.len()));
        }
        if literals.len() > 256 {
            return Err(DomainError::TooLarge(literals.len()));
        }
        let mut seen = BTreeSet::new();
        for lit in &literals {
            if !seen.insert(lit.clone()) {
                return Err(DomainError::Duplicate(lit.clone()));
            }
        }
        Ok(ValueDomain { literals })
    }

    /// Convenience constructor for the domain {0, 1, .., n-1}.
    pub fn numeric(n: usize) -> Self {
        ValueDomain::new((0..n).map(|i| i.to_string()).collect()).expect("numeric domain")
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.literals.len()).map(|i| Value(i as u8))
    }

    pub fn literal(&self, v: Value) -> &str {
        &self.literals[v.index()]
    }

    pub fn lookup(&self, literal: &str) -> Option<Value> {
        self.literals
            .iter()
            .position(|l| l == literal)
            .map(|i| Value(i as u8))
    }

    pub fn value_at(&self, index: usize) -> Value {
        assert!(index < self.literals.len());
        Value(index as u8)
    }

    pub fn contains(&self, v: Value) -> bool {
        v.index() < self.literals.len()
    }
}

/// Index into the user's secret memory. Indices identify secrets; they carry
/// no arithmetic meaning.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MemIndex(pub u32);

impl fmt::Display for MemIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Name of an output channel other than the erase channel.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId(pub String);

impl ChannelId {
    pub fn new(name: impl Into<String>) -> Self {
        ChannelId(name.into())
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque state name from the DSL. Lexicographic order is the tie-break order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub String);

impl StateId {
    pub fn new(name: impl Into<String>) -> Self {
        StateId(name.into())
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One interaction event. Constructors are named by data flow on the erase
/// channel, so the same constructor describes both endpoints of an exchange:
/// `ToUser(v)` is the system's emission `a!v` and the user's reception `a?v`;
/// `ToSystem(v)` is the user's emission and the system's reception. A user
/// transition therefore synchronizes with a system transition exactly when
/// the two labels are equal.
///
/// The declaration order is the label tie-break order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    /// Value passed system -> user on the erase channel.
    ToUser(Value),
    /// Value passed user -> system on the erase channel (an input of the system).
    ToSystem(Value),
    /// Begin-erase marker on the erase channel (sent by the system).
    BeginErase,
    /// End-erase marker on the erase channel (sent by the system).
    EndErase,
    /// System output on a channel other than the erase channel.
    OtherOut(ChannelId, Value),
    /// User fetch of the secret at an index of its memory.
    MemRead(MemIndex, Value),
    /// Composed-system label: a value passed between user and system.
    Sync(Value),
    /// Composed-system label: synchronized begin-erase.
    SyncBegin,
    /// Composed-system label: synchronized end-erase.
    SyncEnd,
}

impl Label {
    /// Render the label from the point of view of a model of the given kind.
    pub fn render(&self, kind: LtsKind, domain: &ValueDomain, erase_channel: &str) -> String {
        let a = erase_channel;
        match (kind, self) {
            (LtsKind::System, Label::ToUser(v)) => format!("{a}!{}", domain.literal(*v)),
            (LtsKind::System, Label::ToSystem(v)) => format!("{a}?{}", domain.literal(*v)),
            (LtsKind::System, Label::BeginErase) => format!("{a}!BE"),
            (LtsKind::System, Label::EndErase) => format!("{a}!EE"),
            (LtsKind::User, Label::ToUser(v)) => format!("{a}?{}", domain.literal(*v)),
            (LtsKind::User, Label::ToSystem(v)) => format!("{a}!{}", domain.literal(*v)),
            (LtsKind::User, Label::BeginErase) => format!("{a}?BE"),
            (LtsKind::User, Label::EndErase) => format!("{a}?EE"),
            (_, Label::OtherOut(ch, v)) => format!("{ch}!{}", domain.literal(*v)),
            (_, Label::MemRead(i, v)) => format!("{i}?{}", domain.literal(*v)),
            (_, Label::Sync(v)) => domain.literal(*v).to_string(),
            (_, Label::SyncBegin) => "BE".to_string(),
            (_, Label::SyncEnd) => "EE".to_string(),
            // Labels foreign to the kind; render from the composed view.
            (LtsKind::Composed, Label::ToUser(v)) | (LtsKind::Composed, Label::ToSystem(v)) => {
                format!("{a}.{}", domain.literal(*v))
            }
            (LtsKind::Composed, Label::BeginErase) => format!("{a}.BE"),
            (LtsKind::Composed, Label::EndErase) => format!("{a}.EE"),
        }
    }

    /// Whether this label is a value input for a model of the given kind
    /// (the labels subject to input-enabled branching).
    pub fn is_input_for(&self, kind: LtsKind) -> bool {
        match kind {
            LtsKind::System => matches!(self, Label::ToSystem(_)),
            LtsKind::User => matches!(self, Label::ToUser(_) | Label::MemRead(_, _)),
            LtsKind::Composed => false,
        }
    }

    /// Whether this label is legal inside a model of the given kind.
    pub fn legal_for(&self, kind: LtsKind) -> bool {
        match kind {
            LtsKind::System => matches!(
                self,
                Label::ToUser(_)
                    | Label::ToSystem(_)
                    | Label::BeginErase
                    | Label::EndErase
                    | Label::OtherOut(_, _)
            ),
            LtsKind::User => matches!(
                self,
                Label::ToUser(_)
                    | Label::ToSystem(_)
                    | Label::BeginErase
                    | Label::EndErase
                    | Label::MemRead(_, _)
            ),
            LtsKind::Composed => matches!(
                self,
                Label::Sync(_)
                    | Label::SyncBegin
                    | Label::SyncEnd
                    | Label::OtherOut(_, _)
                    | Label::MemRead(_, _)
            ),
        }
    }

    pub fn value(&self) -> Option<Value> {
        match self {
            Label::ToUser(v)
            | Label::ToSystem(v)
            | Label::OtherOut(_, v)
            | Label::MemRead(_, v)
            | Label::Sync(v) => Some(*v),
            _ => None,
        }
    }
}

/// What a model describes: a system, a user, or their composition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LtsKind {
    System,
    User,
    Composed,
}

impl fmt::Display for LtsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LtsKind::System => write!(f, "system"),
            LtsKind::User => write!(f, "user"),
            LtsKind::Composed => write!(f, "composed"),
        }
    }
}

/// One transition of an LTS.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub from: StateId,
    pub label: Label,
    pub to: StateId,
}

impl Transition {
    pub fn new(from: StateId, label: Label, to: StateId) -> Self {
        Transition { from, label, to }
    }
}

/// Finite sequence of labels, possibly empty.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Trace(pub Vec<Label>);

impl Trace {
    pub fn empty() -> Self {
        Trace(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_prefix_of(&self, other: &Trace) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn push(&mut self, label: Label) {
        self.0.push(label);
    }

    pub fn extended(&self, label: Label) -> Trace {
        let mut t = self.clone();
        t.push(label);
        t
    }

    pub fn render(&self, kind: LtsKind, domain: &ValueDomain, erase_channel: &str) -> String {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|l| l.render(kind, domain, erase_channel))
            .collect();
        parts.join(" ")
    }
}

impl FromIterator<Label> for Trace {
    fn from_iter<I: IntoIterator<Item = Label>>(iter: I) -> Self {
        Trace(iter.into_iter().collect())
    }
}

/// A finite labelled transition system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lts {
    pub kind: LtsKind,
    pub domain: ValueDomain,
    pub initial: StateId,
    pub states: BTreeSet<StateId>,
    transitions: BTreeSet<Transition>,
    adjacency: BTreeMap<StateId, Vec<Transition>>,
}

impl Lts {
    pub fn new(
        kind: LtsKind,
        domain: ValueDomain,
        initial: StateId,
        states: BTreeSet<StateId>,
        transitions: BTreeSet<Transition>,
    ) -> Self {
        let mut adjacency: BTreeMap<StateId, Vec<Transition>> = BTreeMap::new();
        for t in &transitions {
            adjacency.entry(t.from.clone()).or_default().push(t.clone());
        }
        // BTreeSet iteration is (from, label, to)-sorted, so each adjacency
        // list is already in tie-break order.
        Lts {
            kind,
            domain,
            initial,
            states,
            transitions,
            adjacency,
        }
    }

    pub fn transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter()
    }

    pub fn outgoing(&self, s: &StateId) -> &[Transition] {
        self.adjacency.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    /// States with no outgoing transitions.
    pub fn is_stuck(&self, s: &StateId) -> bool {
        self.outgoing(s).is_empty()
    }

    /// States reachable from the initial state, in BFS discovery order.
    pub fn reachable(&self) -> Vec<StateId> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        if self.states.contains(&self.initial) {
            seen.insert(self.initial.clone());
            order.push(self.initial.clone());
            queue.push_back(self.initial.clone());
        }
        while let Some(s) = queue.pop_front() {
            for t in self.outgoing(&s) {
                if seen.insert(t.to.clone()) {
                    order.push(t.to.clone());
                    queue.push_back(t.to.clone());
                }
            }
        }
        order
    }

    /// Shortest trace from the initial state to each reachable state.
    pub fn shortest_traces(&self) -> BTreeMap<StateId, Trace> {
        self.shortest_traces_from(&self.initial)
    }

    pub fn shortest_traces_from(&self, from: &StateId) -> BTreeMap<StateId, Trace> {
        let mut best: BTreeMap<StateId, Trace> = BTreeMap::new();
        let mut queue = VecDeque::new();
        best.insert(from.clone(), Trace::empty());
        queue.push_back(from.clone());
        while let Some(s) = queue.pop_front() {
            let here = best[&s].clone();
            for t in self.outgoing(&s) {
                if !best.contains_key(&t.to) {
                    best.insert(t.to.clone(), here.extended(t.label.clone()));
                    queue.push_back(t.to.clone());
                }
            }
        }
        best
    }

    /// Does the model accept `trace` starting from `from`? Handles
    /// nondeterministic models by tracking the full set of current states.
    pub fn accepts(&self, from: &StateId, trace: &Trace) -> bool {
        let mut current: BTreeSet<&StateId> = BTreeSet::new();
        current.insert(from);
        for label in trace.labels() {
            let mut next = BTreeSet::new();
            for s in &current {
                for t in self.outgoing(s) {
                    if &t.label == label {
                        next.insert(&t.to);
                    }
                }
            }
            if next.is_empty() {
                return false;
            }
            current = next;
        }
        true
    }

    /// Structural validation: initial state declared, transition endpoints
    /// known, labels legal for the model kind, values inside the domain.
    /// All problems are reported inside the verdict.
    pub fn validate(&self) -> Verdict {
        let mut problems = Vec::new();
        if !self.states.contains(&self.initial) {
            problems.push(Witness::note(format!(
                "initial state {} is not declared",
                self.initial
            )));
        }
        for t in &self.transitions {
            if !self.states.contains(&t.from) {
                problems.push(Witness::note(format!(
                    "transition source {} is not a declared state",
                    t.from
                )));
            }
            if !self.states.contains(&t.to) {
                problems.push(Witness::note(format!(
                    "transition target {} is not a declared state (from {})",
                    t.to, t.from
                )));
            }
            if !t.label.legal_for(self.kind) {
                problems.push(Witness::note(format!(
                    "label illegal for kind {}: {} -> {} : {:?}",
                    self.kind, t.from, t.to, t.label
                )));
            }
            if let Some(v) = t.label.value() {
                if !self.domain.contains(v) {
                    problems.push(Witness::note(format!(
                        "value outside the declared domain on {} -> {}",
                        t.from, t.to
                    )));
                }
            }
            if let Label::MemRead(i, _) = t.label {
                if i.0 == 0 {
                    problems.push(Witness::note(format!(
                        "memory index must be positive on {} -> {}",
                        t.from, t.to
                    )));
                }
            }
        }
        if problems.is_empty() {
            Verdict::pass_exhaustive()
        } else {
            Verdict::fail(DepthBound::Exhaustive, problems)
        }
    }

    /// Determinism: two distinctly-labelled transitions from one state must
    /// both be value inputs, and same-labelled transitions agree on target.
    /// Exact (no depth bound).
    pub fn is_deterministic(&self) -> Verdict {
        let shortest = self.shortest_traces();
        let mut problems = Vec::new();
        for (state, outs) in &self.adjacency {
            let reach = |w: &mut Witness| {
                if let Some(t) = shortest.get(state) {
                    w.trace = t.clone();
                    w.states = vec![state.clone()];
                }
            };
            for (i, t1) in outs.iter().enumerate() {
                for t2 in &outs[i + 1..] {
                    if t1.label != t2.label {
                        if !(t1.label.is_input_for(self.kind) && t2.label.is_input_for(self.kind)) {
                            let mut w = Witness::note(format!(
                                "state {state} offers two non-input labels {:?} and {:?}",
                                t1.label, t2.label
                            ));
                            reach(&mut w);
                            problems.push(w);
                        }
                    } else if t1.to != t2.to {
                        let mut w = Witness::note(format!(
                            "state {state} has two targets {} and {} for the same label {:?}",
                            t1.to, t2.to, t1.label
                        ));
                        reach(&mut w);
                        problems.push(w);
                    }
                }
            }
        }
        if problems.is_empty() {
            Verdict::pass_exhaustive()
        } else {
            Verdict::fail(DepthBound::Exhaustive, problems)
        }
    }

    /// Input-enabledness: every state offering a value input offers it for
    /// every value of the domain. For users both the erase-channel receive
    /// and each read index must branch over the full domain. Exact.
    pub fn is_input_enabled(&self) -> Verdict {
        let shortest = self.shortest_traces();
        let mut problems = Vec::new();
        for state in &self.states {
            let outs = self.outgoing(state);
            let before = problems.len();
            match self.kind {
                LtsKind::System => {
                    self.check_full_branch(
                        state,
                        outs,
                        |l| matches!(l, Label::ToSystem(_)),
                        "input",
                        &mut problems,
                    );
                }
                LtsKind::User => {
                    self.check_full_branch(
                        state,
                        outs,
                        |l| matches!(l, Label::ToUser(_)),
                        "receive",
                        &mut problems,
                    );
                    let indices: BTreeSet<MemIndex> = outs
                        .iter()
                        .filter_map(|t| match t.label {
                            Label::MemRead(i, _) => Some(i),
                            _ => None,
                        })
                        .collect();
                    for idx in indices {
                        self.check_full_branch(
                            state,
                            outs,
                            |l| matches!(l, Label::MemRead(i, _) if *i == idx),
                            &format!("read of index {idx}"),
                            &mut problems,
                        );
                    }
                }
                LtsKind::Composed => {}
            }
            if problems.len() > before {
                if let Some(t) = shortest.get(state) {
                    for w in &mut problems[before..] {
                        w.trace = t.clone();
                        w.states = vec![state.clone()];
                    }
                }
            }
        }
        if problems.is_empty() {
            Verdict::pass_exhaustive()
        } else {
            Verdict::fail(DepthBound::Exhaustive, problems)
        }
    }

    fn check_full_branch(
        &self,
        state: &StateId,
        outs: &[Transition],
        select: impl Fn(&Label) -> bool,
        what: &str,
        problems: &mut Vec<Witness>,
    ) {
        let present: BTreeSet<Value> = outs
            .iter()
            .filter(|t| select(&t.label))
            .filter_map(|t| t.label.value())
            .collect();
        if present.is_empty() {
            return;
        }
        for v in self.domain.values() {
            if !present.contains(&v) {
                problems.push(Witness::note(format!(
                    "state {state} offers a {what} but is missing value {}",
                    self.domain.literal(v)
                )));
            }
        }
    }

    /// Exactly the traces of length <= depth starting at `from`. Always
    /// contains the empty trace.
    pub fn traces_to_depth(&self, from: &StateId, depth: usize) -> BTreeSet<Trace> {
        let mut out = BTreeSet::new();
        let mut frontier: Vec<(StateId, Trace)> = vec![(from.clone(), Trace::empty())];
        out.insert(Trace::empty());
        for _ in 0..depth {
            let mut next = Vec::new();
            for (state, trace) in frontier {
                for t in self.outgoing(&state) {
                    let extended = trace.extended(t.label.clone());
                    out.insert(extended.clone());
                    next.push((t.to.clone(), extended));
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        out
    }

    /// Per-state erasure bracket balance: the number of completed erasure
    /// openings minus the number of end-erase events on any path from the
    /// initial state. An opening completes on the full opening sequence
    /// (system: begin-erase then value input; user: begin-erase, read,
    /// emission; composed: the synchronized triple). States strictly inside
    /// an opening carry the pre-opening balance. Fails if two paths assign
    /// one state different balances.
    pub fn bracket_balance(&self) -> Result<BTreeMap<StateId, i64>, BalanceInconsistency> {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
        enum Opening {
            None,
            AfterBegin,
            AfterRead,
        }

        let step = |balance: i64, opening: Opening, label: &Label| -> (i64, Opening) {
            match (self.kind, label) {
                (_, Label::BeginErase) | (_, Label::SyncBegin) => (balance, Opening::AfterBegin),
                (_, Label::EndErase) | (_, Label::SyncEnd) => (balance - 1, Opening::None),
                (LtsKind::System, Label::ToSystem(_)) if opening == Opening::AfterBegin => {
                    (balance + 1, Opening::None)
                }
                (LtsKind::User, Label::MemRead(_, _))
                | (LtsKind::Composed, Label::MemRead(_, _))
                    if opening == Opening::AfterBegin =>
                {
                    (balance, Opening::AfterRead)
                }
                (LtsKind::User, Label::ToSystem(_)) | (LtsKind::Composed, Label::Sync(_))
                    if opening == Opening::AfterRead =>
                {
                    (balance + 1, Opening::None)
                }
                _ => (balance, Opening::None),
            }
        };

        // BFS over (state, balance, opening) configurations. A state observed
        // at two distinct balances is an inconsistency; differing opening
        // flags at equal balance are explored separately.
        let mut balances: BTreeMap<StateId, (i64, Trace)> = BTreeMap::new();
        let mut visited: BTreeSet<(StateId, i64, Opening)> = BTreeSet::new();
        let mut queue: VecDeque<(StateId, i64, Opening, Trace)> = VecDeque::new();

        balances.insert(self.initial.clone(), (0, Trace::empty()));
        visited.insert((self.initial.clone(), 0, Opening::None));
        queue.push_back((self.initial.clone(), 0, Opening::None, Trace::empty()));

        while let Some((state, balance, opening, trace)) = queue.pop_front() {
            for t in self.outgoing(&state) {
                let (nb, no) = step(balance, opening, &t.label);
                let ntrace = trace.extended(t.label.clone());
                match balances.get(&t.to) {
                    Some((known, known_trace)) if *known != nb => {
                        return Err(BalanceInconsistency {
                            state: t.to.clone(),
                            balance_a: *known,
                            witness_a: known_trace.clone(),
                            balance_b: nb,
                            witness_b: ntrace,
                        });
                    }
                    Some(_) => {}
                    None => {
                        balances.insert(t.to.clone(), (nb, ntrace.clone()));
                    }
                }
                if visited.insert((t.to.clone(), nb, no)) {
                    queue.push_back((t.to.clone(), nb, no, ntrace));
                }
            }
        }

        Ok(balances.into_iter().map(|(s, (b, _))| (s, b)).collect())
    }
}

/// Two paths assign one state different bracket balances.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("state {state} is reachable at balance {balance_a} and at balance {balance_b}")]
pub struct BalanceInconsistency {
    pub state: StateId,
    pub balance_a: i64,
    pub witness_a: Trace,
    pub balance_b: i64,
    pub witness_b: Trace,
}

impl BalanceInconsistency {
    pub fn into_witnesses(self) -> Vec<Witness> {
        vec![
            Witness::new(
                format!("path reaching {} at balance {}", self.state, self.balance_a),
                self.witness_a,
                Vec::new(),
            ),
            Witness::new(
                format!("path reaching {} at balance {}", self.state, self.balance_b),
                self.witness_b,
                Vec::new(),
            ),
        ]
    }
}
