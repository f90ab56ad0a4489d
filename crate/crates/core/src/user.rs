//! User-side definitions: abstract users, memories and instances, user
//! well-formedness, secret singularity, erasure sessions/zones/frontiers,
//! output equality, stream ability, secret confinement and the aggregate
//! erasure-friendliness check.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::lts::{ChannelId, Label, Lts, LtsKind, MemIndex, StateId, Trace, Value};
use crate::system::SpecError;
use crate::verdict::{DepthBound, Outcome, Verdict, Witness};

/// Subset-construction size above which confinement falls back to bounded
/// trace-set comparison.
pub const DEFAULT_DETERMINIZATION_CEILING: usize = 4096;

/// A validated user model: input enabled on receives and reads. Users need
/// not be deterministic.
#[derive(Clone, Debug)]
pub struct UserSpec {
    pub lts: Lts,
    pub erase_channel: ChannelId,
}

impl UserSpec {
    pub fn new(lts: Lts, erase_channel: ChannelId) -> Result<Self, SpecError> {
        if lts.kind != LtsKind::User {
            return Err(SpecError::WrongKind {
                expected: LtsKind::User,
                got: lts.kind,
            });
        }
        let v = lts.validate();
        if !v.is_pass() {
            return Err(SpecError::NotValid(
                v.witnesses.iter().map(|w| w.description.clone()).collect(),
            ));
        }
        let v = lts.is_input_enabled();
        if !v.is_pass() {
            return Err(SpecError::NotInputEnabled(
                v.witnesses.iter().map(|w| w.description.clone()).collect(),
            ));
        }
        Ok(UserSpec { lts, erase_channel })
    }
}

/// Total map from secret indices to values over a declared finite index set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Memory {
    entries: BTreeMap<MemIndex, Value>,
}

impl Memory {
    pub fn new(entries: BTreeMap<MemIndex, Value>) -> Self {
        Memory { entries }
    }

    pub fn get(&self, i: MemIndex) -> Option<Value> {
        self.entries.get(&i).copied()
    }

    pub fn indices(&self) -> impl Iterator<Item = MemIndex> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (MemIndex, Value)> + '_ {
        self.entries.iter().map(|(i, v)| (*i, *v))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstantiateError {
    #[error("user reads index {0} which the memory does not define")]
    UnboundIndex(MemIndex),
}

/// A user refined by a memory: reads of index i are pinned to the stored
/// value, all other nondeterminism is preserved.
#[derive(Clone, Debug)]
pub struct UserInstance {
    pub user: UserSpec,
    pub memory: Memory,
    filtered: Lts,
}

impl UserInstance {
    /// The restricted transition system of the instance.
    pub fn lts(&self) -> &Lts {
        &self.filtered
    }
}

/// Refine a user by a memory. Fails if the user reads an index the memory
/// does not define.
pub fn instantiate(user: &UserSpec, memory: &Memory) -> Result<UserInstance, InstantiateError> {
    for t in user.lts.transitions() {
        if let Label::MemRead(i, _) = t.label {
            if memory.get(i).is_none() {
                return Err(InstantiateError::UnboundIndex(i));
            }
        }
    }
    let transitions = user
        .lts
        .transitions()
        .filter(|t| match t.label {
            Label::MemRead(i, v) => memory.get(i) == Some(v),
            _ => true,
        })
        .cloned()
        .collect();
    let filtered = Lts::new(
        LtsKind::User,
        user.lts.domain.clone(),
        user.lts.initial.clone(),
        user.lts.states.clone(),
        transitions,
    );
    Ok(UserInstance {
        user: user.clone(),
        memory: memory.clone(),
        filtered,
    })
}

/// User well-formedness:
/// 1. after each begin-erase receive the user reads a single index, branching
///    over the full domain, and each read is immediately followed by the
///    emission of the value just read;
/// 2. reads occur nowhere else;
/// 3. bracket counting as for systems (consistent, never negative, no
///    end-erase at balance zero, stuck states at balance zero).
///
/// Exact on finite models.
pub fn check_user_well_formed(user: &UserSpec) -> Verdict {
    let problems = user_wf_problems(user);
    if problems.is_empty() {
        Verdict::pass_exhaustive()
    } else {
        let mut ws: Vec<Witness> = problems.into_iter().map(|(_, w)| w).collect();
        ws.sort();
        ws.dedup();
        Verdict::fail(DepthBound::Exhaustive, ws)
    }
}

/// Bounded-outcome variant: Fail only when a violation manifests on some
/// run of length <= depth, matching the literal trace conditions at that
/// depth.
pub fn check_user_well_formed_at(user: &UserSpec, depth: usize) -> Verdict {
    let problems = user_wf_problems(user);
    if problems.is_empty() {
        return Verdict::pass_exhaustive();
    }
    let mut ws: Vec<Witness> = problems
        .into_iter()
        .filter(|(manifest, _)| *manifest <= depth)
        .map(|(_, w)| w)
        .collect();
    if ws.is_empty() {
        Verdict::pass_bounded(depth)
    } else {
        ws.sort();
        ws.dedup();
        Verdict::fail(DepthBound::Bounded(depth), ws)
    }
}

/// All well-formedness violations, each with the length of the shortest run
/// that exhibits it.
fn user_wf_problems(user: &UserSpec) -> Vec<(usize, Witness)> {
    let lts = &user.lts;
    let mut problems = Vec::new();
    let shortest = lts.shortest_traces();
    let reachable: BTreeSet<StateId> = shortest.keys().cloned().collect();

    // Targets of reachable begin-erase receives, with the shortest run
    // ending in the begin-erase that reaches them.
    let mut begin_targets: BTreeMap<StateId, usize> = BTreeMap::new();
    for t in lts.transitions() {
        if t.label == Label::BeginErase && reachable.contains(&t.from) {
            let manifest = shortest[&t.from].len() + 1;
            let entry = begin_targets.entry(t.to.clone()).or_insert(manifest);
            *entry = (*entry).min(manifest);
        }
    }

    // Clause 1: a violation shows on a run ending in the begin-erase.
    for (state, manifest) in &begin_targets {
        let manifest = *manifest;
        let reads: Vec<(MemIndex, Value, StateId)> = lts
            .outgoing(state)
            .iter()
            .filter_map(|t| match t.label {
                Label::MemRead(i, v) => Some((i, v, t.to.clone())),
                _ => None,
            })
            .collect();
        if reads.is_empty() {
            problems.push((
                manifest,
                Witness::new(
                    format!("state {state} follows a begin-erase but reads no secret"),
                    shortest.get(state).cloned().unwrap_or_default(),
                    vec![state.clone()],
                ),
            ));
            continue;
        }
        let indices: BTreeSet<MemIndex> = reads.iter().map(|(i, _, _)| *i).collect();
        if indices.len() > 1 {
            problems.push((
                manifest,
                Witness::new(
                    format!("state {state} reads more than one secret index after a begin-erase"),
                    shortest.get(state).cloned().unwrap_or_default(),
                    vec![state.clone()],
                ),
            ));
        }
        let offered: BTreeSet<Value> = reads.iter().map(|(_, v, _)| *v).collect();
        for v in lts.domain.values() {
            if !offered.contains(&v) {
                problems.push((
                    manifest,
                    Witness::new(
                        format!(
                            "state {state} does not read value {} after a begin-erase",
                            lts.domain.literal(v)
                        ),
                        shortest.get(state).cloned().unwrap_or_default(),
                        vec![state.clone()],
                    ),
                ));
            }
        }
        for (i, v, target) in &reads {
            let emits = lts
                .outgoing(target)
                .iter()
                .any(|t| t.label == Label::ToSystem(*v));
            if !emits {
                problems.push((
                    manifest,
                    Witness::new(
                        format!(
                            "read {i}?{} from {state} is not followed by the emission of {}",
                            lts.domain.literal(*v),
                            lts.domain.literal(*v)
                        ),
                        shortest.get(state).cloned().unwrap_or_default(),
                        vec![state.clone(), target.clone()],
                    ),
                ));
            }
        }
    }

    // Clause 2: every reachable read sits immediately after a begin-erase and
    // its target does nothing but emit the value just read.
    for t in lts.transitions() {
        let (index, value) = match t.label {
            Label::MemRead(i, v) => (i, v),
            _ => continue,
        };
        if !reachable.contains(&t.from) {
            continue;
        }
        // Shortest run exhibiting the read at a bad position: through a
        // non-begin-erase predecessor, or as the very first label.
        let mut bad_manifest: Option<usize> = if t.from == lts.initial { Some(1) } else { None };
        for p in lts.transitions() {
            if p.to == t.from && p.label != Label::BeginErase && reachable.contains(&p.from) {
                let m = shortest[&p.from].len() + 2;
                bad_manifest = Some(bad_manifest.map_or(m, |b| b.min(m)));
            }
        }
        if let Some(manifest) = bad_manifest {
            problems.push((
                manifest,
                Witness::new(
                    format!(
                        "read {index}?{} from {} does not immediately follow a begin-erase",
                        lts.domain.literal(value),
                        t.from
                    ),
                    shortest.get(&t.from).cloned().unwrap_or_default(),
                    vec![t.from.clone()],
                ),
            ));
        }
        for next in lts.outgoing(&t.to) {
            if next.label != Label::ToSystem(value) {
                problems.push((
                    shortest[&t.from].len() + 2,
                    Witness::new(
                        format!(
                            "state {} reached by the read {index}?{} continues with something \
                             other than emitting {}",
                            t.to,
                            lts.domain.literal(value),
                            lts.domain.literal(value)
                        ),
                        shortest.get(&t.from).cloned().unwrap_or_default(),
                        vec![t.from.clone(), t.to.clone()],
                    ),
                ));
            }
        }
    }

    // Clause 3.
    match lts.bracket_balance() {
        Err(inc) => {
            problems.push((
                0,
                Witness::note(format!(
                    "inconsistent bracketing: state {} has two balances",
                    inc.state
                )),
            ));
            for w in inc.into_witnesses() {
                problems.push((0, w));
            }
        }
        Ok(balances) => {
            for (state, balance) in &balances {
                let here = shortest.get(state).cloned().unwrap_or_default();
                if *balance < 0 {
                    problems.push((
                        here.len(),
                        Witness::new(
                            format!("state {state} has negative bracket balance {balance}"),
                            here.clone(),
                            vec![state.clone()],
                        ),
                    ));
                }
                let has_end = lts
                    .outgoing(state)
                    .iter()
                    .any(|t| t.label == Label::EndErase);
                if has_end && *balance <= 0 {
                    problems.push((
                        here.len() + 1,
                        Witness::new(
                            format!("end-erase received at {state} outside any open block"),
                            here.clone(),
                            vec![state.clone()],
                        ),
                    ));
                }
                if lts.is_stuck(state) && *balance != 0 {
                    problems.push((
                        here.len(),
                        Witness::new(
                            format!("user halts at {state} inside an open erasure block"),
                            here,
                            vec![state.clone()],
                        ),
                    ));
                }
            }
        }
    }
    problems
}

/// Secret singularity: no trace reads the same index twice. The shortest
/// double-read witness is found exactly on the graph; the reported outcome
/// is Fail only when that witness fits within the depth.
pub fn check_secret_singularity(user: &UserSpec, depth: usize) -> Verdict {
    let lts = &user.lts;
    let from_initial = lts.shortest_traces();
    let mut best: Option<Trace> = None;

    let read_edges: Vec<(StateId, MemIndex, Value, StateId)> = lts
        .transitions()
        .filter_map(|t| match t.label {
            Label::MemRead(i, v) => Some((t.from.clone(), i, v, t.to.clone())),
            _ => None,
        })
        .collect();

    for (from1, i1, v1, to1) in &read_edges {
        let Some(prefix) = from_initial.get(from1) else {
            continue;
        };
        let between = lts.shortest_traces_from(to1);
        for (from2, i2, v2, _) in &read_edges {
            if i1 != i2 {
                continue;
            }
            let Some(mid) = between.get(from2) else {
                continue;
            };
            let mut trace = prefix.clone();
            trace.push(Label::MemRead(*i1, *v1));
            for l in mid.labels() {
                trace.push(l.clone());
            }
            trace.push(Label::MemRead(*i2, *v2));
            match &best {
                Some(b) if (b.len(), b) <= (trace.len(), &trace) => {}
                _ => best = Some(trace),
            }
        }
    }

    match best {
        Some(witness) if witness.len() <= depth => {
            let ws = vec![Witness::new(
                "trace reading the same secret index twice",
                witness,
                Vec::new(),
            )];
            Verdict::fail(DepthBound::Bounded(depth), ws)
        }
        Some(_) => Verdict::pass_bounded(depth),
        None => Verdict::pass_exhaustive(),
    }
}

/// Whether the session closed, and how an unclosed one ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SessionStatus {
    Complete,
    Incomplete,
}

/// One erasure session of a zone: the opening triple, its body and (for
/// complete sessions) the closing end-erase.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ErasureSession {
    pub start_state: StateId,
    pub trace: Trace,
    pub status: SessionStatus,
    pub secret_index: MemIndex,
    pub secret_value: Value,
    /// State immediately after the closing end-erase of a complete session.
    pub end_state: Option<StateId>,
    /// True when an incomplete session was cut by the depth horizon and may
    /// still close beyond it.
    pub truncated: bool,
}

/// All (complete and incomplete) erasure sessions anchored at one state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErasureZone {
    pub anchor: StateId,
    pub sessions: Vec<ErasureSession>,
}

/// The post-end-erase states of the complete sessions of a zone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frontier {
    pub anchor: StateId,
    pub states: BTreeSet<StateId>,
}

/// All complete and incomplete erasure sessions starting at `anchor` with
/// trace length <= depth. Complete sessions are not re-reported as their own
/// incomplete prefixes; incomplete sessions are maximal (stuck or cut by the
/// horizon).
pub fn erasure_zone(user: &UserSpec, anchor: &StateId, depth: usize) -> ErasureZone {
    let lts = &user.lts;
    let mut sessions: BTreeSet<ErasureSession> = BTreeSet::new();

    // Opening triple: begin-erase, read, emission.
    for be in lts.outgoing(anchor) {
        if be.label != Label::BeginErase {
            continue;
        }
        for read in lts.outgoing(&be.to) {
            let (index, value) = match read.label {
                Label::MemRead(i, v) => (i, v),
                _ => continue,
            };
            for emit in lts.outgoing(&read.to) {
                if !matches!(emit.label, Label::ToSystem(_)) {
                    continue;
                }
                if depth < 3 {
                    continue;
                }
                let opening = Trace(vec![
                    be.label.clone(),
                    read.label.clone(),
                    emit.label.clone(),
                ]);
                walk_session_body(
                    lts,
                    anchor,
                    index,
                    value,
                    emit.to.clone(),
                    opening,
                    1,
                    Pending::None,
                    depth,
                    &mut sessions,
                );
            }
        }
    }

    ErasureZone {
        anchor: anchor.clone(),
        sessions: sessions.into_iter().collect(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Pending {
    None,
    AfterBegin,
    AfterRead,
}

#[allow(clippy::too_many_arguments)]
fn walk_session_body(
    lts: &Lts,
    anchor: &StateId,
    index: MemIndex,
    value: Value,
    state: StateId,
    trace: Trace,
    balance: i64,
    pending: Pending,
    depth: usize,
    sessions: &mut BTreeSet<ErasureSession>,
) {
    let outs = lts.outgoing(&state);
    if outs.is_empty() {
        sessions.insert(ErasureSession {
            start_state: anchor.clone(),
            trace,
            status: SessionStatus::Incomplete,
            secret_index: index,
            secret_value: value,
            end_state: None,
            truncated: false,
        });
        return;
    }
    if trace.len() >= depth {
        sessions.insert(ErasureSession {
            start_state: anchor.clone(),
            trace,
            status: SessionStatus::Incomplete,
            secret_index: index,
            secret_value: value,
            end_state: None,
            truncated: true,
        });
        return;
    }
    for t in outs {
        let next_trace = trace.extended(t.label.clone());
        if t.label == Label::EndErase && balance == 1 {
            sessions.insert(ErasureSession {
                start_state: anchor.clone(),
                trace: next_trace,
                status: SessionStatus::Complete,
                secret_index: index,
                secret_value: value,
                end_state: Some(t.to.clone()),
                truncated: false,
            });
            continue;
        }
        let (next_balance, next_pending) = match (&t.label, pending) {
            (Label::BeginErase, _) => (balance, Pending::AfterBegin),
            (Label::EndErase, _) => (balance - 1, Pending::None),
            (Label::MemRead(_, _), Pending::AfterBegin) => (balance, Pending::AfterRead),
            (Label::ToSystem(_), Pending::AfterRead) => (balance + 1, Pending::None),
            _ => (balance, Pending::None),
        };
        walk_session_body(
            lts,
            anchor,
            index,
            value,
            t.to.clone(),
            next_trace,
            next_balance,
            next_pending,
            depth,
            sessions,
        );
    }
}

/// The erasure frontier of the zone anchored at `anchor`.
pub fn erasure_frontier(user: &UserSpec, anchor: &StateId, depth: usize) -> Frontier {
    let zone = erasure_zone(user, anchor, depth);
    Frontier {
        anchor: anchor.clone(),
        states: zone
            .sessions
            .iter()
            .filter_map(|s| s.end_state.clone())
            .collect(),
    }
}

/// Output skeleton element of a user trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum OutputToken {
    /// Complete opening triple: begin-erase, read of (index, v), emission of v.
    Erase(MemIndex, Value),
    /// Plain emission.
    Plain(Value),
}

/// Emissions of a user trace in order, classified as erasure-opening or
/// plain. The labels of a mismatched pseudo-triple (emitted value not equal
/// to the value read) are not a token; its emission is plain.
fn output_tokens(trace: &Trace) -> Vec<OutputToken> {
    let labels = trace.labels();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < labels.len() {
        if labels[i] == Label::BeginErase && i + 2 < labels.len() {
            if let (Label::MemRead(idx, read_v), Label::ToSystem(sent_v)) =
                (&labels[i + 1], &labels[i + 2])
            {
                if read_v == sent_v {
                    tokens.push(OutputToken::Erase(*idx, *sent_v));
                    i += 3;
                    continue;
                }
            }
        }
        if let Label::ToSystem(v) = labels[i] {
            tokens.push(OutputToken::Plain(v));
        }
        i += 1;
    }
    tokens
}

fn tokens_match(a: &OutputToken, b: &OutputToken) -> bool {
    match (a, b) {
        (OutputToken::Erase(i, _), OutputToken::Erase(j, _)) => i == j,
        (OutputToken::Erase(_, v), OutputToken::Plain(x)) => v == x,
        (OutputToken::Plain(x), OutputToken::Erase(_, v)) => v == x,
        (OutputToken::Plain(x), OutputToken::Plain(y)) => x == y,
    }
}

/// Output equality of two finite user traces: the relation generated by
/// matching erasure openings on their secret index, erasure openings against
/// plain outputs of the same value, plain outputs on equal values, skipping
/// non-output labels, and relating empty traces.
pub fn output_equal(t: &Trace, t2: &Trace) -> bool {
    let a = output_tokens(t);
    let b = output_tokens(t2);
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| tokens_match(x, y))
}

/// Three-valued comparison used under depth truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cmp {
    Ok,
    Mismatch(usize),
    Indeterminate,
}

/// Compare the committed output tokens of two sessions, aware of truncation:
/// a divergence among committed tokens is final, a missing tail of a
/// truncated session is not.
fn compare_sessions(a: &ErasureSession, b: &ErasureSession) -> Cmp {
    let ta = output_tokens(&a.trace);
    let tb = output_tokens(&b.trace);
    for (k, (x, y)) in ta.iter().zip(tb.iter()).enumerate() {
        if !tokens_match(x, y) {
            return Cmp::Mismatch(k);
        }
    }
    if ta.len() == tb.len() {
        if a.truncated || b.truncated {
            Cmp::Indeterminate
        } else {
            Cmp::Ok
        }
    } else {
        let (shorter, _longer) = if ta.len() < tb.len() { (a, b) } else { (b, a) };
        if shorter.truncated {
            Cmp::Indeterminate
        } else {
            Cmp::Mismatch(ta.len().min(tb.len()))
        }
    }
}

/// Reachable states (within depth) that anchor a zone: they have an outgoing
/// begin-erase receive.
fn anchors_within(lts: &Lts, depth: usize) -> Vec<StateId> {
    let shortest = lts.shortest_traces();
    let mut anchors: Vec<StateId> = shortest
        .iter()
        .filter(|(_, t)| t.len() <= depth)
        .filter(|(s, _)| lts.outgoing(s).iter().any(|t| t.label == Label::BeginErase))
        .map(|(s, _)| s.clone())
        .collect();
    anchors.sort();
    anchors
}

/// Stream ability: all sessions of every zone are pairwise output equal, so
/// user outputs inside a session depend neither on the secret nor on system
/// feedback.
pub fn check_stream_ability(user: &UserSpec, depth: usize) -> Verdict {
    let wf = check_user_well_formed_at(user, depth);
    if !wf.is_pass() {
        let mut ws = vec![Witness::note(
            "stream ability requires a well-formed user".to_string(),
        )];
        ws.extend(wf.witnesses);
        return Verdict::fail(wf.depth_bound, ws);
    }

    let mut indeterminate: Vec<Witness> = Vec::new();
    let mut truncated_any = false;
    for anchor in anchors_within(&user.lts, depth) {
        let zone = erasure_zone(user, &anchor, depth);
        if zone.sessions.is_empty() {
            continue;
        }
        truncated_any |= zone.sessions.iter().any(|s| s.truncated);
        if zone.sessions.iter().all(|s| s.truncated) {
            indeterminate.push(Witness::note(format!(
                "zone at {anchor} has only sessions cut by the depth horizon"
            )));
            continue;
        }
        for (i, a) in zone.sessions.iter().enumerate() {
            for b in &zone.sessions[i + 1..] {
                match compare_sessions(a, b) {
                    Cmp::Ok => {}
                    Cmp::Indeterminate => {
                        indeterminate.push(Witness::note(format!(
                            "zone at {anchor}: sessions agree so far but one is cut by the horizon"
                        )));
                    }
                    Cmp::Mismatch(k) => {
                        return Verdict::fail(
                            DepthBound::Bounded(depth),
                            vec![
                                Witness::note(format!(
                                    "sessions at {anchor} diverge at output {k}"
                                )),
                                Witness::new("first session", a.trace.clone(), Vec::new()),
                                Witness::new("second session", b.trace.clone(), Vec::new()),
                            ],
                        );
                    }
                }
            }
        }
    }

    if !indeterminate.is_empty() {
        indeterminate.sort();
        indeterminate.dedup();
        return Verdict::inconclusive(depth, indeterminate);
    }
    if truncated_any {
        Verdict::pass_bounded(depth)
    } else {
        Verdict::pass_exhaustive()
    }
}

/// Secret confinement: all frontier states of every zone have identical
/// trace sets. Decided by subset construction and product search for the
/// shortest distinguishing trace; above the ceiling, by bounded trace-set
/// comparison. The reported outcome is depth-bounded.
pub fn check_secret_confinement(user: &UserSpec, depth: usize) -> Verdict {
    check_secret_confinement_with_ceiling(user, depth, DEFAULT_DETERMINIZATION_CEILING)
}

pub fn check_secret_confinement_with_ceiling(
    user: &UserSpec,
    depth: usize,
    ceiling: usize,
) -> Verdict {
    let wf = check_user_well_formed_at(user, depth);
    if !wf.is_pass() {
        let mut ws = vec![Witness::note(
            "secret confinement requires a well-formed user".to_string(),
        )];
        ws.extend(wf.witnesses);
        return Verdict::fail(wf.depth_bound, ws);
    }

    let mut exhaustive = true;
    for anchor in anchors_within(&user.lts, depth) {
        let zone = erasure_zone(user, &anchor, depth);
        if zone.sessions.iter().any(|s| s.truncated) {
            // The frontier may still grow beyond the horizon.
            exhaustive = false;
        }
        let frontier: Vec<StateId> = zone
            .sessions
            .iter()
            .filter_map(|s| s.end_state.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for (i, a) in frontier.iter().enumerate() {
            for b in &frontier[i + 1..] {
                match distinguishing_trace(&user.lts, a, b, ceiling) {
                    Distinguisher::None => {}
                    Distinguisher::Found { trace, from } => {
                        if trace.len() <= depth {
                            return Verdict::fail(
                                DepthBound::Bounded(depth),
                                vec![Witness::new(
                                    format!(
                                        "frontier states {a} and {b} of the zone at {anchor} \
                                         differ: only {from} offers this trace"
                                    ),
                                    trace,
                                    vec![from],
                                )],
                            );
                        }
                        exhaustive = false;
                    }
                    Distinguisher::CeilingHit => {
                        exhaustive = false;
                        let ta = user.lts.traces_to_depth(a, depth);
                        let tb = user.lts.traces_to_depth(b, depth);
                        if ta != tb {
                            let (trace, from) = smallest_difference(&ta, &tb, a, b);
                            return Verdict::fail(
                                DepthBound::Bounded(depth),
                                vec![Witness::new(
                                    format!(
                                        "frontier states {a} and {b} of the zone at {anchor} \
                                         differ: only {from} offers this trace"
                                    ),
                                    trace,
                                    vec![from],
                                )],
                            );
                        }
                    }
                }
            }
        }
    }

    if exhaustive {
        Verdict::pass_exhaustive()
    } else {
        Verdict::pass_bounded(depth)
    }
}

enum Distinguisher {
    None,
    Found { trace: Trace, from: StateId },
    CeilingHit,
}

/// Shortest trace accepted from exactly one of the two states, via subset
/// construction on both sides and a product breadth-first search.
fn distinguishing_trace(lts: &Lts, a: &StateId, b: &StateId, ceiling: usize) -> Distinguisher {
    type Subset = BTreeSet<StateId>;
    let alphabet: BTreeSet<Label> = lts.transitions().map(|t| t.label.clone()).collect();

    let step = |subset: &Subset, label: &Label| -> Subset {
        let mut next = BTreeSet::new();
        for s in subset {
            for t in lts.outgoing(s) {
                if &t.label == label {
                    next.insert(t.to.clone());
                }
            }
        }
        next
    };

    let start_a: Subset = [a.clone()].into_iter().collect();
    let start_b: Subset = [b.clone()].into_iter().collect();
    let mut visited: BTreeSet<(Subset, Subset)> = BTreeSet::new();
    let mut queue: VecDeque<(Subset, Subset, Trace)> = VecDeque::new();
    visited.insert((start_a.clone(), start_b.clone()));
    queue.push_back((start_a, start_b, Trace::empty()));

    while let Some((sa, sb, trace)) = queue.pop_front() {
        if visited.len() > ceiling {
            return Distinguisher::CeilingHit;
        }
        for label in &alphabet {
            let na = step(&sa, label);
            let nb = step(&sb, label);
            match (na.is_empty(), nb.is_empty()) {
                (true, true) => {}
                (false, true) => {
                    return Distinguisher::Found {
                        trace: trace.extended(label.clone()),
                        from: a.clone(),
                    };
                }
                (true, false) => {
                    return Distinguisher::Found {
                        trace: trace.extended(label.clone()),
                        from: b.clone(),
                    };
                }
                (false, false) => {
                    let key = (na.clone(), nb.clone());
                    if visited.insert(key) {
                        queue.push_back((na, nb, trace.extended(label.clone())));
                    }
                }
            }
        }
    }
    Distinguisher::None
}

/// Shortest-then-lexicographic element of the symmetric difference.
fn smallest_difference(
    ta: &BTreeSet<Trace>,
    tb: &BTreeSet<Trace>,
    a: &StateId,
    b: &StateId,
) -> (Trace, StateId) {
    let mut best: Option<(Trace, StateId)> = None;
    for t in ta.symmetric_difference(tb) {
        let from = if ta.contains(t) { a.clone() } else { b.clone() };
        match &best {
            Some((bt, _)) if (bt.len(), bt) <= (t.len(), t) => {}
            _ => best = Some((t.clone(), from)),
        }
    }
    best.expect("sets differ")
}

/// Per-property breakdown of the erasure-friendliness check.
#[derive(Clone, Debug)]
pub struct EfReport {
    pub well_formed: Verdict,
    pub singularity: Verdict,
    pub confinement: Verdict,
    pub stream_ability: Verdict,
}

impl EfReport {
    /// Aggregate verdict: the conjunction of the four properties.
    pub fn overall(&self) -> Verdict {
        let parts = [
            &self.well_formed,
            &self.singularity,
            &self.confinement,
            &self.stream_ability,
        ];
        if let Some(fail) = parts.iter().find(|v| v.is_fail()) {
            return Verdict {
                outcome: Outcome::Fail,
                depth_bound: fail.depth_bound,
                witnesses: fail.witnesses.clone(),
            };
        }
        if let Some(inc) = parts.iter().find(|v| v.outcome == Outcome::Inconclusive) {
            return Verdict {
                outcome: Outcome::Inconclusive,
                depth_bound: inc.depth_bound,
                witnesses: inc.witnesses.clone(),
            };
        }
        let bound =
            parts
                .iter()
                .map(|v| v.depth_bound)
                .fold(DepthBound::Exhaustive, |acc, b| match (acc, b) {
                    (DepthBound::Exhaustive, x) => x,
                    (x, DepthBound::Exhaustive) => x,
                    (DepthBound::Bounded(x), DepthBound::Bounded(y)) => {
                        DepthBound::Bounded(x.min(y))
                    }
                });
        Verdict {
            outcome: Outcome::Pass,
            depth_bound: bound,
            witnesses: Vec::new(),
        }
    }

    pub fn parts(&self) -> [(&'static str, &Verdict); 4] {
        [
            ("user-well-formed", &self.well_formed),
            ("singularity", &self.singularity),
            ("confinement", &self.confinement),
            ("stream-ability", &self.stream_ability),
        ]
    }
}

/// Erasure friendliness EF(U): well-formedness, secret singularity, secret
/// confinement and stream ability, with per-property verdicts.
pub fn check_erasure_friendly(user: &UserSpec, depth: usize) -> EfReport {
    let well_formed = check_user_well_formed(user);
    if !well_formed.is_pass() {
        let skipped = |what: &str| {
            Verdict::inconclusive(
                depth,
                vec![Witness::note(format!(
                    "{what} skipped: user is not well formed"
                ))],
            )
        };
        return EfReport {
            well_formed,
            singularity: skipped("secret singularity"),
            confinement: skipped("secret confinement"),
            stream_ability: skipped("stream ability"),
        };
    }
    EfReport {
        well_formed,
        singularity: check_secret_singularity(user, depth),
        confinement: check_secret_confinement(user, depth),
        stream_ability: check_stream_ability(user, depth),
    }
}
