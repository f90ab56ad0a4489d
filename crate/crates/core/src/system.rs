//! System-side definitions: well-formedness of erasure bracketing, refinement
//! by an input stream, the input-count operator and the input erasure check.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::lts::{ChannelId, Label, Lts, LtsKind, StateId, Trace, Value};
use crate::verdict::{DepthBound, Verdict, Witness};

/// Why a model could not be wrapped as a system or user spec.
#[derive(Debug, Error)]
pub enum SpecError {
    #[error("model failed structural validation: {0:?}")]
    NotValid(Vec<String>),
    #[error("expected a {expected} model, got {got}")]
    WrongKind { expected: LtsKind, got: LtsKind },
    #[error("model is not deterministic: {0:?}")]
    NotDeterministic(Vec<String>),
    #[error("model is not input enabled: {0:?}")]
    NotInputEnabled(Vec<String>),
    #[error("output channel {0} is not declared")]
    UnknownChannel(ChannelId),
}

fn witness_messages(verdict: &Verdict) -> Vec<String> {
    verdict
        .witnesses
        .iter()
        .map(|w| w.description.clone())
        .collect()
}

/// A validated system model: deterministic, input enabled, with all
/// erase-channel traffic on `erase_channel` and other outputs on declared
/// channels.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub lts: Lts,
    pub erase_channel: ChannelId,
    pub other_channels: BTreeSet<ChannelId>,
}

impl SystemSpec {
    pub fn new(
        lts: Lts,
        erase_channel: ChannelId,
        other_channels: BTreeSet<ChannelId>,
    ) -> Result<Self, SpecError> {
        if lts.kind != LtsKind::System {
            return Err(SpecError::WrongKind {
                expected: LtsKind::System,
                got: lts.kind,
            });
        }
        let v = lts.validate();
        if !v.is_pass() {
            return Err(SpecError::NotValid(witness_messages(&v)));
        }
        let v = lts.is_deterministic();
        if !v.is_pass() {
            return Err(SpecError::NotDeterministic(witness_messages(&v)));
        }
        let v = lts.is_input_enabled();
        if !v.is_pass() {
            return Err(SpecError::NotInputEnabled(witness_messages(&v)));
        }
        for t in lts.transitions() {
            if let Label::OtherOut(ch, _) = &t.label {
                if !other_channels.contains(ch) {
                    return Err(SpecError::UnknownChannel(ch.clone()));
                }
            }
        }
        Ok(SystemSpec {
            lts,
            erase_channel,
            other_channels,
        })
    }

    /// Does the state await a value input from the user?
    pub fn is_input_state(&self, s: &StateId) -> bool {
        self.lts
            .outgoing(s)
            .iter()
            .any(|t| matches!(t.label, Label::ToSystem(_)))
    }

    /// Unique input successor for a value, if the state is an input state.
    pub fn input_successor(&self, s: &StateId, v: Value) -> Option<StateId> {
        self.lts
            .outgoing(s)
            .iter()
            .find(|t| t.label == Label::ToSystem(v))
            .map(|t| t.to.clone())
    }
}

/// An input stream: explicit finite prefix plus a default value beyond it.
/// Positions are 1-based, following the definition of the n-th stream value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputStream {
    pub prefix: Vec<Value>,
    pub default: Value,
}

impl InputStream {
    pub fn new(prefix: Vec<Value>, default: Value) -> Self {
        InputStream { prefix, default }
    }

    pub fn value_at(&self, position: usize) -> Value {
        assert!(position >= 1, "stream positions are 1-based");
        self.prefix
            .get(position - 1)
            .copied()
            .unwrap_or(self.default)
    }
}

/// A place where the system opens an erasure block: the state with the
/// outgoing begin-erase, one opening trace reaching it, and the stream
/// position of the erased input.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ErasurePoint {
    pub pre_state: StateId,
    pub open_trace: Trace,
    /// Ordinal of the erased input among all inputs of the refined trace.
    pub input_position: usize,
}

/// Number of system input labels (a?v) in the trace. Memory reads and
/// composed labels are not counted.
pub fn input_count(t: &Trace) -> usize {
    t.labels()
        .iter()
        .filter(|l| matches!(l, Label::ToSystem(_)))
        .count()
}

/// Well-formedness of the erasure bracketing:
/// 1. every begin-erase is immediately followed by a full input branch;
/// 2. bracket balance is consistent, never negative, and no end-erase fires
///    at balance zero;
/// 3. every stuck reachable state has balance zero.
///
/// Exact on finite models.
pub fn check_system_well_formed(spec: &SystemSpec) -> Verdict {
    let problems = system_wf_problems(spec);
    if problems.is_empty() {
        Verdict::pass_exhaustive()
    } else {
        let mut ws: Vec<Witness> = problems.into_iter().map(|(_, w)| w).collect();
        ws.sort();
        Verdict::fail(DepthBound::Exhaustive, ws)
    }
}

/// Bounded-outcome variant: Fail only when a violation manifests on some
/// run of length <= depth, matching the literal trace conditions at that
/// depth. Inconsistent bracketing fails at every depth (such models are out
/// of scope for per-state balance reasoning).
pub fn check_system_well_formed_at(spec: &SystemSpec, depth: usize) -> Verdict {
    let problems = system_wf_problems(spec);
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
        Verdict::fail(DepthBound::Bounded(depth), ws)
    }
}

/// All well-formedness violations, each with the length of the shortest run
/// that exhibits it.
fn system_wf_problems(spec: &SystemSpec) -> Vec<(usize, Witness)> {
    let lts = &spec.lts;
    let mut problems = Vec::new();
    let shortest = lts.shortest_traces();
    let reachable: BTreeSet<StateId> = shortest.keys().cloned().collect();

    // Clause 1: after each reachable begin-erase the system must offer the
    // erased input for every domain value. A run ending in the begin-erase
    // shows the violation.
    for t in lts.transitions() {
        if t.label != Label::BeginErase || !reachable.contains(&t.from) {
            continue;
        }
        let offered: BTreeSet<Value> = lts
            .outgoing(&t.to)
            .iter()
            .filter_map(|n| match n.label {
                Label::ToSystem(v) => Some(v),
                _ => None,
            })
            .collect();
        let manifest = shortest[&t.from].len() + 1;
        for v in lts.domain.values() {
            if !offered.contains(&v) {
                problems.push((
                    manifest,
                    Witness::new(
                        format!(
                            "begin-erase from {} is not followed by the input of value {}",
                            t.from,
                            lts.domain.literal(v)
                        ),
                        shortest[&t.from].extended(Label::BeginErase),
                        vec![t.from.clone(), t.to.clone()],
                    ),
                ));
            }
        }
    }

    // Clauses 2 and 3 via the per-state balance.
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
                            format!("end-erase fires from {state} outside any open block"),
                            here.clone(),
                            vec![state.clone()],
                        ),
                    ));
                }
                if lts.is_stuck(state) && *balance != 0 {
                    problems.push((
                        here.len(),
                        Witness::new(
                            format!("system halts at {state} inside an open erasure block"),
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

/// The unique maximal trace of length <= depth in which the n-th input
/// carries the n-th stream value. Determinism makes this a single trace.
pub fn refine_with_stream(spec: &SystemSpec, stream: &InputStream, depth: usize) -> Trace {
    let mut trace = Trace::empty();
    let mut state = spec.lts.initial.clone();
    let mut next_input = 1usize;
    for _ in 0..depth {
        let outs = spec.lts.outgoing(&state);
        if outs.is_empty() {
            break;
        }
        if spec.is_input_state(&state) {
            let v = stream.value_at(next_input);
            next_input += 1;
            let t = outs
                .iter()
                .find(|t| t.label == Label::ToSystem(v))
                .expect("input enabled system offers every value");
            trace.push(t.label.clone());
            state = t.to.clone();
        } else {
            // Deterministic: a non-input state has a unique outgoing label.
            let t = &outs[0];
            trace.push(t.label.clone());
            state = t.to.clone();
        }
    }
    trace
}

/// All erasure points whose opening trace fits in the depth, deduplicated by
/// (pre-state, multiset of preceding input values), shortest opening first.
pub fn enumerate_erasure_points(spec: &SystemSpec, depth: usize) -> Vec<ErasurePoint> {
    let lts = &spec.lts;
    let mut points: Vec<ErasurePoint> = Vec::new();
    let mut seen: BTreeSet<(StateId, Vec<Value>)> = BTreeSet::new();
    // BFS over paths, shortest first so dedup keeps minimal opening traces.
    let mut frontier: Vec<(StateId, Trace)> = vec![(lts.initial.clone(), Trace::empty())];
    for _ in 0..=depth {
        let mut next = Vec::new();
        for (state, trace) in &frontier {
            let has_begin = lts
                .outgoing(state)
                .iter()
                .any(|t| t.label == Label::BeginErase);
            if has_begin {
                let mut preceding: Vec<Value> = trace
                    .labels()
                    .iter()
                    .filter_map(|l| match l {
                        Label::ToSystem(v) => Some(*v),
                        _ => None,
                    })
                    .collect();
                let position = preceding.len() + 1;
                preceding.sort();
                if seen.insert((state.clone(), preceding)) {
                    points.push(ErasurePoint {
                        pre_state: state.clone(),
                        open_trace: trace.clone(),
                        input_position: position,
                    });
                }
            }
            if trace.len() < depth {
                for t in lts.outgoing(state) {
                    next.push((t.to.clone(), trace.extended(t.label.clone())));
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    points.sort_by(|a, b| {
        (&a.pre_state, a.input_position, &a.open_trace).cmp(&(
            &b.pre_state,
            b.input_position,
            &b.open_trace,
        ))
    });
    points
}

/// Like [`enumerate_erasure_points`] but keyed additionally on the opening
/// trace length, so every distinct remaining budget is checked.
fn enumerate_point_occurrences(spec: &SystemSpec, depth: usize) -> Vec<ErasurePoint> {
    let lts = &spec.lts;
    let mut points: Vec<ErasurePoint> = Vec::new();
    let mut seen: BTreeSet<(StateId, Vec<Value>, usize)> = BTreeSet::new();
    let mut frontier: Vec<(StateId, Trace)> = vec![(lts.initial.clone(), Trace::empty())];
    for _ in 0..=depth {
        let mut next = Vec::new();
        for (state, trace) in &frontier {
            let has_begin = lts
                .outgoing(state)
                .iter()
                .any(|t| t.label == Label::BeginErase);
            if has_begin {
                let mut preceding: Vec<Value> = trace
                    .labels()
                    .iter()
                    .filter_map(|l| match l {
                        Label::ToSystem(v) => Some(*v),
                        _ => None,
                    })
                    .collect();
                let position = preceding.len() + 1;
                preceding.sort();
                if seen.insert((state.clone(), preceding, trace.len())) {
                    points.push(ErasurePoint {
                        pre_state: state.clone(),
                        open_trace: trace.clone(),
                        input_position: position,
                    });
                }
            }
            if trace.len() < depth {
                for t in lts.outgoing(state) {
                    next.push((t.to.clone(), trace.extended(t.label.clone())));
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    points
}

/// Result of checking one erasure point against one value pair.
struct PairCheck {
    failure: Option<Vec<Witness>>,
    inconclusive: bool,
    hit_horizon: bool,
}

/// The abstract input erasure check E(S): for every erasure point, every
/// pair of erased values and every resolution of the other stream positions
/// within the depth, the two refined runs must close their blocks with equal
/// in-session input counts and continue with label-identical behaviour.
pub fn check_input_erasure(spec: &SystemSpec, depth: usize) -> Verdict {
    let wf = check_system_well_formed_at(spec, depth);
    if !wf.is_pass() {
        let mut ws = vec![Witness::note(
            "input erasure requires a well-formed system".to_string(),
        )];
        ws.extend(wf.witnesses);
        return Verdict::fail(wf.depth_bound, ws);
    }

    // Occurrences are deduplicated per opening-trace length as well: the
    // remaining depth budget depends on it, and a longer opening may be
    // inconclusive where a shorter one is not.
    let points = enumerate_point_occurrences(spec, depth);
    let mut inconclusive_points: Vec<Witness> = Vec::new();
    let mut hit_horizon = false;

    for point in &points {
        for v in spec.lts.domain.values() {
            for w in spec.lts.domain.values() {
                if v == w {
                    continue;
                }
                let result = check_point_pair(spec, point, v, w, depth);
                if let Some(witnesses) = result.failure {
                    return Verdict::fail(DepthBound::Bounded(depth), witnesses);
                }
                if result.inconclusive {
                    inconclusive_points.push(Witness::new(
                        format!(
                            "erasure session from {} (erased values {} / {}) does not close within depth {depth}",
                            point.pre_state,
                            spec.lts.domain.literal(v),
                            spec.lts.domain.literal(w)
                        ),
                        point.open_trace.clone(),
                        vec![point.pre_state.clone()],
                    ));
                }
                hit_horizon |= result.hit_horizon;
            }
        }
    }

    if !inconclusive_points.is_empty() {
        inconclusive_points.sort();
        inconclusive_points.dedup();
        return Verdict::inconclusive(depth, inconclusive_points);
    }
    if hit_horizon {
        Verdict::pass_bounded(depth)
    } else {
        Verdict::pass_exhaustive()
    }
}

/// Positional assignment of stream values shared between the two runs.
type Assignment = std::collections::BTreeMap<usize, Value>;

/// A run of one side of the paired check.
#[derive(Clone)]
struct Run {
    state: StateId,
    trace: Trace,
    /// Steps still available before the depth horizon.
    budget: usize,
    /// Next stream position this run will consume.
    next_pos: usize,
    /// Inputs consumed inside the erasure session.
    session_inputs: usize,
}

fn check_point_pair(
    spec: &SystemSpec,
    point: &ErasurePoint,
    v: Value,
    w: Value,
    depth: usize,
) -> PairCheck {
    let mut check = PairCheck {
        failure: None,
        inconclusive: false,
        hit_horizon: false,
    };
    let begin_target = spec
        .lts
        .outgoing(&point.pre_state)
        .iter()
        .find(|t| t.label == Label::BeginErase)
        .map(|t| t.to.clone())
        .expect("erasure point has a begin-erase");
    if point.open_trace.len() >= depth {
        // The begin-erase itself lies beyond the horizon.
        return check;
    }
    let used = point.open_trace.len() + 2;
    if used > depth {
        // The marker fits, the erased input does not: a truncated opening
        // unless the run ends right there.
        if !spec.lts.is_stuck(&begin_target) {
            check.inconclusive = true;
            check.hit_horizon = true;
        }
        return check;
    }
    let budget = depth - used;
    let opening = |val: Value| -> Run {
        let sv = spec
            .input_successor(&begin_target, val)
            .expect("well-formed system offers the erased input");
        let mut trace = point.open_trace.clone();
        trace.push(Label::BeginErase);
        trace.push(Label::ToSystem(val));
        Run {
            state: sv,
            trace,
            budget,
            next_pos: point.input_position + 1,
            session_inputs: 0,
        }
    };
    walk_v_session(
        spec,
        opening(v),
        opening(w),
        1,
        Assignment::new(),
        &mut check,
    );
    check
}

/// Advance the v-run to its matching end-erase, branching over fresh stream
/// positions, then hand over to the w-run.
fn walk_v_session(
    spec: &SystemSpec,
    v_run: Run,
    w_run: Run,
    balance: i64,
    assignment: Assignment,
    check: &mut PairCheck,
) {
    if check.failure.is_some() {
        return;
    }
    let outs = spec.lts.outgoing(&v_run.state);
    if outs.is_empty() {
        // The v-run never closes its block under this assignment, so the
        // premise of the definition does not arise here. Well-formedness
        // makes this unreachable (stuck states sit at balance zero).
        return;
    }
    if v_run.budget == 0 {
        check.inconclusive = true;
        check.hit_horizon = true;
        return;
    }
    if spec.is_input_state(&v_run.state) {
        let pos = v_run.next_pos;
        let choices: Vec<Value> = match assignment.get(&pos) {
            Some(v) => vec![*v],
            None => spec.lts.domain.values().collect(),
        };
        for value in choices {
            let mut a = assignment.clone();
            a.insert(pos, value);
            let mut run = v_run.clone();
            run.state = spec
                .input_successor(&v_run.state, value)
                .expect("input enabled");
            run.trace.push(Label::ToSystem(value));
            run.budget -= 1;
            run.next_pos += 1;
            run.session_inputs += 1;
            walk_v_session(spec, run, w_run.clone(), balance, a, check);
        }
    } else {
        let t = &outs[0];
        let mut run = v_run.clone();
        run.state = t.to.clone();
        run.trace.push(t.label.clone());
        run.budget -= 1;
        let next_balance = match t.label {
            Label::BeginErase => balance + 1,
            Label::EndErase => balance - 1,
            _ => balance,
        };
        if t.label == Label::EndErase && balance == 1 {
            // Matching end-erase: the v-session is closed.
            walk_w_session(spec, run, w_run, 1, assignment, check);
        } else {
            walk_v_session(spec, run, w_run, next_balance, assignment, check);
        }
    }
}

/// Advance the w-run to its matching end-erase under the shared assignment.
fn walk_w_session(
    spec: &SystemSpec,
    v_run: Run,
    w_run: Run,
    balance: i64,
    assignment: Assignment,
    check: &mut PairCheck,
) {
    if check.failure.is_some() {
        return;
    }
    let outs = spec.lts.outgoing(&w_run.state);
    if outs.is_empty() {
        // One run closed its block, the other provably cannot.
        check.failure = Some(vec![
            Witness::note("unmatched end-erase: one run closes its erasure block, the paired run is stuck inside its block".to_string()),
            Witness::new("run that closes", v_run.trace.clone(), Vec::new()),
            Witness::new("run stuck inside its block", w_run.trace.clone(), Vec::new()),
        ]);
        return;
    }
    if w_run.budget == 0 {
        check.inconclusive = true;
        check.hit_horizon = true;
        return;
    }
    if spec.is_input_state(&w_run.state) {
        let pos = w_run.next_pos;
        let choices: Vec<Value> = match assignment.get(&pos) {
            Some(v) => vec![*v],
            None => spec.lts.domain.values().collect(),
        };
        for value in choices {
            let mut a = assignment.clone();
            a.insert(pos, value);
            let mut run = w_run.clone();
            run.state = spec
                .input_successor(&w_run.state, value)
                .expect("input enabled");
            run.trace.push(Label::ToSystem(value));
            run.budget -= 1;
            run.next_pos += 1;
            run.session_inputs += 1;
            walk_w_session(spec, v_run.clone(), run, balance, a, check);
        }
    } else {
        let t = &outs[0];
        let mut run = w_run.clone();
        run.state = t.to.clone();
        run.trace.push(t.label.clone());
        run.budget -= 1;
        let next_balance = match t.label {
            Label::BeginErase => balance + 1,
            Label::EndErase => balance - 1,
            _ => balance,
        };
        if t.label == Label::EndErase && balance == 1 {
            if v_run.session_inputs != run.session_inputs {
                check.failure = Some(vec![
                    Witness::note(format!(
                        "in-session input counts differ: {} inputs against {}",
                        v_run.session_inputs, run.session_inputs
                    )),
                    Witness::new("first run", v_run.trace.clone(), Vec::new()),
                    Witness::new("second run", run.trace.clone(), Vec::new()),
                ]);
                return;
            }
            walk_continuations(spec, v_run, run, assignment, check);
        } else {
            walk_w_session(spec, v_run, run, next_balance, assignment, check);
        }
    }
}

/// Post-erasure lockstep: the w-run must reproduce every label of the v-run's
/// continuation, consuming the same stream positions.
fn walk_continuations(
    spec: &SystemSpec,
    v_run: Run,
    w_run: Run,
    assignment: Assignment,
    check: &mut PairCheck,
) {
    if check.failure.is_some() {
        return;
    }
    let v_outs = spec.lts.outgoing(&v_run.state);
    if v_outs.is_empty() {
        // The v-continuation is complete and fully matched.
        return;
    }
    if v_run.budget == 0 {
        check.hit_horizon = true;
        return;
    }
    let diverged = |check: &mut PairCheck, v_next: &Label, note: String| {
        check.failure = Some(vec![
            Witness::note(note),
            Witness::new(
                format!(
                    "run continuing with {}",
                    v_next.render(LtsKind::System, &spec.lts.domain, &spec.erase_channel.0)
                ),
                v_run.trace.extended(v_next.clone()),
                Vec::new(),
            ),
            Witness::new("run that cannot match it", w_run.trace.clone(), Vec::new()),
        ]);
    };
    if spec.is_input_state(&v_run.state) {
        if !spec.is_input_state(&w_run.state) {
            let v_next = Label::ToSystem(match assignment.get(&v_run.next_pos) {
                Some(v) => *v,
                None => spec.lts.domain.value_at(0),
            });
            diverged(
                check,
                &v_next,
                "post-erasure divergence: one run awaits an input, the other does not".to_string(),
            );
            return;
        }
        if w_run.budget == 0 {
            check.inconclusive = true;
            check.hit_horizon = true;
            return;
        }
        // Both consume the same stream position (input counts matched).
        let pos = v_run.next_pos;
        debug_assert_eq!(pos, w_run.next_pos);
        let choices: Vec<Value> = match assignment.get(&pos) {
            Some(v) => vec![*v],
            None => spec.lts.domain.values().collect(),
        };
        for value in choices {
            let mut a = assignment.clone();
            a.insert(pos, value);
            let mut vr = v_run.clone();
            vr.state = spec
                .input_successor(&vr.state, value)
                .expect("input enabled");
            vr.trace.push(Label::ToSystem(value));
            vr.budget -= 1;
            vr.next_pos += 1;
            let mut wr = w_run.clone();
            wr.state = spec
                .input_successor(&wr.state, value)
                .expect("input enabled");
            wr.trace.push(Label::ToSystem(value));
            wr.budget -= 1;
            wr.next_pos += 1;
            walk_continuations(spec, vr, wr, a, check);
        }
    } else {
        let vt = &v_outs[0];
        let w_outs = spec.lts.outgoing(&w_run.state);
        if w_outs.is_empty() {
            diverged(
                check,
                &vt.label,
                "post-erasure divergence: one run continues, the other is finished".to_string(),
            );
            return;
        }
        if w_run.budget == 0 {
            check.inconclusive = true;
            check.hit_horizon = true;
            return;
        }
        if spec.is_input_state(&w_run.state) {
            diverged(
                check,
                &vt.label,
                "post-erasure divergence: one run awaits an input, the other does not".to_string(),
            );
            return;
        }
        let wt = &w_outs[0];
        if vt.label != wt.label {
            let note = format!(
                "post-erasure divergence: {} against {}",
                vt.label
                    .render(LtsKind::System, &spec.lts.domain, &spec.erase_channel.0),
                wt.label
                    .render(LtsKind::System, &spec.lts.domain, &spec.erase_channel.0)
            );
            check.failure = Some(vec![
                Witness::note(note),
                Witness::new(
                    "first run",
                    v_run.trace.extended(vt.label.clone()),
                    Vec::new(),
                ),
                Witness::new(
                    "second run",
                    w_run.trace.extended(wt.label.clone()),
                    Vec::new(),
                ),
            ]);
            return;
        }
        let mut vr = v_run.clone();
        vr.state = vt.to.clone();
        vr.trace.push(vt.label.clone());
        vr.budget -= 1;
        let mut wr = w_run.clone();
        wr.state = wt.to.clone();
        wr.trace.push(wt.label.clone());
        wr.budget -= 1;
        walk_continuations(spec, vr, wr, assignment, check);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::testutil::{lts, two_session_chain, v};
    use crate::lts::{Transition, ValueDomain};
    use crate::verdict::Outcome;
    use std::collections::BTreeSet;

    fn domain01() -> ValueDomain {
        ValueDomain::numeric(2)
    }

    pub(crate) fn system(lts: Lts) -> SystemSpec {
        let channels: BTreeSet<ChannelId> = lts
            .transitions()
            .filter_map(|t| match &t.label {
                Label::OtherOut(ch, _) => Some(ch.clone()),
                _ => None,
            })
            .collect();
        SystemSpec::new(lts, ChannelId::new("a"), channels).expect("valid system")
    }

    /// Minimal erasing block: BE, full input branch, EE, halt.
    fn minimal_block(d: &ValueDomain) -> SystemSpec {
        let mut transitions = vec![
            ("s0".to_string(), Label::BeginErase, "s1".to_string()),
            ("s2".to_string(), Label::EndErase, "s3".to_string()),
        ];
        for val in d.values() {
            transitions.push(("s1".into(), Label::ToSystem(val), "s2".into()));
        }
        let trans: BTreeSet<Transition> = transitions
            .into_iter()
            .map(|(f, l, t)| Transition::new(StateId::new(f), l, StateId::new(t)))
            .collect();
        let states = ["s0", "s1", "s2", "s3"]
            .iter()
            .map(|s| StateId::new(*s))
            .collect();
        system(Lts::new(
            LtsKind::System,
            d.clone(),
            StateId::new("s0"),
            states,
            trans,
        ))
    }

    #[test]
    fn minimal_block_is_well_formed() {
        let spec = minimal_block(&domain01());
        assert_eq!(check_system_well_formed(&spec).outcome, Outcome::Pass);
    }

    #[test]
    fn begin_without_input_fails_clause_one() {
        let d = domain01();
        let m = lts(
            LtsKind::System,
            &d,
            "s0",
            &["s0", "s1", "s2"],
            &[
                ("s0", Label::BeginErase, "s1"),
                ("s1", Label::ToUser(v(&d, "1")), "s2"),
            ],
        );
        let spec = system(m);
        let verdict = check_system_well_formed(&spec);
        assert_eq!(verdict.outcome, Outcome::Fail);
        assert!(verdict.witnesses[0]
            .description
            .contains("not followed by the input"));
    }

    #[test]
    fn halt_inside_block_fails_clause_three() {
        // BE, full input branch, halt: the post-input state sits at balance 1.
        let d = domain01();
        let mut transitions = vec![("s0".to_string(), Label::BeginErase, "s1".to_string())];
        for val in d.values() {
            transitions.push(("s1".into(), Label::ToSystem(val), "s2".into()));
        }
        let trans: BTreeSet<Transition> = transitions
            .into_iter()
            .map(|(f, l, t)| Transition::new(StateId::new(f), l, StateId::new(t)))
            .collect();
        let states = ["s0", "s1", "s2"]
            .iter()
            .map(|s| StateId::new(*s))
            .collect();
        let spec = system(Lts::new(
            LtsKind::System,
            d,
            StateId::new("s0"),
            states,
            trans,
        ));
        let verdict = check_system_well_formed(&spec);
        assert_eq!(verdict.outcome, Outcome::Fail);
        assert!(verdict
            .witnesses
            .iter()
            .any(|w| w.description.contains("inside an open erasure block")));
    }

    #[test]
    fn input_count_examples() {
        let d = domain01();
        assert_eq!(input_count(&Trace::empty()), 0);
        let t = Trace(vec![
            Label::BeginErase,
            Label::ToSystem(v(&d, "1")),
            Label::EndErase,
        ]);
        assert_eq!(input_count(&t), 1);
        let t2 = Trace(vec![
            Label::ToSystem(v(&d, "1")),
            Label::OtherOut(ChannelId::new("b"), v(&d, "0")),
            Label::ToSystem(v(&d, "1")),
        ]);
        assert_eq!(input_count(&t2), 2);
    }

    #[test]
    fn refinement_without_inputs_ignores_stream() {
        let d = domain01();
        let m = lts(
            LtsKind::System,
            &d,
            "s0",
            &["s0", "s1"],
            &[("s0", Label::ToUser(v(&d, "1")), "s1")],
        );
        let spec = system(m);
        let s1 = InputStream::new(vec![], v(&d, "0"));
        let s2 = InputStream::new(vec![], v(&d, "1"));
        let t1 = refine_with_stream(&spec, &s1, 5);
        assert_eq!(t1, refine_with_stream(&spec, &s2, 5));
        assert_eq!(t1, Trace(vec![Label::ToUser(v(&d, "1"))]));
    }

    #[test]
    fn refinement_of_two_session_chain() {
        let d = domain01();
        let spec = system(two_session_chain(&d));
        let alternating = InputStream::new(vec![v(&d, "0"), v(&d, "1")], v(&d, "0"));
        let t = refine_with_stream(&spec, &alternating, 6);
        assert_eq!(
            t,
            Trace(vec![
                Label::BeginErase,
                Label::ToSystem(v(&d, "0")),
                Label::EndErase,
                Label::BeginErase,
                Label::ToSystem(v(&d, "1")),
                Label::EndErase,
            ])
        );
        let ones = InputStream::new(vec![], v(&d, "1"));
        let t = refine_with_stream(&spec, &ones, 6);
        assert_eq!(
            t,
            Trace(vec![
                Label::BeginErase,
                Label::ToSystem(v(&d, "1")),
                Label::EndErase,
                Label::BeginErase,
                Label::ToSystem(v(&d, "1")),
                Label::EndErase,
            ])
        );
    }

    #[test]
    fn no_begin_means_no_points() {
        let d = domain01();
        let m = lts(
            LtsKind::System,
            &d,
            "s0",
            &["s0", "s1"],
            &[("s0", Label::ToUser(v(&d, "1")), "s1")],
        );
        let spec = system(m);
        assert!(enumerate_erasure_points(&spec, 6).is_empty());
    }

    #[test]
    fn two_session_chain_points_at_depth_six() {
        // One point at the first block, one per first-input value at the second.
        let d = domain01();
        let spec = system(two_session_chain(&d));
        let points = enumerate_erasure_points(&spec, 6);
        assert_eq!(points.len(), 3);
        assert_eq!(points[0].pre_state, StateId::new("s0"));
        assert_eq!(points[0].input_position, 1);
        assert_eq!(points[1].pre_state, StateId::new("s3"));
        assert_eq!(points[1].input_position, 2);
        assert_eq!(points[2].pre_state, StateId::new("s3"));
        assert_eq!(points[2].input_position, 2);
        assert_ne!(points[1].open_trace, points[2].open_trace);
    }

    #[test]
    fn minimal_block_erases() {
        let spec = minimal_block(&domain01());
        let verdict = check_input_erasure(&spec, 8);
        assert_eq!(verdict.outcome, Outcome::Pass);
        assert_eq!(verdict.depth_bound, DepthBound::Exhaustive);
    }

    #[test]
    fn two_session_chain_erases() {
        let spec = system(two_session_chain(&domain01()));
        assert_eq!(check_input_erasure(&spec, 8).outcome, Outcome::Pass);
    }

    #[test]
    fn post_erasure_leak_is_detected() {
        // After the block the system reveals the erased value on channel b.
        let d = domain01();
        let mut transitions = vec![("s0".to_string(), Label::BeginErase, "s1".to_string())];
        for val in d.values() {
            let leaf = format!("s2_{}", d.literal(val));
            let post = format!("s3_{}", d.literal(val));
            transitions.push(("s1".into(), Label::ToSystem(val), leaf.clone()));
            transitions.push((leaf.clone(), Label::EndErase, post.clone()));
            transitions.push((
                post.clone(),
                Label::OtherOut(ChannelId::new("b"), val),
                "s4".into(),
            ));
        }
        let trans: BTreeSet<Transition> = transitions
            .into_iter()
            .map(|(f, l, t)| Transition::new(StateId::new(f), l, StateId::new(t)))
            .collect();
        let states: BTreeSet<StateId> = trans
            .iter()
            .flat_map(|t| [t.from.clone(), t.to.clone()])
            .collect();
        let spec = system(Lts::new(
            LtsKind::System,
            d,
            StateId::new("s0"),
            states,
            trans,
        ));
        let verdict = check_input_erasure(&spec, 8);
        assert_eq!(verdict.outcome, Outcome::Fail);
        assert!(verdict.witnesses[0]
            .description
            .contains("post-erasure divergence"));
    }

    #[test]
    fn open_session_at_horizon_is_inconclusive() {
        // A block that needs 3 more steps than the horizon allows.
        let d = domain01();
        let mut transitions = vec![("s0".to_string(), Label::BeginErase, "s1".to_string())];
        for val in d.values() {
            transitions.push(("s1".into(), Label::ToSystem(val), "s2".into()));
        }
        transitions.push((
            "s2".into(),
            Label::OtherOut(ChannelId::new("b"), v(&d, "0")),
            "s3".into(),
        ));
        transitions.push(("s3".into(), Label::EndErase, "s4".into()));
        let trans: BTreeSet<Transition> = transitions
            .into_iter()
            .map(|(f, l, t)| Transition::new(StateId::new(f), l, StateId::new(t)))
            .collect();
        let states: BTreeSet<StateId> = trans
            .iter()
            .flat_map(|t| [t.from.clone(), t.to.clone()])
            .collect();
        let spec = system(Lts::new(
            LtsKind::System,
            d,
            StateId::new("s0"),
            states,
            trans,
        ));
        assert_eq!(check_input_erasure(&spec, 3).outcome, Outcome::Inconclusive);
        assert_eq!(check_input_erasure(&spec, 4).outcome, Outcome::Pass);
    }
}
