//! Composite erasure EC(U|S): after an erasure session of the composed
//! system, behaviour must be invariant under changing the memory at the
//! session's secret index. Also the soundness-theorem validation harness.

use std::collections::{BTreeMap, BTreeSet};

use crate::compose::{compose, ComposedLts, ComposedState};
use crate::lts::{Label, MemIndex, Trace, Value};
use crate::system::{check_input_erasure, check_system_well_formed_at, SystemSpec};
use crate::user::{check_erasure_friendly, check_user_well_formed_at, EfReport, UserSpec};
use crate::verdict::{DepthBound, Outcome, Verdict, Witness};

/// A composed state from which the next steps open an erasure session:
/// synchronized begin-erase, read of the secret index, value exchange.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CompositeErasurePoint {
    pub open_trace: Trace,
    pub state: ComposedState,
    pub secret_index: MemIndex,
    /// The value read at this occurrence (pinned by the prefix when the
    /// prefix already read the index, free otherwise).
    pub erased_value: Value,
}

/// Premises and conclusion of the soundness theorem on one instance.
#[derive(Clone, Debug)]
pub struct TheoremReport {
    pub input_erasure: Verdict,
    pub friendliness: EfReport,
    pub liveness: Verdict,
    pub composite: Verdict,
    /// False only when every premise passes and the conclusion fails, which
    /// would contradict the theorem at the checked depth.
    pub consistent: bool,
}

impl TheoremReport {
    pub fn premises_pass(&self) -> bool {
        self.input_erasure.outcome == Outcome::Pass
            && self.friendliness.overall().outcome == Outcome::Pass
            && self.liveness.outcome == Outcome::Pass
    }
}

/// Run all premises and the conclusion at the given depth.
pub fn validate_soundness_theorem(
    user: &UserSpec,
    system: &SystemSpec,
    depth: usize,
) -> TheoremReport {
    let input_erasure = check_input_erasure(system, depth);
    let friendliness = check_erasure_friendly(user, depth);
    let liveness = check_liveness_premise(user, system, depth);
    let composite = check_composite_erasure(user, system, depth);
    let premises = input_erasure.outcome == Outcome::Pass
        && friendliness.overall().outcome == Outcome::Pass
        && liveness.outcome == Outcome::Pass;
    let consistent = !(premises && composite.outcome == Outcome::Fail);
    TheoremReport {
        input_erasure,
        friendliness,
        liveness,
        composite,
        consistent,
    }
}

fn check_liveness_premise(user: &UserSpec, system: &SystemSpec, depth: usize) -> Verdict {
    crate::compose::check_liveness(user, system, depth)
}

/// Per-index values pinned by the reads seen so far.
type ReadMap = BTreeMap<MemIndex, Value>;

fn read_consistent(rho: &ReadMap, index: MemIndex, value: Value) -> bool {
    match rho.get(&index) {
        Some(v) => *v == value,
        None => true,
    }
}

/// All composite erasure points within the depth: composed states reached by
/// a read-consistent prefix whose next steps open a session, one point per
/// admissible erased value, deduplicated like the composite check itself
/// (state, index, value, pinned reads, remaining budget), shortest opening
/// trace first.
pub fn enumerate_composite_points(
    user: &UserSpec,
    system: &SystemSpec,
    depth: usize,
) -> Vec<CompositeErasurePoint> {
    let Ok(product) = compose(user, system, depth) else {
        return Vec::new();
    };
    let mut points = Vec::new();
    let mut seen: BTreeSet<(PointKey, Value)> = BTreeSet::new();
    let mut stack = vec![(product.initial.clone(), Trace::empty(), ReadMap::new())];
    while let Some((state, trace, rho)) = stack.pop() {
        if trace.len() + 3 <= depth {
            for (l1, c2) in product.outgoing(&state) {
                if *l1 != Label::SyncBegin {
                    continue;
                }
                for (l2, c3) in product.outgoing(c2) {
                    let (index, value) = match l2 {
                        Label::MemRead(i, v) => (*i, *v),
                        _ => continue,
                    };
                    if !read_consistent(&rho, index, value) {
                        continue;
                    }
                    if !product
                        .outgoing(c3)
                        .iter()
                        .any(|(l3, _)| *l3 == Label::Sync(value))
                    {
                        continue;
                    }
                    let key = (
                        (
                            state.clone(),
                            index,
                            rho.iter().map(|(i, v)| (*i, *v)).collect(),
                            depth - trace.len(),
                        ),
                        value,
                    );
                    if seen.insert(key) {
                        points.push(CompositeErasurePoint {
                            open_trace: trace.clone(),
                            state: state.clone(),
                            secret_index: index,
                            erased_value: value,
                        });
                    }
                }
            }
        }
        if trace.len() >= depth {
            continue;
        }
        for (label, to) in product.outgoing(&state).iter().rev() {
            let mut next_rho = rho.clone();
            if let Label::MemRead(i, v) = label {
                if !read_consistent(&rho, *i, *v) {
                    continue;
                }
                next_rho.insert(*i, *v);
            }
            stack.push((to.clone(), trace.extended(label.clone()), next_rho));
        }
    }
    points.sort_by(|a, b| {
        (
            a.open_trace.len(),
            &a.state,
            a.secret_index,
            a.erased_value,
            &a.open_trace,
        )
            .cmp(&(
                b.open_trace.len(),
                &b.state,
                b.secret_index,
                b.erased_value,
                &b.open_trace,
            ))
    });
    points
}

/// Composite erasure EC(U|S) at the given depth.
pub fn check_composite_erasure(user: &UserSpec, system: &SystemSpec, depth: usize) -> Verdict {
    let wf_s = check_system_well_formed_at(system, depth);
    if !wf_s.is_pass() {
        let mut ws = vec![Witness::note(
            "composite erasure requires a well-formed system".to_string(),
        )];
        ws.extend(wf_s.witnesses);
        return Verdict::fail(wf_s.depth_bound, ws);
    }
    let wf_u = check_user_well_formed_at(user, depth);
    if !wf_u.is_pass() {
        let mut ws = vec![Witness::note(
            "composite erasure requires a well-formed user".to_string(),
        )];
        ws.extend(wf_u.witnesses);
        return Verdict::fail(wf_u.depth_bound, ws);
    }

    let product = match compose(user, system, depth) {
        Ok(p) => p,
        Err(e) => {
            return Verdict::fail(
                DepthBound::Bounded(depth),
                vec![Witness::note(format!("composition failed: {e}"))],
            )
        }
    };

    let mut check = EcCheck {
        product: &product,
        domain_values: user.lts.domain.values().collect(),
        depth,
        failure: None,
        inconclusive: Vec::new(),
        hit_horizon: !product.frontier.is_empty(),
        seen_points: BTreeSet::new(),
        user,
    };
    check.enumerate_points(product.initial.clone(), Trace::empty(), ReadMap::new(), 0);

    if let Some(witnesses) = check.failure {
        return Verdict::fail(DepthBound::Bounded(depth), witnesses);
    }
    if !check.inconclusive.is_empty() {
        let mut ws = check.inconclusive;
        ws.sort();
        ws.dedup();
        return Verdict::inconclusive(depth, ws);
    }
    if check.hit_horizon {
        Verdict::pass_bounded(depth)
    } else {
        Verdict::pass_exhaustive()
    }
}

/// Point occurrences already checked: state, index, pinned reads, budget.
type PointKey = (ComposedState, MemIndex, Vec<(MemIndex, Value)>, usize);

struct EcCheck<'a> {
    product: &'a ComposedLts,
    domain_values: Vec<Value>,
    depth: usize,
    failure: Option<Vec<Witness>>,
    inconclusive: Vec<Witness>,
    hit_horizon: bool,
    seen_points: BTreeSet<PointKey>,
    user: &'a UserSpec,
}

impl<'a> EcCheck<'a> {
    /// Walk read-consistent composed prefixes, checking each erasure point.
    fn enumerate_points(&mut self, state: ComposedState, trace: Trace, rho: ReadMap, used: usize) {
        if self.failure.is_some() {
            return;
        }
        // An erasure point: the next steps are begin-erase, read, exchange.
        let begins: Vec<ComposedState> = self
            .product
            .outgoing(&state)
            .iter()
            .filter(|(l, _)| *l == Label::SyncBegin)
            .map(|(_, t)| t.clone())
            .collect();
        if !begins.is_empty() && used + 3 <= self.depth {
            let indices: BTreeSet<MemIndex> = begins
                .iter()
                .flat_map(|c2| self.product.outgoing(c2))
                .filter_map(|(l, _)| match l {
                    Label::MemRead(i, _) => Some(*i),
                    _ => None,
                })
                .collect();
            for index in indices {
                let key = (
                    state.clone(),
                    index,
                    rho.iter().map(|(i, v)| (*i, *v)).collect::<Vec<_>>(),
                    self.depth - used,
                );
                if self.seen_points.insert(key) {
                    self.check_point(&state, &trace, &rho, used, index);
                    if self.failure.is_some() {
                        return;
                    }
                }
            }
        } else if !begins.is_empty()
            && used < self.depth
            && self.partial_opening_reaches_horizon(&begins, used)
        {
            // The opening itself is cut by the horizon: the point's closing
            // end-erase certainly exceeds the depth.
            self.inconclusive.push(Witness::new(
                format!(
                    "erasure opening at {state} does not fit within depth {}",
                    self.depth
                ),
                trace.clone(),
                Vec::new(),
            ));
            self.hit_horizon = true;
        }
        if used >= self.depth {
            return;
        }
        for (label, to) in self.product.outgoing(&state) {
            let mut next_rho = rho.clone();
            if let Label::MemRead(i, v) = label {
                // A prefix reading one index at two values is a trace of no
                // instance; skip it.
                if !read_consistent(&rho, *i, *v) {
                    continue;
                }
                next_rho.insert(*i, *v);
            }
            self.enumerate_points(
                to.clone(),
                trace.extended(label.clone()),
                next_rho,
                used + 1,
            );
            if self.failure.is_some() {
                return;
            }
        }
    }

    /// A begin-erase one or two steps before the horizon is a truncated
    /// opening exactly when some walk through it reaches the horizon still
    /// able to move.
    fn partial_opening_reaches_horizon(&self, begins: &[ComposedState], used: usize) -> bool {
        let movable = |s: &ComposedState| {
            !self.product.outgoing(s).is_empty() || self.product.frontier.contains(s)
        };
        for c2 in begins {
            if used + 1 == self.depth {
                if movable(c2) {
                    return true;
                }
            } else {
                // used + 2 == depth: one more move fits after the marker.
                for (_, c3) in self.product.outgoing(c2) {
                    if movable(c3) {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Check one point: for every admissible pair of erased values, the two
    /// branches must offer label-identical closing continuations both ways.
    fn check_point(
        &mut self,
        state: &ComposedState,
        trace: &Trace,
        rho: &ReadMap,
        used: usize,
        index: MemIndex,
    ) {
        let pinned = rho.get(&index).copied();
        let candidates: Vec<Value> = match pinned {
            Some(v) => vec![v],
            None => self.domain_values.clone(),
        };
        let others = self.domain_values.clone();
        for (vi, &v) in candidates.iter().enumerate() {
            for &w in &others {
                if w == v {
                    continue;
                }
                // Unordered pairs when the value is free: the check is
                // symmetric, so {v, w} is checked once.
                if pinned.is_none() && candidates[..vi].contains(&w) {
                    continue;
                }
                self.check_pair(state, trace, rho, used, index, v, w);
                if self.failure.is_some() {
                    return;
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn check_pair(
        &mut self,
        state: &ComposedState,
        trace: &Trace,
        rho: &ReadMap,
        used: usize,
        index: MemIndex,
        v: Value,
        w: Value,
    ) {
        let budget = self.depth - used - 3;
        let pinned = rho.contains_key(&index);
        let v_sessions = self.collect_sessions(state, rho, index, v, budget);
        let w_sessions = self.collect_sessions(state, rho, index, w, budget);
        if v_sessions.truncated || w_sessions.truncated {
            self.inconclusive.push(Witness::new(
                format!(
                    "erasure session at {state} (index {index}) does not close within depth {}",
                    self.depth
                ),
                trace.clone(),
                Vec::new(),
            ));
            self.hit_horizon = true;
        }
        self.check_direction(state, trace, index, v, w, &v_sessions, &w_sessions);
        if self.failure.is_some() || pinned {
            // When the prefix already read the index, only runs carrying
            // that value exist in the original instance; there is no
            // converse obligation.
            return;
        }
        self.check_direction(state, trace, index, w, v, &w_sessions, &v_sessions);
    }

    /// Every closing continuation of the `from` branch must be matched,
    /// label for label, by some closing continuation of the `to` branch.
    #[allow(clippy::too_many_arguments)]
    fn check_direction(
        &mut self,
        state: &ComposedState,
        trace: &Trace,
        index: MemIndex,
        from: Value,
        to: Value,
        from_sessions: &Sessions,
        to_sessions: &Sessions,
    ) {
        for closed in &from_sessions.closed {
            // Even an empty continuation needs the other branch to close its
            // block at all.
            if to_sessions.closed.is_empty() {
                if to_sessions.truncated {
                    self.inconclusive.push(Witness::new(
                        format!(
                            "no session with {index} = {} closes within depth {}",
                            self.user.lts.domain.literal(to),
                            self.depth
                        ),
                        trace.clone(),
                        Vec::new(),
                    ));
                    continue;
                }
                let domain = &self.user.lts.domain;
                self.failure = Some(vec![
                    Witness::note(format!(
                        "composite erasure violated at {state}: the session with secret \
                         {index} = {} closes, but no session with {index} = {} can",
                        domain.literal(from),
                        domain.literal(to),
                    )),
                    Witness::new(
                        format!("run with {index} = {}", domain.literal(from)),
                        concat_traces(trace, &closed.trace),
                        Vec::new(),
                    ),
                ]);
                return;
            }
            let candidates: Vec<Cand> = to_sessions
                .closed
                .iter()
                .map(|c| Cand {
                    state: c.state.clone(),
                    rho: c.rho.clone(),
                    rem: c.rem,
                })
                .collect();
            let mut ob = Obligation {
                check: self,
                to_truncated: to_sessions.truncated,
                diverged: None,
                indeterminate: false,
            };
            ob.walk(
                closed.state.clone(),
                closed.rho.clone(),
                closed.rem,
                closed.trace.clone(),
                candidates,
            );
            let diverged = ob.diverged.take();
            let indeterminate = ob.indeterminate;
            if let Some(z_trace) = diverged {
                let domain = &self.user.lts.domain;
                self.failure = Some(vec![
                    Witness::note(format!(
                        "composite erasure violated at {state}: with secret {index} = {}, the \
                         composed run below closes its session and continues in a way no run \
                         with secret {index} = {} can match",
                        domain.literal(from),
                        domain.literal(to),
                    )),
                    Witness::new(
                        format!("run with {index} = {}", domain.literal(from)),
                        concat_traces(trace, &z_trace),
                        Vec::new(),
                    ),
                ]);
                return;
            }
            if indeterminate {
                self.inconclusive.push(Witness::new(
                    format!(
                        "matching run for the session at {state} (index {index}) exceeds depth {}",
                        self.depth
                    ),
                    trace.clone(),
                    Vec::new(),
                ));
            }
        }
    }

    /// All closing session walks of one branch: begin-erase, read of the
    /// branch value, exchange, then any body until the matching end-erase.
    fn collect_sessions(
        &mut self,
        state: &ComposedState,
        rho: &ReadMap,
        index: MemIndex,
        value: Value,
        budget: usize,
    ) -> Sessions {
        let mut sessions = Sessions {
            closed: Vec::new(),
            truncated: false,
        };
        let mut rho_branch = rho.clone();
        rho_branch.insert(index, value);
        for (l1, c2) in self.product.outgoing(state) {
            if *l1 != Label::SyncBegin {
                continue;
            }
            for (l2, c3) in self.product.outgoing(c2) {
                if *l2 != Label::MemRead(index, value) {
                    continue;
                }
                for (l3, c4) in self.product.outgoing(c3) {
                    if *l3 != Label::Sync(value) {
                        continue;
                    }
                    let opening = Trace(vec![l1.clone(), l2.clone(), l3.clone()]);
                    self.walk_session(
                        c4.clone(),
                        rho_branch.clone(),
                        budget,
                        opening,
                        1,
                        Pending::None,
                        &mut sessions,
                    );
                }
            }
        }
        sessions
    }

    #[allow(clippy::too_many_arguments)]
    fn walk_session(
        &self,
        state: ComposedState,
        rho: ReadMap,
        rem: usize,
        trace: Trace,
        balance: i64,
        pending: Pending,
        sessions: &mut Sessions,
    ) {
        let outs = self.product.outgoing(&state);
        if rem == 0 {
            // With no steps left, missing successors may be product
            // truncation rather than deadlock; only a non-frontier state
            // with no moves is genuinely stuck.
            if !outs.is_empty() || self.product.frontier.contains(&state) {
                sessions.truncated = true;
            }
            return;
        }
        if outs.is_empty() {
            // Stuck inside the block: this branch never closes, so it
            // produces no obligation and no candidate.
            return;
        }
        for (label, to) in outs {
            let mut next_rho = rho.clone();
            if let Label::MemRead(i, y) = label {
                if !read_consistent(&rho, *i, *y) {
                    continue;
                }
                next_rho.insert(*i, *y);
            }
            let next_trace = trace.extended(label.clone());
            if *label == Label::SyncEnd && balance == 1 {
                sessions.closed.push(ClosedSession {
                    state: to.clone(),
                    rho: next_rho,
                    rem: rem - 1,
                    trace: next_trace,
                });
                continue;
            }
            let (next_balance, next_pending) = match (label, pending) {
                (Label::SyncBegin, _) => (balance, Pending::AfterBegin),
                (Label::SyncEnd, _) => (balance - 1, Pending::None),
                (Label::MemRead(_, _), Pending::AfterBegin) => (balance, Pending::AfterRead),
                (Label::Sync(_), Pending::AfterRead) => (balance + 1, Pending::None),
                _ => (balance, Pending::None),
            };
            self.walk_session(
                to.clone(),
                next_rho,
                rem - 1,
                next_trace,
                next_balance,
                next_pending,
                sessions,
            );
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pending {
    None,
    AfterBegin,
    AfterRead,
}

struct Sessions {
    closed: Vec<ClosedSession>,
    truncated: bool,
}

struct ClosedSession {
    state: ComposedState,
    rho: ReadMap,
    rem: usize,
    trace: Trace,
}

struct Cand {
    state: ComposedState,
    rho: ReadMap,
    rem: usize,
}

fn concat_traces(prefix: &Trace, rest: &Trace) -> Trace {
    let mut t = prefix.clone();
    for l in rest.labels() {
        t.push(l.clone());
    }
    t
}

/// One obligation: simulate the `from`-branch continuation against the set
/// of still-viable `to`-branch continuations.
struct Obligation<'a, 'b> {
    check: &'b EcCheck<'a>,
    to_truncated: bool,
    diverged: Option<Trace>,
    indeterminate: bool,
}

impl Obligation<'_, '_> {
    fn walk(
        &mut self,
        state: ComposedState,
        rho: ReadMap,
        rem: usize,
        trace: Trace,
        cands: Vec<Cand>,
    ) {
        if self.diverged.is_some() {
            return;
        }
        let outs: Vec<(Label, ComposedState)> = self
            .check
            .product
            .outgoing(&state)
            .iter()
            .filter(|(l, _)| match l {
                Label::MemRead(i, y) => read_consistent(&rho, *i, *y),
                _ => true,
            })
            .cloned()
            .collect();
        if outs.is_empty() || rem == 0 {
            // The continuation ends (or is cut) fully matched.
            return;
        }
        for (label, to) in outs {
            let mut stepped: Vec<Cand> = Vec::new();
            let mut dropped_for_budget = false;
            for cand in &cands {
                if cand.rem == 0 {
                    // This candidate matched everything so far but cannot
                    // attempt the next step within the depth.
                    dropped_for_budget = true;
                    continue;
                }
                for (cl, ct) in self.check.product.outgoing(&cand.state) {
                    if *cl != label {
                        continue;
                    }
                    if let Label::MemRead(i, y) = cl {
                        if !read_consistent(&cand.rho, *i, *y) {
                            continue;
                        }
                    }
                    let mut nr = cand.rho.clone();
                    if let Label::MemRead(i, y) = cl {
                        nr.insert(*i, *y);
                    }
                    stepped.push(Cand {
                        state: ct.clone(),
                        rho: nr,
                        rem: cand.rem - 1,
                    });
                }
            }
            let mut next_rho = rho.clone();
            if let Label::MemRead(i, y) = &label {
                next_rho.insert(*i, *y);
            }
            let next_trace = trace.extended(label.clone());
            if stepped.is_empty() {
                if dropped_for_budget || self.to_truncated {
                    self.indeterminate = true;
                } else {
                    self.diverged = Some(next_trace);
                }
                if self.diverged.is_some() {
                    return;
                }
                continue;
            }
            self.walk(to, next_rho, rem - 1, next_trace, stepped);
            if self.diverged.is_some() {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::testutil::two_session_chain;
    use crate::lts::{ChannelId, Lts, LtsKind, StateId, Transition, ValueDomain};
    use crate::user::testutil::{build_user, double_read_user, minimal_block_user};
    use std::collections::BTreeSet;

    fn domain01() -> ValueDomain {
        ValueDomain::numeric(2)
    }

    fn system(lts: Lts) -> SystemSpec {
        let channels: BTreeSet<ChannelId> = lts
            .transitions()
            .filter_map(|t| match &t.label {
                Label::OtherOut(ch, _) => Some(ch.clone()),
                _ => None,
            })
            .collect();
        SystemSpec::new(lts, ChannelId::new("a"), channels).expect("valid system")
    }

    fn minimal_block_system(d: &ValueDomain) -> SystemSpec {
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
    fn minimal_pair_is_composite_erasing() {
        let d = domain01();
        let u = minimal_block_user(&d);
        let s = minimal_block_system(&d);
        let verdict = check_composite_erasure(&u, &s, 10);
        assert_eq!(verdict.outcome, Outcome::Pass);
        assert_eq!(verdict.depth_bound, DepthBound::Exhaustive);
    }

    #[test]
    fn double_read_pair_fails_composite_erasure() {
        // The second session replays the first secret on both sides, so the
        // post-session behaviour depends on it.
        let d = domain01();
        let u = double_read_user(&d);
        let s = system(two_session_chain(&d));
        let verdict = check_composite_erasure(&u, &s, 10);
        assert_eq!(verdict.outcome, Outcome::Fail);
        assert!(verdict.witnesses[0]
            .description
            .contains("composite erasure violated"));
    }

    #[test]
    fn composite_points_respect_prefix_pinning() {
        // Two free points at the first session; at the second session the
        // prefix has read index 1, so each prefix admits only its own value.
        let d = domain01();
        let u = double_read_user(&d);
        let s = system(two_session_chain(&d));
        let points = enumerate_composite_points(&u, &s, 10);
        assert_eq!(points.len(), 4);
        assert!(points[..2].iter().all(|p| p.open_trace.is_empty()));
        assert!(points[2..].iter().all(|p| p.open_trace.len() == 4));
        let second_values: BTreeSet<Value> = points[2..].iter().map(|p| p.erased_value).collect();
        assert_eq!(second_values.len(), 2);
        for p in &points[2..] {
            // The pinned value is the one the prefix read.
            let pinned = p
                .open_trace
                .labels()
                .iter()
                .find_map(|l| match l {
                    Label::MemRead(_, v) => Some(*v),
                    _ => None,
                })
                .unwrap();
            assert_eq!(p.erased_value, pinned);
        }
        // The two-value minimal pair opens exactly one session.
        let u = minimal_block_user(&d);
        let s = minimal_block_system(&d);
        assert_eq!(enumerate_composite_points(&u, &s, 10).len(), 2);
    }

    #[test]
    fn theorem_consistent_on_minimal_pair() {
        let d = domain01();
        let u = minimal_block_user(&d);
        let s = minimal_block_system(&d);
        let report = validate_soundness_theorem(&u, &s, 10);
        assert!(report.premises_pass());
        assert_eq!(report.composite.outcome, Outcome::Pass);
        assert!(report.consistent);
    }

    #[test]
    fn theorem_consistent_on_double_read_pair() {
        let d = domain01();
        let u = double_read_user(&d);
        let s = system(two_session_chain(&d));
        let report = validate_soundness_theorem(&u, &s, 12);
        assert_eq!(report.input_erasure.outcome, Outcome::Pass);
        assert_eq!(report.friendliness.singularity.outcome, Outcome::Fail);
        assert_eq!(report.composite.outcome, Outcome::Fail);
        assert!(report.consistent);
    }

    #[test]
    fn ec_failure_witness_is_a_composed_trace() {
        let d = domain01();
        let u = double_read_user(&d);
        let s = system(two_session_chain(&d));
        let verdict = check_composite_erasure(&u, &s, 12);
        assert_eq!(verdict.outcome, Outcome::Fail);
        let product = compose(&u, &s, 12).unwrap();
        let lts_view = product.to_lts(&u);
        let witness = &verdict.witnesses[1];
        // Drop the final diverging label and replay the prefix.
        assert!(witness.trace.len() > 1);
        assert!(lts_view.accepts(&lts_view.initial, &witness.trace));
    }

    #[test]
    fn user_reading_fresh_index_per_session_passes() {
        let d = domain01();
        let mut transitions: Vec<(String, Label, String)> =
            vec![("u0".into(), Label::BeginErase, "u1".into())];
        for val in d.values() {
            let leaf = format!("u2_{}", d.literal(val));
            transitions.push(("u1".into(), Label::MemRead(MemIndex(1), val), leaf.clone()));
            transitions.push((leaf, Label::ToSystem(val), "u3".into()));
        }
        transitions.push(("u3".into(), Label::EndErase, "u4".into()));
        transitions.push(("u4".into(), Label::BeginErase, "u5".into()));
        for val in d.values() {
            let leaf = format!("u6_{}", d.literal(val));
            transitions.push(("u5".into(), Label::MemRead(MemIndex(2), val), leaf.clone()));
            transitions.push((leaf, Label::ToSystem(val), "u7".into()));
        }
        transitions.push(("u7".into(), Label::EndErase, "u8".into()));
        let u = build_user(&d, "u0", transitions);
        let s = system(two_session_chain(&d));
        let verdict = check_composite_erasure(&u, &s, 14);
        assert_eq!(verdict.outcome, Outcome::Pass);
        let report = validate_soundness_theorem(&u, &s, 14);
        assert!(report.premises_pass());
        assert!(report.consistent);
    }
}
