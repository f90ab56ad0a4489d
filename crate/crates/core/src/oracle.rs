//! Independent brute-force verification of every checkable property, by
//! literal quantifier-by-quantifier enumeration of (composed) runs, with no
//! memoization and no product construction. Used to cross-check the
//! optimized checkers; intentionally self-contained, down to its own
//! trace-level bracket counting.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::lts::{Label, Lts, LtsKind, MemIndex, StateId, Trace, Value};
use crate::system::SystemSpec;
use crate::user::UserSpec;
use crate::verdict::{DepthBound, PropertyId, Verdict, Witness};

/// Default node budget for oracle enumeration.
pub const DEFAULT_ORACLE_BUDGET: usize = 5_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle enumeration exceeded its budget of {0} nodes")]
    BudgetExceeded(usize),
    #[error("property {property} needs {needs}")]
    WrongInput {
        property: PropertyId,
        needs: &'static str,
    },
}

/// Models handed to the oracle.
pub enum OracleInput<'a> {
    Model(&'a Lts),
    System(&'a SystemSpec),
    User(&'a UserSpec),
    Pair {
        user: &'a UserSpec,
        system: &'a SystemSpec,
    },
}

struct Budget {
    used: usize,
    limit: usize,
}

impl Budget {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.used += 1;
        if self.used > self.limit {
            Err(OracleError::BudgetExceeded(self.limit))
        } else {
            Ok(())
        }
    }
}

/// A run of one component: labels plus the visited states.
#[derive(Clone, Debug)]
struct Run {
    labels: Vec<Label>,
    states: Vec<StateId>,
}

impl Run {
    fn end(&self) -> &StateId {
        self.states.last().expect("runs carry the start state")
    }

    fn len(&self) -> usize {
        self.labels.len()
    }

    fn trace(&self) -> Trace {
        Trace(self.labels.clone())
    }
}

/// Every run of length <= depth from `from`, prefixes included, in
/// adjacency (tie-break) order.
fn all_runs(
    lts: &Lts,
    from: &StateId,
    depth: usize,
    budget: &mut Budget,
) -> Result<Vec<Run>, OracleError> {
    let mut out = Vec::new();
    let mut stack = vec![Run {
        labels: Vec::new(),
        states: vec![from.clone()],
    }];
    while let Some(run) = stack.pop() {
        budget.tick()?;
        if run.len() < depth {
            // Reverse push keeps tie-break order in `out`.
            for t in lts.outgoing(run.end()).iter().rev() {
                let mut next = run.clone();
                next.labels.push(t.label.clone());
                next.states.push(t.to.clone());
                stack.push(next);
            }
        }
        out.push(run);
    }
    Ok(out)
}

fn is_maximal(lts: &Lts, run: &Run, depth: usize) -> bool {
    run.len() == depth || lts.is_stuck(run.end())
}

fn truncated(lts: &Lts, run: &Run, depth: usize) -> bool {
    run.len() == depth && !lts.is_stuck(run.end())
}

/// A run of the composed system, derived directly from the transition rules
/// without building the product.
#[derive(Clone, Debug)]
struct CoRun {
    labels: Vec<Label>,
    users: Vec<StateId>,
    systems: Vec<StateId>,
}

impl CoRun {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn end(&self) -> (&StateId, &StateId) {
        (
            self.users.last().expect("start"),
            self.systems.last().expect("start"),
        )
    }

    fn trace(&self) -> Trace {
        Trace(self.labels.clone())
    }
}

/// The composed moves available from a pair of component states, read off
/// the six transition rules, in label order.
fn co_moves(
    user: &UserSpec,
    system: &SystemSpec,
    u: &StateId,
    s: &StateId,
) -> Vec<(Label, StateId, StateId)> {
    let mut moves: BTreeSet<(Label, StateId, StateId)> = BTreeSet::new();
    for st in system.lts.outgoing(s) {
        match &st.label {
            Label::OtherOut(ch, v) => {
                moves.insert((Label::OtherOut(ch.clone(), *v), u.clone(), st.to.clone()));
            }
            Label::ToUser(v) | Label::ToSystem(v) => {
                for ut in user.lts.outgoing(u) {
                    if ut.label == st.label {
                        moves.insert((Label::Sync(*v), ut.to.clone(), st.to.clone()));
                    }
                }
            }
            Label::BeginErase => {
                for ut in user.lts.outgoing(u) {
                    if ut.label == Label::BeginErase {
                        moves.insert((Label::SyncBegin, ut.to.clone(), st.to.clone()));
                    }
                }
            }
            Label::EndErase => {
                for ut in user.lts.outgoing(u) {
                    if ut.label == Label::EndErase {
                        moves.insert((Label::SyncEnd, ut.to.clone(), st.to.clone()));
                    }
                }
            }
            _ => {}
        }
    }
    for ut in user.lts.outgoing(u) {
        if let Label::MemRead(i, v) = ut.label {
            moves.insert((Label::MemRead(i, v), ut.to.clone(), s.clone()));
        }
    }
    moves.into_iter().collect()
}

fn all_co_runs(
    user: &UserSpec,
    system: &SystemSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Vec<CoRun>, OracleError> {
    let mut out = Vec::new();
    let mut stack = vec![CoRun {
        labels: Vec::new(),
        users: vec![user.lts.initial.clone()],
        systems: vec![system.lts.initial.clone()],
    }];
    while let Some(run) = stack.pop() {
        budget.tick()?;
        if run.len() < depth {
            let (u, s) = run.end();
            let moves = co_moves(user, system, u, s);
            for (label, nu, ns) in moves.into_iter().rev() {
                let mut next = run.clone();
                next.labels.push(label);
                next.users.push(nu);
                next.systems.push(ns);
                stack.push(next);
            }
        }
        out.push(run);
    }
    Ok(out)
}

fn co_is_maximal(user: &UserSpec, system: &SystemSpec, run: &CoRun, depth: usize) -> bool {
    if run.len() == depth {
        return true;
    }
    let (u, s) = run.end();
    co_moves(user, system, u, s).is_empty()
}

fn co_truncated(user: &UserSpec, system: &SystemSpec, run: &CoRun, depth: usize) -> bool {
    run.len() == depth && {
        let (u, s) = run.end();
        !co_moves(user, system, u, s).is_empty()
    }
}

/// Number of completed erasure openings in a system-side label sequence
/// (begin-erase immediately followed by a value input).
fn system_openings(labels: &[Label]) -> usize {
    let mut count = 0;
    let mut pending = false;
    for l in labels {
        match l {
            Label::BeginErase => pending = true,
            Label::ToSystem(_) if pending => {
                count += 1;
                pending = false;
            }
            _ => pending = false,
        }
    }
    count
}

/// Number of completed opening triples in a user-side label sequence
/// (begin-erase, read, emission of the value read).
fn user_openings(labels: &[Label]) -> usize {
    let mut count = 0;
    let mut stage = 0u8;
    let mut read_value: Option<Value> = None;
    for l in labels {
        match (l, stage) {
            (Label::BeginErase, _) => {
                stage = 1;
                read_value = None;
            }
            (Label::MemRead(_, v), 1) => {
                stage = 2;
                read_value = Some(*v);
            }
            (Label::ToSystem(v), 2) => {
                if read_value == Some(*v) {
                    count += 1;
                }
                stage = 0;
            }
            _ => stage = 0,
        }
    }
    count
}

fn end_count(labels: &[Label]) -> usize {
    labels
        .iter()
        .filter(|l| matches!(l, Label::EndErase | Label::SyncEnd))
        .count()
}

fn input_count(labels: &[Label]) -> usize {
    labels
        .iter()
        .filter(|l| matches!(l, Label::ToSystem(_)))
        .count()
}

/// Index of the end-erase closing the block opened just before `start`,
/// scanning a system-side label sequence with balance 1 at `start`.
fn system_matching_end(labels: &[Label], start: usize) -> Option<usize> {
    let mut balance = 1i64;
    let mut pending = false;
    for (k, l) in labels.iter().enumerate().skip(start) {
        match l {
            Label::EndErase => {
                if balance == 1 {
                    return Some(k);
                }
                balance -= 1;
                pending = false;
            }
            Label::BeginErase => pending = true,
            Label::ToSystem(_) if pending => {
                balance += 1;
                pending = false;
            }
            _ => pending = false,
        }
    }
    None
}

/// Same for composed label sequences (openings are synchronized triples).
fn composed_matching_end(labels: &[Label], start: usize) -> Option<usize> {
    let mut balance = 1i64;
    let mut stage = 0u8;
    for (k, l) in labels.iter().enumerate().skip(start) {
        match l {
            Label::SyncEnd => {
                if balance == 1 {
                    return Some(k);
                }
                balance -= 1;
                stage = 0;
            }
            Label::SyncBegin => stage = 1,
            Label::MemRead(_, _) if stage == 1 => stage = 2,
            Label::Sync(_) if stage == 2 => {
                balance += 1;
                stage = 0;
            }
            _ => stage = 0,
        }
    }
    None
}

/// Literal oracle for one property at one depth.
pub fn oracle_check(
    property: PropertyId,
    input: OracleInput,
    depth: usize,
    budget_limit: usize,
) -> Result<Verdict, OracleError> {
    let mut budget = Budget {
        used: 0,
        limit: budget_limit,
    };
    let wrong = |needs: &'static str| OracleError::WrongInput { property, needs };
    match (property, input) {
        (PropertyId::Determinism, input) => Ok(oracle_determinism(input_lts(&input), &mut budget)?),
        (PropertyId::InputEnabled, input) => {
            Ok(oracle_input_enabled(input_lts(&input), &mut budget)?)
        }
        (PropertyId::SystemWellFormed, OracleInput::System(s))
        | (PropertyId::SystemWellFormed, OracleInput::Pair { system: s, .. }) => {
            oracle_system_well_formed(s, depth, &mut budget)
        }
        (PropertyId::SystemWellFormed, _) => Err(wrong("a system model")),
        (PropertyId::InputErasure, OracleInput::System(s))
        | (PropertyId::InputErasure, OracleInput::Pair { system: s, .. }) => {
            oracle_input_erasure(s, depth, &mut budget)
        }
        (PropertyId::InputErasure, _) => Err(wrong("a system model")),
        (PropertyId::UserWellFormed, OracleInput::User(u))
        | (PropertyId::UserWellFormed, OracleInput::Pair { user: u, .. }) => {
            oracle_user_well_formed(u, depth, &mut budget)
        }
        (PropertyId::UserWellFormed, _) => Err(wrong("a user model")),
        (PropertyId::Singularity, OracleInput::User(u))
        | (PropertyId::Singularity, OracleInput::Pair { user: u, .. }) => {
            oracle_singularity(u, depth, &mut budget)
        }
        (PropertyId::Singularity, _) => Err(wrong("a user model")),
        (PropertyId::Confinement, OracleInput::User(u))
        | (PropertyId::Confinement, OracleInput::Pair { user: u, .. }) => {
            oracle_confinement(u, depth, &mut budget)
        }
        (PropertyId::Confinement, _) => Err(wrong("a user model")),
        (PropertyId::StreamAbility, OracleInput::User(u))
        | (PropertyId::StreamAbility, OracleInput::Pair { user: u, .. }) => {
            oracle_stream_ability(u, depth, &mut budget)
        }
        (PropertyId::StreamAbility, _) => Err(wrong("a user model")),
        (PropertyId::Liveness, OracleInput::Pair { user, system }) => {
            oracle_liveness(user, system, depth, &mut budget)
        }
        (PropertyId::Liveness, _) => Err(wrong("a user and a system")),
        (PropertyId::CompositeErasure, OracleInput::Pair { user, system }) => {
            oracle_composite_erasure(user, system, depth, &mut budget)
        }
        (PropertyId::CompositeErasure, _) => Err(wrong("a user and a system")),
    }
}

fn input_lts<'a>(input: &'a OracleInput<'a>) -> &'a Lts {
    match input {
        OracleInput::Model(l) => l,
        OracleInput::System(s) => &s.lts,
        OracleInput::User(u) => &u.lts,
        OracleInput::Pair { system, .. } => &system.lts,
    }
}

fn oracle_determinism(lts: &Lts, budget: &mut Budget) -> Result<Verdict, OracleError> {
    let mut problems = Vec::new();
    for s in &lts.states {
        let outs = lts.outgoing(s);
        for (i, t1) in outs.iter().enumerate() {
            for t2 in &outs[i + 1..] {
                budget.tick()?;
                if t1.label != t2.label {
                    if !(t1.label.is_input_for(lts.kind) && t2.label.is_input_for(lts.kind)) {
                        problems.push(Witness::note(format!(
                            "state {s} offers two non-input labels {:?} and {:?}",
                            t1.label, t2.label
                        )));
                    }
                } else if t1.to != t2.to {
                    problems.push(Witness::note(format!(
                        "state {s} has two targets {} and {} for the same label {:?}",
                        t1.to, t2.to, t1.label
                    )));
                }
            }
        }
    }
    Ok(if problems.is_empty() {
        Verdict::pass_exhaustive()
    } else {
        Verdict::fail(DepthBound::Exhaustive, problems)
    })
}

fn oracle_input_enabled(lts: &Lts, budget: &mut Budget) -> Result<Verdict, OracleError> {
    let mut problems = Vec::new();
    for s in &lts.states {
        let outs = lts.outgoing(s);
        let mut groups: BTreeSet<Option<MemIndex>> = BTreeSet::new();
        for t in outs {
            match (lts.kind, &t.label) {
                (LtsKind::System, Label::ToSystem(_)) => {
                    groups.insert(None);
                }
                (LtsKind::User, Label::ToUser(_)) => {
                    groups.insert(None);
                }
                (LtsKind::User, Label::MemRead(i, _)) => {
                    groups.insert(Some(*i));
                }
                _ => {}
            }
        }
        for group in groups {
            for v in lts.domain.values() {
                budget.tick()?;
                let wanted = match (lts.kind, group) {
                    (LtsKind::System, None) => Label::ToSystem(v),
                    (LtsKind::User, None) => Label::ToUser(v),
                    (_, Some(i)) => Label::MemRead(i, v),
                    _ => continue,
                };
                if !outs.iter().any(|t| t.label == wanted) {
                    problems.push(Witness::note(format!(
                        "state {s} misses the input of value {} {}",
                        lts.domain.literal(v),
                        match group {
                            Some(i) => format!("for index {i}"),
                            None => String::new(),
                        }
                    )));
                }
            }
        }
    }
    Ok(if problems.is_empty() {
        Verdict::pass_exhaustive()
    } else {
        Verdict::fail(DepthBound::Exhaustive, problems)
    })
}

fn oracle_system_well_formed(
    spec: &SystemSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Verdict, OracleError> {
    let lts = &spec.lts;
    let runs = all_runs(lts, &lts.initial, depth, budget)?;
    let mut problems = Vec::new();
    let mut any_truncated = false;
    for run in &runs {
        budget.tick()?;
        any_truncated |= truncated(lts, run, depth);
        // Bullet 1: a trace ending in begin-erase demands the full input
        // branch two-step from the state before the marker.
        if run.labels.last() == Some(&Label::BeginErase) {
            let pre = &run.states[run.len() - 1];
            for v in lts.domain.values() {
                let two_step = lts.outgoing(pre).iter().any(|t1| {
                    t1.label == Label::BeginErase
                        && lts
                            .outgoing(&t1.to)
                            .iter()
                            .any(|t2| t2.label == Label::ToSystem(v))
                });
                if !two_step {
                    problems.push(Witness::new(
                        format!(
                            "begin-erase not followed by the input of value {}",
                            lts.domain.literal(v)
                        ),
                        run.trace(),
                        vec![pre.clone()],
                    ));
                }
            }
        }
        // Bullet 2 over every prefix: runs are prefix-closed, so checking the
        // full sequence of each run covers all prefixes.
        if system_openings(&run.labels) < end_count(&run.labels) {
            problems.push(Witness::new(
                "more end-erase events than completed openings",
                run.trace(),
                vec![],
            ));
        }
        // Bullet 3: stuck endpoints are balanced.
        if lts.is_stuck(run.end()) && system_openings(&run.labels) != end_count(&run.labels) {
            problems.push(Witness::new(
                "run halts inside an open erasure block",
                run.trace(),
                vec![run.end().clone()],
            ));
        }
    }
    Ok(finish(problems, any_truncated, depth))
}

fn oracle_user_well_formed(
    user: &UserSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Verdict, OracleError> {
    let lts = &user.lts;
    let runs = all_runs(lts, &lts.initial, depth, budget)?;
    let mut problems = Vec::new();
    let mut any_truncated = false;
    for run in &runs {
        budget.tick()?;
        any_truncated |= truncated(lts, run, depth);
        if run.labels.last() == Some(&Label::BeginErase) {
            let u = run.end();
            let reads: Vec<(MemIndex, Value, &StateId)> = lts
                .outgoing(u)
                .iter()
                .filter_map(|t| match t.label {
                    Label::MemRead(i, v) => Some((i, v, &t.to)),
                    _ => None,
                })
                .collect();
            if reads.is_empty() {
                problems.push(Witness::new(
                    "no secret read after a begin-erase",
                    run.trace(),
                    vec![u.clone()],
                ));
            } else {
                let indices: BTreeSet<MemIndex> = reads.iter().map(|(i, _, _)| *i).collect();
                if indices.len() > 1 {
                    problems.push(Witness::new(
                        "more than one secret index read after a begin-erase",
                        run.trace(),
                        vec![u.clone()],
                    ));
                }
                for v in lts.domain.values() {
                    let ok = reads.iter().any(|(_, rv, target)| {
                        *rv == v
                            && lts
                                .outgoing(target)
                                .iter()
                                .any(|t| t.label == Label::ToSystem(v))
                    });
                    if !ok {
                        problems.push(Witness::new(
                            format!(
                                "no read of value {} followed by its emission",
                                lts.domain.literal(v)
                            ),
                            run.trace(),
                            vec![u.clone()],
                        ));
                    }
                }
            }
        }
        for (k, l) in run.labels.iter().enumerate() {
            if let Label::MemRead(_, v) = l {
                if k == 0 || run.labels[k - 1] != Label::BeginErase {
                    problems.push(Witness::new(
                        "read not immediately after a begin-erase",
                        run.trace(),
                        vec![],
                    ));
                }
                if k + 1 < run.len() && run.labels[k + 1] != Label::ToSystem(*v) {
                    problems.push(Witness::new(
                        "read not immediately followed by the emission of the value read",
                        run.trace(),
                        vec![],
                    ));
                }
            }
        }
        if user_openings(&run.labels) < end_count(&run.labels) {
            problems.push(Witness::new(
                "more end-erase events than completed opening triples",
                run.trace(),
                vec![],
            ));
        }
        if lts.is_stuck(run.end()) && user_openings(&run.labels) != end_count(&run.labels) {
            problems.push(Witness::new(
                "run halts inside an open erasure block",
                run.trace(),
                vec![run.end().clone()],
            ));
        }
    }
    Ok(finish(problems, any_truncated, depth))
}

fn finish(mut problems: Vec<Witness>, any_truncated: bool, depth: usize) -> Verdict {
    if problems.is_empty() {
        if any_truncated {
            Verdict::pass_bounded(depth)
        } else {
            Verdict::pass_exhaustive()
        }
    } else {
        problems.sort();
        problems.dedup();
        Verdict::fail(DepthBound::Bounded(depth), problems)
    }
}

fn oracle_singularity(
    user: &UserSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Verdict, OracleError> {
    let lts = &user.lts;
    let runs = all_runs(lts, &lts.initial, depth, budget)?;
    let mut any_truncated = false;
    for run in &runs {
        budget.tick()?;
        any_truncated |= truncated(lts, run, depth);
        let mut seen: BTreeSet<MemIndex> = BTreeSet::new();
        for l in &run.labels {
            if let Label::MemRead(i, _) = l {
                if !seen.insert(*i) {
                    return Ok(Verdict::fail(
                        DepthBound::Bounded(depth),
                        vec![Witness::new(
                            "trace reading the same secret index twice",
                            run.trace(),
                            vec![],
                        )],
                    ));
                }
            }
        }
    }
    Ok(if any_truncated {
        Verdict::pass_bounded(depth)
    } else {
        Verdict::pass_exhaustive()
    })
}

/// A session found by scanning runs from an anchor.
struct ScannedSession {
    labels: Vec<Label>,
    end_state: Option<StateId>,
    truncated: bool,
}

/// Sessions of the zone anchored at `anchor`, by scanning the maximal runs
/// that start with a complete opening triple.
fn scan_zone(
    user: &UserSpec,
    anchor: &StateId,
    depth: usize,
    budget: &mut Budget,
) -> Result<Vec<ScannedSession>, OracleError> {
    let lts = &user.lts;
    let runs = all_runs(lts, anchor, depth, budget)?;
    let mut complete: BTreeMap<(Vec<Label>, StateId), ScannedSession> = BTreeMap::new();
    let mut incomplete: BTreeMap<Vec<Label>, ScannedSession> = BTreeMap::new();
    for run in &runs {
        budget.tick()?;
        if !is_maximal(lts, run, depth) || run.len() < 3 {
            continue;
        }
        let opening_ok = run.labels[0] == Label::BeginErase
            && matches!(run.labels[1], Label::MemRead(_, _))
            && matches!(run.labels[2], Label::ToSystem(_));
        if !opening_ok {
            continue;
        }
        match composed_or_user_matching_end(&run.labels) {
            Some(m) => {
                let labels = run.labels[..=m].to_vec();
                let end_state = run.states[m + 1].clone();
                complete
                    .entry((labels.clone(), end_state.clone()))
                    .or_insert(ScannedSession {
                        labels,
                        end_state: Some(end_state),
                        truncated: false,
                    });
            }
            None => {
                let was_truncated = truncated(lts, run, depth);
                incomplete
                    .entry(run.labels.clone())
                    .or_insert(ScannedSession {
                        labels: run.labels.clone(),
                        end_state: None,
                        truncated: was_truncated,
                    });
            }
        }
    }
    let mut out: Vec<ScannedSession> = complete.into_values().collect();
    out.extend(incomplete.into_values());
    Ok(out)
}

/// Matching end-erase for a user session starting with a complete triple:
/// balance 1 after the opening, counting nested complete triples.
fn composed_or_user_matching_end(labels: &[Label]) -> Option<usize> {
    let mut balance = 1i64;
    let mut stage = 0u8;
    let mut read_value: Option<Value> = None;
    for (k, l) in labels.iter().enumerate().skip(3) {
        match l {
            Label::EndErase => {
                if balance == 1 {
                    return Some(k);
                }
                balance -= 1;
                stage = 0;
            }
            Label::BeginErase => stage = 1,
            Label::MemRead(_, v) if stage == 1 => {
                stage = 2;
                read_value = Some(*v);
            }
            Label::ToSystem(v) if stage == 2 => {
                if read_value == Some(*v) {
                    balance += 1;
                }
                stage = 0;
            }
            _ => stage = 0,
        }
    }
    None
}

/// Anchors reachable within the depth: endpoints of runs that offer a
/// begin-erase receive.
fn scan_anchors(
    user: &UserSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Vec<StateId>, OracleError> {
    let runs = all_runs(&user.lts, &user.lts.initial, depth, budget)?;
    let mut anchors = BTreeSet::new();
    for run in &runs {
        let end = run.end();
        if user
            .lts
            .outgoing(end)
            .iter()
            .any(|t| t.label == Label::BeginErase)
        {
            anchors.insert(end.clone());
        }
    }
    Ok(anchors.into_iter().collect())
}

fn oracle_confinement(
    user: &UserSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Verdict, OracleError> {
    let wf = oracle_user_well_formed(user, depth, budget)?;
    if !wf.is_pass() {
        let mut ws = vec![Witness::note(
            "secret confinement requires a well-formed user".to_string(),
        )];
        ws.extend(wf.witnesses);
        return Ok(Verdict::fail(wf.depth_bound, ws));
    }
    let mut any_truncated = false;
    for anchor in scan_anchors(user, depth, budget)? {
        let sessions = scan_zone(user, &anchor, depth, budget)?;
        any_truncated |= sessions.iter().any(|s| s.truncated);
        let frontier: BTreeSet<StateId> = sessions
            .iter()
            .filter_map(|s| s.end_state.clone())
            .collect();
        let frontier: Vec<StateId> = frontier.into_iter().collect();
        for (i, a) in frontier.iter().enumerate() {
            for b in &frontier[i + 1..] {
                budget.tick()?;
                let ta = user.lts.traces_to_depth(a, depth);
                let tb = user.lts.traces_to_depth(b, depth);
                if ta != tb {
                    let mut best: Option<(&Trace, &StateId)> = None;
                    for t in ta.symmetric_difference(&tb) {
                        let from = if ta.contains(t) { a } else { b };
                        match best {
                            Some((bt, _)) if (bt.len(), bt) <= (t.len(), t) => {}
                            _ => best = Some((t, from)),
                        }
                    }
                    let (t, from) = best.expect("sets differ");
                    return Ok(Verdict::fail(
                        DepthBound::Bounded(depth),
                        vec![Witness::new(
                            format!(
                                "frontier states {a} and {b} of the zone at {anchor} differ: \
                                 only {from} offers this trace"
                            ),
                            t.clone(),
                            vec![from.clone()],
                        )],
                    ));
                }
            }
        }
    }
    Ok(if any_truncated {
        Verdict::pass_bounded(depth)
    } else {
        Verdict::pass_exhaustive()
    })
}

/// Three-valued output-equality comparison by direct application of the
/// rules, truncation aware.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum OutCmp {
    Ok,
    Mismatch,
    Indeterminate,
}

fn outeq_compare(a: &[Label], a_open: bool, b: &[Label], b_open: bool) -> OutCmp {
    enum Head<'x> {
        Erase(MemIndex, Value, &'x [Label]),
        Out(Value, &'x [Label]),
        Skip(&'x [Label]),
        End,
    }
    fn head(x: &[Label]) -> Head<'_> {
        if x.is_empty() {
            return Head::End;
        }
        if x.len() >= 3 && x[0] == Label::BeginErase {
            if let (Label::MemRead(i, rv), Label::ToSystem(sv)) = (&x[1], &x[2]) {
                if rv == sv {
                    return Head::Erase(*i, *sv, &x[3..]);
                }
            }
        }
        if let Label::ToSystem(v) = x[0] {
            return Head::Out(v, &x[1..]);
        }
        Head::Skip(&x[1..])
    }

    match (head(a), head(b)) {
        (Head::Skip(ra), _) => outeq_compare(ra, a_open, b, b_open),
        (_, Head::Skip(rb)) => outeq_compare(a, a_open, rb, b_open),
        (Head::Erase(i, _, ra), Head::Erase(j, _, rb)) => {
            if i == j {
                outeq_compare(ra, a_open, rb, b_open)
            } else {
                OutCmp::Mismatch
            }
        }
        (Head::Erase(_, v, ra), Head::Out(x, rb)) | (Head::Out(x, ra), Head::Erase(_, v, rb)) => {
            if v == x {
                outeq_compare(ra, a_open, rb, b_open)
            } else {
                OutCmp::Mismatch
            }
        }
        (Head::Out(x, ra), Head::Out(y, rb)) => {
            if x == y {
                outeq_compare(ra, a_open, rb, b_open)
            } else {
                OutCmp::Mismatch
            }
        }
        (Head::End, Head::End) => {
            if a_open || b_open {
                OutCmp::Indeterminate
            } else {
                OutCmp::Ok
            }
        }
        (Head::End, _) => {
            if a_open {
                OutCmp::Indeterminate
            } else {
                OutCmp::Mismatch
            }
        }
        (_, Head::End) => {
            if b_open {
                OutCmp::Indeterminate
            } else {
                OutCmp::Mismatch
            }
        }
    }
}

fn oracle_stream_ability(
    user: &UserSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Verdict, OracleError> {
    let wf = oracle_user_well_formed(user, depth, budget)?;
    if !wf.is_pass() {
        let mut ws = vec![Witness::note(
            "stream ability requires a well-formed user".to_string(),
        )];
        ws.extend(wf.witnesses);
        return Ok(Verdict::fail(wf.depth_bound, ws));
    }
    let mut indeterminate = Vec::new();
    let mut any_truncated = false;
    for anchor in scan_anchors(user, depth, budget)? {
        let sessions = scan_zone(user, &anchor, depth, budget)?;
        if sessions.is_empty() {
            continue;
        }
        any_truncated |= sessions.iter().any(|s| s.truncated);
        if sessions.iter().all(|s| s.truncated) {
            indeterminate.push(Witness::note(format!(
                "zone at {anchor} has only sessions cut by the depth horizon"
            )));
            continue;
        }
        for (i, a) in sessions.iter().enumerate() {
            for b in &sessions[i + 1..] {
                budget.tick()?;
                match outeq_compare(&a.labels, a.truncated, &b.labels, b.truncated) {
                    OutCmp::Ok => {}
                    OutCmp::Indeterminate => {
                        indeterminate.push(Witness::note(format!(
                            "zone at {anchor}: sessions agree so far but one is cut by the horizon"
                        )));
                    }
                    OutCmp::Mismatch => {
                        return Ok(Verdict::fail(
                            DepthBound::Bounded(depth),
                            vec![
                                Witness::note(format!("sessions at {anchor} are not output equal")),
                                Witness::new("first session", Trace(a.labels.clone()), vec![]),
                                Witness::new("second session", Trace(b.labels.clone()), vec![]),
                            ],
                        ));
                    }
                }
            }
        }
    }
    if !indeterminate.is_empty() {
        indeterminate.sort();
        indeterminate.dedup();
        return Ok(Verdict::inconclusive(depth, indeterminate));
    }
    Ok(if any_truncated {
        Verdict::pass_bounded(depth)
    } else {
        Verdict::pass_exhaustive()
    })
}

fn oracle_liveness(
    user: &UserSpec,
    system: &SystemSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Verdict, OracleError> {
    let runs = all_co_runs(user, system, depth, budget)?;
    let mut pairs: BTreeSet<(StateId, StateId)> = BTreeSet::new();
    let mut any_truncated = false;
    for run in &runs {
        any_truncated |= co_truncated(user, system, run, depth);
        for k in 0..run.users.len() {
            pairs.insert((run.users[k].clone(), run.systems[k].clone()));
        }
    }
    let mut problems = Vec::new();
    for (u1, s1) in &pairs {
        budget.tick()?;
        let input_state = system
            .lts
            .outgoing(s1)
            .iter()
            .any(|t| matches!(t.label, Label::ToSystem(_)));
        if input_state {
            if !read_closure_literal(user, u1, depth, budget, |l| matches!(l, Label::ToSystem(_)))?
            {
                problems.push(Witness::note(format!(
                    "system state {s1} awaits an input but user state {u1} cannot supply one"
                )));
            }
        } else if let Some(t) = system.lts.outgoing(s1).first() {
            let ok = match &t.label {
                Label::OtherOut(_, _) => true,
                Label::ToUser(v) => {
                    let v = *v;
                    read_closure_literal(user, u1, depth, budget, move |l| *l == Label::ToUser(v))?
                }
                Label::BeginErase => {
                    read_closure_literal(user, u1, depth, budget, |l| *l == Label::BeginErase)?
                }
                Label::EndErase => {
                    read_closure_literal(user, u1, depth, budget, |l| *l == Label::EndErase)?
                }
                _ => true,
            };
            if !ok {
                problems.push(Witness::note(format!(
                    "system state {s1} wants to act but user state {u1} cannot take part"
                )));
            }
        }
    }
    Ok(if problems.is_empty() {
        if any_truncated {
            Verdict::pass_bounded(depth)
        } else {
            Verdict::pass_exhaustive()
        }
    } else {
        problems.sort();
        problems.dedup();
        Verdict::fail(DepthBound::Bounded(depth), problems)
    })
}

/// Literal memory-read closure: enumerate read-only label sequences of the
/// user from `from` and test each visited state.
fn read_closure_literal(
    user: &UserSpec,
    from: &StateId,
    depth: usize,
    budget: &mut Budget,
    wanted: impl Fn(&Label) -> bool,
) -> Result<bool, OracleError> {
    let runs = all_runs(&user.lts, from, depth, budget)?;
    for run in &runs {
        if !run.labels.iter().all(|l| matches!(l, Label::MemRead(_, _))) {
            continue;
        }
        if user
            .lts
            .outgoing(run.end())
            .iter()
            .any(|t| wanted(&t.label))
        {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Reads of a composed label sequence are instance consistent when no index
/// is read at two different values.
fn reads_consistent(labels: &[Label]) -> bool {
    let mut rho: BTreeMap<MemIndex, Value> = BTreeMap::new();
    for l in labels {
        if let Label::MemRead(i, v) = l {
            match rho.get(i) {
                Some(prev) if prev != v => return false,
                _ => {
                    rho.insert(*i, *v);
                }
            }
        }
    }
    true
}

/// Reads of a continuation against a pinned map: the varied index must carry
/// the branch value, other indices follow the prefix pins or stay internally
/// consistent.
fn continuation_consistent(
    labels: &[Label],
    prefix_rho: &BTreeMap<MemIndex, Value>,
    index: MemIndex,
    branch: Value,
) -> bool {
    let mut rho = prefix_rho.clone();
    rho.insert(index, branch);
    for l in labels {
        if let Label::MemRead(i, v) = l {
            match rho.get(i) {
                Some(prev) if prev != v => return false,
                _ => {
                    rho.insert(*i, *v);
                }
            }
        }
    }
    true
}

fn oracle_composite_erasure(
    user: &UserSpec,
    system: &SystemSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Verdict, OracleError> {
    let wf_s = oracle_system_well_formed(system, depth, budget)?;
    if !wf_s.is_pass() {
        let mut ws = vec![Witness::note(
            "composite erasure requires a well-formed system".to_string(),
        )];
        ws.extend(wf_s.witnesses);
        return Ok(Verdict::fail(wf_s.depth_bound, ws));
    }
    let wf_u = oracle_user_well_formed(user, depth, budget)?;
    if !wf_u.is_pass() {
        let mut ws = vec![Witness::note(
            "composite erasure requires a well-formed user".to_string(),
        )];
        ws.extend(wf_u.witnesses);
        return Ok(Verdict::fail(wf_u.depth_bound, ws));
    }

    let runs = all_co_runs(user, system, depth, budget)?;
    let maximal: Vec<&CoRun> = runs
        .iter()
        .filter(|r| co_is_maximal(user, system, r, depth))
        .collect();
    let mut any_truncated = maximal.iter().any(|r| co_truncated(user, system, r, depth));
    let mut inconclusive: Vec<Witness> = Vec::new();
    let domain = &user.lts.domain;

    for run in &maximal {
        budget.tick()?;
        if !reads_consistent(&run.labels) {
            // A trace of no instance.
            continue;
        }
        // Scan opening occurrences.
        for k in 0..run.len() {
            if run.labels[k] != Label::SyncBegin || k + 2 >= run.len() {
                if run.labels[k] == Label::SyncBegin
                    && co_truncated(user, system, run, depth)
                    && k + 2 >= run.len()
                {
                    // Opening cut by the horizon.
                    inconclusive.push(Witness::note(format!(
                        "erasure opening at step {k} does not fit within depth {depth}"
                    )));
                }
                continue;
            }
            let (index, v) = match (&run.labels[k + 1], &run.labels[k + 2]) {
                (Label::MemRead(i, rv), Label::Sync(sv)) if rv == sv => (*i, *rv),
                _ => continue,
            };
            let prefix = &run.labels[..k];
            let prefix_rho: BTreeMap<MemIndex, Value> = prefix
                .iter()
                .filter_map(|l| match l {
                    Label::MemRead(i, x) => Some((*i, *x)),
                    _ => None,
                })
                .collect();
            let m = match composed_matching_end(&run.labels, k + 3) {
                Some(m) => m,
                None => {
                    if co_truncated(user, system, run, depth) {
                        inconclusive.push(Witness::note(format!(
                            "erasure session opened at step {k} does not close within depth {depth}"
                        )));
                        any_truncated = true;
                    }
                    continue;
                }
            };
            let z_v = &run.labels[m + 1..];
            let v_state = (&run.users[k], &run.systems[k]);

            for w in domain.values() {
                if w == v {
                    continue;
                }
                budget.tick()?;
                // Candidates: maximal runs over the same prefix and point
                // state, taking the erased value w, with continuation reads
                // pinned to w at the varied index.
                let mut matched = false;
                let mut viable_truncated = false;
                let mut candidate_closes = false;
                for cand in &maximal {
                    if cand.len() <= k + 2
                        || cand.labels[..k] != *prefix
                        || cand.labels[k] != Label::SyncBegin
                        || cand.labels[k + 1] != Label::MemRead(index, w)
                        || cand.labels[k + 2] != Label::Sync(w)
                        || (&cand.users[k], &cand.systems[k]) != v_state
                    {
                        continue;
                    }
                    if !continuation_consistent(&cand.labels[k..], &prefix_rho, index, w) {
                        continue;
                    }
                    budget.tick()?;
                    let m_w = match composed_matching_end(&cand.labels, k + 3) {
                        Some(m_w) => m_w,
                        None => {
                            if co_truncated(user, system, cand, depth) {
                                viable_truncated = true;
                            }
                            continue;
                        }
                    };
                    candidate_closes = true;
                    let z_w = &cand.labels[m_w + 1..];
                    let overlap = z_v.len().min(z_w.len());
                    if z_v[..overlap] != z_w[..overlap] {
                        continue;
                    }
                    if z_w.len() >= z_v.len() {
                        matched = true;
                        break;
                    }
                    if co_truncated(user, system, cand, depth) {
                        viable_truncated = true;
                    }
                }
                if matched {
                    continue;
                }
                if viable_truncated {
                    inconclusive.push(Witness::note(format!(
                        "matching run for the session opened at step {k} exceeds depth {depth}"
                    )));
                    continue;
                }
                let _ = candidate_closes;
                return Ok(Verdict::fail(
                    DepthBound::Bounded(depth),
                    vec![
                        Witness::note(format!(
                            "composite erasure violated: with secret {index} = {}, the run below \
                             closes its session and continues in a way no run with {index} = {} \
                             can match",
                            domain.literal(v),
                            domain.literal(w),
                        )),
                        Witness::new(
                            format!("run with {index} = {}", domain.literal(v)),
                            run.trace(),
                            vec![],
                        ),
                    ],
                ));
            }
        }
    }

    if !inconclusive.is_empty() {
        inconclusive.sort();
        inconclusive.dedup();
        return Ok(Verdict::inconclusive(depth, inconclusive));
    }
    Ok(if any_truncated {
        Verdict::pass_bounded(depth)
    } else {
        Verdict::pass_exhaustive()
    })
}

fn oracle_input_erasure(
    spec: &SystemSpec,
    depth: usize,
    budget: &mut Budget,
) -> Result<Verdict, OracleError> {
    let wf = oracle_system_well_formed(spec, depth, budget)?;
    if !wf.is_pass() {
        let mut ws = vec![Witness::note(
            "input erasure requires a well-formed system".to_string(),
        )];
        ws.extend(wf.witnesses);
        return Ok(Verdict::fail(wf.depth_bound, ws));
    }
    let lts = &spec.lts;
    let runs = all_runs(lts, &lts.initial, depth, budget)?;
    let maximal: Vec<&Run> = runs.iter().filter(|r| is_maximal(lts, r, depth)).collect();
    let any_truncated = maximal.iter().any(|r| truncated(lts, r, depth));
    let mut inconclusive: Vec<Witness> = Vec::new();

    // Positional input assignment of a run: 1-based stream positions.
    let positions = |labels: &[Label]| -> Vec<Value> {
        labels
            .iter()
            .filter_map(|l| match l {
                Label::ToSystem(v) => Some(*v),
                _ => None,
            })
            .collect()
    };

    for run in &maximal {
        budget.tick()?;
        for k in 0..run.len() {
            // Opening: begin-erase followed by the erased input.
            if run.labels[k] != Label::BeginErase || k + 1 >= run.len() {
                if run.labels[k] == Label::BeginErase
                    && k + 1 >= run.len()
                    && truncated(lts, run, depth)
                {
                    inconclusive.push(Witness::note(format!(
                        "erasure opening at step {k} does not fit within depth {depth}"
                    )));
                }
                continue;
            }
            let v = match run.labels[k + 1] {
                Label::ToSystem(v) => v,
                _ => continue,
            };
            let prefix = &run.labels[..k];
            let n = input_count(prefix) + 1;
            let m = match system_matching_end(&run.labels, k + 2) {
                Some(m) => m,
                None => {
                    if truncated(lts, run, depth) {
                        inconclusive.push(Witness::note(format!(
                            "erasure session opened at step {k} does not close within depth {depth}"
                        )));
                    }
                    continue;
                }
            };
            let session = &run.labels[k + 2..m];
            let z_v = &run.labels[m + 1..];
            let run_positions = positions(&run.labels);

            for w in lts.domain.values() {
                if w == v {
                    continue;
                }
                budget.tick()?;
                for cand in &maximal {
                    if cand.len() <= k + 1
                        || cand.labels[..k] != *prefix
                        || cand.labels[k] != Label::BeginErase
                        || cand.labels[k + 1] != Label::ToSystem(w)
                    {
                        continue;
                    }
                    // Positional compatibility: inputs at every position
                    // other than n consumed by both runs must agree.
                    let cand_positions = positions(&cand.labels);
                    let both = run_positions.len().min(cand_positions.len());
                    let compatible =
                        (0..both).all(|p| p + 1 == n || run_positions[p] == cand_positions[p]);
                    if !compatible {
                        continue;
                    }
                    budget.tick()?;
                    let m_w = match system_matching_end(&cand.labels, k + 2) {
                        Some(m_w) => m_w,
                        None => {
                            if truncated(lts, cand, depth) {
                                inconclusive.push(Witness::note(format!(
                                    "paired session opened at step {k} does not close within \
                                     depth {depth}"
                                )));
                            } else {
                                return Ok(fail_pair(
                                    depth,
                                    "unmatched end-erase: one run closes its erasure block, the \
                                     paired run is stuck inside its block",
                                    run,
                                    cand,
                                ));
                            }
                            continue;
                        }
                    };
                    let session_w = &cand.labels[k + 2..m_w];
                    if input_count(session) != input_count(session_w) {
                        return Ok(fail_pair(
                            depth,
                            "in-session input counts differ",
                            run,
                            cand,
                        ));
                    }
                    let z_w = &cand.labels[m_w + 1..];
                    let overlap = z_v.len().min(z_w.len());
                    if z_v[..overlap] != z_w[..overlap] {
                        return Ok(fail_pair(
                            depth,
                            "post-erasure continuations diverge",
                            run,
                            cand,
                        ));
                    }
                    if z_w.len() < z_v.len() {
                        if truncated(lts, cand, depth) {
                            inconclusive.push(Witness::note(format!(
                                "matching continuation for the session at step {k} exceeds \
                                 depth {depth}"
                            )));
                        } else {
                            return Ok(fail_pair(
                                depth,
                                "post-erasure continuations diverge: one run ends early",
                                run,
                                cand,
                            ));
                        }
                    }
                }
            }
        }
    }

    if !inconclusive.is_empty() {
        inconclusive.sort();
        inconclusive.dedup();
        return Ok(Verdict::inconclusive(depth, inconclusive));
    }
    Ok(if any_truncated {
        Verdict::pass_bounded(depth)
    } else {
        Verdict::pass_exhaustive()
    })
}

fn fail_pair(depth: usize, what: &str, a: &Run, b: &Run) -> Verdict {
    Verdict::fail(
        DepthBound::Bounded(depth),
        vec![
            Witness::note(what.to_string()),
            Witness::new("first run", a.trace(), vec![]),
            Witness::new("second run", b.trace(), vec![]),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::testutil::two_session_chain;
    use crate::lts::{ChannelId, Transition, ValueDomain};
    use crate::user::testutil::{double_read_user, minimal_block_user};
    use crate::verdict::Outcome;

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
    fn oracle_agrees_on_two_session_chain_erasure() {
        let d = domain01();
        let spec = system(two_session_chain(&d));
        let verdict = oracle_check(
            PropertyId::InputErasure,
            OracleInput::System(&spec),
            8,
            1_000_000,
        )
        .unwrap();
        assert_eq!(verdict.outcome, Outcome::Pass);
        assert_eq!(
            verdict.outcome,
            crate::system::check_input_erasure(&spec, 8).outcome
        );
    }

    #[test]
    fn oracle_finds_double_read() {
        let d = domain01();
        let u = double_read_user(&d);
        let verdict =
            oracle_check(PropertyId::Singularity, OracleInput::User(&u), 8, 1_000_000).unwrap();
        assert_eq!(verdict.outcome, Outcome::Fail);
        let shallow =
            oracle_check(PropertyId::Singularity, OracleInput::User(&u), 4, 1_000_000).unwrap();
        assert_eq!(shallow.outcome, Outcome::Pass);
    }

    #[test]
    fn oracle_composite_erasure_on_double_read_pair() {
        let d = domain01();
        let u = double_read_user(&d);
        let s = system(two_session_chain(&d));
        let verdict = oracle_check(
            PropertyId::CompositeErasure,
            OracleInput::Pair {
                user: &u,
                system: &s,
            },
            10,
            2_000_000,
        )
        .unwrap();
        assert_eq!(verdict.outcome, Outcome::Fail);
        assert_eq!(
            verdict.outcome,
            crate::composite::check_composite_erasure(&u, &s, 10).outcome
        );
    }

    #[test]
    fn oracle_liveness_agrees_on_minimal_pair() {
        let d = domain01();
        let u = minimal_block_user(&d);
        let s = minimal_block_system(&d);
        let verdict = oracle_check(
            PropertyId::Liveness,
            OracleInput::Pair {
                user: &u,
                system: &s,
            },
            10,
            1_000_000,
        )
        .unwrap();
        assert_eq!(verdict.outcome, Outcome::Pass);
    }

    #[test]
    fn budget_excess_is_reported() {
        let d = domain01();
        let u = minimal_block_user(&d);
        let s = minimal_block_system(&d);
        let result = oracle_check(
            PropertyId::CompositeErasure,
            OracleInput::Pair {
                user: &u,
                system: &s,
            },
            10,
            10,
        );
        assert!(matches!(result, Err(OracleError::BudgetExceeded(10))));
    }
}
