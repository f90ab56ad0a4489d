//! The synchronized product of a user and a system, trace projections back to
//! the components, and the liveness check of a user for a system.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::lts::{Label, Lts, LtsKind, StateId, Trace, Transition};
use crate::system::SystemSpec;
use crate::user::UserSpec;
use crate::verdict::{DepthBound, Verdict, Witness};

/// One state of the product: a user state paired with a system state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComposedState {
    pub user: StateId,
    pub system: StateId,
}

impl ComposedState {
    pub fn new(user: StateId, system: StateId) -> Self {
        ComposedState { user, system }
    }
}

impl fmt::Display for ComposedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.user, self.system)
    }
}

/// The reachable fragment of the product within a depth bound. States first
/// discovered at the bound are kept but not expanded; they are recorded as
/// the frontier so downstream checks can tell truncation from deadlock.
#[derive(Clone, Debug)]
pub struct ComposedLts {
    pub initial: ComposedState,
    pub states: BTreeSet<ComposedState>,
    pub transitions: BTreeSet<(ComposedState, Label, ComposedState)>,
    pub frontier: BTreeSet<ComposedState>,
    pub depth: usize,
    adjacency: BTreeMap<ComposedState, Vec<(Label, ComposedState)>>,
}

impl ComposedLts {
    pub fn outgoing(&self, s: &ComposedState) -> &[(Label, ComposedState)] {
        self.adjacency.get(s).map(Vec::as_slice).unwrap_or(&[])
    }

    /// View the product as a plain LTS with "u|s" state names.
    pub fn to_lts(&self, user: &UserSpec) -> Lts {
        let states: BTreeSet<StateId> = self
            .states
            .iter()
            .map(|c| StateId::new(c.to_string()))
            .collect();
        let transitions: BTreeSet<Transition> = self
            .transitions
            .iter()
            .map(|(f, l, t)| {
                Transition::new(
                    StateId::new(f.to_string()),
                    l.clone(),
                    StateId::new(t.to_string()),
                )
            })
            .collect();
        Lts::new(
            LtsKind::Composed,
            user.lts.domain.clone(),
            StateId::new(self.initial.to_string()),
            states,
            transitions,
        )
    }

    /// Graphviz rendering, states labelled "u|s".
    pub fn to_dot(&self, user: &UserSpec) -> String {
        let domain = &user.lts.domain;
        let erase = &user.erase_channel.0;
        let mut out = String::from("digraph composed {\n    rankdir=LR;\n");
        out.push_str(&format!("    \"{}\" [shape=doublecircle];\n", self.initial));
        for s in &self.states {
            if *s != self.initial {
                out.push_str(&format!("    \"{s}\" [shape=circle];\n"));
            }
        }
        for (f, l, t) in &self.transitions {
            out.push_str(&format!(
                "    \"{f}\" -> \"{t}\" [label=\"{}\"];\n",
                l.render(LtsKind::Composed, domain, erase)
            ));
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("user and system declare different value domains")]
    DomainMismatch,
    #[error("user and system declare different erase channels ({user} / {system})")]
    ChannelMismatch { user: String, system: String },
}

/// Composed moves available from a pair of component states, in label order.
pub fn composed_moves(
    user: &UserSpec,
    system: &SystemSpec,
    at: &ComposedState,
) -> Vec<(Label, ComposedState)> {
    let mut moves: BTreeSet<(Label, ComposedState)> = BTreeSet::new();
    let user_outs = user.lts.outgoing(&at.user);
    let system_outs = system.lts.outgoing(&at.system);
    for st in system_outs {
        match &st.label {
            // System output on another channel fires alone.
            Label::OtherOut(ch, v) => {
                moves.insert((
                    Label::OtherOut(ch.clone(), *v),
                    ComposedState::new(at.user.clone(), st.to.clone()),
                ));
            }
            // Value and marker exchanges synchronize on equal labels: the
            // shared constructor encodes both endpoints of the exchange.
            Label::ToUser(v) => {
                for ut in user_outs.iter().filter(|u| u.label == st.label) {
                    moves.insert((
                        Label::Sync(*v),
                        ComposedState::new(ut.to.clone(), st.to.clone()),
                    ));
                }
            }
            Label::ToSystem(v) => {
                for ut in user_outs.iter().filter(|u| u.label == st.label) {
                    moves.insert((
                        Label::Sync(*v),
                        ComposedState::new(ut.to.clone(), st.to.clone()),
                    ));
                }
            }
            Label::BeginErase => {
                for ut in user_outs.iter().filter(|u| u.label == Label::BeginErase) {
                    moves.insert((
                        Label::SyncBegin,
                        ComposedState::new(ut.to.clone(), st.to.clone()),
                    ));
                }
            }
            Label::EndErase => {
                for ut in user_outs.iter().filter(|u| u.label == Label::EndErase) {
                    moves.insert((
                        Label::SyncEnd,
                        ComposedState::new(ut.to.clone(), st.to.clone()),
                    ));
                }
            }
            _ => {}
        }
    }
    // User memory reads fire alone.
    for ut in user_outs {
        if let Label::MemRead(i, v) = ut.label {
            moves.insert((
                Label::MemRead(i, v),
                ComposedState::new(ut.to.clone(), at.system.clone()),
            ));
        }
    }
    moves.into_iter().collect()
}

/// Build the reachable product within the depth bound.
pub fn compose(
    user: &UserSpec,
    system: &SystemSpec,
    depth: usize,
) -> Result<ComposedLts, ComposeError> {
    if user.lts.domain != system.lts.domain {
        return Err(ComposeError::DomainMismatch);
    }
    if user.erase_channel != system.erase_channel {
        return Err(ComposeError::ChannelMismatch {
            user: user.erase_channel.0.clone(),
            system: system.erase_channel.0.clone(),
        });
    }

    let initial = ComposedState::new(user.lts.initial.clone(), system.lts.initial.clone());
    let mut states: BTreeSet<ComposedState> = BTreeSet::new();
    let mut transitions: BTreeSet<(ComposedState, Label, ComposedState)> = BTreeSet::new();
    let mut layer: BTreeMap<ComposedState, usize> = BTreeMap::new();
    let mut queue: VecDeque<ComposedState> = VecDeque::new();

    states.insert(initial.clone());
    layer.insert(initial.clone(), 0);
    queue.push_back(initial.clone());

    while let Some(at) = queue.pop_front() {
        let at_layer = layer[&at];
        if at_layer >= depth {
            continue;
        }
        for (label, to) in composed_moves(user, system, &at) {
            transitions.insert((at.clone(), label, to.clone()));
            if states.insert(to.clone()) {
                layer.insert(to.clone(), at_layer + 1);
                queue.push_back(to);
            }
        }
    }

    let frontier: BTreeSet<ComposedState> = layer
        .iter()
        .filter(|(_, l)| **l >= depth)
        .map(|(s, _)| s.clone())
        .collect();

    let mut adjacency: BTreeMap<ComposedState, Vec<(Label, ComposedState)>> = BTreeMap::new();
    for (f, l, t) in &transitions {
        adjacency
            .entry(f.clone())
            .or_default()
            .push((l.clone(), t.clone()));
    }

    Ok(ComposedLts {
        initial,
        states,
        transitions,
        frontier,
        depth,
        adjacency,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProjectionError {
    #[error("composed label at position {0} cannot be replayed on the system")]
    NotASystemTrace(usize),
}

/// Project a composed trace onto the system side. The system replay resolves
/// the direction of each value exchange (the composed label shows only the
/// value passed).
pub fn project_system(trace: &Trace, system: &SystemSpec) -> Result<Trace, ProjectionError> {
    let mut out = Trace::empty();
    let mut state = system.lts.initial.clone();
    for (k, label) in trace.labels().iter().enumerate() {
        let outs = system.lts.outgoing(&state);
        match label {
            Label::MemRead(_, _) => continue,
            Label::Sync(v) => {
                let emit = outs.iter().find(|t| t.label == Label::ToUser(*v));
                let recv = outs.iter().find(|t| t.label == Label::ToSystem(*v));
                let t = emit.or(recv).ok_or(ProjectionError::NotASystemTrace(k))?;
                out.push(t.label.clone());
                state = t.to.clone();
            }
            Label::SyncBegin => {
                let t = outs
                    .iter()
                    .find(|t| t.label == Label::BeginErase)
                    .ok_or(ProjectionError::NotASystemTrace(k))?;
                out.push(Label::BeginErase);
                state = t.to.clone();
            }
            Label::SyncEnd => {
                let t = outs
                    .iter()
                    .find(|t| t.label == Label::EndErase)
                    .ok_or(ProjectionError::NotASystemTrace(k))?;
                out.push(Label::EndErase);
                state = t.to.clone();
            }
            Label::OtherOut(ch, v) => {
                let t = outs
                    .iter()
                    .find(|t| t.label == Label::OtherOut(ch.clone(), *v))
                    .ok_or(ProjectionError::NotASystemTrace(k))?;
                out.push(t.label.clone());
                state = t.to.clone();
            }
            _ => return Err(ProjectionError::NotASystemTrace(k)),
        }
    }
    Ok(out)
}

/// Project a composed trace onto the user side. Value exchanges mirror the
/// system direction resolved by replay.
pub fn project_user(trace: &Trace, system: &SystemSpec) -> Result<Trace, ProjectionError> {
    let mut out = Trace::empty();
    let mut state = system.lts.initial.clone();
    for (k, label) in trace.labels().iter().enumerate() {
        let outs = system.lts.outgoing(&state);
        match label {
            Label::MemRead(i, v) => out.push(Label::MemRead(*i, *v)),
            Label::Sync(v) => {
                let emit = outs.iter().find(|t| t.label == Label::ToUser(*v));
                let recv = outs.iter().find(|t| t.label == Label::ToSystem(*v));
                let t = emit.or(recv).ok_or(ProjectionError::NotASystemTrace(k))?;
                out.push(t.label.clone());
                state = t.to.clone();
            }
            Label::SyncBegin => {
                let t = outs
                    .iter()
                    .find(|t| t.label == Label::BeginErase)
                    .ok_or(ProjectionError::NotASystemTrace(k))?;
                out.push(Label::BeginErase);
                state = t.to.clone();
            }
            Label::SyncEnd => {
                let t = outs
                    .iter()
                    .find(|t| t.label == Label::EndErase)
                    .ok_or(ProjectionError::NotASystemTrace(k))?;
                out.push(Label::EndErase);
                state = t.to.clone();
            }
            Label::OtherOut(ch, v) => {
                let t = outs
                    .iter()
                    .find(|t| t.label == Label::OtherOut(ch.clone(), *v))
                    .ok_or(ProjectionError::NotASystemTrace(k))?;
                state = t.to.clone();
            }
            _ => return Err(ProjectionError::NotASystemTrace(k)),
        }
    }
    Ok(out)
}

/// Liveness of a user for a system: at every reachable composed state the
/// user can supply the input the system awaits (clause a) and can accompany
/// every pending non-input system step (clause b), in both cases after at
/// most a chain of its own memory reads.
pub fn check_liveness(user: &UserSpec, system: &SystemSpec, depth: usize) -> Verdict {
    let product = match compose(user, system, depth) {
        Ok(p) => p,
        Err(e) => {
            return Verdict::fail(
                DepthBound::Bounded(depth),
                vec![Witness::note(format!("composition failed: {e}"))],
            )
        }
    };

    // Shortest composed trace to each reachable state, for witnesses.
    let mut shortest: BTreeMap<ComposedState, Trace> = BTreeMap::new();
    let mut queue = VecDeque::new();
    shortest.insert(product.initial.clone(), Trace::empty());
    queue.push_back(product.initial.clone());
    while let Some(s) = queue.pop_front() {
        let here = shortest[&s].clone();
        for (l, t) in product.outgoing(&s) {
            if !shortest.contains_key(t) {
                shortest.insert(t.clone(), here.extended(l.clone()));
                queue.push_back(t.clone());
            }
        }
    }

    let mut problems = Vec::new();
    for state in &product.states {
        let s1 = &state.system;
        if system.is_input_state(s1) {
            if !read_closure_offers(user, &state.user, depth, |l| {
                matches!(l, Label::ToSystem(_))
            }) {
                problems.push(Witness::new(
                    format!(
                        "system state {s1} awaits an input but user state {} cannot supply one",
                        state.user
                    ),
                    shortest.get(state).cloned().unwrap_or_default(),
                    vec![StateId::new(state.to_string())],
                ));
            }
        } else if let Some(t) = system.lts.outgoing(s1).first() {
            // Deterministic: a non-input state has a unique pending action.
            let ok = match &t.label {
                Label::OtherOut(_, _) => true,
                Label::ToUser(v) => {
                    let v = *v;
                    read_closure_offers(user, &state.user, depth, move |l| *l == Label::ToUser(v))
                }
                Label::BeginErase => {
                    read_closure_offers(user, &state.user, depth, |l| *l == Label::BeginErase)
                }
                Label::EndErase => {
                    read_closure_offers(user, &state.user, depth, |l| *l == Label::EndErase)
                }
                _ => true,
            };
            if !ok {
                problems.push(Witness::new(
                    format!(
                        "system state {s1} wants to perform {} but user state {} cannot take part",
                        t.label.render(
                            LtsKind::System,
                            &system.lts.domain,
                            &system.erase_channel.0
                        ),
                        state.user
                    ),
                    shortest.get(state).cloned().unwrap_or_default(),
                    vec![StateId::new(state.to_string())],
                ));
            }
        }
    }

    if problems.is_empty() {
        if product.frontier.is_empty() {
            Verdict::pass_exhaustive()
        } else {
            Verdict::pass_bounded(depth)
        }
    } else {
        problems.sort();
        problems.dedup();
        Verdict::fail(DepthBound::Bounded(depth), problems)
    }
}

/// Is a user state offering a label matching `wanted` reachable from `from`
/// through memory reads alone (the only composed moves that keep the system
/// side fixed), within the given number of steps?
fn read_closure_offers(
    user: &UserSpec,
    from: &StateId,
    steps: usize,
    wanted: impl Fn(&Label) -> bool,
) -> bool {
    let mut seen: BTreeSet<StateId> = BTreeSet::new();
    let mut frontier = vec![from.clone()];
    seen.insert(from.clone());
    for _ in 0..=steps {
        let mut next = Vec::new();
        for s in &frontier {
            if user.lts.outgoing(s).iter().any(|t| wanted(&t.label)) {
                return true;
            }
            for t in user.lts.outgoing(s) {
                if matches!(t.label, Label::MemRead(_, _)) && seen.insert(t.to.clone()) {
                    next.push(t.to.clone());
                }
            }
        }
        if next.is_empty() {
            return false;
        }
        frontier = next;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::testutil::{lts, two_session_chain};
    use crate::lts::{ChannelId, MemIndex, Transition, ValueDomain};
    use crate::user::testutil::{build_user, double_read_user, minimal_block_user};
    use crate::verdict::Outcome;
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
    fn empty_components_compose_to_empty() {
        let d = domain01();
        let s = system(lts(LtsKind::System, &d, "s0", &["s0"], &[]));
        let u = build_user(&d, "u0", vec![]);
        let c = compose(&u, &s, 8).unwrap();
        assert!(c.transitions.is_empty());
        assert_eq!(c.states.len(), 1);
    }

    #[test]
    fn value_exchange_synchronizes() {
        let d = domain01();
        // User sends 1, system receives any value.
        let u = build_user(
            &d,
            "u0",
            vec![("u0".into(), Label::ToSystem(d.value_at(1)), "u1".into())],
        );
        let mut transitions = Vec::new();
        for val in d.values() {
            transitions.push(("s0".to_string(), Label::ToSystem(val), "s1".to_string()));
        }
        let trans: BTreeSet<Transition> = transitions
            .into_iter()
            .map(|(f, l, t)| Transition::new(StateId::new(f), l, StateId::new(t)))
            .collect();
        let s = system(Lts::new(
            LtsKind::System,
            d.clone(),
            StateId::new("s0"),
            [StateId::new("s0"), StateId::new("s1")]
                .into_iter()
                .collect(),
            trans,
        ));
        let c = compose(&u, &s, 4).unwrap();
        let expected = (
            ComposedState::new(StateId::new("u0"), StateId::new("s0")),
            Label::Sync(d.value_at(1)),
            ComposedState::new(StateId::new("u1"), StateId::new("s1")),
        );
        assert!(c.transitions.contains(&expected));
        assert_eq!(c.transitions.len(), 1);
    }

    #[test]
    fn other_channel_output_fires_alone() {
        let d = domain01();
        let u = build_user(&d, "u0", vec![]);
        let s = system(lts(
            LtsKind::System,
            &d,
            "s0",
            &["s0", "s1"],
            &[(
                "s0",
                Label::OtherOut(ChannelId::new("b"), d.value_at(1)),
                "s1",
            )],
        ));
        let c = compose(&u, &s, 4).unwrap();
        let expected = (
            ComposedState::new(StateId::new("u0"), StateId::new("s0")),
            Label::OtherOut(ChannelId::new("b"), d.value_at(1)),
            ComposedState::new(StateId::new("u0"), StateId::new("s1")),
        );
        assert!(c.transitions.contains(&expected));
    }

    #[test]
    fn projections_of_block_exchange() {
        let d = domain01();
        let s = minimal_block_system(&d);
        let composed = Trace(vec![
            Label::SyncBegin,
            Label::MemRead(MemIndex(1), d.value_at(0)),
            Label::Sync(d.value_at(0)),
            Label::SyncEnd,
        ]);
        let sys = project_system(&composed, &s).unwrap();
        assert_eq!(
            sys,
            Trace(vec![
                Label::BeginErase,
                Label::ToSystem(d.value_at(0)),
                Label::EndErase,
            ])
        );
        let usr = project_user(&composed, &s).unwrap();
        assert_eq!(
            usr,
            Trace(vec![
                Label::BeginErase,
                Label::MemRead(MemIndex(1), d.value_at(0)),
                Label::ToSystem(d.value_at(0)),
                Label::EndErase,
            ])
        );
        // Empty projects to empty; other-channel outputs stay system-side.
        assert_eq!(project_system(&Trace::empty(), &s).unwrap(), Trace::empty());
        assert_eq!(project_user(&Trace::empty(), &s).unwrap(), Trace::empty());
    }

    #[test]
    fn other_out_projects_to_system_only() {
        let d = domain01();
        let s = system(lts(
            LtsKind::System,
            &d,
            "s0",
            &["s0", "s1"],
            &[(
                "s0",
                Label::OtherOut(ChannelId::new("b"), d.value_at(1)),
                "s1",
            )],
        ));
        let composed = Trace(vec![Label::OtherOut(ChannelId::new("b"), d.value_at(1))]);
        assert_eq!(
            project_system(&composed, &s).unwrap(),
            Trace(vec![Label::OtherOut(ChannelId::new("b"), d.value_at(1))])
        );
        assert_eq!(project_user(&composed, &s).unwrap(), Trace::empty());
    }

    #[test]
    fn projection_soundness_on_corpus_pair() {
        let d = domain01();
        let u = minimal_block_user(&d);
        let s = minimal_block_system(&d);
        let c = compose(&u, &s, 8).unwrap();
        let lts_view = c.to_lts(&u);
        for trace in lts_view.traces_to_depth(&lts_view.initial, 6) {
            let sys = project_system(&trace, &s).expect("system projection");
            assert!(s.lts.accepts(&s.lts.initial, &sys));
            let usr = project_user(&trace, &s).expect("user projection");
            assert!(u.lts.accepts(&u.lts.initial, &usr));
        }
    }

    #[test]
    fn mirror_user_is_live() {
        let d = domain01();
        let u = minimal_block_user(&d);
        let s = minimal_block_system(&d);
        let verdict = check_liveness(&u, &s, 10);
        assert_eq!(verdict.outcome, Outcome::Pass);
        assert_eq!(verdict.depth_bound, DepthBound::Exhaustive);
    }

    #[test]
    fn halting_user_fails_liveness_at_input_state() {
        let d = domain01();
        // User receives the begin-erase and stops: the system then awaits an
        // input forever.
        let u = build_user(
            &d,
            "u0",
            vec![("u0".into(), Label::BeginErase, "u1".into())],
        );
        let s = minimal_block_system(&d);
        let verdict = check_liveness(&u, &s, 10);
        assert_eq!(verdict.outcome, Outcome::Fail);
        assert!(verdict.witnesses[0].description.contains("awaits an input"));
    }

    #[test]
    fn user_missing_end_erase_fails_liveness() {
        let d = domain01();
        let mut transitions: Vec<(String, Label, String)> =
            vec![("u0".into(), Label::BeginErase, "u1".into())];
        for val in d.values() {
            let leaf = format!("u2_{}", d.literal(val));
            transitions.push(("u1".into(), Label::MemRead(MemIndex(1), val), leaf.clone()));
            transitions.push((leaf, Label::ToSystem(val), "u3".into()));
        }
        // No end-erase receive at u3.
        let u = build_user(&d, "u0", transitions);
        let s = minimal_block_system(&d);
        let verdict = check_liveness(&u, &s, 10);
        assert_eq!(verdict.outcome, Outcome::Fail);
        assert!(verdict
            .witnesses
            .iter()
            .any(|w| w.description.contains("EE")));
    }

    #[test]
    fn double_read_user_is_live_for_two_session_chain() {
        let d = domain01();
        let u = double_read_user(&d);
        let s = system(two_session_chain(&d));
        assert_eq!(check_liveness(&u, &s, 12).outcome, Outcome::Pass);
    }

    #[test]
    fn dot_export_mentions_composed_states() {
        let d = domain01();
        let u = minimal_block_user(&d);
        let s = minimal_block_system(&d);
        let c = compose(&u, &s, 8).unwrap();
        let dot = c.to_dot(&u);
        assert!(dot.starts_with("digraph composed {"));
        assert!(dot.contains("\"u0|s0\""));
        assert!(dot.contains("label=\"BE\""));
    }
}
