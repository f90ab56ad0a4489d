//! Rendering of verdicts: a human text form with one label per line and
//! state annotations, and a stable machine-readable document that round
//! trips to the same traces.

use serde::{Deserialize, Serialize};

use crate::lts::{ChannelId, Label, Lts, LtsKind, MemIndex, StateId, Trace, ValueDomain};
use crate::verdict::{DepthBound, Outcome, Verdict};

/// Output format selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Machine,
}

/// Everything needed to render labels of a verdict.
pub struct RenderContext<'a> {
    pub property: &'a str,
    pub kind: LtsKind,
    pub domain: &'a ValueDomain,
    pub erase_channel: &'a str,
    /// Model to replay witness traces on for state annotations.
    pub model: Option<&'a Lts>,
}

/// Machine-readable report document.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ReportDoc {
    pub property: String,
    pub verdict: String,
    pub depth: DepthDoc,
    pub witnesses: Vec<WitnessDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum DepthDoc {
    Bounded(usize),
    Exhaustive(String),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct WitnessDoc {
    pub description: String,
    pub trace: Vec<LabelDoc>,
    pub states: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct LabelDoc {
    pub label_kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

pub fn label_to_doc(label: &Label, domain: &ValueDomain) -> LabelDoc {
    let (kind, channel, index, value) = match label {
        Label::ToUser(v) => ("value_to_user", None, None, Some(*v)),
        Label::ToSystem(v) => ("value_to_system", None, None, Some(*v)),
        Label::BeginErase => ("begin_erase", None, None, None),
        Label::EndErase => ("end_erase", None, None, None),
        Label::OtherOut(ch, v) => ("other_out", Some(ch.0.clone()), None, Some(*v)),
        Label::MemRead(i, v) => ("mem_read", None, Some(i.0), Some(*v)),
        Label::Sync(v) => ("sync_value", None, None, Some(*v)),
        Label::SyncBegin => ("sync_begin_erase", None, None, None),
        Label::SyncEnd => ("sync_end_erase", None, None, None),
    };
    LabelDoc {
        label_kind: kind.to_string(),
        channel,
        index,
        value: value.map(|v| domain.literal(v).to_string()),
    }
}

pub fn label_from_doc(doc: &LabelDoc, domain: &ValueDomain) -> Result<Label, String> {
    let value = || -> Result<crate::lts::Value, String> {
        let lit = doc
            .value
            .as_ref()
            .ok_or_else(|| format!("label {} needs a value", doc.label_kind))?;
        domain
            .lookup(lit)
            .ok_or_else(|| format!("value '{lit}' is not in the domain"))
    };
    match doc.label_kind.as_str() {
        "value_to_user" => Ok(Label::ToUser(value()?)),
        "value_to_system" => Ok(Label::ToSystem(value()?)),
        "begin_erase" => Ok(Label::BeginErase),
        "end_erase" => Ok(Label::EndErase),
        "other_out" => {
            let ch = doc
                .channel
                .as_ref()
                .ok_or_else(|| "other_out needs a channel".to_string())?;
            Ok(Label::OtherOut(ChannelId::new(ch.clone()), value()?))
        }
        "mem_read" => {
            let i = doc
                .index
                .ok_or_else(|| "mem_read needs an index".to_string())?;
            Ok(Label::MemRead(MemIndex(i), value()?))
        }
        "sync_value" => Ok(Label::Sync(value()?)),
        "sync_begin_erase" => Ok(Label::SyncBegin),
        "sync_end_erase" => Ok(Label::SyncEnd),
        other => Err(format!("unknown label kind '{other}'")),
    }
}

pub fn trace_from_doc(docs: &[LabelDoc], domain: &ValueDomain) -> Result<Trace, String> {
    docs.iter().map(|d| label_from_doc(d, domain)).collect()
}

/// Build the machine-readable document for a verdict.
pub fn report_doc(verdict: &Verdict, ctx: &RenderContext) -> ReportDoc {
    ReportDoc {
        property: ctx.property.to_string(),
        verdict: match verdict.outcome {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inconclusive => "inconclusive",
        }
        .to_string(),
        depth: match verdict.depth_bound {
            DepthBound::Exhaustive => DepthDoc::Exhaustive("exhaustive".to_string()),
            DepthBound::Bounded(d) => DepthDoc::Bounded(d),
        },
        witnesses: verdict
            .witnesses
            .iter()
            .map(|w| WitnessDoc {
                description: w.description.clone(),
                trace: w
                    .trace
                    .labels()
                    .iter()
                    .map(|l| label_to_doc(l, ctx.domain))
                    .collect(),
                states: w.states.iter().map(|s| s.0.clone()).collect(),
            })
            .collect(),
    }
}

/// Render a verdict. The machine form is stable: two runs over the same
/// inputs produce identical bytes.
pub fn render_counterexample(
    verdict: &Verdict,
    format: ReportFormat,
    ctx: &RenderContext,
) -> String {
    match format {
        ReportFormat::Machine => {
            let mut s =
                serde_json::to_string_pretty(&report_doc(verdict, ctx)).expect("serializable");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(verdict, ctx),
    }
}

fn render_text(verdict: &Verdict, ctx: &RenderContext) -> String {
    let mut out = String::new();
    match verdict.outcome {
        Outcome::Pass => {
            out.push_str(&format!(
                "{}: PASS ({})\n",
                ctx.property, verdict.depth_bound
            ));
        }
        Outcome::Fail => {
            out.push_str(&format!(
                "{}: FAIL ({})\n",
                ctx.property, verdict.depth_bound
            ));
        }
        Outcome::Inconclusive => {
            let depth = match verdict.depth_bound {
                DepthBound::Bounded(d) => d,
                DepthBound::Exhaustive => 0,
            };
            let open_states: Vec<String> = verdict
                .witnesses
                .iter()
                .flat_map(|w| w.states.iter().map(|s| s.0.clone()))
                .collect();
            if open_states.is_empty() {
                out.push_str(&format!(
                    "{}: INCONCLUSIVE at depth {depth}\n",
                    ctx.property
                ));
            } else {
                out.push_str(&format!(
                    "{}: INCONCLUSIVE at depth {depth}: open sessions at [{}]\n",
                    ctx.property,
                    open_states.join(", ")
                ));
            }
        }
    }
    for w in &verdict.witnesses {
        out.push_str(&format!("  - {}\n", w.description));
        let annotations = ctx.model.map(|m| annotate(&w.trace, m));
        for (k, label) in w.trace.labels().iter().enumerate() {
            let rendered = label.render(ctx.kind, ctx.domain, ctx.erase_channel);
            match annotations.as_ref().and_then(|a| a[k].clone()) {
                Some(state) => out.push_str(&format!("      ({state}) {rendered}\n")),
                None => out.push_str(&format!("      {rendered}\n")),
            }
        }
    }
    out
}

/// State before each label, when the replay is unambiguous.
fn annotate(trace: &Trace, model: &Lts) -> Vec<Option<StateId>> {
    let mut out = Vec::with_capacity(trace.len());
    let mut current: Vec<StateId> = vec![model.initial.clone()];
    for label in trace.labels() {
        out.push(if current.len() == 1 {
            Some(current[0].clone())
        } else {
            None
        });
        let mut next: Vec<StateId> = Vec::new();
        for s in &current {
            for t in model.outgoing(s) {
                if &t.label == label && !next.contains(&t.to) {
                    next.push(t.to.clone());
                }
            }
        }
        if next.is_empty() {
            // Not replayable from here on; stop annotating.
            current = Vec::new();
        } else {
            current = next;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::testutil::two_session_chain;
    use crate::verdict::Witness;

    #[test]
    fn machine_report_round_trips_traces() {
        let d = ValueDomain::numeric(2);
        let m = two_session_chain(&d);
        let trace = Trace(vec![
            Label::BeginErase,
            Label::ToSystem(d.value_at(0)),
            Label::EndErase,
        ]);
        let verdict = Verdict::fail(
            DepthBound::Bounded(8),
            vec![Witness::new("example", trace.clone(), vec![])],
        );
        let ctx = RenderContext {
            property: "input-erasure",
            kind: LtsKind::System,
            domain: &d,
            erase_channel: "a",
            model: Some(&m),
        };
        let rendered = render_counterexample(&verdict, ReportFormat::Machine, &ctx);
        let doc: ReportDoc = serde_json::from_str(&rendered).unwrap();
        assert_eq!(doc.verdict, "fail");
        let back = trace_from_doc(&doc.witnesses[0].trace, &d).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn text_report_annotates_states() {
        let d = ValueDomain::numeric(2);
        let m = two_session_chain(&d);
        let trace = Trace(vec![Label::BeginErase, Label::ToSystem(d.value_at(1))]);
        let verdict = Verdict::fail(
            DepthBound::Bounded(4),
            vec![Witness::new("walk", trace, vec![])],
        );
        let ctx = RenderContext {
            property: "determinism",
            kind: LtsKind::System,
            domain: &d,
            erase_channel: "a",
            model: Some(&m),
        };
        let text = render_counterexample(&verdict, ReportFormat::Text, &ctx);
        assert!(text.contains("determinism: FAIL (depth=4)"));
        assert!(text.contains("(s0) a!BE"));
        assert!(text.contains("(s1) a?1"));
    }

    #[test]
    fn inconclusive_report_names_open_sessions() {
        let d = ValueDomain::numeric(2);
        let verdict = Verdict::inconclusive(
            6,
            vec![Witness::new(
                "session does not close",
                Trace::empty(),
                vec![StateId::new("s2"), StateId::new("s5")],
            )],
        );
        let ctx = RenderContext {
            property: "input-erasure",
            kind: LtsKind::System,
            domain: &d,
            erase_channel: "a",
            model: None,
        };
        let text = render_counterexample(&verdict, ReportFormat::Text, &ctx);
        assert!(
            text.starts_with("input-erasure: INCONCLUSIVE at depth 6: open sessions at [s2, s5]")
        );
    }

    #[test]
    fn pass_report_has_depth() {
        let d = ValueDomain::numeric(2);
        let ctx = RenderContext {
            property: "singularity",
            kind: LtsKind::User,
            domain: &d,
            erase_channel: "a",
            model: None,
        };
        let text = render_counterexample(&Verdict::pass_bounded(10), ReportFormat::Text, &ctx);
        assert_eq!(text, "singularity: PASS (depth=10)\n");
        let text = render_counterexample(&Verdict::pass_exhaustive(), ReportFormat::Text, &ctx);
        assert_eq!(text, "singularity: PASS (exhaustive)\n");
    }
}
