//! Template-assembled (system, user) pairs for the theorem-consistency
//! suite: erasing systems crossed with friendly users, plus mutations with
//! known expected premise failures.

use erasecheck_core::verdict::PropertyId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Session {
    /// Open, take the value, close.
    Plain,
    /// The system feeds the (identity-encoded) value back inside the block.
    Feedback,
    /// Feedback plus an in-block input for the user's reply.
    RoundTrip,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tail {
    Halt,
    /// A constant output on another channel after the last block.
    OtherConst,
    /// One post-block input forwarded verbatim to another channel.
    Capture,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UserKind {
    Friendly,
    /// Every block reads index 1: breaks secret singularity.
    Reread,
    /// The round-trip reply echoes the feedback: breaks stream ability.
    Echo,
    /// The last block forks on the secret and reveals it afterwards:
    /// breaks secret confinement.
    Residue,
    /// The final end-erase receive is missing: the user halts inside the
    /// block, breaking well-formedness (and liveness).
    DropEnd,
}

pub struct TemplatePair {
    pub name: String,
    pub system: String,
    pub user: String,
    /// The premise this pair is built to violate, if any. Not every test
    /// binary sharing this module consumes it.
    #[allow(dead_code)]
    pub expected_failure: Option<PropertyId>,
}

fn system_text(blocks: usize, session: Session, tail: Tail) -> String {
    let mut states = Vec::new();
    let mut trans = Vec::new();
    for k in 1..=blocks {
        let open = if k == 1 {
            "s0".to_string()
        } else {
            format!("b{k}_open")
        };
        let next_open = if k == blocks {
            "tail".to_string()
        } else {
            format!("b{}_open", k + 1)
        };
        let input = format!("b{k}_in");
        states.push(input.clone());
        if k > 1 {
            states.push(open.clone());
        }
        trans.push(format!("trans {open} -> {input} : out a BE"));
        match session {
            Session::Plain => {
                let got = format!("b{k}_got");
                states.push(got.clone());
                trans.push(format!("trans {input} -> {got} : in a $v forall v"));
                trans.push(format!("trans {got} -> {next_open} : out a EE"));
            }
            Session::Feedback | Session::RoundTrip => {
                for lit in ["0", "1"] {
                    let got = format!("b{k}_got{lit}");
                    states.push(got.clone());
                    trans.push(format!("trans {input} -> b{k}_got$v : in a $v forall v"));
                    let fb = format!("b{k}_fb");
                    trans.push(format!("trans {got} -> {fb} : out a {lit}"));
                }
                // The forall line above is emitted twice; dedup below.
                let fb = format!("b{k}_fb");
                states.push(fb.clone());
                if session == Session::RoundTrip {
                    let rt = format!("b{k}_rt");
                    states.push(rt.clone());
                    trans.push(format!("trans {fb} -> {rt} : in a $v forall v"));
                    trans.push(format!("trans {rt} -> {next_open} : out a EE"));
                } else {
                    trans.push(format!("trans {fb} -> {next_open} : out a EE"));
                }
            }
        }
    }
    states.push("tail".to_string());
    let mut channels = vec!["channel a erase".to_string()];
    match tail {
        Tail::Halt => {}
        Tail::OtherConst => {
            channels.push("channel b other".to_string());
            states.push("halt".to_string());
            trans.push("trans tail -> halt : out b 0".to_string());
        }
        Tail::Capture => {
            channels.push("channel b other".to_string());
            states.push("halt".to_string());
            for lit in ["0", "1"] {
                let cap = format!("cap{lit}");
                states.push(cap.clone());
                trans.push("trans tail -> cap$v : in a $v forall v".to_string());
                trans.push(format!("trans {cap} -> halt : out b {lit}"));
            }
        }
    }
    trans.sort();
    trans.dedup();
    let mut out = String::from("system template\ndomain {0, 1}\n");
    for c in &channels {
        out.push_str(c);
        out.push('\n');
    }
    out.push_str("state s0 initial\n");
    states.sort();
    states.dedup();
    for s in states {
        if s != "s0" {
            out.push_str(&format!("state {s}\n"));
        }
    }
    for t in trans {
        out.push_str(&t);
        out.push('\n');
    }
    out
}

fn user_text(blocks: usize, session: Session, tail: Tail, kind: UserKind) -> String {
    let mut states = Vec::new();
    let mut trans = Vec::new();
    for k in 1..=blocks {
        let open = if k == 1 {
            "u0".to_string()
        } else {
            format!("c{k}_open")
        };
        let next_open = if k == blocks {
            "post".to_string()
        } else {
            format!("c{}_open", k + 1)
        };
        if k > 1 {
            states.push(open.clone());
        }
        let rd = format!("c{k}_rd");
        states.push(rd.clone());
        trans.push(format!("trans {open} -> {rd} : in a BE"));
        let index = if kind == UserKind::Reread { 1 } else { k };
        trans.push(format!(
            "trans {rd} -> c{k}_v$v : read i={index} $v forall v"
        ));
        let last = k == blocks;
        let split_last = kind == UserKind::Residue && last;
        for lit in ["0", "1"] {
            let vstate = format!("c{k}_v{lit}");
            states.push(vstate.clone());
            let sent = if split_last {
                format!("c{k}_sent{lit}")
            } else {
                format!("c{k}_sent")
            };
            trans.push(format!("trans {vstate} -> {sent} : out a {lit}"));
        }
        let sent_states: Vec<String> = if split_last {
            vec![format!("c{k}_sent0"), format!("c{k}_sent1")]
        } else {
            vec![format!("c{k}_sent")]
        };
        for sent in &sent_states {
            states.push(sent.clone());
            let suffix = sent
                .strip_prefix(&format!("c{k}_sent"))
                .unwrap()
                .to_string();
            let mut at = sent.clone();
            match session {
                Session::Plain => {}
                Session::Feedback => {
                    let fb = format!("c{k}_fb{suffix}");
                    states.push(fb.clone());
                    trans.push(format!("trans {at} -> {fb} : in a $v forall v"));
                    at = fb;
                }
                Session::RoundTrip => {
                    if kind == UserKind::Echo {
                        for lit in ["0", "1"] {
                            let held = format!("c{k}_held{lit}{suffix}");
                            states.push(held.clone());
                            trans.push(format!(
                                "trans {at} -> c{k}_held$v{suffix} : in a $v forall v"
                            ));
                            trans.push(format!("trans {held} -> c{k}_rt{suffix} : out a {lit}"));
                        }
                    } else {
                        let fb = format!("c{k}_fb{suffix}");
                        states.push(fb.clone());
                        trans.push(format!("trans {at} -> {fb} : in a $v forall v"));
                        trans.push(format!("trans {fb} -> c{k}_rt{suffix} : out a 0"));
                    }
                    let rt = format!("c{k}_rt{suffix}");
                    states.push(rt.clone());
                    at = rt;
                }
            }
            let close_to = if split_last {
                format!("end{suffix}")
            } else if kind == UserKind::DropEnd && last {
                // No end-erase receive: the user is stuck inside the block.
                continue;
            } else {
                next_open.clone()
            };
            if !(kind == UserKind::DropEnd && last) {
                trans.push(format!("trans {at} -> {close_to} : in a EE"));
            }
        }
        if split_last {
            for lit in ["0", "1"] {
                let end = format!("end{lit}");
                states.push(end.clone());
                trans.push(format!("trans {end} -> leak : out a {lit}"));
            }
            states.push("leak".to_string());
        }
    }
    if kind != UserKind::Residue && kind != UserKind::DropEnd {
        states.push("post".to_string());
        if tail == Tail::Capture {
            states.push("fin".to_string());
            trans.push("trans post -> fin : out a 0".to_string());
        }
    }
    trans.sort();
    trans.dedup();
    let mut out = String::from("user template\ndomain {0, 1}\nchannel a erase\nstate u0 initial\n");
    states.sort();
    states.dedup();
    for s in states {
        if s != "u0" {
            out.push_str(&format!("state {s}\n"));
        }
    }
    for t in trans {
        out.push_str(&t);
        out.push('\n');
    }
    out
}

fn nested_system_text() -> String {
    "system nested
domain {0, 1}
channel a erase
state s0 initial
state s1
state s2
state s3
state s4
state s5
state s6
trans s0 -> s1 : out a BE
trans s1 -> s2 : in a $v forall v
trans s2 -> s3 : out a BE
trans s3 -> s4 : in a $v forall v
trans s4 -> s5 : out a EE
trans s5 -> s6 : out a EE
"
    .to_string()
}

fn nested_user_text(reread: bool) -> String {
    let inner = if reread { 1 } else { 2 };
    format!(
        "user nested
domain {{0, 1}}
channel a erase
state u0 initial
state u1
state u2_0
state u2_1
state u3
state u4
state u5_0
state u5_1
state u6
state u7
state u8
trans u0 -> u1 : in a BE
trans u1 -> u2_$v : read i=1 $v forall v
trans u2_0 -> u3 : out a 0
trans u2_1 -> u3 : out a 1
trans u3 -> u4 : in a BE
trans u4 -> u5_$v : read i={inner} $v forall v
trans u5_0 -> u6 : out a 0
trans u5_1 -> u6 : out a 1
trans u6 -> u7 : in a EE
trans u7 -> u8 : in a EE
"
    )
}

fn leaky_system_text() -> String {
    "system leaky
domain {0, 1}
channel a erase
channel b other
state s0 initial
state s1
state s2_0
state s2_1
state s3_0
state s3_1
state s4
trans s0 -> s1 : out a BE
trans s1 -> s2_$v : in a $v forall v
trans s2_0 -> s3_0 : out a EE
trans s2_1 -> s3_1 : out a EE
trans s3_0 -> s4 : out b 0
trans s3_1 -> s4 : out b 1
"
    .to_string()
}

pub fn template_pairs() -> Vec<TemplatePair> {
    let mut pairs = Vec::new();
    let sessions = [Session::Plain, Session::Feedback, Session::RoundTrip];
    let tails = [Tail::Halt, Tail::OtherConst, Tail::Capture];
    for blocks in 1..=3usize {
        for &session in &sessions {
            for &tail in &tails {
                let system = system_text(blocks, session, tail);
                let mut kinds = vec![
                    (UserKind::Friendly, None),
                    (UserKind::DropEnd, Some(PropertyId::UserWellFormed)),
                ];
                if blocks >= 2 {
                    kinds.push((UserKind::Reread, Some(PropertyId::Singularity)));
                }
                if session == Session::RoundTrip {
                    kinds.push((UserKind::Echo, Some(PropertyId::StreamAbility)));
                }
                if session != Session::RoundTrip {
                    kinds.push((UserKind::Residue, Some(PropertyId::Confinement)));
                }
                for (kind, expected_failure) in kinds {
                    pairs.push(TemplatePair {
                        name: format!("{blocks}blk_{session:?}_{tail:?}_{kind:?}").to_lowercase(),
                        system: system.clone(),
                        user: user_text(blocks, session, tail, kind),
                        expected_failure,
                    });
                }
            }
        }
    }
    pairs.push(TemplatePair {
        name: "nested_friendly".to_string(),
        system: nested_system_text(),
        user: nested_user_text(false),
        expected_failure: None,
    });
    pairs.push(TemplatePair {
        name: "nested_reread".to_string(),
        system: nested_system_text(),
        user: nested_user_text(true),
        expected_failure: Some(PropertyId::Singularity),
    });
    for (kind, expected) in [
        (UserKind::Friendly, Some(PropertyId::InputErasure)),
        (UserKind::Residue, Some(PropertyId::InputErasure)),
        (UserKind::DropEnd, Some(PropertyId::InputErasure)),
    ] {
        pairs.push(TemplatePair {
            name: format!("leaky_{kind:?}").to_lowercase(),
            system: leaky_system_text(),
            user: user_text(1, Session::Plain, Tail::Halt, kind),
            expected_failure: expected,
        });
    }
    pairs
}
