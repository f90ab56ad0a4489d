use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use erasecheck_core::compose::compose;
use erasecheck_core::composite::validate_soundness_theorem;
use erasecheck_core::driver::run_checker;
use erasecheck_core::dsl::{load_model, DocKind, LoadedModel};
use erasecheck_core::lts::LtsKind;
use erasecheck_core::oracle::{oracle_check, OracleInput, DEFAULT_ORACLE_BUDGET};
use erasecheck_core::report::{render_counterexample, report_doc, RenderContext, ReportFormat};
use erasecheck_core::system::{check_input_erasure, check_system_well_formed, SystemSpec};
use erasecheck_core::user::{check_erasure_friendly, UserSpec};
use erasecheck_core::verdict::{Outcome, PropertyId, Verdict};

/// Checks erasure properties of finite models of interactive systems and
/// the users that feed them secrets.
#[derive(Parser)]
#[command(name = "erasecheck", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Check a system model: structure, well-formedness and input erasure.
    CheckSystem {
        file: PathBuf,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check a user model: the erasure-friendliness breakdown.
    CheckUser {
        file: PathBuf,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check that the user never deadlocks the system.
    CheckLiveness {
        user: PathBuf,
        system: PathBuf,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Build the synchronized product and show its size.
    Compose {
        user: PathBuf,
        system: PathBuf,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Write the composed graph in DOT format to this path.
        #[arg(long)]
        emit_dot: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check composite erasure of the composed pair.
    CheckComposite {
        user: PathBuf,
        system: PathBuf,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the premises and the conclusion of the soundness implication.
    Theorem {
        user: PathBuf,
        system: PathBuf,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare the optimized checker against the brute-force oracle.
    OracleCompare {
        property: String,
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 10)]
        depth: usize,
        /// Node budget for the oracle enumeration.
        #[arg(long, default_value_t = DEFAULT_ORACLE_BUDGET)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn load(path: &Path) -> Result<LoadedModel, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    load_model(&text).map_err(|diags| {
        let mut out = format!("cannot load {}:", path.display());
        for d in diags {
            out.push_str(&format!("\n  {d}"));
        }
        out
    })
}

fn load_system(path: &Path) -> Result<SystemSpec, String> {
    let model = load(path)?;
    if model.kind() != DocKind::System {
        return Err(format!(
            "{} declares a {} model, expected a system",
            path.display(),
            model.kind()
        ));
    }
    model
        .to_system_spec()
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn load_user(path: &Path) -> Result<UserSpec, String> {
    let model = load(path)?;
    if model.kind() != DocKind::User {
        return Err(format!(
            "{} declares a {} model, expected a user",
            path.display(),
            model.kind()
        ));
    }
    model
        .to_user_spec()
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn validate_bounds(command: &Command) -> Result<(), String> {
    let depth = match command {
        Command::CheckSystem { depth, .. }
        | Command::CheckUser { depth, .. }
        | Command::CheckLiveness { depth, .. }
        | Command::Compose { depth, .. }
        | Command::CheckComposite { depth, .. }
        | Command::Theorem { depth, .. }
        | Command::OracleCompare { depth, .. } => *depth,
    };
    if depth == 0 {
        return Err("--depth must be at least 1".to_string());
    }
    if let Command::OracleCompare { budget, .. } = command {
        if *budget == 0 {
            return Err("--budget must be at least 1".to_string());
        }
    }
    Ok(())
}

fn exit_code(outcomes: &[Outcome]) -> ExitCode {
    if outcomes.contains(&Outcome::Fail) {
        ExitCode::from(1)
    } else if outcomes.contains(&Outcome::Inconclusive) {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

struct Report<'a> {
    property: &'a str,
    kind: LtsKind,
    verdict: &'a Verdict,
}

/// Print a batch of verdicts in the chosen format and compute the exit code.
fn emit(
    reports: &[Report],
    format: Format,
    domain: &erasecheck_core::lts::ValueDomain,
    erase_channel: &str,
    model: Option<&erasecheck_core::lts::Lts>,
) -> ExitCode {
    match format {
        Format::Text => {
            for r in reports {
                let ctx = RenderContext {
                    property: r.property,
                    kind: r.kind,
                    domain,
                    erase_channel,
                    model: if r.kind == LtsKind::Composed {
                        None
                    } else {
                        model
                    },
                };
                print!(
                    "{}",
                    render_counterexample(r.verdict, ReportFormat::Text, &ctx)
                );
            }
        }
        Format::Json => {
            let docs: Vec<_> = reports
                .iter()
                .map(|r| {
                    let ctx = RenderContext {
                        property: r.property,
                        kind: r.kind,
                        domain,
                        erase_channel,
                        model: None,
                    };
                    report_doc(r.verdict, &ctx)
                })
                .collect();
            println!(
                "{}",
                serde_json::to_string_pretty(&docs).expect("serializable")
            );
        }
    }
    exit_code(
        &reports
            .iter()
            .map(|r| r.verdict.outcome)
            .collect::<Vec<_>>(),
    )
}

fn run(command: Command) -> Result<ExitCode, String> {
    validate_bounds(&command)?;
    match command {
        Command::CheckSystem {
            file,
            depth,
            format,
        } => {
            let model = load(&file)?;
            if model.kind() != DocKind::System {
                return Err(format!(
                    "{} declares a {} model, expected a system",
                    file.display(),
                    model.kind()
                ));
            }
            let lts = model.lts().expect("system has an lts").clone();
            let erase = match &model {
                LoadedModel::System { erase_channel, .. } => erase_channel.0.clone(),
                _ => unreachable!(),
            };
            // Structural prerequisites are reported as ordinary verdicts.
            let determinism = lts.is_deterministic();
            let input_enabled = lts.is_input_enabled();
            if !determinism.is_pass() || !input_enabled.is_pass() {
                let reports = [
                    Report {
                        property: "determinism",
                        kind: LtsKind::System,
                        verdict: &determinism,
                    },
                    Report {
                        property: "input-enabled",
                        kind: LtsKind::System,
                        verdict: &input_enabled,
                    },
                ];
                return Ok(emit(&reports, format, &lts.domain, &erase, Some(&lts)));
            }
            let spec = model.to_system_spec().map_err(|e| e.to_string())?;
            let well_formed = check_system_well_formed(&spec);
            let erasure = if well_formed.is_pass() {
                Some(check_input_erasure(&spec, depth))
            } else {
                None
            };
            let mut reports = vec![
                Report {
                    property: "determinism",
                    kind: LtsKind::System,
                    verdict: &determinism,
                },
                Report {
                    property: "input-enabled",
                    kind: LtsKind::System,
                    verdict: &input_enabled,
                },
                Report {
                    property: "system-well-formed",
                    kind: LtsKind::System,
                    verdict: &well_formed,
                },
            ];
            if let Some(v) = &erasure {
                reports.push(Report {
                    property: "input-erasure",
                    kind: LtsKind::System,
                    verdict: v,
                });
            }
            Ok(emit(
                &reports,
                format,
                &spec.lts.domain,
                &spec.erase_channel.0,
                Some(&spec.lts),
            ))
        }
        Command::CheckUser {
            file,
            depth,
            format,
        } => {
            let user = load_user(&file)?;
            let report = check_erasure_friendly(&user, depth);
            let overall = report.overall();
            let mut reports: Vec<Report> = report
                .parts()
                .into_iter()
                .map(|(name, verdict)| Report {
                    property: name,
                    kind: LtsKind::User,
                    verdict,
                })
                .collect();
            reports.push(Report {
                property: "erasure-friendly",
                kind: LtsKind::User,
                verdict: &overall,
            });
            Ok(emit(
                &reports,
                format,
                &user.lts.domain,
                &user.erase_channel.0,
                Some(&user.lts),
            ))
        }
        Command::CheckLiveness {
            user,
            system,
            depth,
            format,
        } => {
            let user = load_user(&user)?;
            let system = load_system(&system)?;
            let verdict = erasecheck_core::compose::check_liveness(&user, &system, depth);
            let reports = [Report {
                property: "liveness",
                kind: LtsKind::Composed,
                verdict: &verdict,
            }];
            Ok(emit(
                &reports,
                format,
                &user.lts.domain,
                &user.erase_channel.0,
                None,
            ))
        }
        Command::Compose {
            user,
            system,
            depth,
            emit_dot,
            format,
        } => {
            let user = load_user(&user)?;
            let system = load_system(&system)?;
            let product = compose(&user, &system, depth).map_err(|e| e.to_string())?;
            if let Some(path) = emit_dot {
                fs::write(&path, product.to_dot(&user))
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            match format {
                Format::Text => {
                    println!(
                        "composed: {} states, {} transitions, {} at the depth-{} frontier",
                        product.states.len(),
                        product.transitions.len(),
                        product.frontier.len(),
                        depth
                    );
                }
                Format::Json => {
                    let doc = json!({
                        "states": product.states.len(),
                        "transitions": product.transitions.len(),
                        "frontier": product.frontier.len(),
                        "depth": depth,
                    });
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&doc).expect("serializable")
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckComposite {
            user,
            system,
            depth,
            format,
        } => {
            let user = load_user(&user)?;
            let system = load_system(&system)?;
            let verdict =
                erasecheck_core::composite::check_composite_erasure(&user, &system, depth);
            let reports = [Report {
                property: "composite-erasure",
                kind: LtsKind::Composed,
                verdict: &verdict,
            }];
            Ok(emit(
                &reports,
                format,
                &user.lts.domain,
                &user.erase_channel.0,
                None,
            ))
        }
        Command::Theorem {
            user,
            system,
            depth,
            format,
        } => {
            let user = load_user(&user)?;
            let system = load_system(&system)?;
            let report = validate_soundness_theorem(&user, &system, depth);
            let friendly = report.friendliness.overall();
            let mut outcomes = vec![
                report.input_erasure.outcome,
                friendly.outcome,
                report.liveness.outcome,
                report.composite.outcome,
            ];
            match format {
                Format::Text => {
                    println!(
                        "premise input-erasure E(S): {} ({})",
                        report.input_erasure.outcome, report.input_erasure.depth_bound
                    );
                    println!(
                        "premise erasure-friendly EF(U): {} ({})",
                        friendly.outcome, friendly.depth_bound
                    );
                    for (name, v) in report.friendliness.parts() {
                        println!("  {name}: {} ({})", v.outcome, v.depth_bound);
                    }
                    println!(
                        "premise liveness: {} ({})",
                        report.liveness.outcome, report.liveness.depth_bound
                    );
                    println!(
                        "conclusion composite-erasure EC(U|S): {} ({})",
                        report.composite.outcome, report.composite.depth_bound
                    );
                    println!(
                        "consistent: {}",
                        if report.consistent { "true" } else { "false" }
                    );
                }
                Format::Json => {
                    let ctx = |property: &'static str| RenderContext {
                        property,
                        kind: LtsKind::Composed,
                        domain: &user.lts.domain,
                        erase_channel: &user.erase_channel.0,
                        model: None,
                    };
                    let parts: BTreeMap<&str, _> = report
                        .friendliness
                        .parts()
                        .into_iter()
                        .map(|(name, v)| {
                            (
                                name,
                                report_doc(
                                    v,
                                    &RenderContext {
                                        property: name,
                                        kind: LtsKind::User,
                                        domain: &user.lts.domain,
                                        erase_channel: &user.erase_channel.0,
                                        model: None,
                                    },
                                ),
                            )
                        })
                        .collect();
                    let doc = json!({
                        "premises": {
                            "input-erasure": report_doc(&report.input_erasure, &ctx("input-erasure")),
                            "erasure-friendly": {
                                "overall": report_doc(&friendly, &ctx("erasure-friendly")),
                                "parts": parts,
                            },
                            "liveness": report_doc(&report.liveness, &ctx("liveness")),
                        },
                        "conclusion": report_doc(&report.composite, &ctx("composite-erasure")),
                        "consistent": report.consistent,
                    });
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&doc).expect("serializable")
                    );
                }
            }
            if !report.consistent {
                // A red-alert outcome: surface it through the exit code too.
                outcomes.push(Outcome::Fail);
            }
            Ok(exit_code(&outcomes))
        }
        Command::OracleCompare {
            property,
            files,
            depth,
            budget,
            format,
        } => {
            let property: PropertyId = property.parse()?;
            let mut system: Option<SystemSpec> = None;
            let mut user: Option<UserSpec> = None;
            let mut single: Option<LoadedModel> = None;
            for path in &files {
                let model = load(path)?;
                match model.kind() {
                    DocKind::System => {
                        system = Some(model.to_system_spec().map_err(|e| e.to_string())?);
                    }
                    DocKind::User => {
                        user = Some(model.to_user_spec().map_err(|e| e.to_string())?);
                    }
                    DocKind::Memory => {
                        return Err(format!("{} is a memory document", path.display()))
                    }
                }
                single = Some(model);
            }
            let make_input = || -> Result<OracleInput, String> {
                Ok(match (property, user.as_ref(), system.as_ref()) {
                    (PropertyId::Determinism | PropertyId::InputEnabled, _, _) => {
                        let model = single
                            .as_ref()
                            .and_then(|m| m.lts())
                            .ok_or("no model given")?;
                        OracleInput::Model(model)
                    }
                    (_, Some(u), Some(s)) => OracleInput::Pair { user: u, system: s },
                    (_, Some(u), None) => OracleInput::User(u),
                    (_, None, Some(s)) => OracleInput::System(s),
                    _ => return Err("no model given".to_string()),
                })
            };
            let checker =
                run_checker(property, &make_input()?, depth).map_err(|e| e.to_string())?;
            let oracle =
                oracle_check(property, make_input()?, depth, budget).map_err(|e| e.to_string())?;
            let agree = checker.outcome == oracle.outcome;
            match format {
                Format::Text => {
                    println!(
                        "{property}: checker {} ({}), oracle {} ({}), {}",
                        checker.outcome,
                        checker.depth_bound,
                        oracle.outcome,
                        oracle.depth_bound,
                        if agree { "agree" } else { "DISAGREE" }
                    );
                }
                Format::Json => {
                    let domain = user
                        .as_ref()
                        .map(|u| u.lts.domain.clone())
                        .or_else(|| system.as_ref().map(|s| s.lts.domain.clone()))
                        .or_else(|| {
                            single
                                .as_ref()
                                .and_then(|m| m.lts())
                                .map(|l| l.domain.clone())
                        })
                        .ok_or("no model given")?;
                    let ctx = RenderContext {
                        property: property.name(),
                        kind: LtsKind::Composed,
                        domain: &domain,
                        erase_channel: "a",
                        model: None,
                    };
                    let doc = json!({
                        "property": property.name(),
                        "checker": report_doc(&checker, &ctx),
                        "oracle": report_doc(&oracle, &ctx),
                        "agree": agree,
                    });
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&doc).expect("serializable")
                    );
                }
            }
            Ok(if agree {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
