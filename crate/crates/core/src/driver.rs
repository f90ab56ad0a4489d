//! One dispatch point for running a property through the optimized checker,
//! mirroring the oracle's input shape so the two routes are interchangeable
//! in comparisons.

use thiserror::Error;

use crate::compose::check_liveness;
use crate::composite::check_composite_erasure;
use crate::oracle::OracleInput;
use crate::system::{check_input_erasure, check_system_well_formed_at};
use crate::user::{
    check_secret_confinement, check_secret_singularity, check_stream_ability,
    check_user_well_formed_at,
};
use crate::verdict::{PropertyId, Verdict};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("property {property} needs {needs}")]
    WrongInput {
        property: PropertyId,
        needs: &'static str,
    },
}

/// Run the optimized checker for a property.
pub fn run_checker(
    property: PropertyId,
    input: &OracleInput,
    depth: usize,
) -> Result<Verdict, DriverError> {
    let wrong = |needs: &'static str| DriverError::WrongInput { property, needs };
    match (property, input) {
        (PropertyId::Determinism, input) => Ok(input_lts(input).is_deterministic()),
        (PropertyId::InputEnabled, input) => Ok(input_lts(input).is_input_enabled()),
        (PropertyId::SystemWellFormed, OracleInput::System(s))
        | (PropertyId::SystemWellFormed, OracleInput::Pair { system: s, .. }) => {
            Ok(check_system_well_formed_at(s, depth))
        }
        (PropertyId::SystemWellFormed, _) => Err(wrong("a system model")),
        (PropertyId::InputErasure, OracleInput::System(s))
        | (PropertyId::InputErasure, OracleInput::Pair { system: s, .. }) => {
            Ok(check_input_erasure(s, depth))
        }
        (PropertyId::InputErasure, _) => Err(wrong("a system model")),
        (PropertyId::UserWellFormed, OracleInput::User(u))
        | (PropertyId::UserWellFormed, OracleInput::Pair { user: u, .. }) => {
            Ok(check_user_well_formed_at(u, depth))
        }
        (PropertyId::UserWellFormed, _) => Err(wrong("a user model")),
        (PropertyId::Singularity, OracleInput::User(u))
        | (PropertyId::Singularity, OracleInput::Pair { user: u, .. }) => {
            Ok(check_secret_singularity(u, depth))
        }
        (PropertyId::Singularity, _) => Err(wrong("a user model")),
        (PropertyId::Confinement, OracleInput::User(u))
        | (PropertyId::Confinement, OracleInput::Pair { user: u, .. }) => {
            Ok(check_secret_confinement(u, depth))
        }
        (PropertyId::Confinement, _) => Err(wrong("a user model")),
        (PropertyId::StreamAbility, OracleInput::User(u))
        | (PropertyId::StreamAbility, OracleInput::Pair { user: u, .. }) => {
            Ok(check_stream_ability(u, depth))
        }
        (PropertyId::StreamAbility, _) => Err(wrong("a user model")),
        (PropertyId::Liveness, OracleInput::Pair { user, system }) => {
            Ok(check_liveness(user, system, depth))
        }
        (PropertyId::Liveness, _) => Err(wrong("a user and a system")),
        (PropertyId::CompositeErasure, OracleInput::Pair { user, system }) => {
            Ok(check_composite_erasure(user, system, depth))
        }
        (PropertyId::CompositeErasure, _) => Err(wrong("a user and a system")),
    }
}

fn input_lts<'a>(input: &'a OracleInput<'a>) -> &'a crate::lts::Lts {
    match input {
        OracleInput::Model(l) => l,
        OracleInput::System(s) => &s.lts,
        OracleInput::User(u) => &u.lts,
        OracleInput::Pair { system, .. } => &system.lts,
    }
}
