//! The bundled example models and their golden verdicts. The files double as
//! documentation of the format and as the acceptance-test fixture set.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::dsl::{load_model, LoadedModel};
use crate::system::SystemSpec;
use crate::user::{Memory, UserSpec};
use crate::verdict::{Outcome, PropertyId};

macro_rules! corpus_file {
    ($name:literal) => {
        ($name, include_str!(concat!("../../../corpus/", $name)))
    };
}

/// Embedded corpus files, keyed by file name.
pub const CORPUS_FILES: &[(&str, &str)] = &[
    corpus_file!("figure1.sys"),
    corpus_file!("ex_a.sys"),
    corpus_file!("usr1.usr"),
    corpus_file!("mod10.sys"),
    corpus_file!("mod10.usr"),
    corpus_file!("streamab.sys"),
    corpus_file!("streamab.usr"),
    corpus_file!("minimal.sys"),
    corpus_file!("minimal.usr"),
    corpus_file!("minimal.mem"),
];

const MANIFEST: &str = include_str!("../../../corpus/manifest.json");

pub fn corpus_file(name: &str) -> Option<&'static str> {
    CORPUS_FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

#[derive(Clone, Debug, Deserialize)]
struct ManifestDoc {
    entries: Vec<EntryDoc>,
}

#[derive(Clone, Debug, Deserialize)]
struct EntryDoc {
    name: String,
    origin: String,
    depth: usize,
    files: FilesDoc,
    expected: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Deserialize)]
struct FilesDoc {
    #[serde(default)]
    system: Option<String>,
    #[serde(default)]
    user: Option<String>,
    #[serde(default)]
    memory: Option<String>,
}

/// One corpus entry: model files plus the expected verdict per property.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub origin: String,
    pub depth: usize,
    pub system_file: Option<String>,
    pub user_file: Option<String>,
    pub memory_file: Option<String>,
    pub expected: BTreeMap<PropertyId, Outcome>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus file {0} is missing")]
    MissingFile(String),
    #[error("corpus file {file} does not load: {message}")]
    BadFile { file: String, message: String },
    #[error("manifest names unknown property '{0}'")]
    BadProperty(String),
    #[error("manifest names unknown outcome '{0}'")]
    BadOutcome(String),
}

/// The manifest of bundled examples.
pub fn corpus_manifest() -> Vec<CorpusEntry> {
    let doc: ManifestDoc = serde_json::from_str(MANIFEST).expect("manifest parses");
    doc.entries
        .into_iter()
        .map(|e| CorpusEntry {
            name: e.name,
            origin: e.origin,
            depth: e.depth,
            system_file: e.files.system,
            user_file: e.files.user,
            memory_file: e.files.memory,
            expected: e
                .expected
                .into_iter()
                .map(|(p, o)| {
                    let property: PropertyId = p.parse().expect("manifest property");
                    let outcome = match o.as_str() {
                        "pass" => Outcome::Pass,
                        "fail" => Outcome::Fail,
                        "inconclusive" => Outcome::Inconclusive,
                        other => panic!("manifest outcome '{other}'"),
                    };
                    (property, outcome)
                })
                .collect(),
        })
        .collect()
}

/// The models of one corpus entry, loaded and validated.
pub struct LoadedEntry {
    pub system: Option<SystemSpec>,
    pub user: Option<UserSpec>,
    pub memory: Option<Memory>,
}

pub fn load_entry(entry: &CorpusEntry) -> Result<LoadedEntry, CorpusError> {
    let load = |file: &str| -> Result<LoadedModel, CorpusError> {
        let text = corpus_file(file).ok_or_else(|| CorpusError::MissingFile(file.to_string()))?;
        load_model(text).map_err(|diags| CorpusError::BadFile {
            file: file.to_string(),
            message: diags
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        })
    };
    let system = match &entry.system_file {
        Some(f) => Some(
            load(f)?
                .to_system_spec()
                .map_err(|e| CorpusError::BadFile {
                    file: f.clone(),
                    message: e.to_string(),
                })?,
        ),
        None => None,
    };
    let user = match &entry.user_file {
        Some(f) => Some(load(f)?.to_user_spec().map_err(|e| CorpusError::BadFile {
            file: f.clone(),
            message: e.to_string(),
        })?),
        None => None,
    };
    let memory = match &entry.memory_file {
        Some(f) => match load(f)? {
            LoadedModel::Memory { memory, .. } => Some(memory),
            _ => {
                return Err(CorpusError::BadFile {
                    file: f.clone(),
                    message: "expected a memory document".to_string(),
                })
            }
        },
        None => None,
    };
    Ok(LoadedEntry {
        system,
        user,
        memory,
    })
}
