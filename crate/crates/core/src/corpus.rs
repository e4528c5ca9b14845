//! Shipped reference data: section exemplars, tool-tip questions and the
//! expert directory.
//!
//! Layout under the corpus root:
//!
//! ```text
//! exemplars/<section_id>/<nn>_<slug>.txt   body
//! exemplars/<section_id>/<nn>_<slug>.meta  {"exemplar_id", "title", "source_url"}
//! tooltips/<section_id>.txt                one question per line
//! experts.json                             [ExpertProfile]
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::model::SectionId;

pub const TOOLTIPS_MIN: usize = 3;
pub const TOOLTIPS_MAX: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub exemplar_id: String,
    pub section_id: SectionId,
    pub title: String,
    pub source_url: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertProfile {
    pub expert_id: String,
    pub name: String,
    pub focus_areas: Vec<SectionId>,
    pub contact_url: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
}

#[derive(Deserialize)]
struct ExemplarMeta {
    exemplar_id: String,
    title: String,
    source_url: String,
}

/// Loaded corpus. Exemplars are kept in corpus order (filename sort).
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    exemplars: BTreeMap<SectionId, Vec<Exemplar>>,
    tooltips: BTreeMap<SectionId, Vec<String>>,
    experts: Vec<ExpertProfile>,
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

fn malformed(path: &Path, reason: impl Into<String>) -> CorpusError {
    CorpusError::Malformed { path: path.to_path_buf(), reason: reason.into() }
}

impl Corpus {
    /// Loads and validates a corpus directory. Every section must have a
    /// tool-tip file with 3..=5 questions; exemplars may be missing for a
    /// section (prompt assembly reports that separately).
    pub fn load(root: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
        let root = root.as_ref();
        let mut corpus = Corpus::default();

        for section in SectionId::ALL {
            let dir = root.join("exemplars").join(section.as_str());
            let mut bodies: Vec<PathBuf> = match std::fs::read_dir(&dir) {
                Ok(entries) => entries
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                    .collect(),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
                Err(source) => return Err(CorpusError::Io { path: dir, source }),
            };
            bodies.sort();
            let mut list = Vec::with_capacity(bodies.len());
            for body_path in bodies {
                let meta_path = body_path.with_extension("meta");
                let meta: ExemplarMeta = serde_json::from_str(&read(&meta_path)?)
                    .map_err(|e| malformed(&meta_path, e.to_string()))?;
                let body = read(&body_path)?.trim().to_string();
                if body.is_empty() {
                    return Err(malformed(&body_path, "empty exemplar"));
                }
                list.push(Exemplar {
                    exemplar_id: meta.exemplar_id,
                    section_id: section,
                    title: meta.title,
                    source_url: meta.source_url,
                    body,
                });
            }
            corpus.exemplars.insert(section, list);

            let tip_path = root.join("tooltips").join(format!("{}.txt", section.as_str()));
            let questions: Vec<String> =
                read(&tip_path)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
            if !(TOOLTIPS_MIN..=TOOLTIPS_MAX).contains(&questions.len()) {
                return Err(malformed(&tip_path, format!("expected 3..=5 questions, found {}", questions.len())));
            }
            corpus.tooltips.insert(section, questions);
        }

        let experts_path = root.join("experts.json");
        corpus.experts =
            serde_json::from_str(&read(&experts_path)?).map_err(|e| malformed(&experts_path, e.to_string()))?;
        if let Some(bad) = corpus.experts.iter().find(|e| e.focus_areas.is_empty()) {
            return Err(malformed(&experts_path, format!("{} has no focus areas", bad.expert_id)));
        }
        Ok(corpus)
    }

    pub fn exemplars(&self, section: SectionId) -> &[Exemplar] {
        self.exemplars.get(&section).map_or(&[], Vec::as_slice)
    }

    pub fn tooltips(&self, section: SectionId) -> &[String] {
        self.tooltips.get(&section).map_or(&[], Vec::as_slice)
    }

    pub fn experts(&self) -> &[ExpertProfile] {
        &self.experts
    }

    /// Replaces one section's exemplars; handy for tests.
    pub fn with_exemplars(mut self, section: SectionId, exemplars: Vec<Exemplar>) -> Corpus {
        self.exemplars.insert(section, exemplars);
        self
    }
}
