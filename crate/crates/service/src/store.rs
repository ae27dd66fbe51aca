//! Read-only catalog of prompts, graphs and templates loaded from a data directory.
//!
//! Layout:
//!
//! ```text
//! data/
//!   adg/*.json        graph documents, one per prompt
//!   corpora/*.json    corpus documents; only their prompts are used
//!   templates/*.json  template registries, merged; the built-in set when absent
//!   sessions/         written by the session store
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use adg_feedback::alignment::{ProviderChain, ProviderSpec, SimilarityProvider};
use adg_feedback::corpus::load_corpus;
use adg_feedback::feedback::{validate_registry, FeedbackTemplate, TemplateRegistry};
use adg_feedback::graph::{load_adg, validate_graph_with};
use adg_feedback::{Adg, PromptSpec, ValidationReport};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("{path}: {code}: {message}")]
    Document { path: String, code: &'static str, message: String },
    #[error("prompt {0:?} defined twice")]
    DuplicatePrompt(String),
    #[error("two graphs for prompt {0:?}")]
    DuplicateGraph(String),
    #[error("graph {graph} refers to unknown prompt {prompt:?}")]
    OrphanGraph { graph: String, prompt: String },
    #[error("data directory failed validation:\n{0}")]
    Invalid(String),
    #[error("provider: {0}")]
    Provider(String),
}

/// Lists `*.json` files of a directory in name order; a missing directory is empty.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let read_err = |e: std::io::Error| StoreError::Read { path: dir.display().to_string(), message: e.to_string() };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(read_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_text(path: &Path) -> Result<String, StoreError> {
    fs::read_to_string(path).map_err(|e| StoreError::Read { path: path.display().to_string(), message: e.to_string() })
}

fn doc_err(path: &Path, code: &'static str, message: String) -> StoreError {
    StoreError::Document { path: path.display().to_string(), code, message }
}

/// Everything a request needs for one prompt.
pub struct PromptEntry {
    pub prompt: PromptSpec,
    /// Prompts without a graph are served but cannot get feedback.
    pub adg: Option<Adg>,
    pub provider: Option<Arc<dyn SimilarityProvider>>,
}

pub struct Catalog {
    entries: BTreeMap<String, PromptEntry>,
    registry: TemplateRegistry,
}

impl Catalog {
    /// Loads and validates the data directory. Any error finding in a graph or
    /// in the registry refuses startup; warnings are returned to be logged.
    pub fn load(
        data_dir: &Path,
        providers: &[ProviderSpec],
        wrap: &dyn Fn(Arc<dyn SimilarityProvider>) -> Arc<dyn SimilarityProvider>,
    ) -> Result<(Catalog, ValidationReport), StoreError> {
        let mut prompts = BTreeMap::new();
        for path in json_files(&data_dir.join("corpora"))? {
            let corpus = load_corpus(&read_text(&path)?).map_err(|e| doc_err(&path, e.code(), e.to_string()))?;
            for prompt in corpus.prompts {
                if prompts.contains_key(&prompt.id) {
                    return Err(StoreError::DuplicatePrompt(prompt.id));
                }
                prompts.insert(prompt.id.clone(), prompt);
            }
        }

        let template_files = json_files(&data_dir.join("templates"))?;
        let registry = if template_files.is_empty() {
            TemplateRegistry::builtin()
        } else {
            let mut all: Vec<FeedbackTemplate> = Vec::new();
            for path in template_files {
                let r =
                    TemplateRegistry::load(&read_text(&path)?).map_err(|e| doc_err(&path, e.code(), e.to_string()))?;
                all.extend(r.templates().iter().cloned());
            }
            TemplateRegistry::from_templates(all)
        };

        let mut graphs = BTreeMap::new();
        for path in json_files(&data_dir.join("adg"))? {
            let adg = load_adg(&read_text(&path)?).map_err(|e| doc_err(&path, e.code(), e.to_string()))?;
            if !prompts.contains_key(&adg.prompt_id) {
                return Err(StoreError::OrphanGraph { graph: adg.id, prompt: adg.prompt_id });
            }
            if graphs.contains_key(&adg.prompt_id) {
                return Err(StoreError::DuplicateGraph(adg.prompt_id));
            }
            graphs.insert(adg.prompt_id.clone(), adg);
        }

        let all_prompts: Vec<PromptSpec> = prompts.values().cloned().collect();
        let mut report = ValidationReport::from_findings(Vec::new());
        let has_key = |key: &str| registry.has_key(key);
        for adg in graphs.values() {
            report = report.merge(validate_graph_with(adg, Some(&has_key))).merge(validate_registry(
                &registry,
                adg,
                &all_prompts,
            ));
        }
        if !report.ok {
            let lines: Vec<String> = report.errors().map(|f| f.to_string()).collect();
            return Err(StoreError::Invalid(lines.join("\n")));
        }

        let mut entries = BTreeMap::new();
        for (id, prompt) in prompts {
            let adg = graphs.remove(&id);
            let provider = match &adg {
                Some(adg) => {
                    let documents: Vec<&str> = adg.nodes.iter().map(|n| n.text.as_str()).collect();
                    Some(wrap(build_provider(providers, &documents)?))
                }
                None => None,
            };
            entries.insert(id, PromptEntry { prompt, adg, provider });
        }
        Ok((Catalog { entries, registry }, report))
    }

    pub fn entry(&self, prompt_id: &str) -> Option<&PromptEntry> {
        self.entries.get(prompt_id)
    }

    pub fn prompt_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Graph by its own id or by its prompt's id.
    pub fn graph(&self, id: &str) -> Option<&Adg> {
        let graphs = || self.entries.values().filter_map(|e| e.adg.as_ref());
        graphs().find(|g| g.id == id).or_else(|| self.entries.get(id).and_then(|e| e.adg.as_ref()))
    }

    pub fn registry(&self) -> &TemplateRegistry {
        &self.registry
    }
}

/// One provider, or a fallback chain when several are configured.
pub fn build_provider(specs: &[ProviderSpec], documents: &[&str]) -> Result<Arc<dyn SimilarityProvider>, StoreError> {
    let default = [ProviderSpec::default()];
    let specs = if specs.is_empty() { &default[..] } else { specs };
    let mut built = Vec::with_capacity(specs.len());
    for spec in specs {
        built.push(spec.build(documents).map_err(|e| StoreError::Provider(e.to_string()))?);
    }
    Ok(if built.len() == 1 { built.pop().expect("one provider") } else { Arc::new(ProviderChain::new(built)) })
}
