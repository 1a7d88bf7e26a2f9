//! Campaign configuration, read from TOML. Relative paths are resolved
//! against the directory holding the config file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::EdgeSpec;
use crate::miner::SelectionCriteria;
use crate::provider::ProviderConfig;
use crate::validator::TestProfile;
use crate::verifier::{AnalyzerProfile, BuildProfile, VerifyProfiles};

#[derive(Debug, Error)]
#[error("invalid configuration: {message}")]
pub struct ConfigInvalid {
    pub message: String,
}

fn invalid(message: impl Into<String>) -> ConfigInvalid {
    ConfigInvalid { message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeepWorkdirs {
    Never,
    /// Keep the tree when a stage hit an infrastructure error.
    #[default]
    OnFailure,
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinEdges {
    #[default]
    Quartiles,
    Reported,
}

impl BinEdges {
    pub fn spec(self) -> EdgeSpec {
        match self {
            BinEdges::Quartiles => EdgeSpec::Quartiles,
            BinEdges::Reported => EdgeSpec::Reported,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub name: String,
    pub store: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Task file imported before the run.
    #[serde(default)]
    pub seed_tasks: Option<PathBuf>,
    /// Restrict the run to these provider ids; empty runs all.
    #[serde(default)]
    pub providers: Vec<String>,
    #[serde(default)]
    pub keep_workdirs: KeepWorkdirs,
    /// Where per-task trees are created; defaults to `<store>/work`.
    #[serde(default)]
    pub workdir_root: Option<PathBuf>,
    /// Append the fenced-code hint to prompts.
    #[serde(default)]
    pub format_hint: bool,
    #[serde(default)]
    pub reviewers: Vec<String>,
    #[serde(default = "default_required_reviewers")]
    pub required_reviewers: usize,
    #[serde(default)]
    pub bin_edges: BinEdges,
}

fn default_workers() -> usize {
    1
}
fn default_required_reviewers() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub name: String,
    pub repo: PathBuf,
    #[serde(default)]
    pub build: BuildProfile,
    #[serde(default)]
    pub analyzer: AnalyzerProfile,
    /// Absent when the project has no runnable suite.
    #[serde(default)]
    pub test: Option<TestProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub campaign: CampaignSection,
    #[serde(default)]
    pub criteria: SelectionCriteria,
    #[serde(default, rename = "project")]
    pub projects: Vec<ProjectConfig>,
    #[serde(default, rename = "provider")]
    pub providers: Vec<ProviderConfig>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl CampaignConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<CampaignConfig, ConfigInvalid> {
        let mut cfg: CampaignConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<CampaignConfig, ConfigInvalid> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
        Self::parse(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let c = &mut self.campaign;
        c.store = resolve(base, &c.store);
        c.seed_tasks = c.seed_tasks.as_ref().map(|p| resolve(base, p));
        c.workdir_root = c.workdir_root.as_ref().map(|p| resolve(base, p));
        for p in &mut self.projects {
            p.repo = resolve(base, &p.repo);
            p.analyzer.checkers_file = p.analyzer.checkers_file.as_ref().map(|f| resolve(base, f));
        }
        for p in &mut self.providers {
            p.fixture_dir = p.fixture_dir.as_ref().map(|d| resolve(base, d));
        }
    }

    pub fn validate(&self) -> Result<(), ConfigInvalid> {
        let c = &self.campaign;
        if c.name.trim().is_empty() {
            return Err(invalid("campaign.name is empty"));
        }
        if c.workers == 0 {
            return Err(invalid("campaign.workers must be at least 1"));
        }
        if c.required_reviewers == 0 {
            return Err(invalid("campaign.required_reviewers must be at least 1"));
        }
        self.criteria.validate().map_err(|e| invalid(format!("criteria: {e}")))?;

        let mut names = BTreeSet::new();
        for p in &self.projects {
            if p.name.is_empty() || !p.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                return Err(invalid(format!("project name `{}` must use [A-Za-z0-9._-]", p.name)));
            }
            if !names.insert(p.name.as_str()) {
                return Err(invalid(format!("project `{}` is defined twice", p.name)));
            }
            p.analyzer
                .checker_set()
                .map_err(|e| invalid(format!("project {}: {e}", p.name)))?;
            if let Some(t) = &p.test {
                if t.repeat == 0 {
                    return Err(invalid(format!("project {}: test.repeat must be at least 1", p.name)));
                }
            }
        }
        let mut ids = BTreeSet::new();
        for p in &self.providers {
            p.validate().map_err(invalid)?;
            if !ids.insert(p.provider_id.as_str()) {
                return Err(invalid(format!("provider `{}` is defined twice", p.provider_id)));
            }
        }
        for id in &c.providers {
            if !ids.contains(id.as_str()) {
                return Err(invalid(format!("campaign.providers names unknown provider `{id}`")));
            }
        }
        Ok(())
    }

    /// Checks that need the file system: store writable, seed file present.
    pub fn probe_paths(&self) -> Result<(), ConfigInvalid> {
        let store = &self.campaign.store;
        std::fs::create_dir_all(store).map_err(|e| invalid(format!("store {}: {e}", store.display())))?;
        tempfile::tempfile_in(store).map_err(|e| invalid(format!("store {} is not writable: {e}", store.display())))?;
        if let Some(seed) = &self.campaign.seed_tasks {
            if !seed.is_file() {
                return Err(invalid(format!("seed_tasks {} not found", seed.display())));
            }
        }
        Ok(())
    }

    pub fn project(&self, name: &str) -> Option<&ProjectConfig> {
        self.projects.iter().find(|p| p.name == name)
    }

    /// Providers selected for the run, in config order.
    pub fn active_providers(&self) -> Vec<&ProviderConfig> {
        let sel = &self.campaign.providers;
        self.providers
            .iter()
            .filter(|p| sel.is_empty() || sel.contains(&p.provider_id))
            .collect()
    }

    pub fn workdir_root(&self) -> PathBuf {
        self.campaign
            .workdir_root
            .clone()
            .unwrap_or_else(|| self.campaign.store.join("work"))
    }

    pub fn verify_profiles(&self, project: &ProjectConfig) -> Result<VerifyProfiles, ConfigInvalid> {
        Ok(VerifyProfiles {
            build: project.build.clone(),
            analyzer: project.analyzer.clone(),
            checkers: project.analyzer.checker_set().map_err(invalid)?,
        })
    }

    /// Verdict log location; kept inside the store so one directory holds
    /// a whole campaign.
    pub fn triage_dir(&self) -> PathBuf {
        self.campaign.store.join("triage")
    }

    pub fn triage_options(&self) -> crate::triage::StoreOptions {
        crate::triage::StoreOptions {
            reviewers: self.campaign.reviewers.iter().cloned().collect(),
            required_reviewers: self.campaign.required_reviewers,
        }
    }

    pub fn knowledge_cutoffs(&self) -> BTreeMap<String, chrono::NaiveDate> {
        self.providers
            .iter()
            .filter_map(|p| p.knowledge_cutoff.map(|d| (p.provider_id.clone(), d)))
            .collect()
    }
}
