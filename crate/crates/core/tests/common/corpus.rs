//! A freshly built fixture corpus with its tasks mined.

use std::path::Path;

use patchgauge::fixtures::{build_fixture_corpus, Manifest, CONFIG_FILE};
use patchgauge::miner::{self, CommitTask};
use patchgauge::pipeline::CampaignConfig;
use patchgauge::record::EvaluationRecord;

pub struct Corpus {
    pub dir: tempfile::TempDir,
    pub manifest: Manifest,
    pub config: CampaignConfig,
    pub tasks: Vec<CommitTask>,
}

pub fn corpus() -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let manifest = build_fixture_corpus(dir.path()).unwrap();
    let config = CampaignConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
    let mut tasks = Vec::new();
    for p in &config.projects {
        tasks.extend(miner::mine(&p.repo, &p.name, &config.criteria).unwrap().tasks);
    }
    Corpus {
        dir,
        manifest,
        config,
        tasks,
    }
}

impl Corpus {
    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

/// Validation ran ⇒ compile succeeded ⇒ a usable patch existed.
pub fn monotone(r: &EvaluationRecord) -> Result<(), String> {
    let usable = r.patch.as_ref().is_some_and(|p| !p.is_empty && !p.is_partial);
    if r.validation.done().is_some() && !r.compile_outcome().is_some_and(|c| c.is_success()) {
        return Err(format!("{}: tests ran without a successful compile", r.id()));
    }
    if r.verification.done().is_some() && !usable {
        return Err(format!("{}: verified without a usable patch", r.id()));
    }
    Ok(())
}
