//! One task through one provider: prompt, generation, extraction, splice,
//! verification against the human baseline, tests.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use chrono::Utc;

use super::config::{CampaignConfig, KeepWorkdirs, ProjectConfig};
use super::faults::{FaultInjector, StageName};
use super::import::{file_diff, human_file};
use super::store::{write_atomic, RunStore};
use crate::miner::{CommitKind, CommitTask, Git};
use crate::prompt::{build_prompt_with, Attachment, Prompt, PromptOptions, TemplateId};
use crate::provider::{extract_patch, Gateway, PatchScope, ProviderError};
use crate::record::*;
use crate::splicer;
use crate::validator::{run_tests, ValidateError};
use crate::verifier::{analyze, compare, TreeAnalysis, VerifyProfiles};

pub const WORKDIR_TOKEN: &str = "$WORKDIR";

type BaselineSlot = Arc<OnceLock<Result<TreeAnalysis, String>>>;

/// Shared state for all evaluations of one campaign run.
pub struct Evaluator<'a> {
    pub config: &'a CampaignConfig,
    pub store: &'a RunStore,
    pub faults: &'a dyn FaultInjector,
    profiles: BTreeMap<String, VerifyProfiles>,
    baselines: Mutex<HashMap<(String, String), BaselineSlot>>,
    test_locks: BTreeMap<String, Mutex<()>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        config: &'a CampaignConfig,
        store: &'a RunStore,
        faults: &'a dyn FaultInjector,
    ) -> Result<Self, super::config::ConfigInvalid> {
        let mut profiles = BTreeMap::new();
        let mut test_locks = BTreeMap::new();
        for p in &config.projects {
            profiles.insert(p.name.clone(), config.verify_profiles(p)?);
            test_locks.insert(p.name.clone(), Mutex::new(()));
        }
        Ok(Self {
            config,
            store,
            faults,
            profiles,
            baselines: Mutex::new(HashMap::new()),
            test_locks,
        })
    }

    fn project(&self, name: &str) -> &ProjectConfig {
        self.config.project(name).expect("tasks checked against projects")
    }

    /// Runs every stage and returns the finished record. Never fails: each
    /// problem is recorded in the record's flags and stages.
    pub fn evaluate(&self, task: &CommitTask, gateway: &Gateway) -> EvaluationRecord {
        let pc = gateway.config();
        let id = record_id(&task.task_id, &pc.provider_id);
        let mut timer = StageTimer::default();
        let options = PromptOptions {
            format_hint: self.config.campaign.format_hint,
        };
        let mut flags = MachineFlags {
            format_hint: options.format_hint,
            ..Default::default()
        };
        let rec = |prompt: Prompt, flags: MachineFlags| EvaluationRecord {
            schema_version: SCHEMA_VERSION,
            task: task.clone(),
            provider_id: pc.provider_id.clone(),
            model_name: pc.model_name.clone(),
            prompt,
            raw_response_ref: None,
            response: None,
            patch: None,
            splice: None,
            candidate_diff: None,
            verification: Stage::Skipped(SKIP_NO_RESPONSE.into()),
            validation: Stage::Skipped(SKIP_NO_RESPONSE.into()),
            machine_flags: flags,
            verdicts: Vec::new(),
            created_at: Utc::now(),
            stage_ms: BTreeMap::new(),
        };

        let prompt = match build_prompt_with(task, options) {
            Ok(p) => p,
            Err(e) => {
                flags.provider_error = Some(format!("prompt: {e}"));
                return rec(placeholder_prompt(task, options), flags);
            }
        };
        let mut record = rec(prompt, flags);
        self.run_stages(&mut record, gateway, &id, &mut timer);
        record.stage_ms = timer.finish();
        record
    }

    fn run_stages(&self, r: &mut EvaluationRecord, gateway: &Gateway, id: &str, timer: &mut StageTimer) {
        let task = r.task.clone();
        let skip_both = |r: &mut EvaluationRecord, reason: &str| {
            r.verification = Stage::Skipped(reason.into());
            r.validation = Stage::Skipped(reason.into());
        };

        // Generation.
        timer.start("generate");
        let response = match self.faults.fault(StageName::Generate, id) {
            Some(msg) => Err(ProviderError::TransportError { message: msg }),
            None => gateway.generate(&r.prompt),
        };
        timer.stop();
        let response = match response {
            Ok(resp) => resp,
            Err(ProviderError::ContextOverflow { .. }) => {
                r.machine_flags.context_overflow = true;
                skip_both(r, SKIP_CONTEXT_OVERFLOW);
                return;
            }
            Err(e) => {
                r.machine_flags.provider_error = Some(e.to_string());
                skip_both(r, SKIP_NO_RESPONSE);
                return;
            }
        };
        match self.store.write_raw(&r.provider_id, &task.task_id, &response.text) {
            Ok(rel) => r.raw_response_ref = Some(rel),
            Err(e) => {
                r.machine_flags.provider_error = Some(format!("cannot store response: {e}"));
                skip_both(r, SKIP_INFRA);
                return;
            }
        }
        r.response = Some(ResponseMeta {
            latency_ms: response.latency_ms,
            truncated: response.truncated,
            token_counts: response.token_counts,
            citations: response.citations.clone(),
            request: response.request.clone(),
        });

        // Extraction.
        let patch = match extract_patch(&response, &task) {
            Ok(p) => p,
            Err(_) => {
                r.machine_flags.no_code_found = true;
                skip_both(r, SKIP_EMPTY_PARTIAL);
                return;
            }
        };
        let unusable = patch.is_empty || patch.is_partial;
        r.patch = Some(patch.clone());
        if unusable {
            skip_both(r, SKIP_EMPTY_PARTIAL);
            return;
        }

        // Splice.
        let spliced = match (patch.scope, &task.function_span_pre) {
            (PatchScope::WholeFile, _) => Ok(splicer::adopt_whole_file(
                &task.context_file_pre,
                &patch.function_text,
                &task.function_name,
            )),
            (PatchScope::FunctionOnly, Some(span)) if task.kind == CommitKind::BugFix => {
                splicer::splice(&task.context_file_pre, span, &patch.function_text)
            }
            _ => splicer::insert_function(&task.context_file_pre, &patch.function_text),
        };
        let spliced = match spliced {
            Ok(s) => s,
            Err(e) => {
                r.machine_flags.splice_error = Some(e.to_string());
                skip_both(r, SKIP_SPLICE_FAILED);
                return;
            }
        };
        r.candidate_diff = Some(file_diff(&task.context_file_path, &task.context_file_pre, &spliced.text));
        r.splice = Some(SpliceSummary {
            mode: spliced.mode,
            site: spliced.site,
            structural_diff: spliced.structural_diff,
        });

        // Candidate tree.
        timer.start("workdir");
        let project = self.project(&task.project);
        let workdir = match self.faults.fault(StageName::Workdir, id) {
            Some(msg) => Err(msg),
            None => self.prepare_tree(project, &task, &spliced.text, id),
        };
        timer.stop();
        let workdir = match workdir {
            Ok(w) => w,
            Err(e) => {
                r.machine_flags.workdir_error = Some(e);
                skip_both(r, SKIP_INFRA);
                return;
            }
        };

        self.verify_and_validate(r, project, &workdir, id, timer);

        let keep = match self.config.campaign.keep_workdirs {
            KeepWorkdirs::Always => true,
            KeepWorkdirs::Never => false,
            KeepWorkdirs::OnFailure => r.machine_flags.infrastructure_failure(),
        };
        scrub_record(r, &workdir);
        if keep {
            r.machine_flags.retained_workdir = Some(workdir.display().to_string());
        } else if let Err(e) = std::fs::remove_dir_all(&workdir) {
            tracing::warn!(dir = %workdir.display(), error = %e, "cannot remove workdir");
        }
    }

    fn verify_and_validate(
        &self,
        r: &mut EvaluationRecord,
        project: &ProjectConfig,
        workdir: &Path,
        id: &str,
        timer: &mut StageTimer,
    ) {
        let task = r.task.clone();
        timer.start("baseline");
        let baseline = match self.faults.fault(StageName::Baseline, id) {
            Some(msg) => Err(msg),
            None => self.baseline(project, &task),
        };
        timer.stop();
        let baseline = match baseline {
            Ok(b) => b,
            Err(e) => {
                r.machine_flags.baseline_error = Some(e);
                r.verification = Stage::Skipped(SKIP_INFRA.into());
                r.validation = Stage::Skipped(SKIP_INFRA.into());
                return;
            }
        };

        timer.start("verify");
        let analysis = match self.faults.fault(StageName::Verify, id) {
            Some(msg) => Err(msg),
            None => analyze(workdir, &self.profiles[&project.name]).map_err(|e| e.to_string()),
        };
        timer.stop();
        let report = match analysis {
            Ok(a) => compare(a, &baseline),
            Err(e) => {
                r.machine_flags.verify_error = Some(e);
                r.verification = Stage::Skipped(SKIP_INFRA.into());
                r.validation = Stage::Skipped(SKIP_INFRA.into());
                return;
            }
        };
        r.machine_flags.analyzer_crash = !report.analyzer_failures.is_empty();
        let compiled = report.compile_outcome.is_success();
        r.verification = Stage::Done(report);
        if !compiled {
            r.validation = Stage::Skipped(SKIP_COMPILE_FAILED.into());
            return;
        }

        let Some(profile) = &project.test else {
            r.machine_flags.test_suite_missing = true;
            r.validation = Stage::Skipped(SKIP_NO_SUITE.into());
            return;
        };
        timer.start("validate");
        let outcome = match self.faults.fault(StageName::Validate, id) {
            Some(msg) => Err(ValidateError::Spawn { detail: msg }),
            None => {
                let _guard = profile
                    .serialize
                    .then(|| self.test_locks[&project.name].lock().unwrap_or_else(|e| e.into_inner()));
                run_tests(workdir, profile)
            }
        };
        timer.stop();
        match outcome {
            Ok(o) => {
                r.machine_flags.flaky_tests = o.flaky;
                r.validation = Stage::Done(o);
            }
            Err(ValidateError::TestSuiteMissing { .. }) => {
                r.machine_flags.test_suite_missing = true;
                r.validation = Stage::Skipped(SKIP_NO_SUITE.into());
            }
            Err(e) => {
                r.machine_flags.test_error = Some(e.to_string());
                r.validation = Stage::Skipped(SKIP_INFRA.into());
            }
        }
    }

    /// Fresh tree for `task` with `file_text` as the context file.
    fn prepare_tree(&self, project: &ProjectConfig, task: &CommitTask, file_text: &str, id: &str) -> Result<PathBuf, String> {
        let root = self.config.workdir_root();
        std::fs::create_dir_all(&root).map_err(|e| format!("{}: {e}", root.display()))?;
        let prefix: String = id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
            .collect();
        let dir = tempfile::Builder::new()
            .prefix(&format!("{prefix}-"))
            .tempdir_in(&root)
            .map_err(|e| format!("{}: {e}", root.display()))?
            .keep();
        let filled = populate_tree(&project.repo, task, &dir).and_then(|_| {
            let target = dir.join(&task.context_file_path);
            if let Some(parent) = target.parent() {
                std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
            }
            std::fs::write(&target, file_text).map_err(|e| format!("{}: {e}", target.display()))
        });
        match filled {
            Ok(()) => Ok(dir),
            Err(e) => {
                let _ = std::fs::remove_dir_all(&dir);
                Err(e)
            }
        }
    }

    /// Analysis of the tree with the human function in place. Computed once
    /// per (project, commit) and kept on disk across runs.
    fn baseline(&self, project: &ProjectConfig, task: &CommitTask) -> Result<TreeAnalysis, String> {
        let key = (project.name.clone(), task.commit_id.clone());
        let slot = {
            let mut map = self.baselines.lock().unwrap_or_else(|e| e.into_inner());
            map.entry(key).or_default().clone()
        };
        slot.get_or_init(|| self.compute_baseline(project, task)).clone()
    }

    fn compute_baseline(&self, project: &ProjectConfig, task: &CommitTask) -> Result<TreeAnalysis, String> {
        let cache = self
            .store
            .baseline_dir()
            .join(&project.name)
            .join(format!("{}.json", task.commit_id));
        if let Ok(text) = std::fs::read_to_string(&cache) {
            match serde_json::from_str(&text) {
                Ok(a) => return Ok(a),
                Err(e) => tracing::warn!(file = %cache.display(), error = %e, "ignoring unreadable baseline cache"),
            }
        }
        let human = human_file(task).map_err(|e| format!("human function does not splice: {e}"))?;
        let dir = self.prepare_tree(project, task, &human, &format!("baseline-{}", task.task_id))?;
        let result = analyze(&dir, &self.profiles[&project.name]).map_err(|e| e.to_string());
        let _ = std::fs::remove_dir_all(&dir);
        let mut analysis = result?;
        scrub_value(&mut analysis, &dir);
        if let Some(parent) = cache.parent() {
            std::fs::create_dir_all(parent).map_err(|e| e.to_string())?;
        }
        let text = serde_json::to_string(&analysis).expect("serializable");
        write_atomic(&cache, text.as_bytes()).map_err(|e| e.to_string())?;
        Ok(analysis)
    }
}

/// Project tree at the task's base revision, or the working copy when the
/// task has none.
fn populate_tree(repo: &Path, task: &CommitTask, dest: &Path) -> Result<(), String> {
    match &task.base_revision {
        Some(rev) => Git::new(repo).export_tree(rev, dest),
        None => copy_dir(repo, dest).map_err(|e| format!("copying {}: {e}", repo.display())),
    }
}

fn copy_dir(src: &Path, dest: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dest)?;
    for entry in std::fs::read_dir(src)? {
        let entry = entry?;
        if entry.file_name() == ".git" {
            continue;
        }
        let ft = entry.file_type()?;
        let to = dest.join(entry.file_name());
        if ft.is_dir() {
            copy_dir(&entry.path(), &to)?;
        } else if ft.is_symlink() {
            std::os::unix::fs::symlink(std::fs::read_link(entry.path())?, &to)?;
        } else {
            std::fs::copy(entry.path(), &to)?;
        }
    }
    Ok(())
}

fn placeholder_prompt(task: &CommitTask, options: PromptOptions) -> Prompt {
    Prompt {
        task_id: task.task_id.clone(),
        text: String::new(),
        template_id: match task.kind {
            CommitKind::BugFix => TemplateId::FixTemplate,
            CommitKind::FeatureEnhancement => TemplateId::ImplementTemplate,
        },
        attachments: vec![Attachment {
            name: task.context_file_path.clone(),
            text: task.context_file_pre.clone(),
        }],
        format_hint: options.format_hint,
    }
}

/// Replace the absolute tree path in every string so records do not depend
/// on where the tree happened to be created.
pub fn scrub_value<T: serde::Serialize + serde::de::DeserializeOwned>(value: &mut T, dir: &Path) {
    let needle = dir.display().to_string();
    let mut v = serde_json::to_value(&*value).expect("serializable");
    fn walk(v: &mut serde_json::Value, needle: &str) -> bool {
        match v {
            serde_json::Value::String(s) if s.contains(needle) => {
                *s = s.replace(needle, WORKDIR_TOKEN);
                true
            }
            serde_json::Value::Array(a) => a.iter_mut().fold(false, |acc, x| walk(x, needle) | acc),
            serde_json::Value::Object(o) => o.values_mut().fold(false, |acc, x| walk(x, needle) | acc),
            _ => false,
        }
    }
    if walk(&mut v, &needle) {
        *value = serde_json::from_value(v).expect("same shape");
    }
}

fn scrub_record(r: &mut EvaluationRecord, dir: &Path) {
    if let Stage::Done(v) = &mut r.verification {
        scrub_value(v, dir);
    }
    if let Stage::Done(t) = &mut r.validation {
        scrub_value(t, dir);
    }
    for f in [
        &mut r.machine_flags.verify_error,
        &mut r.machine_flags.test_error,
        &mut r.machine_flags.baseline_error,
    ] {
        if let Some(s) = f {
            *s = s.replace(&dir.display().to_string(), WORKDIR_TOKEN);
        }
    }
}

#[derive(Default)]
struct StageTimer {
    current: Option<(&'static str, Instant)>,
    done: BTreeMap<String, u64>,
}

impl StageTimer {
    fn start(&mut self, name: &'static str) {
        self.stop();
        self.current = Some((name, Instant::now()));
    }

    fn stop(&mut self) {
        if let Some((name, t)) = self.current.take() {
            *self.done.entry(name.to_string()).or_default() += t.elapsed().as_millis() as u64;
        }
    }

    fn finish(mut self) -> BTreeMap<String, u64> {
        self.stop();
        self.done
    }
}
