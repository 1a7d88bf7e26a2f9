//! Campaign orchestration: every (task, provider) pair is evaluated once
//! and appended to the run store. A rerun picks up where the last one
//! stopped.

pub mod config;
mod evaluate;
pub mod execution;
pub mod faults;
pub mod import;
pub mod store;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::miner::CommitTask;
use crate::provider::Gateway;
use crate::record::record_id;

pub use config::{CampaignConfig, ConfigInvalid, KeepWorkdirs};
pub use evaluate::{scrub_value, Evaluator, WORKDIR_TOKEN};
pub use execution::Execution;
pub use faults::{FaultInjector, NoFaults, SeededFaults, StageName};
pub use import::{file_diff, human_file, import_tasks, ImportError};
pub use store::{RunStore, StoreError, StoreIndex};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Config(#[from] ConfigInvalid),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Import(#[from] ImportError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total: usize,
    pub evaluated_now: usize,
    pub skipped_existing: usize,
    pub infrastructure_failures: usize,
    pub digest: String,
}

pub struct Campaign {
    config: CampaignConfig,
    gateways: BTreeMap<String, Arc<Gateway>>,
    faults: Arc<dyn FaultInjector>,
    execution: Execution,
    /// Stop after this many new records; used to simulate an interrupted run.
    limit: Option<usize>,
}

impl Campaign {
    /// Gateways are built for every selected provider from its config.
    pub fn new(config: CampaignConfig) -> Result<Campaign, CampaignError> {
        config.validate()?;
        let mut gateways = BTreeMap::new();
        for pc in config.active_providers() {
            let g = Gateway::from_config(pc.clone()).map_err(|e| ConfigInvalid {
                message: format!("provider {}: {e}", pc.provider_id),
            })?;
            gateways.insert(pc.provider_id.clone(), Arc::new(g));
        }
        let execution = Execution::from_workers(config.campaign.workers);
        Ok(Campaign {
            config,
            gateways,
            faults: Arc::new(NoFaults),
            execution,
            limit: None,
        })
    }

    /// Replace the gateway for the provider with the same id.
    pub fn with_gateway(mut self, gateway: Gateway) -> Self {
        self.gateways
            .insert(gateway.config().provider_id.clone(), Arc::new(gateway));
        self
    }

    pub fn with_faults(mut self, faults: Arc<dyn FaultInjector>) -> Self {
        self.faults = faults;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn open_store(&self) -> Result<RunStore, CampaignError> {
        self.config.probe_paths()?;
        Ok(RunStore::open(&self.config.campaign.store)?)
    }

    /// Evaluates all pairs of `tasks` with the selected providers that are
    /// not yet in the store, then compacts the store and rewrites its index.
    pub fn run(&self, store: &RunStore, tasks: &[CommitTask]) -> Result<RunSummary, CampaignError> {
        for t in tasks {
            if self.config.project(&t.project).is_none() {
                return Err(ConfigInvalid {
                    message: format!("task {} names unknown project `{}`", t.task_id, t.project),
                }
                .into());
            }
        }
        store.add_tasks(tasks)?;
        let mut pairs = Vec::new();
        let mut skipped_existing = 0;
        for t in tasks {
            for pid in self.gateways.keys() {
                if store.is_complete(&record_id(&t.task_id, pid)) {
                    skipped_existing += 1;
                } else {
                    pairs.push((t, pid.as_str()));
                }
            }
        }
        if let Some(n) = self.limit {
            pairs.truncate(n);
        }
        let evaluator = Evaluator::new(&self.config, store, self.faults.as_ref())?;
        tracing::info!(pending = pairs.len(), skipped_existing, mode = ?self.execution.effective(), "campaign run");
        let results = self.execution.map(&pairs, |(task, pid)| {
            let record = evaluator.evaluate(task, &self.gateways[*pid]);
            let infra = record.machine_flags.infrastructure_failure();
            if infra {
                tracing::warn!(record = %record.id(), flags = ?record.machine_flags, "infrastructure failure");
            }
            store.append(&record).map(|_| infra)
        });
        let mut evaluated_now = 0;
        for r in results {
            r?;
            evaluated_now += 1;
        }
        store.compact()?;
        let index = store.write_index(&self.config.campaign.name)?;
        Ok(RunSummary {
            total: index.records,
            evaluated_now,
            skipped_existing,
            infrastructure_failures: index.infrastructure_failures.len(),
            digest: index.digest,
        })
    }
}

/// Tasks for a run: those already in the store plus the configured seed
/// file, deduplicated by id with stored tasks first.
pub fn campaign_tasks(config: &CampaignConfig, store: &RunStore) -> Result<Vec<CommitTask>, CampaignError> {
    let mut tasks = store.load_tasks()?;
    if let Some(seed) = &config.campaign.seed_tasks {
        let mut known: std::collections::BTreeSet<String> = tasks.iter().map(|t| t.task_id.clone()).collect();
        for t in import_tasks(seed, &config.criteria)? {
            if known.insert(t.task_id.clone()) {
                tasks.push(t);
            }
        }
    }
    Ok(tasks)
}

/// Load config, open the store, run everything pending.
pub fn run_campaign(config: CampaignConfig) -> Result<RunSummary, CampaignError> {
    let campaign = Campaign::new(config)?;
    let store = campaign.open_store()?;
    let tasks = campaign_tasks(campaign.config(), &store)?;
    campaign.run(&store, &tasks)
}
