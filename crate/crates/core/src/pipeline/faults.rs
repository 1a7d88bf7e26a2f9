//! Deterministic fault injection for exercising the failure paths of a
//! campaign without a broken environment.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    Generate,
    Workdir,
    Baseline,
    Verify,
    Validate,
}

impl StageName {
    pub const ALL: [StageName; 5] = [
        StageName::Generate,
        StageName::Workdir,
        StageName::Baseline,
        StageName::Verify,
        StageName::Validate,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StageName::Generate => "generate",
            StageName::Workdir => "workdir",
            StageName::Baseline => "baseline",
            StageName::Verify => "verify",
            StageName::Validate => "validate",
        }
    }
}

/// Asked before each stage; `Some(message)` makes that stage fail as an
/// infrastructure error.
pub trait FaultInjector: Send + Sync {
    fn fault(&self, stage: StageName, record_id: &str) -> Option<String>;
}

pub struct NoFaults;

impl FaultInjector for NoFaults {
    fn fault(&self, _: StageName, _: &str) -> Option<String> {
        None
    }
}

/// Fails each (stage, record) independently with probability `rate`,
/// decided by a hash so that reruns fail the same way.
#[derive(Debug, Clone, Copy)]
pub struct SeededFaults {
    pub seed: u64,
    pub rate: f64,
}

impl SeededFaults {
    fn draw(&self, stage: StageName, record_id: &str) -> f64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(stage.label().as_bytes());
        h.update([0]);
        h.update(record_id.as_bytes());
        let d = h.finalize();
        let mut b = [0u8; 8];
        b.copy_from_slice(&d[..8]);
        (u64::from_le_bytes(b) >> 11) as f64 / (1u64 << 53) as f64
    }
}

impl FaultInjector for SeededFaults {
    fn fault(&self, stage: StageName, record_id: &str) -> Option<String> {
        (self.draw(stage, record_id) < self.rate).then(|| format!("injected {} fault", stage.label()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_near_rate() {
        let f = SeededFaults { seed: 7, rate: 0.25 };
        let mut hits = 0;
        for i in 0..4000 {
            let id = format!("t{i}:p");
            let a = f.fault(StageName::Verify, &id);
            assert_eq!(a, f.fault(StageName::Verify, &id));
            hits += a.is_some() as usize;
        }
        assert!((800..1200).contains(&hits), "{hits}");
        assert!(SeededFaults { seed: 1, rate: 0.0 }.fault(StageName::Generate, "x").is_none());
        assert!(SeededFaults { seed: 1, rate: 1.0 }.fault(StageName::Generate, "x").is_some());
    }
}
