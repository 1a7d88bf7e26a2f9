pub mod splicer;
pub mod udiff;
pub mod miner;
pub mod prompt;
pub mod provider;
pub mod exec;
pub mod verifier;
pub mod validator;
pub mod record;
pub mod triage;
pub mod analytics;
pub mod pipeline;
pub mod fixtures;
