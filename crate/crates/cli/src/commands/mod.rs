use std::path::PathBuf;

use anyhow::Result;

use crate::config::RunConfig;

pub mod cylinder;
pub mod dynamics;
pub mod friction;
pub mod report;
pub mod trajectory;

/// Global settings shared by every command.
pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Ctx {
    pub fn fingerprint(&self, command: &str, options: &serde_json::Value) -> Result<String> {
        self.config.fingerprint(command, self.seed, options)
    }
}
