use std::path::Path;

use chrono::{SecondsFormat, Utc};
use lipbound::Method;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Gen,
    Compute,
    Verify,
    Bench,
}

/// The `c` values searched for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub method: Method,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,
}

/// Everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    /// Arguments after the program name, verbatim.
    pub arguments: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    pub methods: Vec<Method>,
    pub grids: Vec<GridRecord>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub certified: bool,
    pub started_at: String,
    pub finished_at: String,
    pub tool_version: String,
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub(crate) fn path_string(p: Option<&Path>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

impl RunManifest {
    pub fn start(command: CommandKind, arguments: Vec<String>) -> Self {
        let now = timestamp();
        Self {
            command,
            arguments,
            network: None,
            report: None,
            methods: Vec::new(),
            grids: Vec::new(),
            seeds: Vec::new(),
            output: None,
            certified: false,
            started_at: now.clone(),
            finished_at: now,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn finish(mut self) -> Self {
        self.finished_at = timestamp();
        self
    }
}
