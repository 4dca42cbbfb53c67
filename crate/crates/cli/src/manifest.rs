use std::path::Path;

use salcnn::config::RunConfig;
use serde::Serialize;

use crate::CliResult;

/// Version string in `git describe` style; the build may supply its own.
pub fn version() -> &'static str {
    option_env!("SALCNN_GIT_DESCRIBE").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

/// Provenance written next to every artefact. No wall-clock fields, so
/// reruns produce the same bytes.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub inputs: Inputs,
    pub config: RunConfig,
}

#[derive(Debug, Default, Serialize)]
pub struct Inputs {
    /// Data root, bearing directory, or `synthetic`.
    pub data: String,
    pub bearings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl Manifest {
    pub fn new(command: &'static str, config: &RunConfig, inputs: Inputs) -> Self {
        Self {
            tool: "salcnn",
            version: version(),
            command,
            seed: config.train.seed,
            inputs,
            config: config.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let text = toml::to_string(self).expect("manifest is always representable");
        salcnn::io::write_file(path, text)?;
        Ok(())
    }
}
