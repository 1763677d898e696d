use std::path::{Path, PathBuf};

use anyhow::Context;
use nlgui_core::agent::AgentConfig;
use serde::Deserialize;
use serde_json::{Map, Value};

pub const ENV_ENDPOINT: &str = "NLGUI_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "NLGUI_LLM_API_KEY";
pub const ENV_WEBDRIVER: &str = "NLGUI_WEBDRIVER_URL";
pub const ENV_OUTPUT: &str = "NLGUI_OUTPUT_DIR";

/// Settings file. Unknown keys are rejected so an API key pasted into the
/// file fails loudly instead of being silently used.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub llm_endpoint: Option<String>,
    pub webdriver_url: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub log_level: Option<String>,
    pub agent: Option<AgentConfig>,
    pub capabilities: Map<String, Value>,
}

#[derive(Debug)]
pub struct CliConfig {
    pub llm_endpoint: Option<String>,
    pub llm_api_key: Option<String>,
    pub webdriver_url: Option<String>,
    pub output_dir: PathBuf,
    pub log_level: String,
    pub agent: AgentConfig,
    pub capabilities: Map<String, Value>,
}

fn env(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

impl CliConfig {
    /// File values first, environment on top.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str::<FileConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => FileConfig::default(),
        };
        let agent = file.agent.unwrap_or_default();
        agent.validate().map_err(anyhow::Error::msg)?;
        Ok(Self {
            llm_endpoint: env(ENV_ENDPOINT).or(file.llm_endpoint),
            llm_api_key: env(ENV_API_KEY),
            webdriver_url: env(ENV_WEBDRIVER).or(file.webdriver_url),
            output_dir: env(ENV_OUTPUT)
                .map(PathBuf::from)
                .or(file.output_dir)
                .unwrap_or_else(|| PathBuf::from("nlgui-out")),
            log_level: file.log_level.unwrap_or_else(|| "warn".into()),
            agent,
            capabilities: file.capabilities,
        })
    }
}
