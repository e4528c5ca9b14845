//! Service settings: command line, then environment, then an optional
//! TOML file whose keys are the environment variable names.
//!
//! ```toml
//! BIND_ADDR = "0.0.0.0:8080"
//! DATA_DIR = "/var/lib/bizchat"
//! LLM_MODE = "mock"
//! LLM_FIXTURE_DIR = "fixture/llm"
//! ```

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use bizchat_core::gateway::GatewayConfig;
use clap::Parser;

#[derive(Debug, Clone, Default, Parser)]
#[command(name = "bizchat-server", about = "Business-plan authoring service")]
pub struct Cli {
    /// TOML file of settings keyed by environment variable name.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Replay recorded model responses instead of calling a provider.
    #[arg(long)]
    pub mock: bool,
    /// Overrides the port of BIND_ADDR.
    #[arg(long)]
    pub port: Option<u16>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub bind_addr: SocketAddr,
    pub data_dir: PathBuf,
    pub auth_token: Option<String>,
    pub corpus_dir: PathBuf,
    pub fixture_dir: PathBuf,
    pub gateway: GatewayConfig,
    values: BTreeMap<String, String>,
}

const DEFAULT_BIND: &str = "127.0.0.1:8080";

fn read_file(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text.parse().with_context(|| format!("parsing {}", path.display()))?;
    table
        .into_iter()
        .map(|(k, v)| match v {
            toml::Value::String(s) => Ok((k, s)),
            toml::Value::Integer(i) => Ok((k, i.to_string())),
            toml::Value::Boolean(b) => Ok((k, b.to_string())),
            other => anyhow::bail!("{}: `{k}` must be a string, got {}", path.display(), other.type_str()),
        })
        .collect()
}

impl Settings {
    pub fn resolve(cli: &Cli, env: impl Fn(&str) -> Option<String>) -> anyhow::Result<Settings> {
        let file = match &cli.config {
            Some(path) => read_file(path)?,
            None => BTreeMap::new(),
        };
        let mut values = file;
        for key in KEYS {
            if let Some(v) = env(key) {
                values.insert(key.to_string(), v);
            }
        }
        if cli.mock {
            values.insert("LLM_MODE".into(), "mock".into());
        }
        let fixture_dir = PathBuf::from(values.get("FIXTURE_DIR").map_or("fixture", String::as_str));
        if values.get("LLM_MODE").map(String::as_str) == Some("mock") && !values.contains_key("LLM_FIXTURE_DIR") {
            values.insert("LLM_FIXTURE_DIR".into(), fixture_dir.join("llm").display().to_string());
        }

        let raw_bind = values.get("BIND_ADDR").map_or(DEFAULT_BIND, String::as_str);
        let mut bind_addr: SocketAddr = raw_bind.parse().with_context(|| format!("BIND_ADDR `{raw_bind}`"))?;
        if let Some(port) = cli.port {
            bind_addr.set_port(port);
        }
        let gateway = GatewayConfig::from_lookup(|k| values.get(k).cloned()).context("model gateway settings")?;
        Ok(Settings {
            bind_addr,
            data_dir: PathBuf::from(values.get("DATA_DIR").map_or("data", String::as_str)),
            auth_token: values.get("AUTH_TOKEN").filter(|t| !t.is_empty()).cloned(),
            corpus_dir: PathBuf::from(values.get("CORPUS_DIR").map_or("corpus", String::as_str)),
            fixture_dir,
            gateway,
            values,
        })
    }

    /// Raw value of any recognized setting.
    pub fn get(&self, key: &str) -> Option<String> {
        self.values.get(key).cloned()
    }
}

/// Every setting read from the environment.
pub const KEYS: &[&str] = &[
    "BIND_ADDR",
    "DATA_DIR",
    "AUTH_TOKEN",
    "CORPUS_DIR",
    "FIXTURE_DIR",
    "LLM_MODE",
    "LLM_FIXTURE_DIR",
    "LLM_API_BASE",
    "LLM_API_KEY",
    "LLM_MODEL_CHAT",
    "LLM_MODEL_SECTION",
    "LLM_MODEL_SUGGEST",
    "LLM_MODEL_TRANSCRIBE",
    "INGEST_MODE",
    "INGEST_USER_AGENT",
];
