//! Configuration file handling: timescales, retrieval parameters, backend
//! declarations, and role assignments. Flags override file values; secrets
//! come from the environment via `api_key_env` and never live in the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use mnemo_core::backend::{
    BackendSet, ModelBackend, RemoteBackend, RemoteConfig, Role, ScriptedBackend,
};
use mnemo_core::config::{MemoryMask, RetrievalConfig};
use mnemo_core::error::{Error, Result};
use mnemo_core::temporal::TimescaleConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendDecl {
    Scripted {
        /// Fixture file, resolved relative to the config file.
        fixtures: PathBuf,
    },
    Remote {
        endpoint: String,
        model: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embed_model: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout_secs: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_retries: Option<u32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embed_dim: Option<usize>,
        #[serde(default)]
        multimodal: bool,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub parallelism: Option<usize>,
}

/// The on-disk configuration shape.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    /// Enable-mask like "E+S+V".
    pub memories: Option<String>,
    pub timescales: Option<TimescaleConfig>,
    pub retrieval: Option<RetrievalConfig>,
    pub backends: BTreeMap<String, BackendDecl>,
    /// Role → backend id; the "default" key covers unassigned roles.
    pub roles: BTreeMap<String, String>,
    pub eval: EvalSection,
}

/// Fully resolved configuration.
pub struct CliConfig {
    pub mask: MemoryMask,
    pub timescales: TimescaleConfig,
    pub retrieval: RetrievalConfig,
    pub backends: BackendSet,
    pub parallelism: usize,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialize config: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub memories: Option<String>,
    pub max_iterations: Option<usize>,
    /// `role=backend_id` pairs.
    pub backend_roles: Vec<(String, String)>,
    pub parallelism: Option<usize>,
}

fn parse_role(name: &str) -> Result<Role> {
    Role::all()
        .iter()
        .copied()
        .find(|r| r.as_str() == name)
        .ok_or_else(|| Error::Config(format!("unknown backend role {name:?}")))
}

pub fn resolve(file: FileConfig, config_dir: &Path, overrides: &Overrides) -> Result<CliConfig> {
    let mask_text = overrides
        .memories
        .clone()
        .or(file.memories)
        .unwrap_or_else(|| "E+S+V".to_string());
    let mask = MemoryMask::parse(&mask_text)?;

    let timescales = file.timescales.unwrap_or_default();
    TimescaleConfig::new(
        timescales.scales_ms.clone(),
        timescales.semantic_scale_ms,
        timescales.visual_scale_ms,
    )?;

    let mut retrieval = file.retrieval.unwrap_or_default();
    if let Some(n) = overrides.max_iterations {
        retrieval.max_iterations = n;
    }
    retrieval.validate()?;

    // Instantiate each declared backend once; roles share instances.
    let mut instances: BTreeMap<String, Arc<dyn ModelBackend>> = BTreeMap::new();
    for (id, decl) in &file.backends {
        let backend: Arc<dyn ModelBackend> = match decl {
            BackendDecl::Scripted { fixtures } => {
                let path = if fixtures.is_relative() {
                    config_dir.join(fixtures)
                } else {
                    fixtures.clone()
                };
                Arc::new(ScriptedBackend::from_file(&path)?.with_name(id.clone()))
            }
            BackendDecl::Remote {
                endpoint,
                model,
                embed_model,
                api_key_env,
                timeout_secs,
                max_retries,
                embed_dim,
                multimodal,
            } => Arc::new(RemoteBackend::new(RemoteConfig {
                name: id.clone(),
                endpoint: endpoint.clone(),
                model: model.clone(),
                embed_model: embed_model.clone(),
                api_key_env: api_key_env.clone(),
                timeout_secs: timeout_secs.unwrap_or(120),
                max_retries: max_retries.unwrap_or(2),
                embed_dim: embed_dim.unwrap_or(1536),
                multimodal: *multimodal,
            })?),
        };
        instances.insert(id.clone(), backend);
    }

    let mut role_map: BTreeMap<Role, String> = BTreeMap::new();
    if let Some(default_id) = file.roles.get("default") {
        for &role in Role::all() {
            role_map.insert(role, default_id.clone());
        }
    }
    for (role_name, backend_id) in &file.roles {
        if role_name == "default" {
            continue;
        }
        role_map.insert(parse_role(role_name)?, backend_id.clone());
    }
    for (role_name, backend_id) in &overrides.backend_roles {
        role_map.insert(parse_role(role_name)?, backend_id.clone());
    }

    let mut backends = BackendSet::empty();
    for (role, backend_id) in &role_map {
        let instance = instances.get(backend_id).ok_or_else(|| {
            Error::Config(format!(
                "role {role} references undeclared backend {backend_id:?}"
            ))
        })?;
        backends = backends.with_role(*role, instance.clone());
    }

    let parallelism = overrides
        .parallelism
        .or(file.eval.parallelism)
        .unwrap_or(1)
        .max(1);

    Ok(CliConfig {
        mask,
        timescales,
        retrieval,
        backends,
        parallelism,
    })
}
