//! Chat-completions-style HTTP client for production backends. Endpoint,
//! model names, and the API-key environment variable come from config; the
//! key itself never touches a config file.

use serde_json::json;

use super::{ChatRequest, ModelBackend};
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RemoteConfig {
    pub name: String,
    /// Base URL, e.g. `https://api.example.com/v1`.
    pub endpoint: String,
    pub model: String,
    #[serde(default)]
    pub embed_model: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default)]
    pub multimodal: bool,
}

fn default_timeout() -> u64 {
    120
}

fn default_retries() -> u32 {
    2
}

fn default_embed_dim() -> usize {
    1536
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        let api_key = match &config.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("environment variable {var} (api key) is not set"))
            })?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(RemoteBackend {
            config,
            api_key,
            client,
        })
    }

    fn post(&self, path: &str, body: serde_json::Value) -> Result<serde_json::Value> {
        let url = format!("{}/{path}", self.config.endpoint.trim_end_matches('/'));
        let mut last_err = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(std::time::Duration::from_millis(250 << attempt));
            }
            let mut req = self.client.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp.json().map_err(|e| Error::Backend {
                        backend: self.config.name.clone(),
                        message: format!("invalid response body: {e}"),
                        retryable: false,
                    });
                }
                Ok(resp) => {
                    let status = resp.status();
                    let retryable = status.is_server_error() || status.as_u16() == 429;
                    let err = Error::Backend {
                        backend: self.config.name.clone(),
                        message: format!("http {status} from {url}"),
                        retryable,
                    };
                    if !retryable {
                        return Err(err);
                    }
                    last_err = Some(err);
                }
                Err(e) => {
                    last_err = Some(Error::Backend {
                        backend: self.config.name.clone(),
                        message: format!("transport: {e}"),
                        retryable: true,
                    });
                }
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Backend {
            backend: self.config.name.clone(),
            message: "request failed with no attempts".to_string(),
            retryable: false,
        }))
    }
}

impl ModelBackend for RemoteBackend {
    fn name(&self) -> &str {
        &self.config.name
    }

    fn chat(&self, request: &ChatRequest) -> Result<String> {
        let content = if request.frames.is_empty() {
            json!(request.prompt)
        } else {
            // Frame locators flow through opaquely as image parts.
            let mut parts = vec![json!({"type": "text", "text": request.prompt})];
            for frame in &request.frames {
                parts.push(json!({"type": "image_url", "image_url": {"url": frame.locator}}));
            }
            json!(parts)
        };
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": content}],
        });
        let value = self.post("chat/completions", body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Backend {
                backend: self.config.name.clone(),
                message: format!("response missing choices[0].message.content: {value}"),
                retryable: false,
            })
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let model = self
            .config
            .embed_model
            .as_ref()
            .ok_or_else(|| Error::Capability {
                backend: self.config.name.clone(),
                capability: "embed (no embed_model configured)".to_string(),
            })?;
        let body = json!({"model": model, "input": text});
        let value = self.post("embeddings", body)?;
        let raw = value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| Error::Backend {
                backend: self.config.name.clone(),
                message: format!("response missing data[0].embedding: {value}"),
                retryable: false,
            })?;
        raw.iter()
            .map(|v| {
                v.as_f64().ok_or_else(|| Error::Backend {
                    backend: self.config.name.clone(),
                    message: "non-numeric embedding entry".to_string(),
                    retryable: false,
                })
            })
            .collect()
    }

    fn embed_dim(&self) -> usize {
        self.config.embed_dim
    }

    fn supports_frames(&self) -> bool {
        self.config.multimodal
    }
}
