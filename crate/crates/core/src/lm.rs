//! Language-model clients: live chat-completion transport and offline
//! fixture-backed replay.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ENV_BASE_URL: &str = "PLANWEAVE_LM_BASE_URL";
pub const ENV_MODEL: &str = "PLANWEAVE_LM_MODEL";
pub const ENV_API_KEY: &str = "PLANWEAVE_LM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Plan,
    Refine,
    Fix,
    Respond,
    Intent,
    /// Single invocation of an llm-kind agent.
    Agent,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Plan => "plan",
            TemplateId::Refine => "refine",
            TemplateId::Fix => "fix",
            TemplateId::Respond => "respond",
            TemplateId::Intent => "intent",
            TemplateId::Agent => "agent",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub template_id: TemplateId,
    pub system: String,
    pub user: String,
}

impl PromptBundle {
    /// The exact text a fixture key is derived from.
    pub fn rendered(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }

    /// Hex SHA-256 of [`PromptBundle::rendered`].
    pub fn fixture_key(&self) -> String {
        hex::encode(Sha256::digest(self.rendered().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmMode {
    Live,
    Scripted,
}

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("no fixture for {template} prompt (key {key})")]
    MissingFixture { template: TemplateId, key: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("language model not configured: {0}")]
    NotConfigured(String),
    #[error("{0}")]
    Unsupported(String),
}

pub trait LanguageModel: Send + Sync {
    fn mode(&self) -> LmMode;
    fn complete(&self, prompt: &PromptBundle) -> Result<String, LmError>;
}

/// Replays completions from `<dir>/<sha256(prompt)>.txt`. A missing file is
/// an error.
#[derive(Debug, Clone)]
pub struct ScriptedLm {
    dir: PathBuf,
}

impl ScriptedLm {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ScriptedLm { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn fixture_path(&self, prompt: &PromptBundle) -> PathBuf {
        self.dir.join(format!("{}.txt", prompt.fixture_key()))
    }

    /// Writes the reply for `prompt` into the fixture directory.
    pub fn record(&self, prompt: &PromptBundle, reply: &str) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)?;
        let path = self.fixture_path(prompt);
        std::fs::write(&path, reply)?;
        Ok(path)
    }
}

impl LanguageModel for ScriptedLm {
    fn mode(&self) -> LmMode {
        LmMode::Scripted
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String, LmError> {
        let path = self.fixture_path(prompt);
        std::fs::read_to_string(&path).map_err(|_| LmError::MissingFixture {
            template: prompt.template_id,
            key: prompt.fixture_key(),
        })
    }
}

/// Answers refine and fix prompts with the plan they carry, unchanged.
/// Useful as a do-nothing planner baseline.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoLm;

impl LanguageModel for EchoLm {
    fn mode(&self) -> LmMode {
        LmMode::Scripted
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String, LmError> {
        let unsupported = || {
            LmError::Unsupported(format!(
                "echo model cannot answer a {} prompt",
                prompt.template_id
            ))
        };
        let start = [crate::planner::prompts::ORIGINAL_PLAN_MARKER, crate::planner::prompts::INITIAL_PLAN_MARKER]
            .iter()
            .filter_map(|m| prompt.user.find(m).map(|i| i + m.len()))
            .min()
            .ok_or_else(unsupported)?;
        let rest = &prompt.user[start..];
        let rest = match rest.find(crate::planner::prompts::FEEDBACK_MARKER) {
            Some(end) => &rest[..end],
            None => rest,
        };
        crate::plan::extract_json_object(rest)
            .map(str::to_string)
            .ok_or_else(unsupported)
    }
}

/// OpenAI-compatible chat-completion transport.
#[derive(Debug, Clone)]
pub struct LiveLm {
    base_url: String,
    model: String,
    api_key: Option<String>,
    timeout: Duration,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 2],
    temperature: f32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

impl LiveLm {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        LiveLm {
            base_url: base_url.into(),
            model: model.into(),
            api_key,
            timeout: Duration::from_secs(120),
        }
    }

    /// Reads `PLANWEAVE_LM_BASE_URL`, `PLANWEAVE_LM_MODEL` and
    /// `PLANWEAVE_LM_API_KEY`.
    pub fn from_env() -> Result<Self, LmError> {
        let base = std::env::var(ENV_BASE_URL)
            .map_err(|_| LmError::NotConfigured(format!("{ENV_BASE_URL} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| LmError::NotConfigured(format!("{ENV_MODEL} is not set")))?;
        Ok(Self::new(base, model, std::env::var(ENV_API_KEY).ok()))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl LanguageModel for LiveLm {
    fn mode(&self) -> LmMode {
        LmMode::Live
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String, LmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| LmError::Transport(e.to_string()))?;
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = ChatRequest {
            model: &self.model,
            messages: [
                ChatMessage {
                    role: "system",
                    content: &prompt.system,
                },
                ChatMessage {
                    role: "user",
                    content: &prompt.user,
                },
            ],
            temperature: 0.0,
        };
        let mut request = client.post(url).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| LmError::Transport(e.to_string()))?;
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| LmError::Transport(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| LmError::Transport("empty completion".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(user: &str) -> PromptBundle {
        PromptBundle {
            template_id: TemplateId::Refine,
            system: "sys".into(),
            user: user.into(),
        }
    }

    #[test]
    fn fixture_key_is_sha256_of_rendered_prompt() {
        let p = bundle("u");
        assert_eq!(p.rendered(), "sys\n\nu");
        assert_eq!(
            p.fixture_key(),
            hex::encode(Sha256::digest(b"sys\n\nu"))
        );
    }

    #[test]
    fn scripted_missing_fixture_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let lm = ScriptedLm::new(dir.path());
        assert!(matches!(
            lm.complete(&bundle("x")),
            Err(LmError::MissingFixture { .. })
        ));
        lm.record(&bundle("x"), "reply").unwrap();
        assert_eq!(lm.complete(&bundle("x")).unwrap(), "reply");
    }

    #[test]
    fn echo_returns_embedded_plan() {
        let user = "Given the original plan, refine it according to user feedback\n\nOriginal Plan:\n{\"nodes\":[],\"edges\":[]}\n\nUser Feedback:\nadd {x}";
        assert_eq!(EchoLm.complete(&bundle(user)).unwrap(), "{\"nodes\":[],\"edges\":[]}");
        assert!(EchoLm.complete(&bundle("what is 3 plus 4")).is_err());
    }
}
