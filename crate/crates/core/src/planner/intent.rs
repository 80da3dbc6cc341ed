//! Chat intent classification.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lm::{LanguageModel, LmError, LmMode};
use crate::plan::{NodeId, PlanGraph};

use super::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentKind {
    NewQuery,
    RefineFeedback,
    ExecuteAll,
    ExecuteNode,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intent {
    pub kind: IntentKind,
    #[serde(default)]
    pub node: Option<NodeId>,
    #[serde(default)]
    pub text: String,
}

static EXECUTE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:please\s+)?(?:run|execute|re-?run|re-?execute)\b").unwrap());
static NODE_REF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(?:node|step)\s*#?(\d+)\b").unwrap());
static GREETING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:hi|hello|hey|thanks|thank you|ok|okay)\b[\s!.]*$").unwrap());

const EDIT_VERBS: &[&str] = &[
    "add", "remove", "delete", "drop", "filter", "change", "replace", "update", "use", "insert",
    "connect", "make", "set", "include", "exclude", "modify", "rename", "swap", "split", "merge",
    "only", "instead", "also", "don't", "do", "fix", "assign", "limit", "sort", "keep",
];
const PLAN_WORDS: &[&str] = &["node", "step", "edge", "plan", "agent", "output", "input"];

/// Keyword rules used whenever no live model is available.
pub fn classify_by_rules(message: &str, plan: Option<&PlanGraph>) -> Intent {
    let text = message.trim().to_string();
    let lower = text.to_lowercase();
    let intent = |kind, node| Intent { kind, node, text: text.clone() };
    if lower.is_empty() || GREETING.is_match(&lower) {
        return intent(IntentKind::Other, None);
    }
    if EXECUTE.is_match(&lower) {
        let node = NODE_REF
            .captures(&lower)
            .and_then(|c| c[1].parse::<u32>().ok())
            .map(NodeId);
        return match node {
            Some(n) => intent(IntentKind::ExecuteNode, Some(n)),
            None => intent(IntentKind::ExecuteAll, None),
        };
    }
    if let Some(plan) = plan {
        let first = lower.split_whitespace().next().unwrap_or("");
        let words: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric() && c != '_')
            .filter(|w| !w.is_empty())
            .collect();
        let names_plan_element = words.iter().any(|w| {
            PLAN_WORDS.contains(w)
                || plan.nodes().iter().any(|n| {
                    n.agent == *w || n.outputs.iter().any(|o| o.name == *w)
                })
        });
        if first != "help" && (EDIT_VERBS.contains(&first) || names_plan_element) {
            return intent(IntentKind::RefineFeedback, None);
        }
    }
    intent(IntentKind::NewQuery, None)
}

/// Live models classify through the intent prompt, falling back to rules
/// on an unusable reply. Any other mode uses the rules directly.
pub fn classify_intent(
    message: &str,
    plan: Option<&PlanGraph>,
    lm: Option<&dyn LanguageModel>,
) -> Result<Intent, LmError> {
    let Some(lm) = lm.filter(|lm| lm.mode() == LmMode::Live) else {
        return Ok(classify_by_rules(message, plan));
    };
    let reply = lm.complete(&prompts::intent_prompt(message, plan))?;
    let parsed = crate::plan::extract_json_object(&reply)
        .and_then(|t| serde_json::from_str::<Intent>(t).ok());
    Ok(match parsed {
        Some(mut intent) => {
            if intent.text.is_empty() {
                intent.text = message.trim().to_string();
            }
            intent
        }
        None => classify_by_rules(message, plan),
    })
}
