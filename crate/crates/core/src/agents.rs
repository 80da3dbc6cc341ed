//! Builtin agent catalog and single-agent invocation.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::lm::{LanguageModel, PromptBundle, TemplateId};
use crate::plan::{Config, TaskNode};
use crate::registry::{AgentKind, AgentSpec, PortSpec};
use crate::value::{format_number, Value};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("input `{0}` is not bound")]
    MissingInput(String),
    #[error("no builtin implementation for agent `{0}`")]
    UnknownBuiltin(String),
    #[error("upstream failure: {0}")]
    UpstreamFailure(String),
    #[error("agent produced outputs {got:?}, expected {expected:?}")]
    OutputMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("operand `{0}` is not numeric")]
    NonNumericOperand(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("`{agent}` takes {expected} operands, got {got}")]
    Arity {
        agent: String,
        expected: usize,
        got: usize,
    },
    #[error("`{0}` requires a language model")]
    NoLanguageModel(String),
    #[error("agent `{0}` timed out")]
    Timeout(String),
}

/// How http-kind agents reach their backend.
#[derive(Debug, Clone, Default)]
pub enum HttpMode {
    /// POST to the endpoint in the agent's `endpoint` config key.
    Live,
    /// Read `{"outputs": …}` responses from `<dir>/<request hash>.json`.
    Fixtures(PathBuf),
    #[default]
    Disabled,
}

/// Everything an agent call may need beyond its inputs.
#[derive(Clone, Copy, Default)]
pub struct AgentContext<'a> {
    pub lm: Option<&'a dyn LanguageModel>,
    pub http: Option<&'a HttpMode>,
}

impl<'a> AgentContext<'a> {
    pub fn offline() -> Self {
        AgentContext::default()
    }

    pub fn new(lm: Option<&'a dyn LanguageModel>, http: Option<&'a HttpMode>) -> Self {
        AgentContext { lm, http }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentInvocation {
    pub spec: AgentSpec,
    pub task: String,
    pub inputs: Vec<(String, Value)>,
    /// Output names the caller expects back, in slot order.
    pub outputs: Vec<String>,
    pub config: Config,
}

impl AgentInvocation {
    /// Binds a node to its agent spec. Node config overrides the spec's
    /// defaults key by key.
    pub fn from_node(spec: &AgentSpec, node: &TaskNode) -> Result<Self, AgentError> {
        let inputs = node
            .inputs
            .iter()
            .map(|slot| {
                slot.value
                    .clone()
                    .map(|v| (slot.name.clone(), v))
                    .ok_or_else(|| AgentError::MissingInput(slot.name.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut config = spec.default_config.clone();
        config.extend(node.config.clone());
        Ok(AgentInvocation {
            spec: spec.clone(),
            task: node.task.clone(),
            inputs,
            outputs: node.outputs.iter().map(|o| o.name.clone()).collect(),
            config,
        })
    }

    /// Invocation with outputs named after the spec.
    pub fn direct(spec: &AgentSpec, inputs: Vec<(&str, Value)>) -> Self {
        AgentInvocation {
            spec: spec.clone(),
            task: String::new(),
            inputs: inputs.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
            outputs: spec.outputs.iter().map(|o| o.name.clone()).collect(),
            config: spec.default_config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentResult {
    pub outputs: BTreeMap<String, Value>,
    pub trace: String,
}

pub fn execute_agent(
    invocation: &AgentInvocation,
    ctx: AgentContext<'_>,
) -> Result<AgentResult, AgentError> {
    match invocation.spec.kind {
        AgentKind::Builtin => {
            let produced = run_builtin(invocation)?;
            let outputs = bind_positional(&invocation.outputs, produced)?;
            Ok(AgentResult {
                trace: format!("{}({})", invocation.spec.name, render_args(&invocation.inputs)),
                outputs,
            })
        }
        AgentKind::Llm => {
            let lm = ctx
                .lm
                .ok_or_else(|| AgentError::NoLanguageModel(invocation.spec.name.clone()))?;
            let prompt = agent_prompt(invocation);
            let reply = lm
                .complete(&prompt)
                .map_err(|e| AgentError::UpstreamFailure(e.to_string()))?;
            let outputs = outputs_from_reply(&invocation.outputs, &reply)?;
            Ok(AgentResult {
                outputs,
                trace: format!("{} prompt {}", invocation.spec.name, prompt.fixture_key()),
            })
        }
        AgentKind::Http => run_http(invocation, ctx.http.unwrap_or(&HttpMode::Disabled)),
    }
}

fn render_args(inputs: &[(String, Value)]) -> String {
    inputs
        .iter()
        .map(|(n, v)| format!("{n}={}", v.to_json()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn bind_positional(
    expected: &[String],
    produced: Vec<Value>,
) -> Result<BTreeMap<String, Value>, AgentError> {
    if expected.len() != produced.len() {
        return Err(AgentError::OutputMismatch {
            expected: expected.to_vec(),
            got: (0..produced.len()).map(|i| format!("#{i}")).collect(),
        });
    }
    Ok(expected.iter().cloned().zip(produced).collect())
}

/// Picks the expected output keys from a JSON object in the reply.
fn outputs_from_reply(
    expected: &[String],
    reply: &str,
) -> Result<BTreeMap<String, Value>, AgentError> {
    let mismatch = |got: Vec<String>| AgentError::OutputMismatch {
        expected: expected.to_vec(),
        got,
    };
    let object = crate::plan::extract_json_object(reply)
        .and_then(|text| serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(text).ok())
        .ok_or_else(|| mismatch(Vec::new()))?;
    let mut outputs = BTreeMap::new();
    for name in expected {
        match object.get(name).and_then(Value::from_json) {
            Some(v) => {
                outputs.insert(name.clone(), v);
            }
            None => return Err(mismatch(object.keys().cloned().collect())),
        }
    }
    Ok(outputs)
}

/// The completion request an llm-kind agent sends.
pub fn agent_prompt(invocation: &AgentInvocation) -> PromptBundle {
    let spec = &invocation.spec;
    let keys = serde_json::to_string(&invocation.outputs).expect("names serialize");
    let system = format!(
        "You are the `{}` agent in a multi-agent system. {}\n\
         Respond with only a JSON object whose keys are exactly {keys}. \
         Values must be numbers, strings, or lists of strings.",
        spec.name, spec.description
    );
    let mut user = format!("Task:\n{}\n\nInputs:\n", invocation.task);
    for (name, value) in &invocation.inputs {
        user.push_str(&format!("- {name}: {}\n", value.to_json()));
    }
    let settings: BTreeMap<_, _> = invocation
        .config
        .iter()
        .filter(|(k, _)| k.as_str() != "endpoint")
        .collect();
    if !settings.is_empty() {
        user.push_str(&format!(
            "\nSettings:\n{}\n",
            serde_json::to_string(&settings).expect("config serializes")
        ));
    }
    PromptBundle {
        template_id: TemplateId::Agent,
        system,
        user,
    }
}

#[derive(Serialize)]
struct HttpRequestBody<'a> {
    inputs: BTreeMap<&'a str, &'a Value>,
    config: &'a Config,
}

/// Body posted to an http-kind agent.
pub fn http_request_body(invocation: &AgentInvocation) -> String {
    let body = HttpRequestBody {
        inputs: invocation.inputs.iter().map(|(n, v)| (n.as_str(), v)).collect(),
        config: &invocation.config,
    };
    serde_json::to_string(&body).expect("request serializes")
}

/// Fixture file name for an http-kind call: hash of agent name and body.
pub fn http_fixture_key(invocation: &AgentInvocation) -> String {
    let mut hasher = Sha256::new();
    hasher.update(invocation.spec.name.as_bytes());
    hasher.update(b"\n");
    hasher.update(http_request_body(invocation).as_bytes());
    hex::encode(hasher.finalize())
}

fn run_http(invocation: &AgentInvocation, mode: &HttpMode) -> Result<AgentResult, AgentError> {
    let name = &invocation.spec.name;
    let (reply, trace) = match mode {
        HttpMode::Disabled => {
            return Err(AgentError::UpstreamFailure(format!(
                "http agent `{name}` called with http transport disabled"
            )))
        }
        HttpMode::Fixtures(dir) => {
            let key = http_fixture_key(invocation);
            let path = dir.join(format!("{key}.json"));
            let text = std::fs::read_to_string(&path).map_err(|_| {
                AgentError::UpstreamFailure(format!("no http fixture {key}.json for `{name}`"))
            })?;
            (text, format!("{name} fixture {key}"))
        }
        HttpMode::Live => {
            let endpoint = invocation
                .config
                .get("endpoint")
                .and_then(|v| v.as_str())
                .ok_or_else(|| {
                    AgentError::UpstreamFailure(format!("`{name}` has no endpoint configured"))
                })?;
            let text = reqwest::blocking::Client::new()
                .post(endpoint)
                .header("content-type", "application/json")
                .body(http_request_body(invocation))
                .send()
                .and_then(|r| r.error_for_status())
                .and_then(|r| r.text())
                .map_err(|e| AgentError::UpstreamFailure(e.to_string()))?;
            (text, format!("{name} POST {endpoint}"))
        }
    };
    let parsed: serde_json::Value = serde_json::from_str(&reply)
        .map_err(|e| AgentError::UpstreamFailure(format!("bad response from `{name}`: {e}")))?;
    let outputs = parsed
        .get("outputs")
        .and_then(|o| o.as_object())
        .ok_or_else(|| AgentError::UpstreamFailure(format!("`{name}` response lacks `outputs`")))?;
    let text = serde_json::to_string(outputs).expect("map serializes");
    Ok(AgentResult {
        outputs: outputs_from_reply(&invocation.outputs, &text)?,
        trace,
    })
}

// ---------------------------------------------------------------------------
// builtins
// ---------------------------------------------------------------------------

fn builtin(name: &str, description: &str, inputs: &[(&str, &str)], outputs: &[(&str, &str)]) -> AgentSpec {
    spec_of(AgentKind::Builtin, name, description, inputs, outputs)
}

fn spec_of(
    kind: AgentKind,
    name: &str,
    description: &str,
    inputs: &[(&str, &str)],
    outputs: &[(&str, &str)],
) -> AgentSpec {
    AgentSpec {
        name: name.into(),
        description: description.into(),
        inputs: inputs.iter().map(|(n, d)| PortSpec::new(n, d)).collect(),
        outputs: outputs.iter().map(|(n, d)| PortSpec::new(n, d)).collect(),
        kind,
        default_config: Config::new(),
    }
}

/// Deterministic arithmetic, extraction and text agents, plus the
/// model-backed and remote agents used by the usage scenarios.
pub fn builtin_catalog() -> Vec<AgentSpec> {
    let mut web_search = spec_of(
        AgentKind::Http,
        "web_search",
        "Searches the web and returns result snippets.",
        &[("query", "search query")],
        &[("results", "list of result snippets")],
    );
    web_search
        .default_config
        .insert("num_results".into(), serde_json::json!(5));
    vec![
        builtin(
            "add",
            "Adds all numeric inputs. List inputs are summed element-wise.",
            &[("a", "first number or list of numbers"), ("b", "second number")],
            &[("sum", "the total")],
        ),
        builtin(
            "subtract",
            "Subtracts the second number from the first. Input order matters.",
            &[("minuend", "number to subtract from"), ("subtrahend", "number to subtract")],
            &[("difference", "first minus second")],
        ),
        builtin(
            "multiply",
            "Multiplies all numeric inputs. Rejects non-numeric text such as percentages.",
            &[("a", "first factor"), ("b", "second factor")],
            &[("product", "the product")],
        ),
        builtin(
            "divide",
            "Divides the first number by the second. Input order matters.",
            &[("dividend", "number to divide"), ("divisor", "number to divide by")],
            &[("quotient", "first divided by second")],
        ),
        builtin(
            "percentage_of",
            "Computes a percentage of a value: value * percent / 100.",
            &[("value", "base value"), ("percent", "percentage, e.g. 60 or 60%")],
            &[("result", "the percentage of the value")],
        ),
        builtin(
            "identify_operands",
            "Extracts every number and percentage mentioned in a text, in order.",
            &[("query", "text containing the numbers")],
            &[("operands", "list of numbers found, percentages keep their % sign")],
        ),
        builtin(
            "filter",
            "Keeps list items containing a keyword (case-insensitive).",
            &[("items", "list of text items"), ("keyword", "text each kept item must contain")],
            &[("filtered", "the kept items")],
        ),
        builtin(
            "concat",
            "Joins all inputs into one text.",
            &[("parts", "texts or lists of texts")],
            &[("text", "the joined text")],
        ),
        spec_of(
            AgentKind::Llm,
            "llm_multiply",
            "Multiplies two quantities, interpreting percentages and units.",
            &[("a", "first factor"), ("b", "second factor, may be a percentage")],
            &[("product", "the product")],
        ),
        spec_of(
            AgentKind::Llm,
            "summarize",
            "Summarizes text or a list of items.",
            &[("text", "content to summarize")],
            &[("summary", "short summary")],
        ),
        spec_of(
            AgentKind::Llm,
            "extract",
            "Extracts structured items from text following the task instruction.",
            &[("text", "content to extract from")],
            &[("items", "list of extracted items")],
        ),
        web_search,
    ]
}

fn run_builtin(inv: &AgentInvocation) -> Result<Vec<Value>, AgentError> {
    let name = inv.spec.name.as_str();
    let values = || inv.inputs.iter().map(|(_, v)| v);
    match name {
        "add" => Ok(vec![Value::Number(numbers(values())?.iter().sum())]),
        "multiply" => Ok(vec![Value::Number(numbers(values())?.iter().product())]),
        "subtract" => {
            let [a, b] = exactly_two(name, numbers(values())?)?;
            Ok(vec![Value::Number(a - b)])
        }
        "divide" => {
            let [a, b] = exactly_two(name, numbers(values())?)?;
            if b == 0.0 {
                return Err(AgentError::DivisionByZero);
            }
            Ok(vec![Value::Number(a / b)])
        }
        "percentage_of" => {
            let items: Vec<String> = values().flat_map(Value::items).collect();
            if items.len() != 2 {
                return Err(AgentError::Arity {
                    agent: name.into(),
                    expected: 2,
                    got: items.len(),
                });
            }
            let base = parse_number(&items[0])?;
            let percent = parse_number(items[1].trim().trim_end_matches('%'))?;
            Ok(vec![Value::Number(base * percent / 100.0)])
        }
        "identify_operands" => {
            let text = values().map(Value::render).collect::<Vec<_>>().join(" ");
            Ok(vec![Value::List(identify_operands(&text))])
        }
        "filter" => {
            let mut inputs = values();
            let items = inputs.next().map(Value::items).unwrap_or_default();
            let keyword = inputs
                .next()
                .map(Value::render)
                .or_else(|| inv.config.get("keyword").and_then(|k| k.as_str()).map(str::to_string))
                .ok_or_else(|| AgentError::MissingInput("keyword".into()))?
                .to_lowercase();
            let kept = items
                .into_iter()
                .filter(|item| item.to_lowercase().contains(&keyword))
                .collect();
            Ok(vec![Value::List(kept)])
        }
        "concat" => {
            let sep = inv
                .config
                .get("separator")
                .and_then(|s| s.as_str())
                .unwrap_or("\n");
            let parts: Vec<String> = values().flat_map(Value::items).collect();
            Ok(vec![Value::Text(parts.join(sep))])
        }
        other => Err(AgentError::UnknownBuiltin(other.into())),
    }
}

fn exactly_two(agent: &str, nums: Vec<f64>) -> Result<[f64; 2], AgentError> {
    <[f64; 2]>::try_from(nums).map_err(|v| AgentError::Arity {
        agent: agent.into(),
        expected: 2,
        got: v.len(),
    })
}

fn numbers<'v>(values: impl Iterator<Item = &'v Value>) -> Result<Vec<f64>, AgentError> {
    let mut out = Vec::new();
    for v in values {
        match v {
            Value::Number(n) => out.push(*n),
            other => {
                for item in other.items() {
                    out.push(parse_number(&item)?);
                }
            }
        }
    }
    Ok(out)
}

fn parse_number(text: &str) -> Result<f64, AgentError> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|n| n.is_finite())
        .ok_or_else(|| AgentError::NonNumericOperand(text.to_string()))
}

fn operand_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)-?\d+(?:,\d{3})*(?:\.\d+)?(\s*(?:%|percent\b))?").expect("valid regex")
    })
}

/// Numbers in reading order. Thousands separators are dropped; a minus sign
/// counts only when it does not follow a digit or closing parenthesis.
pub fn identify_operands(text: &str) -> Vec<String> {
    operand_pattern()
        .captures_iter(text)
        .map(|cap| {
            let m = cap.get(0).expect("whole match");
            let mut digits = m.as_str().to_string();
            if let Some(pct) = cap.get(1) {
                digits.truncate(pct.start() - m.start());
            }
            if digits.starts_with('-') {
                let prev = text[..m.start()].trim_end().chars().last();
                if matches!(prev, Some(c) if c.is_ascii_digit() || c == ')') {
                    digits.remove(0);
                }
            }
            let mut number = digits.replace(',', "");
            if let Ok(n) = number.parse::<f64>() {
                number = format_number(n);
            }
            if cap.get(1).is_some() {
                number.push('%');
            }
            number
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::Registry;

    fn run(name: &str, inputs: Vec<(&str, Value)>) -> Result<AgentResult, AgentError> {
        let reg = Registry::builtin();
        let inv = AgentInvocation::direct(reg.get(name).unwrap(), inputs);
        execute_agent(&inv, AgentContext::offline())
    }

    #[test]
    fn add_three_and_four() {
        let out = run("add", vec![("a", 3.0.into()), ("b", 4.0.into())]).unwrap();
        assert_eq!(out.outputs["sum"], Value::Number(7.0));
    }

    #[test]
    fn subtract_respects_input_order() {
        let out = run("subtract", vec![("revenue", 10.0.into()), ("cost", 4.0.into())]).unwrap();
        assert_eq!(out.outputs["difference"], Value::Number(6.0));
        let out = run("subtract", vec![("cost", 4.0.into()), ("revenue", 10.0.into())]).unwrap();
        assert_eq!(out.outputs["difference"], Value::Number(-6.0));
    }

    #[test]
    fn multiply_rejects_percentages() {
        let err = run("multiply", vec![("a", 5.0.into()), ("b", "60%".into())]).unwrap_err();
        assert_eq!(err, AgentError::NonNumericOperand("60%".into()));
    }

    #[test]
    fn divide_by_zero() {
        let err = run("divide", vec![("a", 5.0.into()), ("b", 0.0.into())]).unwrap_err();
        assert_eq!(err, AgentError::DivisionByZero);
    }

    #[test]
    fn percentage_accepts_percent_sign() {
        let out = run("percentage_of", vec![("v", 5.0.into()), ("p", "60%".into())]).unwrap();
        assert_eq!(out.outputs["result"], Value::Number(3.0));
    }

    #[test]
    fn identify_operands_on_glass_problem() {
        let ops = identify_operands(
            "A glass costs $5. He buys 16 glasses, every second at 60% price.",
        );
        for expected in ["5", "16", "60%"] {
            assert!(ops.iter().any(|o| o == expected), "{expected} missing from {ops:?}");
        }
        assert_eq!(ops, vec!["5", "16", "60%"]);
    }

    #[test]
    fn identify_operands_handles_signs_and_separators() {
        assert_eq!(identify_operands("what is 3 plus 4"), vec!["3", "4"]);
        assert_eq!(identify_operands("(-5 + 9) * 2-7"), vec!["-5", "9", "2", "7"]);
        assert_eq!(identify_operands("1,250.5 and 20 percent"), vec!["1250.5", "20%"]);
    }

    #[test]
    fn catalog_identify_operands_interface() {
        let catalog = builtin_catalog();
        let spec = catalog.iter().find(|s| s.name == "identify_operands").unwrap();
        assert_eq!(spec.inputs.len(), 1);
        assert_eq!(spec.inputs[0].name, "query");
        assert_eq!(spec.outputs[0].name, "operands");
        let out = run("identify_operands", vec![("query", "what is 3 plus 4".into())]).unwrap();
        assert!(matches!(out.outputs["operands"], Value::List(_)));
    }

    #[test]
    fn filter_keeps_matching_items() {
        let items = Value::List(vec!["MLE, Atlanta".into(), "AI eng, Palo Alto".into()]);
        let out = run("filter", vec![("items", items), ("keyword", "atlanta".into())]).unwrap();
        assert_eq!(out.outputs["filtered"], Value::List(vec!["MLE, Atlanta".into()]));
    }

    #[test]
    fn unknown_builtin() {
        let spec = builtin("teleport", "", &[], &[("x", "")]);
        let inv = AgentInvocation::direct(&spec, vec![]);
        assert_eq!(
            execute_agent(&inv, AgentContext::offline()).unwrap_err(),
            AgentError::UnknownBuiltin("teleport".into())
        );
    }

    #[test]
    fn output_count_mismatch() {
        let reg = Registry::builtin();
        let mut inv = AgentInvocation::direct(reg.get("add").unwrap(), vec![("a", 1.0.into())]);
        inv.outputs = vec!["x".into(), "y".into()];
        assert!(matches!(
            execute_agent(&inv, AgentContext::offline()),
            Err(AgentError::OutputMismatch { .. })
        ));
    }

    #[test]
    fn llm_agent_needs_a_model() {
        let err = run("llm_multiply", vec![("a", 5.0.into()), ("b", "60%".into())]).unwrap_err();
        assert_eq!(err, AgentError::NoLanguageModel("llm_multiply".into()));
    }

    #[test]
    fn llm_multiply_with_scripted_reply() {
        let dir = tempfile::tempdir().unwrap();
        let lm = crate::lm::ScriptedLm::new(dir.path());
        let reg = Registry::builtin();
        let inv = AgentInvocation::direct(
            reg.get("llm_multiply").unwrap(),
            vec![("a", 5.0.into()), ("b", "60%".into())],
        );
        lm.record(&agent_prompt(&inv), "```json\n{\"product\": 3}\n```").unwrap();
        let out = execute_agent(&inv, AgentContext::new(Some(&lm), None)).unwrap();
        assert_eq!(out.outputs["product"], Value::Number(3.0));
    }

    #[test]
    fn llm_reply_missing_output_is_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let lm = crate::lm::ScriptedLm::new(dir.path());
        let reg = Registry::builtin();
        let inv = AgentInvocation::direct(reg.get("summarize").unwrap(), vec![("t", "x".into())]);
        lm.record(&agent_prompt(&inv), "{\"other\": 1}").unwrap();
        assert!(matches!(
            execute_agent(&inv, AgentContext::new(Some(&lm), None)),
            Err(AgentError::OutputMismatch { .. })
        ));
    }

    #[test]
    fn http_agent_reads_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let reg = Registry::builtin();
        let inv = AgentInvocation::direct(
            reg.get("web_search").unwrap(),
            vec![("query", "jobs".into())],
        );
        std::fs::write(
            dir.path().join(format!("{}.json", http_fixture_key(&inv))),
            r#"{"outputs": {"results": ["a", "b"]}}"#,
        )
        .unwrap();
        let mode = HttpMode::Fixtures(dir.path().to_path_buf());
        let out = execute_agent(&inv, AgentContext::new(None, Some(&mode))).unwrap();
        assert_eq!(out.outputs["results"], Value::List(vec!["a".into(), "b".into()]));
        assert!(matches!(
            execute_agent(&inv, AgentContext::offline()),
            Err(AgentError::UpstreamFailure(_))
        ));
    }

    #[test]
    fn missing_input_detected_at_binding() {
        let reg = Registry::builtin();
        let node = TaskNode::new(1, "add", "").with_input("a", None).with_output("sum");
        assert_eq!(
            AgentInvocation::from_node(reg.get("add").unwrap(), &node).unwrap_err(),
            AgentError::MissingInput("a".into())
        );
    }

    #[test]
    fn node_config_overrides_defaults() {
        let reg = Registry::builtin();
        let node = TaskNode::new(1, "web_search", "")
            .with_input("query", Some("jobs".into()))
            .with_output("results")
            .with_config("num_results", serde_json::json!(10));
        let inv = AgentInvocation::from_node(reg.get("web_search").unwrap(), &node).unwrap();
        assert_eq!(inv.config["num_results"], serde_json::json!(10));
    }
}
