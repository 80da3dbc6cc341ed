use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::executor::{answers_match, Executor};
use crate::plan::{plan_from_json, serialize_plan, PlanError, PlanGraph};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "gsm8k-style")]
    Gsm8kStyle,
    #[serde(rename = "multistep-style")]
    MultistepStyle,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Gsm8kStyle => "gsm8k-style",
            Dataset::MultistepStyle => "multistep-style",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldCase {
    pub id: String,
    pub dataset: Dataset,
    pub query: String,
    pub gold_plan: PlanGraph,
    pub gold_answer: Value,
}

#[derive(Deserialize)]
struct RawCase {
    id: String,
    dataset: Dataset,
    query: String,
    gold_plan: serde_json::Value,
    gold_answer: Value,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed corpus: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("case {id}: {source}")]
    BadPlan { id: String, source: PlanError },
    #[error("case {id}: gold plan does not reproduce its answer ({detail})")]
    GoldMismatch { id: String, detail: String },
}

pub fn parse_corpus(text: &str) -> Result<Vec<GoldCase>, CorpusError> {
    let raw: Vec<RawCase> = serde_json::from_str(text)?;
    raw.into_iter()
        .map(|r| {
            let plan = plan_from_json(&r.gold_plan)
                .map_err(|source| CorpusError::BadPlan { id: r.id.clone(), source })?;
            let plan = if plan.query().is_empty() { plan.with_query(r.query.clone()) } else { plan };
            Ok(GoldCase { id: r.id, dataset: r.dataset, query: r.query, gold_plan: plan, gold_answer: r.gold_answer })
        })
        .collect()
}

pub fn load_corpus(path: &Path) -> Result<Vec<GoldCase>, CorpusError> {
    parse_corpus(&std::fs::read_to_string(path)?)
}

/// Runs one gold plan and checks its answer.
pub fn verify_case(case: &GoldCase, executor: &Executor) -> Result<(), CorpusError> {
    let mismatch = |detail: String| CorpusError::GoldMismatch { id: case.id.clone(), detail };
    let (_, trace) = executor.execute_all(&case.gold_plan).map_err(|e| mismatch(e.to_string()))?;
    match trace.final_answer {
        Some(got) if answers_match(&got, &case.gold_answer) => Ok(()),
        Some(got) => Err(mismatch(format!("got {}, expected {}", got.render(), case.gold_answer.render()))),
        None => Err(mismatch("no final answer".into())),
    }
}

/// Loads a corpus and rejects it unless every gold plan reproduces its
/// answer.
pub fn load_verified(path: &Path, executor: &Executor) -> Result<Vec<GoldCase>, CorpusError> {
    let cases = load_corpus(path)?;
    for case in &cases {
        verify_case(case, executor)?;
    }
    Ok(cases)
}

pub fn corpus_to_json(cases: &[GoldCase]) -> String {
    let items: Vec<String> = cases
        .iter()
        .map(|c| {
            format!(
                "{{\"id\":{},\"dataset\":\"{}\",\"query\":{},\"gold_plan\":{},\"gold_answer\":{}}}",
                serde_json::to_string(&c.id).expect("string"),
                c.dataset,
                serde_json::to_string(&c.query).expect("string"),
                serialize_plan(&c.gold_plan),
                c.gold_answer.to_json()
            )
        })
        .collect();
    format!("[{}]", items.join(","))
}
