//! Language-model planning: generate, refine and fix plans against a
//! registry, plus the conversation helpers in [`intent`] and [`response`].

pub mod intent;
pub mod prompts;
pub mod response;

use std::sync::Arc;

use serde::Serialize;

use crate::lm::{LanguageModel, LmError, PromptBundle};
use crate::plan::{parse_plan, NodeId, PlanGraph};
use crate::registry::Registry;
use crate::validate::{validate, IssueCode};

pub use intent::{classify_intent, Intent, IntentKind};
pub use response::{render_response, ResponseEvent};

#[derive(Debug, thiserror::Error)]
pub enum PlannerError {
    #[error("planner output invalid after repair: {problems}")]
    OutputInvalid { problems: String, reply: String },
    #[error("language model error: {0}")]
    Transport(#[from] LmError),
    #[error("registry has no agents")]
    EmptyRegistry,
}

/// What happened while producing a plan.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PlannerTrace {
    /// Fixture keys of every prompt sent, in order.
    pub prompts: Vec<String>,
    pub repaired: bool,
    /// fix only: share of the partial plan's nodes kept with the same id
    /// and agent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preserved_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Planned {
    pub plan: PlanGraph,
    pub trace: PlannerTrace,
}

#[derive(Clone)]
pub struct Planner {
    registry: Arc<Registry>,
    lm: Arc<dyn LanguageModel>,
}

impl Planner {
    pub fn new(registry: Arc<Registry>, lm: Arc<dyn LanguageModel>) -> Self {
        Planner { registry, lm }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn lm(&self) -> &dyn LanguageModel {
        self.lm.as_ref()
    }

    pub fn generate_plan(&self, query: &str) -> Result<Planned, PlannerError> {
        self.run(prompts::plan_prompt(query, &self.registry), query)
    }

    /// Empty feedback returns the plan as is, without calling the model.
    pub fn refine_plan(&self, plan: &PlanGraph, feedback: &str) -> Result<Planned, PlannerError> {
        if feedback.trim().is_empty() {
            return Ok(Planned { plan: plan.clone(), trace: PlannerTrace::default() });
        }
        self.run(prompts::refine_prompt(plan, feedback, &self.registry), plan.query())
    }

    pub fn fix_plan(&self, query: &str, partial: &PlanGraph) -> Result<Planned, PlannerError> {
        let mut planned = self.run(prompts::fix_prompt(query, partial, &self.registry), query)?;
        planned.trace.preserved_ratio = Some(preserved_ratio(partial, &planned.plan));
        Ok(planned)
    }

    fn run(&self, prompt: PromptBundle, query: &str) -> Result<Planned, PlannerError> {
        if self.registry.is_empty() {
            return Err(PlannerError::EmptyRegistry);
        }
        let mut trace = PlannerTrace::default();
        trace.prompts.push(prompt.fixture_key());
        let reply = self.lm.complete(&prompt)?;
        let problems = match self.accept(&reply, query) {
            Ok(plan) => return Ok(Planned { plan, trace }),
            Err(problems) => problems,
        };
        log::debug!("planner reply rejected, repairing: {problems}");
        let repair = prompts::repair_prompt(&prompt, &reply, &problems);
        trace.prompts.push(repair.fixture_key());
        trace.repaired = true;
        let second = self.lm.complete(&repair)?;
        self.accept(&second, query)
            .map(|plan| Planned { plan, trace })
            .map_err(|problems| PlannerError::OutputInvalid { problems, reply: second })
    }

    /// Parses and normalizes a reply; the error is a problem list suitable
    /// for a repair prompt.
    fn accept(&self, reply: &str, query: &str) -> Result<PlanGraph, String> {
        let mut plan = parse_plan(reply).map_err(|e| e.to_string())?;
        if plan.query().is_empty() {
            plan.set_query(query);
        }
        let plan = normalize_dependent_inputs(&plan);
        let report = validate(&plan, &self.registry);
        let mut problems: Vec<String> = report.errors.iter().map(|i| i.to_string()).collect();
        problems.extend(
            report
                .warnings
                .iter()
                .filter(|i| i.code == IssueCode::TooFewNodes)
                .map(|i| i.to_string()),
        );
        if problems.is_empty() {
            Ok(plan)
        } else {
            Err(problems.join("\n"))
        }
    }
}

/// Clears values on edge-fed input slots of nodes that have not run. Plans
/// must not pre-compute values that come from upstream.
pub fn normalize_dependent_inputs(plan: &PlanGraph) -> PlanGraph {
    let mut out = plan.clone();
    let fed: Vec<(NodeId, String)> = plan
        .edges()
        .iter()
        .map(|e| (e.dest_node, e.dest_input.clone()))
        .collect();
    for (node, input) in fed {
        if let Some(n) = out.node_mut(node) {
            if n.status == crate::plan::NodeStatus::Pending {
                if let Some(slot) = n.input_mut(&input) {
                    slot.value = None;
                }
            }
        }
    }
    out
}

fn preserved_ratio(partial: &PlanGraph, result: &PlanGraph) -> f64 {
    if partial.nodes().is_empty() {
        return 1.0;
    }
    let kept = partial
        .nodes()
        .iter()
        .filter(|n| result.node(n.id).is_some_and(|r| r.agent == n.agent))
        .count();
    kept as f64 / partial.nodes().len() as f64
}
