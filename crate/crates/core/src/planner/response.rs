//! Short chat replies after planning, execution and refinement.

use crate::lm::{LanguageModel, LmMode};
use crate::plan::PlanGraph;
use crate::value::Value;

use super::prompts;

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseEvent {
    Planned { query: String },
    Executed { query: String, executed: usize, failed: usize, final_answer: Option<Value> },
    Refined { interaction: String },
}

fn agents_in_order(plan: &PlanGraph) -> String {
    let order = plan.topo_order().unwrap_or_else(|_| plan.node_ids());
    order
        .iter()
        .filter_map(|id| plan.node(*id))
        .map(|n| n.agent.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Deterministic summary used offline and whenever the model fails.
pub fn summary(event: &ResponseEvent, plan: &PlanGraph) -> String {
    let n = plan.nodes().len();
    match event {
        ResponseEvent::Planned { .. } => {
            format!("Planned {n} steps using agents {}.", agents_in_order(plan))
        }
        ResponseEvent::Executed { executed, failed, final_answer, .. } => {
            let mut line = format!("Executed {executed} node(s)");
            if *failed > 0 {
                line.push_str(&format!(", {failed} failed"));
            }
            match final_answer {
                Some(v) => line.push_str(&format!("; final answer: {}", one_line(&v.render()))),
                None => line.push_str("; no final answer yet"),
            }
            if !line.ends_with(['.', '!', '?']) {
                line.push('.');
            }
            line
        }
        ResponseEvent::Refined { interaction } => format!(
            "Updated plan ({interaction}): {n} steps using agents {}.",
            agents_in_order(plan)
        ),
    }
}

/// Live models answer through the response prompt, trimmed to two lines.
pub fn render_response(event: &ResponseEvent, plan: &PlanGraph, lm: Option<&dyn LanguageModel>) -> String {
    let Some(lm) = lm.filter(|lm| lm.mode() == LmMode::Live) else {
        return summary(event, plan);
    };
    let prompt = match event {
        ResponseEvent::Planned { query } => prompts::planned_response_prompt(query, plan),
        ResponseEvent::Executed { query, .. } => prompts::executed_response_prompt(query, plan),
        ResponseEvent::Refined { interaction } => prompts::refined_response_prompt(interaction, plan),
    };
    match lm.complete(&prompt) {
        Ok(reply) if !reply.trim().is_empty() => reply
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .take(2)
            .collect::<Vec<_>>()
            .join("\n"),
        _ => summary(event, plan),
    }
}
