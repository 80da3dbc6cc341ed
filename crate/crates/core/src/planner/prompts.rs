//! Prompt templates for the planner and conversation module.

use crate::lm::{PromptBundle, TemplateId};
use crate::plan::{serialize_plan, PlanGraph};
use crate::registry::Registry;

pub const ORIGINAL_PLAN_MARKER: &str = "Original Plan:\n";
pub const FEEDBACK_MARKER: &str = "\n\nUser Feedback:\n";
/// Spelled as in the original template.
pub const INITIAL_PLAN_MARKER: &str = "Intial Plan:\n";

/// Bump when any template text changes; scripted fixtures are keyed by the
/// rendered prompt, so old fixtures stop matching.
pub const TEMPLATE_VERSION: u32 = 1;

const PLAN_EXAMPLES: &str = include_str!("../../../../data/plan_examples.json");

const SYSTEM_HEAD: &str = "You are a planner responsible for creating high-level plans to solve any tasks using a set of agents.
Your goal is to break down a given task into a sequence of subtasks that, when executed correctly by the appropriate agents, will lead to the correct solution.
A plan should have at least 2 steps.

For each step in the plan:
1. Describe the subtask the agent must perform.
2. Provide a brief, self-contained description of the expected inputs and outputs. Do not include any specific values or examples.
3. Generate an instruction prompt for the agent.

Represent your plan as a graph where each node corresponds to a step, and each edge represents a dependency between two steps i.e., a step's output is used as an input for a subsequent step.
If a node requires the output from a previous node as an input, ensure it is included in the edge list.
An input variable for a node represented is a tuple, where the first item is an input description, the second item is the value of the variable if it can be predetermined without executing the plan.
If is dependent upon preceding nodes, set null. DO NOT INFER THE VALUE. DO NOT EXECUTE THE STEPS.
The output should be structured in the following JSON format:
{
    'nodes': <list of JSON nodes {'id': <node id as integer>, 'name': <assigned agent name>, 'task': <instruction prompt>, 'input': <list of tuple (input var, its value)>, 'output': <list of outputs>}>,
    'edges': <list of JSON edges {'src_node': <source node id>, 'dest_node': <destination node id>, 'src_output': <output variable name>, 'dest_input': <input variable name>}>
}

eg.
";

const SYSTEM_TAIL: &str = "For identify_operands, ensure you repeat the query in the task. Sometimes, the query may require a multiplier eg. \"..twice of\", divisor eg. \"divide by x\", percentage, in a later task. Ensure all such operations are also captured in identify_operands.
There may be multiple inputs from one node to another. In that case, ensure you define separate edges from one node to the other.
For some agents, ensure that input order is correct, e.g., when calculating profit, revenue - cost is different from cost - revenue. so input should be [revenue, cost] order.";

const RESPONSE_SYSTEM: &str = "You are a natural language interface for a multi-agent system.
This system creates a plan to answer a user query and executes it using AI agents.
Your task is to explain the actions triggered by the user input and clearly communicate the system's output in a very short (max 1-2 line) response.
Do not mention anything else. Write down only plain text.";

const INTENT_SYSTEM: &str = "You classify a user's chat message to a planning assistant.
Reply with a JSON object {\"kind\": <one of \"new_query\", \"refine_feedback\", \"execute_all\", \"execute_node\", \"other\">, \"node\": <node id or null>, \"text\": <the query or feedback text>}.";

/// Demonstration plans, one per dataset family.
pub fn plan_examples() -> String {
    let parsed: Vec<serde_json::Value> =
        serde_json::from_str(PLAN_EXAMPLES).expect("bundled plan examples are valid JSON");
    parsed
        .iter()
        .map(|ex| format!("Query: {}\nPlan: {}", ex["query"].as_str().unwrap_or(""), ex["plan"]))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// The planning system prompt, shared by plan, refine and fix.
pub fn system_prompt(registry: &Registry) -> String {
    format!(
        "{SYSTEM_HEAD}{}\n\nHere are the available agents:\n```\n{}\n```\n\n{SYSTEM_TAIL}",
        plan_examples(),
        registry.to_json()
    )
}

pub fn plan_prompt(query: &str, registry: &Registry) -> PromptBundle {
    PromptBundle {
        template_id: TemplateId::Plan,
        system: system_prompt(registry),
        user: query.to_string(),
    }
}

pub fn refine_prompt(plan: &PlanGraph, feedback: &str, registry: &Registry) -> PromptBundle {
    PromptBundle {
        template_id: TemplateId::Refine,
        system: system_prompt(registry),
        user: format!(
            "Given the original plan, refine it according to user feedback\n\n{ORIGINAL_PLAN_MARKER}{}{FEEDBACK_MARKER}{feedback}",
            serialize_plan(plan)
        ),
    }
}

pub fn fix_prompt(query: &str, partial: &PlanGraph, registry: &Registry) -> PromptBundle {
    PromptBundle {
        template_id: TemplateId::Fix,
        system: system_prompt(registry),
        user: format!(
            "Given a query, an initial plan will be given to you. The initial plan may be incomplete or incorrect.\nYour job is to complete or fix the plan. Stay as true to the initial plan as you can.\n\nQuery:\n{query}\n\n{INITIAL_PLAN_MARKER}{}\n",
            serialize_plan(partial)
        ),
    }
}

/// Appended to the previous user prompt when the reply did not validate.
pub fn repair_prompt(previous: &PromptBundle, reply: &str, problems: &str) -> PromptBundle {
    PromptBundle {
        template_id: previous.template_id,
        system: previous.system.clone(),
        user: format!(
            "{}\n\nYour previous plan was rejected:\n{reply}\n\nProblems:\n{problems}\nReturn a corrected plan in the same JSON format.",
            previous.user
        ),
    }
}

pub fn intent_prompt(message: &str, plan: Option<&PlanGraph>) -> PromptBundle {
    let context = match plan {
        Some(p) => format!("Current plan:\n{}", serialize_plan(p)),
        None => "There is no current plan.".to_string(),
    };
    PromptBundle {
        template_id: TemplateId::Intent,
        system: INTENT_SYSTEM.to_string(),
        user: format!("{context}\n\nMessage:\n{message}"),
    }
}

pub fn planned_response_prompt(query: &str, plan: &PlanGraph) -> PromptBundle {
    respond(format!(
        "Generate a very short (max 1-2 line) response to a user query to generate a plan. The response should simply provide a high level response of what the plan does, and minor details such as number of steps.\nUser Query: {query}\nPlan: {}",
        serialize_plan(plan)
    ))
}

pub fn executed_response_prompt(query: &str, plan: &PlanGraph) -> PromptBundle {
    respond(format!(
        "Generate a very short (max 1-2 line) response to a user query to execute a plan or a single node.\nThe response should simply provide a high level response of the execution, and minor details such as final result.\n\nUser Query: {query}\nPlan: {}",
        serialize_plan(plan)
    ))
}

pub fn refined_response_prompt(interaction: &str, plan: &PlanGraph) -> PromptBundle {
    respond(format!(
        "Generate a very short (max 1-2 line) response to a user query to interact with a plan.\nThe response should simply provide a high level response of the plan which was interacted with and what change took place.\n\nInteraction Type: {interaction}\nPlan: {}",
        serialize_plan(plan)
    ))
}

fn respond(user: String) -> PromptBundle {
    PromptBundle {
        template_id: TemplateId::Respond,
        system: RESPONSE_SYSTEM.to_string(),
        user,
    }
}
