//! Core engine for planweave: plan model, agent registry, execution, direct
//! edits, language-model planning, plan metrics, the refinement benchmark,
//! and chat sessions.

pub mod agents;
pub mod edit;
pub mod eval;
pub mod executor;
pub mod lm;
pub mod metrics;
pub mod plan;
pub mod planner;
pub mod registry;
pub mod session;
pub mod validate;
pub mod value;

pub use edit::{apply_edit, apply_script, diff, EditError, EditOp, EditScript, Provenance};
pub use executor::{ExecError, ExecutionTrace, Executor};
pub use lm::{EchoLm, LanguageModel, LiveLm, LmMode, ScriptedLm};
pub use plan::{parse_plan, serialize_plan, DataEdge, NodeId, NodeStatus, PlanGraph, TaskNode};
pub use planner::Planner;
pub use registry::{AgentSpec, Registry};
pub use validate::{validate, ValidationReport};
pub use value::Value;
