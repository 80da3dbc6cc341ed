//! Feedback synthesis in the three benchmark formats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::edit::{EditOp, EditScript, NewNode, Provenance};

use super::corrupt::{CorruptionRecord, InverseHint, SlotSide};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackMode {
    Detailed,
    Vague,
    DmFix,
}

impl FeedbackMode {
    pub const ALL: [FeedbackMode; 3] = [FeedbackMode::Detailed, FeedbackMode::Vague, FeedbackMode::DmFix];

    pub fn as_str(self) -> &'static str {
        match self {
            FeedbackMode::Detailed => "detailed",
            FeedbackMode::Vague => "vague",
            FeedbackMode::DmFix => "dm_fix",
        }
    }
}

impl fmt::Display for FeedbackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeedbackMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown feedback mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Feedback {
    Text { text: String },
    Edits { script: EditScript, needs_fix: bool },
}

pub fn make_feedback(record: &CorruptionRecord, mode: FeedbackMode) -> Feedback {
    match mode {
        FeedbackMode::Detailed => Feedback::Text { text: detailed(&record.inverse_hint) },
        FeedbackMode::Vague => Feedback::Text { text: vague(&record.inverse_hint) },
        FeedbackMode::DmFix => {
            let (ops, needs_fix) = direct_edits(&record.inverse_hint);
            Feedback::Edits { script: EditScript::new(ops, Provenance::HarnessDmFeedback), needs_fix }
        }
    }
}

fn detailed(hint: &InverseHint) -> String {
    match hint {
        InverseHint::RemovedNode { node, prev, next, .. } => match (prev, next) {
            (Some(p), Some(n)) => format!("Add a {} node connecting {p} to {n}", node.agent),
            (None, Some(n)) => format!("Add a {} node feeding {n}", node.agent),
            (Some(p), None) => format!("Add a {} node after {p}", node.agent),
            (None, None) => format!("Add a {} node", node.agent),
        },
        InverseHint::AddedNode { agent, .. } => format!("Remove a superfluous {agent} node"),
        InverseHint::RemovedEdge { edge } => {
            format!("Add an edge between {} and {}", edge.src_node, edge.dest_node)
        }
        InverseHint::AddedEdge { edge } => {
            format!("Remove a superfluous edge between {} and {}", edge.src_node, edge.dest_node)
        }
        InverseHint::WrongAgent { node, .. } => format!("Update node {node} to have the correct agent"),
        InverseHint::IoChange { node, .. } => format!("Update node {node} with valid inputs and outputs"),
    }
}

fn vague(hint: &InverseHint) -> String {
    match hint {
        InverseHint::RemovedNode { node, .. } => format!("Add a {} node", node.agent),
        InverseHint::AddedNode { .. } => "Remove a superfluous node".into(),
        InverseHint::RemovedEdge { .. } => "Add a missing edge".into(),
        InverseHint::AddedEdge { .. } => "Remove a superfluous edge".into(),
        InverseHint::WrongAgent { .. } => "Assign a correct agent".into(),
        InverseHint::IoChange { .. } => "Set valid inputs and outputs".into(),
    }
}

/// What a user would do on the canvas. Node removal and slot changes leave
/// wiring to the fix step.
fn direct_edits(hint: &InverseHint) -> (Vec<EditOp>, bool) {
    match hint {
        InverseHint::RemovedNode { node, .. } => {
            let placeholder = NewNode {
                id: node.id,
                agent: node.agent.clone(),
                task: node.task.clone(),
                inputs: Vec::new(),
                outputs: node.outputs.clone(),
                config: Default::default(),
            };
            (vec![EditOp::AddNode { node: placeholder }], true)
        }
        InverseHint::AddedNode { node, .. } => (vec![EditOp::RemoveNode { node: *node }], false),
        InverseHint::RemovedEdge { edge } => (vec![EditOp::AddEdge { edge: edge.clone() }], false),
        InverseHint::AddedEdge { edge } => (vec![EditOp::RemoveEdge { edge: edge.clone() }], false),
        InverseHint::WrongAgent { node, original, .. } => {
            (vec![EditOp::SetAgent { node: *node, agent: original.clone() }], false)
        }
        InverseHint::IoChange { node, side, slot, index, renamed_to, .. } => {
            let mut ops = Vec::new();
            if let Some(new) = renamed_to {
                ops.push(match side {
                    SlotSide::Input => EditOp::RemoveInput { node: *node, name: new.clone() },
                    SlotSide::Output => EditOp::RemoveOutput { node: *node, name: new.clone() },
                });
            }
            ops.push(match side {
                SlotSide::Input => EditOp::AddInput {
                    node: *node,
                    name: slot.name.clone(),
                    value: slot.value.clone(),
                    description: (slot.description != slot.name).then(|| slot.description.clone()),
                    index: Some(*index),
                },
                SlotSide::Output => EditOp::AddOutput { node: *node, name: slot.name.clone(), index: Some(*index) },
            });
            (ops, true)
        }
    }
}
