//! Seeded single-step corruptions of a gold plan.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::edit::{apply_script, EditOp, EditScript, NewNode, Provenance};
use crate::plan::{DataEdge, InputSlot, NodeId, PlanGraph};
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    RemoveNode,
    AddNode,
    RemoveEdge,
    AddEdge,
    WrongAgent,
    IoChange,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 6] = [
        CorruptionKind::RemoveNode,
        CorruptionKind::AddNode,
        CorruptionKind::RemoveEdge,
        CorruptionKind::AddEdge,
        CorruptionKind::WrongAgent,
        CorruptionKind::IoChange,
    ];

    /// Kinds whose direct-manipulation feedback is an exact inverse.
    pub const SIMPLE: [CorruptionKind; 4] = [
        CorruptionKind::AddNode,
        CorruptionKind::RemoveEdge,
        CorruptionKind::AddEdge,
        CorruptionKind::WrongAgent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionKind::RemoveNode => "remove_node",
            CorruptionKind::AddNode => "add_node",
            CorruptionKind::RemoveEdge => "remove_edge",
            CorruptionKind::AddEdge => "add_edge",
            CorruptionKind::WrongAgent => "wrong_agent",
            CorruptionKind::IoChange => "io_change",
        }
    }

    pub fn is_simple(self) -> bool {
        Self::SIMPLE.contains(&self)
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown corruption kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotSide {
    Input,
    Output,
}

/// Everything needed to phrase feedback for, or undo, a corruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InverseHint {
    RemovedNode {
        node: NewNode,
        prev: Option<NodeId>,
        next: Option<NodeId>,
        edges: Vec<DataEdge>,
    },
    AddedNode {
        node: NodeId,
        agent: String,
    },
    RemovedEdge {
        edge: DataEdge,
    },
    AddedEdge {
        edge: DataEdge,
    },
    WrongAgent {
        node: NodeId,
        original: String,
        replaced_with: String,
    },
    IoChange {
        node: NodeId,
        side: SlotSide,
        slot: InputSlot,
        index: usize,
        /// New name when the slot was renamed rather than dropped.
        renamed_to: Option<String>,
        edges: Vec<DataEdge>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub kind: CorruptionKind,
    pub seed: u64,
    pub locus: Vec<NodeId>,
    pub inverse_hint: InverseHint,
    /// The edits that produced the corrupted plan.
    pub script: EditScript,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CorruptError {
    #[error("{kind} cannot be applied to this plan")]
    InapplicableKind { kind: CorruptionKind },
    #[error("corruption script failed: {0}")]
    Script(#[from] crate::edit::ScriptError),
}

/// Per-(case, kind) seed from the master seed, so adding cases never
/// shifts existing draws.
pub fn case_seed(master: u64, case_id: &str, kind: CorruptionKind) -> u64 {
    let digest = Sha256::digest(format!("{master}/{case_id}/{kind}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn corrupt(
    gold: &PlanGraph,
    kind: CorruptionKind,
    seed: u64,
    registry: &Registry,
) -> Result<(PlanGraph, CorruptionRecord), CorruptError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inapplicable = || CorruptError::InapplicableKind { kind };
    let (ops, locus, hint) = match kind {
        CorruptionKind::RemoveNode => {
            let non_sinks: Vec<NodeId> =
                gold.node_ids().into_iter().filter(|id| !gold.successors(*id).is_empty()).collect();
            let interior: Vec<NodeId> =
                non_sinks.iter().copied().filter(|id| !gold.predecessors(*id).is_empty()).collect();
            let pool = if interior.is_empty() { &non_sinks } else { &interior };
            let id = *pool.choose(&mut rng).ok_or_else(inapplicable)?;
            let node = gold.node(id).expect("listed");
            let edges: Vec<DataEdge> =
                gold.edges().iter().filter(|e| e.src_node == id || e.dest_node == id).cloned().collect();
            let hint = InverseHint::RemovedNode {
                node: NewNode::from_node(node),
                prev: gold.predecessors(id).into_iter().next(),
                next: gold.successors(id).into_iter().next(),
                edges,
            };
            (vec![EditOp::RemoveNode { node: id }], vec![id], hint)
        }
        CorruptionKind::AddNode => {
            let names: Vec<&str> = registry.names().collect();
            let agent = *names.choose(&mut rng).ok_or_else(inapplicable)?;
            let sources: Vec<(NodeId, String)> = gold
                .nodes()
                .iter()
                .flat_map(|n| n.outputs.iter().map(move |o| (n.id, o.name.clone())))
                .collect();
            let (src, output) = sources.choose(&mut rng).cloned().ok_or_else(inapplicable)?;
            let spec = registry.get(agent).expect("listed");
            let input = spec.inputs.first().map_or("input".to_string(), |p| p.name.clone());
            let outputs: Vec<String> = if spec.outputs.is_empty() {
                vec!["output".into()]
            } else {
                spec.outputs.iter().map(|p| p.name.clone()).collect()
            };
            let id = gold.next_id();
            let node = NewNode {
                id: Some(id),
                agent: agent.to_string(),
                task: spec.description.clone(),
                inputs: vec![InputSlot::new(input.clone(), None)],
                outputs,
                config: Default::default(),
            };
            let edge = DataEdge { src_node: src, dest_node: id, src_output: output, dest_input: input };
            (
                vec![EditOp::AddNode { node }, EditOp::AddEdge { edge }],
                vec![id],
                InverseHint::AddedNode { node: id, agent: agent.to_string() },
            )
        }
        CorruptionKind::RemoveEdge => {
            let edge = gold.edges().choose(&mut rng).cloned().ok_or_else(inapplicable)?;
            (
                vec![EditOp::RemoveEdge { edge: edge.clone() }],
                vec![edge.src_node, edge.dest_node],
                InverseHint::RemovedEdge { edge },
            )
        }
        CorruptionKind::AddEdge => {
            let mut candidates = Vec::new();
            for src in gold.nodes() {
                for dest in gold.nodes() {
                    if src.id == dest.id || gold.reaches(dest.id, src.id) {
                        continue;
                    }
                    for out in &src.outputs {
                        for input in &dest.inputs {
                            let edge = DataEdge {
                                src_node: src.id,
                                dest_node: dest.id,
                                src_output: out.name.clone(),
                                dest_input: input.name.clone(),
                            };
                            if !gold.edges().contains(&edge) {
                                candidates.push(edge);
                            }
                        }
                    }
                }
            }
            let edge = candidates.choose(&mut rng).cloned().ok_or_else(inapplicable)?;
            (
                vec![EditOp::AddEdge { edge: edge.clone() }],
                vec![edge.src_node, edge.dest_node],
                InverseHint::AddedEdge { edge },
            )
        }
        CorruptionKind::WrongAgent => {
            let node = gold.nodes().choose(&mut rng).ok_or_else(inapplicable)?;
            let others: Vec<&str> = registry.names().filter(|n| *n != node.agent).collect();
            let agent = *others.choose(&mut rng).ok_or_else(inapplicable)?;
            (
                vec![EditOp::SetAgent { node: node.id, agent: agent.to_string() }],
                vec![node.id],
                InverseHint::WrongAgent {
                    node: node.id,
                    original: node.agent.clone(),
                    replaced_with: agent.to_string(),
                },
            )
        }
        CorruptionKind::IoChange => io_change(gold, &mut rng).ok_or_else(inapplicable)?,
    };
    let script = EditScript::new(ops, Provenance::HarnessCorruption);
    let corrupted = apply_script(gold, &script)?;
    Ok((corrupted, CorruptionRecord { kind, seed, locus, inverse_hint: hint, script }))
}

/// Drops or renames one edge-bound slot, detaching its edges.
fn io_change(gold: &PlanGraph, rng: &mut ChaCha8Rng) -> Option<(Vec<EditOp>, Vec<NodeId>, InverseHint)> {
    let mut slots = Vec::new();
    for node in gold.nodes() {
        for (index, slot) in node.inputs.iter().enumerate() {
            if gold.is_edge_fed(node.id, &slot.name) {
                slots.push((node.id, SlotSide::Input, index, slot.clone()));
            }
        }
        for (index, slot) in node.outputs.iter().enumerate() {
            if gold.out_edges(node.id).any(|e| e.src_output == slot.name) {
                let as_input = InputSlot { name: slot.name.clone(), description: slot.name.clone(), value: None };
                slots.push((node.id, SlotSide::Output, index, as_input));
            }
        }
    }
    let (node, side, index, slot) = slots.choose(rng)?.clone();
    let edges: Vec<DataEdge> = gold
        .edges()
        .iter()
        .filter(|e| match side {
            SlotSide::Input => e.dest_node == node && e.dest_input == slot.name,
            SlotSide::Output => e.src_node == node && e.src_output == slot.name,
        })
        .cloned()
        .collect();
    let rename = rng.gen_bool(0.5);
    let renamed_to = rename.then(|| format!("{}_alt", slot.name));
    let mut ops = vec![match side {
        SlotSide::Input => EditOp::RemoveInput { node, name: slot.name.clone() },
        SlotSide::Output => EditOp::RemoveOutput { node, name: slot.name.clone() },
    }];
    if let Some(new) = &renamed_to {
        ops.push(match side {
            SlotSide::Input => EditOp::AddInput {
                node,
                name: new.clone(),
                value: None,
                description: None,
                index: Some(index),
            },
            SlotSide::Output => EditOp::AddOutput { node, name: new.clone(), index: Some(index) },
        });
    }
    let mut locus: Vec<NodeId> = edges.iter().flat_map(|e| [e.src_node, e.dest_node]).collect();
    locus.push(node);
    locus.sort();
    locus.dedup();
    Some((ops, locus, InverseHint::IoChange { node, side, slot, index, renamed_to, edges }))
}
