//! Direct-manipulation edits: a closed set of plan operations, atomic
//! scripts of them, and a structural diff that produces such scripts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::plan::{input_tuples, Config, DataEdge, InputSlot, NodeId, OutputSlot, PlanGraph, TaskNode};
use crate::value::Value;

/// A node as described in an `add_node` payload. A missing id is allocated
/// as one past the current maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<NodeId>,
    #[serde(rename = "name")]
    pub agent: String,
    #[serde(default)]
    pub task: String,
    #[serde(default, rename = "input", with = "input_tuples")]
    pub inputs: Vec<InputSlot>,
    #[serde(default, rename = "output")]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub config: Config,
}

impl NewNode {
    /// A node with an agent and nothing else.
    pub fn placeholder(id: Option<NodeId>, agent: &str, task: &str) -> Self {
        NewNode {
            id,
            agent: agent.into(),
            task: task.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: Config::new(),
        }
    }

    pub fn from_node(node: &TaskNode) -> Self {
        NewNode {
            id: Some(node.id),
            agent: node.agent.clone(),
            task: node.task.clone(),
            inputs: node.inputs.clone(),
            outputs: node.outputs.iter().map(|o| o.name.clone()).collect(),
            config: node.config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditOp {
    AddNode {
        node: NewNode,
    },
    RemoveNode {
        node: NodeId,
    },
    AddEdge {
        #[serde(flatten)]
        edge: DataEdge,
    },
    RemoveEdge {
        #[serde(flatten)]
        edge: DataEdge,
    },
    SetTask {
        node: NodeId,
        task: String,
    },
    SetAgent {
        node: NodeId,
        agent: String,
    },
    /// Shallow merge; a `null` value deletes the key.
    SetConfig {
        node: NodeId,
        config: Config,
    },
    AddInput {
        node: NodeId,
        name: String,
        #[serde(default)]
        value: Option<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    RemoveInput {
        node: NodeId,
        name: String,
    },
    AddOutput {
        node: NodeId,
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        index: Option<usize>,
    },
    RemoveOutput {
        node: NodeId,
        name: String,
    },
    SetInputValue {
        node: NodeId,
        name: String,
        value: Option<Value>,
    },
}

impl EditOp {
    pub fn kind(&self) -> &'static str {
        match self {
            EditOp::AddNode { .. } => "add_node",
            EditOp::RemoveNode { .. } => "remove_node",
            EditOp::AddEdge { .. } => "add_edge",
            EditOp::RemoveEdge { .. } => "remove_edge",
            EditOp::SetTask { .. } => "set_task",
            EditOp::SetAgent { .. } => "set_agent",
            EditOp::SetConfig { .. } => "set_config",
            EditOp::AddInput { .. } => "add_input",
            EditOp::RemoveInput { .. } => "remove_input",
            EditOp::AddOutput { .. } => "add_output",
            EditOp::RemoveOutput { .. } => "remove_output",
            EditOp::SetInputValue { .. } => "set_input_value",
        }
    }

    pub fn add_edge(src: u32, src_output: &str, dest: u32, dest_input: &str) -> Self {
        EditOp::AddEdge {
            edge: DataEdge::new(src, src_output, dest, dest_input),
        }
    }

    pub fn remove_edge(src: u32, src_output: &str, dest: u32, dest_input: &str) -> Self {
        EditOp::RemoveEdge {
            edge: DataEdge::new(src, src_output, dest, dest_input),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    #[default]
    UserGraphEdit,
    HarnessCorruption,
    HarnessDmFeedback,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
    pub provenance: Provenance,
}

impl EditScript {
    pub fn new(ops: Vec<EditOp>, provenance: Provenance) -> Self {
        EditScript { ops, provenance }
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EditError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
    #[error("no edge {0}")]
    UnknownEdge(DataEdge),
    #[error("node {node} has no port `{port}`")]
    UnknownPort { node: NodeId, port: String },
    #[error("node {node} already has a port `{port}`")]
    DuplicatePort { node: NodeId, port: String },
    #[error("edge {0} would create a cycle")]
    WouldCreateCycle(DataEdge),
    #[error("edge {0} already exists")]
    DuplicateEdge(DataEdge),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("edit #{index} failed: {error}")]
pub struct ScriptError {
    pub index: usize,
    pub error: EditError,
}

fn node_of(plan: &PlanGraph, id: NodeId) -> Result<&TaskNode, EditError> {
    plan.node(id).ok_or(EditError::UnknownNode(id))
}

/// Applies one edit, returning the new plan. The touched node and its
/// dependents are marked stale.
pub fn apply_edit(plan: &PlanGraph, op: &EditOp) -> Result<PlanGraph, EditError> {
    let mut out = plan.clone();
    let mut touched: BTreeSet<NodeId> = BTreeSet::new();
    match op {
        EditOp::AddNode { node } => {
            let id = node.id.unwrap_or_else(|| plan.next_id());
            if plan.contains(id) {
                return Err(EditError::DuplicateNode(id));
            }
            let mut seen = BTreeSet::new();
            for name in node.inputs.iter().map(|s| &s.name) {
                if !seen.insert(("in", name)) {
                    return Err(EditError::DuplicatePort { node: id, port: name.clone() });
                }
            }
            for name in &node.outputs {
                if !seen.insert(("out", name)) {
                    return Err(EditError::DuplicatePort { node: id, port: name.clone() });
                }
            }
            out.insert_node(TaskNode {
                id,
                agent: node.agent.clone(),
                task: node.task.clone(),
                inputs: node.inputs.clone(),
                outputs: node.outputs.iter().map(OutputSlot::new).collect(),
                config: node.config.clone(),
                status: Default::default(),
            });
        }
        EditOp::RemoveNode { node } => {
            node_of(plan, *node)?;
            touched.extend(plan.successors(*node));
            out.remove_node(*node);
        }
        EditOp::AddEdge { edge } => {
            let src = node_of(plan, edge.src_node)?;
            let dest = node_of(plan, edge.dest_node)?;
            if src.output(&edge.src_output).is_none() {
                return Err(EditError::UnknownPort {
                    node: src.id,
                    port: edge.src_output.clone(),
                });
            }
            if dest.input(&edge.dest_input).is_none() {
                return Err(EditError::UnknownPort {
                    node: dest.id,
                    port: edge.dest_input.clone(),
                });
            }
            if plan.edges().contains(edge) {
                return Err(EditError::DuplicateEdge(edge.clone()));
            }
            if plan.reaches(edge.dest_node, edge.src_node) {
                return Err(EditError::WouldCreateCycle(edge.clone()));
            }
            out.insert_edge(edge.clone());
            touched.insert(edge.dest_node);
        }
        EditOp::RemoveEdge { edge } => {
            if !out.remove_edge(edge) {
                return Err(EditError::UnknownEdge(edge.clone()));
            }
            touched.insert(edge.dest_node);
        }
        EditOp::SetTask { node, task } => {
            node_of(plan, *node)?;
            out.node_mut(*node).expect("checked").task = task.clone();
            touched.insert(*node);
        }
        EditOp::SetAgent { node, agent } => {
            node_of(plan, *node)?;
            out.node_mut(*node).expect("checked").agent = agent.clone();
            touched.insert(*node);
        }
        EditOp::SetConfig { node, config } => {
            node_of(plan, *node)?;
            let target = &mut out.node_mut(*node).expect("checked").config;
            for (key, value) in config {
                if value.is_null() {
                    target.remove(key);
                } else {
                    target.insert(key.clone(), value.clone());
                }
            }
            touched.insert(*node);
        }
        EditOp::AddInput {
            node,
            name,
            value,
            description,
            index,
        } => {
            if node_of(plan, *node)?.input(name).is_some() {
                return Err(EditError::DuplicatePort { node: *node, port: name.clone() });
            }
            let slots = &mut out.node_mut(*node).expect("checked").inputs;
            let at = index.unwrap_or(slots.len()).min(slots.len());
            slots.insert(
                at,
                InputSlot {
                    name: name.clone(),
                    description: description.clone().unwrap_or_else(|| name.clone()),
                    value: value.clone(),
                },
            );
            touched.insert(*node);
        }
        EditOp::RemoveInput { node, name } => {
            if node_of(plan, *node)?.input(name).is_none() {
                return Err(EditError::UnknownPort { node: *node, port: name.clone() });
            }
            out.node_mut(*node).expect("checked").inputs.retain(|s| &s.name != name);
            out.retain_edges(|e| !(e.dest_node == *node && &e.dest_input == name));
            touched.insert(*node);
        }
        EditOp::AddOutput { node, name, index } => {
            if node_of(plan, *node)?.output(name).is_some() {
                return Err(EditError::DuplicatePort { node: *node, port: name.clone() });
            }
            let slots = &mut out.node_mut(*node).expect("checked").outputs;
            let at = index.unwrap_or(slots.len()).min(slots.len());
            slots.insert(at, OutputSlot::new(name.clone()));
            touched.insert(*node);
        }
        EditOp::RemoveOutput { node, name } => {
            if node_of(plan, *node)?.output(name).is_none() {
                return Err(EditError::UnknownPort { node: *node, port: name.clone() });
            }
            touched.extend(plan.successors(*node));
            out.node_mut(*node).expect("checked").outputs.retain(|s| &s.name != name);
            out.retain_edges(|e| !(e.src_node == *node && &e.src_output == name));
            touched.insert(*node);
        }
        EditOp::SetInputValue { node, name, value } => {
            let slot = out
                .node_mut(*node)
                .ok_or(EditError::UnknownNode(*node))?
                .input_mut(name)
                .ok_or_else(|| EditError::UnknownPort { node: *node, port: name.clone() })?;
            slot.value = value.clone();
            touched.insert(*node);
        }
    }
    let stale = out.closure(touched);
    out.mark_stale(stale);
    Ok(out)
}

/// Applies every op in order. On failure the base plan is left untouched and
/// the failing op's index is reported.
pub fn apply_script(plan: &PlanGraph, script: &EditScript) -> Result<PlanGraph, ScriptError> {
    let mut current = plan.clone();
    for (index, op) in script.ops.iter().enumerate() {
        current = apply_edit(&current, op).map_err(|error| ScriptError { index, error })?;
    }
    Ok(current)
}

/// A script turning `base` into a plan structurally equal to `target`.
/// Nodes are matched strictly by id.
pub fn diff(base: &PlanGraph, target: &PlanGraph) -> EditScript {
    let mut ops = Vec::new();
    let mut work = base.clone();
    let mut push = |work: &mut PlanGraph, op: EditOp| {
        if let Ok(next) = apply_edit(work, &op) {
            *work = next;
            ops.push(op);
        }
    };

    let target_edges: BTreeSet<&DataEdge> = target.edges().iter().collect();
    for edge in base.edges() {
        if !target_edges.contains(edge) {
            push(&mut work, EditOp::RemoveEdge { edge: edge.clone() });
        }
    }
    for node in base.nodes() {
        if !target.contains(node.id) {
            push(&mut work, EditOp::RemoveNode { node: node.id });
        }
    }

    for want in target.nodes() {
        let Some(have) = work.node(want.id).cloned() else {
            continue;
        };
        let id = want.id;
        if have.agent != want.agent {
            push(&mut work, EditOp::SetAgent { node: id, agent: want.agent.clone() });
        }
        if have.task != want.task {
            push(&mut work, EditOp::SetTask { node: id, task: want.task.clone() });
        }
        if have.config != want.config {
            let mut patch: BTreeMap<String, serde_json::Value> = want
                .config
                .iter()
                .filter(|(k, v)| have.config.get(*k) != Some(*v))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            for key in have.config.keys().filter(|k| !want.config.contains_key(*k)) {
                patch.insert(key.clone(), serde_json::Value::Null);
            }
            push(&mut work, EditOp::SetConfig { node: id, config: patch });
        }
        diff_inputs(&mut work, &have, want, &mut push);
        diff_outputs(&mut work, &have, want, &mut push);
    }

    for want in target.nodes() {
        if !work.contains(want.id) {
            push(&mut work, EditOp::AddNode { node: NewNode::from_node(want) });
        }
    }
    for edge in target.edges() {
        if !work.edges().contains(edge) {
            push(&mut work, EditOp::AddEdge { edge: edge.clone() });
        }
    }
    EditScript::new(ops, Provenance::UserGraphEdit)
}

/// Port names of `have` that survive, in order, must form a subsequence of
/// `want`'s order; otherwise everything is rebuilt.
fn keeps_order(kept: &[&str], want: &[&str]) -> bool {
    let positions: Vec<usize> = kept
        .iter()
        .filter_map(|k| want.iter().position(|w| w == k))
        .collect();
    positions.windows(2).all(|w| w[0] < w[1])
}

fn diff_inputs(
    work: &mut PlanGraph,
    have: &TaskNode,
    want: &TaskNode,
    push: &mut impl FnMut(&mut PlanGraph, EditOp),
) {
    let id = want.id;
    let want_names: Vec<&str> = want.inputs.iter().map(|s| s.name.as_str()).collect();
    let mut kept: Vec<&InputSlot> = Vec::new();
    for slot in &have.inputs {
        let same = want
            .input(&slot.name)
            .is_some_and(|w| w.description == slot.description);
        if same {
            kept.push(slot);
        } else {
            push(work, EditOp::RemoveInput { node: id, name: slot.name.clone() });
        }
    }
    let kept_names: Vec<&str> = kept.iter().map(|s| s.name.as_str()).collect();
    if !keeps_order(&kept_names, &want_names) {
        for name in kept_names {
            push(work, EditOp::RemoveInput { node: id, name: name.to_string() });
        }
    }
    for (index, slot) in want.inputs.iter().enumerate() {
        let current = work.node(id).and_then(|n| n.input(&slot.name)).cloned();
        match current {
            None => push(
                work,
                EditOp::AddInput {
                    node: id,
                    name: slot.name.clone(),
                    value: slot.value.clone(),
                    description: (slot.description != slot.name).then(|| slot.description.clone()),
                    index: Some(index),
                },
            ),
            Some(c) if c.value != slot.value => push(
                work,
                EditOp::SetInputValue {
                    node: id,
                    name: slot.name.clone(),
                    value: slot.value.clone(),
                },
            ),
            Some(_) => {}
        }
    }
}

fn diff_outputs(
    work: &mut PlanGraph,
    have: &TaskNode,
    want: &TaskNode,
    push: &mut impl FnMut(&mut PlanGraph, EditOp),
) {
    let id = want.id;
    let want_names: Vec<&str> = want.outputs.iter().map(|s| s.name.as_str()).collect();
    let mut kept = Vec::new();
    for slot in &have.outputs {
        if want_names.contains(&slot.name.as_str()) {
            kept.push(slot.name.as_str());
        } else {
            push(work, EditOp::RemoveOutput { node: id, name: slot.name.clone() });
        }
    }
    if !keeps_order(&kept, &want_names) {
        for name in kept {
            push(work, EditOp::RemoveOutput { node: id, name: name.to_string() });
        }
    }
    for (index, name) in want_names.iter().enumerate() {
        if work.node(id).is_some_and(|n| n.output(name).is_none()) {
            push(
                work,
                EditOp::AddOutput {
                    node: id,
                    name: name.to_string(),
                    index: Some(index),
                },
            );
        }
    }
}
