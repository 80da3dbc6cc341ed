//! The plan DAG: task nodes joined by output-to-input data edges.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::Value;

pub type Config = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    #[default]
    Pending,
    Running,
    Done,
    Failed,
    Stale,
    /// An upstream node failed, so this node never ran.
    FailedUpstream,
    /// Outputs were set by hand rather than by running the agent.
    Overridden,
}

impl NodeStatus {
    /// Whether the node's outputs can feed downstream inputs.
    pub fn has_usable_outputs(self) -> bool {
        matches!(self, NodeStatus::Done | NodeStatus::Overridden)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Pending => "pending",
            NodeStatus::Running => "running",
            NodeStatus::Done => "done",
            NodeStatus::Failed => "failed",
            NodeStatus::Stale => "stale",
            NodeStatus::FailedUpstream => "failed_upstream",
            NodeStatus::Overridden => "overridden",
        }
    }
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSlot {
    pub name: String,
    pub description: String,
    pub value: Option<Value>,
}

impl InputSlot {
    pub fn new(name: impl Into<String>, value: Option<Value>) -> Self {
        let name = name.into();
        InputSlot {
            description: name.clone(),
            name,
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSlot {
    pub name: String,
    pub value: Option<Value>,
}

impl OutputSlot {
    pub fn new(name: impl Into<String>) -> Self {
        OutputSlot {
            name: name.into(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskNode {
    pub id: NodeId,
    pub agent: String,
    pub task: String,
    pub inputs: Vec<InputSlot>,
    pub outputs: Vec<OutputSlot>,
    pub config: Config,
    pub status: NodeStatus,
}

impl TaskNode {
    pub fn new(id: u32, agent: impl Into<String>, task: impl Into<String>) -> Self {
        TaskNode {
            id: NodeId(id),
            agent: agent.into(),
            task: task.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            config: Config::new(),
            status: NodeStatus::Pending,
        }
    }

    pub fn with_input(mut self, name: &str, value: Option<Value>) -> Self {
        self.inputs.push(InputSlot::new(name, value));
        self
    }

    pub fn with_output(mut self, name: &str) -> Self {
        self.outputs.push(OutputSlot::new(name));
        self
    }

    pub fn with_config(mut self, key: &str, value: serde_json::Value) -> Self {
        self.config.insert(key.to_string(), value);
        self
    }

    pub fn input(&self, name: &str) -> Option<&InputSlot> {
        self.inputs.iter().find(|s| s.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&OutputSlot> {
        self.outputs.iter().find(|s| s.name == name)
    }

    pub(crate) fn input_mut(&mut self, name: &str) -> Option<&mut InputSlot> {
        self.inputs.iter_mut().find(|s| s.name == name)
    }

    pub(crate) fn output_mut(&mut self, name: &str) -> Option<&mut OutputSlot> {
        self.outputs.iter_mut().find(|s| s.name == name)
    }

    pub(crate) fn clear_outputs(&mut self) {
        for slot in &mut self.outputs {
            slot.value = None;
        }
    }

    /// Pending nodes never ran and stay pending; anything else is flagged
    /// stale, keeping whatever outputs it had.
    pub(crate) fn mark_stale(&mut self) {
        if self.status != NodeStatus::Pending {
            self.status = NodeStatus::Stale;
        }
    }

    /// Structure only: execution status and produced values are ignored,
    /// input values are not.
    pub fn structurally_eq(&self, other: &TaskNode) -> bool {
        self.id == other.id
            && self.agent == other.agent
            && self.task == other.task
            && self.inputs == other.inputs
            && self.config == other.config
            && self.outputs.len() == other.outputs.len()
            && self
                .outputs
                .iter()
                .zip(&other.outputs)
                .all(|(a, b)| a.name == b.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataEdge {
    pub src_node: NodeId,
    pub dest_node: NodeId,
    pub src_output: String,
    pub dest_input: String,
}

impl DataEdge {
    pub fn new(src: u32, src_output: &str, dest: u32, dest_input: &str) -> Self {
        DataEdge {
            src_node: NodeId(src),
            dest_node: NodeId(dest),
            src_output: src_output.to_string(),
            dest_input: dest_input.to_string(),
        }
    }
}

impl fmt::Display for DataEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{} -> {}.{}",
            self.src_node, self.src_output, self.dest_node, self.dest_input
        )
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("malformed plan: {0}")]
    MalformedPlan(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("plan contains a cycle through nodes {0:?}")]
    Cycle(Vec<NodeId>),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

/// A directed acyclic graph of agent-assigned subtasks.
///
/// Nodes are kept sorted by id and edges by their
/// `(src_node, dest_node, src_output, dest_input)` quadruple, so two graphs
/// with the same content compare equal regardless of construction order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanGraph {
    query: String,
    nodes: Vec<TaskNode>,
    edges: Vec<DataEdge>,
}

impl PlanGraph {
    pub fn new(query: impl Into<String>, nodes: Vec<TaskNode>, edges: Vec<DataEdge>) -> Self {
        let mut plan = PlanGraph {
            query: query.into(),
            nodes,
            edges,
        };
        plan.normalize();
        plan
    }

    fn normalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.edges.sort();
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn nodes(&self) -> &[TaskNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DataEdge] {
        &self.edges
    }

    pub fn node(&self, id: NodeId) -> Option<&TaskNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn node_ids(&self) -> Vec<NodeId> {
        self.nodes.iter().map(|n| n.id).collect()
    }

    /// Id for a freshly added node: one past the current maximum.
    pub fn next_id(&self) -> NodeId {
        NodeId(self.nodes.iter().map(|n| n.id.0 + 1).max().unwrap_or(1))
    }

    pub fn with_query(mut self, query: impl Into<String>) -> Self {
        self.query = query.into();
        self
    }

    pub(crate) fn set_query(&mut self, query: impl Into<String>) {
        self.query = query.into();
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> Option<&mut TaskNode> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    #[cfg(test)]
    pub(crate) fn nodes_mut(&mut self) -> impl Iterator<Item = &mut TaskNode> {
        self.nodes.iter_mut()
    }

    pub(crate) fn insert_node(&mut self, node: TaskNode) {
        let pos = self.nodes.partition_point(|n| n.id <= node.id);
        self.nodes.insert(pos, node);
    }

    pub(crate) fn remove_node(&mut self, id: NodeId) -> Option<TaskNode> {
        let pos = self.nodes.iter().position(|n| n.id == id)?;
        self.edges.retain(|e| e.src_node != id && e.dest_node != id);
        Some(self.nodes.remove(pos))
    }

    pub(crate) fn insert_edge(&mut self, edge: DataEdge) {
        let pos = self.edges.partition_point(|e| *e <= edge);
        self.edges.insert(pos, edge);
    }

    pub(crate) fn remove_edge(&mut self, edge: &DataEdge) -> bool {
        match self.edges.iter().position(|e| e == edge) {
            Some(pos) => {
                self.edges.remove(pos);
                true
            }
            None => false,
        }
    }

    pub(crate) fn mark_stale(&mut self, ids: impl IntoIterator<Item = NodeId>) {
        for id in ids {
            if let Some(node) = self.node_mut(id) {
                node.mark_stale();
            }
        }
    }

    /// `ids` plus all of their dependents, ignoring unknown ids.
    pub fn closure(&self, ids: impl IntoIterator<Item = NodeId>) -> BTreeSet<NodeId> {
        let mut out = BTreeSet::new();
        for id in ids {
            if let Ok(deps) = self.dependents(id) {
                out.insert(id);
                out.extend(deps);
            }
        }
        out
    }

    pub(crate) fn retain_edges(&mut self, keep: impl FnMut(&DataEdge) -> bool) {
        self.edges.retain(keep);
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &DataEdge> {
        self.edges.iter().filter(move |e| e.dest_node == id)
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &DataEdge> {
        self.edges.iter().filter(move |e| e.src_node == id)
    }

    pub fn predecessors(&self, id: NodeId) -> BTreeSet<NodeId> {
        self.in_edges(id).map(|e| e.src_node).collect()
    }

    pub fn successors(&self, id: NodeId) -> BTreeSet<NodeId> {
        self.out_edges(id).map(|e| e.dest_node).collect()
    }

    /// Nodes with no outgoing edge, ascending by id.
    pub fn sinks(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .map(|n| n.id)
            .filter(|id| self.out_edges(*id).next().is_none())
            .collect()
    }

    /// Whether `(node, input)` is the destination of at least one edge.
    pub fn is_edge_fed(&self, node: NodeId, input: &str) -> bool {
        self.in_edges(node).any(|e| e.dest_input == input)
    }

    /// Kahn's algorithm; among ready nodes the smallest id goes first.
    /// Edges to or from unknown nodes are ignored.
    pub fn topo_order(&self) -> Result<Vec<NodeId>, PlanError> {
        let mut indegree: BTreeMap<NodeId, usize> =
            self.nodes.iter().map(|n| (n.id, 0)).collect();
        for e in self.live_edges() {
            *indegree.get_mut(&e.dest_node).expect("live edge") += 1;
        }
        let mut ready: BinaryHeap<Reverse<NodeId>> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(id, _)| Reverse(*id))
            .collect();
        let mut order = Vec::with_capacity(indegree.len());
        while let Some(Reverse(id)) = ready.pop() {
            order.push(id);
            for e in self.live_edges().filter(|e| e.src_node == id) {
                let d = indegree.get_mut(&e.dest_node).expect("live edge");
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(e.dest_node));
                }
            }
        }
        if order.len() < indegree.len() {
            return Err(PlanError::Cycle(self.find_cycle().unwrap_or_default()));
        }
        Ok(order)
    }

    fn live_edges(&self) -> impl Iterator<Item = &DataEdge> {
        // duplicate ids collapse onto one entry in the indegree map
        self.edges
            .iter()
            .filter(|e| self.contains(e.src_node) && self.contains(e.dest_node))
    }

    /// One directed cycle, rotated so that its smallest id comes first.
    pub fn find_cycle(&self) -> Option<Vec<NodeId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Grey,
            Black,
        }
        let ids: BTreeSet<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        let mut mark: BTreeMap<NodeId, Mark> = ids.iter().map(|id| (*id, Mark::White)).collect();
        let succ: BTreeMap<NodeId, Vec<NodeId>> = ids
            .iter()
            .map(|id| {
                let s: BTreeSet<NodeId> = self
                    .live_edges()
                    .filter(|e| e.src_node == *id)
                    .map(|e| e.dest_node)
                    .collect();
                (*id, s.into_iter().collect())
            })
            .collect();

        for start in &ids {
            if mark[start] != Mark::White {
                continue;
            }
            // iterative DFS keeping the grey path explicit
            let mut path: Vec<NodeId> = vec![*start];
            let mut cursor: Vec<usize> = vec![0];
            mark.insert(*start, Mark::Grey);
            while let Some(&node) = path.last() {
                let i = cursor.last_mut().expect("parallel stacks");
                if let Some(&next) = succ[&node].get(*i) {
                    *i += 1;
                    match mark[&next] {
                        Mark::White => {
                            mark.insert(next, Mark::Grey);
                            path.push(next);
                            cursor.push(0);
                        }
                        Mark::Grey => {
                            let at = path.iter().position(|n| *n == next).expect("grey on path");
                            let mut cycle = path[at..].to_vec();
                            let min_at = cycle
                                .iter()
                                .enumerate()
                                .min_by_key(|(_, id)| **id)
                                .map(|(i, _)| i)
                                .unwrap_or(0);
                            cycle.rotate_left(min_at);
                            return Some(cycle);
                        }
                        Mark::Black => {}
                    }
                } else {
                    mark.insert(node, Mark::Black);
                    path.pop();
                    cursor.pop();
                }
            }
        }
        None
    }

    /// Transitive successors of `id`, excluding `id` itself.
    pub fn dependents(&self, id: NodeId) -> Result<BTreeSet<NodeId>, PlanError> {
        if !self.contains(id) {
            return Err(PlanError::UnknownNode(id));
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            for s in self.successors(n) {
                if s != id && seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        Ok(seen)
    }

    /// True when `to` is reachable from `from` along edges (or `from == to`).
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        if from == to {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(n) = stack.pop() {
            for s in self.successors(n) {
                if s == to {
                    return true;
                }
                if seen.insert(s) {
                    stack.push(s);
                }
            }
        }
        false
    }

    /// Equality of agents, tasks, ports, input values, config, and edges.
    /// Statuses and produced outputs are ignored.
    pub fn structurally_eq(&self, other: &PlanGraph) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .zip(&other.nodes)
                .all(|(a, b)| a.structurally_eq(b))
            && self.edges == other.edges
    }
}

// ---------------------------------------------------------------------------
// wire format
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct WirePlanOut<'a> {
    query: &'a str,
    nodes: Vec<WireNodeOut<'a>>,
    edges: &'a [DataEdge],
}

impl<'a> WirePlanOut<'a> {
    fn from_plan(plan: &'a PlanGraph) -> Self {
        WirePlanOut {
            query: &plan.query,
            nodes: plan.nodes.iter().map(WireNodeOut::from_node).collect(),
            edges: &plan.edges,
        }
    }
}

#[derive(Serialize)]
pub(crate) struct WireNodeOut<'a> {
    id: NodeId,
    name: &'a str,
    task: &'a str,
    input: Vec<serde_json::Value>,
    output: Vec<&'a str>,
    config: &'a Config,
    status: NodeStatus,
    results: BTreeMap<&'a str, &'a Value>,
}

impl<'a> WireNodeOut<'a> {
    pub(crate) fn from_node(n: &'a TaskNode) -> Self {
        WireNodeOut {
            id: n.id,
            name: &n.agent,
            task: &n.task,
            input: n.inputs.iter().map(input_to_wire).collect(),
            output: n.outputs.iter().map(|o| o.name.as_str()).collect(),
            config: &n.config,
            status: n.status,
            results: n
                .outputs
                .iter()
                .filter_map(|o| o.value.as_ref().map(|v| (o.name.as_str(), v)))
                .collect(),
        }
    }
}

fn input_to_wire(slot: &InputSlot) -> serde_json::Value {
    let value = slot
        .value
        .as_ref()
        .map(Value::to_json)
        .unwrap_or(serde_json::Value::Null);
    let mut tuple = vec![serde_json::Value::String(slot.name.clone()), value];
    if !slot.description.is_empty() && slot.description != slot.name {
        tuple.push(serde_json::Value::String(slot.description.clone()));
    }
    serde_json::Value::Array(tuple)
}

#[derive(Deserialize)]
struct WirePlanIn {
    #[serde(default)]
    query: String,
    nodes: Vec<WireNodeIn>,
    edges: Vec<DataEdge>,
}

#[derive(Deserialize)]
pub(crate) struct WireNodeIn {
    pub(crate) id: Option<u32>,
    name: String,
    #[serde(default)]
    task: String,
    #[serde(default)]
    input: Vec<serde_json::Value>,
    #[serde(default)]
    output: Vec<String>,
    #[serde(default)]
    config: Config,
    #[serde(default)]
    status: NodeStatus,
    #[serde(default)]
    results: BTreeMap<String, Option<Value>>,
}

impl WireNodeIn {
    pub(crate) fn into_node(self, fallback_id: NodeId) -> Result<TaskNode, PlanError> {
        let id = self.id.map(NodeId).unwrap_or(fallback_id);
        let inputs = self
            .input
            .iter()
            .map(|raw| input_from_wire(id, raw))
            .collect::<Result<Vec<_>, _>>()?;
        let mut outputs: Vec<OutputSlot> = self.output.into_iter().map(OutputSlot::new).collect();
        for (name, value) in self.results {
            let slot = outputs.iter_mut().find(|o| o.name == name).ok_or_else(|| {
                PlanError::SchemaViolation(format!(
                    "node {id}: result for undeclared output `{name}`"
                ))
            })?;
            slot.value = value;
        }
        Ok(TaskNode {
            id,
            agent: self.name,
            task: self.task,
            inputs,
            outputs,
            config: self.config,
            status: self.status,
        })
    }
}

/// Serde adapter for input slot lists in the `[name, value]` tuple form.
pub(crate) mod input_tuples {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{input_from_wire, input_to_wire, InputSlot, NodeId};

    pub fn serialize<S: Serializer>(slots: &[InputSlot], s: S) -> Result<S::Ok, S::Error> {
        let wire: Vec<serde_json::Value> = slots.iter().map(input_to_wire).collect();
        wire.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<InputSlot>, D::Error> {
        let raw = Vec::<serde_json::Value>::deserialize(d)?;
        raw.iter()
            .map(|r| input_from_wire(NodeId(0), r).map_err(D::Error::custom))
            .collect()
    }
}

fn input_from_wire(node: NodeId, raw: &serde_json::Value) -> Result<InputSlot, PlanError> {
    let bad = || {
        PlanError::SchemaViolation(format!(
            "node {node}: input entries must be [name, value] tuples, got {raw}"
        ))
    };
    match raw {
        // a bare name is accepted as an unbound slot
        serde_json::Value::String(name) => Ok(InputSlot::new(name.clone(), None)),
        serde_json::Value::Array(items) if (1..=3).contains(&items.len()) => {
            let name = items[0].as_str().ok_or_else(bad)?.to_string();
            let value = match items.get(1) {
                None => None,
                Some(v) => {
                    serde_json::from_value::<Option<Value>>(v.clone()).map_err(|_| bad())?
                }
            };
            let description = match items.get(2) {
                None => name.clone(),
                Some(d) => d.as_str().ok_or_else(bad)?.to_string(),
            };
            Ok(InputSlot {
                name,
                description,
                value,
            })
        }
        _ => Err(bad()),
    }
}

/// Canonical JSON for a plan. Nodes ascend by id; edges ascend by quadruple.
pub fn serialize_plan(plan: &PlanGraph) -> String {
    serde_json::to_string(&WirePlanOut::from_plan(plan)).expect("plan serializes")
}

impl Serialize for PlanGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WirePlanOut::from_plan(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for PlanGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = serde_json::Value::deserialize(d)?;
        plan_from_json(&raw).map_err(serde::de::Error::custom)
    }
}

/// The wire form as a JSON value. Object keys lose their canonical order
/// here; use [`serialize_plan`] for bytes.
pub fn plan_to_json(plan: &PlanGraph) -> serde_json::Value {
    serde_json::to_value(WirePlanOut::from_plan(plan)).expect("plan serializes")
}

/// Decodes a plan, tolerating code fences and prose around the JSON object.
pub fn parse_plan(text: &str) -> Result<PlanGraph, PlanError> {
    let payload = extract_json_object(text)
        .ok_or_else(|| PlanError::MalformedPlan("no JSON object found".into()))?;
    let raw: serde_json::Value =
        serde_json::from_str(payload).map_err(|e| PlanError::MalformedPlan(e.to_string()))?;
    plan_from_json(&raw)
}

pub fn plan_from_json(raw: &serde_json::Value) -> Result<PlanGraph, PlanError> {
    let obj = raw
        .as_object()
        .ok_or_else(|| PlanError::SchemaViolation("plan must be a JSON object".into()))?;
    for key in ["nodes", "edges"] {
        if !obj.contains_key(key) {
            return Err(PlanError::SchemaViolation(format!("missing `{key}` key")));
        }
    }
    let wire: WirePlanIn = serde_json::from_value(raw.clone())
        .map_err(|e| PlanError::SchemaViolation(e.to_string()))?;
    let mut nodes = Vec::with_capacity(wire.nodes.len());
    for (i, n) in wire.nodes.into_iter().enumerate() {
        if n.id.is_none() {
            return Err(PlanError::SchemaViolation(format!("node #{i} has no id")));
        }
        nodes.push(n.into_node(NodeId(0))?);
    }
    Ok(PlanGraph::new(wire.query, nodes, wire.edges))
}

/// Finds the JSON object inside model output: the first fenced block if any,
/// otherwise the span from the first `{` to the last `}`.
pub fn extract_json_object(text: &str) -> Option<&str> {
    let body = fenced_block(text).unwrap_or(text);
    let start = body.find('{')?;
    let end = body.rfind('}')?;
    (end > start).then(|| &body[start..=end])
}

fn fenced_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after = &text[open + 3..];
    // skip an info string such as `json`
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(0);
    let body = &after[body_start..];
    let close = body.find("```")?;
    Some(&body[..close])
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn chain3() -> PlanGraph {
        PlanGraph::new(
            "q",
            vec![
                TaskNode::new(1, "identify_operands", "find numbers")
                    .with_input("query", Some("3 and 4".into()))
                    .with_output("operands"),
                TaskNode::new(2, "add", "sum them")
                    .with_input("numbers", None)
                    .with_output("sum"),
                TaskNode::new(3, "multiply", "double")
                    .with_input("x", None)
                    .with_input("factor", Some(2.0.into()))
                    .with_output("product"),
            ],
            vec![
                DataEdge::new(1, "operands", 2, "numbers"),
                DataEdge::new(2, "sum", 3, "x"),
            ],
        )
    }

    const CANONICAL: &str = r#"{"nodes":[{"id":1,"name":"identify_operands","task":"Find the numbers in: what is 3 plus 4","input":[["query","what is 3 plus 4"]],"output":["operands"]},{"id":2,"name":"add","task":"Add the operands","input":[["numbers",null]],"output":["sum"]}],"edges":[{"src_node":1,"dest_node":2,"src_output":"operands","dest_input":"numbers"}]}"#;

    #[test]
    fn parses_canonical_two_node_plan() {
        let plan = parse_plan(CANONICAL).unwrap();
        assert_eq!(plan.nodes().len(), 2);
        assert_eq!(plan.edges().len(), 1);
        assert_eq!(plan.node(NodeId(2)).unwrap().inputs[0].value, None);
    }

    #[test]
    fn fenced_payload_with_prose_parses_identically() {
        let wrapped = format!("Here is the plan:\n```json\n{CANONICAL}\n```\nLet me know.");
        assert_eq!(parse_plan(&wrapped).unwrap(), parse_plan(CANONICAL).unwrap());
    }

    #[test]
    fn missing_edges_key_is_schema_violation() {
        let err = parse_plan(r#"{"nodes": []}"#).unwrap_err();
        assert!(matches!(err, PlanError::SchemaViolation(_)), "{err}");
    }

    #[test]
    fn garbage_is_malformed() {
        assert!(matches!(parse_plan("no plan here"), Err(PlanError::MalformedPlan(_))));
        assert!(matches!(parse_plan("{ nodes: ]"), Err(PlanError::MalformedPlan(_))));
    }

    #[test]
    fn wrong_field_type_is_schema_violation() {
        let err = parse_plan(r#"{"nodes":[{"id":"one","name":"add"}],"edges":[]}"#).unwrap_err();
        assert!(matches!(err, PlanError::SchemaViolation(_)));
    }

    #[test]
    fn empty_plan_serializes_with_empty_arrays() {
        let text = serialize_plan(&PlanGraph::default());
        assert_eq!(text, r#"{"query":"","nodes":[],"edges":[]}"#);
    }

    #[test]
    fn nodes_serialize_sorted_by_id() {
        let plan = PlanGraph::new(
            "",
            vec![TaskNode::new(5, "add", ""), TaskNode::new(2, "add", "")],
            vec![],
        );
        let json = plan_to_json(&plan);
        let ids: Vec<u64> = json["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|n| n["id"].as_u64().unwrap())
            .collect();
        assert_eq!(ids, vec![2, 5]);
    }

    #[test]
    fn round_trip_keeps_results_and_status() {
        let mut plan = chain3();
        let n = plan.node_mut(NodeId(2)).unwrap();
        n.status = NodeStatus::Done;
        n.outputs[0].value = Some(7.0.into());
        n.inputs[0].description = "the numbers to add".into();
        assert_eq!(parse_plan(&serialize_plan(&plan)).unwrap(), plan);
    }

    #[test]
    fn topo_chain_and_diamond() {
        assert_eq!(
            chain3().topo_order().unwrap(),
            vec![NodeId(1), NodeId(2), NodeId(3)]
        );
        let diamond = diamond();
        assert_eq!(
            diamond.topo_order().unwrap(),
            vec![NodeId(1), NodeId(2), NodeId(3), NodeId(4)]
        );
    }

    #[test]
    fn topo_disconnected_uses_id_tie_break() {
        let plan = PlanGraph::new(
            "",
            vec![TaskNode::new(5, "add", ""), TaskNode::new(2, "add", "")],
            vec![],
        );
        assert_eq!(plan.topo_order().unwrap(), vec![NodeId(2), NodeId(5)]);
    }

    #[test]
    fn topo_reports_cycle() {
        let plan = cycle3();
        assert_eq!(
            plan.topo_order().unwrap_err(),
            PlanError::Cycle(vec![NodeId(1), NodeId(2), NodeId(3)])
        );
    }

    #[test]
    fn dependents_examples() {
        let chain = chain3();
        assert_eq!(
            chain.dependents(NodeId(1)).unwrap(),
            [NodeId(2), NodeId(3)].into_iter().collect()
        );
        assert!(chain.dependents(NodeId(3)).unwrap().is_empty());
        assert_eq!(
            diamond().dependents(NodeId(2)).unwrap(),
            [NodeId(4)].into_iter().collect()
        );
        assert_eq!(
            chain.dependents(NodeId(9)).unwrap_err(),
            PlanError::UnknownNode(NodeId(9))
        );
    }

    pub(crate) fn diamond() -> PlanGraph {
        let n = |id| {
            TaskNode::new(id, "add", "")
                .with_input("a", None)
                .with_input("b", None)
                .with_output("sum")
        };
        PlanGraph::new(
            "",
            vec![n(1), n(2), n(3), n(4)],
            vec![
                DataEdge::new(1, "sum", 2, "a"),
                DataEdge::new(1, "sum", 3, "a"),
                DataEdge::new(2, "sum", 4, "a"),
                DataEdge::new(3, "sum", 4, "b"),
            ],
        )
    }

    fn cycle3() -> PlanGraph {
        let n = |id| TaskNode::new(id, "add", "").with_input("a", None).with_output("sum");
        PlanGraph::new(
            "",
            vec![n(1), n(2), n(3)],
            vec![
                DataEdge::new(1, "sum", 2, "a"),
                DataEdge::new(2, "sum", 3, "a"),
                DataEdge::new(3, "sum", 1, "a"),
            ],
        )
    }
}
