//! Structural validation of a plan against an agent registry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::plan::{DataEdge, NodeId, NodeStatus, PlanGraph};
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    UnknownAgent,
    DanglingEdge,
    UnknownPort,
    Cycle,
    SelfLoop,
    DuplicateId,
    DuplicateEdge,
    DuplicatePort,
    UnboundInput,
    TooFewNodes,
    /// More than one edge feeds the same input slot.
    FanIn,
    /// An edge-fed input also carries a static value.
    PreboundEdgeInput,
    /// More than one node has no outgoing edge.
    MultipleSinks,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::UnknownAgent => "UNKNOWN_AGENT",
            IssueCode::DanglingEdge => "DANGLING_EDGE",
            IssueCode::UnknownPort => "UNKNOWN_PORT",
            IssueCode::Cycle => "CYCLE",
            IssueCode::SelfLoop => "SELF_LOOP",
            IssueCode::DuplicateId => "DUPLICATE_ID",
            IssueCode::DuplicateEdge => "DUPLICATE_EDGE",
            IssueCode::DuplicatePort => "DUPLICATE_PORT",
            IssueCode::UnboundInput => "UNBOUND_INPUT",
            IssueCode::TooFewNodes => "TOO_FEW_NODES",
            IssueCode::FanIn => "FAN_IN",
            IssueCode::PreboundEdgeInput => "PREBOUND_EDGE_INPUT",
            IssueCode::MultipleSinks => "MULTIPLE_SINKS",
        }
    }
}

impl fmt::Display for IssueCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Locus {
    Plan,
    Node { node: NodeId },
    Port { node: NodeId, port: String },
    Edge { edge: DataEdge },
    Nodes { nodes: Vec<NodeId> },
}

impl fmt::Display for Locus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locus::Plan => f.write_str("plan"),
            Locus::Node { node } => write!(f, "node {node}"),
            Locus::Port { node, port } => write!(f, "node {node} port `{port}`"),
            Locus::Edge { edge } => write!(f, "edge {edge}"),
            Locus::Nodes { nodes } => {
                let ids: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
                write!(f, "nodes [{}]", ids.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Issue {
    pub code: IssueCode,
    pub locus: Locus,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.locus, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|i| i.code == code)
    }

    pub fn has_warning(&self, code: IssueCode) -> bool {
        self.warnings.iter().any(|i| i.code == code)
    }

    fn error(&mut self, code: IssueCode, locus: Locus, message: impl Into<String>) {
        self.errors.push(Issue {
            code,
            locus,
            message: message.into(),
        });
    }

    fn warn(&mut self, code: IssueCode, locus: Locus, message: impl Into<String>) {
        self.warnings.push(Issue {
            code,
            locus,
            message: message.into(),
        });
    }

    /// Human-readable listing, one issue per line.
    pub fn render(&self) -> String {
        let mut out = format!("{} errors, {} warnings\n", self.errors.len(), self.warnings.len());
        for e in &self.errors {
            out.push_str(&format!("error: {e}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

/// Reports every breach of the plan invariants. Never fails; problems are
/// report entries.
pub fn validate(plan: &PlanGraph, registry: &Registry) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen = BTreeSet::new();
    for node in plan.nodes() {
        if !seen.insert(node.id) {
            report.error(
                IssueCode::DuplicateId,
                Locus::Node { node: node.id },
                format!("node id {} is used more than once", node.id),
            );
        }
        if !registry.contains(&node.agent) {
            report.error(
                IssueCode::UnknownAgent,
                Locus::Node { node: node.id },
                format!("agent `{}` is not in the registry", node.agent),
            );
        }
        let mut names = BTreeSet::new();
        for port in node
            .inputs
            .iter()
            .map(|s| ("input", &s.name))
            .chain(node.outputs.iter().map(|s| ("output", &s.name)))
        {
            if !names.insert(port) {
                report.error(
                    IssueCode::DuplicatePort,
                    Locus::Port {
                        node: node.id,
                        port: port.1.clone(),
                    },
                    format!("{} slot `{}` is declared twice", port.0, port.1),
                );
            }
        }
    }

    let mut quads = BTreeSet::new();
    let mut feeds: BTreeMap<(NodeId, &str), usize> = BTreeMap::new();
    for edge in plan.edges() {
        let locus = || Locus::Edge { edge: edge.clone() };
        if edge.src_node == edge.dest_node {
            report.error(IssueCode::SelfLoop, locus(), "edge connects a node to itself");
        }
        if !quads.insert(edge) {
            report.error(IssueCode::DuplicateEdge, locus(), "edge is declared twice");
        }
        let (src, dest) = (plan.node(edge.src_node), plan.node(edge.dest_node));
        for (end, id) in [(src, edge.src_node), (dest, edge.dest_node)] {
            if end.is_none() {
                report.error(
                    IssueCode::DanglingEdge,
                    locus(),
                    format!("edge references missing node {id}"),
                );
            }
        }
        if let Some(src) = src {
            if src.output(&edge.src_output).is_none() {
                report.error(
                    IssueCode::UnknownPort,
                    locus(),
                    format!("node {} has no output `{}`", src.id, edge.src_output),
                );
            }
        }
        if let Some(dest) = dest {
            if dest.input(&edge.dest_input).is_none() {
                report.error(
                    IssueCode::UnknownPort,
                    locus(),
                    format!("node {} has no input `{}`", dest.id, edge.dest_input),
                );
            } else {
                *feeds.entry((dest.id, edge.dest_input.as_str())).or_default() += 1;
            }
        }
    }

    if let Some(cycle) = plan.find_cycle() {
        let ids: Vec<String> = cycle.iter().map(|n| n.to_string()).collect();
        report.error(
            IssueCode::Cycle,
            Locus::Nodes { nodes: cycle },
            format!("cycle through nodes {}", ids.join(" -> ")),
        );
    }

    for node in plan.nodes() {
        for slot in &node.inputs {
            let fed = feeds.get(&(node.id, slot.name.as_str())).copied().unwrap_or(0);
            let locus = || Locus::Port {
                node: node.id,
                port: slot.name.clone(),
            };
            match (fed, slot.value.is_some()) {
                (0, false) => report.warn(
                    IssueCode::UnboundInput,
                    locus(),
                    "input has neither a value nor a feeding edge",
                ),
                (n, _) if n > 1 => report.warn(
                    IssueCode::FanIn,
                    locus(),
                    format!("{n} edges feed this input; the last finished source wins"),
                ),
                _ => {}
            }
            // execution copies edge values into slots, so only never-run nodes count
            if fed > 0 && slot.value.is_some() && node.status == NodeStatus::Pending {
                report.warn(
                    IssueCode::PreboundEdgeInput,
                    locus(),
                    "edge-fed input also carries a static value",
                );
            }
        }
    }

    if plan.nodes().len() < 2 {
        report.warn(
            IssueCode::TooFewNodes,
            Locus::Plan,
            format!("plan has {} node(s); at least 2 expected", plan.nodes().len()),
        );
    }
    let sinks = plan.sinks();
    if sinks.len() > 1 {
        report.warn(
            IssueCode::MultipleSinks,
            Locus::Nodes { nodes: sinks.clone() },
            format!("{} nodes have no outgoing edge; the largest id gives the answer", sinks.len()),
        );
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{DataEdge, TaskNode};

    fn chain() -> PlanGraph {
        PlanGraph::new(
            "what is 3 plus 4, doubled",
            vec![
                TaskNode::new(1, "identify_operands", "")
                    .with_input("query", Some("what is 3 plus 4".into()))
                    .with_output("operands"),
                TaskNode::new(2, "add", "").with_input("numbers", None).with_output("sum"),
                TaskNode::new(3, "multiply", "")
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

    fn with_edges(plan: &PlanGraph, edges: Vec<DataEdge>) -> PlanGraph {
        PlanGraph::new(plan.query(), plan.nodes().to_vec(), edges)
    }

    #[test]
    fn valid_chain_has_no_issues() {
        let report = validate(&chain(), &Registry::builtin());
        assert!(report.errors.is_empty(), "{}", report.render());
        assert!(report.warnings.is_empty(), "{}", report.render());
    }

    #[test]
    fn dangling_edge() {
        let mut edges = chain().edges().to_vec();
        edges.push(DataEdge::new(2, "sum", 99, "x"));
        let report = validate(&with_edges(&chain(), edges), &Registry::builtin());
        assert!(report.has_error(IssueCode::DanglingEdge));
    }

    #[test]
    fn cycle_lists_its_nodes() {
        let mut edges = chain().edges().to_vec();
        edges.push(DataEdge::new(3, "product", 1, "query"));
        let report = validate(&with_edges(&chain(), edges), &Registry::builtin());
        let cycle = report.errors.iter().find(|i| i.code == IssueCode::Cycle).unwrap();
        assert_eq!(
            cycle.locus,
            Locus::Nodes {
                nodes: vec![NodeId(1), NodeId(2), NodeId(3)]
            }
        );
    }

    #[test]
    fn unknown_agent_and_port() {
        let mut nodes = chain().nodes().to_vec();
        nodes[1].agent = "teleport".into();
        let mut edges = chain().edges().to_vec();
        edges.push(DataEdge::new(1, "nope", 3, "factor"));
        let report = validate(&PlanGraph::new("", nodes, edges), &Registry::builtin());
        assert!(report.has_error(IssueCode::UnknownAgent));
        assert!(report.has_error(IssueCode::UnknownPort));
    }

    #[test]
    fn duplicate_id_and_port() {
        let mut nodes = chain().nodes().to_vec();
        nodes.push(TaskNode::new(2, "add", "").with_input("a", Some(1.0.into())).with_input("a", Some(1.0.into())).with_output("s"));
        let report = validate(&PlanGraph::new("", nodes, chain().edges().to_vec()), &Registry::builtin());
        assert!(report.has_error(IssueCode::DuplicateId));
        assert!(report.has_error(IssueCode::DuplicatePort));
    }

    #[test]
    fn unbound_input_and_single_node_are_warnings() {
        let plan = PlanGraph::new(
            "",
            vec![TaskNode::new(1, "add", "").with_input("a", None).with_output("sum")],
            vec![],
        );
        let report = validate(&plan, &Registry::builtin());
        assert!(report.is_ok());
        assert!(report.has_warning(IssueCode::UnboundInput));
        assert!(report.has_warning(IssueCode::TooFewNodes));
    }

    #[test]
    fn fan_in_and_prebound_warnings() {
        let mut nodes = chain().nodes().to_vec();
        nodes[2].inputs[0].value = Some(1.0.into());
        let mut edges = chain().edges().to_vec();
        edges.push(DataEdge::new(1, "operands", 3, "x"));
        let report = validate(&PlanGraph::new("", nodes, edges), &Registry::builtin());
        assert!(report.is_ok());
        assert!(report.has_warning(IssueCode::FanIn));
        assert!(report.has_warning(IssueCode::PreboundEdgeInput));
    }

    #[test]
    fn extra_sink_warns() {
        let mut nodes = chain().nodes().to_vec();
        nodes.push(TaskNode::new(4, "concat", "").with_input("parts", Some("x".into())).with_output("text"));
        let report = validate(&PlanGraph::new("", nodes, chain().edges().to_vec()), &Registry::builtin());
        assert!(report.has_warning(IssueCode::MultipleSinks));
    }
}
