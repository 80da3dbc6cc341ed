//! Generators and independent oracles shared by the integration tests and
//! the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use planweave_core::plan::{DataEdge, NodeId, PlanGraph, TaskNode};
use planweave_core::{apply_edit, EditOp, Registry, Value};

pub const LABELS: [&str; 3] = ["add", "multiply", "subtract"];

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn eval_registry() -> Registry {
    Registry::load(&data("registry.json")).expect("registry")
}

fn node(id: u32, agent: &str) -> TaskNode {
    TaskNode::new(id, agent, format!("step {id}"))
        .with_input("a", Some(Value::from(f64::from(id))))
        .with_input("b", Some(Value::from(2.0)))
        .with_output("out")
}

/// A random DAG with edges from lower to higher ids. Each input is fed by
/// at most one edge, and both inputs may come from the same node.
pub fn random_plan(rng: &mut ChaCha8Rng, max_nodes: u32) -> PlanGraph {
    let n = rng.gen_range(1..=max_nodes);
    let nodes: Vec<TaskNode> = (1..=n).map(|id| node(id, LABELS.choose(rng).unwrap())).collect();
    let mut edges = Vec::new();
    for dest in 2..=n {
        for input in ["a", "b"] {
            if rng.gen_bool(0.5) {
                edges.push(DataEdge::new(rng.gen_range(1..dest), "out", dest, input));
            }
        }
    }
    PlanGraph::new("random", nodes, edges)
}

/// Applies up to `steps` random structural edits, keeping at most
/// `max_nodes` nodes. Rejected edits are skipped.
pub fn mutate(rng: &mut ChaCha8Rng, plan: &PlanGraph, steps: usize, max_nodes: usize) -> PlanGraph {
    let mut current = plan.clone();
    for _ in 0..steps {
        let ids = current.node_ids();
        let pick = |rng: &mut ChaCha8Rng| ids.choose(rng).map(|id| id.0);
        let op = match rng.gen_range(0..5) {
            0 if ids.len() < max_nodes => EditOp::AddNode {
                node: planweave_core::edit::NewNode::from_node(&node(current.next_id().0, LABELS.choose(rng).unwrap())),
            },
            1 if ids.len() > 1 => EditOp::RemoveNode { node: NodeId(pick(rng).unwrap()) },
            2 => match current.edges().choose(rng) {
                Some(e) => EditOp::RemoveEdge { edge: e.clone() },
                None => continue,
            },
            3 => match (pick(rng), pick(rng)) {
                (Some(s), Some(d)) => EditOp::add_edge(s, "out", d, ["a", "b"].choose(rng).unwrap()),
                _ => continue,
            },
            _ => match pick(rng) {
                Some(id) => EditOp::SetAgent { node: NodeId(id), agent: LABELS.choose(rng).unwrap().to_string() },
                None => continue,
            },
        };
        if let Ok(next) = apply_edit(&current, &op) {
            current = next;
        }
    }
    current
}

/// Renumbers node ids with a random bijection onto `1..=n`.
pub fn permute_ids(rng: &mut ChaCha8Rng, plan: &PlanGraph) -> PlanGraph {
    let mut fresh: Vec<u32> = (1..=plan.nodes().len() as u32).collect();
    fresh.shuffle(rng);
    let map: BTreeMap<NodeId, u32> = plan.node_ids().into_iter().zip(fresh).collect();
    let nodes = plan
        .nodes()
        .iter()
        .map(|n| {
            let mut m = n.clone();
            m.id = NodeId(map[&n.id]);
            m
        })
        .collect();
    let edges = plan
        .edges()
        .iter()
        .map(|e| DataEdge {
            src_node: NodeId(map[&e.src_node]),
            dest_node: NodeId(map[&e.dest_node]),
            ..e.clone()
        })
        .collect();
    PlanGraph::new(plan.query(), nodes, edges)
}

/// Edge multiplicity per ordered (src, dest) position pair.
fn edge_counts(plan: &PlanGraph) -> BTreeMap<(usize, usize), u32> {
    let pos: BTreeMap<NodeId, usize> = plan.node_ids().into_iter().enumerate().map(|(i, id)| (id, i)).collect();
    let mut counts = BTreeMap::new();
    for e in plan.edges() {
        *counts.entry((pos[&e.src_node], pos[&e.dest_node])).or_insert(0) += 1;
    }
    counts
}

/// Exact unit-cost GED by enumerating every way to pair up nodes. Each
/// edit path induces such a pairing, and the cheapest path for a pairing
/// substitutes mismatched labels, deletes and inserts unpaired nodes, and
/// fixes edge counts pair by pair.
pub fn brute_force_ged(a: &PlanGraph, b: &PlanGraph) -> u32 {
    let la: Vec<&str> = a.nodes().iter().map(|n| n.agent.as_str()).collect();
    let lb: Vec<&str> = b.nodes().iter().map(|n| n.agent.as_str()).collect();
    let (ea, eb) = (edge_counts(a), edge_counts(b));
    let mut best = u32::MAX;
    let mut assignment: Vec<Option<usize>> = Vec::new();
    fn walk(
        i: usize,
        assignment: &mut Vec<Option<usize>>,
        la: &[&str],
        lb: &[&str],
        ea: &BTreeMap<(usize, usize), u32>,
        eb: &BTreeMap<(usize, usize), u32>,
        best: &mut u32,
    ) {
        if i == la.len() {
            *best = (*best).min(pairing_cost(assignment, la, lb, ea, eb));
            return;
        }
        for j in (0..lb.len()).map(Some).chain([None]) {
            if j.is_some() && assignment.contains(&j) {
                continue;
            }
            assignment.push(j);
            walk(i + 1, assignment, la, lb, ea, eb, best);
            assignment.pop();
        }
    }
    walk(0, &mut assignment, &la, &lb, &ea, &eb, &mut best);
    best
}

fn pairing_cost(
    assignment: &[Option<usize>],
    la: &[&str],
    lb: &[&str],
    ea: &BTreeMap<(usize, usize), u32>,
    eb: &BTreeMap<(usize, usize), u32>,
) -> u32 {
    let mut cost = 0;
    for (i, j) in assignment.iter().enumerate() {
        cost += match j {
            Some(j) if la[i] == lb[*j] => 0,
            _ => 1,
        };
    }
    cost += (0..lb.len()).filter(|j| !assignment.contains(&Some(*j))).count() as u32;
    let mut matched_b = BTreeMap::new();
    for (&(u, v), &c) in ea {
        match (assignment[u], assignment[v]) {
            (Some(x), Some(y)) => {
                let d = eb.get(&(x, y)).copied().unwrap_or(0);
                matched_b.insert((x, y), ());
                cost += c.abs_diff(d);
            }
            _ => cost += c,
        }
    }
    for (pair, &c) in eb {
        if !matched_b.contains_key(pair) {
            cost += c;
        }
    }
    cost
}
