//! Plan comparison: labeled isomorphism, graph edit distance, and execution
//! accuracy.
//!
//! Graphs are compared by agent label and by the number of edges per
//! ordered node pair. Port names and task text are ignored.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::executor::{answers_match, ExecError, Executor};
use crate::plan::PlanGraph;
use crate::value::Value;

/// Largest graph (in nodes) for which [`ged`] searches exhaustively.
pub const EXACT_GED_LIMIT: usize = 8;

/// A plan reduced to what the metrics look at.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub labels: Vec<String>,
    /// Edge multiplicity per ordered pair of node indices.
    pub edges: BTreeMap<(usize, usize), u32>,
}

impl LabeledGraph {
    pub fn from_plan(plan: &PlanGraph) -> Self {
        let index: BTreeMap<_, _> = plan.nodes().iter().enumerate().map(|(i, n)| (n.id, i)).collect();
        let mut edges = BTreeMap::new();
        for e in plan.edges() {
            if let (Some(&s), Some(&d)) = (index.get(&e.src_node), index.get(&e.dest_node)) {
                *edges.entry((s, d)).or_insert(0) += 1;
            }
        }
        LabeledGraph { labels: plan.nodes().iter().map(|n| n.agent.clone()).collect(), edges }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, u: usize, v: usize) -> u32 {
        self.edges.get(&(u, v)).copied().unwrap_or(0)
    }

    fn edge_total(&self) -> u32 {
        self.edges.values().sum()
    }

    fn degrees(&self) -> Vec<(u32, u32)> {
        let mut d = vec![(0, 0); self.len()];
        for (&(u, v), &c) in &self.edges {
            d[u].0 += c;
            d[v].1 += c;
        }
        d
    }
}

/// True iff a bijection between nodes preserves agent labels and edge
/// multiplicities.
pub fn is_isomorphic(a: &PlanGraph, b: &PlanGraph) -> bool {
    graphs_isomorphic(&LabeledGraph::from_plan(a), &LabeledGraph::from_plan(b))
}

pub fn graphs_isomorphic(a: &LabeledGraph, b: &LabeledGraph) -> bool {
    if a.len() != b.len() || a.edges.len() != b.edges.len() || a.edge_total() != b.edge_total() {
        return false;
    }
    let mut la = a.labels.clone();
    let mut lb = b.labels.clone();
    la.sort();
    lb.sort();
    if la != lb {
        return false;
    }
    let (da, db) = (a.degrees(), b.degrees());
    let mut map = vec![usize::MAX; a.len()];
    let mut used = vec![false; b.len()];
    extend_iso(a, b, &da, &db, 0, &mut map, &mut used)
}

fn extend_iso(
    a: &LabeledGraph,
    b: &LabeledGraph,
    da: &[(u32, u32)],
    db: &[(u32, u32)],
    i: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    if i == a.len() {
        return true;
    }
    for j in 0..b.len() {
        if used[j] || a.labels[i] != b.labels[j] || da[i] != db[j] || a.count(i, i) != b.count(j, j) {
            continue;
        }
        let consistent = (0..i).all(|k| {
            a.count(i, k) == b.count(j, map[k]) && a.count(k, i) == b.count(map[k], j)
        });
        if !consistent {
            continue;
        }
        map[i] = j;
        used[j] = true;
        if extend_iso(a, b, da, db, i + 1, map, used) {
            return true;
        }
        used[j] = false;
    }
    map[i] = usize::MAX;
    false
}

/// Edit costs. The default is the unit model with label-sensitive
/// substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub node_insert: u32,
    pub node_delete: u32,
    /// Charged when a mapped node's agent differs.
    pub node_substitute: u32,
    pub edge_insert: u32,
    pub edge_delete: u32,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { node_insert: 1, node_delete: 1, node_substitute: 1, edge_insert: 1, edge_delete: 1 }
    }
}

impl CostModel {
    fn edge_diff(&self, have: u32, want: u32) -> u32 {
        if have > want {
            (have - want) * self.edge_delete
        } else {
            (want - have) * self.edge_insert
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ged {
    pub value: u32,
    /// False when the graphs were too large for exhaustive search and
    /// `value` is an upper bound.
    pub exact: bool,
}

pub fn ged(a: &PlanGraph, b: &PlanGraph, cost: &CostModel) -> Ged {
    graph_ged(&LabeledGraph::from_plan(a), &LabeledGraph::from_plan(b), cost)
}

/// Marks a deleted node in a mapping.
pub const DELETED: usize = usize::MAX;

/// Total cost of a complete mapping of `a`'s nodes (index → `b` index or
/// [`DELETED`]).
pub fn mapping_cost(a: &LabeledGraph, b: &LabeledGraph, map: &[usize], cost: &CostModel) -> u32 {
    let mut total = 0;
    let mut hit = vec![false; b.len()];
    for (i, &j) in map.iter().enumerate() {
        if j == DELETED {
            total += cost.node_delete;
        } else {
            hit[j] = true;
            if a.labels[i] != b.labels[j] {
                total += cost.node_substitute;
            }
        }
    }
    total += hit.iter().filter(|h| !**h).count() as u32 * cost.node_insert;
    for (&(u, v), &c) in &a.edges {
        if map[u] == DELETED || map[v] == DELETED {
            total += c * cost.edge_delete;
        }
    }
    for (&(x, y), &c) in &b.edges {
        let pre_x = map.iter().position(|&j| j == x);
        let pre_y = map.iter().position(|&j| j == y);
        match (pre_x, pre_y) {
            (Some(u), Some(v)) => total += cost.edge_diff(a.count(u, v), c),
            _ => total += c * cost.edge_insert,
        }
    }
    // Pairs present only in `a` between mapped nodes.
    for (&(u, v), &c) in &a.edges {
        if map[u] != DELETED && map[v] != DELETED && b.count(map[u], map[v]) == 0 {
            total += c * cost.edge_delete;
        }
    }
    total
}

#[derive(Clone, Eq, PartialEq)]
struct State {
    f: u32,
    g: u32,
    map: Vec<usize>,
}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on f, deeper states first on ties.
        other.f.cmp(&self.f).then(self.map.len().cmp(&other.map.len()))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* over partial mappings of `a`'s nodes in index order.
pub fn graph_ged(a: &LabeledGraph, b: &LabeledGraph, cost: &CostModel) -> Ged {
    if a.len().max(b.len()) > EXACT_GED_LIMIT {
        return Ged { value: greedy_upper_bound(a, b, cost), exact: false };
    }
    let mut heap = BinaryHeap::new();
    heap.push(State { f: heuristic(a, b, &[], cost), g: 0, map: Vec::new() });
    while let Some(state) = heap.pop() {
        if state.map.len() == a.len() {
            return Ged { value: state.g + completion_cost(a, b, &state.map, cost), exact: true };
        }
        let i = state.map.len();
        for j in (0..b.len()).filter(|j| !state.map.contains(j)).chain([DELETED]) {
            let g = state.g + step_cost(a, b, &state.map, i, j, cost);
            let mut map = state.map.clone();
            map.push(j);
            let h = if map.len() == a.len() {
                completion_cost(a, b, &map, cost)
            } else {
                heuristic(a, b, &map, cost)
            };
            heap.push(State { f: g + h, g, map });
        }
    }
    unreachable!("the all-deleted mapping is always reachable")
}

/// Cost added by deciding node `i` → `j`, including edges to earlier nodes.
fn step_cost(a: &LabeledGraph, b: &LabeledGraph, map: &[usize], i: usize, j: usize, cost: &CostModel) -> u32 {
    let mut c = if j == DELETED {
        cost.node_delete
    } else if a.labels[i] != b.labels[j] {
        cost.node_substitute
    } else {
        0
    };
    let pair = |u: usize, v: usize, x: usize, y: usize| {
        let have = a.count(u, v);
        if x == DELETED || y == DELETED {
            have * cost.edge_delete
        } else {
            cost.edge_diff(have, b.count(x, y))
        }
    };
    c += pair(i, i, j, j);
    for (k, &m) in map.iter().enumerate() {
        c += pair(i, k, j, m) + pair(k, i, m, j);
    }
    c
}

/// Once every `a` node is decided: insert unused `b` nodes and the edges
/// touching them.
fn completion_cost(a: &LabeledGraph, b: &LabeledGraph, map: &[usize], cost: &CostModel) -> u32 {
    let _ = a;
    let used = |x: usize| map.contains(&x);
    let nodes = (0..b.len()).filter(|x| !used(*x)).count() as u32 * cost.node_insert;
    let edges: u32 = b
        .edges
        .iter()
        .filter(|((x, y), _)| !used(*x) || !used(*y))
        .map(|(_, c)| c * cost.edge_insert)
        .sum();
    nodes + edges
}

/// Admissible: label mismatch bound over undecided nodes plus the edge
/// count gap over edges not yet accounted for.
fn heuristic(a: &LabeledGraph, b: &LabeledGraph, map: &[usize], cost: &CostModel) -> u32 {
    let rest_a: Vec<usize> = (map.len()..a.len()).collect();
    let rest_b: Vec<usize> = (0..b.len()).filter(|x| !map.contains(x)).collect();
    let mut labels: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for &i in &rest_a {
        labels.entry(a.labels[i].as_str()).or_default().0 += 1;
    }
    for &j in &rest_b {
        labels.entry(b.labels[j].as_str()).or_default().1 += 1;
    }
    let common: usize = labels.values().map(|(x, y)| (*x).min(*y)).sum();
    let (na, nb) = (rest_a.len(), rest_b.len());
    let size = if na > nb {
        (na - nb) as u32 * cost.node_delete
    } else {
        (nb - na) as u32 * cost.node_insert
    };
    let mismatch = (na.min(nb) - common) as u32
        * cost.node_substitute.min(cost.node_insert + cost.node_delete);

    let decided = map.len();
    let ea: u32 = a
        .edges
        .iter()
        .filter(|((u, v), _)| *u >= decided || *v >= decided)
        .map(|(_, c)| c)
        .sum();
    let eb: u32 = b
        .edges
        .iter()
        .filter(|((x, y), _)| !map.contains(x) || !map.contains(y))
        .map(|(_, c)| c)
        .sum();
    let edges = if ea > eb {
        (ea - eb) * cost.edge_delete.min(cost.edge_insert)
    } else {
        (eb - ea) * cost.edge_delete.min(cost.edge_insert)
    };
    size + mismatch + edges
}

/// Node-by-node cheapest choice; any complete mapping bounds GED from above.
fn greedy_upper_bound(a: &LabeledGraph, b: &LabeledGraph, cost: &CostModel) -> u32 {
    let mut map = Vec::with_capacity(a.len());
    let mut g = 0;
    for i in 0..a.len() {
        let (j, c) = (0..b.len())
            .filter(|j| !map.contains(j))
            .chain([DELETED])
            .map(|j| (j, step_cost(a, b, &map, i, j, cost)))
            .min_by_key(|(_, c)| *c)
            .expect("deletion is always available");
        g += c;
        map.push(j);
    }
    g + completion_cost(a, b, &map, cost)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccuracyReason {
    InvalidPlan,
    NodeFailure,
    NoAnswer,
    Mismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub score: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<AccuracyReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<Value>,
}

/// Executes `refined` and compares its final answer to `gold`.
pub fn execution_accuracy(refined: &PlanGraph, executor: &Executor, gold: &Value) -> Accuracy {
    let fail = |reason, answer| Accuracy { score: 0, reason: Some(reason), answer };
    let (_, trace) = match executor.execute_all(refined) {
        Ok(run) => run,
        Err(ExecError::InvalidPlan(_)) => return fail(AccuracyReason::InvalidPlan, None),
        Err(_) => return fail(AccuracyReason::NodeFailure, None),
    };
    match trace.final_answer {
        Some(answer) if answers_match(&answer, gold) => Accuracy { score: 1, reason: None, answer: Some(answer) },
        Some(answer) => fail(AccuracyReason::Mismatch, Some(answer)),
        None if trace.has_failures() => fail(AccuracyReason::NodeFailure, None),
        None => fail(AccuracyReason::NoAnswer, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit::{apply_edit, EditOp};
    use crate::plan::{tests::chain3, NodeId};
    use crate::registry::Registry;
    use std::sync::Arc;

    fn unit() -> CostModel {
        CostModel::default()
    }

    #[test]
    fn ged_examples() {
        let p = chain3();
        assert_eq!(ged(&p, &p, &unit()), Ged { value: 0, exact: true });
        let relabeled = apply_edit(&p, &EditOp::SetAgent { node: NodeId(2), agent: "subtract".into() }).unwrap();
        assert_eq!(ged(&p, &relabeled, &unit()).value, 1);
        let minus = apply_edit(&p, &EditOp::RemoveNode { node: NodeId(2) }).unwrap();
        assert_eq!(ged(&p, &minus, &unit()).value, 3);
        assert_eq!(ged(&minus, &p, &unit()).value, 3);
    }

    #[test]
    fn iso_examples() {
        let p = chain3();
        assert!(is_isomorphic(&p, &p));
        let relabeled = apply_edit(&p, &EditOp::SetAgent { node: NodeId(2), agent: "subtract".into() }).unwrap();
        assert!(!is_isomorphic(&p, &relabeled));
        let extra = apply_edit(&p, &EditOp::add_edge(1, "operands", 3, "x")).unwrap();
        assert!(!is_isomorphic(&p, &extra));
    }

    #[test]
    fn mapping_cost_matches_search_on_identity() {
        let a = LabeledGraph::from_plan(&chain3());
        assert_eq!(mapping_cost(&a, &a, &[0, 1, 2], &unit()), 0);
        assert_eq!(mapping_cost(&a, &a, &[DELETED, DELETED, DELETED], &unit()), 3 + 3 + 2 + 2);
    }

    #[test]
    fn large_graphs_report_upper_bound() {
        let n = EXACT_GED_LIMIT + 1;
        let g = LabeledGraph { labels: vec!["add".into(); n], edges: BTreeMap::new() };
        let r = graph_ged(&g, &g, &unit());
        assert!(!r.exact);
        assert_eq!(r.value, 0);
    }

    #[test]
    fn accuracy_examples() {
        let exec = Executor::new(Arc::new(Registry::builtin()));
        let plan = crate::plan::parse_plan(
            r#"{"nodes":[{"id":1,"name":"identify_operands","task":"","input":[["query","3 plus 4"]],"output":["operands"]},{"id":2,"name":"add","task":"","input":[["numbers",null]],"output":["sum"]}],"edges":[{"src_node":1,"dest_node":2,"src_output":"operands","dest_input":"numbers"}]}"#,
        )
        .unwrap();
        assert_eq!(execution_accuracy(&plan, &exec, &Value::Number(7.0)).score, 1);
        let wrong = execution_accuracy(&plan, &exec, &Value::Number(8.0));
        assert_eq!((wrong.score, wrong.reason), (0, Some(AccuracyReason::Mismatch)));
        let broken = apply_edit(&plan, &EditOp::SetAgent { node: NodeId(2), agent: "divide".into() }).unwrap();
        let broken = apply_edit(
            &broken,
            &EditOp::SetInputValue { node: NodeId(1), name: "query".into(), value: Some(Value::Text("3 over 0".into())) },
        )
        .unwrap();
        let failed = execution_accuracy(&broken, &exec, &Value::Number(7.0));
        assert_eq!(failed.reason, Some(AccuracyReason::NodeFailure));
        let invalid = apply_edit(&plan, &EditOp::SetAgent { node: NodeId(2), agent: "nope".into() }).unwrap();
        assert_eq!(execution_accuracy(&invalid, &exec, &Value::Number(7.0)).reason, Some(AccuracyReason::InvalidPlan));
    }
}
