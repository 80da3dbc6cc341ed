//! Plan execution: whole-plan runs, single-node runs, stale resumption and
//! manual output overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::agents::{execute_agent, AgentContext, AgentError, AgentInvocation, AgentResult, HttpMode};
use crate::lm::LanguageModel;
use crate::plan::{NodeId, NodeStatus, PlanGraph};
use crate::registry::Registry;
use crate::validate::{validate, ValidationReport};
use crate::value::Value;

/// Source of transition timestamps.
pub trait Clock: Send + Sync {
    fn now(&self) -> u64;
}

/// Counts ticks from 1. Makes traces byte-reproducible.
#[derive(Debug, Default)]
pub struct LogicalClock(AtomicU64);

impl Clock for LogicalClock {
    fn now(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst) + 1
    }
}

/// Milliseconds since the Unix epoch.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub status: NodeStatus,
    pub at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: NodeId,
    pub agent: String,
    pub transitions: Vec<Transition>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub outputs: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<String>,
}

impl NodeRecord {
    pub fn final_status(&self) -> Option<NodeStatus> {
        self.transitions.last().map(|t| t.status)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub records: Vec<NodeRecord>,
    pub final_answer: Option<Value>,
}

impl ExecutionTrace {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn executed(&self) -> Vec<NodeId> {
        self.records.iter().map(|r| r.node).collect()
    }

    pub fn failures(&self) -> impl Iterator<Item = &NodeRecord> {
        self.records.iter().filter(|r| {
            matches!(
                r.final_status(),
                Some(NodeStatus::Failed | NodeStatus::FailedUpstream)
            )
        })
    }

    pub fn has_failures(&self) -> bool {
        self.failures().next().is_some()
    }

    /// One JSON object per node record, then a closing line holding the
    /// final answer.
    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("record serializes"));
            out.push('\n');
        }
        let last = serde_json::json!({ "final_answer": self.final_answer.as_ref().map(Value::to_json) });
        out.push_str(&last.to_string());
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideRecord {
    pub node: NodeId,
    pub output: String,
    pub value: Value,
    pub supersedes: Option<Value>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("plan is not executable:\n{}", .0.render())]
    InvalidPlan(ValidationReport),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {node} has no output `{output}`")]
    UnknownOutput { node: NodeId, output: String },
    #[error("node {node} has unbound inputs: {}", missing.join(", "))]
    UnboundInput { node: NodeId, missing: Vec<String> },
    #[error("node {node} failed: {cause}")]
    NodeFailure {
        node: NodeId,
        cause: AgentError,
        /// The plan with the node marked failed.
        plan: Box<PlanGraph>,
    },
}

/// The output the plan is judged by: first output of the unique sink, or of
/// the largest-id sink when there are several.
pub fn final_answer(plan: &PlanGraph) -> Option<Value> {
    let sink = plan.sinks().into_iter().max()?;
    let node = plan.node(sink)?;
    if !node.status.has_usable_outputs() {
        return None;
    }
    node.outputs.first().and_then(|o| o.value.clone())
}

/// Relative tolerance for numeric answer comparison.
pub const ANSWER_TOLERANCE: f64 = 1e-6;

/// Numbers compare with relative tolerance; anything else by trimmed,
/// case-insensitive text.
pub fn answers_match(got: &Value, want: &Value) -> bool {
    match (got.as_number(), want.as_number()) {
        (Some(a), Some(b)) => {
            let scale = a.abs().max(b.abs());
            (a - b).abs() <= ANSWER_TOLERANCE * scale || a == b
        }
        _ => got.render().trim().to_lowercase() == want.render().trim().to_lowercase(),
    }
}

pub type StatusObserver = Arc<dyn Fn(NodeId, NodeStatus) + Send + Sync>;

/// Runs plans against a registry. Cheap to clone.
#[derive(Clone)]
pub struct Executor {
    registry: Arc<Registry>,
    lm: Option<Arc<dyn LanguageModel>>,
    http: HttpMode,
    clock: Arc<dyn Clock>,
    parallel: bool,
    timeout: Option<Duration>,
    observer: Option<StatusObserver>,
}

type Outcome = Result<AgentResult, AgentError>;

impl Executor {
    pub fn new(registry: Arc<Registry>) -> Self {
        Executor {
            registry,
            lm: None,
            http: HttpMode::Disabled,
            clock: Arc::new(LogicalClock::default()),
            parallel: false,
            timeout: None,
            observer: None,
        }
    }

    pub fn with_lm(mut self, lm: Option<Arc<dyn LanguageModel>>) -> Self {
        self.lm = lm;
        self
    }

    pub fn with_http(mut self, http: HttpMode) -> Self {
        self.http = http;
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Run independent nodes of each dependency wave concurrently. Results
    /// are committed in topological order, so traces do not change.
    pub fn with_parallelism(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn with_timeout(mut self, timeout: Option<Duration>) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_observer(mut self, observer: Option<StatusObserver>) -> Self {
        self.observer = observer;
        self
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    fn notify(&self, node: NodeId, status: NodeStatus) {
        if let Some(observer) = &self.observer {
            observer(node, status);
        }
    }

    fn check(&self, plan: &PlanGraph) -> Result<Vec<NodeId>, ExecError> {
        let report = validate(plan, &self.registry);
        if !report.errors.is_empty() {
            return Err(ExecError::InvalidPlan(report));
        }
        plan.topo_order().map_err(|_| ExecError::InvalidPlan(report))
    }

    /// Runs every node except hand-overridden ones. Node failures do not
    /// abort: dependents become `failed_upstream`, other branches continue.
    pub fn execute_all(&self, plan: &PlanGraph) -> Result<(PlanGraph, ExecutionTrace), ExecError> {
        let order = self.check(plan)?;
        let targets: BTreeSet<NodeId> = plan
            .nodes()
            .iter()
            .filter(|n| n.status != NodeStatus::Overridden)
            .map(|n| n.id)
            .collect();
        Ok(self.run_set(plan, &order, &targets))
    }

    /// Re-runs exactly the stale and failed-upstream nodes.
    pub fn resume_stale(&self, plan: &PlanGraph) -> Result<(PlanGraph, ExecutionTrace), ExecError> {
        let order = self.check(plan)?;
        let targets: BTreeSet<NodeId> = plan
            .nodes()
            .iter()
            .filter(|n| matches!(n.status, NodeStatus::Stale | NodeStatus::FailedUpstream))
            .map(|n| n.id)
            .collect();
        Ok(self.run_set(plan, &order, &targets))
    }

    /// Runs one node from whatever values are currently available. Its
    /// dependents are marked stale.
    pub fn execute_node(&self, plan: &PlanGraph, id: NodeId) -> Result<(PlanGraph, NodeRecord), ExecError> {
        let node = plan.node(id).ok_or(ExecError::UnknownNode(id))?;
        let spec = self.registry.get(&node.agent).ok_or_else(|| {
            ExecError::InvalidPlan(validate(plan, &self.registry))
        })?;
        let mut work = plan.clone();
        let mut missing = Vec::new();
        for slot in &node.inputs {
            let fed = bind_from_edges(plan, id, &slot.name, &BTreeMap::new());
            match fed {
                Some(v) => work.node_mut(id).expect("exists").input_mut(&slot.name).expect("exists").value = Some(v),
                None if slot.value.is_some() => {}
                None => missing.push(slot.name.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(ExecError::UnboundInput { node: id, missing });
        }

        let mut record = self.start_record(id, &node.agent);
        let invocation = AgentInvocation::from_node(spec, work.node(id).expect("exists"));
        let outcome = invocation.and_then(|inv| self.invoke(inv));
        let dependents = plan.dependents(id).unwrap_or_default();
        match outcome {
            Ok(result) => {
                self.commit_success(&mut work, id, &mut record, result);
                work.mark_stale(dependents);
                Ok((work, record))
            }
            Err(cause) => {
                self.commit_failure(&mut work, id, &mut record, &cause);
                Err(ExecError::NodeFailure { node: id, cause, plan: Box::new(work) })
            }
        }
    }

    /// Replaces one output value by hand. The node becomes `overridden` and
    /// its dependents stale.
    pub fn override_output(
        &self,
        plan: &PlanGraph,
        id: NodeId,
        output: &str,
        value: Value,
    ) -> Result<(PlanGraph, OverrideRecord), ExecError> {
        override_output(plan, id, output, value)
    }

    fn start_record(&self, id: NodeId, agent: &str) -> NodeRecord {
        self.notify(id, NodeStatus::Running);
        NodeRecord {
            node: id,
            agent: agent.to_string(),
            transitions: vec![Transition { status: NodeStatus::Running, at: self.clock.now() }],
            outputs: BTreeMap::new(),
            error: None,
            log: None,
        }
    }

    fn commit_success(&self, plan: &mut PlanGraph, id: NodeId, record: &mut NodeRecord, result: AgentResult) {
        let node = plan.node_mut(id).expect("exists");
        for slot in &mut node.outputs {
            slot.value = result.outputs.get(&slot.name).cloned();
        }
        node.status = NodeStatus::Done;
        record.transitions.push(Transition { status: NodeStatus::Done, at: self.clock.now() });
        record.outputs = result.outputs;
        record.log = Some(result.trace);
        self.notify(id, NodeStatus::Done);
    }

    fn commit_failure(&self, plan: &mut PlanGraph, id: NodeId, record: &mut NodeRecord, cause: &AgentError) {
        let node = plan.node_mut(id).expect("exists");
        node.clear_outputs();
        node.status = NodeStatus::Failed;
        record.transitions.push(Transition { status: NodeStatus::Failed, at: self.clock.now() });
        record.error = Some(cause.to_string());
        self.notify(id, NodeStatus::Failed);
    }

    fn invoke(&self, invocation: AgentInvocation) -> Outcome {
        let Some(limit) = self.timeout else {
            let ctx = AgentContext::new(self.lm.as_deref(), Some(&self.http));
            return execute_agent(&invocation, ctx);
        };
        let (tx, rx) = mpsc::channel();
        let lm = self.lm.clone();
        let http = self.http.clone();
        let name = invocation.spec.name.clone();
        std::thread::spawn(move || {
            let ctx = AgentContext::new(lm.as_deref(), Some(&http));
            let _ = tx.send(execute_agent(&invocation, ctx));
        });
        rx.recv_timeout(limit).unwrap_or(Err(AgentError::Timeout(name)))
    }

    fn run_set(
        &self,
        plan: &PlanGraph,
        order: &[NodeId],
        targets: &BTreeSet<NodeId>,
    ) -> (PlanGraph, ExecutionTrace) {
        let mut work = plan.clone();
        let mut trace = ExecutionTrace::default();
        // Position in this run's commit order; later finishers win fan-in.
        let mut finished: BTreeMap<NodeId, usize> = BTreeMap::new();
        let scheduled: Vec<NodeId> = order.iter().copied().filter(|id| targets.contains(id)).collect();
        for id in &scheduled {
            work.node_mut(*id).expect("exists").status = NodeStatus::Pending;
        }

        for wave in waves(plan, &scheduled) {
            // Bind inputs and decide who can run, in topo order.
            let mut ready: Vec<(NodeId, Result<AgentInvocation, AgentError>)> = Vec::new();
            for id in wave {
                let blocked = plan.in_edges(id).any(|e| {
                    !work.node(e.src_node).is_some_and(|n| n.status.has_usable_outputs())
                });
                if blocked {
                    work.node_mut(id).expect("exists").status = NodeStatus::FailedUpstream;
                    work.node_mut(id).expect("exists").clear_outputs();
                    self.notify(id, NodeStatus::FailedUpstream);
                    let at = self.clock.now();
                    trace.records.push(NodeRecord {
                        node: id,
                        agent: plan.node(id).expect("exists").agent.clone(),
                        transitions: vec![Transition { status: NodeStatus::FailedUpstream, at }],
                        outputs: BTreeMap::new(),
                        error: Some("upstream node did not complete".into()),
                        log: None,
                    });
                    continue;
                }
                let names: Vec<String> =
                    work.node(id).expect("exists").inputs.iter().map(|s| s.name.clone()).collect();
                for name in names {
                    if let Some(v) = bind_from_edges(&work, id, &name, &finished) {
                        work.node_mut(id).expect("exists").input_mut(&name).expect("exists").value = Some(v);
                    }
                }
                let node = work.node(id).expect("exists");
                let spec = self.registry.get(&node.agent).expect("validated");
                ready.push((id, AgentInvocation::from_node(spec, node)));
            }

            let outcomes: Vec<(NodeId, Outcome)> = if self.parallel && ready.len() > 1 {
                let results: Vec<Outcome> = std::thread::scope(|s| {
                    let handles: Vec<_> = ready
                        .iter()
                        .map(|(_, inv)| {
                            let inv = inv.clone();
                            s.spawn(move || inv.and_then(|inv| self.invoke(inv)))
                        })
                        .collect();
                    handles.into_iter().map(|h| h.join().expect("agent thread panicked")).collect()
                });
                ready.iter().map(|(id, _)| *id).zip(results).collect()
            } else {
                ready
                    .into_iter()
                    .map(|(id, inv)| (id, inv.and_then(|inv| self.invoke(inv))))
                    .collect()
            };

            for (id, outcome) in outcomes {
                let mut record = self.start_record(id, &plan.node(id).expect("exists").agent);
                match outcome {
                    Ok(result) => self.commit_success(&mut work, id, &mut record, result),
                    Err(cause) => self.commit_failure(&mut work, id, &mut record, &cause),
                }
                finished.insert(id, finished.len() + 1);
                trace.records.push(record);
            }
        }
        trace.final_answer = final_answer(&work);
        (work, trace)
    }
}

/// Standalone form of [`Executor::override_output`].
pub fn override_output(
    plan: &PlanGraph,
    id: NodeId,
    output: &str,
    value: Value,
) -> Result<(PlanGraph, OverrideRecord), ExecError> {
    let mut work = plan.clone();
    let node = work.node_mut(id).ok_or(ExecError::UnknownNode(id))?;
    let slot = node.output_mut(output).ok_or_else(|| ExecError::UnknownOutput {
        node: id,
        output: output.to_string(),
    })?;
    let supersedes = slot.value.replace(value.clone());
    node.status = NodeStatus::Overridden;
    let dependents = plan.dependents(id).unwrap_or_default();
    work.mark_stale(dependents);
    Ok((
        work,
        OverrideRecord { node: id, output: output.to_string(), value, supersedes },
    ))
}

/// Value for an edge-fed input: among sources holding a value, the one that
/// finished last in this run; sources from earlier runs rank by id.
fn bind_from_edges(
    plan: &PlanGraph,
    id: NodeId,
    input: &str,
    finished: &BTreeMap<NodeId, usize>,
) -> Option<Value> {
    plan.in_edges(id)
        .filter(|e| e.dest_input == input)
        .filter_map(|e| {
            let value = plan.node(e.src_node)?.output(&e.src_output)?.value.clone()?;
            Some(((finished.get(&e.src_node).copied().unwrap_or(0), e.src_node), value))
        })
        .max_by_key(|(rank, _)| *rank)
        .map(|(_, v)| v)
}

/// Splits `scheduled` (already topologically ordered) into waves whose
/// members do not depend on each other.
fn waves(plan: &PlanGraph, scheduled: &[NodeId]) -> Vec<Vec<NodeId>> {
    let mut level: BTreeMap<NodeId, usize> = BTreeMap::new();
    for id in scheduled {
        let l = plan
            .predecessors(*id)
            .iter()
            .filter_map(|p| level.get(p).map(|l| l + 1))
            .max()
            .unwrap_or(0);
        level.insert(*id, l);
    }
    let depth = level.values().max().map_or(0, |d| d + 1);
    let mut out = vec![Vec::new(); depth];
    for id in scheduled {
        out[level[id]].push(*id);
    }
    out
}
