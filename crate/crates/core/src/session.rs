//! Chat sessions: message routing, serialized edits, ordered events and
//! on-disk persistence.
//!
//! Each session lives in its own directory holding `state.json` (rewritten
//! atomically after every change) and `events.jsonl` (append-only).

use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::edit::{apply_edit, EditError, EditOp, Provenance};
use crate::executor::{ExecError, ExecutionTrace, Executor, NodeRecord};
use crate::executor::{Clock, SystemClock};
use crate::lm::LanguageModel;
use crate::plan::{NodeId, NodeStatus, PlanGraph};
use crate::planner::intent::{classify_intent, IntentKind};
use crate::planner::response::{render_response, ResponseEvent};
use crate::planner::{Planner, PlannerError};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PlanUpdated,
    NodeStatus,
    ExecutionDone,
    Message,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub kind: EventKind,
    pub payload: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub text: String,
    pub at: u64,
}

/// Where a plan snapshot in the edit log came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Generate,
    Refine,
    Fix,
    Replan,
    Execute,
}

/// One step of plan history. Replaying the log from its last snapshot
/// reproduces the live plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum LogEntry {
    Snapshot { source: PlanSource, plan: PlanGraph, at: u64 },
    Edit { op: EditOp, provenance: Provenance, at: u64 },
    Override { node: NodeId, output: String, value: Value, at: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub id: String,
    pub messages: Vec<ChatMessage>,
    pub current_query: String,
    pub plan: Option<PlanGraph>,
    pub edit_log: Vec<LogEntry>,
    pub traces: Vec<ExecutionTrace>,
    /// Sequence number of the last event emitted.
    pub last_seq: u64,
}

impl SessionState {
    fn new(id: String) -> Self {
        SessionState {
            id,
            messages: Vec::new(),
            current_query: String::new(),
            plan: None,
            edit_log: Vec::new(),
            traces: Vec::new(),
            last_seq: 0,
        }
    }
}

/// Rebuilds the plan from the log: the last snapshot plus every later edit
/// and override.
pub fn replay(log: &[LogEntry]) -> Result<Option<PlanGraph>, ReplayError> {
    let start = log.iter().rposition(|e| matches!(e, LogEntry::Snapshot { .. }));
    let Some(start) = start else {
        return Ok(None);
    };
    let mut plan = match &log[start] {
        LogEntry::Snapshot { plan, .. } => plan.clone(),
        _ => unreachable!("position of a snapshot"),
    };
    for (index, entry) in log.iter().enumerate().skip(start + 1) {
        plan = match entry {
            LogEntry::Edit { op, .. } => {
                apply_edit(&plan, op).map_err(|e| ReplayError { index, detail: e.to_string() })?
            }
            LogEntry::Override { node, output, value, .. } => {
                crate::executor::override_output(&plan, *node, output, value.clone())
                    .map_err(|e| ReplayError { index, detail: e.to_string() })?
                    .0
            }
            LogEntry::Snapshot { .. } => unreachable!("after the last snapshot"),
        };
    }
    Ok(Some(plan))
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("edit log entry {index} does not replay: {detail}")]
pub struct ReplayError {
    pub index: usize,
    pub detail: String,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("session has no plan yet")]
    NoPlan,
    #[error("session has no query to plan for")]
    NoQuery,
    #[error("edit rejected: {0}")]
    Edit(#[from] EditError),
    #[error("{0}")]
    Exec(#[from] ExecError),
    #[error("{0}")]
    Planner(#[from] PlannerError),
    #[error("storage error: {0}")]
    Storage(#[from] std::io::Error),
    #[error("corrupt session file {path}: {detail}")]
    CorruptState { path: PathBuf, detail: String },
}

impl SessionError {
    /// Errors that are the caller's fault rather than the service's.
    pub fn is_client_error(&self) -> bool {
        matches!(self, SessionError::NoPlan | SessionError::NoQuery | SessionError::Edit(_) | SessionError::Exec(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "node", rename_all = "snake_case")]
pub enum ControlAction {
    ExecuteAll,
    ExecuteNode(NodeId),
    Replan,
    Help,
    /// Re-run stale and upstream-failed nodes only.
    Resume,
}

pub type EventListener = Arc<dyn Fn(&str, &Event) + Send + Sync>;

struct Session {
    state: SessionState,
    dir: Option<PathBuf>,
    events: Vec<Event>,
}

/// All sessions plus the planner and executor they share.
pub struct SessionStore {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    root: Option<PathBuf>,
    planner: Planner,
    executor: Executor,
    lm: Arc<dyn LanguageModel>,
    clock: Arc<dyn Clock>,
    listener: RwLock<Option<EventListener>>,
    id_source: Box<dyn Fn() -> String + Send + Sync>,
}

/// Collects events for one request while the session lock is held.
struct Emitter<'a> {
    store: &'a SessionStore,
    session: &'a mut Session,
    events: Vec<Event>,
}

impl Emitter<'_> {
    fn emit(&mut self, kind: EventKind, payload: serde_json::Value) {
        self.session.state.last_seq += 1;
        let event = Event { seq: self.session.state.last_seq, kind, payload };
        if let Some(listener) = self.store.listener.read().expect("listener lock").as_ref() {
            listener(&self.session.state.id, &event);
        }
        self.session.events.push(event.clone());
        self.events.push(event);
    }

    fn message(&mut self, role: &str, text: &str) {
        let at = self.store.clock.now();
        self.session.state.messages.push(ChatMessage { role: role.into(), text: text.into(), at });
        self.emit(EventKind::Message, json!({ "role": role, "text": text }));
    }

    fn plan_updated(&mut self, plan: PlanGraph, source: &str) {
        self.emit(EventKind::PlanUpdated, json!({ "source": source, "plan": &plan }));
        self.session.state.plan = Some(plan);
    }

    fn snapshot(&mut self, source: PlanSource, plan: PlanGraph) {
        let at = self.store.clock.now();
        self.session.state.edit_log.push(LogEntry::Snapshot { source, plan: plan.clone(), at });
        let label = serde_json::to_value(source).expect("source serializes");
        self.plan_updated(plan, label.as_str().expect("string"));
    }

    fn node_records(&mut self, records: &[NodeRecord]) {
        for record in records {
            if record.transitions.first().map(|t| t.status) == Some(NodeStatus::Running) {
                self.emit(EventKind::NodeStatus, json!({ "node": record.node, "status": NodeStatus::Pending }));
            }
            let last = record.transitions.len().saturating_sub(1);
            for (i, t) in record.transitions.iter().enumerate() {
                let mut payload = json!({ "node": record.node, "status": t.status });
                if i == last {
                    if !record.outputs.is_empty() {
                        payload["outputs"] = serde_json::to_value(&record.outputs).expect("outputs serialize");
                    }
                    if let Some(error) = &record.error {
                        payload["error"] = json!(error);
                    }
                }
                self.emit(EventKind::NodeStatus, payload);
            }
        }
    }

    fn execution(&mut self, plan: PlanGraph, trace: ExecutionTrace) {
        self.node_records(&trace.records);
        let failed: Vec<NodeId> = trace.failures().map(|r| r.node).collect();
        self.emit(
            EventKind::ExecutionDone,
            json!({ "executed": trace.executed(), "failed": failed, "final_answer": &trace.final_answer }),
        );
        let at = self.store.clock.now();
        self.session.state.edit_log.push(LogEntry::Snapshot { source: PlanSource::Execute, plan: plan.clone(), at });
        self.session.state.plan = Some(plan);
        self.session.state.traces.push(trace);
    }
}

impl SessionStore {
    /// `root` of `None` keeps sessions in memory only.
    pub fn new(root: Option<PathBuf>, planner: Planner, executor: Executor, lm: Arc<dyn LanguageModel>) -> Self {
        SessionStore {
            sessions: RwLock::new(HashMap::new()),
            root,
            planner,
            executor,
            lm,
            clock: Arc::new(SystemClock),
            listener: RwLock::new(None),
            id_source: Box::new(|| uuid::Uuid::new_v4().simple().to_string()),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Replaces random session ids, for reproducible tests.
    pub fn with_id_source(mut self, ids: impl Fn() -> String + Send + Sync + 'static) -> Self {
        self.id_source = Box::new(ids);
        self
    }

    /// Called for every event, in order, while the session lock is held.
    pub fn set_listener(&self, listener: Option<EventListener>) {
        *self.listener.write().expect("listener lock") = listener;
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    /// Loads every session directory under the root.
    pub fn load_all(&self) -> Result<usize, SessionError> {
        let Some(root) = &self.root else { return Ok(0) };
        if !root.exists() {
            return Ok(0);
        }
        let mut loaded = 0;
        let mut sessions = self.sessions.write().expect("sessions lock");
        for entry in fs::read_dir(root)? {
            let dir = entry?.path();
            let path = dir.join("state.json");
            if !path.is_file() {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            let state: SessionState = serde_json::from_str(&text)
                .map_err(|e| SessionError::CorruptState { path: path.clone(), detail: e.to_string() })?;
            let events = read_events(&dir.join("events.jsonl"), 0)?;
            sessions.insert(state.id.clone(), Arc::new(Mutex::new(Session { state, dir: Some(dir), events })));
            loaded += 1;
        }
        Ok(loaded)
    }

    pub fn create(&self) -> Result<SessionState, SessionError> {
        let id = (self.id_source)();
        let dir = self.root.as_ref().map(|r| r.join(&id));
        let session = Session { state: SessionState::new(id.clone()), dir, events: Vec::new() };
        persist(&session, &[])?;
        let state = session.state.clone();
        self.sessions.write().expect("sessions lock").insert(id, Arc::new(Mutex::new(session)));
        Ok(state)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("sessions lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Session>>, SessionError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(id.to_string()))
    }

    fn lock(handle: &Mutex<Session>) -> MutexGuard<'_, Session> {
        handle.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
    }

    pub fn state(&self, id: &str) -> Result<SessionState, SessionError> {
        let handle = self.handle(id)?;
        let state = Self::lock(&handle).state.clone();
        Ok(state)
    }

    /// Events with `seq` above `after`.
    pub fn events_since(&self, id: &str, after: u64) -> Result<Vec<Event>, SessionError> {
        let handle = self.handle(id)?;
        let session = Self::lock(&handle);
        Ok(session.events.iter().filter(|e| e.seq > after).cloned().collect())
    }

    /// Runs `body` under the session's lock and persists the result. State
    /// changes and their events commit together.
    fn with_session<T>(
        &self,
        id: &str,
        body: impl FnOnce(&mut Emitter<'_>) -> Result<T, SessionError>,
    ) -> Result<(T, Vec<Event>), SessionError> {
        let handle = self.handle(id)?;
        let mut session = Self::lock(&handle);
        let before = session.state.clone();
        let before_events = session.events.len();
        let mut emitter = Emitter { store: self, session: &mut session, events: Vec::new() };
        let outcome = body(&mut emitter);
        let events = std::mem::take(&mut emitter.events);
        match outcome {
            Ok(value) => {
                persist(&session, &events)?;
                Ok((value, events))
            }
            Err(e) if events.is_empty() => {
                session.state = before;
                session.events.truncate(before_events);
                Err(e)
            }
            Err(e) => {
                persist(&session, &events)?;
                Err(e)
            }
        }
    }

    /// Routes one chat message and returns the assistant's reply.
    pub fn post_message(&self, id: &str, text: &str) -> Result<(String, Vec<Event>), SessionError> {
        self.with_session(id, |em| {
            em.message("user", text);
            let plan = em.session.state.plan.clone();
            let intent = match classify_intent(text, plan.as_ref(), Some(self.lm.as_ref())) {
                Ok(intent) => intent,
                Err(e) => {
                    let reply = format!("Sorry, I could not understand that: {e}");
                    em.message("error", &reply);
                    return Ok(reply);
                }
            };
            let kind = match (&plan, intent.kind) {
                (None, IntentKind::RefineFeedback | IntentKind::Other) => IntentKind::NewQuery,
                (None, IntentKind::ExecuteAll | IntentKind::ExecuteNode) => {
                    let reply = "There is no plan to execute yet. Tell me what you want to do first.".to_string();
                    em.message("assistant", &reply);
                    return Ok(reply);
                }
                (_, kind) => kind,
            };
            let reply = match kind {
                IntentKind::NewQuery => match self.planner.generate_plan(text) {
                    Ok(planned) => {
                        em.session.state.current_query = text.to_string();
                        em.snapshot(PlanSource::Generate, planned.plan.clone());
                        render_response(&ResponseEvent::Planned { query: text.into() }, &planned.plan, Some(self.lm.as_ref()))
                    }
                    Err(e) => return Ok(apologize(em, &e)),
                },
                IntentKind::RefineFeedback => {
                    let current = plan.expect("checked above");
                    match self.planner.refine_plan(&current, text) {
                        Ok(planned) => {
                            em.snapshot(PlanSource::Refine, planned.plan.clone());
                            render_response(
                                &ResponseEvent::Refined { interaction: text.into() },
                                &planned.plan,
                                Some(self.lm.as_ref()),
                            )
                        }
                        Err(e) => return Ok(apologize(em, &e)),
                    }
                }
                IntentKind::ExecuteAll => self.run_all(em, false)?,
                IntentKind::ExecuteNode => match intent.node {
                    Some(node) => self.run_node(em, node)?,
                    None => self.run_all(em, false)?,
                },
                IntentKind::Other => "I can plan a task, refine the plan from your feedback, or execute it.".to_string(),
            };
            em.message("assistant", &reply);
            Ok(reply)
        })
    }

    /// A direct edit from the plan canvas.
    pub fn apply_edit(&self, id: &str, op: &EditOp) -> Result<Vec<Event>, SessionError> {
        self.with_session(id, |em| {
            let plan = em.session.state.plan.clone().ok_or(SessionError::NoPlan)?;
            match apply_edit(&plan, op) {
                Ok(next) => {
                    let at = self.store_now();
                    em.session.state.edit_log.push(LogEntry::Edit {
                        op: op.clone(),
                        provenance: Provenance::UserGraphEdit,
                        at,
                    });
                    em.plan_updated(next, "edit");
                    Ok(())
                }
                Err(e) => {
                    em.message("error", &format!("Edit rejected: {e}"));
                    Err(SessionError::Edit(e))
                }
            }
        })
        .map(|((), events)| events)
    }

    /// Replaces one output value by hand.
    pub fn override_output(&self, id: &str, node: NodeId, output: &str, value: Value) -> Result<Vec<Event>, SessionError> {
        self.with_session(id, |em| {
            let plan = em.session.state.plan.clone().ok_or(SessionError::NoPlan)?;
            match crate::executor::override_output(&plan, node, output, value.clone()) {
                Ok((next, _)) => {
                    let at = self.store_now();
                    em.session.state.edit_log.push(LogEntry::Override { node, output: output.into(), value, at });
                    em.plan_updated(next, "override");
                    Ok(())
                }
                Err(e) => {
                    em.message("error", &format!("Override rejected: {e}"));
                    Err(SessionError::Exec(e))
                }
            }
        })
        .map(|((), events)| events)
    }

    pub fn control(&self, id: &str, action: ControlAction) -> Result<Vec<Event>, SessionError> {
        self.with_session(id, |em| {
            match action {
                ControlAction::ExecuteAll => {
                    let reply = self.run_all(em, false)?;
                    em.message("assistant", &reply);
                }
                ControlAction::Resume => {
                    let reply = self.run_all(em, true)?;
                    em.message("assistant", &reply);
                }
                ControlAction::ExecuteNode(node) => {
                    let reply = self.run_node(em, node)?;
                    em.message("assistant", &reply);
                }
                ControlAction::Replan => {
                    let query = em.session.state.current_query.clone();
                    if query.is_empty() {
                        return Err(SessionError::NoQuery);
                    }
                    match self.planner.generate_plan(&query) {
                        Ok(planned) => {
                            em.snapshot(PlanSource::Replan, planned.plan.clone());
                            let reply = render_response(
                                &ResponseEvent::Refined { interaction: "re-plan".into() },
                                &planned.plan,
                                Some(self.lm.as_ref()),
                            );
                            em.message("assistant", &reply);
                        }
                        Err(e) => {
                            apologize(em, &e);
                        }
                    }
                }
                ControlAction::Help => {
                    let plan = em.session.state.plan.clone().ok_or(SessionError::NoPlan)?;
                    let query = match em.session.state.current_query.as_str() {
                        "" => plan.query().to_string(),
                        q => q.to_string(),
                    };
                    match self.planner.fix_plan(&query, &plan) {
                        Ok(planned) => {
                            em.snapshot(PlanSource::Fix, planned.plan.clone());
                            let reply = render_response(
                                &ResponseEvent::Refined { interaction: "help".into() },
                                &planned.plan,
                                Some(self.lm.as_ref()),
                            );
                            em.message("assistant", &reply);
                        }
                        Err(e) => {
                            apologize(em, &e);
                        }
                    }
                }
            }
            Ok(())
        })
        .map(|((), events)| events)
    }

    fn store_now(&self) -> u64 {
        self.clock.now()
    }

    fn run_all(&self, em: &mut Emitter<'_>, stale_only: bool) -> Result<String, SessionError> {
        let plan = em.session.state.plan.clone().ok_or(SessionError::NoPlan)?;
        let run = if stale_only { self.executor.resume_stale(&plan) } else { self.executor.execute_all(&plan) };
        match run {
            Ok((next, trace)) => {
                let event = ResponseEvent::Executed {
                    query: em.session.state.current_query.clone(),
                    executed: trace.executed().len(),
                    failed: trace.failures().count(),
                    final_answer: trace.final_answer.clone(),
                };
                em.execution(next.clone(), trace);
                Ok(render_response(&event, &next, Some(self.lm.as_ref())))
            }
            Err(e) => {
                let text = format!("Cannot execute the plan: {e}");
                em.message("error", &text);
                Err(SessionError::Exec(e))
            }
        }
    }

    fn run_node(&self, em: &mut Emitter<'_>, node: NodeId) -> Result<String, SessionError> {
        let plan = em.session.state.plan.clone().ok_or(SessionError::NoPlan)?;
        let (next, record) = match self.executor.execute_node(&plan, node) {
            Ok(done) => done,
            Err(ExecError::NodeFailure { node, cause, plan: failed }) => {
                let record = NodeRecord {
                    node,
                    agent: failed.node(node).map(|n| n.agent.clone()).unwrap_or_default(),
                    transitions: vec![
                        crate::executor::Transition { status: NodeStatus::Running, at: self.clock.now() },
                        crate::executor::Transition { status: NodeStatus::Failed, at: self.clock.now() },
                    ],
                    outputs: Default::default(),
                    error: Some(cause.to_string()),
                    log: None,
                };
                (*failed, record)
            }
            Err(e) => {
                em.emit(EventKind::NodeStatus, json!({ "node": node, "status": NodeStatus::Failed, "error": e.to_string() }));
                let text = format!("Cannot execute node {node}: {e}");
                em.message("error", &text);
                return Err(SessionError::Exec(e));
            }
        };
        let trace = ExecutionTrace { records: vec![record], final_answer: crate::executor::final_answer(&next) };
        let event = ResponseEvent::Executed {
            query: em.session.state.current_query.clone(),
            executed: trace.executed().len(),
            failed: trace.failures().count(),
            final_answer: trace.final_answer.clone(),
        };
        em.execution(next.clone(), trace);
        Ok(render_response(&event, &next, Some(self.lm.as_ref())))
    }
}

fn apologize(em: &mut Emitter<'_>, error: &PlannerError) -> String {
    let text = format!("Sorry, I could not produce a valid plan: {error}");
    em.message("error", &text);
    text
}

fn persist(session: &Session, events: &[Event]) -> Result<(), SessionError> {
    let Some(dir) = &session.dir else { return Ok(()) };
    fs::create_dir_all(dir)?;
    if !events.is_empty() {
        let mut log = OpenOptions::new().create(true).append(true).open(dir.join("events.jsonl"))?;
        let mut buf = String::new();
        for event in events {
            buf.push_str(&serde_json::to_string(event).expect("event serializes"));
            buf.push('\n');
        }
        log.write_all(buf.as_bytes())?;
        log.sync_data()?;
    }
    let tmp = dir.join("state.json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(&session.state).expect("state serializes"))?;
    fs::rename(&tmp, dir.join("state.json"))?;
    Ok(())
}

fn read_events(path: &Path, after: u64) -> Result<Vec<Event>, SessionError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut events = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let event: Event = serde_json::from_str(line)
            .map_err(|e| SessionError::CorruptState { path: path.to_path_buf(), detail: e.to_string() })?;
        if event.seq > after {
            events.push(event);
        }
    }
    Ok(events)
}
