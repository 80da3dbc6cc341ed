//! Helpers shared by the CLI integration tests: workspace paths, a server
//! child process, and the scripted job-search session.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::Arc;

use serde_json::{json, Value as Json};

use planweave_core::agents::{http_fixture_key, AgentInvocation, HttpMode};
use planweave_core::executor::LogicalClock;
use planweave_core::lm::{LanguageModel, LmError, LmMode, PromptBundle, ScriptedLm, TemplateId};
use planweave_core::session::{ControlAction, SessionStore};
use planweave_core::{parse_plan, EditOp, Executor, NodeId, Planner, Registry};

pub fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_planweave")
}

pub fn blessing() -> bool {
    std::env::var("PLANWEAVE_BLESS").is_ok_and(|v| v == "1")
}

/// A `planweave serve` child bound to an ephemeral port.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(extra: &[&str], data_dir: &Path) -> Server {
        let mut child = Command::new(bin())
            .args(["serve", "--port", "0", "--data-dir"])
            .arg(data_dir)
            .args(extra)
            .current_dir(workspace())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn server");
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).unwrap();
        let base = line.trim().strip_prefix("listening on ").expect("listening line").to_string();
        Server { child, base }
    }

    pub fn pid(&self) -> u32 {
        self.child.id()
    }

    pub fn wait(&mut self) -> std::process::ExitStatus {
        self.child.wait().unwrap()
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Reads a finished event stream and returns the `data:` payloads.
pub fn sse_data(body: &str) -> Vec<Json> {
    body.lines()
        .filter_map(|l| l.strip_prefix("data:"))
        .map(|d| serde_json::from_str(d.trim_start()).unwrap())
        .collect()
}

// ---------------------------------------------------------------------------
// job-search session
// ---------------------------------------------------------------------------

pub const JOB_QUERY: &str = "Help me find a job in Atlanta. I'm looking for MLE or AI eng positions.";
pub const JOB_FEEDBACK: &str = "Filter out jobs that are not in Atlanta";
pub const EXTRACT_TASK: &str =
    "Extract each job posting's title and company, including its location and remote possibility";

const JOB_PLAN: &str = r#"{"nodes":[
 {"id":1,"name":"web_search","task":"Search the web for MLE and AI engineer job postings in Atlanta","input":[["query","MLE OR AI engineer jobs Atlanta"]],"output":["results"],"config":{"num_results":5}},
 {"id":2,"name":"extract","task":"Extract each job posting's title and company","input":[["text",null]],"output":["items"]},
 {"id":3,"name":"summarize","task":"Summarize the job postings for the user","input":[["text",null]],"output":["summary"]}],
 "edges":[{"src_node":1,"dest_node":2,"src_output":"results","dest_input":"text"},
          {"src_node":2,"dest_node":3,"src_output":"items","dest_input":"text"}]}"#;

const JOB_PLAN_FILTERED: &str = r#"{"nodes":[
 {"id":1,"name":"web_search","task":"Search the web for MLE and AI engineer job postings in Atlanta","input":[["query","MLE OR AI engineer jobs Atlanta"]],"output":["results"],"config":{"num_results":10}},
 {"id":2,"name":"extract","task":"Extract each job posting's title and company, including its location and remote possibility","input":[["text",null]],"output":["items"]},
 {"id":3,"name":"summarize","task":"Summarize the job postings for the user","input":[["text",null]],"output":["summary"]},
 {"id":4,"name":"filter","task":"Keep only jobs located in Atlanta","input":[["items",null],["keyword","Atlanta"]],"output":["filtered"]}],
 "edges":[{"src_node":1,"dest_node":2,"src_output":"results","dest_input":"text"},
          {"src_node":2,"dest_node":4,"src_output":"items","dest_input":"items"},
          {"src_node":4,"dest_node":3,"src_output":"filtered","dest_input":"text"}]}"#;

/// Search hits as (title, company, city, remote policy).
const POSTINGS: &[(&str, &str, &str, &str)] = &[
    ("Machine Learning Engineer", "Peachtree Analytics", "Atlanta, GA", "hybrid"),
    ("AI Engineer", "Tesla", "Palo Alto, CA", "on-site"),
    ("Senior MLE", "Midtown Health AI", "Atlanta, GA", "remote-friendly"),
    ("Applied AI Engineer", "Buckhead Logistics", "Atlanta, GA", "on-site"),
    ("ML Platform Engineer", "Cloudline", "Austin, TX", "remote"),
    ("NLP Engineer", "Ponce Labs", "Atlanta, GA", "hybrid"),
    ("Computer Vision Engineer", "Northside Robotics", "Marietta, GA", "on-site"),
    ("AI Research Engineer", "Georgia Signal", "Atlanta, GA", "hybrid"),
    ("MLOps Engineer", "Fintech South", "Atlanta, GA", "remote"),
    ("Generative AI Engineer", "Bayline", "San Francisco, CA", "hybrid"),
];

fn search_results(n: usize) -> Vec<String> {
    POSTINGS[..n]
        .iter()
        .enumerate()
        .map(|(i, (title, company, city, _))| {
            format!("{title} - {company} - {city} - jobs.example.com/{}", i + 1)
        })
        .collect()
}

pub enum Step {
    Message(&'static str),
    Control(ControlAction),
    Edit(EditOp),
}

/// plan, execute, raise the result count, edit the extract task, re-run the
/// edited node and its dependents, then filter through chat and re-run.
pub fn job_script() -> Vec<Step> {
    let mut config = planweave_core::plan::Config::new();
    config.insert("num_results".into(), json!(10));
    vec![
        Step::Message(JOB_QUERY),
        Step::Message("execute the plan"),
        Step::Edit(EditOp::SetConfig { node: NodeId(1), config }),
        Step::Control(ControlAction::ExecuteAll),
        Step::Edit(EditOp::SetTask { node: NodeId(2), task: EXTRACT_TASK.into() }),
        Step::Control(ControlAction::Resume),
        Step::Message(JOB_FEEDBACK),
        Step::Control(ControlAction::ExecuteAll),
    ]
}

pub fn job_fixture_dirs() -> (PathBuf, PathBuf) {
    let root = workspace().join("fixtures/job_search");
    (root.join("lm"), root.join("http"))
}

pub fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/job_search_events.jsonl")
}

/// Plays the scenario over HTTP and returns the session's full event log,
/// one JSON object per line.
pub fn replay_job_session(server: &Server) -> String {
    let client = reqwest::blocking::Client::new();
    let created: Json = client.post(server.url("/sessions")).send().unwrap().json().unwrap();
    let id = created["id"].as_str().unwrap().to_string();
    for step in job_script() {
        let response = match step {
            Step::Message(text) => client
                .post(server.url(&format!("/sessions/{id}/messages")))
                .json(&json!({ "text": text }))
                .send(),
            Step::Control(action) => client.post(server.url(&format!("/sessions/{id}/control"))).json(&action).send(),
            Step::Edit(op) => client.patch(server.url(&format!("/sessions/{id}/plan"))).json(&op).send(),
        }
        .unwrap();
        assert!(response.status().is_success(), "step failed: {}", response.text().unwrap());
    }
    let body = client
        .get(server.url(&format!("/sessions/{id}/events?follow=false")))
        .send()
        .unwrap()
        .text()
        .unwrap();
    sse_data(&body).iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect()
}

/// Answers the scenario's prompts and records each reply as a fixture.
struct Author {
    scripted: ScriptedLm,
}

fn input_list(user: &str, name: &str) -> Vec<String> {
    let prefix = format!("- {name}: ");
    let line = user.lines().find_map(|l| l.strip_prefix(&prefix)).expect("input line");
    serde_json::from_str(line).expect("list input")
}

impl Author {
    fn reply(&self, prompt: &PromptBundle) -> Result<String, LmError> {
        let unsupported = || LmError::Unsupported(format!("no authored reply for a {} prompt", prompt.template_id));
        match prompt.template_id {
            TemplateId::Plan => Ok(JOB_PLAN.into()),
            TemplateId::Refine => Ok(JOB_PLAN_FILTERED.into()),
            TemplateId::Agent if prompt.system.contains("`extract`") => {
                let detailed = prompt.user.contains("remote possibility");
                let items: Vec<String> = input_list(&prompt.user, "text")
                    .iter()
                    .map(|hit| {
                        let parts: Vec<&str> = hit.split(" - ").collect();
                        let posting = POSTINGS.iter().find(|p| p.0 == parts[0]).expect("known posting");
                        if detailed {
                            format!("{} at {} ({}; {})", posting.0, posting.1, posting.2, posting.3)
                        } else {
                            format!("{} at {}", posting.0, posting.1)
                        }
                    })
                    .collect();
                Ok(json!({ "items": items }).to_string())
            }
            TemplateId::Agent if prompt.system.contains("`summarize`") => {
                let items = input_list(&prompt.user, "text");
                let located = items.iter().all(|i| i.contains('('));
                let outside = items.iter().filter(|i| !i.contains("Atlanta")).count();
                let summary = match (located, outside) {
                    (false, _) => format!("Found {} matching roles.", items.len()),
                    (true, 0) => format!("Found {} matching roles, all based in Atlanta.", items.len()),
                    (true, k) => format!("Found {} matching roles; {k} are outside Atlanta.", items.len()),
                };
                Ok(json!({ "summary": summary }).to_string())
            }
            _ => Err(unsupported()),
        }
    }
}

impl LanguageModel for Author {
    fn mode(&self) -> LmMode {
        LmMode::Scripted
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String, LmError> {
        let reply = self.reply(prompt)?;
        self.scripted.record(prompt, &reply).map_err(|e| LmError::Transport(e.to_string()))?;
        Ok(reply)
    }
}

/// Regenerates every fixture the scenario needs by running it in-process
/// against the authoring model.
pub fn author_job_fixtures() {
    let (lm_dir, http_dir) = job_fixture_dirs();
    for dir in [&lm_dir, &http_dir] {
        if dir.exists() {
            std::fs::remove_dir_all(dir).unwrap();
        }
        std::fs::create_dir_all(dir).unwrap();
    }
    let registry = Arc::new(Registry::builtin());
    let search = parse_plan(JOB_PLAN).unwrap().node(NodeId(1)).unwrap().clone();
    for n in [5, 10] {
        let mut node = search.clone();
        node.config.insert("num_results".into(), json!(n));
        let invocation = AgentInvocation::from_node(registry.get("web_search").unwrap(), &node).unwrap();
        let body = json!({ "outputs": { "results": search_results(n) } });
        std::fs::write(http_dir.join(format!("{}.json", http_fixture_key(&invocation))), body.to_string() + "\n")
            .unwrap();
    }
    let lm: Arc<dyn LanguageModel> = Arc::new(Author { scripted: ScriptedLm::new(&lm_dir) });
    let executor = Executor::new(registry.clone()).with_lm(Some(lm.clone())).with_http(HttpMode::Fixtures(http_dir));
    let store = SessionStore::new(None, Planner::new(registry, lm.clone()), executor, lm)
        .with_clock(Arc::new(LogicalClock::default()));
    let id = store.create().unwrap().id;
    for step in job_script() {
        match step {
            Step::Message(text) => {
                store.post_message(&id, text).unwrap();
            }
            Step::Control(action) => {
                store.control(&id, action).unwrap();
            }
            Step::Edit(op) => {
                store.apply_edit(&id, &op).unwrap();
            }
        }
    }
}
