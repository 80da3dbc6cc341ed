//! The refinement benchmark: corrupt a gold plan, hand the corruption back as
//! feedback, refine, and score the result against the gold plan.

pub mod corpus;
pub mod corrupt;
pub mod feedback;
pub mod report;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::edit::apply_script;
use crate::executor::Executor;
use crate::metrics::{ged, execution_accuracy, is_isomorphic, AccuracyReason, CostModel};
use crate::plan::PlanGraph;
use crate::planner::Planner;
use crate::registry::Registry;
use crate::value::Value;

pub use corpus::{load_corpus, load_verified, parse_corpus, verify_case, CorpusError, Dataset, GoldCase};
pub use corrupt::{case_seed, corrupt, CorruptError, CorruptionKind, CorruptionRecord, InverseHint};
pub use feedback::{make_feedback, Feedback, FeedbackMode};
pub use report::{aggregate, Cell, MetricsReport};

pub const DEFAULT_SEED: u64 = 20240;

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub master_seed: u64,
    pub modes: Vec<FeedbackMode>,
    pub kinds: Vec<CorruptionKind>,
    pub datasets: Option<Vec<Dataset>>,
    pub jobs: usize,
    pub cost: CostModel,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            master_seed: DEFAULT_SEED,
            modes: FeedbackMode::ALL.to_vec(),
            kinds: CorruptionKind::ALL.to_vec(),
            datasets: None,
            jobs: 1,
            cost: CostModel::default(),
        }
    }
}

/// Shared pieces for running cases. Without a planner every LM step fails
/// and the case falls back to the unrefined plan.
pub struct EvalContext<'a> {
    pub registry: &'a Registry,
    pub executor: &'a Executor,
    pub planner: Option<&'a Planner>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub dataset: Dataset,
    pub mode: FeedbackMode,
    pub kind: CorruptionKind,
    pub seed: u64,
    pub acc: u8,
    pub iso: bool,
    pub ged: u32,
    pub ged_exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<AccuracyReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Value>,
    /// Set when a planner step failed and the case fell back.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner_error: Option<String>,
    pub lm_calls: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CaseResult {
    /// Sort key used to make sweep output independent of scheduling.
    pub fn key(&self) -> (Dataset, String, CorruptionKind, FeedbackMode) {
        (self.dataset, self.case_id.clone(), self.kind, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub case_id: String,
    pub kind: CorruptionKind,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub results: Vec<CaseResult>,
    pub skipped: Vec<Skipped>,
}

impl SweepOutcome {
    pub fn report(&self) -> MetricsReport {
        aggregate(&self.results)
    }

    /// One JSON object per case, in sorted order.
    pub fn results_jsonl(&self) -> String {
        self.results
            .iter()
            .map(|r| serde_json::to_string(r).expect("result serializes") + "\n")
            .collect()
    }
}

/// Refines a corrupted plan with one kind of feedback and scores it.
pub fn run_case(
    ctx: &EvalContext<'_>,
    case: &GoldCase,
    corrupted: &PlanGraph,
    record: &CorruptionRecord,
    mode: FeedbackMode,
    cost: &CostModel,
) -> CaseResult {
    let started = Instant::now();
    let (refined, planner_error, lm_calls) = refine(ctx, case, corrupted, record, mode);
    let accuracy = execution_accuracy(&refined, ctx.executor, &case.gold_answer);
    let distance = ged(&refined, &case.gold_plan, cost);
    CaseResult {
        case_id: case.id.clone(),
        dataset: case.dataset,
        mode,
        kind: record.kind,
        seed: record.seed,
        acc: accuracy.score,
        iso: is_isomorphic(&refined, &case.gold_plan),
        ged: distance.value,
        ged_exact: distance.exact,
        reason: accuracy.reason,
        answer: accuracy.answer,
        planner_error,
        lm_calls,
        elapsed: started.elapsed(),
    }
}

fn refine(
    ctx: &EvalContext<'_>,
    case: &GoldCase,
    corrupted: &PlanGraph,
    record: &CorruptionRecord,
    mode: FeedbackMode,
) -> (PlanGraph, Option<String>, usize) {
    const NO_PLANNER: &str = "no planner configured";
    match make_feedback(record, mode) {
        Feedback::Text { text } => match ctx.planner {
            None => (corrupted.clone(), Some(NO_PLANNER.into()), 0),
            Some(planner) => match planner.refine_plan(corrupted, &text) {
                Ok(planned) => (planned.plan, None, planned.trace.prompts.len()),
                Err(e) => (corrupted.clone(), Some(e.to_string()), 1),
            },
        },
        Feedback::Edits { script, needs_fix } => {
            let edited = match apply_script(corrupted, &script) {
                Ok(plan) => plan,
                Err(e) => return (corrupted.clone(), Some(format!("feedback edits failed: {e}")), 0),
            };
            if !needs_fix {
                return (edited, None, 0);
            }
            match ctx.planner {
                None => (edited, Some(NO_PLANNER.into()), 0),
                Some(planner) => match planner.fix_plan(&case.query, &edited) {
                    Ok(planned) => (planned.plan, None, planned.trace.prompts.len()),
                    Err(e) => (edited, Some(e.to_string()), 1),
                },
            }
        }
    }
}

/// Every (case, kind, mode) cell. One corruption per (case, kind) is shared
/// by all modes. Results come back sorted whatever `jobs` is.
pub fn run_sweep(ctx: &EvalContext<'_>, cases: &[GoldCase], config: &EvalConfig) -> SweepOutcome {
    let mut jobs = Vec::new();
    let mut skipped = Vec::new();
    for case in cases {
        if let Some(datasets) = &config.datasets {
            if !datasets.contains(&case.dataset) {
                continue;
            }
        }
        for &kind in &config.kinds {
            let seed = case_seed(config.master_seed, &case.id, kind);
            match corrupt(&case.gold_plan, kind, seed, ctx.registry) {
                Ok((corrupted, record)) => {
                    for &mode in &config.modes {
                        jobs.push((case, corrupted.clone(), record.clone(), mode));
                    }
                }
                Err(e) => skipped.push(Skipped { case_id: case.id.clone(), kind, reason: e.to_string() }),
            }
        }
    }
    let run = |(case, corrupted, record, mode): &(&GoldCase, PlanGraph, CorruptionRecord, FeedbackMode)| {
        run_case(ctx, case, corrupted, record, *mode, &config.cost)
    };
    let mut results: Vec<CaseResult> = if config.jobs > 1 {
        use rayon::prelude::*;
        match rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build() {
            Ok(pool) => pool.install(|| jobs.par_iter().map(run).collect()),
            Err(_) => jobs.iter().map(run).collect(),
        }
    } else {
        jobs.iter().map(run).collect()
    };
    results.sort_by_key(CaseResult::key);
    SweepOutcome { results, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edit::{EditOp, Provenance};
    use crate::plan::{DataEdge, NodeId, TaskNode};
    use std::path::PathBuf;
    use std::sync::Arc;

    fn data(name: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
    }

    fn registry() -> Registry {
        Registry::load(&data("registry.json")).unwrap()
    }

    #[test]
    fn corpus_reproduces_every_gold_answer() {
        let executor = Executor::new(Arc::new(registry()));
        let cases = load_verified(&data("corpus.json"), &executor).unwrap();
        assert_eq!(cases.len(), 20);
    }

    #[test]
    fn case_seed_is_stable_and_distinct() {
        let a = case_seed(1, "gsm-01", CorruptionKind::AddNode);
        assert_eq!(a, case_seed(1, "gsm-01", CorruptionKind::AddNode));
        assert_ne!(a, case_seed(1, "gsm-01", CorruptionKind::AddEdge));
        assert_ne!(a, case_seed(2, "gsm-01", CorruptionKind::AddNode));
    }

    fn two_nodes() -> PlanGraph {
        PlanGraph::new(
            "q",
            vec![
                TaskNode::new(1, "add", "t").with_input("a", Some(Value::from(1.0))).with_input("b", Some(Value::from(2.0))).with_output("sum"),
                TaskNode::new(2, "multiply", "t").with_input("a", None).with_input("b", Some(Value::from(3.0))).with_output("product"),
            ],
            vec![DataEdge::new(1, "sum", 2, "a")],
        )
    }

    #[test]
    fn remove_edge_drops_the_only_edge() {
        let (bad, record) = corrupt(&two_nodes(), CorruptionKind::RemoveEdge, 7, &registry()).unwrap();
        assert!(bad.edges().is_empty());
        assert_eq!(record.script.provenance, Provenance::HarnessCorruption);
        assert_eq!(
            make_feedback(&record, FeedbackMode::Detailed),
            Feedback::Text { text: "Add an edge between 1 and 2".into() }
        );
    }

    #[test]
    fn remove_node_phrases_neighbours() {
        let plan = crate::plan::tests::chain3();
        let (bad, record) = corrupt(&plan, CorruptionKind::RemoveNode, 3, &registry()).unwrap();
        assert!(!bad.contains(NodeId(2)));
        assert_eq!(
            make_feedback(&record, FeedbackMode::Detailed),
            Feedback::Text { text: "Add a add node connecting 1 to 3".into() }
        );
        assert_eq!(make_feedback(&record, FeedbackMode::Vague), Feedback::Text { text: "Add a add node".into() });
        match make_feedback(&record, FeedbackMode::DmFix) {
            Feedback::Edits { script, needs_fix } => {
                assert!(needs_fix);
                assert!(matches!(&script.ops[..], [EditOp::AddNode { .. }]));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simple_kinds_restore_gold_without_a_model() {
        let registry = registry();
        let executor = Executor::new(Arc::new(registry.clone()));
        let cases = load_corpus(&data("corpus.json")).unwrap();
        let ctx = EvalContext { registry: &registry, executor: &executor, planner: None };
        let config = EvalConfig {
            modes: vec![FeedbackMode::DmFix],
            kinds: CorruptionKind::SIMPLE.to_vec(),
            ..EvalConfig::default()
        };
        let outcome = run_sweep(&ctx, &cases[..4], &config);
        assert!(outcome.skipped.is_empty());
        assert_eq!(outcome.results.len(), 16);
        for r in &outcome.results {
            assert_eq!((r.acc, r.iso, r.ged, r.lm_calls), (1, true, 0, 0), "{r:?}");
        }
    }

    #[test]
    fn sweep_is_independent_of_jobs() {
        let registry = registry();
        let executor = Executor::new(Arc::new(registry.clone()));
        let cases = load_corpus(&data("corpus.json")).unwrap();
        let ctx = EvalContext { registry: &registry, executor: &executor, planner: None };
        let one = run_sweep(&ctx, &cases[..3], &EvalConfig::default());
        let four = run_sweep(&ctx, &cases[..3], &EvalConfig { jobs: 4, ..EvalConfig::default() });
        assert_eq!(one.results_jsonl(), four.results_jsonl());
        assert_eq!(one.report().to_json(), four.report().to_json());
    }
}
