mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use planweave_core::edit::{apply_script, diff, EditOp};
use planweave_core::plan::{parse_plan, serialize_plan, NodeId, PlanGraph};
use planweave_core::{apply_edit, Executor, NodeStatus, Registry};

use support::*;

fn plan_from(seed: u64, max_nodes: u32) -> PlanGraph {
    random_plan(&mut ChaCha8Rng::seed_from_u64(seed), max_nodes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wire_format_round_trips(seed in any::<u64>()) {
        let plan = plan_from(seed, 6);
        let text = serialize_plan(&plan);
        let back = parse_plan(&text).unwrap();
        prop_assert!(back.structurally_eq(&plan));
        prop_assert_eq!(serialize_plan(&back), text);
    }

    #[test]
    fn executed_plans_round_trip_with_results(seed in any::<u64>()) {
        let plan = plan_from(seed, 5);
        let (ran, _) = Executor::new(std::sync::Arc::new(Registry::builtin())).execute_all(&plan).unwrap();
        let back = parse_plan(&serialize_plan(&ran)).unwrap();
        prop_assert_eq!(back, ran);
    }

    #[test]
    fn topo_order_is_a_permutation_respecting_edges(seed in any::<u64>()) {
        let plan = plan_from(seed, 7);
        let order = plan.topo_order().unwrap();
        let ids: BTreeSet<NodeId> = order.iter().copied().collect();
        prop_assert_eq!(ids.len(), order.len());
        prop_assert_eq!(ids, plan.node_ids().into_iter().collect::<BTreeSet<_>>());
        let pos = |id: NodeId| order.iter().position(|n| *n == id).unwrap();
        for e in plan.edges() {
            prop_assert!(pos(e.src_node) < pos(e.dest_node));
        }
    }

    #[test]
    fn adding_an_edge_only_grows_dependents(seed in any::<u64>(), src in 1u32..6, dest in 1u32..6) {
        let plan = plan_from(seed, 5);
        prop_assume!(plan.contains(NodeId(src)) && plan.contains(NodeId(dest)));
        let Ok(bigger) = apply_edit(&plan, &EditOp::add_edge(src, "out", dest, "a")) else {
            // Only cycles may be refused.
            prop_assert!(plan.reaches(NodeId(dest), NodeId(src)) || plan.is_edge_fed(NodeId(dest), "a"));
            return Ok(());
        };
        for id in plan.node_ids() {
            let before = plan.dependents(id).unwrap();
            let after = bigger.dependents(id).unwrap();
            prop_assert!(before.is_subset(&after));
        }
    }

    #[test]
    fn diff_script_reaches_its_target(seed in any::<u64>(), steps in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_plan(&mut rng, 5);
        let target = mutate(&mut rng, &base, steps, 6);
        let script = diff(&base, &target);
        let reached = apply_script(&base, &script).unwrap();
        prop_assert!(reached.structurally_eq(&target));
        prop_assert_eq!(script.is_empty(), base.structurally_eq(&target));
    }

    #[test]
    fn edits_mark_exactly_the_closure_stale(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let plan = plan_from(seed, 6);
        let (ran, _) = Executor::new(std::sync::Arc::new(Registry::builtin())).execute_all(&plan).unwrap();
        let ids = ran.node_ids();
        let target = ids[pick.index(ids.len())];
        let edited = apply_edit(&ran, &EditOp::SetTask { node: target, task: "changed".into() }).unwrap();
        let closure = ran.closure([target]);
        for node in edited.nodes() {
            let want = if closure.contains(&node.id) { NodeStatus::Stale } else { NodeStatus::Done };
            prop_assert_eq!(node.status, want, "node {}", node.id);
        }
    }

}
