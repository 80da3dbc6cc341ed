mod support;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planweave_core::metrics::{ged, is_isomorphic, CostModel};
use planweave_core::plan::NodeId;
use planweave_core::{apply_edit, EditOp};

use support::*;

#[test]
fn ged_matches_brute_force_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cost = CostModel::default();
    for pair in 0..200 {
        let a = random_plan(&mut rng, 4);
        let b = if pair % 2 == 0 { mutate(&mut rng, &a, 3, 4) } else { random_plan(&mut rng, 4) };
        let got = ged(&a, &b, &cost);
        assert!(got.exact);
        assert_eq!(got.value, brute_force_ged(&a, &b), "pair {pair}");
        assert_eq!(got.value, ged(&b, &a, &cost).value, "symmetry, pair {pair}");
    }
}

#[test]
fn isomorphism_is_invariant_under_renumbering() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let plan = random_plan(&mut rng, 5);
        let shuffled = permute_ids(&mut rng, &plan);
        assert!(is_isomorphic(&plan, &shuffled));
        assert_eq!(ged(&plan, &shuffled, &CostModel::default()).value, 0);
    }
}

#[test]
fn a_single_relabel_is_detected() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let plan = random_plan(&mut rng, 5);
        let ids = plan.node_ids();
        let target = ids[rng.gen_range(0..ids.len())];
        let current = plan.node(target).unwrap().agent.clone();
        let agent = LABELS.iter().find(|l| **l != current).unwrap().to_string();
        let relabeled = apply_edit(&plan, &EditOp::SetAgent { node: target, agent }).unwrap();
        let shuffled = permute_ids(&mut rng, &relabeled);
        assert!(!is_isomorphic(&plan, &shuffled));
        assert_eq!(ged(&plan, &shuffled, &CostModel::default()).value, 1);
    }
}

#[test]
fn zero_distance_coincides_with_isomorphism() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..300 {
        let a = random_plan(&mut rng, 3);
        let b = random_plan(&mut rng, 3);
        let distance = ged(&a, &b, &CostModel::default()).value;
        assert_eq!(is_isomorphic(&a, &b), distance == 0);
    }
}

#[test]
fn isolated_node_removal_costs_one_weighted_deletion() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let cost = CostModel { node_delete: 3, node_insert: 2, ..CostModel::default() };
    for _ in 0..50 {
        let plan = random_plan(&mut rng, 4);
        let isolated = plan.node_ids().into_iter().find(|id| {
            plan.predecessors(*id).is_empty() && plan.successors(*id).is_empty() && plan.nodes().len() > 1
        });
        let Some(id) = isolated else { continue };
        let smaller = apply_edit(&plan, &EditOp::RemoveNode { node: NodeId(id.0) }).unwrap();
        assert_eq!(ged(&plan, &smaller, &cost).value, 3);
        assert_eq!(ged(&smaller, &plan, &cost).value, 2);
    }
}
