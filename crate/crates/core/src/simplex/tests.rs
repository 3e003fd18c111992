use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::CostFn;

fn two_by_two(alpha: [f64; 2], beta: [f64; 2]) -> Instance {
    Instance::from_matrix(&alpha, &beta, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
}

fn random_instance(rng: &mut ChaCha8Rng, na: usize, nb: usize) -> Instance {
    let mut draw = |k: usize| {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let alpha = draw(na);
    let beta = draw(nb);
    let pts = |rng: &mut ChaCha8Rng, k| (0..k).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect::<Vec<_>>();
    let pa = pts(rng, na);
    let pb = pts(rng, nb);
    Instance::from_marginals(
        2,
        pa.into_iter().zip(alpha).collect(),
        pb.into_iter().zip(beta).collect(),
        CostFn::SquaredEuclidean,
    )
    .unwrap()
}

fn flows(tree: &BasisTree) -> Vec<(usize, usize, f64)> {
    let mut v: Vec<_> = tree.edges().map(|(_, e)| (e.supply, e.demand, e.flow)).collect();
    v.sort_by_key(|a| (a.0, a.1));
    v
}

#[test]
fn northwest_corner_examples() {
    let inst = two_by_two([0.6, 0.4], [0.5, 0.5]);
    let (tree, _) = initial_basis(&inst).unwrap();
    let f = flows(&tree);
    assert_eq!(f.len(), 3);
    assert_eq!((f[0].0, f[0].1), (0, 2));
    assert!((f[0].2 - 0.5).abs() < 1e-12);
    assert_eq!((f[1].0, f[1].1), (0, 3));
    assert!((f[1].2 - 0.1).abs() < 1e-12);
    assert_eq!((f[2].0, f[2].1), (1, 3));
    assert!((f[2].2 - 0.4).abs() < 1e-12);

    // ties advance the demand side and leave a degenerate edge
    let inst = two_by_two([0.5, 0.5], [0.5, 0.5]);
    let (tree, _) = initial_basis(&inst).unwrap();
    let f = flows(&tree);
    assert_eq!(f, vec![(0, 2, 0.5), (0, 3, 0.0), (1, 3, 0.5)]);
    tree.validate(&inst).unwrap();
}

#[test]
fn duals_follow_basic_edges() {
    let inst = Instance::from_matrix(&[1.0], &[1.0], vec![vec![3.0]]).unwrap();
    let (tree, _) = initial_basis(&inst).unwrap();
    assert_eq!(compute_duals(&tree, &inst).pi, vec![0.0, -3.0]);

    // path a1 - b1 - a2 with costs 2 and 5
    let inst = Instance::from_matrix(&[0.5, 0.5], &[1.0], vec![vec![2.0], vec![5.0]]).unwrap();
    let mut tree = BasisTree::with_nodes(3);
    tree.add_edge(0, 2, 0.5);
    tree.add_edge(1, 2, 0.5);
    let pi = compute_duals(&tree, &inst).pi;
    assert_eq!((pi[0], pi[2], pi[1]), (0.0, -2.0, 3.0));
}

#[test]
fn small_example_reaches_optimum() {
    for mode in [IndexMode::Full, IndexMode::Vertices] {
        let inst = two_by_two([0.6, 0.4], [0.5, 0.5]);
        let mut st = SimplexState::new(&inst, SimplexConfig { mode, ..Default::default() }).unwrap();
        st.run_primal(&inst).unwrap();
        assert!((st.cost(&inst) - 0.1).abs() < 1e-12);
        st.check(&inst, None).unwrap();
        let plan = st.plan(&inst);
        assert!((plan.get(inst.node_id(0), inst.node_id(2)) - 0.5).abs() < 1e-12);
        assert!((plan.get(inst.node_id(1), inst.node_id(3)) - 0.4).abs() < 1e-12);
    }
}

#[test]
fn matches_baseline_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..40 {
        let na = rng.random_range(1..9);
        let nb = rng.random_range(1..9);
        let inst = random_instance(&mut rng, na, nb);
        let mode = if round % 2 == 0 { IndexMode::Full } else { IndexMode::Vertices };
        let cfg = SimplexConfig { mode, seed: round, ..Default::default() };
        let mut st = SimplexState::new(&inst, cfg).unwrap();
        let report = st.run_primal(&inst).unwrap();
        st.check(&inst, None).unwrap();
        let mut base = StaticSolver::new(&inst).unwrap();
        let want = base.solve().unwrap();
        let got = st.cost(&inst);
        assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()), "round {round}: {got} vs {want}");
        assert!(report.pivots <= 50 * inst.len());
        // duals of both solvers certify the same value
        let dual_value: f64 = (0..inst.len()).map(|v| inst.weight(inst.node_id(v)) * st.duals.pi[v]).sum();
        assert!((dual_value - got).abs() <= 1e-9 * (1.0 + got.abs()));
    }
}

#[test]
fn incremental_duals_match_recomputed_up_to_a_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = random_instance(&mut rng, 12, 15);
    let mut st = SimplexState::new(&inst, SimplexConfig::default()).unwrap();
    st.run_primal(&inst).unwrap();
    let fresh = compute_duals(&st.basis, &inst);
    let shift = st.duals.pi[0] - fresh.pi[0];
    for v in 0..inst.len() {
        assert!((st.duals.pi[v] - fresh.pi[v] - shift).abs() < 1e-9);
    }
}

#[test]
fn unbalanced_and_one_sided_inputs_are_rejected() {
    let inst = Instance::from_matrix(&[0.5], &[0.6], vec![vec![1.0]]).unwrap();
    assert!(matches!(initial_basis(&inst), Err(Error::Unbalanced(_))));
    let inst = Instance::new(1, CostFn::SquaredEuclidean);
    let st = SimplexState::new(&inst, SimplexConfig::default()).unwrap();
    assert_eq!(st.basis.node_count(), 0);
}
