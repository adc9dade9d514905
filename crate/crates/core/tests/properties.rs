mod common;

use common::{from_array, rel_err, to_array};
use ndarray::Array2;
use ppgnn::data::{
    degree_normalize, gcn_operator, generate_sbm, perturb_edges, GraphDataset, NoiseMode,
    NoiseSpec, Normalization, SbmConfig, SparseAdjacency, Split, Splits,
};
use ppgnn::learner::{
    gumbel_top_k, pairwise_probabilities, probability_passing, LatentGraph, ProbabilityKind,
    ProbabilityMatrix, SampleMode,
};
use ppgnn::mp::{anchor_aggregate, anchor_broadcast, gcn_forward, GcnStack};
use ppgnn::train::{
    graph_loss_terms, prediction_loss_grad, reward, GraphContext, ModelInit, ModelMode,
    ModelParams, RewardVector,
};
use proptest::prelude::*;

fn edges(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..n, 0..n), 0..3 * n)
        .prop_map(|v| v.into_iter().filter(|(a, b)| a != b).collect())
}

fn graph(max_n: usize) -> impl Strategy<Value = SparseAdjacency> {
    (2..=max_n).prop_flat_map(|n| {
        edges(n).prop_map(move |e| SparseAdjacency::from_undirected_edges(n, &e).unwrap())
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn graph_with_embeddings(
    max_n: usize,
) -> impl Strategy<Value = (SparseAdjacency, Array2<f64>, f64)> {
    graph(max_n).prop_flat_map(|a| {
        let n = a.num_rows();
        (Just(a), matrix(n, 3), 0.1f64..4.0)
    })
}

fn selection(n: usize, cols: usize, k: usize) -> impl Strategy<Value = LatentGraph> {
    prop::collection::vec(Just((0..cols).collect::<Vec<_>>()).prop_shuffle(), n).prop_map(
        move |rows| {
            let rows = rows
                .into_iter()
                .map(|mut r| {
                    r.truncate(k);
                    r.sort_unstable();
                    r
                })
                .collect();
            LatentGraph::from_structure(
                SparseAdjacency::from_rows(cols, rows).unwrap(),
                k,
                SampleMode::Deterministic,
                ProbabilityKind::NodeAnchor,
            )
            .unwrap()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn row_stochastic_rows_sum_to_one(a in graph(20)) {
        let op = degree_normalize::<f64>(&a, Normalization::RowStochastic, true).unwrap();
        for s in op.matrix().row_sums() {
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_operator_is_symmetric(a in graph(20)) {
        let d = degree_normalize::<f64>(&a, Normalization::Symmetric, true).unwrap().to_dense();
        prop_assert!((&d - &d.t()).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn pairwise_is_symmetric_with_unit_diagonal((_, z, t) in graph_with_embeddings(15)) {
        let p = pairwise_probabilities(z.view(), t).unwrap();
        let n = z.nrows();
        for i in 0..n {
            prop_assert_eq!(p.get(i, i), 1.0);
            for j in 0..n {
                prop_assert!((p.get(i, j) - p.get(j, i)).abs() <= 1e-14);
                prop_assert!(p.get(i, j) > 0.0 && p.get(i, j) <= 1.0);
            }
        }
    }

    #[test]
    fn kernel_monotone_in_distance_and_temperature(d1 in 0.01f64..5.0, extra in 0.01f64..5.0, t in 0.1f64..3.0, dt in 0.01f64..3.0) {
        let d2 = d1 + extra;
        let z = ndarray::array![[0.0], [d1.sqrt()], [d2.sqrt()]];
        let p = pairwise_probabilities(z.view(), t).unwrap();
        prop_assert!(p.get(0, 1) > p.get(0, 2));
        let wider = pairwise_probabilities(z.view(), t + dt).unwrap();
        prop_assert!(wider.get(0, 1) > p.get(0, 1));
    }

    #[test]
    fn passing_stays_within_neighbour_range((a, z, t) in graph_with_embeddings(15)) {
        let p = pairwise_probabilities(z.view(), t).unwrap();
        let refined = probability_passing(&a, &p).unwrap();
        for i in 0..a.num_rows() {
            let mut nbrs = a.row(i).to_vec();
            nbrs.push(i);
            for j in 0..a.num_rows() {
                let lo = nbrs.iter().map(|&m| p.get(m, j)).fold(f64::INFINITY, f64::min);
                let hi = nbrs.iter().map(|&m| p.get(m, j)).fold(0.0, f64::max);
                let v = refined.get(i, j);
                prop_assert!(v > 0.0 && v <= 1.0);
                prop_assert!(v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn identical_operator_rows_give_identical_scores((_, z, t) in graph_with_embeddings(10)) {
        let n = z.nrows();
        // 0 and 1 share the neighbourhood {0, 1, 2}
        let mut e = vec![(0, 1)];
        if n > 2 {
            e.push((0, 2));
            e.push((1, 2));
        }
        let a = SparseAdjacency::from_undirected_edges(n, &e).unwrap();
        let refined = probability_passing(&a, &pairwise_probabilities(z.view(), t).unwrap()).unwrap();
        prop_assert_eq!(refined.scores().row(0), refined.scores().row(1));
    }

    #[test]
    fn gumbel_rows_hold_k_distinct((_, z, t) in graph_with_embeddings(15), k_frac in 0.0f64..1.0, seed in any::<u64>()) {
        let p = pairwise_probabilities(z.view(), t).unwrap();
        let n = z.nrows();
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        for mode in [SampleMode::Stochastic, SampleMode::Deterministic] {
            let g = gumbel_top_k(&p, k, mode, seed).unwrap();
            for i in 0..n {
                let row = g.structure().row(i);
                prop_assert_eq!(row.len(), k);
                prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn two_step_preserves_constant_rows(latent in selection(9, 4, 2), c in prop::collection::vec(-3.0f64..3.0, 3)) {
        let u = Array2::from_shape_fn((9, 3), |(_, j)| c[j]);
        let v = anchor_aggregate(u.view(), &latent).unwrap();
        let out = anchor_broadcast(v.view(), &latent).unwrap();
        for row in out.rows() {
            for (x, y) in row.iter().zip(&c) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rewards_are_centred(labels in prop::collection::vec(0usize..3, 1..40), flips in prop::collection::vec(any::<bool>(), 40)) {
        let n = labels.len();
        let preds: Vec<usize> = labels.iter().zip(&flips).map(|(&l, &f)| if f { (l + 1) % 3 } else { l }).collect();
        let nodes: Vec<usize> = (0..n).collect();
        let r = reward::<f64>(&labels, &preds, &nodes).unwrap();
        prop_assert!(r.delta().iter().sum::<f64>().abs() < 1e-12);
        prop_assert!(r.delta().iter().all(|d| (-1.0..=1.0).contains(d)));
    }

    #[test]
    fn graph_loss_gradient_sign_follows_reward(scores in prop::collection::vec(1e-6f64..1.0, 12), delta in prop::collection::vec(-1.0f64..1.0, 4)) {
        let p = ProbabilityMatrix::from_scores(Array2::from_shape_vec((4, 3), scores).unwrap(), ProbabilityKind::NodeAnchor, true).unwrap();
        let latent = LatentGraph::from_structure(
            SparseAdjacency::from_rows(3, vec![vec![0, 2], vec![1, 2], vec![0, 1], vec![0, 2]]).unwrap(),
            2,
            SampleMode::Stochastic,
            ProbabilityKind::NodeAnchor,
        ).unwrap();
        let r = RewardVector::from_parts((0..4).collect(), delta.clone()).unwrap();
        let (_, grads) = graph_loss_terms(&r, &p, &latent).unwrap();
        for (i, _, g) in grads {
            // descent moves ŝ against the gradient: down when δ > 0 (wrong), up when δ < 0
            prop_assert_eq!(g.signum(), if delta[i] == 0.0 { g.signum() } else { delta[i].signum() });
        }
    }

    #[test]
    fn cross_entropy_is_shift_invariant(logits in matrix(5, 4), shift in prop::collection::vec(-50.0f64..50.0, 5)) {
        let labels = [0, 3, 1, 2, 2];
        let nodes = [0, 1, 2, 4];
        let mut shifted = logits.clone();
        for (mut row, s) in shifted.rows_mut().into_iter().zip(&shift) {
            row.mapv_inplace(|v| v + s);
        }
        let (l0, g0) = prediction_loss_grad(&logits, &labels, &nodes).unwrap();
        let (l1, g1) = prediction_loss_grad(&shifted, &labels, &nodes).unwrap();
        prop_assert!((l0 - l1).abs() < 1e-12);
        prop_assert!(rel_err(&from_array(&g0), &from_array(&g1)) < 1e-10);
    }

    #[test]
    fn delete_then_restore_round_trips(a in graph(20), ratio in 0.0f64..=1.0, seed in any::<u64>()) {
        let n = a.num_rows();
        let data = GraphDataset::new(
            Array2::<f64>::zeros((n, 1)),
            a.clone(),
            vec![0; n],
            Splits { train: vec![0], val: vec![], test: vec![] },
            Some(1),
        ).unwrap();
        let out = perturb_edges(&data, &NoiseSpec { mode: NoiseMode::Delete, ratio, seed }).unwrap();
        prop_assert_eq!(out.diff.removed.len(), (ratio * a.num_undirected_edges() as f64).floor() as usize);
        prop_assert_eq!(out.diff.revert(out.dataset.adjacency()).unwrap(), a);
    }

    #[test]
    fn gcn_is_permutation_equivariant(a in graph(12), seed in any::<u64>(), perm_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let n = a.num_rows();
        let mut r = common::rng(perm_seed);
        let x = from_array(&Array2::from_shape_fn((n, 3), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0));
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        // node i becomes perm[i]
        let edges: Vec<(usize, usize)> = a.undirected_edges().into_iter().map(|(i, j)| (perm[i], perm[j])).collect();
        let b = SparseAdjacency::from_undirected_edges(n, &edges).unwrap();
        let mut px = x.clone();
        for i in 0..n {
            px[perm[i]] = x[i].clone();
        }
        let stack = GcnStack::<f64>::with_widths(&[3, 8, 8, 8], seed);
        let out = gcn_forward(&stack, &gcn_operator(&a).unwrap(), to_array(&x).view()).unwrap();
        let pout = gcn_forward(&stack, &gcn_operator(&b).unwrap(), to_array(&px).view()).unwrap();
        for i in 0..n {
            for c in 0..8 {
                prop_assert!((out[(i, c)] - pout[(perm[i], c)]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn full_anchor_pipeline_matches_node_node() {
    // with s = N, anchors in identity order and the same selections, the
    // two-step operator on a block-clique selection equals the GCN operator
    let data = generate_sbm::<f64>(&SbmConfig::new(12, 3, 0.6, 0.1, 5, 0.3, 4)).unwrap();
    let ctx = GraphContext::new(&data).unwrap();
    let mut node = ModelParams::init(
        &data,
        ModelInit {
            mode: ModelMode::Ppgnn,
            k: 4,
            anchors: None,
            graph_conv: false,
            seed: 1,
        },
    )
    .unwrap();
    let mut anchor = ModelParams::init(
        &data,
        ModelInit {
            mode: ModelMode::PpgnnAnchor,
            k: 4,
            anchors: Some(12),
            graph_conv: false,
            seed: 1,
        },
    )
    .unwrap();
    anchor.anchors = Some(ppgnn::learner::AnchorSet::from_indices((0..12).collect(), 12).unwrap());
    anchor.gcn = node.gcn.clone();
    anchor.head = node.head.clone();
    node.embedding = anchor.embedding.clone();

    // every node selects the 4 members of its own block (blocks of 4)
    let rows: Vec<Vec<usize>> = (0..12)
        .map(|i| (4 * (i / 4)..4 * (i / 4) + 4).collect())
        .collect();
    let structure = SparseAdjacency::from_rows(12, rows).unwrap();
    let nn = LatentGraph::from_structure(
        structure.clone(),
        4,
        SampleMode::Deterministic,
        ProbabilityKind::NodeNode,
    )
    .unwrap();
    let na = LatentGraph::from_structure(
        structure,
        4,
        SampleMode::Deterministic,
        ProbabilityKind::NodeAnchor,
    )
    .unwrap();
    let x = data.features().view();
    let a = node.logits(&ctx, x, Some(&nn)).unwrap();
    let b = anchor.logits(&ctx, x, Some(&na)).unwrap();
    assert!(rel_err(&from_array(&a), &from_array(&b)) < 1e-10);

    // scores agree too (same embedding net, identity anchor order)
    let sa = node.learn_graph(&ctx, x).unwrap().unwrap();
    let sb = anchor.learn_graph(&ctx, x).unwrap().unwrap();
    assert!(
        rel_err(
            &from_array(sa.refined.scores()),
            &from_array(sb.refined.scores())
        ) < 1e-14
    );
    let _ = Split::Train;
}
