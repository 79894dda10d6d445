//! Property tests over randomly generated small diagrams, weights and kernels.

use std::collections::{BTreeMap, BTreeSet};

use pathmeas::kernel::{
    check_consistency_measurable, disintegrate, fixed_point_iterate, measurable_ifs_measure, CylinderTable,
    EdgeMeasure,
};
use pathmeas::measures::{
    check_consistency, check_ifs_fixed_point, check_shift_invariance, ifs_measure, markov_measure,
    stationary_tail_measure, tail_to_markov, IfsMeasure, PathMeasure, TransitionTable,
};
use pathmeas::path::{cell, enumerate_paths, prepend, shift, FinitePath};
use pathmeas::sfs::rn_derivative;
use pathmeas::spectral::perron_eigenpair;
use pathmeas::{height_vector, Diagram, SolverConfig, SparseMatrix, VertexDomain};
use proptest::prelude::*;

/// Square matrices with entries in `0..=max` and no zero row or column.
fn incidence(n: usize, max: u64) -> impl Strategy<Value = Vec<Vec<u64>>> {
    proptest::collection::vec(proptest::collection::vec(0..=max, n), n).prop_filter("zero row or column", |m| {
        let n = m.len();
        (0..n).all(|i| m[i].iter().any(|&x| x > 0) && (0..n).any(|j| m[j][i] > 0))
    })
}

fn diagram(max: u64) -> impl Strategy<Value = Diagram> {
    (2usize..=3).prop_flat_map(move |n| incidence(n, max)).prop_map(|m| Diagram::from_dense(&m).unwrap())
}

/// Strictly positive entries, so the diagram is primitive.
fn positive_diagram() -> impl Strategy<Value = Diagram> {
    (2usize..=3)
        .prop_flat_map(|n| proptest::collection::vec(proptest::collection::vec(1u64..=3, n), n))
        .prop_map(|m| Diagram::from_dense(&m).unwrap())
}

fn weights(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.05f64..1.0, n), n)
}

fn complete(n: usize) -> Diagram {
    Diagram::from_dense(&vec![vec![1; n]; n]).unwrap()
}

/// IFS on the complete diagram with `p[s][t]` rescaled so that the
/// harmonic problem has spectral radius one.
fn scaled_ifs(p: &[Vec<f64>]) -> IfsMeasure {
    let n = p.len();
    let d = complete(n);
    let domain = VertexDomain::Finite { count: n };
    let raw = SparseMatrix::explicit(
        domain,
        (0..n).flat_map(|s| (0..n).map(move |t| (t as i64, s as i64, p[s][t]))),
    )
    .unwrap();
    // q_w = sum over edges from w of p_e q_(r(e)), i.e. q = W^T q.
    let lambda = perron_eigenpair(&raw.transpose(), &SolverConfig::default().with_tol(1e-14)).unwrap().lambda;
    let w = raw.map(|x| x / lambda);
    ifs_measure(&d, w, &SolverConfig::default().with_tol(1e-14)).unwrap()
}

fn stochastic(p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    p.iter()
        .map(|row| {
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn heights_follow_the_incidence_recursion(d in diagram(2)) {
        let w = d.default_window();
        let f = d.matrix(0);
        let mut prev = height_vector(&d, 0, w).unwrap();
        for n in 1..=6 {
            let next = height_vector(&d, n, w).unwrap();
            for v in w.iter() {
                let expected: u64 = f.row(v).iter().map(|&(u, c)| c * prev.values[&u]).sum();
                prop_assert_eq!(next.values[&v], expected);
            }
            prev = next;
        }
    }

    #[test]
    fn generated_edges_have_valid_indices(d in diagram(3)) {
        for level in 0..3 {
            for v in d.default_window().iter() {
                for e in d.out_edges(level, v) {
                    prop_assert!((e.index as u64) < d.edge_count(level, e.source, e.target));
                }
            }
        }
    }

    #[test]
    fn cells_partition_each_level(d in diagram(2)) {
        for n in 0..=4 {
            let all: BTreeSet<FinitePath> = enumerate_paths(&d, n, d.default_window()).into_iter().collect();
            let mut seen = BTreeSet::new();
            let heights = height_vector(&d, n, d.default_window()).unwrap();
            for v in d.default_window().iter() {
                let c = cell(&d, n, v).unwrap();
                prop_assert_eq!(c.members.len() as u64, heights.values[&v]);
                for p in c.members {
                    prop_assert_eq!(p.end(), v);
                    prop_assert!(seen.insert(p), "cells overlap");
                }
            }
            prop_assert_eq!(seen, all);
        }
    }

    #[test]
    fn shift_undoes_prepend(d in diagram(2), pick in 0usize..64) {
        let paths = enumerate_paths(&d, 3, d.default_window());
        let x = &paths[pick % paths.len()];
        for e in d.in_edges(0, x.start()) {
            let y = prepend(e, x).unwrap();
            prop_assert_eq!(&shift(&d, &y).unwrap(), x);
            prop_assert_eq!(prepend(y.edges()[0], &shift(&d, &y).unwrap()).unwrap(), y.clone());
        }
    }

    #[test]
    fn tail_measures_are_consistent_and_round_trip(d in positive_diagram()) {
        let cfg = SolverConfig::default().with_tol(1e-14);
        let m = stationary_tail_measure(&d, &cfg).unwrap();
        let r = check_consistency(&m, 4, 1e-12);
        prop_assert!(r.pass, "{:?}", r);
        let markov = tail_to_markov(&m).unwrap();
        for len in 0..=4 {
            for c in enumerate_paths(&d, len, d.default_window()) {
                let (a, b) = (m.value(&c).unwrap(), markov.value(&c).unwrap());
                prop_assert!((a - b).abs() <= 1e-12 * a.max(b), "{c}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tail_rn_sequences_have_zero_spread(d in positive_diagram(), pick in 0usize..512) {
        let cfg = SolverConfig::default().with_tol(1e-14);
        let m = stationary_tail_measure(&d, &cfg).unwrap();
        let paths = enumerate_paths(&d, 5, d.default_window());
        let x = &paths[pick % paths.len()];
        let lambda = m.lambda().unwrap();
        for e in d.in_edges(0, x.start()) {
            let r = rn_derivative(&m, &e, x, 5, 1e-12).unwrap();
            prop_assert_eq!(r.spread, 0.0);
            prop_assert!((r.limit - 1.0 / lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn markov_measures_are_consistent(n in 2usize..=3, p in weights(3), q in proptest::collection::vec(0.1f64..1.0, 3)) {
        let p = stochastic(&p[..n].iter().map(|r| r[..n].to_vec()).collect::<Vec<_>>());
        let table: TransitionTable = (0..n)
            .flat_map(|s| (0..n).map(move |t| (s, t)))
            .map(|(s, t)| ((s as i64, t as i64, 0), p[s][t]))
            .collect();
        let q: BTreeMap<i64, f64> = (0..n).map(|v| (v as i64, q[v])).collect();
        let m = markov_measure(&complete(n), q, vec![table]).unwrap();
        let r = check_consistency(&m, 4, 1e-12);
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn ifs_measures_satisfy_their_identities(p in (2usize..=3).prop_flat_map(weights)) {
        let m = scaled_ifs(&p);
        prop_assert!(check_consistency(&m, 4, 1e-12).pass);
        let fixed = check_ifs_fixed_point(&m, 4, 1e-12);
        prop_assert!(fixed.pass, "{:?}", fixed);

        // Shift factor law: the measured factor is the column sum c_w.
        let shift = check_shift_invariance(&m, 3, 1e-12).unwrap();
        prop_assert!(shift.max_factor_error.unwrap() < 1e-12, "{:?}", shift.max_factor_error);

        // Ratio law: nu([f]) / nu([e]) = p_f / p_e when r(f) = r(e).
        let d = m.diagram().clone();
        for v in d.default_window().iter() {
            let into = d.in_edges(0, v);
            for e in &into {
                for f in &into {
                    let ce = FinitePath::root(e.source).extended(*e);
                    let cf = FinitePath::root(f.source).extended(*f);
                    let lhs = m.value(&cf).unwrap() / m.value(&ce).unwrap();
                    prop_assert!((lhs - m.weight(f) / m.weight(e)).abs() < 1e-12 * lhs.max(1.0));
                }
            }
        }
    }

    #[test]
    fn kernel_invariants(masses in (2usize..=3).prop_flat_map(weights)) {
        let n = masses.len();
        let labels: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let edges = (0..n)
            .flat_map(|x| (0..n).map(move |y| (x, y)))
            .map(|(x, y)| (labels[x].clone(), labels[y].clone(), masses[x][y]))
            .collect();
        let p = EdgeMeasure::new(labels.clone(), labels, edges).unwrap();
        let k = disintegrate(&p).unwrap();
        prop_assert!(k.reconstruction_error(&p) < 1e-15);

        let m = measurable_ifs_measure(&k, vec![1.0; n], 1e-12).unwrap();
        prop_assert!(check_consistency_measurable(&m, 3, 1e-12).unwrap().pass);
        let bridge = m.atomic_bridge().unwrap();
        prop_assert!(bridge.max_error(&m, 3).unwrap() < 1e-12);

        let depth = 5;
        let uniform = CylinderTable::uniform(&m, depth).unwrap();
        let run = fixed_point_iterate(&k, &uniform, depth - 1).unwrap();
        prop_assert!(run.monotone, "{:?}", run.distances);

        // With the exact root masses, depth - 1 applications reproduce mu.
        let exact = CylinderTable::of_measure(&m, depth).unwrap();
        let mut start = uniform;
        for x in 0..n {
            start.values.insert(vec![x], exact.get(&[x]));
        }
        let run = fixed_point_iterate(&k, &start, depth - 1).unwrap();
        prop_assert!(run.table.distance(&exact) < 1e-12);
    }

    #[test]
    fn perron_eigenvalue_grows_with_the_window(offsets in proptest::collection::vec(1u64..=3, 3)) {
        let m = SparseMatrix::translation(
            VertexDomain::Integers { band: 1 },
            [(-1, offsets[0]), (0, offsets[1]), (1, offsets[2])],
        )
        .unwrap();
        let a = Diagram::stationary(m).matrix(0).map(|x| x as f64).transpose();
        let pair = perron_eigenpair(&a, &SolverConfig::default().up_to_radius(32)).unwrap();
        for w in pair.lambda_history.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-9, "{:?}", pair.lambda_history);
        }
    }
}
