use std::collections::BTreeSet;

use crowdspec::arbitrary::{arb_crowd, node, RandomCrowd, RelayKind};
use crowdspec::engine::compile_rules;
use crowdspec::structure::{directly_reachable, neighbourhood};
use proptest::prelude::*;

/// Direct reachability computed from the generator's own description.
fn direct(c: &RandomCrowd, i: usize, j: usize) -> bool {
    if i == j {
        return false;
    }
    let relaying = |k: usize| matches!(c.relay[k], RelayKind::Relay | RelayKind::Renamed);
    let ctx = |a: usize| -> Vec<usize> { c.edges.iter().filter(|(k, m)| *m == a && relaying(*k)).map(|(k, _)| *k).collect() };
    let members = |k: usize| -> BTreeSet<usize> { c.edges.iter().filter(|(x, _)| *x == k).map(|(_, m)| *m).collect() };
    let (ci, cj) = (ctx(i), ctx(j));
    ci.iter().any(|k1| cj.iter().any(|k2| k1 == k2 || !members(*k1).is_disjoint(&members(*k2))))
}

/// Transitive closure by repeated squaring of the adjacency matrix.
fn closure(c: &RandomCrowd) -> Vec<Vec<bool>> {
    let n = c.size;
    let mut r: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| direct(c, i, j)).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn neighbourhood_is_the_transitive_closure(c in arb_crowd(12)) {
        let sys = compile_rules(&c.document()).unwrap();
        let reach = closure(&c);
        for (i, row) in reach.iter().enumerate() {
            for j in 0..c.size {
                prop_assert_eq!(directly_reachable(&sys, &node(i), &node(j)).unwrap(), direct(&c, i, j));
            }
            let got = neighbourhood(&sys, &node(i)).unwrap();
            let want: BTreeSet<_> = (0..c.size).filter(|&j| j != i && row[j]).map(node).collect();
            prop_assert_eq!(&got.neighbourhood, &want, "source n{}\n{}", i, c.source());
            for (id, path) in &got.witness_paths {
                prop_assert_eq!(path.first(), Some(&node(i)));
                prop_assert_eq!(path.last(), Some(id));
                for w in path.windows(2) {
                    prop_assert!(directly_reachable(&sys, &w[0], &w[1]).unwrap());
                }
            }
        }
    }
}
