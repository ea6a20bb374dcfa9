use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::environment::ActionVector;

/// Largest network size for which the neighbour search enumerates every
/// corner of the action hypercube.
pub const EXACT_KNN_MAX_CELLS: usize = 8;

/// The `k` hypercube corners nearest to `proto` in Euclidean distance.
///
/// Up to [`EXACT_KNN_MAX_CELLS`] cells every corner is scored and ties go to
/// the lowest action index. Beyond that, corners are generated best-first
/// from the rounded proto-action: flipping bit `i` away from its rounded
/// value adds `|1 - 2 p_i|` to the squared distance, so the k smallest
/// distances are the k smallest subset sums of those costs. Distances stay
/// exact; ties between equal distances are broken by index only among
/// corners already on the frontier.
pub fn knn_actions(proto: &[f64], k: usize) -> Vec<ActionVector> {
    let bits = proto.len();
    assert!(bits % 2 == 0, "action length must be even");
    assert!(k >= 1, "k must be at least 1");
    if bits / 2 <= EXACT_KNN_MAX_CELLS {
        exact(proto, k)
    } else {
        best_first(proto, k)
    }
}

fn exact(proto: &[f64], k: usize) -> Vec<ActionVector> {
    let bits = proto.len();
    let total = 1usize << bits;
    assert!(k <= total, "k exceeds the action space");
    let mut scored: Vec<(f64, usize)> = (0..total)
        .map(|i| {
            let d = (0..bits)
                .map(|b| {
                    let bit = ((i >> (bits - 1 - b)) & 1) as f64;
                    (bit - proto[b]).powi(2)
                })
                .sum::<f64>();
            (d, i)
        })
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < total {
        scored.select_nth_unstable_by(k - 1, by_distance);
        scored.truncate(k);
    }
    scored.sort_by(by_distance);
    scored
        .into_iter()
        .map(|(_, i)| ActionVector::from_index(i, bits / 2))
        .collect()
}

#[derive(PartialEq)]
struct Node {
    cost: f64,
    /// Flip set as positions into the cost-sorted bit order; `last` is the
    /// largest position flipped.
    flips: Vec<usize>,
    index_key: Vec<bool>,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (cost, action bits)
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index_key.cmp(&self.index_key))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn best_first(proto: &[f64], k: usize) -> Vec<ActionVector> {
    let bits = proto.len();
    if bits < usize::BITS as usize {
        assert!(k <= 1usize << bits, "k exceeds the action space");
    }
    let rounded: Vec<bool> = proto.iter().map(|&p| p >= 0.5).collect();
    let mut order: Vec<usize> = (0..bits).collect();
    let cost = |i: usize| (1.0 - 2.0 * proto[i]).abs();
    order.sort_by(|&a, &b| cost(a).total_cmp(&cost(b)).then(a.cmp(&b)));
    let corner = |flips: &[usize]| {
        let mut v = rounded.clone();
        for &f in flips {
            v[order[f]] = !v[order[f]];
        }
        v
    };

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        cost: 0.0,
        flips: vec![],
        index_key: rounded.clone(),
    });
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let node = heap.pop().expect("frontier never empties before the space does");
        // Successors of the flip set {.., j}: add j+1, or replace j by j+1.
        // Each subset is generated exactly once.
        let next = node.flips.last().map_or(0, |&j| j + 1);
        if next < bits {
            let mut add = node.flips.clone();
            add.push(next);
            heap.push(Node {
                cost: node.cost + cost(order[next]),
                index_key: corner(&add),
                flips: add,
            });
            if let Some(&j) = node.flips.last() {
                let mut swap = node.flips.clone();
                *swap.last_mut().expect("nonempty") = next;
                heap.push(Node {
                    cost: node.cost - cost(order[j]) + cost(order[next]),
                    index_key: corner(&swap),
                    flips: swap,
                });
            }
        }
        out.push(ActionVector(node.index_key));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;
    use std::collections::HashSet;

    fn sq_dist(a: &ActionVector, p: &[f64]) -> f64 {
        a.as_unit_cube().iter().zip(p).map(|(x, y)| (x - y).powi(2)).sum()
    }

    #[test]
    fn nearest_corner() {
        let got = knn_actions(&[0.9, 0.1], 1);
        assert_eq!(got, vec![ActionVector(vec![true, false])]);
    }

    #[test]
    fn total_tie_comes_back_in_index_order() {
        let got: Vec<usize> = knn_actions(&[0.5, 0.5], 4).iter().map(|a| a.to_index()).collect();
        assert_eq!(got, vec![0, 1, 2, 3]);
    }

    #[test]
    fn full_k_returns_every_action() {
        let got = knn_actions(&[0.3, 0.8, 0.1, 0.6], 16);
        let mut idx: Vec<usize> = got.iter().map(|a| a.to_index()).collect();
        idx.sort_unstable();
        assert_eq!(idx, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn results_are_sorted_by_distance() {
        let mut rng = seeded_rng(1);
        for _ in 0..50 {
            let p: Vec<f64> = (0..6).map(|_| rng.random()).collect();
            let got = knn_actions(&p, 20);
            for w in got.windows(2) {
                assert!(sq_dist(&w[0], &p) <= sq_dist(&w[1], &p) + 1e-12);
            }
        }
    }

    #[test]
    fn best_first_matches_exhaustive_distances() {
        let mut rng = seeded_rng(2);
        for _ in 0..100 {
            let p: Vec<f64> = (0..10).map(|_| rng.random()).collect();
            let k = rng.random_range(1..=200);
            let a = exact(&p, k);
            let b = best_first(&p, k);
            assert_eq!(b.len(), k);
            for (x, y) in a.iter().zip(&b) {
                assert!((sq_dist(x, &p) - sq_dist(y, &p)).abs() < 1e-12);
            }
            let uniq: HashSet<_> = b.iter().collect();
            assert_eq!(uniq.len(), k);
        }
    }

    #[test]
    fn large_networks_use_the_expansion() {
        // 18 cells: 2^36 actions, far beyond enumeration
        let mut rng = seeded_rng(3);
        let p: Vec<f64> = (0..36).map(|_| rng.random()).collect();
        let got = knn_actions(&p, 5);
        assert_eq!(got.len(), 5);
        let rounded: Vec<bool> = p.iter().map(|&x| x >= 0.5).collect();
        assert_eq!(got[0].0, rounded);
    }
}
