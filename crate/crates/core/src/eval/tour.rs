//! Ordering of pick-and-place pairs for a one-object-at-a-time carrier.
//!
//! Travel starts at the spawn, visits pick `i`, carries straight to place
//! `i`, then heads to the next pick. The sum of pick-to-place legs is fixed;
//! only the spawn leg and the place-to-pick transitions depend on order.

/// Distance data for a pair tour over `n` tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTour {
    /// Spawn to pick `i`.
    pub start: Vec<f64>,
    /// Pick `i` to place `i`.
    pub legs: Vec<f64>,
    /// `trans[j][i]`: place `j` to pick `i`.
    pub trans: Vec<Vec<f64>>,
}

/// Largest task count solved by enumerating every order.
pub const EXACT_LIMIT: usize = 6;

impl PairTour {
    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    /// Length of the tour visiting tasks in `order`.
    pub fn cost(&self, order: &[usize]) -> f64 {
        let Some(&first) = order.first() else {
            return 0.0;
        };
        let mut total = self.start[first] + self.legs[first];
        for w in order.windows(2) {
            total += self.trans[w[0]][w[1]] + self.legs[w[1]];
        }
        total
    }

    /// Exact optimum by enumerating all orders in lexicographic order.
    /// Ties keep the first order found.
    pub fn exact(&self) -> (Vec<usize>, f64) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut best = (order.clone(), self.cost(&order));
        while next_permutation(&mut order) {
            let c = self.cost(&order);
            if c < best.1 {
                best = (order.clone(), c);
            }
        }
        best
    }

    /// Nearest-neighbour completion from every ordered choice of the first
    /// two tasks, each refined by segment moves until no move improves;
    /// returns the best local optimum.
    pub fn heuristic(&self) -> (Vec<usize>, f64) {
        let n = self.len();
        if n == 0 {
            return (Vec::new(), 0.0);
        }
        let prefixes: Vec<Vec<usize>> = if n == 1 {
            vec![vec![0]]
        } else {
            (0..n)
                .flat_map(|a| (0..n).filter(move |b| *b != a).map(move |b| vec![a, b]))
                .collect()
        };
        let mut best: Option<(Vec<usize>, f64)> = None;
        for prefix in prefixes {
            let mut order = self.nearest_neighbour(&prefix);
            self.improve(&mut order);
            let c = self.cost(&order);
            if best.as_ref().is_none_or(|(_, b)| c < *b) {
                best = Some((order, c));
            }
        }
        best.expect("at least one start")
    }

    /// Exact for up to [`EXACT_LIMIT`] tasks, heuristic above.
    pub fn solve(&self) -> (Vec<usize>, f64) {
        if self.len() <= EXACT_LIMIT {
            self.exact()
        } else {
            self.heuristic()
        }
    }

    /// Extends `prefix` by repeatedly visiting the nearest unvisited pick.
    fn nearest_neighbour(&self, prefix: &[usize]) -> Vec<usize> {
        let n = self.len();
        let mut used = vec![false; n];
        let mut order = prefix.to_vec();
        for &i in prefix {
            used[i] = true;
        }
        while order.len() < n {
            let last = *order.last().expect("nonempty");
            let next = (0..n)
                .filter(|i| !used[*i])
                .min_by(|a, b| self.trans[last][*a].total_cmp(&self.trans[last][*b]))
                .expect("unvisited task");
            used[next] = true;
            order.push(next);
        }
        order
    }

    /// First-improvement descent over segment moves: cut any run of tasks,
    /// optionally reverse it, and reinsert it anywhere; plus pairwise swaps.
    /// Reversal in place and single-task relocation are special cases.
    fn improve(&self, order: &mut Vec<usize>) {
        let n = order.len();
        let mut current = self.cost(order);
        let mut try_move = |cand: Vec<usize>, order: &mut Vec<usize>| {
            let c = self.cost(&cand);
            if c < current - 1e-12 {
                *order = cand;
                current = c;
                true
            } else {
                false
            }
        };
        loop {
            let mut improved = false;
            for i in 0..n {
                for j in i..n {
                    let mut rest = order.clone();
                    let seg: Vec<usize> = rest.drain(i..=j).collect();
                    for at in 0..=rest.len() {
                        for reversed in [false, true] {
                            if (at == i && !reversed) || (reversed && i == j) {
                                continue;
                            }
                            let mut cand = rest.clone();
                            let mut piece = seg.clone();
                            if reversed {
                                piece.reverse();
                            }
                            cand.splice(at..at, piece);
                            improved |= try_move(cand, order);
                        }
                    }
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    let mut cand = order.clone();
                    cand.swap(i, j);
                    improved |= try_move(cand, order);
                }
            }
            if !improved {
                return;
            }
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
