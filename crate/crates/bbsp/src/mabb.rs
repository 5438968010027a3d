//! The marked splitting process: one distinguished particle rides on top
//! of an ordinary trajectory, and its placement after an edge ring follows
//! an explicit ratio law built from the `m`- and `(m-1)`-particle kernels.

use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::kernel::{KernelTable, Occupancy};
use crate::params::SplitParam;
use crate::sim::bbsp_step;
use crate::stream::EventStream;

/// Configuration of the marked process: `m - 1` non-marked particles plus
/// the marked particle's vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarkedState {
    pub nonmarked: Occupancy,
    pub marked: usize,
}

impl MarkedState {
    /// Total particle count including the mark.
    pub fn m(&self) -> u64 {
        self.nonmarked.total() + 1
    }

    /// The projection that forgets the marking.
    pub fn merged(&self) -> Occupancy {
        self.nonmarked.plus_one(self.marked)
    }
}

/// Probability that the mark ends on the canonical (lower) endpoint of the
/// ringing edge, given that the `n_edge` non-marked particles on the edge
/// moved to a split with `k_new` on that endpoint:
/// `[(k_new+1)/(n_edge+1)] * pmf_{n+1}(k_new+1) / pmf_n(k_new)`.
pub fn mark_to_lower(table: &KernelTable, n_edge: usize, k_new: usize) -> f64 {
    let with_mark = table.row(n_edge + 1);
    let without = table.row(n_edge);
    (k_new as f64 + 1.0) / (n_edge as f64 + 1.0) * with_mark.probs[k_new + 1]
        / without.probs[k_new]
}

/// Same jump with the mark ending on the upper endpoint:
/// `[(n_edge-k_new+1)/(n_edge+1)] * pmf_{n+1}(k_new) / pmf_n(k_new)`.
pub fn mark_to_upper(table: &KernelTable, n_edge: usize, k_new: usize) -> f64 {
    let with_mark = table.row(n_edge + 1);
    let without = table.row(n_edge);
    ((n_edge - k_new) as f64 + 1.0) / (n_edge as f64 + 1.0) * with_mark.probs[k_new]
        / without.probs[k_new]
}

fn check_edge_move(e: Edge, xi: &Occupancy, xi_next: &Occupancy) -> Result<(usize, usize)> {
    if xi.n() != xi_next.n() || xi.total() != xi_next.total() {
        return Err(Error::ZeroProbabilityTransition);
    }
    for v in 1..=xi.n() {
        if !e.contains(v) && xi.get(v) != xi_next.get(v) {
            return Err(Error::ZeroProbabilityTransition);
        }
    }
    let n_edge = (xi.get(e.v) + xi.get(e.w)) as usize;
    Ok((n_edge, xi_next.get(e.v) as usize))
}

/// The placement probability of the marked particle: given the non-marked
/// configuration moves `xi -> xi_next` on ringing edge `e` with the mark
/// on one endpoint, the chance the mark ends on `target`. The conditional
/// law does not depend on which endpoint currently holds the mark.
pub fn marked_placement_prob(
    table: &KernelTable,
    e: Edge,
    xi: &Occupancy,
    xi_next: &Occupancy,
    target: usize,
) -> Result<f64> {
    let (n_edge, k_new) = check_edge_move(e, xi, xi_next)?;
    if target == e.v {
        Ok(mark_to_lower(table, n_edge, k_new))
    } else if target == e.w {
        Ok(mark_to_upper(table, n_edge, k_new))
    } else {
        Err(Error::VertexOutOfRange(target, xi.n()))
    }
}

/// One-step transition probability of the marked process from `(xi, x)`
/// to `(xi_next, y)` when edge `e` rings, with both `x` and `y` on `e`:
/// `[(xi_next(y)+1)/(n+1)] * P^{(m)}(merged move)`.
pub fn mabb_transition_prob(
    table: &KernelTable,
    e: Edge,
    xi: &Occupancy,
    xi_next: &Occupancy,
    target: usize,
) -> Result<f64> {
    let (n_edge, k_new) = check_edge_move(e, xi, xi_next)?;
    // count on the canonical endpoint after the merged (m-particle) move
    let merged_k = if target == e.v { k_new + 1 } else { k_new };
    let occupancy_weight = (xi_next.get(target) as f64 + 1.0) / (n_edge as f64 + 1.0);
    Ok(occupancy_weight * table.row(n_edge + 1).probs[merged_k])
}

/// The deterministic non-marked update: identical to the plain process
/// step driven by the same uniform.
pub fn mabb_fn(table: &KernelTable, u: f64, e: Edge, xi: &Occupancy) -> Occupancy {
    bbsp_step(table, xi, e, u)
}

/// The deterministic marked update: stays put unless the mark sits on the
/// ringing edge, in which case it stays exactly when `u_prime` falls below
/// its placement probability.
pub fn mabb_star_fn(
    table: &KernelTable,
    u: f64,
    u_prime: f64,
    e: Edge,
    xi: &Occupancy,
    marked: usize,
) -> usize {
    if !e.contains(marked) {
        return marked;
    }
    let xi_next = mabb_fn(table, u, e, xi);
    let k_new = xi_next.get(e.v) as usize;
    let n_edge = (xi.get(e.v) + xi.get(e.w)) as usize;
    let stay = if marked == e.v {
        mark_to_lower(table, n_edge, k_new)
    } else {
        mark_to_upper(table, n_edge, k_new)
    };
    if u_prime < stay {
        marked
    } else {
        e.other(marked)
    }
}

/// Runs the marked process until `t_end`.
pub fn simulate_mabb(
    g: &WeightedGraph,
    table: &KernelTable,
    state0: MarkedState,
    stream: &mut EventStream,
    t_end: f64,
) -> MarkedState {
    let mut state = state0;
    while stream.peek().time <= t_end {
        let ev = stream.next_event();
        let e = g.edge(ev.edge);
        let nonmarked = mabb_fn(table, ev.u_b, e, &state.nonmarked);
        let marked = mabb_star_fn(table, ev.u_b, ev.u_c, e, &state.nonmarked, state.marked);
        state = MarkedState { nonmarked, marked };
    }
    state
}

/// Like [`simulate_mabb`] but recording the state at the given ascending
/// sample times.
pub fn simulate_mabb_sampled(
    g: &WeightedGraph,
    table: &KernelTable,
    state0: MarkedState,
    stream: &mut EventStream,
    times: &[f64],
) -> Vec<MarkedState> {
    let mut out = Vec::with_capacity(times.len());
    let mut state = state0;
    for &t in times {
        while stream.peek().time <= t {
            let ev = stream.next_event();
            let e = g.edge(ev.edge);
            let nonmarked = mabb_fn(table, ev.u_b, e, &state.nonmarked);
            let marked =
                mabb_star_fn(table, ev.u_b, ev.u_c, e, &state.nonmarked, state.marked);
            state = MarkedState { nonmarked, marked };
        }
        out.push(state.clone());
    }
    out
}

/// The equilibrium conditional law of the mark's location given the
/// non-marked configuration: `chi(xi(v)) / (a(m-1) + bn)`.
pub fn pi_xi(param: SplitParam, xi: &Occupancy, v: usize) -> f64 {
    let denom = param.a() * xi.total() + param.b() * xi.n() as u64;
    param.colour(xi.get(v) as u64) as f64 / denom as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::exact;
    use crate::stream::TimeScale;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn grid() -> Vec<SplitParam> {
        [(1, 2), (1, 1), (3, 2), (2, 1), (5, 1), (40, 1)]
            .iter()
            .map(|&(b, a)| SplitParam::from_fraction(b, a).unwrap())
            .collect()
    }

    fn e12() -> Edge {
        Edge { v: 1, w: 2, weight: 1.0 }
    }

    #[test]
    fn mark_alone_moves_fairly() {
        for param in grid() {
            let table = KernelTable::new(param);
            assert!((mark_to_lower(&table, 0, 0) - 0.5).abs() < 1e-15);
            assert!((mark_to_upper(&table, 0, 0) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn placement_probabilities_are_complementary() {
        for param in grid() {
            let table = KernelTable::new(param);
            for n in 0..=8usize {
                for k in 0..=n {
                    let total = mark_to_lower(&table, n, k) + mark_to_upper(&table, n, k);
                    assert!(
                        (total - 1.0).abs() < 1e-12,
                        "s={param} N={n} k={k}: sum {total}"
                    );
                }
            }
        }
    }

    #[test]
    fn placement_matches_exact_ratio_oracle() {
        // one non-marked particle on the edge, s=1, staying on v
        let param = SplitParam::from_fraction(1, 1).unwrap();
        let table = KernelTable::new(param);
        let xi = Occupancy::new(vec![1, 0]);
        let xi_next = Occupancy::new(vec![1, 0]);
        let p = marked_placement_prob(&table, e12(), &xi, &xi_next, 1).unwrap();
        let oracle = exact::mark_to_v(1, 1, 1, 1).to_f64().unwrap();
        assert!((p - oracle).abs() < 1e-14);
        // exact oracle across the grid and small edge totals
        for param in grid() {
            let table = KernelTable::new(param);
            for n in 0..=6usize {
                for k in 0..=n {
                    let got = mark_to_lower(&table, n, k);
                    let want = exact::mark_to_v(n, k, param.a(), param.b())
                        .to_f64()
                        .unwrap();
                    assert!((got - want).abs() < 1e-12, "s={param} N={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn placement_rejects_invalid_moves() {
        let table = KernelTable::new(SplitParam::from_fraction(1, 1).unwrap());
        let xi = Occupancy::new(vec![1, 0, 2]);
        // changes off the ringing edge
        let bad = Occupancy::new(vec![1, 1, 1]);
        assert!(matches!(
            marked_placement_prob(&table, e12(), &xi, &bad, 1),
            Err(Error::ZeroProbabilityTransition)
        ));
        // total mismatch
        let bad = Occupancy::new(vec![1, 1, 2]);
        assert!(matches!(
            marked_placement_prob(&table, e12(), &xi, &bad, 1),
            Err(Error::ZeroProbabilityTransition)
        ));
    }

    #[test]
    fn colour_flow_identity() {
        // chi(kv) P(v,v) + chi(kw) P(w,v) = chi(k'), which reduces to
        // (aN + 2b) * mark_to_lower = chi(k')
        for param in grid() {
            let table = KernelTable::new(param);
            let (a, b) = (param.a() as f64, param.b() as f64);
            for n in 0..=8usize {
                for kv in 0..=n {
                    let kw = n - kv;
                    for k_new in 0..=n {
                        let lhs = param.colour(kv as u64) as f64
                            * mark_to_lower(&table, n, k_new)
                            + param.colour(kw as u64) as f64
                                * mark_to_lower(&table, n, k_new);
                        let rhs = a * k_new as f64 + b;
                        assert!(
                            (lhs - rhs).abs() < 1e-12,
                            "s={param} N={n} k'={k_new}: {lhs} vs {rhs}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn projection_identity() {
        // staying + swapping marked transitions recover the merged kernel
        for param in grid() {
            let table = KernelTable::new(param);
            for n in 0..=6usize {
                for kv in 0..=n as u32 {
                    let xi = Occupancy::new(vec![kv, n as u32 - kv]);
                    for k_new in 0..=n as u32 {
                        let xi_next = Occupancy::new(vec![k_new, n as u32 - k_new]);
                        // target (xi_next, v)
                        let stay =
                            mabb_transition_prob(&table, e12(), &xi, &xi_next, 1).unwrap();
                        // target (zeta, w) merging to the same m-particle state
                        let swap = if n as u32 - k_new >= 1 {
                            let zeta =
                                Occupancy::new(vec![k_new + 1, n as u32 - k_new - 1]);
                            mabb_transition_prob(&table, e12(), &xi, &zeta, 2).unwrap()
                        } else {
                            0.0
                        };
                        let merged = table.row(n + 1).probs[k_new as usize + 1];
                        assert!(
                            (stay + swap - merged).abs() < 1e-12,
                            "s={param} N={n} kv={kv} k'={k_new}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_mark_description_agrees() {
        // one-step law of (xi', mark) from the ratio construction vs
        // "update the merged state, then mark a uniform particle on the edge"
        let param = SplitParam::from_fraction(3, 2).unwrap();
        let table = KernelTable::new(param);
        let xi = Occupancy::new(vec![2, 1]);
        let marked0 = 1usize;
        let draws = 200_000u64;
        let mut ratio_hist: HashMap<(u32, usize), u64> = HashMap::new();
        let mut uniform_hist: HashMap<(u32, usize), u64> = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n_edge = 3usize;
        for _ in 0..draws {
            // ratio-law path
            let u: f64 = rng.random();
            let u2: f64 = rng.random();
            let xi_next = mabb_fn(&table, u, e12(), &xi);
            let mark = mabb_star_fn(&table, u, u2, e12(), &xi, marked0);
            *ratio_hist.entry((xi_next.get(1), mark)).or_insert(0) += 1;
            // merged path: BBSP on m particles, then mark uniform on edge
            let merged = xi.plus_one(marked0);
            let u3: f64 = rng.random();
            let merged_next = bbsp_step(&table, &merged, e12(), u3);
            let pick = rng.random_range(0..(n_edge as u32 + 1));
            let mark2 = if pick < merged_next.get(1) { 1 } else { 2 };
            let k_nonmarked = merged_next.get(1) - if mark2 == 1 { 1 } else { 0 };
            *uniform_hist.entry((k_nonmarked, mark2)).or_insert(0) += 1;
        }
        for kv in 0..=3u32 {
            for mark in [1usize, 2] {
                let p1 = *ratio_hist.get(&(kv, mark)).unwrap_or(&0) as f64 / draws as f64;
                let p2 = *uniform_hist.get(&(kv, mark)).unwrap_or(&0) as f64 / draws as f64;
                let se = ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / draws as f64).sqrt();
                assert!(
                    (p1 - p2).abs() <= 4.0 * se.max(1e-6),
                    "cell ({kv},{mark}): {p1} vs {p2}"
                );
            }
        }
    }

    #[test]
    fn mabb_fn_examples() {
        let param = SplitParam::from_fraction(1, 1).unwrap();
        let table = KernelTable::new(param);
        // empty edge: unchanged
        let xi = Occupancy::new(vec![0, 0, 4]);
        assert_eq!(mabb_fn(&table, 0.9, e12(), &xi), xi);
        // near-even split for u below p*
        let xi = Occupancy::new(vec![6, 0]);
        let next = mabb_fn(&table, 0.5 * param.p_star(), e12(), &xi);
        assert!(next.get(1) >= 2 && next.get(1) <= 4);
        // full distribution check for N=4 over a u-grid
        let xi = Occupancy::new(vec![4, 0]);
        let grid_n = 40_000;
        let mut hist = vec![0u64; 5];
        for i in 0..grid_n {
            let u = (i as f64 + 0.5) / grid_n as f64;
            hist[mabb_fn(&table, u, e12(), &xi).get(1) as usize] += 1;
        }
        let row = table.row(4);
        for k in 0..=4 {
            let freq = hist[k] as f64 / grid_n as f64;
            assert!((freq - row.probs[k]).abs() < 1e-4, "k={k}");
        }
    }

    #[test]
    fn mabb_star_examples() {
        let table = KernelTable::new(SplitParam::from_fraction(1, 2).unwrap());
        let xi = Occupancy::new(vec![1, 2, 0]);
        // mark off the ringing edge never moves
        assert_eq!(mabb_star_fn(&table, 0.4, 0.9, e12(), &xi, 3), 3);
        // u' = 0 always stays (placement probabilities are positive)
        for u in [0.0, 0.3, 0.8] {
            assert_eq!(mabb_star_fn(&table, u, 0.0, e12(), &xi, 1), 1);
            assert_eq!(mabb_star_fn(&table, u, 0.0, e12(), &xi, 2), 2);
        }
    }

    #[test]
    fn empirical_stay_frequency_matches_placement_prob() {
        let param = SplitParam::from_fraction(2, 1).unwrap();
        let table = KernelTable::new(param);
        let xi = Occupancy::new(vec![2, 1]);
        // fix the non-marked move via a fixed u_b
        let u_b = 0.55;
        let xi_next = mabb_fn(&table, u_b, e12(), &xi);
        let want = marked_placement_prob(&table, e12(), &xi, &xi_next, 1).unwrap();
        let draws = 100_000u64;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut stays = 0u64;
        for _ in 0..draws {
            if mabb_star_fn(&table, u_b, rng.random(), e12(), &xi, 1) == 1 {
                stays += 1;
            }
        }
        let freq = stays as f64 / draws as f64;
        let se = (want * (1.0 - want) / draws as f64).sqrt();
        assert!((freq - want).abs() <= 4.0 * se, "{freq} vs {want}");
    }

    #[test]
    fn zero_horizon_is_identity() {
        let g = WeightedGraph::line(3).unwrap();
        let table = KernelTable::new(SplitParam::from_fraction(1, 1).unwrap());
        let s0 = MarkedState {
            nonmarked: Occupancy::new(vec![1, 0, 1]),
            marked: 2,
        };
        let mut stream = EventStream::new(&g, 4, TimeScale::Canonical);
        assert_eq!(simulate_mabb(&g, &table, s0.clone(), &mut stream, 0.0), s0);
    }

    #[test]
    fn forgetting_the_mark_reproduces_plain_process() {
        // merged MaBB law vs plain m-particle law at a fixed time
        let g = WeightedGraph::line(2).unwrap();
        let param = SplitParam::from_fraction(1, 1).unwrap();
        let table = KernelTable::new(param);
        let replicas = 30_000u64;
        let t = 2.0;
        let mut merged_hist: HashMap<Vec<u32>, u64> = HashMap::new();
        let mut plain_hist: HashMap<Vec<u32>, u64> = HashMap::new();
        for r in 0..replicas {
            let s0 = MarkedState {
                nonmarked: Occupancy::new(vec![1, 0]),
                marked: 1,
            };
            let mut stream = EventStream::substream(&g, 51, TimeScale::Canonical, r);
            let end = simulate_mabb(&g, &table, s0, &mut stream, t);
            *merged_hist
                .entry(end.merged().as_slice().to_vec())
                .or_insert(0) += 1;

            let mut stream = EventStream::substream(&g, 52, TimeScale::Canonical, r);
            let tr = crate::sim::simulate_bbsp(
                &g,
                &table,
                Occupancy::new(vec![2, 0]),
                &mut stream,
                t,
            );
            *plain_hist.entry(tr.current.as_slice().to_vec()).or_insert(0) += 1;
        }
        for key in plain_hist.keys() {
            let p1 = *merged_hist.get(key).unwrap_or(&0) as f64 / replicas as f64;
            let p2 = plain_hist[key] as f64 / replicas as f64;
            let se = ((p1 * (1.0 - p1) + p2 * (1.0 - p2)) / replicas as f64).sqrt();
            assert!((p1 - p2).abs() <= 4.0 * se, "state {key:?}: {p1} vs {p2}");
        }
    }

    #[test]
    fn pi_xi_examples() {
        let param = SplitParam::from_fraction(1, 1).unwrap();
        let xi = Occupancy::new(vec![1, 1]);
        assert!((pi_xi(param, &xi, 1) - 0.5).abs() < 1e-15);
        assert!((pi_xi(param, &xi, 2) - 0.5).abs() < 1e-15);
        // sums to one for arbitrary configurations
        for param in grid() {
            let xi = Occupancy::new(vec![3, 0, 2, 1]);
            let total: f64 = (1..=4).map(|v| pi_xi(param, &xi, v)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        // m = 1: no non-marked particles, uniform over vertices
        let xi = Occupancy::new(vec![0, 0, 0]);
        for v in 1..=3 {
            assert!((pi_xi(param, &xi, v) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn long_run_conditional_law_matches_pi_xi() {
        let g = WeightedGraph::line(2).unwrap();
        let param = SplitParam::from_fraction(1, 1).unwrap();
        let table = KernelTable::new(param);
        let replicas = 30_000u64;
        let t = 12.0;
        let mut by_xi: HashMap<Vec<u32>, (u64, u64)> = HashMap::new();
        for r in 0..replicas {
            let s0 = MarkedState {
                nonmarked: Occupancy::new(vec![1, 0]),
                marked: 1,
            };
            let mut stream = EventStream::substream(&g, 60, TimeScale::Canonical, r);
            let end = simulate_mabb(&g, &table, s0, &mut stream, t);
            let entry = by_xi.entry(end.nonmarked.as_slice().to_vec()).or_insert((0, 0));
            entry.0 += 1;
            if end.marked == 1 {
                entry.1 += 1;
            }
        }
        for (xi_vec, (total, on_v1)) in by_xi {
            let xi = Occupancy::new(xi_vec);
            let want = pi_xi(param, &xi, 1);
            let freq = on_v1 as f64 / total as f64;
            let se = (want * (1.0 - want) / total as f64).sqrt();
            assert!(
                (freq - want).abs() <= 4.0 * se,
                "xi={xi}: {freq} vs {want}"
            );
        }
    }
}
