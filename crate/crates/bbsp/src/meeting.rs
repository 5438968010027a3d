//! Expected meeting times of two independent random walks on the
//! half-weight graph: two walks carrying their own ring clocks meet the
//! first time they sit on the two ends of a ringing edge. Exact values
//! come from a linear first-passage solve on the product chain; a Monte
//! Carlo estimator runs the same jump chain directly.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::stream::TimeScale;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cap on product-chain sizes for the exact solve.
pub const PRODUCT_STATE_CAP: usize = 10_000;

/// Exact expected meeting times for every ordered start pair.
#[derive(Debug, Clone)]
pub struct ProductChainSolve {
    /// `expected[i-1][j-1]` is the expected meeting time from `(i, j)`;
    /// the diagonal is zero by convention.
    pub expected: Vec<Vec<f64>>,
    pub max_entry: f64,
}

impl ProductChainSolve {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.expected[i - 1][j - 1]
    }
}

/// Per-edge clock rate of a single walk in the given time scale: the walk
/// moves on the half-weight graph, so canonical time gives
/// `(r_e/2) / sum r_e` and raw time gives `r_e / 2`.
fn walk_rates(g: &WeightedGraph, scale: TimeScale) -> Vec<f64> {
    match scale {
        TimeScale::Canonical => g.ring_probs().iter().map(|p| p / 2.0).collect(),
        TimeScale::RawRate => g.edges().iter().map(|e| e.weight / 2.0).collect(),
    }
}

/// Solves the first-passage system for the expected meeting time of two
/// independent walks, one linear equation per ordered non-diagonal pair.
pub fn exact_meeting_times(g: &WeightedGraph, scale: TimeScale) -> Result<ProductChainSolve> {
    let n = g.n();
    if n * n > PRODUCT_STATE_CAP {
        return Err(Error::StateSpaceCap {
            states: (n * n) as u128,
            cap: PRODUCT_STATE_CAP as u128,
        });
    }
    let rates = walk_rates(g, scale);
    // index ordered pairs (x, y) with x != y
    let mut index = vec![vec![usize::MAX; n + 1]; n + 1];
    let mut pairs = Vec::new();
    for x in 1..=n {
        for y in 1..=n {
            if x != y {
                index[x][y] = pairs.len();
                pairs.push((x, y));
            }
        }
    }
    let dim = pairs.len();
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let b = DVector::<f64>::from_element(dim, 1.0);
    for (row, &(x, y)) in pairs.iter().enumerate() {
        let mut out_rate = 0.0;
        for &eid in g.incident(x) {
            let e = g.edge(eid);
            out_rate += rates[eid];
            let z = e.other(x);
            if z != y {
                a[(row, index[z][y])] -= rates[eid];
            }
        }
        for &eid in g.incident(y) {
            let e = g.edge(eid);
            out_rate += rates[eid];
            let z = e.other(y);
            if z != x {
                a[(row, index[x][z])] -= rates[eid];
            }
        }
        a[(row, row)] += out_rate;
    }
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InternalConsistency("singular meeting-time system".into()))?;
    let mut expected = vec![vec![0.0; n]; n];
    let mut max_entry: f64 = 0.0;
    for (k, &(x, y)) in pairs.iter().enumerate() {
        expected[x - 1][y - 1] = sol[k];
        max_entry = max_entry.max(sol[k]);
    }
    Ok(ProductChainSolve { expected, max_entry })
}

/// Monte Carlo estimate of the expected meeting time from `(i, j)`.
/// Returns `(mean, standard error)`.
pub fn mc_meeting_time(
    g: &WeightedGraph,
    i: usize,
    j: usize,
    scale: TimeScale,
    seed: u64,
    replicas: u64,
) -> (f64, f64) {
    let rates = walk_rates(g, scale);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for r in 0..replicas {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r);
        let t = single_meeting(g, &rates, i, j, &mut rng, f64::INFINITY).expect("no horizon");
        sum += t;
        sumsq += t * t;
    }
    let mean = sum / replicas as f64;
    let var = (sumsq / replicas as f64 - mean * mean).max(0.0);
    (mean, (var / replicas as f64).sqrt())
}

/// One realization of the two-walk jump chain until meeting (or `horizon`).
/// Returns the meeting time, or `None` if the horizon was reached first.
pub fn single_meeting(
    g: &WeightedGraph,
    rates: &[f64],
    i: usize,
    j: usize,
    rng: &mut impl Rng,
    horizon: f64,
) -> Option<f64> {
    let mut walk = TwoWalks::new(i, j);
    loop {
        match walk.advance(g, rates, rng) {
            Advance::Met(t) if t <= horizon => return Some(t),
            Advance::Met(_) => return None,
            Advance::Moved(t) if t > horizon => return None,
            Advance::Moved(_) => {}
        }
    }
}

/// Two independent walks on the half-weight graph with their own clocks,
/// advanced one ring at a time. Used both for meeting-time estimation and
/// for comparing labelled pair dynamics against the product chain.
#[derive(Debug, Clone)]
pub struct TwoWalks {
    pub x: usize,
    pub y: usize,
    pub time: f64,
    pub met: bool,
}

pub enum Advance {
    /// The walks met at this time.
    Met(f64),
    /// One walk moved (or the clock advanced) without a meeting.
    Moved(f64),
}

impl TwoWalks {
    pub fn new(x: usize, y: usize) -> Self {
        let met = x == y;
        Self {
            x,
            y,
            time: 0.0,
            met,
        }
    }

    /// Advances to the next incident ring. A ring of the connecting edge
    /// for either walk is a meeting. Walks that share a vertex meet at the
    /// first ring of any edge incident to it.
    pub fn advance(&mut self, g: &WeightedGraph, rates: &[f64], rng: &mut impl Rng) -> Advance {
        if self.met {
            return Advance::Met(self.time);
        }
        let mut lanes: Vec<(usize, bool, f64)> = Vec::new(); // (edge, moves_x, rate)
        for &eid in g.incident(self.x) {
            lanes.push((eid, true, rates[eid]));
        }
        for &eid in g.incident(self.y) {
            lanes.push((eid, false, rates[eid]));
        }
        let total: f64 = lanes.iter().map(|l| l.2).sum();
        let u: f64 = rng.random();
        self.time += -(1.0 - u).ln() / total;
        let mut pick: f64 = rng.random::<f64>() * total;
        let mut chosen = lanes[lanes.len() - 1];
        for lane in &lanes {
            if pick < lane.2 {
                chosen = *lane;
                break;
            }
            pick -= lane.2;
        }
        let (eid, moves_x, _) = chosen;
        let e = g.edge(eid);
        if self.x == self.y || (e.contains(self.x) && e.contains(self.y)) {
            self.met = true;
            return Advance::Met(self.time);
        }
        if moves_x {
            self.x = e.other(self.x);
        } else {
            self.y = e.other(self.y);
        }
        Advance::Moved(self.time)
    }
}

/// Rates accessor for callers driving [`TwoWalks`] directly.
pub fn two_walk_rates(g: &WeightedGraph, scale: TimeScale) -> Vec<f64> {
    walk_rates(g, scale)
}

/// Average hitting time `tau_0 = (1/n^2) sum_{i,j} E_i T_j` of the single
/// walk on the half-weight graph (its equilibrium is uniform since the
/// jump rates are symmetric). A sanity ceiling for the maximal meeting
/// time; reported, not asserted.
pub fn tau0_upper_proxy(g: &WeightedGraph, scale: TimeScale) -> Result<f64> {
    let n = g.n();
    let rates = walk_rates(g, scale);
    let mut total = 0.0;
    for target in 1..=n {
        // unknowns: E_i T_target for i != target
        let mut index = vec![usize::MAX; n + 1];
        let mut ids = Vec::new();
        for v in 1..=n {
            if v != target {
                index[v] = ids.len();
                ids.push(v);
            }
        }
        let dim = ids.len();
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let b = DVector::<f64>::from_element(dim, 1.0);
        for (row, &v) in ids.iter().enumerate() {
            let mut out = 0.0;
            for &eid in g.incident(v) {
                let z = g.edge(eid).other(v);
                out += rates[eid];
                if z != target {
                    a[(row, index[z])] -= rates[eid];
                }
            }
            a[(row, row)] += out;
        }
        let sol = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::InternalConsistency("singular hitting-time system".into()))?;
        total += sol.iter().sum::<f64>();
    }
    Ok(total / (n * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_vertex_line_meets_at_unit_rate() {
        let g = WeightedGraph::line(2).unwrap();
        let solve = exact_meeting_times(&g, TimeScale::Canonical).unwrap();
        assert!((solve.get(1, 2) - 1.0).abs() < 1e-9);
        assert_eq!(solve.get(1, 1), 0.0);
        assert_eq!(solve.get(2, 2), 0.0);
        assert!((solve.max_entry - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_is_zero_everywhere() {
        for g in [
            WeightedGraph::line(5).unwrap(),
            WeightedGraph::cycle(4).unwrap(),
            WeightedGraph::complete(4, None).unwrap(),
        ] {
            let solve = exact_meeting_times(&g, TimeScale::Canonical).unwrap();
            for i in 1..=g.n() {
                assert_eq!(solve.get(i, i), 0.0);
            }
        }
    }

    #[test]
    fn cycle_three_is_vertex_transitive() {
        let solve =
            exact_meeting_times(&WeightedGraph::cycle(3).unwrap(), TimeScale::Canonical).unwrap();
        let reference = solve.get(1, 2);
        for i in 1..=3 {
            for j in 1..=3 {
                if i != j {
                    assert!((solve.get(i, j) - reference).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn line_reflection_symmetry() {
        let solve =
            exact_meeting_times(&WeightedGraph::line(4).unwrap(), TimeScale::Canonical).unwrap();
        assert!((solve.get(1, 2) - solve.get(4, 3)).abs() < 1e-9);
        assert!((solve.get(1, 3) - solve.get(4, 2)).abs() < 1e-9);
        // symmetric in the two walks
        assert!((solve.get(1, 3) - solve.get(3, 1)).abs() < 1e-9);
    }

    #[test]
    fn halving_doubles_meeting_times_in_raw_time() {
        let g = WeightedGraph::new(4, &[(1, 2, 1.0), (2, 3, 2.0), (3, 4, 0.5), (1, 3, 1.0)])
            .unwrap();
        let base = exact_meeting_times(&g, TimeScale::RawRate).unwrap();
        let halved = exact_meeting_times(&g.halve(), TimeScale::RawRate).unwrap();
        for i in 1..=4 {
            for j in 1..=4 {
                assert!((halved.get(i, j) - 2.0 * base.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn canonical_time_ignores_global_weight_scale() {
        let g = WeightedGraph::line(4).unwrap();
        let scaled = WeightedGraph::new(4, &[(1, 2, 7.0), (2, 3, 7.0), (3, 4, 7.0)]).unwrap();
        let a = exact_meeting_times(&g, TimeScale::Canonical).unwrap();
        let b = exact_meeting_times(&scaled, TimeScale::Canonical).unwrap();
        for i in 1..=4 {
            for j in 1..=4 {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mc_agrees_with_exact_on_l2() {
        let g = WeightedGraph::line(2).unwrap();
        let (mean, se) = mc_meeting_time(&g, 1, 2, TimeScale::Canonical, 404, 100_000);
        assert!((mean - 1.0).abs() <= 3.0 * se, "{mean} +- {se}");
        let (zero, _) = mc_meeting_time(&g, 1, 1, TimeScale::Canonical, 404, 10);
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn mc_agrees_with_exact_on_small_families() {
        for g in [
            WeightedGraph::line(4).unwrap(),
            WeightedGraph::cycle(5).unwrap(),
            WeightedGraph::complete(4, None).unwrap(),
        ] {
            let solve = exact_meeting_times(&g, TimeScale::Canonical).unwrap();
            let (mean, se) = mc_meeting_time(&g, 1, g.n(), TimeScale::Canonical, 99, 20_000);
            let want = solve.get(1, g.n());
            assert!(
                (mean - want).abs() <= 3.0 * se,
                "n={} {mean}+-{se} vs {want}",
                g.n()
            );
        }
    }

    #[test]
    fn tau0_on_two_vertices() {
        // single walk on the halved L_2 jumps at rate 1/2, so the expected
        // hitting time of the other vertex is 2 and tau0 = (2+2)/4 = 1
        let g = WeightedGraph::line(2).unwrap();
        let tau0 = tau0_upper_proxy(&g, TimeScale::Canonical).unwrap();
        assert!((tau0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tau0_dominates_max_meeting_on_small_graphs() {
        for g in [
            WeightedGraph::line(4).unwrap(),
            WeightedGraph::cycle(6).unwrap(),
            WeightedGraph::complete(5, None).unwrap(),
        ] {
            let solve = exact_meeting_times(&g, TimeScale::Canonical).unwrap();
            let tau0 = tau0_upper_proxy(&g, TimeScale::Canonical).unwrap();
            // order-of-magnitude sanity: reported, not a theorem at this scale
            assert!(tau0 > 0.25 * solve.max_entry);
        }
    }

    #[test]
    fn tau0_line_scaling_slope_is_cubic() {
        let mut points = Vec::new();
        for n in [4usize, 8, 16] {
            let g = WeightedGraph::line(n).unwrap();
            let tau0 = tau0_upper_proxy(&g, TimeScale::Canonical).unwrap();
            points.push(((n as f64).ln(), tau0.ln()));
        }
        let slope = least_squares_slope(&points);
        assert!((slope - 3.0).abs() <= 0.3, "slope {slope}");
    }

    pub(crate) fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    }
}
