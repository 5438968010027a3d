//! The exact one-edge transition kernel of the splitting process:
//! beta-binomial rows, the near-even-split outcome ordering used by the
//! graphical construction, state enumeration and the stationary
//! distribution.

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::params::{ln_beta, SplitParam};
use statrs::function::gamma::ln_gamma;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// Default cap on enumerated state spaces.
pub const DEFAULT_STATE_CAP: u128 = 2_000_000;

/// Largest edge total handled by the stable product/recurrence path;
/// beyond this the row is computed in log space.
const RECURRENCE_MAX: usize = 128;

/// A particle-count vector over the vertices of a graph, with its total
/// cached. Vertex ids on the interface are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Occupancy {
    counts: Vec<u32>,
    total: u64,
}

impl Occupancy {
    pub fn new(counts: Vec<u32>) -> Self {
        let total = counts.iter().map(|&c| c as u64).sum();
        Self { counts, total }
    }

    /// All `m` particles on vertex 1.
    pub fn point_mass(n: usize, m: u32) -> Self {
        let mut counts = vec![0; n];
        counts[0] = m;
        Self::new(counts)
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Count at 1-based vertex `v`.
    pub fn get(&self, v: usize) -> u32 {
        self.counts[v - 1]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.counts
    }

    /// A copy with the counts on vertices `v` and `w` replaced.
    pub fn with_pair(&self, v: usize, w: usize, cv: u32, cw: u32) -> Self {
        let mut counts = self.counts.clone();
        counts[v - 1] = cv;
        counts[w - 1] = cw;
        Self::new(counts)
    }

    /// A copy with one extra particle on vertex `v`.
    pub fn plus_one(&self, v: usize) -> Self {
        let mut counts = self.counts.clone();
        counts[v - 1] += 1;
        Self::new(counts)
    }
}

impl std::fmt::Display for Occupancy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// The ranking of edge outcomes `k` (particles placed on the canonical
/// lower endpoint) by closeness to an even split, ties resolved toward
/// fewer particles on that endpoint.
pub fn outcome_order(n_on_edge: usize) -> Vec<u32> {
    let mut ks: Vec<u32> = (0..=n_on_edge as u32).collect();
    let n = n_on_edge as i64;
    ks.sort_by_key(|&k| ((2 * k as i64 - n).abs(), k));
    ks
}

/// One cached kernel row: the BetaBin(N, s, s) pmf over `0..=N` together
/// with the outcome ordering and its cumulative sums.
#[derive(Debug)]
pub struct EdgeKernelRow {
    pub n_edge: usize,
    pub probs: Vec<f64>,
    pub order: Vec<u32>,
    cum: Vec<f64>,
}

impl EdgeKernelRow {
    fn build(n: usize, param: SplitParam) -> Self {
        let probs = betabin_probs(n, param);
        let order = outcome_order(n);
        let mut cum = Vec::with_capacity(order.len());
        let mut acc = 0.0;
        for &k in &order {
            acc += probs[k as usize];
            cum.push(acc);
        }
        Self {
            n_edge: n,
            probs,
            order,
            cum,
        }
    }

    /// Deterministic inverse-CDF draw in the near-even-split ordering.
    pub fn sample(&self, u: f64) -> u32 {
        let idx = self.cum.partition_point(|&c| c < u);
        self.order[idx.min(self.order.len() - 1)]
    }
}

fn betabin_probs(n: usize, param: SplitParam) -> Vec<f64> {
    if n == 0 {
        return vec![1.0];
    }
    let mut probs = if n <= RECURRENCE_MAX {
        let a = param.a() as f64;
        let b = param.b() as f64;
        let mut p = Vec::with_capacity(n + 1);
        let mut p0 = 1.0f64;
        for i in 0..n {
            p0 *= (b + a * i as f64) / (2.0 * b + a * i as f64);
        }
        p.push(p0);
        for k in 0..n {
            let kf = k as f64;
            let nf = n as f64;
            let next = p[k] * ((nf - kf) / (kf + 1.0))
                * ((a * kf + b) / (a * (nf - 1.0 - kf) + b));
            p.push(next);
        }
        p
    } else {
        let s = param.s();
        let ln_b_ss = ln_beta(s, s);
        let ln_n1 = ln_gamma(n as f64 + 1.0);
        (0..=n)
            .map(|k| {
                let kf = k as f64;
                let nkf = (n - k) as f64;
                let ln_choose = ln_n1 - (ln_gamma(kf + 1.0) + ln_gamma(nkf + 1.0));
                (ln_choose + ln_beta(kf + s, nkf + s) - ln_b_ss).exp()
            })
            .collect()
    };
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

/// Read-mostly concurrent cache of kernel rows for a fixed parameter.
#[derive(Debug)]
pub struct KernelTable {
    param: SplitParam,
    rows: RwLock<HashMap<usize, Arc<EdgeKernelRow>>>,
}

impl KernelTable {
    pub fn new(param: SplitParam) -> Self {
        Self {
            param,
            rows: RwLock::new(HashMap::new()),
        }
    }

    pub fn param(&self) -> SplitParam {
        self.param
    }

    pub fn row(&self, n_on_edge: usize) -> Arc<EdgeKernelRow> {
        if let Some(row) = self.rows.read().unwrap().get(&n_on_edge) {
            return Arc::clone(row);
        }
        let row = Arc::new(EdgeKernelRow::build(n_on_edge, self.param));
        self.rows
            .write()
            .unwrap()
            .entry(n_on_edge)
            .or_insert_with(|| Arc::clone(&row));
        row
    }

    /// `P(X = k_new)` for `X ~ BetaBin(n_on_edge, s, s)`: the one-edge
    /// transition probability to the state with `k_new` particles on the
    /// canonical endpoint. Depends only on the edge total.
    pub fn transition_prob(&self, n_on_edge: usize, k_new: usize) -> Result<f64> {
        if k_new > n_on_edge {
            return Err(Error::OutcomeOutOfRange {
                k: k_new,
                n: n_on_edge,
            });
        }
        Ok(self.row(n_on_edge).probs[k_new])
    }

    /// Deterministic inverse of `u` under the near-even-split ordering.
    pub fn sample(&self, n_on_edge: usize, u: f64) -> u32 {
        self.row(n_on_edge).sample(u)
    }
}

/// Exact rational kernel values, used as the independent arbiter for the
/// identity checks at small edge totals.
pub mod exact {
    use super::outcome_order;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn big(x: u64) -> BigInt {
        BigInt::from(x)
    }

    /// BetaBin(n, s, s) pmf for `s = b/a` as exact rationals:
    /// `C(n,k) prod_{i<k}(b+ai) prod_{i<n-k}(b+ai) / prod_{i<n}(2b+ai)`.
    pub fn betabin_probs(n: usize, a: u64, b: u64) -> Vec<BigRational> {
        if n == 0 {
            return vec![BigRational::from(big(1))];
        }
        let mut rising = Vec::with_capacity(n + 1);
        rising.push(BigInt::from(1));
        for i in 0..n {
            let last = rising.last().unwrap() * big(b + a * i as u64);
            rising.push(last);
        }
        let mut denom = BigInt::from(1);
        for i in 0..n {
            denom *= big(2 * b + a * i as u64);
        }
        let mut choose = BigInt::from(1);
        let mut out = Vec::with_capacity(n + 1);
        for k in 0..=n {
            if k > 0 {
                choose = choose * big((n - k + 1) as u64) / big(k as u64);
            }
            let numer = &choose * &rising[k] * &rising[n - k];
            out.push(BigRational::new(numer, denom.clone()));
        }
        out
    }

    /// Exact probability that the mark lands on the canonical endpoint `v`
    /// given the non-marked move on the edge: total `n` non-marked, `k_new`
    /// of them on `v` afterwards.
    pub fn mark_to_v(n: usize, k_new: usize, a: u64, b: u64) -> BigRational {
        let with_mark = betabin_probs(n + 1, a, b);
        let without = betabin_probs(n, a, b);
        let ratio = &with_mark[k_new + 1] / &without[k_new];
        BigRational::new(big((k_new + 1) as u64), big((n + 1) as u64)) * ratio
    }

    /// Exact stationary weight of a single vertex count `k`:
    /// `prod_{i<k}(a i + b) / k!`.
    pub fn stationary_weight(k: u32, a: u64, b: u64) -> BigRational {
        let mut numer = BigInt::from(1);
        let mut denom = BigInt::from(1);
        for i in 0..k as u64 {
            numer *= big(a * i + b);
            denom *= big(i + 1);
        }
        BigRational::new(numer, denom)
    }

    /// Cumulative pmf in the near-even-split outcome ordering, for exact
    /// inverse-CDF interval checks.
    pub fn ordered_cumulative(n: usize, a: u64, b: u64) -> Vec<(u32, BigRational)> {
        let probs = betabin_probs(n, a, b);
        let mut acc = BigRational::from(big(0));
        outcome_order(n)
            .into_iter()
            .map(|k| {
                acc += &probs[k as usize];
                (k, acc.clone())
            })
            .collect()
    }
}

/// All weak compositions of `m` into `n` parts, starting from all mass on
/// vertex 1 and ending with all mass on vertex `n`.
pub fn enumerate_states(n: usize, m: u32, cap: u128) -> Result<Vec<Occupancy>> {
    let count = composition_count(n, m);
    if count > cap {
        return Err(Error::StateSpaceCap { states: count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; n];
    fill(&mut out, &mut current, 0, m);
    Ok(out)
}

fn fill(out: &mut Vec<Occupancy>, current: &mut Vec<u32>, idx: usize, remaining: u32) {
    if idx == current.len() - 1 {
        current[idx] = remaining;
        out.push(Occupancy::new(current.clone()));
        return;
    }
    for c in (0..=remaining).rev() {
        current[idx] = c;
        fill(out, current, idx + 1, remaining - c);
    }
}

/// `C(m + n - 1, n - 1)` without overflow for desk-scale arguments.
pub fn composition_count(n: usize, m: u32) -> u128 {
    let mut acc: u128 = 1;
    for i in 1..n {
        acc = acc.saturating_mul(m as u128 + i as u128) / i as u128;
        if acc > u64::MAX as u128 {
            return u128::MAX;
        }
    }
    acc
}

/// Stationary distribution of the splitting process over
/// `enumerate_states(n, m)`: weights `prod_v (1/xi(v)!) prod_{i<xi(v)} (a i + b)`,
/// normalised. The distribution does not depend on the edge structure.
pub fn stationary_dist(g: &WeightedGraph, param: SplitParam, m: u32, cap: u128) -> Result<Vec<f64>> {
    let states = enumerate_states(g.n(), m, cap)?;
    Ok(stationary_over(&states, param))
}

/// Stationary probabilities aligned with an explicit state list.
pub fn stationary_over(states: &[Occupancy], param: SplitParam) -> Vec<f64> {
    let m = states.first().map(|s| s.total()).unwrap_or(0) as usize;
    let a = param.a() as f64;
    let b = param.b() as f64;
    // log-weight of a single vertex count
    let mut lw = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    lw.push(0.0);
    for k in 0..m {
        acc += (a * k as f64 + b).ln() - ((k + 1) as f64).ln();
        lw.push(acc);
    }
    let log_weights: Vec<f64> = states
        .iter()
        .map(|s| s.as_slice().iter().map(|&k| lw[k as usize]).sum())
        .collect();
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    probs
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn grid() -> Vec<SplitParam> {
        [(1, 2), (1, 1), (3, 2), (2, 1), (5, 1), (40, 1)]
            .iter()
            .map(|&(b, a)| SplitParam::from_fraction(b, a).unwrap())
            .collect()
    }

    #[test]
    fn bernoulli_half_is_exact() {
        for param in grid() {
            let table = KernelTable::new(param);
            let row = table.row(1);
            assert_eq!(row.probs[0], 0.5);
            assert_eq!(row.probs[1], 0.5);
        }
    }

    #[test]
    fn uniform_row_for_s_one() {
        let table = KernelTable::new(SplitParam::from_fraction(1, 1).unwrap());
        let row = table.row(2);
        for &p in &row.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        // N = 3, s = 1 is uniform on {0..3}
        for k in 0..=3 {
            assert!((table.transition_prob(3, k).unwrap() - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn empty_edge() {
        let table = KernelTable::new(SplitParam::from_fraction(1, 2).unwrap());
        assert_eq!(table.row(0).probs, vec![1.0]);
        for u in [0.0, 0.3, 1.0] {
            assert_eq!(table.sample(0, u), 0);
        }
    }

    #[test]
    fn symmetry_across_grid() {
        for param in grid() {
            let table = KernelTable::new(param);
            for n in 0..=64usize {
                let row = table.row(n);
                for k in 0..=n {
                    let d = (row.probs[k] - row.probs[n - k]).abs();
                    assert!(d < 1e-12, "s={param} N={n} k={k}: asym {d}");
                }
                let total: f64 = row.probs.iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn near_even_split_mass() {
        for param in grid() {
            let p_star = param.p_star();
            let table = KernelTable::new(param);
            for n in 2..=64usize {
                let row = table.row(n);
                let lo = (n as f64 / 3.0).ceil() as usize;
                let hi = (2.0 * n as f64 / 3.0).floor() as usize;
                let mass: f64 = (lo..=hi).map(|k| row.probs[k]).sum();
                assert!(
                    mass >= p_star - 1e-12,
                    "s={param} N={n}: near-even mass {mass} < p*={p_star}"
                );
            }
        }
    }

    #[test]
    fn two_particle_merge_probability() {
        for param in grid() {
            let s = param.s();
            let table = KernelTable::new(param);
            let row = table.row(2);
            let merge = row.probs[0] + row.probs[2];
            assert!((merge - (1.0 - s / (1.0 + 2.0 * s))).abs() < 1e-12);
            assert!(merge >= 2.0 * param.p_star() - 1e-12);
        }
    }

    #[test]
    fn heat_kernel_identity() {
        for param in grid() {
            let table = KernelTable::new(param);
            for n in 0..=12usize {
                let small = table.row(n);
                let big = table.row(n + 1);
                for k in 0..=n {
                    let lhs = (k as f64 + 1.0) * big.probs[k + 1]
                        + ((n - k) as f64 + 1.0) * big.probs[k];
                    let rhs = (n as f64 + 1.0) * small.probs[k];
                    assert!(
                        (lhs - rhs).abs() < 1e-12,
                        "s={param} N={n} k={k}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }

    #[test]
    fn float_matches_exact_rationals() {
        for param in grid() {
            let table = KernelTable::new(param);
            for n in 0..=12usize {
                let row = table.row(n);
                let exact_row = exact::betabin_probs(n, param.a(), param.b());
                for k in 0..=n {
                    let e = exact_row[k].to_f64().unwrap();
                    assert!(
                        (row.probs[k] - e).abs() < 1e-13,
                        "s={param} N={n} k={k}"
                    );
                }
            }
        }
    }

    #[test]
    fn exact_rows_sum_to_one() {
        for param in grid() {
            for n in 0..=12usize {
                let total: BigRational = exact::betabin_probs(n, param.a(), param.b())
                    .into_iter()
                    .sum();
                assert!(total.is_integer() && total.to_f64().unwrap() == 1.0);
            }
        }
    }

    #[test]
    fn ordering_examples() {
        assert_eq!(outcome_order(0), vec![0]);
        assert_eq!(outcome_order(1), vec![0, 1]);
        assert_eq!(outcome_order(2), vec![1, 0, 2]);
        assert_eq!(outcome_order(4), vec![2, 1, 3, 0, 4]);
        assert_eq!(outcome_order(5), vec![2, 3, 1, 4, 0, 5]);
    }

    #[test]
    fn sample_examples() {
        // tie at N=1 is broken toward fewer particles on v
        let table = KernelTable::new(SplitParam::from_fraction(1, 1).unwrap());
        assert_eq!(table.sample(1, 0.3), 0);
        assert_eq!(table.sample(1, 0.5), 0);
        assert_eq!(table.sample(1, 0.51), 1);
        // last-ranked outcome for N=2, s=1 is k=2
        assert_eq!(table.sample(2, 0.99), 2);
        assert_eq!(table.sample(2, 0.2), 1);
        // u at the boundaries
        assert_eq!(table.sample(2, 0.0), 1);
        assert_eq!(table.sample(2, 1.0), 2);
    }

    #[test]
    fn near_even_forced_when_u_below_p_star() {
        for param in grid() {
            let table = KernelTable::new(param);
            let p_star = param.p_star();
            for n in 2..=40usize {
                for frac in [0.0, 0.3, 0.7, 1.0] {
                    let k = table.sample(n, frac * p_star) as f64;
                    assert!(
                        k >= n as f64 / 3.0 - 1e-12 && k <= 2.0 * n as f64 / 3.0 + 1e-12,
                        "s={param} N={n} u={} gave k={k}",
                        frac * p_star
                    );
                }
            }
        }
    }

    #[test]
    fn sample_histogram_matches_pmf() {
        use rand::Rng;
        use rand::SeedableRng;
        let param = SplitParam::from_fraction(3, 2).unwrap();
        let table = KernelTable::new(param);
        let n = 5usize;
        let draws = 200_000usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(71);
        let mut hist = vec![0u64; n + 1];
        for _ in 0..draws {
            hist[table.sample(n, rng.random::<f64>()) as usize] += 1;
        }
        let row = table.row(n);
        for k in 0..=n {
            let p = row.probs[k];
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let diff = (hist[k] as f64 / draws as f64 - p).abs();
            assert!(diff <= 4.0 * se, "k={k}: diff {diff} vs 4se {}", 4.0 * se);
        }
    }

    #[test]
    fn enumerate_examples() {
        let states = enumerate_states(2, 2, DEFAULT_STATE_CAP).unwrap();
        let flat: Vec<Vec<u32>> = states.iter().map(|s| s.as_slice().to_vec()).collect();
        assert_eq!(flat, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);

        assert_eq!(enumerate_states(3, 1, DEFAULT_STATE_CAP).unwrap().len(), 3);
        assert_eq!(enumerate_states(3, 3, DEFAULT_STATE_CAP).unwrap().len(), 10);

        assert!(matches!(
            enumerate_states(30, 30, DEFAULT_STATE_CAP),
            Err(Error::StateSpaceCap { .. })
        ));
    }

    #[test]
    fn stationary_examples() {
        let g = WeightedGraph::line(2).unwrap();
        // s = 1 is uniform
        let pi = stationary_dist(&g, SplitParam::from_fraction(1, 1).unwrap(), 2, DEFAULT_STATE_CAP)
            .unwrap();
        for p in &pi {
            assert!((p - 1.0 / 3.0).abs() < 1e-14);
        }
        // n=2, m=2, s=1/2: weights (3/2, 1, 3/2)
        let pi = stationary_dist(&g, SplitParam::from_fraction(1, 2).unwrap(), 2, DEFAULT_STATE_CAP)
            .unwrap();
        assert!((pi[0] - 3.0 / 8.0).abs() < 1e-14);
        assert!((pi[1] - 1.0 / 4.0).abs() < 1e-14);
        assert!((pi[2] - 3.0 / 8.0).abs() < 1e-14);
        // n=2, m=1 is symmetric for any s
        for param in grid() {
            let pi = stationary_dist(&g, param, 1, DEFAULT_STATE_CAP).unwrap();
            assert!((pi[0] - 0.5).abs() < 1e-14);
            assert!((pi[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn detailed_balance_small() {
        for param in grid() {
            let states = enumerate_states(2, 3, DEFAULT_STATE_CAP).unwrap();
            let pi = stationary_over(&states, param);
            let table = KernelTable::new(param);
            // single edge; transitions keep the total on the edge
            for (i, xi) in states.iter().enumerate() {
                for (j, xj) in states.iter().enumerate() {
                    let n = (xi.get(1) + xi.get(2)) as usize;
                    let forward = pi[i] * table.transition_prob(n, xj.get(1) as usize).unwrap();
                    let backward = pi[j] * table.transition_prob(n, xi.get(1) as usize).unwrap();
                    assert!((forward - backward).abs() < 1e-14);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn ordering_is_a_valid_ranking(n in 0usize..200) {
            let order = outcome_order(n);
            let mut sorted: Vec<u32> = order.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..=n as u32).collect::<Vec<_>>());
            for pair in order.windows(2) {
                let d0 = (2 * pair[0] as i64 - n as i64).abs();
                let d1 = (2 * pair[1] as i64 - n as i64).abs();
                prop_assert!(d0 < d1 || (d0 == d1 && pair[0] < pair[1]));
            }
        }

        #[test]
        fn sample_is_in_range(n in 0usize..80, u in 0.0f64..=1.0, which in 0usize..6) {
            let param = grid()[which];
            let table = KernelTable::new(param);
            prop_assert!(table.sample(n, u) <= n as u32);
        }
    }
}
