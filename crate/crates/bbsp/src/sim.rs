//! Trajectory simulation of the splitting process from the graphical
//! construction, plus the unrestricted line process with its monotone
//! coupling and the negative-binomial initialisers used by the
//! lower-bound experiments.

use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::kernel::{KernelTable, Occupancy};
use crate::params::SplitParam;
use crate::stream::EventStream;
use rand::Rng;
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

/// A simulated path: initial and current state with event bookkeeping.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: Occupancy,
    pub current: Occupancy,
    pub events_applied: u64,
    pub time: f64,
}

/// Applies one edge ring: the particles on the edge are redistributed by
/// the inverse-CDF draw in near-even-split order, everything else is
/// untouched. Particle count is conserved by construction.
pub fn bbsp_step(table: &KernelTable, xi: &Occupancy, edge: Edge, u: f64) -> Occupancy {
    let n_edge = (xi.get(edge.v) + xi.get(edge.w)) as usize;
    if n_edge == 0 {
        return xi.clone();
    }
    let k = table.sample(n_edge, u);
    xi.with_pair(edge.v, edge.w, k, n_edge as u32 - k)
}

/// Runs the process until `t_end`, applying an update at every ring.
pub fn simulate_bbsp(
    g: &WeightedGraph,
    table: &KernelTable,
    xi0: Occupancy,
    stream: &mut EventStream,
    t_end: f64,
) -> Trajectory {
    let mut current = xi0.clone();
    let mut events_applied = 0;
    while stream.peek().time <= t_end {
        let ev = stream.next_event();
        current = bbsp_step(table, &current, g.edge(ev.edge), ev.u_b);
        events_applied += 1;
    }
    Trajectory {
        initial: xi0,
        current,
        events_applied,
        time: t_end,
    }
}

/// Like [`simulate_bbsp`] but records the state at each of the given
/// (ascending) sample times.
pub fn simulate_bbsp_sampled(
    g: &WeightedGraph,
    table: &KernelTable,
    xi0: Occupancy,
    stream: &mut EventStream,
    times: &[f64],
) -> Vec<Occupancy> {
    let mut out = Vec::with_capacity(times.len());
    let mut current = xi0;
    for &t in times {
        while stream.peek().time <= t {
            let ev = stream.next_event();
            current = bbsp_step(table, &current, g.edge(ev.edge), ev.u_b);
        }
        out.push(current.clone());
    }
    out
}

/// Unbounded per-vertex counts for the line process without a particle cap.
pub type LineState = Vec<u64>;

/// The shared Beta(s,s) variable of an update, as a deterministic function
/// of the stream's `U^b`.
pub fn beta_from_uniform(param: SplitParam, u: f64) -> f64 {
    let s = param.s();
    Beta::new(s, s).expect("s > 0").inverse_cdf(u)
}

/// Binomial quantile: smallest `k` with `P(Bin(n, p) <= k) >= u`. Used to
/// couple two binomials monotonically through a shared uniform.
pub fn binomial_quantile(n: u64, p: f64, u: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let nf = n as f64;
    let ln_n1 = ln_gamma(nf + 1.0);
    let lp = p.ln();
    let lq = (1.0 - p).ln();
    let mut cum = 0.0;
    for k in 0..n {
        let kf = k as f64;
        let ln_pmf = ln_n1 - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
            + kf * lp
            + (nf - kf) * lq;
        cum += ln_pmf.exp();
        if cum >= u {
            return k;
        }
    }
    n
}

/// One ring of the unrestricted line process on edge `{k, k+1}` (1-based
/// `k`), with the Beta draw `p` and coupling uniform `u` supplied.
pub fn line_step(state: &mut LineState, k: usize, p: f64, u: f64) {
    let n = state[k - 1] + state[k];
    let x = binomial_quantile(n, p, u);
    state[k - 1] = x;
    state[k] = n - x;
}

/// Simulates the unrestricted line process; the stream must be built over
/// the line graph on `state.len()` vertices.
pub fn simulate_unrestricted_line(
    g: &WeightedGraph,
    param: SplitParam,
    mut state: LineState,
    stream: &mut EventStream,
    t_end: f64,
) -> LineState {
    while stream.peek().time <= t_end {
        let ev = stream.next_event();
        let p = beta_from_uniform(param, ev.u_b);
        line_step(&mut state, g.edge(ev.edge).v, p, ev.u_c);
    }
    state
}

/// Runs two unrestricted line processes from a dominated pair of initial
/// states through the same stream. The shared Beta draw and the shared
/// coupling uniform preserve pointwise domination at every event.
pub fn simulate_unrestricted_line_coupled(
    g: &WeightedGraph,
    param: SplitParam,
    low0: LineState,
    high0: LineState,
    stream: &mut EventStream,
    t_end: f64,
    mut on_event: impl FnMut(f64, &LineState, &LineState),
) -> Result<(LineState, LineState)> {
    for (i, (&l, &h)) in low0.iter().zip(&high0).enumerate() {
        if l > h {
            return Err(Error::DominationViolated(i + 1));
        }
    }
    let mut low = low0;
    let mut high = high0;
    while stream.peek().time <= t_end {
        let ev = stream.next_event();
        let p = beta_from_uniform(param, ev.u_b);
        let k = g.edge(ev.edge).v;
        line_step(&mut low, k, p, ev.u_c);
        line_step(&mut high, k, p, ev.u_c);
        on_event(ev.time, &low, &high);
    }
    Ok((low, high))
}

/// One draw from NegBin(s, p) (failures before the s-th success), via the
/// Gamma-Poisson mixture so non-integer `s` is supported.
pub fn sample_negbin(s: f64, p: f64, rng: &mut impl Rng) -> u64 {
    let scale = (1.0 - p) / p;
    if scale <= 0.0 {
        return 0;
    }
    let lambda: f64 = rng.sample(rand_distr::Gamma::new(s, scale).expect("valid gamma"));
    if lambda <= 0.0 {
        return 0;
    }
    rng.sample(rand_distr::Poisson::new(lambda).expect("valid poisson")) as u64
}

/// The success probability that gives i.i.d. NegBin marginals mean `m/h`
/// over `h` cells.
pub fn negbin_p_for_mean(h: usize, m: u32, s: f64) -> f64 {
    let hs = h as f64 * s;
    hs / (m as f64 + hs)
}

/// i.i.d. NegBin(s, p) over `h` cells conditioned on the sum being `m`,
/// sampled by rejection. Returns `None` if no hit within `max_tries`.
pub fn negbin_conditioned_rejection(
    h: usize,
    m: u32,
    s: f64,
    rng: &mut impl Rng,
    max_tries: u32,
) -> Option<Vec<u32>> {
    let p = negbin_p_for_mean(h, m, s);
    for _ in 0..max_tries {
        let draw: Vec<u64> = (0..h).map(|_| sample_negbin(s, p, rng)).collect();
        if draw.iter().sum::<u64>() == m as u64 {
            return Some(draw.into_iter().map(|x| x as u32).collect());
        }
    }
    None
}

/// The conditional law of i.i.d. NegBin(s, .) given the sum `m` does not
/// depend on the success probability; it is the symmetric
/// Dirichlet-multinomial, sampled here as normalised Gamma weights
/// followed by `m` categorical draws.
pub fn dirichlet_multinomial(h: usize, m: u32, s: f64, rng: &mut impl Rng) -> Vec<u32> {
    let gamma = rand_distr::Gamma::new(s, 1.0).expect("valid gamma");
    let mut weights: Vec<f64> = (0..h).map(|_| rng.sample(gamma)).collect();
    let mut total: f64 = weights.iter().sum();
    while total <= 0.0 {
        weights = (0..h).map(|_| rng.sample(gamma)).collect();
        total = weights.iter().sum();
    }
    let mut cum = Vec::with_capacity(h);
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cum.push(acc);
    }
    let mut counts = vec![0u32; h];
    for _ in 0..m {
        let u: f64 = rng.random();
        let idx = cum.partition_point(|&c| c < u).min(h - 1);
        counts[idx] += 1;
    }
    counts
}

/// Conditioned NegBin profile with the rejection sampler and the
/// Dirichlet-multinomial fallback for cases where rejection stalls.
pub fn negbin_conditioned(h: usize, m: u32, s: f64, rng: &mut impl Rng) -> Vec<u32> {
    negbin_conditioned_rejection(h, m, s, rng, 10_000)
        .unwrap_or_else(|| dirichlet_multinomial(h, m, s, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{enumerate_states, stationary_over, DEFAULT_STATE_CAP};
    use crate::stream::TimeScale;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    fn s1() -> SplitParam {
        SplitParam::from_fraction(1, 1).unwrap()
    }

    #[test]
    fn empty_edge_is_identity() {
        let table = KernelTable::new(s1());
        let xi = Occupancy::new(vec![0, 0, 5]);
        let e = Edge { v: 1, w: 2, weight: 1.0 };
        assert_eq!(bbsp_step(&table, &xi, e, 0.7), xi);
    }

    #[test]
    fn step_distribution_on_two_vertices() {
        // (2,0) on L_2 with s=1: outcome uniform over the three splits
        let table = KernelTable::new(s1());
        let xi = Occupancy::new(vec![2, 0]);
        let e = Edge { v: 1, w: 2, weight: 1.0 };
        let mut hits = HashMap::new();
        let grid = 3000;
        for i in 0..grid {
            let u = (i as f64 + 0.5) / grid as f64;
            let next = bbsp_step(&table, &xi, e, u);
            *hits.entry(next.as_slice().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(hits.len(), 3);
        for (_, count) in hits {
            assert!((count as f64 / grid as f64 - 1.0 / 3.0).abs() < 1e-3);
        }
    }

    #[test]
    fn near_even_split_under_p_star() {
        let param = SplitParam::from_fraction(1, 2).unwrap();
        let table = KernelTable::new(param);
        let xi = Occupancy::new(vec![7, 5]);
        let e = Edge { v: 1, w: 2, weight: 1.0 };
        let next = bbsp_step(&table, &xi, e, 0.5 * param.p_star());
        let k = next.get(1) as f64;
        assert!(k >= 4.0 && k <= 8.0);
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let g = WeightedGraph::line(3).unwrap();
        let table = KernelTable::new(s1());
        let xi0 = Occupancy::new(vec![1, 2, 0]);
        let mut stream = EventStream::new(&g, 3, TimeScale::Canonical);
        let tr = simulate_bbsp(&g, &table, xi0.clone(), &mut stream, 0.0);
        assert_eq!(tr.current, xi0);
        assert_eq!(tr.events_applied, 0);
    }

    #[test]
    fn conservation_along_trajectory() {
        let g = WeightedGraph::cycle(4).unwrap();
        let table = KernelTable::new(SplitParam::from_fraction(3, 2).unwrap());
        let xi0 = Occupancy::new(vec![5, 0, 2, 1]);
        let mut stream = EventStream::new(&g, 11, TimeScale::Canonical);
        let mut current = xi0.clone();
        for _ in 0..5000 {
            let ev = stream.next_event();
            current = bbsp_step(&table, &current, g.edge(ev.edge), ev.u_b);
            assert_eq!(current.total(), xi0.total());
        }
    }

    #[test]
    fn long_run_state_distribution_is_stationary() {
        let g = WeightedGraph::line(2).unwrap();
        let table = KernelTable::new(s1());
        let xi0 = Occupancy::new(vec![2, 0]);
        let replicas = 20_000u64;
        let t = 12.0;
        let mut hist = HashMap::new();
        for r in 0..replicas {
            let mut stream = EventStream::substream(&g, 99, TimeScale::Canonical, r);
            let tr = simulate_bbsp(&g, &table, xi0.clone(), &mut stream, t);
            *hist.entry(tr.current.as_slice().to_vec()).or_insert(0u64) += 1;
        }
        for count in hist.values() {
            let p = 1.0 / 3.0;
            let se = (p * (1.0 - p) / replicas as f64).sqrt();
            assert!((*count as f64 / replicas as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn stationary_flux_is_reversible() {
        // empirical flux xi -> xi' vs xi' -> xi from stationary start
        let param = SplitParam::from_fraction(1, 2).unwrap();
        let g = WeightedGraph::line(2).unwrap();
        let table = KernelTable::new(param);
        let states = enumerate_states(2, 2, DEFAULT_STATE_CAP).unwrap();
        let pi = stationary_over(&states, param);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut flux: HashMap<(usize, usize), u64> = HashMap::new();
        let lookup = |occ: &Occupancy| states.iter().position(|s| s == occ).unwrap();
        for _ in 0..40_000 {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut idx = 0;
            for (i, &p) in pi.iter().enumerate() {
                acc += p;
                if u <= acc {
                    idx = i;
                    break;
                }
            }
            let xi = states[idx].clone();
            let next = bbsp_step(&table, &xi, g.edge(0), rng.random());
            *flux.entry((idx, lookup(&next))).or_insert(0) += 1;
        }
        for (&(i, j), &f) in &flux {
            if i == j {
                continue;
            }
            let back = *flux.get(&(j, i)).unwrap_or(&0);
            let diff = (f as f64 - back as f64).abs();
            assert!(
                diff <= 4.0 * ((f + back) as f64).sqrt(),
                "flux {i}->{j}: {f} vs {back}"
            );
        }
    }

    #[test]
    fn binomial_quantile_edges() {
        assert_eq!(binomial_quantile(0, 0.5, 0.3), 0);
        assert_eq!(binomial_quantile(10, 0.0, 0.9), 0);
        assert_eq!(binomial_quantile(10, 1.0, 0.1), 10);
        assert_eq!(binomial_quantile(1, 0.5, 0.4), 0);
        assert_eq!(binomial_quantile(1, 0.5, 0.6), 1);
        // monotone in u and dominated across n
        for n in [3u64, 8, 25] {
            let mut last = 0;
            for i in 0..100 {
                let u = i as f64 / 99.0;
                let k = binomial_quantile(n, 0.37, u);
                assert!(k >= last && k <= n);
                assert!(binomial_quantile(n + 5, 0.37, u) >= k);
                assert!(binomial_quantile(n + 5, 0.37, u) - k <= 5);
                last = k;
            }
        }
    }

    #[test]
    fn coupled_identical_states_stay_identical() {
        let g = WeightedGraph::line(4).unwrap();
        let param = s1();
        let x0 = vec![3u64, 1, 0, 2];
        let mut stream = EventStream::new(&g, 5, TimeScale::Canonical);
        let (low, high) = simulate_unrestricted_line_coupled(
            &g,
            param,
            x0.clone(),
            x0,
            &mut stream,
            20.0,
            |_, l, h| assert_eq!(l, h),
        )
        .unwrap();
        assert_eq!(low, high);
    }

    #[test]
    fn coupled_zero_floor() {
        let g = WeightedGraph::line(3).unwrap();
        let mut stream = EventStream::new(&g, 6, TimeScale::Canonical);
        let (low, _) = simulate_unrestricted_line_coupled(
            &g,
            s1(),
            vec![0, 0, 0],
            vec![4, 1, 9],
            &mut stream,
            15.0,
            |_, _, _| {},
        )
        .unwrap();
        assert_eq!(low, vec![0, 0, 0]);
    }

    #[test]
    fn coupled_rejects_bad_initial_pair() {
        let g = WeightedGraph::line(2).unwrap();
        let mut stream = EventStream::new(&g, 6, TimeScale::Canonical);
        let err = simulate_unrestricted_line_coupled(
            &g,
            s1(),
            vec![3, 0],
            vec![2, 5],
            &mut stream,
            1.0,
            |_, _, _| {},
        )
        .unwrap_err();
        assert!(matches!(err, Error::DominationViolated(1)));
    }

    #[test]
    fn monotone_coupling_preserves_domination() {
        let g = WeightedGraph::line(4).unwrap();
        let param = SplitParam::from_fraction(1, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for rep in 0..10_000u64 {
            let low: Vec<u64> = (0..4).map(|_| rng.random_range(0..4)).collect();
            let high: Vec<u64> = low.iter().map(|&l| l + rng.random_range(0..3)).collect();
            let mut stream = EventStream::substream(&g, 2024, TimeScale::Canonical, rep);
            simulate_unrestricted_line_coupled(
                &g,
                param,
                low,
                high,
                &mut stream,
                3.0,
                |t, l, h| {
                    for (a, b) in l.iter().zip(h) {
                        assert!(a <= b, "domination broken at t={t}");
                    }
                },
            )
            .unwrap();
        }
    }

    #[test]
    fn negbin_initialisation_is_time_invariant() {
        // i.i.d. NegBin(s, p) marginals are preserved by the unrestricted
        // line dynamics: mean and variance at t=5 match t=0.
        let g = WeightedGraph::line(5).unwrap();
        let param = s1();
        let p = 0.5;
        let replicas = 20_000u64;
        let (mut sum0, mut sumsq0, mut sum5, mut sumsq5) = (0.0, 0.0, 0.0, 0.0);
        let mut nsamples = 0.0;
        for r in 0..replicas {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + r);
            let x0: LineState = (0..5).map(|_| sample_negbin(1.0, p, &mut rng)).collect();
            for &x in &x0 {
                sum0 += x as f64;
                sumsq0 += (x * x) as f64;
                nsamples += 1.0;
            }
            let mut stream = EventStream::substream(&g, 77, TimeScale::Canonical, r);
            let x5 = simulate_unrestricted_line(&g, param, x0, &mut stream, 5.0);
            for &x in &x5 {
                sum5 += x as f64;
                sumsq5 += (x * x) as f64;
            }
        }
        let mean0 = sum0 / nsamples;
        let mean5 = sum5 / nsamples;
        let var0 = sumsq0 / nsamples - mean0 * mean0;
        let var5 = sumsq5 / nsamples - mean5 * mean5;
        // NegBin(1, 1/2): mean 1, var 2. Vertices within a replica are
        // correlated at t=5, so allow conservative per-replica scaling.
        let se_mean = (var0 / (replicas as f64)).sqrt();
        assert!((mean5 - mean0).abs() < 4.0 * se_mean, "{mean0} vs {mean5}");
        assert!((var5 - var0).abs() / var0 < 0.1, "{var0} vs {var5}");
    }

    #[test]
    fn conditioned_negbin_matches_enumeration() {
        // h=3, m=3: the conditional law is the symmetric Dirichlet-
        // multinomial, which equals the stationary weights.
        let s = 0.5;
        let param = SplitParam::from_fraction(1, 2).unwrap();
        let states = enumerate_states(3, 3, DEFAULT_STATE_CAP).unwrap();
        let exact = stationary_over(&states, param);
        let lookup = |v: &[u32]| {
            states
                .iter()
                .position(|s| s.as_slice() == v)
                .expect("state")
        };
        let reps = 40_000;
        for use_rejection in [true, false] {
            let mut rng = ChaCha8Rng::seed_from_u64(2025);
            let mut hist = vec![0u64; states.len()];
            for _ in 0..reps {
                let draw = if use_rejection {
                    negbin_conditioned_rejection(3, 3, s, &mut rng, 100_000).unwrap()
                } else {
                    dirichlet_multinomial(3, 3, s, &mut rng)
                };
                hist[lookup(&draw)] += 1;
            }
            for (i, &count) in hist.iter().enumerate() {
                let p = exact[i];
                let se = (p * (1.0 - p) / reps as f64).sqrt();
                assert!(
                    (count as f64 / reps as f64 - p).abs() < 4.5 * se,
                    "rejection={use_rejection} state {}: {} vs {}",
                    states[i],
                    count as f64 / reps as f64,
                    p
                );
            }
        }
    }
}
