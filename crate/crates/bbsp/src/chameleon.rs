//! The chameleon process: black particles shadow the non-marked particles
//! of a marked trajectory while red/pink/white particles track where the
//! mark could be. Red-white pairs meeting on a ringing edge can be
//! pinkened; at round ends, once enough pink has accumulated, all pinks
//! flip to red or white on a fair coin. Total ink (red plus half pink) is
//! a martingale absorbed at 0 or at the non-black total, and absorption at
//! the top certifies mixing of the mark.

use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::kernel::{KernelTable, Occupancy};
use crate::mabb::mark_to_lower;
use crate::meeting::exact_meeting_times;
use crate::params::SplitParam;
use crate::stream::{expand_uniform, EventStream, TimeScale};
use rand::seq::SliceRandom;
use rand::Rng;

/// Standard mode caps the number of pairs pinkened per update so pink
/// never overshoots the depinking threshold; modified mode允 removes the
/// cap and lets every paired red in the pool pinken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChameleonMode {
    Standard,
    Modified,
}

/// Integer placement limits for an update on edge `{v, w}` together with
/// the mixing weight `theta`.
///
/// `l_*`/`u_*` bound the red count placed on each endpoint, `lp_v`/`up_v`
/// bound the old-pink count placed on `v`, and `theta` solves
/// `theta*(l_v + lp_v/2) + (1-theta)*(u_v + up_v/2) = m_star`.
#[derive(Debug, Clone, Copy)]
pub struct PlacementBounds {
    pub l_v: u32,
    pub u_v: u32,
    pub l_w: u32,
    pub u_w: u32,
    pub lp_v: u32,
    pub up_v: u32,
    pub m_star: f64,
    pub theta: f64,
}

impl PlacementBounds {
    pub fn flexible_reds(&self) -> u32 {
        self.u_v - self.l_v
    }
}

/// Computes the placement bounds and `theta` for one update.
///
/// `black` and `black_after` are the counts on `(v, w)` before and after
/// the ring; `red` and `pink` are the counts just before the ring.
pub fn placement_bounds(
    table: &KernelTable,
    black: (u32, u32),
    black_after: (u32, u32),
    red: (u32, u32),
    pink: (u32, u32),
) -> Result<PlacementBounds> {
    let param = table.param();
    let chi = |k: u32| param.colour(k as u64) as u32;
    for (side, (b, r, p)) in [
        (0usize, (black.0, red.0, pink.0)),
        (1, (black.1, red.1, pink.1)),
    ] {
        if r + p > chi(b) {
            return Err(Error::InfeasibleColouring {
                vertex: side + 1,
                red: r,
                pink: p,
                chi: chi(b),
            });
        }
    }
    let n_edge = (black.0 + black.1) as usize;
    debug_assert_eq!(n_edge as u32, black_after.0 + black_after.1);
    let chi_v = chi(black_after.0);
    let chi_w = chi(black_after.1);
    let r_vw = red.0 + red.1;
    let p_vw = pink.0 + pink.1;

    let l_v = r_vw.saturating_sub(chi_w);
    let u_v = chi_v.min(r_vw);
    let u_w = chi_w.min(r_vw);
    let l_w = r_vw - u_v;
    debug_assert_eq!(u_w, r_vw - l_v);
    let lp_v = (p_vw + u_w).saturating_sub(chi_w);
    let up_v = (chi_v - u_v).min(p_vw);

    let p_to_v = mark_to_lower(table, n_edge, black_after.0 as usize);
    let m_star = (red.0 as f64 + pink.0 as f64 / 2.0) * p_to_v
        + (red.1 as f64 + pink.1 as f64 / 2.0) * p_to_v;

    let hi = u_v as f64 + up_v as f64 / 2.0;
    let lo = l_v as f64 + lp_v as f64 / 2.0;
    let theta = if hi - lo < 1e-12 {
        0.5
    } else {
        ((hi - m_star) / (hi - lo)).clamp(0.0, 1.0)
    };
    Ok(PlacementBounds {
        l_v,
        u_v,
        l_w,
        u_w,
        lp_v,
        up_v,
        m_star,
        theta,
    })
}

/// The depinking jump size from post-depinking ink `r`:
/// `ceil(min(r, total - r) / 3)`.
pub fn depink_jump(total_nonblack: u32, ink: u32) -> u32 {
    (ink.min(total_nonblack - ink) + 2) / 3
}

/// Full state of the chameleon process. Whites are derived per vertex from
/// `chi(black) - red - pink`, and label configurations map label indices to
/// the vertex currently holding that labelled red or white particle
/// (0 meaning the label is unused).
#[derive(Debug, Clone, PartialEq)]
pub struct ChameleonState {
    param: SplitParam,
    mode: ChameleonMode,
    pub black: Occupancy,
    red: Vec<u32>,
    pink: Vec<u32>,
    labels_r: Vec<u32>,
    labels_w: Vec<u32>,
    pub round_len: f64,
    pub round_index: u64,
    pub depink_count: u64,
    pub time: f64,
}

impl ChameleonState {
    /// Initial configuration from a marked state `(xi, x)`: blacks copy
    /// `xi`, every non-black particle on `x` is red, everything else is
    /// white, and the first round's pairing labels are assigned.
    pub fn init(
        param: SplitParam,
        xi: &Occupancy,
        x: usize,
        round_len: f64,
        mode: ChameleonMode,
    ) -> Result<Self> {
        let n = xi.n();
        if x < 1 || x > n {
            return Err(Error::VertexOutOfRange(x, n));
        }
        let mut red = vec![0u32; n];
        red[x - 1] = param.colour(xi.get(x) as u64) as u32;
        Self::with_parts(param, xi.clone(), red, vec![0; n], round_len, mode)
    }

    /// Builds a state from explicit colour counts (used by the verification
    /// drills); validates feasibility and assigns fresh pairing labels.
    pub fn with_parts(
        param: SplitParam,
        black: Occupancy,
        red: Vec<u32>,
        pink: Vec<u32>,
        round_len: f64,
        mode: ChameleonMode,
    ) -> Result<Self> {
        let n = black.n();
        for v in 1..=n {
            let chi = param.colour(black.get(v) as u64) as u32;
            if red[v - 1] + pink[v - 1] > chi {
                return Err(Error::InfeasibleColouring {
                    vertex: v,
                    red: red[v - 1],
                    pink: pink[v - 1],
                    chi,
                });
            }
        }
        let total = (param.a() * black.total() + param.b() * n as u64) as usize;
        let mut state = Self {
            param,
            mode,
            black,
            red,
            pink,
            labels_r: vec![0; total + 1],
            labels_w: vec![0; total + 1],
            round_len,
            round_index: 0,
            depink_count: 0,
            time: 0.0,
        };
        state.relabel();
        Ok(state)
    }

    pub fn param(&self) -> SplitParam {
        self.param
    }

    pub fn mode(&self) -> ChameleonMode {
        self.mode
    }

    /// `chi(black(v))`: the number of non-black particles on `v`.
    pub fn chi(&self, v: usize) -> u32 {
        self.param.colour(self.black.get(v) as u64) as u32
    }

    pub fn red(&self, v: usize) -> u32 {
        self.red[v - 1]
    }

    pub fn pink(&self, v: usize) -> u32 {
        self.pink[v - 1]
    }

    pub fn white(&self, v: usize) -> u32 {
        self.chi(v) - self.red[v - 1] - self.pink[v - 1]
    }

    /// Twice the ink on `v` (kept doubled so it stays integral).
    pub fn ink2(&self, v: usize) -> u32 {
        2 * self.red[v - 1] + self.pink[v - 1]
    }

    pub fn total_red(&self) -> u32 {
        self.red.iter().sum()
    }

    pub fn total_pink(&self) -> u32 {
        self.pink.iter().sum()
    }

    pub fn total_white(&self) -> u32 {
        self.total_nonblack() - self.total_red() - self.total_pink()
    }

    pub fn total_ink2(&self) -> u32 {
        2 * self.total_red() + self.total_pink()
    }

    /// `a(m-1) + bn`: the conserved number of non-black particles.
    pub fn total_nonblack(&self) -> u32 {
        (self.param.a() * self.black.total() + self.param.b() * self.black.n() as u64) as u32
    }

    /// Vertex currently holding the red particle with this label (0 if the
    /// label is unused).
    pub fn label_r(&self, label: usize) -> u32 {
        self.labels_r[label]
    }

    pub fn label_w(&self, label: usize) -> u32 {
        self.labels_w[label]
    }

    pub fn ink2_absorbed(&self) -> Option<bool> {
        let ink2 = self.total_ink2();
        if ink2 == 0 {
            Some(false)
        } else if ink2 == 2 * self.total_nonblack() {
            Some(true)
        } else {
            None
        }
    }

    /// Colour conservation, ink limits, label placement and pink parity.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.black.n();
        let mut labelled_r = vec![0u32; n + 1];
        let mut labelled_w = vec![0u32; n + 1];
        for &v in &self.labels_r {
            labelled_r[v as usize] += 1;
        }
        for &v in &self.labels_w {
            labelled_w[v as usize] += 1;
        }
        for v in 1..=n {
            let chi = self.chi(v);
            if self.red[v - 1] + self.pink[v - 1] > chi {
                return Err(Error::InternalConsistency(format!(
                    "vertex {v}: red {} + pink {} exceeds chi {chi}",
                    self.red[v - 1],
                    self.pink[v - 1]
                )));
            }
            if labelled_r[v] > self.red[v - 1] {
                return Err(Error::InternalConsistency(format!(
                    "vertex {v}: {} labelled reds but only {} reds",
                    labelled_r[v],
                    self.red[v - 1]
                )));
            }
            if labelled_w[v] > self.white(v) {
                return Err(Error::InternalConsistency(format!(
                    "vertex {v}: {} labelled whites but only {} whites",
                    labelled_w[v],
                    self.white(v)
                )));
            }
        }
        if self.total_pink() % 2 != 0 {
            return Err(Error::InternalConsistency(
                "odd total pink count outside a step".into(),
            ));
        }
        Ok(())
    }

    /// Reassigns pairing labels: `min(|R|, |W|)` labels, reds labelled in
    /// vertex order then whites labelled in vertex order.
    pub fn relabel(&mut self) {
        let tot_r = self.total_red();
        let tot_w = self.total_white();
        let n_labels = tot_r.min(tot_w) as usize;
        for slot in self.labels_r.iter_mut() {
            *slot = 0;
        }
        for slot in self.labels_w.iter_mut() {
            *slot = 0;
        }
        let mut label = 1usize;
        'red: for v in 1..=self.black.n() {
            for _ in 0..self.red[v - 1] {
                if label > n_labels {
                    break 'red;
                }
                self.labels_r[label] = v as u32;
                label += 1;
            }
        }
        let mut label = 1usize;
        'white: for v in 1..=self.black.n() {
            for _ in 0..self.white(v) {
                if label > n_labels {
                    break 'white;
                }
                self.labels_w[label] = v as u32;
                label += 1;
            }
        }
    }
}

/// What happened inside one update, for verification drills.
#[derive(Debug, Clone, Copy)]
pub struct StepTrace {
    pub bounds: PlacementBounds,
    /// Paired reds on the edge before the update (reds whose partner white
    /// was also on the edge).
    pub paired_reds_on_edge: u32,
    /// Paired reds left in the pool after the lower bounds were placed.
    pub paired_after_step1: u32,
    pub took_pinkening_branch: bool,
    pub pairs_pinkened: u32,
    /// A colour capacity bound the fair scatter in the pinkening branch;
    /// only possible when one old-pink limit exceeds the other endpoint's
    /// spare capacity.
    pub scatter_capped: bool,
}

struct PoolParticle {
    label: u32,
}

/// One update of the chameleon process on ringing edge `e`: the blacks
/// move exactly as the non-marked particles driven by `u_b`, then the
/// non-black particles on the edge are pooled and re-placed by the five
/// colour steps, with all colour randomness expanded from `u_c`. The
/// step-1 lane is independent of the lane driving the later steps.
pub fn chameleon_step(
    state: &mut ChameleonState,
    table: &KernelTable,
    e: Edge,
    u_b: f64,
    u_c: f64,
) -> Result<StepTrace> {
    let (v, w) = (e.v, e.w);
    let tot_r = state.total_red();
    let tot_p = state.total_pink();
    let tot_w = state.total_white();

    let black_before = (state.black.get(v), state.black.get(w));
    let n_edge = (black_before.0 + black_before.1) as usize;
    let k_new = if n_edge == 0 {
        0
    } else {
        table.sample(n_edge, u_b)
    };
    let black_after = (k_new, n_edge as u32 - k_new);

    let red_pair = (state.red(v), state.red(w));
    let pink_pair = (state.pink(v), state.pink(w));
    let bounds = placement_bounds(table, black_before, black_after, red_pair, pink_pair)?;

    // pool every non-black particle on the edge
    let mut pool_reds: Vec<PoolParticle> = Vec::new();
    let mut pool_whites: Vec<PoolParticle> = Vec::new();
    let on_edge = |vertex: u32| vertex == v as u32 || vertex == w as u32;
    let mut labelled_red_here = vec![0u32; 2];
    let mut labelled_white_here = vec![0u32; 2];
    for label in 1..state.labels_r.len() {
        let lv = state.labels_r[label];
        if on_edge(lv) {
            pool_reds.push(PoolParticle { label: label as u32 });
            labelled_red_here[(lv == w as u32) as usize] += 1;
        }
        let wv = state.labels_w[label];
        if on_edge(wv) {
            pool_whites.push(PoolParticle { label: label as u32 });
            labelled_white_here[(wv == w as u32) as usize] += 1;
        }
    }
    for (idx, vertex) in [v, w].into_iter().enumerate() {
        for _ in 0..state.red(vertex) - labelled_red_here[idx] {
            pool_reds.push(PoolParticle { label: 0 });
        }
        for _ in 0..state.white(vertex) - labelled_white_here[idx] {
            pool_whites.push(PoolParticle { label: 0 });
        }
    }
    let old_pinks = pink_pair.0 + pink_pair.1;

    // apply the black move and clear the edge colours
    state.black = state.black.with_pair(v, w, black_after.0, black_after.1);
    state.red[v - 1] = 0;
    state.red[w - 1] = 0;
    state.pink[v - 1] = 0;
    state.pink[w - 1] = 0;

    let mut rng_step1 = expand_uniform(u_c, 0);
    let mut rng_rest = expand_uniform(u_c, 1);

    let is_paired = |p: &PoolParticle, labels_w: &[u32]| {
        p.label != 0 && on_edge(labels_w[p.label as usize])
    };
    let paired_on_edge = pool_reds
        .iter()
        .filter(|p| is_paired(p, &state.labels_w))
        .count() as u32;

    let place_red = |state: &mut ChameleonState, vertex: usize, p: &PoolParticle| {
        state.red[vertex - 1] += 1;
        if p.label != 0 {
            state.labels_r[p.label as usize] = vertex as u32;
        }
    };

    let mut trace = StepTrace {
        bounds,
        paired_reds_on_edge: paired_on_edge,
        paired_after_step1: paired_on_edge,
        took_pinkening_branch: false,
        pairs_pinkened: 0,
        scatter_capped: false,
    };

    // Old pinks land at their lower or upper limit on v; the limits are
    // only jointly feasible with the matching red limit, so the choice is
    // tied to the red direction in the deterministic branch and made by a
    // fair coin in the pinkening branch. The marginal law stays
    // Bernoulli(theta) for the lower limit either way.
    let theta = bounds.theta;
    let mut old_pink_to_v = 0u32;

    if pool_reds.is_empty() {
        if old_pinks > 0 {
            old_pink_to_v = if rng_rest.random::<f64>() < theta {
                bounds.lp_v
            } else {
                bounds.up_v
            };
        }
    } else {
        // Step 1: place the lower bounds, reserving paired reds by drawing
        // non-paired ones first, uniformly within each class.
        let need = (bounds.l_v + bounds.l_w) as usize;
        let (mut nonpaired, mut paired): (Vec<_>, Vec<_>) = pool_reds
            .drain(..)
            .partition(|p| !is_paired(p, &state.labels_w));
        nonpaired.shuffle(&mut rng_step1);
        paired.shuffle(&mut rng_step1);
        let take_nonpaired = need.min(nonpaired.len());
        let mut chosen: Vec<PoolParticle> = nonpaired.drain(..take_nonpaired).collect();
        let still_needed = need - take_nonpaired;
        chosen.extend(paired.drain(..still_needed));
        chosen.shuffle(&mut rng_step1);
        for (i, p) in chosen.iter().enumerate() {
            let target = if i < bounds.l_v as usize { v } else { w };
            place_red(state, target, p);
        }
        pool_reds = nonpaired;
        pool_reds.extend(paired);
        trace.paired_after_step1 = pool_reds
            .iter()
            .filter(|p| is_paired(p, &state.labels_w))
            .count() as u32;

        // Step 2: fork between pinkening and deterministic placement.
        let branch_prob = 2.0 * theta.min(1.0 - theta);
        trace.took_pinkening_branch = rng_rest.random::<f64>() < branch_prob;

        if trace.took_pinkening_branch {
            // Step 3a: pinken paired reds up to the cap, then scatter the
            // rest of the pool fairly within the colour capacities.
            if old_pinks > 0 {
                old_pink_to_v = if rng_rest.random::<bool>() {
                    bounds.lp_v
                } else {
                    bounds.up_v
                };
            }
            let k = trace.paired_after_step1;
            let quota = match state.mode {
                ChameleonMode::Modified => k,
                ChameleonMode::Standard => {
                    let q = tot_r.min(tot_w) as i64;
                    let half_p = (tot_p / 2) as i64;
                    let cap = (q + half_p + 2) / 3 - half_p;
                    cap.max(0).min(k as i64) as u32
                }
            };
            let mut paired_idx: Vec<usize> = (0..pool_reds.len())
                .filter(|&i| is_paired(&pool_reds[i], &state.labels_w))
                .collect();
            paired_idx.shuffle(&mut rng_rest);
            let mut selected = paired_idx[..quota as usize].to_vec();
            selected.sort_unstable_by(|a, b| b.cmp(a));
            for idx in selected {
                let p = pool_reds.swap_remove(idx);
                // the pinkened red lands on the canonical endpoint, its
                // partner white on the other
                state.pink[v - 1] += 1;
                state.pink[w - 1] += 1;
                let partner = pool_whites
                    .iter()
                    .position(|q| q.label == p.label)
                    .ok_or_else(|| {
                        Error::InternalConsistency(format!(
                            "paired white with label {} missing from pool",
                            p.label
                        ))
                    })?;
                pool_whites.swap_remove(partner);
                state.labels_r[p.label as usize] = 0;
                state.labels_w[p.label as usize] = 0;
                trace.pairs_pinkened += 1;
            }
            let chi_v = state.chi(v);
            let chi_w = state.chi(w);
            for p in pool_reds.drain(..) {
                let room_v =
                    state.red(v) + state.pink(v) + old_pink_to_v < chi_v;
                let room_w = state.red(w) + state.pink(w) + (old_pinks - old_pink_to_v)
                    < chi_w;
                let target = if room_v && room_w {
                    if rng_rest.random::<bool>() {
                        v
                    } else {
                        w
                    }
                } else {
                    trace.scatter_capped = true;
                    if room_v {
                        v
                    } else {
                        w
                    }
                };
                place_red(state, target, &p);
            }
        } else {
            // Step 3b: everything left goes to one endpoint, and the old
            // pinks take the limit compatible with it.
            let target = if theta < 0.5 { v } else { w };
            for p in pool_reds.drain(..) {
                place_red(state, target, &p);
            }
            debug_assert_eq!(
                state.red(target),
                if target == v { bounds.u_v } else { bounds.u_w }
            );
            old_pink_to_v = if theta < 0.5 { bounds.up_v } else { bounds.lp_v };
        }
    }

    // Step 4: place the old pinks.
    if old_pinks > 0 {
        state.pink[v - 1] += old_pink_to_v;
        state.pink[w - 1] += old_pinks - old_pink_to_v;
    }

    // Step 5: whites fill each endpoint back to chi(black'), the split
    // chosen uniformly among the pooled whites.
    let placed_v = state.red(v) + state.pink(v);
    let chi_v = state.chi(v);
    let chi_w = state.chi(w);
    if placed_v > chi_v || state.red(w) + state.pink(w) > chi_w {
        return Err(Error::InternalConsistency(format!(
            "non-black overflow on edge ({v},{w}) after placement"
        )));
    }
    let need_v = (chi_v - placed_v) as usize;
    let need_w = (chi_w - state.red(w) - state.pink(w)) as usize;
    if need_v + need_w != pool_whites.len() {
        return Err(Error::InternalConsistency(format!(
            "white placement mismatch on edge ({v},{w}): need {need_v}+{need_w}, pool {}",
            pool_whites.len()
        )));
    }
    pool_whites.shuffle(&mut rng_rest);
    for (i, p) in pool_whites.iter().enumerate() {
        let target = if i < need_v { v } else { w };
        if p.label != 0 {
            state.labels_w[p.label as usize] = target as u32;
        }
    }
    Ok(trace)
}

/// A round boundary: whether it depinked, and the ink book-keeping.
#[derive(Debug, Clone, Copy)]
pub struct RoundEnd {
    pub round: u64,
    pub time: f64,
    pub red_before: u32,
    pub pink_before: u32,
    pub white_before: u32,
    pub depinked: bool,
    pub went_red: bool,
    pub ink2_after: u32,
}

/// Processes the end of a round: depinks when pink has reached the lesser
/// of red and white, then reassigns pairing labels.
pub fn end_round(state: &mut ChameleonState, coin: bool) -> RoundEnd {
    state.round_index += 1;
    let red_before = state.total_red();
    let pink_before = state.total_pink();
    let white_before = state.total_white();
    let condition = pink_before >= red_before.min(white_before);
    let depinked = condition && pink_before > 0;
    if depinked {
        if coin {
            for v in 0..state.black.n() {
                state.red[v] += state.pink[v];
            }
        }
        for v in 0..state.black.n() {
            state.pink[v] = 0;
        }
        state.depink_count += 1;
    }
    state.relabel();
    RoundEnd {
        round: state.round_index,
        time: state.time,
        red_before,
        pink_before,
        white_before,
        depinked,
        went_red: depinked && coin,
        ink2_after: state.total_ink2(),
    }
}

/// Outcome of a full chameleon run.
#[derive(Debug, Clone)]
pub struct ChameleonRun {
    /// `(time, total ink2)` at the start, after every event and after
    /// every round boundary.
    pub ink2_trace: Vec<(f64, u32)>,
    pub round_ends: Vec<RoundEnd>,
    /// `Some(true)` when ink absorbed at the top (the mark is mixed),
    /// `Some(false)` at zero, `None` when the horizon hit first.
    pub fill: Option<bool>,
    pub final_time: f64,
}

impl ChameleonRun {
    pub fn depinkings(&self) -> impl Iterator<Item = &RoundEnd> {
        self.round_ends.iter().filter(|r| r.depinked)
    }
}

/// Runs the chameleon process from `(xi, x)` until ink absorbs or
/// `t_max` is reached. A coin is consumed at every round boundary so the
/// coin sequence indexes rounds, matching the graphical construction.
/// Round boundaries that coincide with an event time are processed first.
pub fn run_chameleon(
    g: &WeightedGraph,
    table: &KernelTable,
    xi: &Occupancy,
    x: usize,
    round_len: f64,
    stream: &mut EventStream,
    mode: ChameleonMode,
    t_max: f64,
    mut on_event: impl FnMut(&ChameleonState, &StepTrace),
) -> Result<(ChameleonRun, ChameleonState)> {
    let mut state = ChameleonState::init(table.param(), xi, x, round_len, mode)?;
    let mut run = ChameleonRun {
        ink2_trace: vec![(0.0, state.total_ink2())],
        round_ends: Vec::new(),
        fill: state.ink2_absorbed(),
        final_time: 0.0,
    };
    if run.fill.is_some() {
        return Ok((run, state));
    }
    loop {
        let ev = stream.peek();
        let boundary = round_len * (state.round_index + 1) as f64;
        if boundary <= ev.time {
            if boundary > t_max {
                break;
            }
            let coin = stream.next_coin();
            state.time = boundary;
            let rec = end_round(&mut state, coin);
            run.ink2_trace.push((boundary, state.total_ink2()));
            run.round_ends.push(rec);
            if let Some(filled) = state.ink2_absorbed() {
                run.fill = Some(filled);
                run.final_time = boundary;
                return Ok((run, state));
            }
            continue;
        }
        if ev.time > t_max {
            break;
        }
        let ev = stream.next_event();
        state.time = ev.time;
        let trace = chameleon_step(&mut state, table, g.edge(ev.edge), ev.u_b, ev.u_c)?;
        run.ink2_trace.push((ev.time, state.total_ink2()));
        on_event(&state, &trace);
    }
    state.time = t_max;
    run.final_time = t_max;
    Ok((run, state))
}

/// The round length prescribed by the loss-of-red analysis: twice the
/// maximal expected meeting time of two walks on the half-weight graph,
/// in canonical time.
pub fn recommended_round_length(g: &WeightedGraph) -> Result<f64> {
    Ok(2.0 * exact_meeting_times(g, TimeScale::Canonical)?.max_entry)
}
