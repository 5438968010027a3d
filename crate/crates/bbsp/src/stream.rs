//! The seeded graphical construction: a Poisson stream of edge rings with
//! per-event uniforms `U^b`, `U^c` and an independent sequence of fair
//! coins. Every process in this crate is a deterministic function of one
//! such stream, so coupled processes are built by replaying the same seed.

use crate::graph::{EdgeId, WeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Clock convention for ring times.
///
/// `Canonical` normalises the total event rate to 1 (the generator
/// convention; edge picked proportionally to its weight). `RawRate` rings
/// at the summed edge weights, which differs from canonical time only by
/// the deterministic factor `sum_e r_e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TimeScale {
    Canonical,
    RawRate,
}

/// One ring of the graphical construction.
#[derive(Debug, Clone, Copy)]
pub struct Event {
    /// 1-based index of the ring.
    pub index: u64,
    /// Absolute ring time.
    pub time: f64,
    pub edge: EdgeId,
    /// Drives the non-marked/black particle update.
    pub u_b: f64,
    /// Drives the marked particle, or expands into the colour-step
    /// substreams of the chameleon process.
    pub u_c: f64,
}

/// A reproducible realization of the graphical construction. Replica `r`
/// of a master seed is an independent substream; regenerating a stream
/// from the same `(seed, replica)` yields identical events bit for bit.
/// Coins are drawn from their own lane so that consuming them never
/// perturbs the event sequence.
#[derive(Debug, Clone)]
pub struct EventStream {
    rate: f64,
    cum_edge: Vec<f64>,
    rng: ChaCha8Rng,
    coin_rng: ChaCha8Rng,
    time: f64,
    index: u64,
    coins_used: u64,
    pending: Option<Event>,
}

impl EventStream {
    pub fn new(g: &WeightedGraph, seed: u64, scale: TimeScale) -> Self {
        Self::substream(g, seed, scale, 0)
    }

    /// Independent substream for parallel replica `replica`.
    pub fn substream(g: &WeightedGraph, seed: u64, scale: TimeScale, replica: u64) -> Self {
        let rate = match scale {
            TimeScale::Canonical => 1.0,
            TimeScale::RawRate => g.total_weight(),
        };
        let mut cum_edge = Vec::with_capacity(g.edges().len());
        let mut acc = 0.0;
        for &p in g.ring_probs() {
            acc += p;
            cum_edge.push(acc);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2 * replica);
        let mut coin_rng = ChaCha8Rng::seed_from_u64(seed);
        coin_rng.set_stream(2 * replica + 1);
        Self {
            rate,
            cum_edge,
            rng,
            coin_rng,
            time: 0.0,
            index: 0,
            coins_used: 0,
            pending: None,
        }
    }

    /// Total event rate of this stream's clock.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Current clock time (the time of the last event generated).
    pub fn time(&self) -> f64 {
        self.time
    }

    /// The next ring, without consuming it.
    pub fn peek(&mut self) -> Event {
        if self.pending.is_none() {
            self.pending = Some(self.generate());
        }
        self.pending.unwrap()
    }

    /// Generates the next ring.
    pub fn next_event(&mut self) -> Event {
        if let Some(e) = self.pending.take() {
            return e;
        }
        self.generate()
    }

    fn generate(&mut self) -> Event {
        let u: f64 = self.rng.random();
        self.time += -(1.0 - u).ln() / self.rate;
        let pick: f64 = self.rng.random();
        let edge = self
            .cum_edge
            .partition_point(|&c| c < pick)
            .min(self.cum_edge.len() - 1);
        let u_b: f64 = self.rng.random();
        let u_c: f64 = self.rng.random();
        self.index += 1;
        Event {
            index: self.index,
            time: self.time,
            edge,
            u_b,
            u_c,
        }
    }

    /// The next fair coin `d`, used only at depinking times.
    pub fn next_coin(&mut self) -> bool {
        self.coins_used += 1;
        self.coin_rng.random::<bool>()
    }
}

/// Expands a single uniform into a reproducible substream. Lane indices
/// separate uses that must be mutually independent.
pub fn expand_uniform(u: f64, lane: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(u.to_bits());
    rng.set_stream(lane);
    rng
}
