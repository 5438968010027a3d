//! Simulation and verification toolkit for the symmetric beta-binomial
//! splitting process on finite weighted connected graphs.
//!
//! The library covers:
//!
//! - the one-edge beta-binomial transition kernel, state enumeration and
//!   the stationary distribution ([`kernel`]);
//! - a seeded graphical construction (ring times, edges, uniforms, coins)
//!   from which every process here is built as a deterministic function
//!   ([`stream`]);
//! - trajectory simulation of the splitting process, including a monotone
//!   coupling of the unrestricted line process ([`sim`]);
//! - the marked process with its exact placement probabilities ([`mabb`]);
//! - the chameleon process: placement bounds, pinkening rounds, depinking
//!   and ink accounting ([`chameleon`]);
//! - expected meeting times of two independent walks on the half-weight
//!   graph, exact and Monte Carlo ([`meeting`]);
//! - exact total-variation mixing curves by uniformization, the sine
//!   eigenfunction lower bound on the line, and the upper-bound constants
//!   ([`analysis`]);
//! - an experiment harness and a verification suite ([`harness`],
//!   [`verify`]).
//!
//! Run `cargo run --example simulate_bbsp` (or any of the other examples)
//! for end-to-end usage; the `bbsp` binary exposes the same entry points
//! as subcommands.

pub mod analysis;
pub mod chameleon;
pub mod error;
pub mod graph;
pub mod harness;
pub mod kernel;
pub mod mabb;
pub mod meeting;
pub mod params;
pub mod sim;
pub mod stream;
pub mod verify;
pub mod walkthrough;

pub use error::{Error, Result};
pub use graph::{Edge, EdgeId, WeightedGraph};
pub use kernel::{KernelTable, Occupancy};
pub use params::SplitParam;
pub use stream::{EventStream, TimeScale};
