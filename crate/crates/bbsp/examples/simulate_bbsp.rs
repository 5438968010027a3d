//! Simulate the splitting process on a line and compare the long-run
//! empirical state distribution against the exact stationary law.

use bbsp::kernel::{enumerate_states, stationary_over, KernelTable, DEFAULT_STATE_CAP};
use bbsp::sim::simulate_bbsp;
use bbsp::{EventStream, Occupancy, SplitParam, TimeScale, WeightedGraph};
use std::collections::HashMap;

fn main() -> bbsp::Result<()> {
    let g = WeightedGraph::line(4)?;
    let param = SplitParam::parse("1/2")?;
    let table = KernelTable::new(param);
    let m = 6u32;
    let xi0 = Occupancy::point_mass(g.n(), m);

    println!("one trajectory, sampled along the way:");
    let mut stream = EventStream::new(&g, 7, TimeScale::Canonical);
    let mut state = xi0.clone();
    for step in [5.0, 10.0, 20.0, 40.0] {
        let tr = simulate_bbsp(&g, &table, state, &mut stream, step);
        println!(
            "  t = {step:>5}: state {} after {} more events",
            tr.current, tr.events_applied
        );
        state = tr.current;
    }

    let replicas = 50_000u64;
    let t_end = 30.0;
    let mut hist: HashMap<Vec<u32>, u64> = HashMap::new();
    for r in 0..replicas {
        let mut stream = EventStream::substream(&g, 2024, TimeScale::Canonical, r);
        let tr = simulate_bbsp(&g, &table, xi0.clone(), &mut stream, t_end);
        *hist.entry(tr.current.as_slice().to_vec()).or_insert(0) += 1;
    }

    let states = enumerate_states(g.n(), m, DEFAULT_STATE_CAP)?;
    let pi = stationary_over(&states, param);
    println!("\nempirical law at t = {t_end} over {replicas} replicas vs the stationary law:");
    let mut worst = 0.0f64;
    let mut shown = 0;
    for (state, want) in states.iter().zip(&pi) {
        let got = *hist.get(state.as_slice()).unwrap_or(&0) as f64 / replicas as f64;
        worst = worst.max((got - want).abs());
        if shown < 8 {
            println!("  {state}: {got:.4} vs {want:.4}");
            shown += 1;
        }
    }
    println!("  ... max |empirical - stationary| over all {} states: {worst:.4}", states.len());
    Ok(())
}
