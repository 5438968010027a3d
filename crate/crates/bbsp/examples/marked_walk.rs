//! Follow the marked particle: its placement after each ring follows an
//! explicit ratio of edge-kernel values, and in the long run its location
//! given the non-marked configuration has the colour-proportional law.

use bbsp::kernel::KernelTable;
use bbsp::mabb::{marked_placement_prob, pi_xi, simulate_mabb, MarkedState};
use bbsp::{EventStream, Occupancy, SplitParam, TimeScale, WeightedGraph};
use std::collections::HashMap;

fn main() -> bbsp::Result<()> {
    let g = WeightedGraph::cycle(3)?;
    let param = SplitParam::parse("3/2")?;
    let table = KernelTable::new(param);

    // one-step placement probabilities on an edge with two non-marked particles
    let e = g.edge(g.edge_id(1, 2)?);
    let xi = Occupancy::new(vec![2, 0, 1]);
    println!("placement probabilities for the mark on vertex 1, non-marked (2,0) -> (k, 2-k):");
    for k in 0..=2u32 {
        let xi_next = xi.with_pair(1, 2, k, 2 - k);
        let stay = marked_placement_prob(&table, e, &xi, &xi_next, 1)?;
        let hop = marked_placement_prob(&table, e, &xi, &xi_next, 2)?;
        println!("  k = {k}: stay {stay:.4}, hop {hop:.4} (sum {:.12})", stay + hop);
    }

    // long-run conditional law of the mark given the non-marked state
    let replicas = 60_000u64;
    let t = 25.0;
    let mut by_xi: HashMap<Vec<u32>, (u64, Vec<u64>)> = HashMap::new();
    for r in 0..replicas {
        let mut stream = EventStream::substream(&g, 99, TimeScale::Canonical, r);
        let s0 = MarkedState {
            nonmarked: xi.clone(),
            marked: 1,
        };
        let end = simulate_mabb(&g, &table, s0, &mut stream, t);
        let entry = by_xi
            .entry(end.nonmarked.as_slice().to_vec())
            .or_insert((0, vec![0; g.n()]));
        entry.0 += 1;
        entry.1[end.marked - 1] += 1;
    }
    println!("\nempirical P(mark = v | non-marked state) vs the colour-share law at t = {t}:");
    let mut rows: Vec<_> = by_xi.into_iter().collect();
    rows.sort();
    for (xi_vec, (total, marks)) in rows.into_iter().take(6) {
        let occ = Occupancy::new(xi_vec);
        let got: Vec<String> = marks
            .iter()
            .map(|&c| format!("{:.3}", c as f64 / total as f64))
            .collect();
        let want: Vec<String> = (1..=g.n())
            .map(|v| format!("{:.3}", pi_xi(param, &occ, v)))
            .collect();
        println!("  {occ} ({total} hits): [{}] vs [{}]", got.join(", "), want.join(", "));
    }
    Ok(())
}
