//! Expected meeting times of two independent walks on the half-weight
//! graph: exact matrix from the product-chain solve, a Monte Carlo
//! cross-check, and the average-hitting-time ceiling.

use bbsp::meeting::{exact_meeting_times, mc_meeting_time, tau0_upper_proxy};
use bbsp::{TimeScale, WeightedGraph};

fn main() -> bbsp::Result<()> {
    for g in [
        WeightedGraph::line(2)?,
        WeightedGraph::line(5)?,
        WeightedGraph::cycle(5)?,
        WeightedGraph::complete(5, None)?,
    ] {
        let solve = exact_meeting_times(&g, TimeScale::Canonical)?;
        println!(
            "graph with {} vertices, {} edges:",
            g.n(),
            g.edges().len()
        );
        for i in 1..=g.n() {
            let row: Vec<String> = (1..=g.n())
                .map(|j| format!("{:8.3}", solve.get(i, j)))
                .collect();
            println!("  {}", row.join(" "));
        }
        let (mc, se) = mc_meeting_time(&g, 1, g.n(), TimeScale::Canonical, 31, 30_000);
        println!(
            "  max entry {:.4}; MC from (1, {}): {mc:.4} +- {se:.4} vs exact {:.4}",
            solve.max_entry,
            g.n(),
            solve.get(1, g.n())
        );
        println!(
            "  average hitting time tau0 = {:.4}\n",
            tau0_upper_proxy(&g, TimeScale::Canonical)?
        );
    }

    println!("cubic growth of tau0 on lines:");
    for n in [4usize, 8, 16] {
        let tau0 = tau0_upper_proxy(&WeightedGraph::line(n)?, TimeScale::Canonical)?;
        println!("  n = {n:>2}: tau0 = {tau0:10.2}");
    }
    Ok(())
}
