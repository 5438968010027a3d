//! Run the chameleon process to absorption: watch ink move only at
//! depinking times and check the Fill frequency against the martingale
//! prediction chi(xi(x)) / (a(m-1) + bn).

use bbsp::chameleon::{recommended_round_length, run_chameleon, ChameleonMode};
use bbsp::kernel::KernelTable;
use bbsp::{EventStream, Occupancy, SplitParam, TimeScale, WeightedGraph};

fn main() -> bbsp::Result<()> {
    let g = WeightedGraph::line(3)?;
    let param = SplitParam::parse("1")?;
    let table = KernelTable::new(param);
    let xi = Occupancy::new(vec![1, 1, 0]);
    let x = 2usize;
    let round_len = recommended_round_length(&g)?;
    println!("round length T = 2 * max expected meeting time = {round_len:.4}");

    // one run in detail
    let mut stream = EventStream::new(&g, 12, TimeScale::Canonical);
    let (run, state) = run_chameleon(
        &g,
        &table,
        &xi,
        x,
        round_len,
        &mut stream,
        ChameleonMode::Standard,
        1e6,
        |_, _| {},
    )?;
    println!("\none trajectory (ink changes only at depinkings):");
    for rec in run.depinkings().take(12) {
        println!(
            "  depinking at t = {:8.3} (round {:3}): ink -> {}",
            rec.time,
            rec.round,
            rec.ink2_after as f64 / 2.0
        );
    }
    println!(
        "  absorbed with Fill = {:?} at ink {}",
        run.fill,
        state.total_ink2() as f64 / 2.0
    );

    // Fill frequency over many runs
    let runs = 20_000u64;
    let mut fills = 0u64;
    for r in 0..runs {
        let mut stream = EventStream::substream(&g, 777, TimeScale::Canonical, r);
        let (run, _) = run_chameleon(
            &g,
            &table,
            &xi,
            x,
            round_len,
            &mut stream,
            ChameleonMode::Standard,
            1e7,
            |_, _| {},
        )?;
        if run.fill == Some(true) {
            fills += 1;
        }
    }
    let total_nonblack = param.a() * xi.total() + param.b() * g.n() as u64;
    let want = param.colour(xi.get(x) as u64) as f64 / total_nonblack as f64;
    println!(
        "\nFill frequency over {runs} runs: {:.4} (martingale prediction {want:.4})",
        fills as f64 / runs as f64
    );
    Ok(())
}
