//! Exact total-variation mixing by uniformization: the decay curve, the
//! quarter mixing time, and a Monte Carlo estimate with its plug-in bias.

use bbsp::analysis::{exact_tv_curve, mc_tv_mixing, t_mix_exact, ExactChain};
use bbsp::kernel::DEFAULT_STATE_CAP;
use bbsp::{Occupancy, SplitParam, WeightedGraph};

fn main() -> bbsp::Result<()> {
    let param = SplitParam::parse("1")?;

    // the three-state chain has a closed form: TV(t) = (2/3) e^{-t}
    let g = WeightedGraph::line(2)?;
    let chain = ExactChain::new(&g, param, 2, DEFAULT_STATE_CAP)?;
    let xi0 = Occupancy::new(vec![2, 0]);
    let times = [0.0, 0.5, 1.0, 2.0, 4.0];
    let curve = exact_tv_curve(&chain, &xi0, &times)?;
    println!("two vertices, two particles, s = 1:");
    for (t, tv) in times.iter().zip(&curve) {
        println!("  TV({t}) = {tv:.6} (closed form {:.6})", 2.0 / 3.0 * (-t).exp());
    }
    println!("  t_mix(1/4) = {:.6} (ln(8/3) = {:.6})", t_mix_exact(&chain, 0.25), (8.0f64 / 3.0).ln());

    // a bigger desk-scale chain plus the Monte Carlo counterpart
    let g = WeightedGraph::cycle(4)?;
    let m = 3u32;
    let chain = ExactChain::new(&g, param, m, DEFAULT_STATE_CAP)?;
    let xi0 = Occupancy::point_mass(g.n(), m);
    let times = [1.0, 3.0, 6.0, 12.0];
    let curve = exact_tv_curve(&chain, &xi0, &times)?;
    let mc = mc_tv_mixing(&g, param, m, &xi0, &times, 5, 30_000)?;
    println!("\ncycle on 4 vertices, 3 particles ({} states):", chain.len());
    for ((t, tv), point) in times.iter().zip(&curve).zip(&mc) {
        println!(
            "  TV({t}) exact {tv:.4}, MC {:.4} (plug-in bias about {:.4})",
            point.tv_estimate, point.plug_in_bias
        );
    }
    println!("  t_mix(1/4) = {:.4}", t_mix_exact(&chain, 0.25));
    Ok(())
}
