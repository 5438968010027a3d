//! Experiment configuration and the batch runner: parses flat key-value
//! or JSON configs, dispatches on the process under study, and writes
//! deterministic CSV/JSON artifacts (same config and seed, same bytes).

use crate::chameleon::{recommended_round_length, run_chameleon, ChameleonMode};
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::kernel::{KernelTable, Occupancy};
use crate::mabb::{simulate_mabb_sampled, MarkedState};
use crate::meeting::{exact_meeting_times, mc_meeting_time, tau0_upper_proxy};
use crate::params::SplitParam;
use crate::sim::simulate_bbsp_sampled;
use crate::stream::{EventStream, TimeScale};
use crate::{analysis, kernel};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// A fully deterministic experiment description. The text form is a flat
/// `key = value` file; JSON with the same fields is accepted as well.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `line`, `cycle`, `complete`, or `file:PATH`.
    pub graph: String,
    pub n: usize,
    /// The splitting parameter as an exact fraction `B/A`.
    pub s: String,
    /// Total particle count (including the mark for the marked processes).
    pub m: u32,
    /// `bbsp`, `mabb`, or `chameleon`.
    pub process: String,
    /// Chameleon variant: `standard` or `modified`.
    pub mode: String,
    /// Round length: `auto` (twice the max expected meeting time) or a number.
    pub round_length: String,
    pub seed: u64,
    pub replicas: u64,
    pub t_end: f64,
    /// Ascending sample times for trajectory output.
    pub sample_times: Vec<f64>,
    pub raw_rate: bool,
    /// Initial occupancy (the non-marked part for mabb/chameleon);
    /// defaults to all particles on vertex 1.
    pub init: Option<Vec<u32>>,
    /// Start vertex of the mark for mabb/chameleon.
    pub mark: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: "line".into(),
            n: 2,
            s: "1".into(),
            m: 2,
            process: "bbsp".into(),
            mode: "standard".into(),
            round_length: "auto".into(),
            seed: 1,
            replicas: 1,
            t_end: 1.0,
            sample_times: vec![1.0],
            raw_rate: false,
            init: None,
            mark: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            return serde_json::from_str(text)
                .map_err(|e| Error::Config(format!("invalid JSON config: {e}")));
        }
        let mut map = serde_json::Map::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let json = match key {
                "graph" | "s" | "process" | "mode" | "round_length" => {
                    serde_json::Value::String(value.to_string())
                }
                "n" | "m" | "seed" | "replicas" | "mark" => value
                    .parse::<u64>()
                    .map(Into::into)
                    .map_err(|_| Error::Config(format!("{key}: expected an integer")))?,
                "t_end" => value
                    .parse::<f64>()
                    .map(Into::into)
                    .map_err(|_| Error::Config(format!("{key}: expected a number")))?,
                "raw_rate" => value
                    .parse::<bool>()
                    .map(Into::into)
                    .map_err(|_| Error::Config(format!("{key}: expected true/false")))?,
                "sample_times" => serde_json::Value::Array(
                    parse_list::<f64>(value, key)?
                        .into_iter()
                        .map(Into::into)
                        .collect(),
                ),
                "init" => serde_json::Value::Array(
                    parse_list::<u32>(value, key)?
                        .into_iter()
                        .map(Into::into)
                        .collect(),
                ),
                other => return Err(Error::Config(format!("unknown key {other:?}"))),
            };
            map.insert(key.to_string(), json);
        }
        serde_json::from_value(serde_json::Value::Object(map))
            .map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    /// Canonical flat key-value form; the round-trip through
    /// [`ExperimentConfig::parse`] is the identity.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "graph = {}", self.graph);
        let _ = writeln!(out, "n = {}", self.n);
        let _ = writeln!(out, "s = {}", self.s);
        let _ = writeln!(out, "m = {}", self.m);
        let _ = writeln!(out, "process = {}", self.process);
        let _ = writeln!(out, "mode = {}", self.mode);
        let _ = writeln!(out, "round_length = {}", self.round_length);
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "replicas = {}", self.replicas);
        let _ = writeln!(out, "t_end = {:?}", self.t_end);
        let times: Vec<String> = self.sample_times.iter().map(|t| format!("{t:?}")).collect();
        let _ = writeln!(out, "sample_times = {}", times.join(","));
        let _ = writeln!(out, "raw_rate = {}", self.raw_rate);
        if let Some(init) = &self.init {
            let parts: Vec<String> = init.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "init = {}", parts.join(","));
        }
        let _ = writeln!(out, "mark = {}", self.mark);
        out
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a64(self.to_kv().as_bytes())
    }

    pub fn build_graph(&self) -> Result<WeightedGraph> {
        build_graph(&self.graph, self.n)
    }

    pub fn param(&self) -> Result<SplitParam> {
        SplitParam::parse(&self.s)
    }

    pub fn time_scale(&self) -> TimeScale {
        if self.raw_rate {
            TimeScale::RawRate
        } else {
            TimeScale::Canonical
        }
    }

    fn initial_occupancy(&self, g: &WeightedGraph, total: u32) -> Result<Occupancy> {
        match &self.init {
            None => Ok(Occupancy::point_mass(g.n(), total)),
            Some(counts) => {
                if counts.len() != g.n() {
                    return Err(Error::Config(format!(
                        "init has {} entries for a graph on {} vertices",
                        counts.len(),
                        g.n()
                    )));
                }
                let occ = Occupancy::new(counts.clone());
                if occ.total() != total as u64 {
                    return Err(Error::Config(format!(
                        "init sums to {} but the process needs {total} particles",
                        occ.total()
                    )));
                }
                Ok(occ)
            }
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("{key}: invalid entry {part:?}")))
        })
        .collect()
}

/// Builds one of the canonical families or loads a graph file.
pub fn build_graph(spec: &str, n: usize) -> Result<WeightedGraph> {
    if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)?;
        return WeightedGraph::parse(&text);
    }
    match spec {
        "line" => WeightedGraph::line(n),
        "cycle" => WeightedGraph::cycle(n),
        "complete" => WeightedGraph::complete(n, None),
        other => Err(Error::Config(format!(
            "unknown graph {other:?} (use line, cycle, complete, or file:PATH)"
        ))),
    }
}

/// 64-bit FNV-1a, used for state hashes and config hashes so outputs are
/// stable across runs and toolchains.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn state_hash(occ: &Occupancy) -> u64 {
    let mut bytes = Vec::with_capacity(occ.n() * 4);
    for &c in occ.as_slice() {
        bytes.extend_from_slice(&c.to_le_bytes());
    }
    fnv1a64(&bytes)
}

/// Paths written by a run, echoed in the summary.
#[derive(Debug, Clone, Serialize)]
pub struct RunArtifacts {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    version: &'static str,
    config_hash: String,
    config: &'a ExperimentConfig,
    rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    absorption: Option<AbsorptionSummary>,
}

#[derive(Serialize)]
struct AbsorptionSummary {
    runs: u64,
    fills: u64,
    zeros: u64,
    unresolved: u64,
    fill_frequency: f64,
    mean_depinkings: f64,
}

/// Runs the configured experiment and writes `trajectory.csv` plus
/// `summary.json` under `out_dir`.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let g = config.build_graph()?;
    let param = config.param()?;
    let table = KernelTable::new(param);
    let scale = config.time_scale();
    let mut csv = String::new();
    let mut rows = 0usize;
    let mut absorption = None;

    match config.process.as_str() {
        "bbsp" => {
            let xi0 = config.initial_occupancy(&g, config.m)?;
            let _ = write!(csv, "replica,time");
            for v in 1..=g.n() {
                let _ = write!(csv, ",v{v}");
            }
            let _ = writeln!(csv);
            for r in 0..config.replicas {
                let mut stream = EventStream::substream(&g, config.seed, scale, r);
                let samples =
                    simulate_bbsp_sampled(&g, &table, xi0.clone(), &mut stream, &config.sample_times);
                for (t, s) in config.sample_times.iter().zip(&samples) {
                    let _ = write!(csv, "{r},{t:?}");
                    for &c in s.as_slice() {
                        let _ = write!(csv, ",{c}");
                    }
                    let _ = writeln!(csv);
                    rows += 1;
                }
            }
        }
        "mabb" => {
            if config.m < 1 {
                return Err(Error::Config("mabb needs m >= 1".into()));
            }
            let xi0 = config.initial_occupancy(&g, config.m - 1)?;
            if config.mark < 1 || config.mark > g.n() {
                return Err(Error::VertexOutOfRange(config.mark, g.n()));
            }
            let _ = writeln!(csv, "replica,time,marked_vertex,state_hash");
            for r in 0..config.replicas {
                let mut stream = EventStream::substream(&g, config.seed, scale, r);
                let s0 = MarkedState {
                    nonmarked: xi0.clone(),
                    marked: config.mark,
                };
                let samples =
                    simulate_mabb_sampled(&g, &table, s0, &mut stream, &config.sample_times);
                for (t, s) in config.sample_times.iter().zip(&samples) {
                    let _ = writeln!(
                        csv,
                        "{r},{t:?},{},{:016x}",
                        s.marked,
                        state_hash(&s.nonmarked)
                    );
                    rows += 1;
                }
            }
        }
        "chameleon" => {
            let xi0 = config.initial_occupancy(&g, config.m - 1)?;
            let mode = match config.mode.as_str() {
                "standard" => ChameleonMode::Standard,
                "modified" => ChameleonMode::Modified,
                other => return Err(Error::Config(format!("unknown mode {other:?}"))),
            };
            let round_len = match config.round_length.as_str() {
                "auto" => recommended_round_length(&g)?,
                text => text
                    .parse::<f64>()
                    .map_err(|_| Error::Config("round_length: expected `auto` or a number".into()))?,
            };
            if round_len <= 0.0 {
                return Err(Error::Config("round_length must be positive".into()));
            }
            let _ = writeln!(csv, "replica,time,total_ink,n_red,n_pink,depink_index");
            let (mut fills, mut zeros, mut unresolved, mut depink_total) = (0u64, 0u64, 0u64, 0u64);
            for r in 0..config.replicas {
                let mut stream = EventStream::substream(&g, config.seed, scale, r);
                let mut rows_local: Vec<(f64, f64, u32, u32, u64)> = Vec::new();
                let (run, state) = run_chameleon(
                    &g,
                    &table,
                    &xi0,
                    config.mark,
                    round_len,
                    &mut stream,
                    mode,
                    config.t_end,
                    |s, _| {
                        rows_local.push((
                            s.time,
                            s.total_ink2() as f64 / 2.0,
                            s.total_red(),
                            s.total_pink(),
                            s.depink_count,
                        ));
                    },
                )?;
                let mut depinks_so_far = 0u64;
                for end in &run.round_ends {
                    let (red_after, pink_after) = if end.depinked {
                        depinks_so_far += 1;
                        (end.ink2_after / 2, 0)
                    } else {
                        (end.red_before, end.pink_before)
                    };
                    rows_local.push((
                        end.time,
                        end.ink2_after as f64 / 2.0,
                        red_after,
                        pink_after,
                        depinks_so_far,
                    ));
                }
                rows_local.sort_by(|a, b| {
                    a.0.partial_cmp(&b.0)
                        .unwrap()
                        .then(a.4.cmp(&b.4))
                });
                for (time, ink, red, pink, depink) in rows_local {
                    let _ = writeln!(csv, "{r},{time:?},{ink:?},{red},{pink},{depink}");
                    rows += 1;
                }
                depink_total += state.depink_count;
                match run.fill {
                    Some(true) => fills += 1,
                    Some(false) => zeros += 1,
                    None => unresolved += 1,
                }
            }
            absorption = Some(AbsorptionSummary {
                runs: config.replicas,
                fills,
                zeros,
                unresolved,
                fill_frequency: fills as f64 / config.replicas as f64,
                mean_depinkings: depink_total as f64 / config.replicas as f64,
            });
        }
        other => {
            return Err(Error::Config(format!(
                "unknown process {other:?} (use bbsp, mabb, or chameleon)"
            )))
        }
    }

    let csv_path = out_dir.join("trajectory.csv");
    std::fs::write(&csv_path, csv)?;
    let summary = RunSummary {
        version: env!("CARGO_PKG_VERSION"),
        config_hash: format!("{:016x}", config.config_hash()),
        config,
        rows,
        absorption,
    };
    let summary_path = out_dir.join("summary.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;
    Ok(RunArtifacts {
        csv: csv_path,
        summary: summary_path,
    })
}

#[derive(Serialize)]
struct MeetingSummary {
    version: &'static str,
    max_entry: f64,
    recommended_round_length: f64,
    tau0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mc: Option<McMeeting>,
}

#[derive(Serialize)]
struct McMeeting {
    i: usize,
    j: usize,
    mean: f64,
    stderr: f64,
    replicas: u64,
}

/// Writes the full expected-meeting-time matrix (CSV) and a JSON summary
/// with the max entry, the hitting-time proxy and an optional MC estimate.
pub fn meet(
    g: &WeightedGraph,
    scale: TimeScale,
    mc: Option<(usize, usize, u64, u64)>,
    out_dir: &Path,
) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let solve = exact_meeting_times(g, scale)?;
    let mut csv = String::from("i");
    for j in 1..=g.n() {
        let _ = write!(csv, ",j{j}");
    }
    let _ = writeln!(csv);
    for i in 1..=g.n() {
        let _ = write!(csv, "{i}");
        for j in 1..=g.n() {
            let _ = write!(csv, ",{:?}", solve.get(i, j));
        }
        let _ = writeln!(csv);
    }
    let mc = mc.map(|(i, j, seed, replicas)| {
        let (mean, stderr) = mc_meeting_time(g, i, j, scale, seed, replicas);
        McMeeting {
            i,
            j,
            mean,
            stderr,
            replicas,
        }
    });
    let summary = MeetingSummary {
        version: env!("CARGO_PKG_VERSION"),
        max_entry: solve.max_entry,
        recommended_round_length: 2.0 * solve.max_entry,
        tau0: tau0_upper_proxy(g, scale)?,
        mc,
    };
    let csv_path = out_dir.join("meeting.csv");
    std::fs::write(&csv_path, csv)?;
    let summary_path = out_dir.join("meeting.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;
    Ok(RunArtifacts {
        csv: csv_path,
        summary: summary_path,
    })
}

#[derive(Serialize)]
struct MixSummary {
    version: &'static str,
    exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_mix: Option<f64>,
    epsilon: f64,
}

/// Exact TV curve from the worst-case corner start, plus the epsilon
/// mixing time.
pub fn mix_exact(
    g: &WeightedGraph,
    param: SplitParam,
    m: u32,
    times: &[f64],
    eps: f64,
    out_dir: &Path,
) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let chain = analysis::ExactChain::new(g, param, m, kernel::DEFAULT_STATE_CAP)?;
    let xi0 = Occupancy::point_mass(g.n(), m);
    let curve = analysis::exact_tv_curve(&chain, &xi0, times)?;
    let mut csv = String::from("time,tv\n");
    for (t, tv) in times.iter().zip(&curve) {
        let _ = writeln!(csv, "{t:?},{tv:?}");
    }
    let summary = MixSummary {
        version: env!("CARGO_PKG_VERSION"),
        exact: true,
        t_mix: Some(analysis::t_mix_exact(&chain, eps)),
        epsilon: eps,
    };
    let csv_path = out_dir.join("tv_curve.csv");
    std::fs::write(&csv_path, csv)?;
    let summary_path = out_dir.join("mixing.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;
    Ok(RunArtifacts {
        csv: csv_path,
        summary: summary_path,
    })
}

/// Monte Carlo TV curve with the plug-in bias column.
pub fn mix_mc(
    g: &WeightedGraph,
    param: SplitParam,
    m: u32,
    times: &[f64],
    seed: u64,
    replicas: u64,
    out_dir: &Path,
) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let xi0 = Occupancy::point_mass(g.n(), m);
    let points = analysis::mc_tv_mixing(g, param, m, &xi0, times, seed, replicas)?;
    let mut csv = String::from("time,tv_estimate,plug_in_bias\n");
    for p in &points {
        let _ = writeln!(csv, "{:?},{:?},{:?}", p.time, p.tv_estimate, p.plug_in_bias);
    }
    let summary = MixSummary {
        version: env!("CARGO_PKG_VERSION"),
        exact: false,
        t_mix: None,
        epsilon: 0.25,
    };
    let csv_path = out_dir.join("tv_mc.csv");
    std::fs::write(&csv_path, csv)?;
    let summary_path = out_dir.join("mixing.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;
    Ok(RunArtifacts {
        csv: csv_path,
        summary: summary_path,
    })
}

#[derive(Serialize)]
struct LowerBoundSummary {
    version: &'static str,
    n: usize,
    m: u32,
    s: f64,
    c_eps: f64,
    bound: analysis::LineLowerBound,
    lambda: f64,
    checks: Vec<analysis::ChebyshevCheck>,
}

/// The line lower-bound formula plus exact set-difference checks on the
/// enumerated chain at the given times.
pub fn lower_bound(
    n: usize,
    m: u32,
    param: SplitParam,
    c_eps: f64,
    check_times: &[f64],
    out_dir: &Path,
) -> Result<RunArtifacts> {
    std::fs::create_dir_all(out_dir)?;
    let g = WeightedGraph::line(n)?;
    let chain = analysis::ExactChain::new(&g, param, m, kernel::DEFAULT_STATE_CAP)?;
    let checks: Vec<analysis::ChebyshevCheck> = check_times
        .iter()
        .map(|&t| analysis::chebyshev_lower_check(&chain, t))
        .collect();
    let mut csv = String::from("t,tv_exact,bound,ok,ef_t,ef_predicted\n");
    for c in &checks {
        let _ = writeln!(
            csv,
            "{:?},{:?},{:?},{},{:?},{:?}",
            c.t, c.tv_exact, c.bound, c.ok, c.ef_t, c.ef_predicted
        );
    }
    let summary = LowerBoundSummary {
        version: env!("CARGO_PKG_VERSION"),
        n,
        m,
        s: param.s(),
        c_eps,
        bound: analysis::line_lower_bound(n, m, param.s(), c_eps),
        lambda: analysis::wilson_lambda(n),
        checks,
    };
    let csv_path = out_dir.join("lower_bound_checks.csv");
    std::fs::write(&csv_path, csv)?;
    let summary_path = out_dir.join("lower_bound.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("serializable") + "\n",
    )?;
    Ok(RunArtifacts {
        csv: csv_path,
        summary: summary_path,
    })
}

/// The computable upper-bound constants as JSON.
pub fn bounds(
    g: &WeightedGraph,
    param: SplitParam,
    m: u32,
    eps: f64,
    out_dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    #[derive(Serialize)]
    struct Wrapped {
        version: &'static str,
        report: analysis::BoundReport,
    }
    let wrapped = Wrapped {
        version: env!("CARGO_PKG_VERSION"),
        report: analysis::bound_report(g, param, m, eps)?,
    };
    let path = out_dir.join("bounds.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&wrapped).expect("serializable") + "\n",
    )?;
    Ok(path)
}
