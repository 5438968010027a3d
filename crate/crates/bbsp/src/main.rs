use bbsp::harness::{self, build_graph, ExperimentConfig};
use bbsp::params::SplitParam;
use bbsp::stream::TimeScale;
use bbsp::verify::{self, Level};
use bbsp::walkthrough;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulation and verification toolkit for the symmetric beta-binomial
/// splitting process.
#[derive(Parser)]
#[command(name = "bbsp", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Graph family: line, cycle, complete, or file:PATH
    #[arg(long, default_value = "line")]
    graph: String,
    /// Vertex count for the canonical families
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Use the summed-edge-weight clock instead of the normalized one
    #[arg(long, default_value_t = false)]
    raw_rate: bool,
}

impl GraphArgs {
    fn scale(&self) -> TimeScale {
        if self.raw_rate {
            TimeScale::RawRate
        } else {
            TimeScale::Canonical
        }
    }
}

#[derive(Args, Clone)]
struct ProcessArgs {
    /// Config file (flat key = value or JSON); the seed flag overrides it
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    graph: GraphArgs,
    /// Splitting parameter as an exact fraction B/A
    #[arg(long, default_value = "1")]
    s: String,
    /// Total particle count (including the mark where applicable)
    #[arg(long, default_value_t = 2)]
    m: u32,
    /// Master seed; replica r uses substream r
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    replicas: u64,
    #[arg(long, default_value_t = 5.0)]
    t_end: f64,
    /// Comma-separated sample times
    #[arg(long, value_delimiter = ',')]
    sample_times: Vec<f64>,
    /// Initial occupancy (comma-separated counts)
    #[arg(long, value_delimiter = ',')]
    init: Vec<u32>,
    /// Start vertex of the mark
    #[arg(long, default_value_t = 1)]
    mark: usize,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl ProcessArgs {
    fn into_config(self, process: &str) -> Result<(ExperimentConfig, PathBuf), bbsp::Error> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(path)?)?,
            None => {
                let mut c = ExperimentConfig::default();
                c.graph = self.graph.graph.clone();
                c.n = self.graph.n;
                c.raw_rate = self.graph.raw_rate;
                c.s = self.s.clone();
                c.m = self.m;
                c.replicas = self.replicas;
                c.t_end = self.t_end;
                c.sample_times = if self.sample_times.is_empty() {
                    vec![self.t_end]
                } else {
                    self.sample_times.clone()
                };
                if !self.init.is_empty() {
                    c.init = Some(self.init.clone());
                }
                c.mark = self.mark;
                c
            }
        };
        config.process = process.to_string();
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok((config, self.out))
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate trajectories of the splitting process
    Simulate(ProcessArgs),
    /// Simulate the marked process
    Mabb(ProcessArgs),
    /// Run the chameleon process and its ink ledger
    Cham {
        #[command(flatten)]
        process: ProcessArgs,
        /// Round length: auto (twice the max expected meeting time) or a number
        #[arg(long = "t", default_value = "auto")]
        round_length: String,
        /// standard or modified pinkening cap
        #[arg(long, default_value = "standard")]
        mode: String,
    },
    /// Expected meeting times of two walks on the half-weight graph
    Meet {
        #[command(flatten)]
        graph: GraphArgs,
        /// Also Monte Carlo the pair (i, j)
        #[arg(long)]
        i: Option<usize>,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        replicas: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Exact total-variation mixing curve and mixing time
    MixExact {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value = "1")]
        s: String,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Monte Carlo mixing curve with the plug-in bias column
    MixMc {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value = "1")]
        s: String,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
        times: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        replicas: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// The line mixing-time lower bound and its exact desk-scale checks
    LowerBound {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, default_value = "1")]
        s: String,
        /// The epsilon-dependent constant, supplied not fabricated
        #[arg(long, default_value_t = 0.0)]
        c_eps: f64,
        /// Times (in units of 1/|lambda|) for the set-difference checks
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1")]
        check_times: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// The computable upper-bound constants
    Bounds {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, default_value = "1")]
        s: String,
        #[arg(long, default_value_t = 2)]
        m: u32,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the verification suite
    Verify {
        #[arg(long, default_value = "quick")]
        level: String,
        /// Also write the report as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Replay the worked two-update example
    Walkthrough,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode, bbsp::Error> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Simulate(args) => {
            let (config, out) = args.into_config("bbsp")?;
            let artifacts = harness::run(&config, &out)?;
            println!(
                "wrote {} and {}",
                artifacts.csv.display(),
                artifacts.summary.display()
            );
        }
        Cmd::Mabb(args) => {
            let (config, out) = args.into_config("mabb")?;
            let artifacts = harness::run(&config, &out)?;
            println!(
                "wrote {} and {}",
                artifacts.csv.display(),
                artifacts.summary.display()
            );
        }
        Cmd::Cham {
            process,
            round_length,
            mode,
        } => {
            let (mut config, out) = process.into_config("chameleon")?;
            config.round_length = round_length;
            config.mode = mode;
            let artifacts = harness::run(&config, &out)?;
            println!(
                "wrote {} and {}",
                artifacts.csv.display(),
                artifacts.summary.display()
            );
        }
        Cmd::Meet {
            graph,
            i,
            j,
            seed,
            replicas,
            out,
        } => {
            let g = build_graph(&graph.graph, graph.n)?;
            let mc = match (i, j) {
                (Some(i), Some(j)) => Some((i, j, seed, replicas)),
                _ => None,
            };
            let artifacts = harness::meet(&g, graph.scale(), mc, &out)?;
            println!(
                "wrote {} and {}",
                artifacts.csv.display(),
                artifacts.summary.display()
            );
        }
        Cmd::MixExact {
            graph,
            s,
            m,
            times,
            eps,
            out,
        } => {
            let g = build_graph(&graph.graph, graph.n)?;
            let param = SplitParam::parse(&s)?;
            let artifacts = harness::mix_exact(&g, param, m, &times, eps, &out)?;
            println!(
                "wrote {} and {}",
                artifacts.csv.display(),
                artifacts.summary.display()
            );
        }
        Cmd::MixMc {
            graph,
            s,
            m,
            times,
            seed,
            replicas,
            out,
        } => {
            let g = build_graph(&graph.graph, graph.n)?;
            let param = SplitParam::parse(&s)?;
            let artifacts = harness::mix_mc(&g, param, m, &times, seed, replicas, &out)?;
            println!(
                "wrote {} and {}",
                artifacts.csv.display(),
                artifacts.summary.display()
            );
        }
        Cmd::LowerBound {
            n,
            m,
            s,
            c_eps,
            check_times,
            out,
        } => {
            let param = SplitParam::parse(&s)?;
            let unit = 1.0 / bbsp::analysis::wilson_lambda(n).abs();
            let times: Vec<f64> = check_times.iter().map(|t| t * unit).collect();
            let artifacts = harness::lower_bound(n, m, param, c_eps, &times, &out)?;
            println!(
                "wrote {} and {}",
                artifacts.csv.display(),
                artifacts.summary.display()
            );
        }
        Cmd::Bounds {
            graph,
            s,
            m,
            eps,
            out,
        } => {
            let g = build_graph(&graph.graph, graph.n)?;
            let param = SplitParam::parse(&s)?;
            let path = harness::bounds(&g, param, m, eps, &out)?;
            println!("wrote {}", path.display());
        }
        Cmd::Verify { level, json } => {
            let level = match level.as_str() {
                "quick" => Level::Quick,
                "full" => Level::Full,
                other => {
                    return Err(bbsp::Error::Config(format!(
                        "unknown level {other:?} (use quick or full)"
                    )))
                }
            };
            let report = verify::run_level(level);
            for check in &report.checks {
                println!(
                    "[{}] {:32} {:8.3}s  {}",
                    if check.passed { "pass" } else { "FAIL" },
                    check.name,
                    check.seconds,
                    check.detail
                );
            }
            println!(
                "verify {}: {}",
                report.level,
                if report.passed {
                    "all checks passed"
                } else {
                    "FAILURES PRESENT"
                }
            );
            if let Some(path) = json {
                std::fs::write(
                    path,
                    serde_json::to_string_pretty(&report).expect("serializable") + "\n",
                )?;
            }
            if !report.passed {
                return Ok(ExitCode::FAILURE);
            }
        }
        Cmd::Walkthrough => {
            let replay = walkthrough::replay()?;
            print!("{}", replay.transcript);
        }
    }
    Ok(ExitCode::SUCCESS)
}

