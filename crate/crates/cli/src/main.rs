use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ehrp_core::harness::{self, GraphInstance, SweepSpec, TUNING_TRIPLES};
use ehrp_core::{load_config, Protocol, ScenarioConfig};

/// Mobile-sink sensor network simulator with ant-colony routing.
#[derive(Parser, Debug)]
#[command(name = "ehrp", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file (TOML). Omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// `ehrp` or `wait_for_sink`; overrides the config file.
    #[arg(long, global = true)]
    protocol: Option<Protocol>,
    /// Extra `key=value` config overrides, e.g. `radio.e_elec=4e-8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write series.csv and summary.csv.
    Run,
    /// Sweep one parameter over several values, averaging repetitions.
    Sweep {
        /// Config key to vary. `dimension` sets both area sides.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Repetitions per value; overrides the config file.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Solve a graph file once per (alpha, beta, rho) triple.
    AcoBench {
        graph: PathBuf,
        /// Semicolon-separated `alpha,beta,rho` triples. Defaults to the
        /// eight tuning triples.
        #[arg(long)]
        triples: Option<String>,
    },
    /// Write a random connected graph file.
    GenGraph {
        #[arg(long, default_value_t = 50)]
        nodes: usize,
        /// Side of the square area, m.
        #[arg(long, default_value_t = 500.0)]
        side: f64,
        /// Link range, m.
        #[arg(long, default_value_t = 100.0)]
        range: f64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_set(items: &[String]) -> Result<Vec<(String, String)>> {
    items
        .iter()
        .map(|s| match s.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
            _ => bail!("override `{s}` is not of the form key=value"),
        })
        .collect()
}

fn scenario(g: &Global) -> Result<ScenarioConfig> {
    let base = match &g.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => ScenarioConfig::default(),
    };
    let mut overrides = parse_set(&g.set)?;
    if let Some(seed) = g.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(p) = g.protocol {
        overrides.push(("protocol".into(), p.to_string()));
    }
    Ok(harness::configure(&base, &overrides)?)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn parse_triples(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    text.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let v: Vec<f64> = t
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("bad triple `{t}`"))?;
            match v[..] {
                [a, b, r] => Ok((a, b, r)),
                _ => bail!("triple `{t}` needs three numbers"),
            }
        })
        .collect()
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let g = &cli.global;
    match &cli.command {
        Command::Run => {
            let cfg = scenario(g)?;
            let report = ehrp_core::run_simulation(&cfg, cfg.seed)?;
            write(&g.out_dir, "series.csv", &report.series_csv())?;
            let summary = write(&g.out_dir, "summary.csv", &harness::summary_csv(&report))?;
            println!(
                "rounds {} lifetime {} energy {:.4} J pdr {:.4} delay {:.4} s -> {}",
                report.rounds_run,
                report.lifetime_hna,
                report.total_energy,
                report.pdr,
                report.avg_delay,
                summary.parent().unwrap_or(Path::new(".")).display()
            );
        }
        Command::Sweep {
            param,
            values,
            repetitions,
        } => {
            let mut cfg = scenario(g)?;
            if let Some(r) = repetitions {
                cfg = harness::configure(&cfg, &[("repetitions".into(), r.to_string())])?;
            }
            let spec = SweepSpec {
                param: param.clone(),
                values: values.clone(),
                overrides: Vec::new(),
            };
            let rows = harness::run_sweep(&spec, &cfg)?;
            let name = format!("sweep_{}.csv", param.replace('.', "_"));
            let path = write(&g.out_dir, &name, &harness::sweep_csv(&rows))?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::AcoBench { graph, triples } => {
            let cfg = scenario(g)?;
            let text = fs::read_to_string(graph).with_context(|| format!("reading {}", graph.display()))?;
            let instance = GraphInstance::parse(&text).with_context(|| format!("parsing {}", graph.display()))?;
            let triples = match triples {
                Some(t) => parse_triples(t)?,
                None => TUNING_TRIPLES.to_vec(),
            };
            let rows = harness::aco_bench(&instance, &triples, &cfg.aco, &cfg.propagation, cfg.seed)?;
            let csv = harness::bench_csv(&rows);
            write(&g.out_dir, "aco_bench.csv", &csv)?;
            print!("{csv}");
        }
        Command::GenGraph {
            nodes,
            side,
            range,
            output,
        } => {
            let seed = g.seed.unwrap_or(1);
            let text = harness::random_instance(*nodes, *side, *range, seed)?.to_text();
            match output {
                Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(())
}
