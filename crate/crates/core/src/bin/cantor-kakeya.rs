use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cantor_kakeya::bounds::Fault;
use cantor_kakeya::runner::{
    cmd_count, cmd_gen, cmd_report, cmd_scan, cmd_verify, parse_n_range, CountFlags, OmegaSpec,
    Overrides, RunConfig, ThetaGrid,
};
use cantor_kakeya::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cantor-kakeya",
    version,
    about = "Finite-scale checks for Besicovitch sets of Cantor graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write intervals, anchors and rectangles for each level
    Gen(Common),
    /// Count intersecting rectangle pairs over the sweep
    Count {
        #[command(flatten)]
        common: Common,
        /// Cross-check every count against brute force
        #[arg(long)]
        oracle: bool,
        #[arg(long, hide = true)]
        timing: bool,
    },
    /// Run the lemma checks; exit status 1 if an exact check fails
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true, value_enum, default_value_t = FaultArg::None)]
        fault: FaultArg,
    },
    /// Fit scaling slopes across levels
    Scan(Common),
    /// Summarize the artifacts in the output directory
    Report(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    InflateFirstRow,
}

#[derive(Args)]
struct Common {
    /// JSON run config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a: Option<u32>,
    #[arg(long)]
    b: Option<u32>,
    /// staircase, self_similar or seeded_random
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Single level
    #[arg(long, conflicts_with = "n_range")]
    n: Option<u32>,
    /// Inclusive level range `A..B`
    #[arg(long, value_parser = parse_n_range)]
    n_range: Option<(u32, u32)>,
    /// `grid:K`, `list:θ1,θ2,…` or `delta`
    #[arg(long)]
    theta_grid: Option<ThetaGrid>,
    /// `zero` or `random:R`
    #[arg(long)]
    omega: Option<OmegaSpec>,
    /// Worker threads
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    pair_cap: Option<u64>,
    #[arg(long)]
    raster_cap: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            a: self.a,
            b: self.b,
            mode: self.mode.clone(),
            seed: self.seed,
            n: self.n,
            n_range: self.n_range,
            theta_grid: self.theta_grid.clone(),
            omega: self.omega,
            out: self.out.clone(),
            pair_cap: self.pair_cap,
            raster_cap: self.raster_cap,
        });
        Ok(cfg)
    }

    fn init_pool(&self) {
        if let Some(j) = self.jobs {
            // only fails if a pool already exists
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build_global();
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen(c) => {
            c.init_pool();
            for p in cmd_gen(&c.config()?)? {
                println!("{}", p.display());
            }
        }
        Command::Count {
            common,
            oracle,
            timing,
        } => {
            common.init_pool();
            let p = cmd_count(&common.config()?, CountFlags { oracle, timing })?;
            println!("{}", p.display());
        }
        Command::Verify { common, fault } => {
            common.init_pool();
            let fault = match fault {
                FaultArg::None => Fault::None,
                FaultArg::InflateFirstRow => Fault::InflateFirstRow,
            };
            let (summary, path) = cmd_verify(&common.config()?, fault)?;
            for r in &summary.lemmas {
                println!(
                    "{:<18} {:<10} {} max={} bound={}",
                    r.lemma,
                    format!("{:?}", r.kind).to_lowercase(),
                    if r.pass { "PASS" } else { "FAIL" },
                    r.measured_max,
                    r.bound
                );
            }
            for n in &summary.notes {
                println!("note: {n}");
            }
            if let Some(p) = path {
                println!("{}", p.display());
            }
            return Ok(summary.exit_ok);
        }
        Command::Scan(c) => {
            c.init_pool();
            let (summary, paths) = cmd_scan(&c.config()?)?;
            for r in &summary.rows {
                let theta = r.theta.map(|t| t.to_string()).unwrap_or_default();
                let slope = r.slope.map_or("n/a".to_string(), |s| format!("{s:.4}"));
                println!(
                    "{:<11} {:<8} slope={slope} predicted_exponent={:.4}",
                    r.quantity, theta, r.predicted_exponent
                );
            }
            for p in paths {
                println!("{}", p.display());
            }
        }
        Command::Report(c) => {
            let cfg = c.config()?;
            print!("{}", cmd_report(&cfg.output.dir)?);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Config { .. } = e {
                return ExitCode::from(2);
            }
            ExitCode::from(3)
        }
    }
}
