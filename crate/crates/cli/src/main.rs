use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use crisis_cascade::randomize::NullModel;
use crisis_cascade::runner::{self, AvalancheSource, RandomizeOptions, ReportOptions, RunConfig, SeedSelection};
use crisis_cascade::CapacityMode;

#[derive(Parser)]
#[command(name = "crisis-cascade", version, about = "Crisis avalanches on macroeconomic trade networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Country table (code,name,continent,gdp_musd[,cab_musd])
    #[arg(long, default_value = "countries.csv")]
    countries: PathBuf,
    /// Trade table (exporter,importer,volume_musd)
    #[arg(long, default_value = "trades.csv")]
    trades: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Gdp)]
    capacity_mode: Mode,
    /// Damage fraction; defaults to 0.7
    #[arg(long)]
    f: Option<f64>,
    /// Tolerance threshold; defaults to 0.1
    #[arg(long)]
    t: Option<f64>,
    /// Shorthand for a (f, t) pair with this ratio; ignored if --f or --t is given
    #[arg(long)]
    ft_ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    rng_seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Drop links to unknown countries with a warning instead of failing
    #[arg(long)]
    lenient: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Gdp,
    GdpCab,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Gsn,
    Gdn,
}

#[derive(Subcommand)]
enum Command {
    /// Check both input tables and report every row-level problem
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Run the avalanche of one seed country, or of every country with ALL
    Avalanche {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "ALL")]
        seed: String,
        /// Also write the per-collapse event log
        #[arg(long)]
        events: bool,
    },
    /// Sweep f/t and estimate the critical ratio
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `log:LO:HI:N` or a comma-separated list of ratios
        #[arg(long, default_value = "log:1:30:30")]
        grid: String,
    },
    /// Spanning forest, avalanche network and continental summaries
    Topology {
        #[command(flatten)]
        common: Common,
        /// Events CSV from `avalanche --events`
        #[arg(long)]
        events: Option<PathBuf>,
        /// Recompute all avalanches instead of reading an events file
        #[arg(long)]
        recompute: bool,
    },
    /// Compare the observed network with a randomized ensemble
    Randomize {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Also write one CSV row per sample
        #[arg(long)]
        per_sample: bool,
        /// Swap proposals per GSN sample (default 200 x links)
        #[arg(long)]
        gsn_attempts: Option<usize>,
    },
    /// Run everything and write a hashed manifest
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Countries to write trade-gain profiles for (repeatable)
        #[arg(long = "tgp")]
        tgp: Vec<String>,
        #[arg(long, default_value = "log:1:30:30")]
        grid: String,
        #[arg(long)]
        gsn_attempts: Option<usize>,
    },
}

impl Common {
    fn config(&self) -> RunConfig {
        RunConfig {
            countries: self.countries.clone(),
            trades: self.trades.clone(),
            capacity_mode: match self.capacity_mode {
                Mode::Gdp => CapacityMode::Gdp,
                Mode::GdpCab => CapacityMode::GdpCab,
            },
            f: self.f,
            t: self.t,
            ft_ratio: self.ft_ratio,
            rng_seed: self.rng_seed,
            out: self.out.clone(),
            lenient: self.lenient,
        }
    }
}

fn print_files(files: &[runner::FileEntry], out: &std::path::Path) {
    for f in files {
        println!("wrote {}", out.join(&f.path).display());
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Validate { common } => {
            let report = runner::cmd_validate(&common.config())?;
            println!("{report}");
            Ok(report.is_ok())
        }
        Command::Avalanche { common, seed, events } => {
            let cfg = common.config();
            let out = runner::cmd_avalanche(&cfg, &SeedSelection::parse(&seed), events)?;
            for r in out.results.values() {
                println!("{}: size {}, duration {}", r.seed, r.size, r.duration);
            }
            print_files(&out.files, &cfg.out);
            Ok(true)
        }
        Command::Sweep { common, grid } => {
            let cfg = common.config();
            let grid = runner::parse_grid(&grid)?;
            let out = runner::cmd_sweep(&cfg, &grid)?;
            for row in &out.report.rows {
                println!(
                    "f/t {:>8.4}  max {:>4}  sum {:>6}  {}",
                    row.ratio,
                    row.max_size,
                    row.sum_sizes,
                    row.regime.as_str()
                );
            }
            println!("{}", runner::regime_line(&out.report));
            println!("{}", runner::critical_line(&out.report));
            print_files(&out.files, &cfg.out);
            Ok(true)
        }
        Command::Topology { common, events, recompute } => {
            let cfg = common.config();
            let source = match (events, recompute) {
                (Some(path), _) => AvalancheSource::Events(path),
                (None, true) => AvalancheSource::Recompute,
                (None, false) => bail!("topology needs --events FILE or --recompute"),
            };
            let out = runner::cmd_topology(&cfg, &source)?;
            for line in &out.report.lines {
                println!("{line}");
            }
            print_files(&out.files, &cfg.out);
            Ok(true)
        }
        Command::Randomize { common, model, samples, per_sample, gsn_attempts } => {
            let cfg = common.config();
            let opts = RandomizeOptions {
                model: match model {
                    Model::Gsn => NullModel::Gsn,
                    Model::Gdn => NullModel::Gdn,
                },
                samples,
                per_sample_csv: per_sample,
                gsn_attempts,
            };
            let out = runner::cmd_randomize(&cfg, &opts)?;
            let s = &out.summary;
            println!("{} of {} samples completed", s.completed, s.requested);
            for stat in &s.statistics {
                let mean = stat.mean.map_or("n/a".to_string(), |m| format!("{m:.3}"));
                let sd = stat.sd.map_or("n/a".to_string(), |m| format!("{m:.3}"));
                let obs = stat.observed.map_or("n/a".to_string(), |m| format!("{m:.3}"));
                let p = stat.p.as_ref().map_or("n/a".to_string(), |p| p.to_string());
                println!("{:<24} {mean} +- {sd}  observed {obs}  p {p}", stat.name);
            }
            for f in &s.failures {
                eprintln!("sample {} failed: {}", f.index, f.message);
            }
            print_files(&out.files, &cfg.out);
            Ok(s.failures.is_empty())
        }
        Command::Report { common, samples, tgp, grid, gsn_attempts } => {
            let cfg = common.config();
            let opts = ReportOptions {
                samples,
                tgp,
                grid: runner::parse_grid(&grid)?,
                gsn_attempts,
            };
            let manifest = runner::cmd_report(&cfg, &opts)?;
            for note in &manifest.notes {
                println!("note: {note}");
            }
            for f in &manifest.failures {
                eprintln!("failure: {f}");
            }
            println!(
                "{} files in {}",
                manifest.files.len(),
                cfg.out.join("manifest.json").display()
            );
            Ok(manifest.failures.is_empty())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()).context("crisis-cascade") {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
