use clap::{Parser, Subcommand};
use matchkit::config::{Experiment, ExperimentConfig};
use matchkit::error::LabResult;
use matchkit::output::write_outputs;
use matchkit::{experiments, selftest};
use matchkit_core::domain::Geometry;
use matchkit_core::sampling::{derive_seed, PointCloud};
use matchkit_core::transport::{solve_discrete_ot_sparse, DiscreteMeasure};
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "matchkit",
    version,
    about = "Random matching rates on the flat torus"
)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the base seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for trial-level parallelism.
    #[arg(long, global = true, env = "MATCHKIT_THREADS")]
    threads: Option<usize>,
    /// n_values = {64, 256}, trials = 8.
    #[arg(long, global = true)]
    quick: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draws one cloud from the configured sampler.
    Sample {
        #[arg(long)]
        n: usize,
    },
    /// Exact transport between two saved clouds.
    Solve { a: PathBuf, b: PathBuf },
    /// Draws two clouds and matches them.
    Match {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Runs an experiment (or `all`) and writes its rate table.
    Rates { experiment: Option<String> },
    /// Runs the oracle suite; exit code 3 on failure.
    Selftest,
}

fn load_config(cli: &Cli) -> LabResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.quick {
        cfg = cfg.quick();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &ExperimentConfig) -> PathBuf {
    cfg.output
        .clone()
        .filter(|_| cli.out == Path::new("out"))
        .unwrap_or_else(|| cli.out.clone())
}

fn write_cloud(dir: &Path, name: &str, cloud: &PointCloud<f64>) -> LabResult<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    cloud.write(&path)?;
    Ok(path)
}

fn solve_and_write(dir: &Path, a: &PointCloud<f64>, b: &PointCloud<f64>) -> LabResult<()> {
    let mu = DiscreteMeasure::uniform(Geometry::Torus, a.points.clone())?;
    let nu = DiscreteMeasure::uniform(Geometry::Torus, b.points.clone())?;
    let sol = solve_discrete_ot_sparse(&mu, &nu)?;
    std::fs::create_dir_all(dir)?;
    let path = dir.join("coupling.csv");
    sol.coupling.write_csv(&path, &mu, &nu)?;
    println!("w2_sq = {}", sol.cost);
    println!("duality_gap = {:e}", sol.duality_gap());
    println!("coupling: {}", path.display());
    Ok(())
}

fn run_rates(cli: &Cli, name: Option<&str>) -> LabResult<()> {
    let base = load_config(cli)?;
    let list: Vec<Experiment> = match name {
        Some("all") => Experiment::ALL.to_vec(),
        Some(name) => vec![name.parse()?],
        None => vec![base.experiment],
    };
    let dir = out_dir(cli, &base);
    for exp in list {
        let mut cfg = base.clone();
        cfg.experiment = exp;
        log::info!(
            "running {exp} over n = {:?}, {} trials",
            cfg.n_values,
            cfg.trials
        );
        let run = experiments::run(&cfg, Some(&dir))?;
        for p in write_outputs(&dir, &run)? {
            println!("{}", p.display());
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> LabResult<i32> {
    match &cli.command {
        Command::Sample { n } => {
            let cfg = load_config(cli)?;
            let ctx = experiments::Context::new(&cfg)?;
            let cloud = ctx.sample(*n, derive_seed(cfg.seed, &[0, *n as u64]));
            let path = write_cloud(&out_dir(cli, &cfg), &format!("cloud_n{n}.csv"), &cloud)?;
            println!("{}", path.display());
        }
        Command::Solve { a, b } => {
            let a = PointCloud::read(a)?;
            let b = PointCloud::read(b)?;
            solve_and_write(&cli.out, &a, &b)?;
        }
        Command::Match { n, m } => {
            let cfg = load_config(cli)?;
            let ctx = experiments::Context::new(&cfg)?;
            let m = m.unwrap_or(*n);
            let a = ctx.sample(*n, derive_seed(cfg.seed, &[1, *n as u64]));
            let b = ctx.sample(m, derive_seed(cfg.seed, &[2, m as u64]));
            let dir = out_dir(cli, &cfg);
            write_cloud(&dir, "source.csv", &a)?;
            write_cloud(&dir, "target.csv", &b)?;
            solve_and_write(&dir, &a, &b)?;
        }
        Command::Rates { experiment } => run_rates(cli, experiment.as_deref())?,
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!(
                    "{:<28} {}  {}",
                    c.name,
                    if c.passed { "PASS" } else { "FAIL" },
                    c.detail
                );
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
    let code = match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
