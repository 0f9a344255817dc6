use std::fs;
use std::path::{Path, PathBuf};

use adaptive_gpr::bench::{
    demo_likelihoods, field_dump, read_snapshots, run_benchmark, true_posterior_kl, write_kl_csv,
    write_report, write_snapshots, DemoConfig, KlMethod, KlRecord,
};
use adaptive_gpr::config::ExperimentConfig;
use adaptive_gpr::driver::{run_with_hook, StrategyKind};
use adaptive_gpr::Exec;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "agpr",
    version,
    about = "Adaptive GP surrogates for Bayesian inverse problems"
)]
struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy and write its chain and design history.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "adaptive_full")]
        strategy: String,
        /// Also evaluate the KL divergence of every snapshot.
        #[arg(long)]
        kl_method: Option<String>,
    },
    /// Run several strategies over several seeds and compare KL curves.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated strategies; all three when omitted.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long, default_value = "grid")]
        kl_method: String,
    },
    /// Evaluate the KL divergence of stored design snapshots.
    Kl {
        #[command(flatten)]
        common: Common,
        /// Snapshot file written by `run` or `bench` (designs/*.json).
        #[arg(long)]
        snapshot: PathBuf,
        /// Only this iteration; every snapshot when omitted.
        #[arg(long)]
        iteration: Option<usize>,
        #[arg(long, default_value = "grid")]
        kl_method: String,
    },
    /// Tabulate plug-in and marginal posterior densities of the toy problem.
    DemoLikelihood {
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        zero_variance: bool,
    },
    /// Print a built-in configuration as TOML.
    Preset { name: String },
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: analytic1d, analytic2d or analytic2d_smoke.
    #[arg(long)]
    preset: Option<String>,
    /// A count N (seeds 1..=N) or a comma-separated list.
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading {}", path.display())),
            (None, Some(name)) => preset(name),
            (None, None) => bail!("either --config or --preset is required"),
        }
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.output.dir))
    }
}

fn preset(name: &str) -> Result<ExperimentConfig> {
    Ok(match name {
        "analytic1d" => ExperimentConfig::analytic_1d(),
        "analytic2d" => ExperimentConfig::analytic_2d(),
        "analytic2d_smoke" => ExperimentConfig::analytic_2d_smoke(),
        _ => bail!("unknown preset '{name}'"),
    })
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if s.contains(',') {
        return s
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                t.trim()
                    .parse::<u64>()
                    .with_context(|| format!("bad seed '{t}'"))
            })
            .collect();
    }
    let n: u64 = s
        .trim()
        .parse()
        .with_context(|| format!("bad seed count '{s}'"))?;
    if n == 0 {
        bail!("at least one seed is required");
    }
    Ok((1..=n).collect())
}

fn parse_strategies(s: Option<&str>) -> Result<Vec<StrategyKind>> {
    match s {
        None => Ok(StrategyKind::ALL.to_vec()),
        Some(s) => s.split(',').map(|t| Ok(t.trim().parse()?)).collect(),
    }
}

fn cmd_run(common: &Common, strategy: &str, kl_method: Option<&str>, exec: Exec) -> Result<()> {
    let cfg = common.load()?;
    let strategy: StrategyKind = strategy.parse()?;
    let method: Option<KlMethod> = kl_method.map(str::parse).transpose()?;
    let dir = common.out_dir(&cfg);
    for sub in ["chains", "designs", "fields"] {
        fs::create_dir_all(dir.join(sub))?;
    }
    let mut curve = Vec::new();
    for seed in parse_seeds(&common.seeds)? {
        let tag = format!("{strategy}_seed{seed}");
        let design_path = dir.join("designs").join(format!("{tag}.json"));
        let mut history = Vec::new();
        let out = run_with_hook(&cfg, strategy, seed, exec, &mut |snap| {
            history.push(snap.clone());
            write_snapshots(&history, &design_path)
        })
        .with_context(|| {
            format!(
                "{tag} failed; completed iterations are in {}",
                design_path.display()
            )
        })?;
        out.chain.write_csv(fs::File::create(
            dir.join("chains").join(format!("{tag}.csv")),
        )?)?;
        let fields = out
            .snapshots
            .iter()
            .map(|s| field_dump(s, &cfg, &out.chain.samples, 50, 500, seed))
            .collect::<adaptive_gpr::Result<Vec<_>>>()?;
        fs::write(
            dir.join("fields").join(format!("{tag}.json")),
            serde_json::to_string(&fields)?,
        )?;
        if let Some(method) = method {
            for s in &out.snapshots {
                let kl = true_posterior_kl(s, &cfg, method, exec)?;
                curve.push(KlRecord {
                    strategy,
                    seed,
                    iteration: s.iteration,
                    work: s.work_spent,
                    kl,
                });
            }
        }
        println!(
            "{tag}: {} iterations, {} design points, work {:.3}, chain length {}",
            out.iterations,
            out.design.active_len(),
            out.ledger.total,
            out.chain.len()
        );
    }
    if method.is_some() {
        write_kl_csv(&curve, &dir.join("klcurve.csv"))?;
        for r in &curve {
            println!(
                "{},{},{},{},{}",
                r.strategy, r.seed, r.iteration, r.work, r.kl
            );
        }
    }
    Ok(())
}

fn cmd_bench(common: &Common, strategy: Option<&str>, kl_method: &str, exec: Exec) -> Result<()> {
    let cfg = common.load()?;
    let strategies = parse_strategies(strategy)?;
    let seeds = parse_seeds(&common.seeds)?;
    let method: KlMethod = kl_method.parse()?;
    let report = run_benchmark(&cfg, &strategies, &seeds, method, exec)?;
    let dir = common.out_dir(&cfg);
    write_report(&report, &dir)?;
    println!("{:<24} {:>6} {:>16}", "strategy", "runs", "median final KL");
    for s in &report.summary.strategies {
        let med = s
            .median_final_kl
            .map_or("n/a".to_string(), |m| format!("{m:.6e}"));
        println!(
            "{:<24} {:>6} {:>16}",
            s.strategy.as_str(),
            s.runs - s.failures,
            med
        );
    }
    for f in &report.summary.failures {
        eprintln!("failed: {} seed {}: {}", f.strategy, f.seed, f.error);
    }
    println!("results written to {}", dir.display());
    Ok(())
}

fn cmd_kl(
    common: &Common,
    snapshot: &Path,
    iteration: Option<usize>,
    kl_method: &str,
    exec: Exec,
) -> Result<()> {
    let cfg = common.load()?;
    let method: KlMethod = kl_method.parse()?;
    let snaps =
        read_snapshots(snapshot).with_context(|| format!("reading {}", snapshot.display()))?;
    println!("iteration,work,kl");
    for s in snaps
        .iter()
        .filter(|s| iteration.is_none_or(|i| s.iteration == i))
    {
        println!(
            "{},{},{}",
            s.iteration,
            s.work_spent,
            true_posterior_kl(s, &cfg, method, exec)?
        );
    }
    Ok(())
}

fn cmd_demo(out: Option<&Path>, zero_variance: bool) -> Result<()> {
    let rows = demo_likelihoods(&DemoConfig {
        zero_variance,
        ..DemoConfig::default()
    })?;
    let mut text = String::from(
        "p,exact,surrogate_mean,surrogate_sd,plugin_posterior_density,marginal_posterior_density\n",
    );
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.p,
            r.exact,
            r.surrogate_mean,
            r.surrogate_sd,
            r.plugin_posterior_density,
            r.marginal_posterior_density
        ));
    }
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match &cli.command {
        Command::Run {
            common,
            strategy,
            kl_method,
        } => cmd_run(common, strategy, kl_method.as_deref(), exec),
        Command::Bench {
            common,
            strategy,
            kl_method,
        } => cmd_bench(common, strategy.as_deref(), kl_method, exec),
        Command::Kl {
            common,
            snapshot,
            iteration,
            kl_method,
        } => cmd_kl(common, snapshot, *iteration, kl_method, exec),
        Command::DemoLikelihood { out, zero_variance } => cmd_demo(out.as_deref(), *zero_variance),
        Command::Preset { name } => {
            print!("{}", preset(name)?.to_toml_string());
            Ok(())
        }
    }
}
