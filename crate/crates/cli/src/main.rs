mod manifest;
mod oracle;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use heralded_spin::config::Config;
use heralded_spin::dataset_io::{read_csv_file, write_csv_file};
use heralded_spin::herald::{HeraldParams, DEFAULT_K_MAX};
use heralded_spin::pipeline::{analyze, reproduce, AnalysisReport, Rule};
use heralded_spin::sim::simulate_run;
use log::info;

use manifest::{write_json, RunManifest};

#[derive(Parser)]
#[command(name = "hspin", version, about = "Heralded collective-spin simulator and variance analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a measurement run and write it as CSV.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decorrelate, normalize and compare click/no-click variances of a dataset.
    Analyze {
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Normalization window M (even).
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Recompute every headline number and compare with its target.
    Reproduce {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        shots: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Closed forms next to brute-force evaluations.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Click posterior p(n|1click) against direct enumeration.
    Posterior {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        p0: Option<f64>,
        #[arg(long)]
        p2: Option<f64>,
        #[arg(long)]
        pd: Option<f64>,
        #[arg(long)]
        pf: Option<f64>,
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
    },
    /// Rotated Dicke-state variance against N(2n+1) - 2n².
    Dicke {
        /// Atom numbers; defaults to the configured sizes.
        #[arg(long, value_delimiter = ',')]
        atoms: Vec<u64>,
        #[arg(long, default_value_t = 1)]
        excitation: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Thinned-thermal click distribution against the convolution sum.
    Thinned {
        #[arg(long)]
        p2: f64,
        #[arg(long)]
        pd: f64,
        #[arg(long, default_value_t = 6)]
        max_clicks: usize,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
    },
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).with_context(|| format!("invalid configuration {}", p.display())),
        None => Ok(Config::bundled()),
    }
}

fn simulate(config_path: Option<&Path>, seed: Option<u64>, shots: Option<usize>, out: &Path) -> Result<()> {
    let mut config = load_config(config_path)?;
    if let Some(seed) = seed {
        config.sim.seed = seed;
    }
    if let Some(shots) = shots {
        config.sim.shots = shots;
    }
    let efficiency = config.efficiency.report()?;
    let sim = config.sim_config(efficiency.chain())?;
    RunManifest::new("simulate", config_path, config.fingerprint(), sim.seed, out).write()?;
    let dataset = simulate_run(&sim)?;
    let path = out.join("dataset.csv");
    write_csv_file(&dataset, &path)?;
    println!("wrote {} records to {}", dataset.len(), path.display());
    Ok(())
}

fn print_analysis(report: &AnalysisReport) {
    let c = &report.counts;
    println!("records {}  selected {}  clicks {}  no-clicks {}", c.records, c.selected, c.click, c.no_click);
    println!("weights (sum of squares {:.4}):", report.sum_sq);
    for (w, se) in report.weights.iter().zip(&report.weight_standard_errors) {
        println!("  {w:>9.5} ± {se:.5}");
    }
    println!("variance before/after decorrelation: {:.5e} / {:.5e}", report.variance_before, report.variance_after);
    println!("var(Z) no-click: {:.4} ± {:.4}", report.var_noclick.w, report.var_noclick.uncertainty);
    println!(
        "var(Z) click:    {:.4} ± {:.4} ({:?})",
        report.var_click.w, report.var_click.uncertainty, report.var_click.method
    );
    match (&report.noise_budget, &report.scaling_fit_error) {
        (Some(b), _) => println!("eta_noise: {:.3} ± {:.3}", b.eta_noise, b.eta_noise_se),
        (None, Some(e)) => println!("scaling fit unavailable: {e}"),
        _ => {}
    }
}

fn analyze_cmd(
    dataset_path: &Path,
    config_path: Option<&Path>,
    window: Option<usize>,
    out: Option<&Path>,
    json: bool,
) -> Result<()> {
    let config = load_config(config_path)?;
    let mut settings = config.analysis.clone();
    if let Some(m) = window {
        settings.window = m;
    }
    settings.validate()?;
    if let Some(out) = out {
        RunManifest::new("analyze", config_path, config.fingerprint(), settings.bootstrap_seed, out).write()?;
    }
    let dataset = read_csv_file(dataset_path).with_context(|| format!("reading {}", dataset_path.display()))?;
    info!("{} records read", dataset.len());
    let report = analyze(&dataset, &settings)?;
    if let Some(out) = out {
        write_json(&out.join("analysis.json"), &report)?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print_analysis(&report);
    }
    Ok(())
}

fn reproduce_cmd(
    config_path: Option<&Path>,
    seed: Option<u64>,
    shots: Option<usize>,
    out: Option<&Path>,
    json: bool,
) -> Result<bool> {
    let mut config = load_config(config_path)?;
    if let Some(seed) = seed {
        config.sim.seed = seed;
    }
    if let Some(shots) = shots {
        config.sim.shots = shots;
    }
    if let Some(out) = out {
        RunManifest::new("reproduce", config_path, config.fingerprint(), config.sim.seed, out).write()?;
    }
    let report = reproduce(&config)?;
    if let Some(out) = out {
        write_json(&out.join("reproduce.json"), &report)?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{:<34} {:>12} {:>12} {:>12}  result", "target", "expected", "computed", "tolerance");
        for t in &report.targets {
            let tol = match t.rule {
                Rule::Within => format!("±{:.3e}", t.tolerance),
                Rule::AtMost => "upper bound".to_string(),
            };
            let verdict = if t.passed { "pass" } else { "FAIL" };
            println!("{:<34} {:>12.5} {:>12.5} {:>12}  {verdict}", t.name, t.target, t.computed, tol);
        }
        let failed = report.targets.iter().filter(|t| !t.passed).count();
        println!("{} of {} targets met", report.targets.len() - failed, report.targets.len());
    }
    Ok(report.all_passed())
}

fn oracle_cmd(which: OracleCommand) -> Result<()> {
    match which {
        OracleCommand::Posterior { config, p0, p2, pd, pf, n_max, k_max } => {
            let base = load_config(config.as_deref())?.herald.params()?;
            let params = HeraldParams::new(
                p0.unwrap_or(base.p0),
                p2.unwrap_or(base.p2),
                pd.unwrap_or(base.pd),
                pf.unwrap_or(base.pf),
            )?;
            oracle::posterior(&params, n_max, k_max)?;
        }
        OracleCommand::Dicke { atoms, excitation, config } => {
            let config = load_config(config.as_deref())?;
            let sizes = if atoms.is_empty() { config.spin.sizes.clone() } else { atoms };
            oracle::dicke(&sizes, excitation, config.spin.exact_cap)?;
        }
        OracleCommand::Thinned { p2, pd, max_clicks, k_max } => {
            oracle::thinned(p2, pd, max_clicks, k_max)?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, seed, shots, out } => simulate(config.as_deref(), seed, shots, &out)?,
        Command::Analyze { dataset, config, window, out, json } => {
            analyze_cmd(&dataset, config.as_deref(), window, out.as_deref(), json)?
        }
        Command::Reproduce { config, seed, shots, out, json } => {
            if !reproduce_cmd(config.as_deref(), seed, shots, out.as_deref(), json)? {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Oracle { which } => oracle_cmd(which)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
