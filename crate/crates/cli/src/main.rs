mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qthermo_core::qubit::{self, RegionGrid};
use qthermo_core::scenario::{self, Scenario};
use qthermo_core::verify::{self, Tolerances, VerifySuiteConfig};
use qthermo_core::Error;

use output::Outputs;

#[derive(Parser)]
#[command(name = "qthermo", version, about = "Entropy production with effective environment temperatures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutDir {
    /// Output directory [default: $QTHERMO_OUT_DIR, else the current directory]
    #[arg(long, env = "QTHERMO_OUT_DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a scenario; write its report JSON and trajectory CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Override steps_per_segment.
        #[arg(long)]
        steps: Option<usize>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run the randomized identity and inequality checks.
    Verify {
        /// JSON suite configuration; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        num: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Use one tolerance for every check.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Also write verify_summary.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit a two-level region map from a grid file.
    Example {
        #[arg(long)]
        grid: PathBuf,
        #[command(flatten)]
        out: OutDir,
    },
    /// Rerun a scenario over seeds and constant temperatures.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Constant policy temperature; repeat for several.
        #[arg(long = "beta", allow_negative_numbers = true)]
        betas: Vec<f64>,
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        out: OutDir,
    },
}

enum Failure {
    Core(Error),
    Io(String),
    /// Verification ran but some checks failed.
    Checks,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "output".into())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Core(Error::InvalidInput(format!("{what} JSON: {e}"))))
}

fn commit(outputs: Outputs, dir: &Path) -> Result<(), Failure> {
    for p in outputs.commit(dir).map_err(|e| io_error(dir, e))? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn simulate(path: &Path, steps: Option<usize>, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let mut sc = Scenario::load(path)?;
    if let Some(s) = seed {
        sc.seed = s;
    }
    let sim = scenario::run_simulate(&sc, steps)?;
    let r = &sim.report.report;
    println!(
        "{}: delta_sigma = {:.12e}, delta_sigma_star = {:.12e}, residuals {:.2e} / {:.2e}",
        sc.name, r.delta_sigma, r.delta_sigma_star, r.residual_eq17, r.residual_eq21
    );
    let mut outputs = Outputs::default();
    outputs.add(format!("{}.report.json", sc.name), sim.report_json());
    outputs.add(format!("{}.trajectory.csv", sc.name), sim.trajectory_csv());
    commit(outputs, out)
}

fn run_verify(
    config: Option<&Path>,
    num: Option<usize>,
    seed: Option<u64>,
    steps: Option<usize>,
    tolerance: Option<f64>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let mut cfg: VerifySuiteConfig = match config {
        Some(p) => read_json(p, "verify config")?,
        None => VerifySuiteConfig::default(),
    };
    if let Some(n) = num {
        cfg.num_random_scenarios = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = steps {
        cfg.steps_per_segment = s;
    }
    if let Some(t) = tolerance {
        cfg.tolerances = Tolerances::uniform(t);
    }
    let summary = verify::run_verify(&cfg)?;
    println!("{summary}");
    if let Some(dir) = out {
        let mut outputs = Outputs::default();
        let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        text.push('\n');
        outputs.add("verify_summary.json", text);
        commit(outputs, dir)?;
    }
    if summary.passed() {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn example(path: &Path, out: &Path) -> Result<(), Failure> {
    let grid: RegionGrid = read_json(path, "grid")?;
    let map = qubit::emit_region_map(&grid)?;
    let stem = file_stem(path);
    let mut csv = Vec::new();
    map.write_csv(&mut csv).map_err(|e| io_error(path, e))?;
    let mut meta = serde_json::to_string_pretty(&map.meta).expect("metadata serializes");
    meta.push('\n');
    println!(
        "{}: {} cells, {} feasible, {} satisfy the condition ({} boundary)",
        stem, map.meta.cells, map.meta.feasible_cells, map.meta.true_cells, map.meta.boundary
    );
    let mut outputs = Outputs::default();
    outputs.add(format!("{stem}.region.csv"), csv);
    outputs.add(format!("{stem}.region.json"), meta);
    commit(outputs, out)
}

fn sweep(path: &Path, seed: u64, count: usize, betas: &[f64], steps: Option<usize>, out: &Path) -> Result<(), Failure> {
    let sc = Scenario::load(path)?;
    let members = scenario::run_sweep(&sc, seed, count, betas, steps)?;
    println!("{}: {} members", sc.name, members.len());
    let mut outputs = Outputs::default();
    outputs.add(format!("{}.sweep.csv", sc.name), scenario::sweep_csv(&members));
    commit(outputs, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { scenario, steps, seed, out } => simulate(scenario, *steps, *seed, &out.out),
        Command::Verify { config, num, seed, steps, tolerance, out } => {
            run_verify(config.as_deref(), *num, *seed, *steps, *tolerance, out.as_deref())
        }
        Command::Example { grid, out } => example(grid, &out.out),
        Command::Sweep { scenario, seed, count, betas, steps, out } => {
            sweep(scenario, *seed, *count, betas, *steps, &out.out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Io(msg)) => {
            eprintln!("{}", json!({ "error": { "kind": "io", "message": msg } }));
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
