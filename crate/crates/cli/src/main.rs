//! `neass run | suite | fit`.
//!
//! Exit codes: 0 success, 1 failed criteria, 2 invalid input or usage,
//! 3 numerical failure (gap closed or stiffness).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neass::fit::{fit_slope, parse_csv};
use neass::scenario::Scenario;
use neass::{output, run, suites};

const EXIT_FAILED: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "neass", version, about = "Super-adiabatic dressing and NEASS scaling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write result files.
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to `out/<scenario name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the number of logical CPUs.
        #[arg(long, env = "NEASS_THREADS")]
        threads: Option<usize>,
        /// Validate and print the grid without evaluating it.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run a named group of built-in checks.
    Suite {
        name: String,
        #[arg(long, env = "NEASS_THREADS")]
        threads: Option<usize>,
    },
    /// Fit a log-log slope to `x,y` rows of a CSV file.
    Fit {
        csv: PathBuf,
        /// Values at or below the floor are reported but not fitted.
        #[arg(long, default_value_t = 0.0)]
        floor: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
    },
}

fn main() -> ExitCode {
    neass_core::linalg::init_deterministic();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { scenario, out, threads, dry_run } => cmd_run(scenario, out, threads, dry_run),
        Command::Suite { name, threads } => cmd_suite(&name, threads),
        Command::Fit { csv, floor, seed, resamples } => cmd_fit(csv, floor, seed, resamples),
    };
    ExitCode::from(code)
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, String> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err("--threads must be at least 1".into());
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| e.to_string())
}

fn cmd_run(path: PathBuf, out: Option<PathBuf>, threads: Option<usize>, dry_run: bool) -> u8 {
    let scenario = match Scenario::load(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_INVALID;
        }
    };
    let points = match run::plan(&scenario) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if dry_run {
        println!("scenario {} ({}), {} grid points", scenario.name, &scenario.hash()[..12], points.len());
        println!("index,sites,order,eps,eta");
        for p in &points {
            println!("{},{},{},{},{}", p.index, p.sites, p.order, p.eps, p.eta);
        }
        return 0;
    }
    let pool = match pool(threads) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let n_threads = pool.current_num_threads();
    let result = match pool.install(|| run::execute(&scenario, n_threads)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&scenario.name));
    if let Err(e) = output::write_all(&dir, &result) {
        eprintln!("error: cannot write {}: {e}", dir.display());
        return EXIT_INVALID;
    }
    print!("{}", output::summary(&result));
    println!("results in {}", dir.display());
    if result.numerical_failures() > 0 {
        EXIT_NUMERICAL
    } else if result.other_failures() > 0 {
        EXIT_INVALID
    } else if result.passed {
        0
    } else {
        EXIT_FAILED
    }
}

fn cmd_suite(name: &str, threads: Option<usize>) -> u8 {
    let Some(ids) = suites::suite_criteria(name) else {
        eprintln!("error: unknown suite '{name}'; available: {}", suites::suite_names().join(", "));
        return EXIT_INVALID;
    };
    let pool = match pool(threads) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let mut all = true;
    for id in ids {
        let report = pool.install(|| suites::run_criterion(id)).expect("suite lists known criteria");
        println!("{}", report.line());
        all &= report.passed;
    }
    if all {
        0
    } else {
        EXIT_FAILED
    }
}

fn cmd_fit(path: PathBuf, floor: f64, seed: u64, resamples: usize) -> u8 {
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_INVALID;
        }
    };
    let points = match parse_csv(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_INVALID;
        }
    };
    match fit_slope(&points, floor, resamples, seed) {
        Ok(f) => {
            println!("slope {}", f.slope);
            println!("intercept {}", f.intercept);
            println!("ci95 {} {}", f.ci[0], f.ci[1]);
            println!("points {}", f.used);
            if !f.floor_limited.is_empty() {
                let rows: Vec<String> = f.floor_limited.iter().map(|k| k.to_string()).collect();
                println!("floor_limited {}", rows.join(" "));
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}
