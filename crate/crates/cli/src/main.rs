use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mimo_isac::config::{load_scenario, Scenario};
use mimo_isac::emit::{emit, Format};
use mimo_isac::oracle::{run_suite, SUITES};
use mimo_isac::scenario::{run_scenario, RowStatus};

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "mimo-isac", version, about = "Massive-MIMO ISAC rate/CRLB experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "results")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Runs a scenario file and writes the result table.
    Run { config: PathBuf },
    /// Parses and checks a scenario file without running it.
    Validate { config: PathBuf },
    /// Runs an oracle suite: derivatives, fim, crlb, soc, socp, power, rate, mle or all.
    Oracle { suite: String },
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<Scenario, ExitCode> {
    match load_scenario(path) {
        Ok(mut sc) => {
            if let Some(s) = seed {
                sc.system.seed = s;
            }
            Ok(sc)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(EXIT_CONFIG))
        }
    }
}

fn run(cli: &Cli, path: &PathBuf) -> ExitCode {
    let sc = match load(path, cli.seed) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let table = match run_scenario(&sc) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };
    match emit(&table.all(), &cli.out_dir, &sc.id, cli.format) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let (ok, inf, num) = (table.count(RowStatus::Ok), table.count(RowStatus::Infeasible), table.count(RowStatus::NumericalError));
    println!("{} rows: {ok} ok, {inf} infeasible, {num} numerical errors", table.rows.len());
    for a in &table.aggregates {
        if let (Some(r), Some(t), Some(p)) = (a.sum_rate, a.crlb_theta_db, a.crlb_phi_db) {
            println!(
                "  {:>3} {:<9} {:<14}={:<8} sum rate {r:8.4}  CRLB {t:8.3} / {p:8.3} dB",
                a.scheme, a.method, a.sweep_axis, a.sweep_value
            );
        }
    }
    if num > 0 {
        ExitCode::from(EXIT_NUMERICAL)
    } else if ok == 0 {
        ExitCode::from(EXIT_INFEASIBLE)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match &cli.cmd {
        Cmd::Run { config } => run(&cli, config),
        Cmd::Validate { config } => match load(config, cli.seed) {
            Ok(sc) => {
                let jobs = sc.points().len() * sc.schemes.len() * sc.methods.len() * sc.large_scale_sets;
                println!("{}: ok ({} sweep points, {jobs} jobs)", sc.id, sc.points().len());
                ExitCode::SUCCESS
            }
            Err(c) => c,
        },
        Cmd::Oracle { suite } => {
            let Some(reports) = run_suite(suite, cli.seed.unwrap_or(0)) else {
                eprintln!("error: unknown suite '{suite}' (expected one of {} or all)", SUITES.join(", "));
                return ExitCode::from(EXIT_CONFIG);
            };
            let mut ok = true;
            for r in &reports {
                println!("{}", r.line());
                for n in &r.notes {
                    println!("    {n}");
                }
                ok &= r.passed();
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
    }
}
