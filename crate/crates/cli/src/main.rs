use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eit_memory::analysis::{analytic_single_photon_leakage, fmt12, roundtrip_fidelity_with, sweep};
use eit_memory::dynamics::{evolve_modes_with, initial_steps, trajectory};
use eit_memory::model::ModeVector;
use eit_memory::oracle::{compare_to_bosonic, contiguous_partition};
use eit_memory::verify::{self, Case};
use eit_memory::Error;

mod config;

use config::{load, oracle_register, parse_axis, parse_grid, ConfigError, Resolved};

#[derive(Parser)]
#[command(name = "eitmem", version, about = "Light storage in inhomogeneously coupled atomic ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Store and retrieve the configured input; write trajectory.csv and summary.toml.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Vary one parameter and tabulate leakage and round-trip fidelity.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        axis: Option<String>,
        #[arg(long)]
        grid: Option<String>,
    },
    /// Run the randomized invariant suites, or replay a saved counterexample.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Counterexample file to replay.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the exact few-atom model with the bosonic model.
    OracleCompare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit status: 1 verification failed, 2 bad input, 3 run failure.
enum Failure {
    Verify(String),
    Input(String),
    Run(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Input(_) => 2,
            Failure::Run(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Verify(m) | Failure::Input(m) | Failure::Run(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotConverged { .. } => Failure::Run(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Run(format!("{}: {e}", path.display()))
}

fn read_config(path: &Path) -> Result<Resolved, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    load(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn out_dir(flag: Option<PathBuf>, resolved: Option<&Resolved>) -> PathBuf {
    flag.or_else(|| resolved.and_then(|r| r.output.clone())).unwrap_or_else(|| PathBuf::from("out"))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
    Ok(path)
}

fn simulate(config: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let r = read_config(&config)?;
    let system = r.config.as_ref().ok_or_else(|| Failure::Input("simulate needs a [system] section".into()))?;
    let storage = r.schedule.storage_leg();

    let report =
        roundtrip_fidelity_with(system, &storage, r.schedule.hold, &r.schedule.retrieval_leg(), &r.input, &r.options)?;
    let samples = r.options.samples.max(1);
    let start = initial_steps(&r.schedule).div_ceil(samples) * samples;
    let prop = evolve_modes_with(system, &r.schedule, start, false, &r.options)?;
    let initial = r.input.initial_mode(system, &storage)?;
    let points = trajectory(system, &prop, &initial)?;

    let mut csv = String::from("t,f,theta");
    for label in ModeVector::labels(system.m()) {
        let _ = write!(csv, ",pop_{label}");
    }
    csv.push_str(",dark_overlap\n");
    for p in &points {
        let _ = write!(csv, "{},{},{}", fmt12(p.t), fmt12(p.envelope), fmt12(p.theta));
        for pop in &p.populations {
            let _ = write!(csv, ",{}", fmt12(*pop));
        }
        let _ = writeln!(csv, ",{}", fmt12(p.dark_overlap));
    }

    let mid = &report.midpoint;
    let mut summary = String::new();
    let _ = writeln!(summary, "[system]\nm = {}\ntotal_atoms = {}", system.m(), system.total_atoms());
    let _ = writeln!(
        summary,
        "\n[schedule]\nramp_time = {}\npeak = {}\nhold = {}\nshape = \"{}\"",
        fmt12(r.schedule.ramp_time),
        fmt12(r.schedule.peak),
        fmt12(r.schedule.hold),
        r.schedule.shape
    );
    let _ = writeln!(
        summary,
        "\n[leakage]\nxi = {}\noverlap_re = {}\noverlap_im = {}",
        fmt12(mid.xi),
        fmt12(mid.overlap.re),
        fmt12(mid.overlap.im)
    );
    if r.input.max_photons() == Some(1) && r.input.fock_coefficients().is_some_and(|c| c.len() == 2 && c[0].norm_sqr() == 0.0) {
        let _ = writeln!(summary, "analytic_single_photon = {}", fmt12(analytic_single_photon_leakage(system)));
    }
    let _ = writeln!(
        summary,
        "\n[roundtrip]\nfidelity = {}\ninfidelity = {}\nphoton_weight = {}\ndark_weight = {}",
        fmt12(report.fidelity),
        fmt12(report.infidelity),
        fmt12(report.photon_weight),
        fmt12(report.dark_weight)
    );
    let _ = writeln!(
        summary,
        "\n[propagation]\nsteps_per_ramp = {}\nunitarity_defect = {}",
        prop.steps,
        fmt12(prop.unitarity_defect)
    );

    let dir = out_dir(out, Some(&r));
    write(&dir, "trajectory.csv", &csv)?;
    write(&dir, "summary.toml", &summary)?;
    println!("xi = {}", fmt12(mid.xi));
    println!("roundtrip fidelity = {}", fmt12(report.fidelity));
    println!("wrote {}", dir.display());
    Ok(())
}

fn run_sweep(config: PathBuf, out: Option<PathBuf>, axis: Option<String>, grid: Option<String>) -> Result<(), Failure> {
    let r = read_config(&config)?;
    let axis_name = axis
        .or_else(|| r.sweep_axis.clone())
        .ok_or_else(|| Failure::Input("no sweep axis given (--axis or [sweep] axis)".into()))?;
    let axis = parse_axis(&axis_name).map_err(Failure::Input)?;
    let grid = match grid {
        Some(text) => parse_grid(&text).map_err(Failure::Input)?,
        None => r
            .sweep_grid
            .clone()
            .ok_or_else(|| Failure::Input("no sweep grid given (--grid or [sweep] grid)".into()))?,
    };
    let template = r.template().ok_or_else(|| Failure::Input("sweep needs a [system] section".into()))?;
    let table = sweep(&template, axis, &grid)?;
    let dir = out_dir(out, Some(&r));
    let path = write(&dir, "sweep.csv", &table.to_csv())?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run_verify(seed: u64, replay: Option<PathBuf>, out: Option<PathBuf>) -> Result<(), Failure> {
    let reports = match &replay {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            let case: Case = toml::from_str(&text).map_err(|e| {
                let err = ConfigError { line: e.span().map(|s| text[..s.start].matches('\n').count() + 1), message: e.message().into() };
                Failure::Input(format!("{}: {err}", path.display()))
            })?;
            vec![verify::replay(&case)]
        }
        None => verify::run_all(seed),
    };
    let mut failed = Vec::new();
    for report in &reports {
        let status = if report.passed() { "pass" } else { "FAIL" };
        println!(
            "{status} {:<20} cases {:>5}  worst {:e}  tolerance {:e}",
            report.suite.name(),
            report.cases,
            report.worst,
            report.suite.tolerance()
        );
        if let Some((case, why)) = &report.failure {
            let body = toml::to_string(case).map_err(|e| Failure::Run(e.to_string()))?;
            let name = format!("counterexample-{}-{}-{}.toml", case.suite.name(), case.seed, case.index);
            let path = write(&out_dir(out.clone(), None), &name, &format!("# {why}\n{body}"))?;
            println!("  {why}; counterexample written to {}", path.display());
            failed.push(report.suite.name());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("failed suites: {}", failed.join(", "))))
    }
}

fn oracle_compare(config: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let r = read_config(&config)?;
    let o = r.oracle.as_ref().ok_or_else(|| Failure::Input("oracle-compare needs an [oracle] section".into()))?;
    let schedule = r.schedule.storage_leg();
    // budget and partition problems surface before any propagation
    let mut jobs = Vec::new();
    for &atoms in &o.atom_counts {
        let register = oracle_register(o, atoms)?;
        for &groups in &o.groups {
            if groups > atoms {
                continue;
            }
            jobs.push((register.clone(), contiguous_partition(atoms, groups)?));
        }
    }
    let mut csv = String::from("atoms,groups,photons,final_overlap,max_deviation,final_leaked_weight,max_leaked_weight,steps\n");
    for (register, partition) in &jobs {
        let d = compare_to_bosonic(register, partition, &schedule, o.photons, &r.options)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            d.atoms,
            d.groups,
            d.photons,
            fmt12(d.final_overlap),
            fmt12(d.max_deviation),
            fmt12(d.final_leaked_weight),
            fmt12(d.max_leaked_weight),
            d.steps
        );
    }
    print!("{csv}");
    let path = write(&out_dir(out, Some(&r)), "oracle.csv", &csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(config, out),
        Command::Sweep { config, out, axis, grid } => run_sweep(config, out, axis, grid),
        Command::Verify { seed, config, out } => run_verify(seed, config, out),
        Command::OracleCompare { config, out } => oracle_compare(config, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
