//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or parse error,
//! 3 numeric failure (blow-up, state-space limit, truncation too small).

use std::fs;
use std::io::{self, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use rxnet_core::fock::coherent_state_on;
use rxnet_core::master::expected_value_series;
use rxnet_core::rate::{integrate_rate, DEFAULT_DT};
use rxnet_core::verify::{self, ssa_sample_dt};
use rxnet_core::{
    sample_grid, ClassicalState, Error, FockSeries, Generator, MultiIndex,
    Network, Report, StateSpace, Truncation,
};

use crate::dsl::{parse_network, ParseError};
use crate::output;
use crate::parallel::parallel_ensemble;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rxnet", version, about = "Stochastic reaction network engines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a network and print its canonical form.
    Parse { file: PathBuf },
    /// Integrate the deterministic rate equation with RK4.
    Rate {
        file: PathBuf,
        /// Initial concentrations, e.g. `H=100,I=10`. Missing species start at 0.
        #[arg(long, default_value = "")]
        init: String,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve the master equation on a truncated state space.
    Master {
        file: PathBuf,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        cap: CapArgs,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        sample_dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the generator as `row col value` lines.
        #[arg(long)]
        dump_generator: Option<PathBuf>,
        /// Also write the final state as `<counts…>,coeff` rows.
        #[arg(long)]
        dump_final: Option<PathBuf>,
    },
    /// Sample trajectories with the Gillespie direct method.
    Ssa {
        file: PathBuf,
        #[arg(long, default_value = "")]
        init_pure: String,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        sample_dt: f64,
        #[arg(long, default_value_t = 1000)]
        traj: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = NonZeroUsize::MIN)]
        threads: NonZeroUsize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification checks and emit a JSON report.
    Verify {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = Check::All)]
        check: Check,
        #[command(flatten)]
        init: InitArgs,
        #[command(flatten)]
        cap: CapArgs,
        /// Evaluation time for the expected-value check.
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// Finite-difference step for the expected-value check.
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
        /// Horizon for the preservation and SSA checks.
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
        #[arg(long, default_value_t = 10_000)]
        traj: usize,
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
        #[arg(long, default_value_t = NonZeroUsize::MIN)]
        threads: NonZeroUsize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Check {
    Generator,
    Theorem2,
    Coherent,
    Preserve,
    SsaVsMaster,
    All,
}

#[derive(Debug, Args)]
struct InitArgs {
    /// Start from a single state, e.g. `H=10,V=5`.
    #[arg(long, conflicts_with = "init_coherent")]
    init_pure: Option<String>,
    /// Start from a product of Poissons with these means.
    #[arg(long)]
    init_coherent: Option<String>,
}

#[derive(Debug, Args)]
struct CapArgs {
    /// Keep states with at most this many particles in total.
    #[arg(long)]
    cap_total: Option<u64>,
    /// Per-species caps, e.g. `H=30,I=20,V=40`; every species must appear.
    #[arg(long)]
    cap_per: Option<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Parse(PathBuf, ParseError),
    Numeric(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) | Failure::Parse(..) => EXIT_USAGE,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "error: {m}"),
            Failure::Parse(path, e) => write!(f, "{}:{e}", path.display()),
            Failure::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. }
            | Error::StateSpaceTooLarge { .. }
            | Error::NegativeCoefficient { .. }
            | Error::Overflow(_)
            | Error::NotMixed(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}

fn load(path: &Path) -> Result<Network, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    parse_network(&text).map_err(|e| Failure::Parse(path.to_path_buf(), e))
}

fn emit(out: &Option<PathBuf>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| io_failure(path, e))?;
            let mut w = io::BufWriter::new(file);
            body(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w).map_err(|e| Failure::Usage(format!("stdout: {e}")))
        }
    }
}

/// `name=value` pairs, comma separated; unlisted species get `default`.
fn assignments(net: &Network, spec: &str, what: &str, default: Option<&str>) -> Result<Vec<String>, Failure> {
    let mut values: Vec<Option<String>> = vec![None; net.k()];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("{what}: expected `name=value`, got `{part}`")))?;
        let name = name.trim();
        let i = net
            .species()
            .index_of(name)
            .ok_or_else(|| Failure::Usage(format!("{what}: unknown species `{name}`")))?;
        if values[i].is_some() {
            return Err(Failure::Usage(format!("{what}: species `{name}` given twice")));
        }
        values[i] = Some(value.trim().to_string());
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.or_else(|| default.map(str::to_string)).ok_or_else(|| {
                Failure::Usage(format!("{what}: missing species `{}`", net.species().name(i)))
            })
        })
        .collect()
}

fn counts(net: &Network, spec: &str, what: &str) -> Result<MultiIndex, Failure> {
    assignments(net, spec, what, Some("0"))?
        .iter()
        .map(|v| {
            v.parse::<u64>()
                .map_err(|_| Failure::Usage(format!("{what}: `{v}` is not a natural number")))
        })
        .collect::<Result<Vec<_>, _>>()
        .map(MultiIndex::new)
}

fn concentrations(net: &Network, spec: &str, what: &str, default: &str) -> Result<ClassicalState, Failure> {
    let values = assignments(net, spec, what, Some(default))?
        .iter()
        .map(|v| {
            v.parse::<f64>()
                .map_err(|_| Failure::Usage(format!("{what}: `{v}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClassicalState::new(values)?)
}

fn truncation(net: &Network, cap: &CapArgs, default_total: Option<u64>) -> Result<Truncation, Failure> {
    let per = match &cap.cap_per {
        Some(spec) => Some(
            assignments(net, spec, "--cap-per", None)?
                .iter()
                .map(|v| {
                    v.parse::<u64>()
                        .map_err(|_| Failure::Usage(format!("--cap-per: `{v}` is not a natural number")))
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    Ok(match (per, cap.cap_total.or(if cap.cap_per.is_none() { default_total } else { None })) {
        (Some(p), Some(t)) => Truncation::both(p, t),
        (Some(p), None) => Truncation::per_species(p),
        (None, Some(t)) => Truncation::total(t),
        (None, None) => {
            return Err(Failure::Usage("give --cap-total and/or --cap-per".to_string()))
        }
    })
}

fn initial_series(net: &Network, init: &InitArgs, space: &StateSpace) -> Result<FockSeries, Failure> {
    match (&init.init_pure, &init.init_coherent) {
        (Some(p), _) => Ok(FockSeries::pure_state(&counts(net, p, "--init-pure")?)),
        (None, Some(c)) => {
            let c = concentrations(net, c, "--init-coherent", "0")?;
            Ok(coherent_state_on(&c, space)?.series)
        }
        (None, None) => Err(Failure::Usage(
            "give --init-pure or --init-coherent".to_string(),
        )),
    }
}

fn execute(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Parse { file } => {
            let net = load(&file)?;
            emit(&None, |w| w.write_all(crate::dsl::format_network(&net).as_bytes()))?;
            Ok(EXIT_OK)
        }
        Command::Rate { file, init, t_end, dt, out } => {
            let net = load(&file)?;
            let x0 = concentrations(&net, &init, "--init", "0")?;
            let traj = integrate_rate(&net, &x0, t_end, dt)?;
            if traj.went_negative {
                eprintln!("warning: trajectory went negative; step size may be too large");
            }
            emit(&out, |w| output::write_trajectory_csv(w, net.species(), &traj))?;
            Ok(EXIT_OK)
        }
        Command::Master { file, init, cap, t_end, sample_dt, out, dump_generator, dump_final } => {
            let net = load(&file)?;
            let cap = truncation(&net, &cap, None)?;
            if !(sample_dt > 0.0) {
                return Err(Failure::Usage("--sample-dt must be positive".to_string()));
            }
            let space = StateSpace::enumerate(net.k(), cap)?;
            let psi0 = initial_series(&net, &init, &space)?;
            let generator = Generator::build(&net, space)?;
            let times = sample_grid(t_end, sample_dt);
            let samples = expected_value_series(&generator, &psi0, &times)?;
            emit(&out, |w| output::write_master_csv(w, net.species(), &samples))?;
            if let Some(path) = &dump_generator {
                emit(&Some(path.clone()), |w| output::write_generator_coo(w, &generator))?;
            }
            if let Some(path) = &dump_final {
                let x0 = generator.space().to_dense(&psi0)?;
                let xt = generator.evolve_dense(&x0, t_end)?;
                let series = generator.space().to_series(&xt);
                emit(&Some(path.clone()), |w| output::write_series_csv(w, net.species(), &series))?;
            }
            Ok(EXIT_OK)
        }
        Command::Ssa { file, init_pure, t_end, sample_dt, traj, seed, threads, out } => {
            let net = load(&file)?;
            let l0 = counts(&net, &init_pure, "--init-pure")?;
            let stats = parallel_ensemble(&net, &l0, t_end, sample_dt, traj, seed, threads)?;
            emit(&out, |w| output::write_ensemble_csv(w, net.species(), &stats))?;
            Ok(EXIT_OK)
        }
        Command::Verify { file, check, init, cap, t, h, t_end, traj, seed, threads, out } => {
            let net = load(&file)?;
            let cap = truncation(&net, &cap, Some(40))?;
            let reports = run_checks(&net, check, &init, &cap, t, h, t_end, traj, seed, threads)?;
            let json = output::reports_json(&reports);
            emit(&out, |w| writeln!(w, "{json}"))?;
            for r in reports.iter().filter(|r| !r.passed) {
                for res in r.residuals.iter().filter(|res| !res.passed) {
                    eprintln!("{}: {} = {:e} exceeds {:e}", r.check, res.name, res.value, res.tolerance);
                }
                for f in &r.failures {
                    eprintln!("{}: {f}", r.check);
                }
            }
            Ok(if reports.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_checks(
    net: &Network,
    check: Check,
    init: &InitArgs,
    cap: &Truncation,
    t: f64,
    h: f64,
    t_end: f64,
    traj: usize,
    seed: u64,
    threads: NonZeroUsize,
) -> Result<Vec<Report>, Failure> {
    let all = check == Check::All;
    let coherent = match &init.init_coherent {
        Some(c) => concentrations(net, c, "--init-coherent", "1")?,
        None => ClassicalState::new(vec![1.0; net.k()])?,
    };
    let mut reports = Vec::new();

    if all || check == Check::Generator {
        reports.push(verify::check_generator(net, cap)?);
    }
    if all || check == Check::Theorem2 {
        let space = StateSpace::enumerate(net.k(), cap.clone())?;
        let psi0 = match &init.init_pure {
            Some(p) => FockSeries::pure_state(&counts(net, p, "--init-pure")?),
            None => coherent_state_on(&coherent, &space)?.series,
        };
        reports.push(verify::check_expected_value_theorem(net, cap, &psi0, t, h)?);
    }
    if all || check == Check::Coherent {
        reports.push(verify::check_coherent_rate_match(net, &coherent, cap)?);
    }
    if all || check == Check::Preserve {
        match verify::check_coherence_preservation(net, &coherent, t_end, cap) {
            Ok(r) => reports.push(r),
            Err(Error::ComplexTooLarge(name)) if all => {
                eprintln!("note: skipping preserve, reaction `{name}` has a complex with more than one particle");
            }
            Err(e) => return Err(e.into()),
        }
    }
    if all || check == Check::SsaVsMaster {
        let l0 = match &init.init_pure {
            Some(p) => counts(net, p, "--init-pure")?,
            None => MultiIndex::new(coherent.values().iter().map(|v| v.round() as u64).collect()),
        };
        let stats = parallel_ensemble(net, &l0, t_end, ssa_sample_dt(t_end), traj, seed, threads)?;
        reports.push(verify::compare_ssa_to_master(net, &l0, cap, &stats)?);
    }
    Ok(reports)
}
