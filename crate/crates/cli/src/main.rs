use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use triangle_inflation::certificate::{verify, Certificate, Verdict};
use triangle_inflation::constraints::{load_constraint_set, ConstraintSpec};
use triangle_inflation::events::{EventCodec, InflationGraph, InflationSize};
use triangle_inflation::problem::{ProblemSetup, ReducedProblem};
use triangle_inflation::solver::{bisect_visibility, solve, SolveStatus, SolverConfig};
use triangle_inflation::symmetry::{enumerate_orbit_representatives, OrbitStrategy};
use triangle_inflation::target::{Family, RationalDistribution};

const EXIT_CONFIG: u8 = 64;

/// Event spaces up to this size are enumerated by `info` without asking.
const INFO_ENUMERATION_LIMIT: u64 = 1 << 26;

#[derive(Parser)]
#[command(name = "trinf", version, about = "Certify incompatibility of triangle-network distributions via symmetric inflation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print one JSON record instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Report the size of the reduced problem.
    Info {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Enumerate event orbits even for large inflations.
        #[arg(long)]
        count_vars: bool,
    },
    /// Search for an incompatibility certificate.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Where to write the certificate.
        #[arg(long, default_value = "certificate.json")]
        cert: PathBuf,
    },
    /// Check a certificate against the problem it claims to solve.
    Verify {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        cert: PathBuf,
    },
    /// Find the smallest certifiable visibility on a grid.
    Bisect {
        #[arg(long, default_value = "2,2,2")]
        size: InflationSize,
        #[arg(long)]
        constraints: PathBuf,
        /// `srb` or `ejm-noise`.
        #[arg(long)]
        target: TargetArg,
        /// Grid denominator.
        #[arg(long)]
        grid: u64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Where to write the certificate at the minimal visibility.
        #[arg(long)]
        cert: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, default_value = "2,2,2")]
    size: InflationSize,
    /// TOML constraint set.
    #[arg(long)]
    constraints: PathBuf,
    /// `ejm`, `ejm-noise`, `srb` or `table:<path>`.
    #[arg(long)]
    target: TargetArg,
    /// Visibility as an exact fraction, for the noisy families.
    #[arg(long = "v")]
    visibility: Option<Fraction>,
}

#[derive(Args)]
struct SolverArgs {
    /// Rounding scale of the integer certificate.
    #[arg(long = "scale-N", default_value_t = 1 << 20)]
    scale_n: u64,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Clone, Debug)]
enum TargetArg {
    Ejm,
    Family(Family),
    Table(PathBuf),
}

impl FromStr for TargetArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ejm" => Ok(TargetArg::Ejm),
            "ejm-noise" => Ok(TargetArg::Family(Family::EjmNoise)),
            "srb" => Ok(TargetArg::Family(Family::SharedRandomBit)),
            _ => match s.strip_prefix("table:") {
                Some(path) if !path.is_empty() => Ok(TargetArg::Table(path.into())),
                _ => Err(format!("unknown target {s:?}; expected ejm, ejm-noise, srb or table:<path>")),
            },
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Fraction {
    num: u64,
    den: u64,
}

impl FromStr for Fraction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (n, d) = s.split_once('/').ok_or_else(|| format!("{s:?} is not a fraction like 467/512"))?;
        let num = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
        let den: u64 = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
        if den == 0 || num > den {
            return Err(format!("visibility {s} must lie in [0, 1]"));
        }
        Ok(Fraction { num, den })
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl ProblemArgs {
    fn graph(&self) -> InflationGraph {
        InflationGraph::new(self.size)
    }

    fn specs(&self, graph: &InflationGraph) -> anyhow::Result<Vec<ConstraintSpec>> {
        load_constraint_set(&self.constraints, graph).with_context(|| format!("reading {}", self.constraints.display()))
    }

    fn distribution(&self) -> anyhow::Result<RationalDistribution> {
        match (&self.target, self.visibility) {
            (TargetArg::Family(f), Some(v)) => Ok(f.at(v.num, v.den)?),
            (TargetArg::Family(f), None) => bail!("--target {} needs --v <num>/<den>", f.name()),
            (TargetArg::Ejm, None) => Ok(RationalDistribution::ejm()),
            (TargetArg::Table(path), None) => {
                RationalDistribution::load_table(path).with_context(|| format!("reading {}", path.display()))
            }
            (_, Some(_)) => bail!("--v only applies to ejm-noise and srb"),
        }
    }

    fn setup(&self) -> anyhow::Result<ProblemSetup> {
        let graph = self.graph();
        let specs = self.specs(&graph)?;
        Ok(ProblemSetup::new(graph, self.distribution()?, &specs)?)
    }

    fn build(&self) -> anyhow::Result<ReducedProblem> {
        let graph = self.graph();
        let specs = self.specs(&graph)?;
        Ok(ReducedProblem::build(graph, self.distribution()?, &specs)?)
    }
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        let cfg = SolverConfig { scale_n: self.scale_n, max_iterations: self.max_iterations, ..SolverConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct OrbitReport {
    name: String,
    representative: String,
    party_orbit_size: usize,
    stabilizer_order: usize,
    scope_events: u64,
    reduced: usize,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct InfoReport {
    size: String,
    nouts: usize,
    group_order: usize,
    n_vars: Option<usize>,
    n_cons: usize,
    unreduced_vars: Option<u64>,
    unreduced_cons: String,
    constraints: Vec<OrbitReport>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct SolveReport {
    status: String,
    iterations: usize,
    active_size: usize,
    s_active: f64,
    n_vars: usize,
    n_cons: usize,
    certificate: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct VerifyReport {
    verdict: String,
    position: Option<usize>,
    event: Option<String>,
    value: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct BisectReport {
    grid: u64,
    v_int: Option<u64>,
    probes: Vec<(u64, String)>,
    certificate: Option<String>,
}

fn emit<T: Serialize>(json: bool, report: &T, text: impl FnOnce(&T) -> String) {
    if json {
        println!("{}", serde_json::to_string(report).expect("report serializes"));
    } else {
        println!("{}", text(report));
    }
}

fn cmd_info(problem: &ProblemArgs, count_vars: bool, json: bool) -> anyhow::Result<u8> {
    let setup = problem.setup()?;
    let nouts = setup.target.nouts();
    let parties: Vec<usize> = (0..setup.graph.party_count()).collect();
    let events = setup.unreduced_vars();
    let n_vars = match events {
        Some(n) if count_vars || n <= INFO_ENUMERATION_LIMIT => {
            Some(enumerate_orbit_representatives(&setup.group, &parties, OrbitStrategy::Auto)?.len())
        }
        _ => None,
    };
    let scope_events = |len: usize| EventCodec::new(nouts, len).map(|c| c.count()).unwrap_or(u64::MAX);
    let report = InfoReport {
        size: setup.graph.size().to_string(),
        nouts,
        group_order: setup.group.order(),
        n_vars,
        n_cons: setup.n_cons(),
        unreduced_vars: events,
        unreduced_cons: setup.space.unreduced_count(nouts).to_string(),
        constraints: setup
            .space
            .blocks()
            .iter()
            .map(|b| OrbitReport {
                name: b.orbit.name.clone(),
                representative: b.orbit.representative.display(&setup.graph),
                party_orbit_size: b.orbit.party_orbit_size,
                stabilizer_order: b.orbit.stabilizer.order(),
                scope_events: scope_events(b.scope.len()),
                reduced: b.len(),
            })
            .collect(),
    };
    emit(json, &report, |r| {
        let opt = |x: Option<String>| x.unwrap_or_else(|| "?".into());
        let mut out = format!(
            "size={} nouts={} |G_p|={}\nn_vars={} n_cons={} (unreduced: {} / {})",
            r.size,
            r.nouts,
            r.group_order,
            opt(r.n_vars.map(|n| n.to_string())),
            r.n_cons,
            opt(r.unreduced_vars.map(|n| n.to_string())),
            r.unreduced_cons
        );
        for c in &r.constraints {
            out += &format!(
                "\n{} {} party-orbit={} |H_c|={} events={} reduced={}",
                c.name, c.representative, c.party_orbit_size, c.stabilizer_order, c.scope_events, c.reduced
            );
        }
        if r.n_vars.is_none() {
            out += "\nn_vars not enumerated; pass --count-vars to count event orbits";
        }
        out
    });
    Ok(0)
}

fn cmd_solve(problem: &ProblemArgs, solver: &SolverArgs, cert_path: &Path, json: bool) -> anyhow::Result<u8> {
    let cfg = solver.config()?;
    let prob = problem.build()?;
    info!("n_vars={} n_cons={}", prob.n_vars(), prob.n_cons());
    let out = solve(&prob, &cfg)?;
    let certificate = match &out.status {
        SolveStatus::Incompatible(cert) => {
            cert.save(cert_path).with_context(|| format!("writing {}", cert_path.display()))?;
            Some(cert_path.display().to_string())
        }
        _ => None,
    };
    let report = SolveReport {
        status: out.label().into(),
        iterations: out.iterations,
        active_size: out.active_size,
        s_active: out.s_active,
        n_vars: prob.n_vars(),
        n_cons: prob.n_cons(),
        certificate,
    };
    emit(json, &report, |r| {
        let mut s = format!("{} after {} iterations (n_vars={} n_cons={})", r.status, r.iterations, r.n_vars, r.n_cons);
        if let Some(path) = &r.certificate {
            s += &format!("\ncertificate written to {path}");
        }
        s
    });
    Ok(match out.status {
        SolveStatus::Incompatible(_) => 0,
        SolveStatus::Inconclusive => 3,
        SolveStatus::Stalled => 4,
    })
}

fn cmd_verify(problem: &ProblemArgs, cert_path: &Path, json: bool) -> anyhow::Result<u8> {
    let cert = Certificate::load(cert_path).with_context(|| format!("reading {}", cert_path.display()))?;
    let prob = problem.build()?;
    let verdict = verify(&cert, &prob)?;
    let report = match &verdict {
        Verdict::Valid => VerifyReport { verdict: "valid".into(), position: None, event: None, value: None },
        Verdict::Invalid { position, event_index, value } => VerifyReport {
            verdict: "invalid".into(),
            position: Some(*position),
            event: Some(prob.representative_event(*position).to_string()),
            value: Some(format!("{value} (event index {event_index})")),
        },
        Verdict::FingerprintMismatch { expected, found } => VerifyReport {
            verdict: "fingerprint-mismatch".into(),
            position: None,
            event: None,
            value: Some(format!("expected {expected}, found {found}")),
        },
    };
    emit(json, &report, |r| match r.verdict.as_str() {
        "valid" => format!("valid: positive on all {} representatives", prob.n_vars()),
        "invalid" => format!(
            "invalid: representative {} {} has inner product {}",
            r.position.unwrap(),
            r.event.as_deref().unwrap_or(""),
            r.value.as_deref().unwrap_or("")
        ),
        _ => format!("fingerprint mismatch: {}", r.value.as_deref().unwrap_or("")),
    });
    Ok(verdict.exit_code() as u8)
}

fn cmd_bisect(
    size: InflationSize,
    constraints: &Path,
    target: &TargetArg,
    grid: u64,
    solver: &SolverArgs,
    cert_path: Option<&PathBuf>,
    json: bool,
) -> anyhow::Result<u8> {
    let TargetArg::Family(family) = target else {
        bail!("bisect needs a noisy family: srb or ejm-noise");
    };
    if grid == 0 {
        bail!("--grid must be positive");
    }
    let cfg = solver.config()?;
    let graph = InflationGraph::new(size);
    let specs = load_constraint_set(constraints, &graph).with_context(|| format!("reading {}", constraints.display()))?;
    let out = bisect_visibility(*family, grid, &graph, &specs, &cfg)?;
    let certificate = match (&out.certificate, cert_path) {
        (Some(cert), Some(path)) => {
            cert.save(path).with_context(|| format!("writing {}", path.display()))?;
            Some(path.display().to_string())
        }
        _ => None,
    };
    let report = BisectReport {
        grid,
        v_int: out.v_int,
        probes: out.probes.iter().map(|(v, s)| (*v, s.to_string())).collect(),
        certificate,
    };
    emit(json, &report, |r| match r.v_int {
        Some(v) => format!("{v}/{} ({:.3}%) after {} solves", r.grid, 100.0 * v as f64 / r.grid as f64, r.probes.len()),
        None => format!("no certificate up to {}/{}", r.grid, r.grid),
    });
    Ok(if out.v_int.is_some() { 0 } else { 3 })
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Info { problem, count_vars } => cmd_info(problem, *count_vars, cli.json),
        Command::Solve { problem, solver, cert } => cmd_solve(problem, solver, cert, cli.json),
        Command::Verify { problem, cert } => cmd_verify(problem, cert, cli.json),
        Command::Bisect { size, constraints, target, grid, solver, cert } => {
            cmd_bisect(*size, constraints, target, *grid, solver, cert.as_ref(), cli.json)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
