//! `momentflow`: evolve polynomial Hele-Shaw and Stokes flows, verify their
//! large-time limits and inspect conserved quantities.
//!
//! Exit codes: 0 success, 1 invalid input or failed claims, 2 breakdown
//! during evolution (the partial trajectory is still written).

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use momentflow::asymptotics::{ClaimCheck, ClaimGroup, VerificationReport, DEFAULT_WINDOW};
use momentflow::export::{max_coefficient_difference, write_atomic};
use momentflow::invariants::{moment_contour_oracle, oracle_samples, stokes_contour_oracle};
use momentflow::{
    evolve, evolve_stokes, read_coefficients, read_trajectory_csv, richardson_moment, stokes_invariant,
    trajectory_json, write_trajectory_csv, Complex64, EvolutionConfig, FlowError, Method, Model, RecordSchedule,
};
use rayon::prelude::*;

const EXIT_FAILURE: u8 = 1;
const EXIT_BREAKDOWN: u8 = 2;

#[derive(Parser)]
#[command(name = "momentflow", version, about = "Polynomial Hele-Shaw and Stokes flows: evolution and large-time checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Heleshaw,
    Stokes,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Ode,
    Continuation,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve initial coefficients and write the trajectory as CSV.
    Evolve {
        #[arg(long, value_enum, default_value = "heleshaw")]
        model: ModelArg,
        /// Defaults to ode for Hele-Shaw; Stokes supports continuation only.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// JSON array of [re, im] coefficient pairs, a_1 first.
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// log:<count> or list:<t1,t2,...>
        #[arg(long, default_value = "log:121", value_parser = parse_record)]
        record: RecordSchedule,
        #[arg(long)]
        out: PathBuf,
        /// Also write the trajectory as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Check large-time claims on a trajectory CSV.
    Verify {
        #[arg(long)]
        traj: PathBuf,
        /// all, or a comma-separated list of claim groups.
        #[arg(long, default_value = "all")]
        claims: String,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Fit window in t, as lo,hi.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
    /// Print conserved quantities, combinatorial and contour values.
    Moments {
        #[arg(long)]
        init: PathBuf,
        /// Stokes invariants C_k instead of Richardson moments M_k.
        #[arg(long)]
        stokes: bool,
    },
    /// Largest coefficient difference between two trajectories at shared times.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
}

fn parse_record(s: &str) -> Result<RecordSchedule, String> {
    if let Some(count) = s.strip_prefix("log:") {
        let count: usize = count.parse().map_err(|_| format!("bad log count in {s:?}"))?;
        if count == 0 {
            return Err("log count must be positive".into());
        }
        return Ok(RecordSchedule::Log(count));
    }
    if let Some(list) = s.strip_prefix("list:") {
        let times = list
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad time {t:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        if times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err("record times must be positive and finite".into());
        }
        return Ok(RecordSchedule::List(times));
    }
    Err(format!("expected log:<count> or list:<t1,t2,...>, got {s:?}"))
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad window start {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad window end {hi:?}"))?;
    if !(lo > 0.0 && hi > lo) {
        return Err("window needs 0 < lo < hi".into());
    }
    Ok((lo, hi))
}

/// Worker pool capped by `MOMENTFLOW_THREADS`.
fn pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MOMENTFLOW_THREADS") {
        let n: usize = v.parse().with_context(|| format!("MOMENTFLOW_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("MOMENTFLOW_THREADS must be a positive integer, got 0");
        }
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}

#[allow(clippy::too_many_arguments)]
fn cmd_evolve(
    model: ModelArg,
    method: Option<MethodArg>,
    init: PathBuf,
    t_end: f64,
    tol: f64,
    record: RecordSchedule,
    out: PathBuf,
    json: Option<PathBuf>,
) -> anyhow::Result<u8> {
    let map = read_coefficients(&init).with_context(|| format!("reading {}", init.display()))?;
    let method = match (model, method) {
        (ModelArg::Stokes, Some(MethodArg::Ode)) => bail!("the Stokes flow is traced by continuation only"),
        (_, Some(MethodArg::Ode)) | (ModelArg::Heleshaw, None) => Method::Ode,
        _ => Method::Continuation,
    };
    let config = EvolutionConfig::new(t_end, method).with_tolerance(tol).with_record(record);
    let traj = match model {
        ModelArg::Heleshaw => evolve(&map, &config),
        ModelArg::Stokes => evolve_stokes(&map, &config),
    }?;
    write_trajectory_csv(&out, &traj).with_context(|| format!("writing {}", out.display()))?;
    if let Some(path) = json {
        write_atomic(&path, trajectory_json(&traj).as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    let last = traj.last();
    println!(
        "{} samples, t = {}, a1 = {:.17e}, drift = {:.3e}",
        traj.samples.len(),
        last.t,
        last.a1(),
        traj.samples.iter().map(|s| s.diagnostics.moment_drift).fold(0.0, f64::max)
    );
    match &traj.breakdown {
        Some(reason) => {
            eprintln!("breakdown: {reason}");
            Ok(EXIT_BREAKDOWN)
        }
        None => Ok(0),
    }
}

fn selected_groups(claims: &str, model: Model) -> anyhow::Result<Vec<ClaimGroup>> {
    if claims == "all" {
        return Ok(ClaimGroup::for_model(model));
    }
    let mut groups = vec![];
    for id in claims.split(',').map(str::trim) {
        let group = ClaimGroup::parse(id).with_context(|| {
            let known: Vec<_> = ClaimGroup::ALL.iter().map(|g| g.id()).collect();
            format!("unknown claim {id:?}; expected all or one of {}", known.join(", "))
        })?;
        if group.model() != model {
            bail!("claim {id} needs a {:?} trajectory, got {model:?}", group.model());
        }
        groups.push(group);
    }
    Ok(groups)
}

fn fmt_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:.6e}", z.re)
    } else {
        format!("{:.6e}{:+.6e}i", z.re, z.im)
    }
}

fn print_claim(c: &ClaimCheck) {
    let slope = c.slope.value().map_or("exact".to_string(), |s| format!("{s:.4}"));
    println!(
        "{} {:<30} expected {:<28} estimated {:<28} slope {}",
        if c.pass { "PASS" } else { "FAIL" },
        c.claim_id,
        fmt_complex(c.expected),
        fmt_complex(c.estimated),
        slope
    );
}

fn cmd_verify(traj: PathBuf, claims: String, report: Option<PathBuf>, window: Option<(f64, f64)>) -> anyhow::Result<u8> {
    let trajectory = read_trajectory_csv(&traj).with_context(|| format!("reading {}", traj.display()))?;
    let groups = selected_groups(&claims, trajectory.model)?;
    let window = window.unwrap_or(DEFAULT_WINDOW);
    let results: Vec<_> = pool()?.install(|| groups.par_iter().map(|g| g.run(&trajectory, window)).collect());
    let mut checks = vec![];
    for result in results {
        match result {
            Ok(c) => checks.extend(c),
            Err(FlowError::DegenerateWindow(msg)) => {
                eprintln!("{msg}");
                return Ok(EXIT_FAILURE);
            }
            Err(e) => return Err(e.into()),
        }
    }
    checks.iter().for_each(print_claim);
    let summary = VerificationReport::new(&trajectory, window, checks);
    if let Some(path) = report {
        let text = serde_json::to_string_pretty(&summary)?;
        write_atomic(&path, text.as_bytes()).with_context(|| format!("writing {}", path.display()))?;
    }
    let failed = summary.claims.iter().filter(|c| !c.pass).count();
    println!("{} claims, {} failed", summary.claims.len(), failed);
    Ok(if summary.pass { 0 } else { EXIT_FAILURE })
}

fn cmd_moments(init: PathBuf, stokes: bool) -> anyhow::Result<u8> {
    let map = read_coefficients(&init).with_context(|| format!("reading {}", init.display()))?;
    let n = map.len();
    let mut combinatorial = vec![];
    let mut contour = vec![];
    for k in 0..n {
        if stokes {
            combinatorial.push(stokes_invariant(&map, k)?);
            contour.push(stokes_contour_oracle(&map, k, (4 * n).next_power_of_two().max(64))?);
        } else {
            combinatorial.push(richardson_moment(&map, k)?);
            contour.push(moment_contour_oracle(&map, k, oracle_samples(n, k))?);
        }
    }
    let pairs = |v: &[Complex64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    let difference: Vec<f64> = combinatorial.iter().zip(&contour).map(|(a, b)| (a - b).norm()).collect();
    let doc = serde_json::json!({
        "quantity": if stokes { "C" } else { "M" },
        "combinatorial": pairs(&combinatorial),
        "contour": pairs(&contour),
        "difference": difference,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(0)
}

fn cmd_diff(a: PathBuf, b: PathBuf, tol: f64) -> anyhow::Result<u8> {
    let ta = read_trajectory_csv(&a).with_context(|| format!("reading {}", a.display()))?;
    let tb = read_trajectory_csv(&b).with_context(|| format!("reading {}", b.display()))?;
    let worst = max_coefficient_difference(&ta, &tb)?;
    println!("max coefficient difference {worst:.3e} (tolerance {tol:.1e})");
    Ok(if worst <= tol { 0 } else { EXIT_FAILURE })
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Evolve { model, method, init, t_end, tol, record, out, json } => {
            cmd_evolve(model, method, init, t_end, tol, record, out, json)
        }
        Command::Verify { traj, claims, report, window } => cmd_verify(traj, claims, report, window),
        Command::Moments { init, stokes } => cmd_moments(init, stokes),
        Command::Diff { a, b, tol } => cmd_diff(a, b, tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = !e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { EXIT_FAILURE });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
