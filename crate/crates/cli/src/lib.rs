//! Command-line driver. Every subcommand prints a JSON [`ResultFile`] on
//! stdout and diagnostics on stderr. Exit codes: 0 ok, 1 invalid or
//! infeasible, 2 usage, I/O or format error, 3 numerical failure.

mod files;
mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;

use sod_core::channels::{span_dimension, twirl_Q, HaarSampler, SpanOptions, TargetMap};
use sod_core::combs::{spread, SodCertificate};
use sod_core::construction::{build_success_or_draw, SodOptions, DEFAULT_MARGIN};
use sod_core::protocols::{repeat_until_success, teleport_round_with, teleportation_sstgs};
use sod_core::tensor::eigh;
use sod_sdp::{solve_inversion, NeutralMode, SolverOptions, Status};

pub use files::{read_json, write_json, MatrixFile, OneSlotFile, PairFile};
pub use report::{Check, Relation, ResultFile, RunStatus};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Format(String),
    /// A failure inside a pipeline, reported through the result file.
    Core(sod_core::Error),
}

impl CliError {
    fn format(e: sod_core::Error) -> Self {
        CliError::Format(e.to_string())
    }
}

impl From<sod_core::Error> for CliError {
    fn from(e: sod_core::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser, Debug)]
#[command(name = "sod", version, about = "Success-or-draw supermaps: constructions, SDPs and simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Neutral {
    Symmetric,
    Spanning,
}

impl From<Neutral> for NeutralMode {
    fn from(n: Neutral) -> Self {
        match n {
            Neutral::Symmetric => NeutralMode::Symmetric,
            Neutral::Spanning => NeutralMode::Spanning,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Protocol {
    TeleportInversion,
}

/// Tolerances for certifying a pair.
#[derive(clap::Args, Debug, Clone, Copy)]
struct CertTol {
    /// Causal-chain, trace and depth-two residuals.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Lower bound on the minimum eigenvalues of S and N.
    #[arg(long, default_value_t = -1e-9, allow_negative_numbers = true)]
    eig_bound: f64,
    /// Relative residuals of the success and draw actions, and the spread of p_U.
    #[arg(long, default_value_t = 1e-7)]
    action_tol: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Dimension of span{J_U^{⊗K}} over random unitaries.
    SpanDim {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        rank_tol: f64,
    },
    /// Monte Carlo estimate of the twirl operator Q against its closed form.
    Twirl {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        tol: f64,
    },
    /// Optimal success-or-draw inversion of K calls of a qubit unitary.
    SolveInversion {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum)]
        neutral: Neutral,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        /// Seed for the spanning set of unitaries.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Writes the optimal (S, N) as a pair file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Builds a d-slot success-or-draw pair from a one-slot comb.
    Build {
        #[arg(long)]
        input: PathBuf,
        /// `auto` bisects for the largest feasible value.
        #[arg(long, default_value = "auto")]
        epsilon: String,
        #[arg(long, default_value_t = DEFAULT_MARGIN)]
        margin: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tols: CertTol,
        #[arg(long)]
        out: PathBuf,
    },
    /// Certifies a pair file on fresh Haar unitaries.
    Verify {
        #[arg(long)]
        pair: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        tols: CertTol,
    },
    /// Repeat-until-success simulation of a protocol.
    Simulate {
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        max_rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Writes a built-in one-slot comb, usable as `build --input`.
    ExportSstgs {
        #[arg(long, value_enum)]
        protocol: Protocol,
        #[arg(long)]
        out: PathBuf,
    },
}

impl Command {
    fn seed(&self) -> Option<u64> {
        match self {
            Command::SpanDim { seed, .. }
            | Command::Twirl { seed, .. }
            | Command::SolveInversion { seed, .. }
            | Command::Build { seed, .. }
            | Command::Verify { seed, .. }
            | Command::Simulate { seed, .. } => Some(*seed),
            Command::ExportSstgs { .. } => None,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let echo: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let mut result = ResultFile::new(echo, cli.command.seed());
    let start = Instant::now();
    let outcome = execute(&cli.command, &mut result, err);
    let _ = writeln!(err, "elapsed {:.3} s", start.elapsed().as_secs_f64());
    let result = match outcome {
        Ok(()) => result.settle(),
        Err(CliError::Io(m)) | Err(CliError::Format(m)) => {
            let _ = writeln!(err, "error: {m}");
            return 2;
        }
        Err(CliError::Core(e)) => {
            use sod_core::Error as E;
            result.status = match &e {
                E::Infeasible(_) => RunStatus::Infeasible,
                E::Precondition { .. } => RunStatus::Invalid,
                E::Decomposition(_) | E::NonConvergence(_) | E::Internal(_) => RunStatus::NumericalFailure,
                _ => {
                    let _ = writeln!(err, "error: {e}");
                    return 2;
                }
            };
            result.message = Some(e.to_string());
            result
        }
    };
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&result).expect("serializable"));
    result.status.exit_code()
}

fn execute(cmd: &Command, res: &mut ResultFile, err: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        &Command::SpanDim { d, k, seed, rank_tol } => {
            let span = span_dimension(d, k, seed, &SpanOptions { rank_tol, ..Default::default() })?;
            let _ = writeln!(err, "{}", span.dim);
            res.output("dim", span.dim);
            res.output("samples_drawn", span.rank_history.len());
        }
        &Command::Twirl { d, samples, seed, tol } => {
            let t = twirl_Q(d, samples, seed)?;
            let (values, _) = eigh(t.exact.matrix())?;
            let top = values.iter().copied().fold(0.0, f64::max);
            let rank = values.iter().filter(|&&v| v > 1e-9 * top).count();
            res.output("samples", samples);
            res.output("deviation", t.deviation);
            res.output("rank_exact", rank);
            res.check(Check::at_most("‖Q_estimate - Q_exact‖_F", t.deviation, tol));
        }
        Command::SolveInversion { d, k, neutral, tol, max_iter, seed, out } => {
            let opts = SolverOptions { tol: *tol, max_iter: *max_iter, ..Default::default() };
            let r = solve_inversion(*d, *k, (*neutral).into(), *seed, &opts)?;
            let sol = &r.solution;
            res.output("p", r.p);
            res.output("implied_epsilon", r.implied_epsilon);
            res.output("neutral", r.mode);
            res.output("span_size", r.span_size);
            res.output("iterations", sol.iterations);
            res.output("solver_status", sol.status);
            res.output("independent_constraints", sol.rank);
            res.output("primal_residual", sol.primal_residual);
            res.check(Check::at_most("consensus residual", sol.consensus_residual, *tol));
            res.check(Check::at_most("dual residual", sol.dual_residual, *tol));
            if sol.status != Status::Optimal {
                res.status = RunStatus::NumericalFailure;
            }
            if let Some(path) = out {
                write_json(path, &PairFile::new(&r.s, &r.n, TargetMap::Inverse, r.p))?;
            }
        }
        Command::Build { input, epsilon, margin, samples, seed, tols, out } => {
            let one = read_json::<OneSlotFile>(input)?.to_comb()?;
            let epsilon = match epsilon.as_str() {
                "auto" => None,
                x => Some(x.parse::<f64>().map_err(|_| CliError::Format(format!("--epsilon expects auto or a number, got {x}")))?),
            };
            let opts = SodOptions { epsilon, margin: *margin, samples: *samples, seed: *seed };
            let sod = build_success_or_draw(&one, one.d(), &opts)?;
            let p = sod.epsilon * one.nominal_p;
            res.output("epsilon", sod.epsilon);
            res.output("p", p);
            res.output("slots", one.d());
            certificate_checks(res, &sod.certificate, p, tols);
            write_json(out, &PairFile::new(&sod.s, &sod.n, one.target, p))?;
        }
        Command::Verify { pair, samples, seed, tols } => {
            let file: PairFile = read_json(pair)?;
            let (s, n) = file.combs()?;
            let mut sampler = HaarSampler::new(*seed);
            let us: Vec<_> = (0..*samples).map(|_| sampler.sample(file.d)).collect();
            let target = file.target;
            let cert = SodCertificate::evaluate(file.p, &s, &n, |u| target.choi(u), &us)?;
            res.output("slots", file.slots);
            res.output("p", file.p);
            certificate_checks(res, &cert, file.p, tols);
        }
        &Command::Simulate { protocol: Protocol::TeleportInversion, trials, max_rounds, seed } => {
            let stats = repeat_until_success(
                |rng| {
                    let mut s = HaarSampler::new(rng.random());
                    let (u, psi) = (s.sample(2), s.state(2));
                    Ok(teleport_round_with(&u, &psi, rng)?.into())
                },
                0.25,
                max_rounds,
                trials,
                seed,
            )?;
            let worst = stats.records.iter().map(|r| (1.0 - r.fidelity).abs()).fold(0.0, f64::max);
            res.output("statistics", &stats);
            res.check(Check::at_most("max |1 - output fidelity|", worst, 1e-12));
        }
        Command::ExportSstgs { protocol: Protocol::TeleportInversion, out } => {
            let s = teleportation_sstgs();
            res.output("target", s.target);
            res.output("nominal_p", s.nominal_p);
            write_json(out, &OneSlotFile::from_comb(&s))?;
        }
    }
    Ok(())
}

fn certificate_checks(res: &mut ResultFile, cert: &SodCertificate, p: f64, t: &CertTol) {
    let max = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0, f64::max);
    let p_u: Vec<f64> = cert.samples.iter().map(|s| s.p_u).collect();
    let q_u: Vec<f64> = cert.samples.iter().map(|s| s.q_u).collect();
    res.output("samples", cert.samples.len());
    res.output("p_u_range", [p_u.iter().copied().fold(f64::INFINITY, f64::min), p_u.iter().copied().fold(f64::NEG_INFINITY, f64::max)]);
    res.output("q_u_range", [q_u.iter().copied().fold(f64::INFINITY, f64::min), q_u.iter().copied().fold(f64::NEG_INFINITY, f64::max)]);
    res.check(Check::at_most("causal residual of S + N", cert.max_causal_residual(), t.tol));
    res.check(Check::at_least("min eigenvalue of S", cert.min_eigenvalue_s, t.eig_bound));
    res.check(Check::at_least("min eigenvalue of N", cert.min_eigenvalue_n, t.eig_bound));
    res.check(Check::at_most("success action residual", max(&mut cert.samples.iter().map(|s| s.residual_success)), t.action_tol));
    res.check(Check::at_most("draw action residual", max(&mut cert.samples.iter().map(|s| s.residual_draw)), t.action_tol));
    res.check(Check::at_most("spread of p_U", spread(&p_u), t.action_tol));
    res.check(Check::at_most("|mean p_U - p|", (p_u.iter().sum::<f64>() / p_u.len().max(1) as f64 - p).abs(), t.action_tol.max(1e-12)));
    if let Some(r) = cert.depth_two_residual {
        res.check(Check::at_most("depth-two residual", r, t.tol));
    }
}
