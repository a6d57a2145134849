use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use lobatto_core::convergence::sweep;
use lobatto_core::discretization::{build, verify_definition, DiffKind};
use lobatto_core::nlpsolve::SolverOptions;
use lobatto_core::ocp::{by_name, truth_by_name};
use lobatto_core::orthopoly::lobatto_nodes;
use lobatto_core::output;
use lobatto_core::transcribe::{solve_ocp, Method};

#[derive(Parser)]
#[command(name = "lobatto", version, about = "Legendre-Lobatto pseudospectral toolkit with an exceptional sample")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collocation nodes, quadrature weights and the exceptional sample.
    Nodes {
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..))]
        n: u32,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Differentiation matrix entries.
    Diffmat {
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..))]
        n: u32,
        #[arg(long, value_enum, default_value_t = Kind::New)]
        kind: Kind,
        /// Report rank, conditioning and polynomial exactness on stderr.
        #[arg(long)]
        check: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transcribe and solve a benchmark problem.
    Solve {
        #[arg(long)]
        problem: String,
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..))]
        n: u32,
        #[arg(long, default_value = "new-lobatto")]
        method: String,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error sweep over N against the analytic optimum.
    Converge {
        #[arg(long)]
        problem: String,
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..))]
        n_min: u32,
        #[arg(long)]
        n_max: u32,
        #[arg(long, value_delimiter = ',', default_value = "new-lobatto,standard-lobatto")]
        methods: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    New,
    Standard,
    Dual,
}

impl Kind {
    fn diff_kind(self) -> DiffKind {
        match self {
            Kind::New => DiffKind::NewLobatto,
            Kind::Standard => DiffKind::StandardLobatto,
            Kind::Dual => DiffKind::Dual,
        }
    }

    /// Highest monomial degree differentiated exactly.
    fn exact_degree(self, n: usize) -> usize {
        match self {
            Kind::New => n,
            Kind::Standard => n - 1,
            Kind::Dual => n - 2,
        }
    }
}

const CHECK_TOLERANCE: f64 = 1e-9;

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Nodes { n, out } => {
            let ns = lobatto_nodes(n as usize)?;
            output::write_nodes(&ns, sink(out.as_deref())?)?;
        }
        Command::Diffmat { n, kind, check, out } => {
            let ns = lobatto_nodes(n as usize)?;
            let d = build(&ns, kind.diff_kind());
            output::write_matrix(&d, sink(out.as_deref())?)?;
            if check {
                let degree = kind.exact_degree(n as usize);
                let residual = verify_definition(&d, degree)?;
                eprintln!("shape {}x{}", d.rows(), d.cols());
                eprintln!("numerical rank {}", d.numerical_rank());
                eprintln!("condition number {:.3e}", d.condition_number());
                eprintln!("row sum residual {:.3e}", d.null_space_residual());
                eprintln!("exactness residual up to degree {degree}: {residual:.3e}");
                if residual > CHECK_TOLERANCE {
                    bail!("exactness residual {residual:.3e} exceeds {CHECK_TOLERANCE:e}");
                }
            }
        }
        Command::Solve {
            problem,
            n,
            method,
            tol,
            max_iter,
            out,
        } => {
            let ocp = by_name(&problem)?;
            let method: Method = method.parse()?;
            let mut opts = SolverOptions::default();
            if let Some(t) = tol {
                opts.kkt_tolerance = t;
            }
            if let Some(m) = max_iter {
                opts.max_iterations = m;
            }
            let (_, sol) = solve_ocp(ocp.as_ref(), n as usize, method, &opts)?;
            output::write_solution(&sol, sink(Some(&out))?)?;
            eprintln!(
                "converged in {} iterations, kkt norm {:.3e}, objective {}",
                sol.report.iterations,
                sol.kkt_residual,
                output::fmt_real(sol.objective_value)
            );
        }
        Command::Converge {
            problem,
            n_min,
            n_max,
            methods,
            out,
        } => {
            if n_max < n_min {
                bail!("--n-max {n_max} is below --n-min {n_min}");
            }
            let ocp = by_name(&problem)?;
            let Some(truth) = truth_by_name(&problem) else {
                bail!("problem '{problem}' has no analytic solution to compare with");
            };
            let methods = methods.iter().map(|m| m.parse()).collect::<lobatto_core::Result<Vec<Method>>>()?;
            let records = sweep(
                ocp.as_ref(),
                truth.as_ref(),
                n_min as usize..=n_max as usize,
                &methods,
                &SolverOptions::default(),
            );
            output::write_convergence(&records, sink(Some(&out))?)?;
            let failed = records.iter().filter(|r| !r.converged).count();
            eprintln!("{} runs, {failed} without convergence", records.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
