//! Command-line front end: every experiment emits CSV to stdout or a file,
//! with byte-identical output for identical inputs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use sipg_core::asm::{compose_preconditioner, InnerKind, PrecondConfig};
use sipg_core::dyadic::{dyadic_grid, DEFAULT_ALPHA};
use sipg_core::krylov::pcg;
use sipg_core::lab::{
    grid_queries, line_queries, run_queries_cached, to_csv, ConstantCache, ConstantQuery,
    Inequality,
};
use sipg_core::lgl::lgl_grid;
use sipg_core::mesh::{build_mesh, check_grading, parse_mesh};
use sipg_core::sipg::{
    assemble_load, assemble_sipg, l2_error, sin_product, sin_product_load, PenaltyConfig,
};
use sipg_core::util::fmt_f64;
use sipg_core::{Error, RectMesh, DEFAULT_SEED};

#[derive(Parser)]
#[command(
    name = "sipg",
    version,
    about = "Penalized spectral-element experiments: grids, constants, solves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lobatto nodes and quadrature weights of one degree.
    Lgl(LglArgs),
    /// Breakpoints of the adaptive dyadic companion grid.
    Dyadic(DyadicArgs),
    /// Interpolation constants, singly or swept over degree ranges.
    Constants(ConstantsArgs),
    /// Solve the model problem on a mesh file and report accuracy.
    Solve(SolveArgs),
    /// Condition estimates of the preconditioned system over a degree list.
    PrecondBench(PrecondBenchArgs),
    /// Check the degree and size grading of a mesh file.
    Grading(GradingArgs),
}

#[derive(Args)]
struct LglArgs {
    #[arg(long)]
    p: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DyadicArgs {
    #[arg(long)]
    p: u32,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum IneqArg {
    Basic0,
    Basic1,
}

impl From<IneqArg> for Inequality {
    fn from(v: IneqArg) -> Inequality {
        match v {
            IneqArg::Basic0 => Inequality::Basic0,
            IneqArg::Basic1 => Inequality::Basic1,
        }
    }
}

#[derive(Args)]
#[command(args_conflicts_with_subcommands = true)]
struct ConstantsArgs {
    #[command(subcommand)]
    action: Option<ConstantsAction>,
    /// Which inequality to evaluate (single query).
    #[arg(long)]
    ineq: Option<IneqArg>,
    /// Derivative order of the left-hand side, 0 or 1.
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    q: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Subcommand)]
enum ConstantsAction {
    /// Full rectangular sweep over 1 <= p, q <= max for both inequalities.
    Sweep {
        #[arg(long, default_value_t = 64)]
        max: u32,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a companion gnuplot script next to the CSV.
        #[arg(long, requires = "out")]
        gnuplot: bool,
    },
    /// Sweep along the fixed-ratio line p = ratio * q.
    Line {
        #[arg(long, default_value_t = 2)]
        ratio: u32,
        #[arg(long, default_value_t = 128)]
        qmax: u32,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, requires = "out")]
        gnuplot: bool,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum RhsKind {
    /// Product of sines with known exact solution.
    Sinsin,
    /// Constant load, no reference solution.
    Const,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = RhsKind::Sinsin)]
    rhs: RhsKind,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum InnerArg {
    /// Direct factorization of the innermost system.
    Exact,
    /// Diagonally preconditioned conjugate gradients.
    Cg,
}

#[derive(Args)]
struct PrecondBenchArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Comma-separated degrees applied uniformly to every cell.
    #[arg(long, default_value = "4,8,16,32")]
    p_list: String,
    #[arg(long, default_value_t = 3.0)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = InnerArg::Exact)]
    inner: InnerArg,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, requires = "out")]
    gnuplot: bool,
}

#[derive(Args)]
struct GradingArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    max_ratio: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Lgl(args) => {
            let grid = lgl_grid(args.p)?;
            let mut csv = String::from("i,node,weight\n");
            for (i, (x, w)) in grid.nodes.iter().zip(&grid.weights).enumerate() {
                let _ = writeln!(csv, "{i},{},{}", fmt_f64(*x), fmt_f64(*w));
            }
            emit(args.out.as_deref(), &csv)
        }
        Command::Dyadic(args) => {
            let grid = dyadic_grid(args.p, args.alpha)?;
            let mut csv = String::from("index,numerator,level,coordinate\n");
            for (i, pt) in grid.points.iter().enumerate() {
                let _ = writeln!(csv, "{i},{},{},{}", pt.num, pt.level, fmt_f64(pt.coord()));
            }
            emit(args.out.as_deref(), &csv)
        }
        Command::Constants(args) => run_constants(args),
        Command::Solve(args) => run_solve(args),
        Command::PrecondBench(args) => run_precond_bench(args),
        Command::Grading(args) => {
            let mesh = load_mesh(&args.mesh)?;
            let report = check_grading(&mesh, args.max_ratio);
            let faces: Vec<String> = report.violations.iter().map(|f| f.to_string()).collect();
            let csv = format!(
                "max_degree_ratio,max_size_ratio,passes,violating_faces\n{},{},{},{}\n",
                fmt_f64(report.max_degree_ratio),
                fmt_f64(report.max_size_ratio),
                report.passes(),
                faces.join(";")
            );
            emit(args.out.as_deref(), &csv)
        }
    }
}

fn run_constants(args: ConstantsArgs) -> Result<(), Error> {
    let cache = ConstantCache::from_env();
    match args.action {
        Some(ConstantsAction::Sweep {
            max,
            alpha,
            out,
            gnuplot,
        }) => {
            let results = run_queries_cached(grid_queries(max, alpha), true, &cache)?;
            let csv = to_csv(&results);
            emit(out.as_deref(), &csv)?;
            if gnuplot {
                write_gnuplot(out.as_deref().unwrap(), sweep_plot_script)?;
            }
            Ok(())
        }
        Some(ConstantsAction::Line {
            ratio,
            qmax,
            alpha,
            out,
            gnuplot,
        }) => {
            if ratio == 0 {
                usage_error("--ratio must be at least 1");
            }
            let results = run_queries_cached(line_queries(ratio, qmax, alpha), true, &cache)?;
            let csv = to_csv(&results);
            emit(out.as_deref(), &csv)?;
            if gnuplot {
                write_gnuplot(out.as_deref().unwrap(), line_plot_script)?;
            }
            Ok(())
        }
        None => {
            let (Some(ineq), Some(m), Some(p), Some(q)) = (args.ineq, args.m, args.p, args.q)
            else {
                usage_error("a single query needs --ineq, --m, --p and --q");
            };
            if m > 1 {
                usage_error("--m must be 0 or 1");
            }
            if p == 0 || q == 0 {
                usage_error("--p and --q must be at least 1");
            }
            let query = ConstantQuery {
                alpha: args.alpha,
                ..ConstantQuery::new(ineq.into(), m, p, q)
            };
            let results = run_queries_cached(vec![query], false, &cache)?;
            emit(None, &to_csv(&results))
        }
    }
}

fn run_solve(args: SolveArgs) -> Result<(), Error> {
    let mesh = load_mesh(&args.mesh)?;
    let penalty = PenaltyConfig::with_gamma(args.gamma);
    let (a, dofs) = assemble_sipg(&mesh, &penalty)?;
    let load: Box<dyn Fn(&[f64]) -> f64> = match args.rhs {
        RhsKind::Sinsin => Box::new(sin_product_load),
        RhsKind::Const => Box::new(|_: &[f64]| 1.0),
    };
    let b = assemble_load(&mesh, &dofs, &load)?;
    let config = PrecondConfig {
        penalty,
        ..PrecondConfig::default()
    };
    let (precond, _) = compose_preconditioner(&mesh, &config)?;
    let (u, report) = pcg(&a, &precond, &b, args.tol, args.max_iter)?;
    let csv = match args.rhs {
        RhsKind::Sinsin => {
            let err = l2_error(&mesh, &dofs, &u, &sin_product)?;
            format!(
                "dofs,iterations,residual,l2_error\n{},{},{},{}\n",
                dofs.total,
                report.iterations,
                fmt_f64(report.relative_residual),
                fmt_f64(err)
            )
        }
        RhsKind::Const => format!(
            "dofs,iterations,residual\n{},{},{}\n",
            dofs.total,
            report.iterations,
            fmt_f64(report.relative_residual)
        ),
    };
    emit(args.out.as_deref(), &csv)
}

fn run_precond_bench(args: PrecondBenchArgs) -> Result<(), Error> {
    let base = load_mesh(&args.mesh)?;
    let degrees = parse_p_list(&args.p_list);
    let inner = match args.inner {
        InnerArg::Exact => InnerKind::Exact,
        InnerArg::Cg => InnerKind::Iterative {
            tol: 1e-10,
            max_iter: 1000,
        },
    };
    let mut csv = String::from("p,dofs,kappa_est,pcg_iters\n");
    for p in degrees {
        let cells = base
            .cells
            .iter()
            .map(|cell| {
                let mut c = cell.clone();
                c.degrees = vec![p; base.dim];
                c
            })
            .collect();
        let mesh = build_mesh(cells)?;
        let penalty = PenaltyConfig::with_gamma(args.gamma);
        let (a, dofs) = assemble_sipg(&mesh, &penalty)?;
        let config = PrecondConfig {
            penalty,
            inner: inner.clone(),
            ..PrecondConfig::default()
        };
        let (precond, _) = compose_preconditioner(&mesh, &config)?;
        let b = seeded_rhs(dofs.total);
        let (_, report) = pcg(&a, &precond, &b, args.tol, 10 * dofs.total)?;
        let _ = writeln!(
            csv,
            "{p},{},{},{}",
            dofs.total,
            fmt_f64(report.kappa_est),
            report.iterations
        );
    }
    emit(args.out.as_deref(), &csv)?;
    if args.gnuplot {
        write_gnuplot(args.out.as_deref().unwrap(), bench_plot_script)?;
    }
    Ok(())
}

fn parse_p_list(list: &str) -> Vec<u32> {
    let mut out = Vec::new();
    for part in list.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.parse::<u32>() {
            Ok(p) if p >= 1 => out.push(p),
            _ => usage_error(&format!("invalid degree {part:?} in --p-list")),
        }
    }
    if out.is_empty() {
        usage_error("--p-list names no degrees");
    }
    out
}

fn seeded_rhs(n: usize) -> Vec<f64> {
    let mut state = DEFAULT_SEED;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

fn load_mesh(path: &Path) -> Result<RectMesh, Error> {
    let text = std::fs::read_to_string(path)?;
    build_mesh(parse_mesh(&text)?)
}

fn emit(out: Option<&Path>, csv: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, csv)?;
            Ok(())
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn usage_error(message: &str) -> ! {
    Cli::command()
        .error(ErrorKind::InvalidValue, message)
        .exit()
}

fn write_gnuplot(csv_path: &Path, script: fn(&str) -> String) -> Result<(), Error> {
    let data = csv_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| csv_path.display().to_string());
    let body = script(&data);
    let gp = csv_path.with_extension("gp");
    std::fs::write(gp, body)?;
    Ok(())
}

fn sweep_plot_script(data: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead off\n\
         set dgrid3d 64,64\n\
         set xlabel 'p'\n\
         set ylabel 'q'\n\
         splot '{data}' using 3:4:6 with lines\n"
    )
}

fn line_plot_script(data: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set xlabel 'q'\n\
         set ylabel 'constant'\n\
         set logscale x 2\n\
         plot '{data}' using 4:($2 == 0 ? $6 : 1/0) with linespoints title 'm=0', \\\n\
         \x20    '{data}' using 4:($2 == 1 ? $6 : 1/0) with linespoints title 'm=1'\n"
    )
}

fn bench_plot_script(data: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set xlabel 'p'\n\
         set ylabel 'kappa'\n\
         plot '{data}' using 1:3 with linespoints title 'condition estimate'\n"
    )
}
