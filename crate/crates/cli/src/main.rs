//! Command-line front end for the path-holonomy toolkit.
//!
//! Subcommands: `reduce` (canonical path form), `holonomy` (ordered
//! exponential of a field along a path), `derive` (finite-difference
//! derivative operators), `verify` (seeded identity suite with a CSV
//! report). Exit codes: 0 success, 1 verification failure, 2 input error.

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use loopcalc_core::calculus::{
    connection_derivative, loop_derivative, mandelstam_derivative, ArcSection, DerivativeResult,
    FdScheme, HolonomyFunctional, Section, Stencil, TransportSection,
};
use loopcalc_core::formats::{apply_tolerances, parse_field, parse_path, write_path, write_report};
use loopcalc_core::gauge::{CMatrix, ConnectionField, IntegratorOptions};
use loopcalc_core::paths::{Loop, Path};
use loopcalc_core::verify::{run_identity_suite, RandomSpec, SuiteTolerances};

#[derive(Parser)]
#[command(
    name = "loopcalc",
    version,
    about = "Path holonomy and loop-derivative toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical form of a path file (retraces cancelled,
    /// collinear runs fused).
    Reduce {
        /// Path file.
        path: PathBuf,
    },
    /// Integrate the field along a path and print the resulting matrix.
    Holonomy {
        /// Field file.
        field: PathBuf,
        /// Path file.
        path: PathBuf,
        /// Integrator substeps per segment.
        #[arg(long, default_value_t = 64)]
        steps: usize,
        /// Skip the per-substep projection onto the group.
        #[arg(long)]
        no_reunit: bool,
    },
    /// Differentiate the holonomy functional and print the matrix followed
    /// by `order=<val> err=<val>`.
    Derive {
        kind: DeriveKind,
        /// Field file.
        field: PathBuf,
        /// Path file; for `loop` this is the conjugating path and the
        /// derivative is taken at its endpoint.
        path: PathBuf,
        /// First direction as a 1-based axis index.
        #[arg(long)]
        mu: Option<usize>,
        /// Second direction as a 1-based axis index (loop kind).
        #[arg(long)]
        nu: Option<usize>,
        /// First direction as comma-separated components.
        #[arg(long, allow_hyphen_values = true)]
        u: Option<String>,
        /// Second direction as comma-separated components (loop kind).
        #[arg(long, allow_hyphen_values = true)]
        v: Option<String>,
        /// Comma-separated strictly decreasing step sizes.
        #[arg(long, allow_hyphen_values = true)]
        eps_list: Option<String>,
        #[arg(long, value_enum, default_value_t = StencilArg::Central)]
        stencil: StencilArg,
        /// Section family for the connection derivative.
        #[arg(long, value_enum)]
        section: Option<SectionArg>,
        /// Integrator substeps per segment.
        #[arg(long, default_value_t = 64)]
        steps: usize,
    },
    /// Run the seeded identity suite against a field and emit a CSV report.
    Verify {
        /// Field file.
        field: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per identity.
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Tolerance overrides, one `<key> <value>` per line.
        #[arg(long)]
        tol_file: Option<PathBuf>,
        /// Write the report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DeriveKind {
    /// Endpoint-extension derivative.
    Mandelstam,
    /// Vertical derivative along a section.
    Connection,
    /// Parallelogram-insertion second derivative.
    Loop,
}

#[derive(Clone, Copy, ValueEnum)]
enum StencilArg {
    Central,
    Forward,
}

#[derive(Clone, Copy, ValueEnum)]
enum SectionArg {
    Transport,
    Arc,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode, String> {
    match cmd {
        Command::Reduce { path } => {
            let p = load_path(&path)?;
            print!("{}", write_path(&p.reduce()));
            Ok(ExitCode::SUCCESS)
        }
        Command::Holonomy {
            field,
            path,
            steps,
            no_reunit,
        } => {
            let f = load_field(&field)?;
            let p = load_path(&path)?;
            let opts = integrator(steps, no_reunit)?;
            check_dims(&f, &p)?;
            let h = f.holonomy(&p, &opts).map_err(|e| e.to_string())?;
            print_matrix(h.matrix());
            Ok(ExitCode::SUCCESS)
        }
        Command::Derive {
            kind,
            field,
            path,
            mu,
            nu,
            u,
            v,
            eps_list,
            stencil,
            section,
            steps,
        } => {
            let f = load_field(&field)?;
            let p = load_path(&path)?;
            check_dims(&f, &p)?;
            let opts = integrator(steps, false)?;
            let scheme = build_scheme(eps_list.as_deref(), stencil)?;
            let functional = HolonomyFunctional::new(&f, opts);
            let result = match kind {
                DeriveKind::Mandelstam => {
                    let dir = one_direction(p.dim(), mu, u.as_deref(), "--mu", "--u")?;
                    reject_flag(nu.is_some(), "--nu is only used by the loop kind")?;
                    reject_flag(v.is_some(), "--v is only used by the loop kind")?;
                    mandelstam_derivative(&functional, &p, &dir, &scheme)
                        .map_err(|e| e.to_string())?
                }
                DeriveKind::Connection => {
                    let Some(section) = section else {
                        return Err("connection derivative needs --section".into());
                    };
                    let dir = one_direction(p.dim(), mu, u.as_deref(), "--mu", "--u")?;
                    let radius = 1.0 + scheme.max_eps();
                    let sec: Box<dyn Section> = match section {
                        SectionArg::Transport => Box::new(
                            TransportSection::new(p.clone(), radius).map_err(|e| e.to_string())?,
                        ),
                        SectionArg::Arc => Box::new(
                            ArcSection::between(p.base().clone(), p.endpoint().clone(), radius)
                                .map_err(|e| e.to_string())?,
                        ),
                    };
                    vertical_derivative(&functional, sec.as_ref(), &dir, &scheme)?
                }
                DeriveKind::Loop => {
                    let du = one_direction(p.dim(), mu, u.as_deref(), "--mu", "--u")?;
                    let dv = one_direction(p.dim(), nu, v.as_deref(), "--nu", "--v")?;
                    let gamma = Loop::constant(p.base().clone());
                    loop_derivative(&functional, &p, &gamma, &du, &dv, &scheme)
                        .map_err(|e| e.to_string())?
                }
            };
            print_matrix(&result.value);
            println!("order={} err={}", result.est_order, result.est_error);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            field,
            seed,
            trials,
            tol_file,
            out,
        } => {
            let f = load_field(&field)?;
            let mut tols = SuiteTolerances::default();
            if let Some(tf) = tol_file {
                let text = read(&tf)?;
                apply_tolerances(&text, &mut tols).map_err(|e| format!("{}: {e}", tf.display()))?;
            }
            let spec = RandomSpec::new(seed, f.dim());
            let report = run_identity_suite(
                &f,
                &spec,
                &FdScheme::default(),
                &IntegratorOptions::default(),
                &tols,
                trials,
            )
            .map_err(|e| e.to_string())?;
            for note in &report.notes {
                eprintln!("note: {note}");
            }
            let text = write_report(&report);
            match out {
                Some(path) => {
                    fs::write(&path, text).map_err(|e| format!("{}: {e}", path.display()))?
                }
                None => print!("{text}"),
            }
            Ok(if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn read(path: &FsPath) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_path(path: &FsPath) -> Result<Path, String> {
    parse_path(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_field(path: &FsPath) -> Result<ConnectionField, String> {
    parse_field(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn check_dims(f: &ConnectionField, p: &Path) -> Result<(), String> {
    if f.dim() != p.dim() {
        return Err(format!(
            "dimension mismatch: field lives on R^{}, path on R^{}",
            f.dim(),
            p.dim()
        ));
    }
    Ok(())
}

fn integrator(steps: usize, no_reunit: bool) -> Result<IntegratorOptions, String> {
    if steps == 0 {
        return Err("--steps must be at least 1".into());
    }
    Ok(IntegratorOptions {
        steps_per_segment: steps,
        reunitarize: !no_reunit,
    })
}

fn build_scheme(eps_list: Option<&str>, stencil: StencilArg) -> Result<FdScheme, String> {
    let mut scheme = FdScheme::default();
    scheme.stencil = match stencil {
        StencilArg::Central => Stencil::Central,
        StencilArg::Forward => Stencil::Forward,
    };
    if let Some(list) = eps_list {
        scheme.eps_list = parse_floats(list)?;
    }
    scheme.validate().map_err(|e| e.to_string())?;
    Ok(scheme)
}

fn parse_floats(list: &str) -> Result<Vec<f64>, String> {
    list.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number: {:?}", tok.trim()))
        })
        .collect()
}

/// Resolve one direction from either a 1-based axis flag or an explicit
/// component list; exactly one of the two must be present.
fn one_direction(
    dim: usize,
    axis: Option<usize>,
    components: Option<&str>,
    axis_flag: &str,
    vec_flag: &str,
) -> Result<Vec<f64>, String> {
    match (axis, components) {
        (Some(_), Some(_)) => Err(format!("give {axis_flag} or {vec_flag}, not both")),
        (None, None) => Err(format!("missing direction: give {axis_flag} or {vec_flag}")),
        (Some(mu), None) => {
            if mu == 0 || mu > dim {
                return Err(format!("{axis_flag} {mu} out of range 1..={dim}"));
            }
            let mut dir = vec![0.0; dim];
            dir[mu - 1] = 1.0;
            Ok(dir)
        }
        (None, Some(list)) => {
            let dir = parse_floats(list)?;
            if dir.len() != dim {
                return Err(format!(
                    "{vec_flag} has {} components, path dimension is {dim}",
                    dir.len()
                ));
            }
            Ok(dir)
        }
    }
}

fn reject_flag(present: bool, msg: &str) -> Result<(), String> {
    if present {
        Err(msg.into())
    } else {
        Ok(())
    }
}

/// Vertical derivative along `dir`, assembled by linearity from the
/// per-axis connection derivatives (each probes the section and returns by
/// a straight segment). Error estimates add; orders average.
fn vertical_derivative(
    functional: &HolonomyFunctional,
    section: &dyn Section,
    dir: &[f64],
    scheme: &FdScheme,
) -> Result<DerivativeResult, String> {
    let mut total: Option<DerivativeResult> = None;
    for (idx, &w) in dir.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let part = connection_derivative(functional, section, idx + 1, scheme)
            .map_err(|e| e.to_string())?;
        total = Some(match total {
            None => DerivativeResult {
                value: part.value.scale(w),
                est_order: part.est_order,
                est_error: w.abs() * part.est_error,
            },
            Some(acc) => DerivativeResult {
                value: acc.value + part.value.scale(w),
                est_order: 0.5 * (acc.est_order + part.est_order),
                est_error: acc.est_error + w.abs() * part.est_error,
            },
        });
    }
    total.ok_or_else(|| "direction vector must be nonzero".into())
}

fn print_matrix(m: &CMatrix) {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
        println!("{}", row.join(" "));
    }
}
