//! Scene files, check suites, bundled examples and the command-line front end.

pub mod registry;
pub mod scene;
pub mod suite;

use std::io::Write;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::cones::{characteristic_function, closed_form_expression, ConeError, ConeSpec, PsiMethod};
use crate::expr::Expression;
use crate::geom::SamplePlan;

pub use registry::{example_source, list_examples, run_example};
pub use scene::{load_scene, parse_scene, Scene, SceneError};
pub use suite::{run_suite, CheckOutcome, Overrides, Report, DEFAULT_TOLERANCE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lchlab",
    version,
    about = "Verify Hessian, statistical and l.c.H. structures on charts"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Tolerance for checks that do not set their own.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Sample points per check.
    #[arg(long, global = true, default_value_t = crate::geom::sample::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, global = true, default_value_t = crate::geom::sample::DEFAULT_SEED)]
    pub seed: u64,
    /// Fraction of the chart box kept clear at each face.
    #[arg(long, global = true, default_value_t = crate::geom::sample::DEFAULT_MARGIN)]
    pub margin: f64,
    /// Monte Carlo sample count for characteristic functions.
    #[arg(long, global = true, default_value_t = crate::cones::DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every check of a scene file.
    Check { scene: std::path::PathBuf },
    /// Run a bundled example scene.
    Example { name: String },
    /// List bundled example scenes.
    Examples,
    /// Convex-cone utilities.
    Cone {
        #[command(subcommand)]
        command: ConeCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConeCommand {
    /// Characteristic function at a point.
    Psi {
        /// `orthant:N`, `lorentz:N` or a JSON cone spec.
        spec: String,
        /// Comma-separated coordinates, e.g. `2,3`.
        #[arg(allow_hyphen_values = true)]
        point: String,
        /// Use Monte Carlo even when a closed form exists.
        #[arg(long)]
        monte_carlo: bool,
    },
}

impl GlobalArgs {
    pub fn overrides(&self) -> Result<Overrides, String> {
        let plan = SamplePlan::new(self.samples, self.seed, self.margin).map_err(|e| e.to_string())?;
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("tolerance must be positive, got {t}"));
            }
        }
        if self.mc_samples == 0 {
            return Err("--mc-samples must be positive".into());
        }
        Ok(Overrides {
            tolerance: self.tol,
            plan,
            mc_samples: self.mc_samples,
        })
    }
}

/// Parses `orthant:3`, `lorentz:2` or a JSON cone spec.
pub fn parse_cone_spec(src: &str) -> Result<ConeSpec, String> {
    let src = src.trim();
    if src.starts_with('{') {
        return serde_json::from_str(src).map_err(|e| format!("cone spec: {e}"));
    }
    let (kind, dim) = src
        .split_once(':')
        .ok_or_else(|| format!("cone spec \"{src}\" is neither KIND:DIM nor JSON"))?;
    let dim: usize = dim.trim().parse().map_err(|e| format!("cone dimension: {e}"))?;
    match kind.trim() {
        "orthant" => ConeSpec::orthant(dim),
        "lorentz" => ConeSpec::lorentz(dim),
        other => return Err(format!("unknown cone kind \"{other}\" (use orthant, lorentz or JSON)")),
    }
    .map_err(|e| e.to_string())
}

/// Parses `2,3` or `[2, 3]`; entries may be constant expressions.
pub fn parse_point(src: &str) -> Result<Vec<f64>, String> {
    let inner = src.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(|s| {
            Expression::parse(s.trim(), 1)
                .map_err(|e| format!("coordinate \"{}\": {e}", s.trim()))
                .and_then(|e| {
                    if e.arity() > 0 {
                        Err(format!("coordinate \"{}\" is not a constant", s.trim()))
                    } else {
                        e.eval(&[0.0]).map_err(|e| e.to_string())
                    }
                })
        })
        .collect()
}

fn emit_report(report: &Report, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let _ = writeln!(out, "{}", report.to_json());
    let _ = write!(err, "{}", report.summary());
    report.exit_code()
}

/// Runs the command line `args` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let overrides = match cli.global.overrides() {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    match cli.command {
        Command::Check { scene } => match load_scene(&scene) {
            Ok(s) => emit_report(&run_suite(&s, &overrides), out, err),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_USAGE
            }
        },
        Command::Example { name } => match run_example(&name, &overrides) {
            Ok(r) => emit_report(&r, out, err),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_USAGE
            }
        },
        Command::Examples => {
            for n in list_examples() {
                let _ = writeln!(out, "{n}");
            }
            EXIT_OK
        }
        Command::Cone {
            command:
                ConeCommand::Psi {
                    spec,
                    point,
                    monte_carlo,
                },
        } => {
            let parsed = parse_cone_spec(&spec).and_then(|c| parse_point(&point).map(|p| (c, p)));
            let (cone, x) = match parsed {
                Ok(v) => v,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_USAGE;
                }
            };
            let method = if monte_carlo || closed_form_expression(&cone).is_none() {
                PsiMethod::MonteCarlo {
                    samples: overrides.mc_samples,
                    seed: overrides.plan.seed(),
                }
            } else {
                PsiMethod::ClosedForm
            };
            match characteristic_function(&cone, &x, method) {
                Ok(v) => {
                    let doc = json!({ "cone": cone, "point": x, "psi": v });
                    let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
                    EXIT_OK
                }
                Err(e @ ConeError::Divergence { .. }) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_CHECK_FAILED
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    EXIT_USAGE
                }
            }
        }
    }
}
