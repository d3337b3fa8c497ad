use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use formbound::battery::{riesz_error, BALL_RADII, FP_EXPONENTS, LEVELSET_MEASURES};
use formbound::export::write_ladders;
use formbound::sets::{FamilySpec, SetSpec};
use formbound::{configure_threads, run_battery, BatterySpec, CliError, Result};
use formbound_core::calculus::{commutator_check, hedberg_check, mikhlin_check};
use formbound_core::capacity::{capacity, capacity_test};
use formbound_core::criteria::{
    ball_test, bessel_iteration_ratio, fefferman_phong, levelset_test, weak_lp_test,
};
use formbound_core::dyadic::{build_dyadic_stats, carleson_ratio, finest_level};
use formbound_core::extension::trace_identity_check_with;
use formbound_core::formnorm::{dense_form_norm, estimate_form_norm_seeded, DEFAULT_SEED, DENSE_LIMIT};
use formbound_core::potential::{compute_phi, realize_potential, PotentialSpec};
use formbound_core::spectral::{make_grid, Field, Grid};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "formbound", version, about = "Form-boundedness diagnostics for √(−Δ) + Q on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    /// Space dimension n.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Points per axis (power of two).
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// Half-length L of the torus [−L, L)^n.
    #[arg(long = "box", default_value_t = 2.0)]
    half_length: f64,
}

impl GridArgs {
    fn grid(&self) -> Result<Grid> {
        Ok(make_grid(self.dim, self.grid, self.half_length)?)
    }
}

#[derive(Args)]
struct Solver {
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CalculusCheck {
    Commutator,
    Hedberg,
    Mikhlin,
    Riesz,
}

#[derive(Subcommand)]
enum Command {
    /// Sharp form-bound constant ‖J_{1/2} Q J_{1/2}‖.
    Formnorm {
        #[arg(long)]
        preset: PotentialSpec,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: Solver,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Also compute the norm by a dense SVD (at most 4096 points).
        #[arg(long)]
        dense_check: bool,
    },
    /// Dyadic Carleson ratio of Φ = J_{1/2} Q.
    Carleson {
        #[arg(long)]
        preset: PotentialSpec,
        #[command(flatten)]
        grid: GridArgs,
        /// Dyadic levels below the unit cubes (default: down to single cells).
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Ball, level-set, Fefferman–Phong, Bessel-iteration and weak-L_p tests of Φ.
    Criteria {
        #[arg(long)]
        preset: PotentialSpec,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',', default_value = "ball,levelset,fp,bessel,weaklp")]
        tests: Vec<String>,
    },
    /// Capacity cap(e, W^{1/2}_2) of one set.
    Capacity {
        /// `ball:r=0.25[,at=x/y]` or `file:mask.bin`.
        #[arg(long)]
        set: SetSpec,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 20000)]
        max_iter: usize,
    },
    /// Capacity criterion sup ∫_e |Φ|² / cap(e) over a set family.
    Captest {
        #[arg(long)]
        preset: PotentialSpec,
        /// `levelsets:k` or `balls:r=a;b;…`.
        #[arg(long, default_value = "levelsets:5")]
        family: FamilySpec,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 20000)]
        max_iter: usize,
    },
    /// Trace of J_{ε+3/2}(γ⊗δ) against c_ε J_{ε+1/2} γ.
    TraceCheck {
        #[arg(long)]
        preset: PotentialSpec,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[command(flatten)]
        grid: GridArgs,
        /// Transverse points of the lifted lattice (default: --grid).
        #[arg(long)]
        lifted_grid: Option<usize>,
    },
    /// Checks of the fractional calculus inequalities.
    Calculus {
        #[arg(long, value_enum)]
        check: CalculusCheck,
        /// γ for the commutator, g for Hedberg, u for the Riesz quadrature.
        #[arg(long, default_value = "bump:r=1")]
        preset: PotentialSpec,
        #[command(flatten)]
        grid: GridArgs,
        /// Order l.
        #[arg(long, default_value_t = 0.5)]
        order: f64,
    },
    /// Runs a battery spec and writes the JSON report.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-test CSV ladders.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn emit(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // A closed reader (`| head`) is not an error.
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn phi_of(preset: &PotentialSpec, grid: Grid) -> Result<Field> {
    Ok(compute_phi(&realize_potential(preset, &grid)?)?)
}

fn criteria(phi: &Field, tests: &[String]) -> Result<Vec<serde_json::Value>> {
    let mut out = Vec::new();
    for name in tests {
        let results = match name.as_str() {
            "ball" => vec![ball_test(phi, &BALL_RADII)?],
            "levelset" => vec![levelset_test(phi, &LEVELSET_MEASURES)?],
            "fp" => FP_EXPONENTS
                .iter()
                .map(|&s| fefferman_phong(phi, s, &BALL_RADII))
                .collect::<formbound_core::Result<_>>()?,
            "bessel" => vec![bessel_iteration_ratio(phi)?],
            "weaklp" => vec![weak_lp_test(phi, 2.0 * phi.grid().dim() as f64)?],
            other => return Err(CliError::Argument(format!("unknown criterion `{other}`"))),
        };
        for r in results {
            out.push(serde_json::to_value(r)?);
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Formnorm {
            preset,
            grid,
            solver,
            seed,
            dense_check,
        } => {
            let g = grid.grid()?;
            let q = realize_potential(&preset, &g)?;
            let estimate = estimate_form_norm_seeded(&q, solver.tol, solver.max_iter, seed)?;
            if dense_check {
                if g.len() > DENSE_LIMIT {
                    return Err(CliError::Argument(format!(
                        "dense check needs at most {DENSE_LIMIT} points, grid has {}",
                        g.len()
                    )));
                }
                let dense = dense_form_norm(&q)?;
                let rel = (estimate.value - dense.value).abs() / dense.value.max(f64::MIN_POSITIVE);
                emit(&json!({ "estimate": estimate, "dense": dense, "rel_diff": rel }))
            } else {
                emit(&estimate)
            }
        }
        Command::Carleson { preset, grid, levels } => {
            let g = grid.grid()?;
            let levels = match levels {
                Some(k) => k,
                None => finest_level(&g)?,
            };
            let stats = build_dyadic_stats(&phi_of(&preset, g)?, levels)?;
            emit(&carleson_ratio(&stats)?)
        }
        Command::Criteria { preset, grid, tests } => {
            let g = grid.grid()?;
            if g.half_length() < 2.0 {
                return Err(CliError::Argument("criteria runs need --box ≥ 2".into()));
            }
            emit(&criteria(&phi_of(&preset, g)?, &tests)?)
        }
        Command::Capacity {
            set,
            grid,
            tol,
            max_iter,
        } => {
            let e = set.realize(grid.grid()?)?;
            emit(&capacity(&e, tol, max_iter)?)
        }
        Command::Captest {
            preset,
            family,
            grid,
            tol,
            max_iter,
        } => {
            let g = grid.grid()?;
            if g.half_length() < 2.0 {
                return Err(CliError::Argument("criteria runs need --box ≥ 2".into()));
            }
            let phi = phi_of(&preset, g)?;
            let sets = family.realize(&phi)?;
            emit(&capacity_test(&phi, &sets, tol, max_iter)?)
        }
        Command::TraceCheck {
            preset,
            eps,
            grid,
            lifted_grid,
        } => {
            let g = grid.grid()?;
            let gamma = realize_potential(&preset, &g)?;
            emit(&trace_identity_check_with(&gamma, eps, lifted_grid.unwrap_or(g.points()))?)
        }
        Command::Calculus {
            check,
            preset,
            grid,
            order,
        } => match check {
            CalculusCheck::Mikhlin => {
                let radii: Vec<f64> = (0..=60).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)).collect();
                emit(&mikhlin_check(order, &radii, grid.dim)?)
            }
            CalculusCheck::Commutator => {
                let g = grid.grid()?;
                let gamma = realize_potential(&preset, &g)?;
                let u = realize_potential(&PotentialSpec::Bump { radius: 0.5 }, &g)?;
                emit(&commutator_check(&gamma, &u, order)?)
            }
            CalculusCheck::Hedberg => {
                let g = grid.grid()?;
                let q = realize_potential(&preset, &g)?;
                emit(&hedberg_check(&Field::from_real(g, &q.moduli())?)?)
            }
            CalculusCheck::Riesz => {
                let u = realize_potential(&preset, &grid.grid()?)?;
                emit(&json!({ "rel_error": riesz_error(&u, order)?, "order": order }))
            }
        },
        Command::Report { config, out, csv } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::io(&config, e))?;
            let spec: BatterySpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Spec(format!("{}: {e}", config.display())))?;
            let report = run_battery(&spec)?;
            std::fs::write(&out, report.to_json()?).map_err(|e| CliError::io(&out, e))?;
            if let Some(dir) = csv {
                write_ladders(&report, &dir)?;
            }
            let failed = report
                .entries
                .iter()
                .filter(|e| matches!(e.outcome, formbound::battery::Outcome::Error(_)))
                .count();
            eprintln!(
                "{} entries over {} grids ({} failed), tests: {}",
                report.entries.len(),
                spec.ladder.len(),
                failed,
                spec.selected().iter().map(|t| t.name()).collect::<Vec<_>>().join(",")
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads().and_then(|()| run(cli)) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
