//! Running every selected diagnostic over a ladder of grids.

use std::fmt;
use std::str::FromStr;

use formbound_core::calculus::{commutator_check, hedberg_check, riesz_quadrature, spectral_riesz, FitReport};
use formbound_core::capacity::{capacity_test, superlevel_family};
use formbound_core::criteria::{
    ball_test, bessel_iteration_ratio, fefferman_phong, levelset_test, weak_lp_test, CriterionResult,
};
use formbound_core::dyadic::{build_dyadic_stats, carleson_ratio, finest_level, CarlesonResult};
use formbound_core::extension::{trace_identity_check, TraceCheck};
use formbound_core::formnorm::{
    estimate_form_norm_seeded, estimate_phi_multiplier_norm_seeded, relative_form_bound_seeded,
    FormBoundPair, NormEstimate, DEFAULT_SEED,
};
use formbound_core::potential::{compute_phi, realize_potential, PotentialSpec};
use formbound_core::spectral::{make_grid, Field, Grid};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const REPORT_VERSION: u32 = 1;

/// Radii sampled by the ball test.
pub const BALL_RADII: [f64; 4] = [0.125, 0.25, 0.5, 1.0];
/// Target measures of the level-set test.
pub const LEVELSET_MEASURES: [f64; 5] = [0.0625, 0.125, 0.25, 0.5, 1.0];
/// Moment exponents of the Fefferman–Phong test.
pub const FP_EXPONENTS: [f64; 3] = [1.25, 1.5, 2.0];
/// Shifts `t` of the relative form bound.
pub const RELBOUND_SHIFTS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
/// Superlevel sets used by the capacity test.
pub const CAPACITY_SETS: usize = 5;
/// `ε` of the trace identity.
pub const TRACE_EPS: f64 = 0.25;
/// Order `l` of the commutator and Riesz checks.
pub const CALCULUS_ORDER: f64 = 0.5;
/// Allowed excess of `ball / (κ phinorm²)` before the ordering is flagged.
pub const ORDERING_SLACK: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    Formnorm,
    Phinorm,
    Relbound,
    Carleson,
    Ball,
    Levelset,
    Fp,
    Bessel,
    Weaklp,
    Capacity,
    Trace,
    Calculus,
}

impl TestKind {
    pub const ALL: [TestKind; 12] = [
        TestKind::Formnorm,
        TestKind::Phinorm,
        TestKind::Relbound,
        TestKind::Carleson,
        TestKind::Ball,
        TestKind::Levelset,
        TestKind::Fp,
        TestKind::Bessel,
        TestKind::Weaklp,
        TestKind::Capacity,
        TestKind::Trace,
        TestKind::Calculus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Formnorm => "formnorm",
            TestKind::Phinorm => "phinorm",
            TestKind::Relbound => "relbound",
            TestKind::Carleson => "carleson",
            TestKind::Ball => "ball",
            TestKind::Levelset => "levelset",
            TestKind::Fp => "fp",
            TestKind::Bessel => "bessel",
            TestKind::Weaklp => "weaklp",
            TestKind::Capacity => "capacity",
            TestKind::Trace => "trace",
            TestKind::Calculus => "calculus",
        }
    }

    /// Tests stated for sets or cubes of unit size, which need `L ≥ 2`.
    pub fn needs_unit_room(self) -> bool {
        matches!(
            self,
            TestKind::Carleson
                | TestKind::Ball
                | TestKind::Levelset
                | TestKind::Fp
                | TestKind::Bessel
                | TestKind::Weaklp
                | TestKind::Capacity
        )
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| CliError::Spec(format!("unknown test `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub points: usize,
    pub half_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub norm_tol: f64,
    pub max_iter: usize,
    pub capacity_tol: f64,
    pub capacity_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm_tol: 1e-8,
            max_iter: 5000,
            capacity_tol: 1e-8,
            capacity_max_iter: 20000,
        }
    }
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    pub potential: PotentialSpec,
    pub ladder: Vec<GridSize>,
    pub dim: usize,
    pub tests: Vec<TestKind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl BatterySpec {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(CliError::Spec("the grid ladder is empty".into()));
        }
        if self.tests.is_empty() {
            return Err(CliError::Spec("no tests selected".into()));
        }
        let t = &self.tolerances;
        if !(t.norm_tol > 0.0 && t.capacity_tol > 0.0) || t.max_iter == 0 || t.capacity_max_iter == 0 {
            return Err(CliError::Spec("tolerances and iteration caps must be positive".into()));
        }
        for size in &self.ladder {
            make_grid(self.dim, size.points, size.half_length)?;
            if size.half_length < 2.0 {
                if let Some(test) = self.tests.iter().find(|t| t.needs_unit_room()) {
                    return Err(CliError::Spec(format!(
                        "test `{test}` needs L ≥ 2, the ladder contains L = {}",
                        size.half_length
                    )));
                }
            }
        }
        Ok(())
    }

    /// Selected tests in canonical order, without repeats.
    pub fn selected(&self) -> Vec<TestKind> {
        let mut tests = self.tests.clone();
        tests.sort();
        tests.dedup();
        tests
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Outcome {
    Norm(NormEstimate),
    Bounds(Vec<FormBoundPair>),
    Criterion(CriterionResult),
    Carleson(CarlesonResult),
    Fit(FitReport),
    Trace(TraceCheck),
    RelError(f64),
    Error(String),
}

impl Outcome {
    /// The number a ladder of this outcome is tracked by.
    pub fn headline(&self) -> Option<f64> {
        match self {
            Outcome::Norm(e) => Some(e.value),
            Outcome::Bounds(pairs) => pairs.iter().map(|p| p.a).reduce(f64::max),
            Outcome::Criterion(c) => Some(c.constant),
            Outcome::Carleson(c) => Some(c.ratio),
            Outcome::Fit(f) => Some(f.fitted_constant),
            Outcome::Trace(t) => Some(t.rel_error),
            Outcome::RelError(e) => Some(*e),
            Outcome::Error(_) => None,
        }
    }

    fn from_result<T>(r: formbound_core::Result<T>, wrap: impl FnOnce(T) -> Outcome) -> Outcome {
        match r {
            Ok(v) => wrap(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub test: String,
    pub points: usize,
    pub half_length: f64,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Comparability {
    pub points: usize,
    pub half_length: f64,
    pub formnorm: f64,
    pub phinorm: f64,
    pub ratio: Option<f64>,
    pub zero_case: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingCheck {
    pub points: usize,
    pub half_length: f64,
    pub ball: f64,
    pub phinorm: f64,
    /// `ball / phinorm²` of the unit constant potential on the same grid.
    pub kappa: f64,
    /// `ball / (κ phinorm²)`.
    pub factor: Option<f64>,
    pub holds: bool,
    pub zero_case: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trend {
    pub test: String,
    pub first: f64,
    pub last: f64,
    /// `last / first` over the grids where the test succeeded.
    pub ratio: Option<f64>,
    pub zero_case: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Consistency {
    pub comparability: Vec<Comparability>,
    pub ordering: Vec<OrderingCheck>,
    pub trends: Vec<Trend>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsReport {
    pub version: u32,
    pub seed: u64,
    pub spec: BatterySpec,
    pub entries: Vec<Entry>,
    pub consistency: Consistency,
}

impl DiagnosticsReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let report: Self = serde_json::from_str(s)?;
        if report.version != REPORT_VERSION {
            return Err(CliError::Spec(format!(
                "report version {} is not supported (expected {REPORT_VERSION})",
                report.version
            )));
        }
        Ok(report)
    }

    /// Entries of one test in ladder order.
    pub fn ladder(&self, test: &str) -> Vec<&Entry> {
        self.entries.iter().filter(|e| e.test == test).collect()
    }
}

fn ratio(num: f64, den: f64) -> (Option<f64>, bool) {
    if num == 0.0 && den == 0.0 {
        (None, true)
    } else if den == 0.0 {
        (None, false)
    } else {
        (Some(num / den), false)
    }
}

struct Inputs {
    grid: Grid,
    q: Field,
    phi: Field,
}

fn run_test(test: TestKind, inputs: &Inputs, spec: &BatterySpec) -> Vec<(String, Outcome)> {
    let tol = &spec.tolerances;
    let (q, phi) = (&inputs.q, &inputs.phi);
    let one = |name: &str, o: Outcome| vec![(name.to_string(), o)];
    match test {
        TestKind::Formnorm => one(
            "formnorm",
            Outcome::from_result(
                estimate_form_norm_seeded(q, tol.norm_tol, tol.max_iter, spec.seed),
                Outcome::Norm,
            ),
        ),
        TestKind::Phinorm => one(
            "phinorm",
            Outcome::from_result(
                estimate_phi_multiplier_norm_seeded(phi, tol.norm_tol, tol.max_iter, spec.seed),
                Outcome::Norm,
            ),
        ),
        TestKind::Relbound => one(
            "relbound",
            Outcome::from_result(
                relative_form_bound_seeded(q, &RELBOUND_SHIFTS, tol.norm_tol, tol.max_iter, spec.seed),
                Outcome::Bounds,
            ),
        ),
        TestKind::Carleson => one(
            "carleson",
            Outcome::from_result(
                finest_level(&inputs.grid)
                    .and_then(|levels| build_dyadic_stats(phi, levels))
                    .and_then(|stats| carleson_ratio(&stats)),
                Outcome::Carleson,
            ),
        ),
        TestKind::Ball => one("ball", Outcome::from_result(ball_test(phi, &BALL_RADII), Outcome::Criterion)),
        TestKind::Levelset => one(
            "levelset",
            Outcome::from_result(levelset_test(phi, &LEVELSET_MEASURES), Outcome::Criterion),
        ),
        TestKind::Fp => FP_EXPONENTS
            .iter()
            .map(|&s| {
                (
                    format!("fp:s={s}"),
                    Outcome::from_result(fefferman_phong(phi, s, &BALL_RADII), Outcome::Criterion),
                )
            })
            .collect(),
        TestKind::Bessel => one("bessel", Outcome::from_result(bessel_iteration_ratio(phi), Outcome::Criterion)),
        TestKind::Weaklp => one(
            "weaklp",
            Outcome::from_result(weak_lp_test(phi, 2.0 * spec.dim as f64), Outcome::Criterion),
        ),
        TestKind::Capacity => one(
            "capacity",
            Outcome::from_result(
                superlevel_family(phi, CAPACITY_SETS)
                    .and_then(|family| capacity_test(phi, &family, tol.capacity_tol, tol.capacity_max_iter)),
                Outcome::Criterion,
            ),
        ),
        TestKind::Trace => one(
            "trace",
            Outcome::from_result(trace_identity_check(q, TRACE_EPS), Outcome::Trace),
        ),
        TestKind::Calculus => calculus_entries(inputs),
    }
}

/// Commutator bound with `γ = Q` against a fixed bump, Hedberg's inequality
/// for `|Q|`, and the quadrature of `|D|^l` on the bump.
fn calculus_entries(inputs: &Inputs) -> Vec<(String, Outcome)> {
    let bump = realize_potential(&PotentialSpec::Bump { radius: 1.0 }, &inputs.grid);
    let on_bump = |f: &dyn Fn(&Field) -> Outcome| match &bump {
        Ok(u) => f(u),
        Err(e) => Outcome::Error(e.to_string()),
    };
    let commutator = on_bump(&|u| {
        Outcome::from_result(commutator_check(&inputs.q, u, CALCULUS_ORDER), Outcome::Fit)
    });
    let riesz = on_bump(&|u| Outcome::from_result(riesz_error(u, CALCULUS_ORDER), Outcome::RelError));
    let hedberg = Field::from_real(inputs.grid, &inputs.q.moduli()).and_then(|g| hedberg_check(&g));
    vec![
        ("calculus.commutator".into(), commutator),
        ("calculus.hedberg".into(), Outcome::from_result(hedberg, Outcome::Fit)),
        ("calculus.riesz".into(), riesz),
    ]
}

/// Relative L2 distance between the quadrature and the spectral `|D|^l u`.
pub fn riesz_error(u: &Field, l: f64) -> formbound_core::Result<f64> {
    let quad = riesz_quadrature(u, l)?.field;
    let exact = spectral_riesz(u, l)?;
    let den = exact.l2_norm();
    let num = quad.zip_with(&exact, |a, b| a - b)?.l2_norm();
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

fn run_grid(spec: &BatterySpec, size: GridSize) -> Vec<Entry> {
    let entry = |test: String, outcome| Entry {
        test,
        points: size.points,
        half_length: size.half_length,
        outcome,
    };
    let inputs = make_grid(spec.dim, size.points, size.half_length).and_then(|grid| {
        let q = realize_potential(&spec.potential, &grid)?;
        let phi = compute_phi(&q)?;
        Ok(Inputs { grid, q, phi })
    });
    let tests = spec.selected();
    match inputs {
        Ok(inputs) => tests
            .par_iter()
            .map(|&t| run_test(t, &inputs, spec))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .map(|(name, outcome)| entry(name, outcome))
            .collect(),
        Err(e) => tests
            .iter()
            .map(|t| entry(t.name().into(), Outcome::Error(e.to_string())))
            .collect(),
    }
}

fn headline(entries: &[Entry], test: &str, size: GridSize) -> Option<f64> {
    entries
        .iter()
        .find(|e| e.test == test && e.points == size.points && e.half_length == size.half_length)
        .and_then(|e| e.outcome.headline())
}

/// Ball-test constant over `‖M_1‖²` for the unit constant potential.
fn unit_kappa(spec: &BatterySpec, size: GridSize) -> Option<f64> {
    let grid = make_grid(spec.dim, size.points, size.half_length).ok()?;
    let one = Field::constant(grid, Complex64::new(1.0, 0.0));
    let ball = ball_test(&one, &BALL_RADII).ok()?.constant;
    let norm = estimate_phi_multiplier_norm_seeded(
        &one,
        spec.tolerances.norm_tol,
        spec.tolerances.max_iter,
        spec.seed,
    )
    .ok()?
    .value;
    Some(ball / (norm * norm))
}

fn consistency(spec: &BatterySpec, entries: &[Entry]) -> Consistency {
    let mut out = Consistency::default();
    for &size in &spec.ladder {
        let form = headline(entries, "formnorm", size);
        let phin = headline(entries, "phinorm", size);
        if let (Some(f), Some(p)) = (form, phin) {
            let (ratio, zero_case) = ratio(f, p);
            out.comparability.push(Comparability {
                points: size.points,
                half_length: size.half_length,
                formnorm: f,
                phinorm: p,
                ratio,
                zero_case,
            });
        }
        let ball = headline(entries, "ball", size);
        if let (Some(b), Some(p), Some(kappa)) = (ball, phin, phin.and_then(|_| unit_kappa(spec, size))) {
            let (factor, zero_case) = ratio(b, kappa * p * p);
            out.ordering.push(OrderingCheck {
                points: size.points,
                half_length: size.half_length,
                ball: b,
                phinorm: p,
                kappa,
                factor,
                holds: zero_case || factor.is_some_and(|f| f <= ORDERING_SLACK),
                zero_case,
            });
        }
    }
    let mut names: Vec<&str> = Vec::new();
    for e in entries {
        if !names.contains(&e.test.as_str()) {
            names.push(&e.test);
        }
    }
    for name in names {
        let values: Vec<f64> = entries
            .iter()
            .filter(|e| e.test == name)
            .filter_map(|e| e.outcome.headline())
            .collect();
        if let (Some(&first), Some(&last)) = (values.first(), values.last()) {
            let (ratio, zero_case) = ratio(last, first);
            out.trends.push(Trend {
                test: name.to_string(),
                first,
                last,
                ratio,
                zero_case,
            });
        }
    }
    out
}

/// Runs the battery; only an invalid spec is an error, failures of
/// individual tests are recorded in their entries.
pub fn run_battery(spec: &BatterySpec) -> Result<DiagnosticsReport> {
    spec.validate()?;
    let mut entries = Vec::new();
    for &size in &spec.ladder {
        entries.extend(run_grid(spec, size));
    }
    let consistency = consistency(spec, &entries);
    Ok(DiagnosticsReport {
        version: REPORT_VERSION,
        seed: spec.seed,
        spec: spec.clone(),
        entries,
        consistency,
    })
}
