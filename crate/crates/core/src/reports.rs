//! Batch runs behind the command line: parse an input file, call the library,
//! collect checks into a [`Report`] and map it to an exit status.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::beurling::{self, verify_wandering_decomposition, ExtractOptions};
use crate::completion::{self, complete, local_rank_with_tol, verify_completion, CompletionError, CompletionResult, ProblemWire};
use crate::error::Error;
use crate::hardy::{DegreeWindow, HardyElement, OperatorSymbol};
use crate::linalg::{CMat, ONE, ZERO};
use crate::random::{example_theta, exponential_problem, random_inner_symbol};
use crate::subspace::{
    defect_projection, doubly_commuting_test, reducing_test, submodule_span, ReducingOutcome, DEFAULT_COMMUTE_TOL,
};
use crate::wire::{SymbolWire, WindowWire};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Degree used by `selftest` for the exponential example.
pub const SELFTEST_EXAMPLE_DEGREE: u32 = 8;
/// Window used by `selftest` for the inner round trips.
pub const SELFTEST_ROUND_TRIP_DEGREE: u32 = 6;
pub const SELFTEST_ROUND_TRIPS: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    ExtractInner,
    Complete,
    Rank,
    Verify,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::ExtractInner => "extract-inner",
            Command::Complete => "complete",
            Command::Rank => "rank",
            Command::Verify => "verify",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus_grid: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    pub overrides: Overrides,
    pub format: Format,
    pub version: String,
}

impl RunManifest {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            input_path: None,
            output_path: None,
            overrides: Overrides::default(),
            format: Format::Json,
            version: VERSION.to_string(),
        }
    }

    fn grid(&self) -> usize {
        self.overrides.torus_grid.unwrap_or(beurling::DEFAULT_TORUS_GRID)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "==")]
    Equal,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
            Relation::Equal => "==",
        }
    }
}

/// One verdict line: `value relation threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "extended_float")]
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

/// Finite values as JSON numbers, the rest as `"inf"`, `"-inf"` or `"nan"`.
mod extended_float {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            ser.serialize_f64(*x)
        } else if x.is_nan() {
            ser.serialize_str("nan")
        } else if *x > 0.0 {
            ser.serialize_str("inf")
        } else {
            ser.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(D::Error::custom(format!("not a number: {other}"))),
            },
        }
    }
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtMost, threshold, pass: value <= threshold }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, relation: Relation::AtLeast, threshold, pass: value >= threshold }
    }

    /// Integer equality, recorded as floats.
    pub fn equal(name: impl Into<String>, value: usize, expected: usize) -> Self {
        Self {
            name: name.into(),
            value: value as f64,
            relation: Relation::Equal,
            threshold: expected as f64,
            pass: value == expected,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    StageFailure,
    ParseError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::ParseError => 2,
            Status::StageFailure => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StageFailure {
    pub stage: u8,
    pub name: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub report: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub manifest: RunManifest,
    pub status: Status,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_failure: Option<StageFailure>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub result: Value,
}

impl Report {
    fn finish(manifest: &RunManifest, checks: Vec<Check>, result: Value) -> Self {
        let status = if checks.iter().all(|c| c.pass) { Status::Pass } else { Status::Fail };
        Report { manifest: manifest.clone(), status, checks, stage_failure: None, result }
    }

    fn stage(manifest: &RunManifest, checks: Vec<Check>, failure: StageFailure) -> Self {
        Report {
            manifest: manifest.clone(),
            status: Status::StageFailure,
            checks,
            stage_failure: Some(failure),
            result: Value::Null,
        }
    }

    fn parse(manifest: &RunManifest, message: String) -> Self {
        Report {
            manifest: manifest.clone(),
            status: Status::ParseError,
            checks: Vec::new(),
            stage_failure: Some(StageFailure { stage: 0, name: "parse".into(), message, report: Value::Null }),
            result: Value::Null,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Input errors that stop a run before any computation.
enum Failure {
    Parse(String),
    Stage(StageFailure),
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Parse(e.to_string())
    }
}

fn stage_failure(stage: u8, name: &str, err: &Error) -> Failure {
    let report = match err {
        Error::NotDoublyCommuting(rep) => serde_json::to_value(rep.as_ref()).expect("serializes"),
        _ => Value::Null,
    };
    Failure::Stage(StageFailure { stage, name: name.into(), message: err.to_string(), report })
}

/// Errors in the input itself are parse errors, the rest precondition
/// failures of the given stage.
fn classify(stage: u8, name: &str) -> impl Fn(Error) -> Failure + '_ {
    move |e| match e {
        Error::Format(m) => Failure::Parse(m),
        other => stage_failure(stage, name, &other),
    }
}

/// Generator file for `analyze` and `extract-inner`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorsWire {
    pub n: usize,
    #[serde(rename = "dimE")]
    pub dim_e: usize,
    pub window: WindowWire,
    /// every column of every symbol is one generator
    pub generators: Vec<SymbolWire>,
}

impl GeneratorsWire {
    fn elements(&self, degree: Option<u32>) -> Result<(DegreeWindow, Vec<HardyElement>), Failure> {
        let parse = classify(1, "span");
        let window = DegreeWindow::new(self.n, degree.unwrap_or(self.window.d)).map_err(&parse)?;
        let mut out = Vec::new();
        for g in &self.generators {
            let sym = g.to_symbol().map_err(&parse)?;
            if sym.n() != self.n || sym.rows() != self.dim_e {
                return Err(Failure::Parse(format!(
                    "generator is {}x{} in {} variables, expected {} rows in {}",
                    sym.rows(),
                    sym.cols(),
                    sym.n(),
                    self.dim_e,
                    self.n
                )));
            }
            out.extend(sym.with_window_degree(window.d()).map_err(&parse)?.columns());
        }
        if out.is_empty() {
            return Err(Failure::Parse("no generators".into()));
        }
        Ok((window, out))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankInput {
    pub g: SymbolWire,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub expected_rank: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyInput {
    #[serde(rename = "F")]
    pub f: SymbolWire,
    #[serde(rename = "Omega")]
    pub omega: SymbolWire,
    #[serde(default)]
    pub window: Option<WindowWire>,
    /// number of leading columns of `F` that are not required to be inner
    #[serde(default)]
    pub split: Option<usize>,
    #[serde(default)]
    pub theta: Option<SymbolWire>,
}

fn read_input(manifest: &RunManifest) -> Result<Value, Failure> {
    let path = manifest.input_path.as_ref().ok_or_else(|| Failure::Parse("--input is required".into()))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// Runs the manifest's command and builds its report. Only the input file is
/// read; nothing is written.
pub fn execute(manifest: &RunManifest) -> Report {
    let outcome = match manifest.command {
        Command::Analyze => analyze(manifest),
        Command::ExtractInner => extract(manifest),
        Command::Complete => run_complete(manifest),
        Command::Rank => rank(manifest),
        Command::Verify => verify(manifest),
        Command::Selftest => Ok(selftest(manifest)),
    };
    match outcome {
        Ok(r) => r,
        Err(Failure::Parse(m)) => Report::parse(manifest, m),
        Err(Failure::Stage(s)) => Report::stage(manifest, Vec::new(), s),
    }
}

/// [`execute`], then writes the report (JSON or text per the manifest) to the
/// output path or stdout. Returns the exit status.
pub fn run(manifest: &RunManifest) -> std::io::Result<i32> {
    let report = execute(manifest);
    let body = match manifest.format {
        Format::Json => report.to_json(),
        Format::Text => render_report(&report),
    };
    match &manifest.output_path {
        Some(p) => write_atomically(p, &body)?,
        None => print!("{body}"),
    }
    Ok(report.exit_code())
}

fn write_atomically(path: &Path, body: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, body)?;
    std::fs::rename(&tmp, path)
}

fn pair_checks(rep: &crate::subspace::CommutatorReport) -> Vec<Check> {
    rep.pair_norms
        .iter()
        .map(|p| Check::at_most(format!("commutator norm (z{}, z{})", p.i, p.j), p.norm, rep.tolerance))
        .collect()
}

fn reducing_json(r: &ReducingOutcome) -> Value {
    match r {
        ReducingOutcome::Reducing { constants } => json!({ "reducing": true, "constantDimension": constants.len() }),
        ReducingOutcome::NotReducing { direction, adjoint, vector, residual } => json!({
            "reducing": false,
            "direction": direction.map(|i| i + 1),
            "adjoint": adjoint,
            "residual": residual,
            "vector": SymbolWire::from_element(vector),
        }),
    }
}

fn commute_tol(manifest: &RunManifest) -> f64 {
    manifest.overrides.tolerance.unwrap_or(DEFAULT_COMMUTE_TOL)
}

fn analyze(manifest: &RunManifest) -> Result<Report, Failure> {
    let input: GeneratorsWire = serde_json::from_value(read_input(manifest)?)?;
    let (window, gens) = input.elements(manifest.overrides.degree)?;
    let s = submodule_span(&gens, &window).map_err(classify(1, "span"))?;
    let rep = doubly_commuting_test(&s, commute_tol(manifest)).map_err(classify(2, "doubly-commuting"))?;
    let red = reducing_test(&s).map_err(classify(3, "reducing"))?;
    let result = json!({
        "window": WindowWire { n: Some(window.n()), d: window.d() },
        "dimE": s.dim_e(),
        "spanDimension": s.dimension(),
        "commutator": rep,
        "reducing": reducing_json(&red),
    });
    Ok(Report::finish(manifest, pair_checks(&rep), result))
}

fn extract(manifest: &RunManifest) -> Result<Report, Failure> {
    let input: GeneratorsWire = serde_json::from_value(read_input(manifest)?)?;
    let (window, gens) = input.elements(manifest.overrides.degree)?;
    let s = submodule_span(&gens, &window).map_err(classify(1, "span"))?;
    let opts = ExtractOptions {
        commute_tol: commute_tol(manifest),
        inner_tol: manifest.overrides.tolerance.unwrap_or(beurling::DEFAULT_INNER_TOL),
        torus_grid: manifest.grid(),
    };
    let ex = beurling::extract_inner_with(&s, &opts).map_err(|e| match e {
        Error::NotDoublyCommuting(_) => stage_failure(2, "doubly-commuting", &e),
        other => classify(3, "extract-inner")(other),
    })?;
    let dec = verify_wandering_decomposition(&s, &ex.wandering.joint).map_err(classify(4, "decomposition"))?;
    let mut checks = pair_checks(&ex.commutator);
    checks.push(Check::at_most("inner gram deviation", ex.certificate.gram_deviation, ex.certificate.tolerance));
    checks.push(Check::at_most("inner torus deviation", ex.certificate.torus_deviation_max, ex.certificate.tolerance));
    checks.push(Check::at_most("wandering family gram deviation", dec.gram_deviation, 1e-10));
    checks.push(Check::at_most("wandering family span residual", dec.span_residual, 1e-8));
    checks.push(Check::at_most("range projection distance", ex.range_distance, beurling::RANGE_TOL));
    let result = json!({
        "theta": SymbolWire::from(&ex.theta),
        "certificate": ex.certificate,
        "commutator": ex.commutator,
        "wandering": {
            "perVariable": ex.wandering.per_variable.iter().map(|w| w.dimension()).collect::<Vec<_>>(),
            "joint": ex.wandering.joint.dimension(),
            "productDistance": ex.wandering.product_distance,
        },
        "decomposition": dec,
        "rangeDistance": ex.range_distance,
    });
    Ok(Report::finish(manifest, checks, result))
}

/// Checks recorded for a completed run, in pipeline order.
pub fn completion_checks(r: &CompletionResult) -> Vec<Check> {
    let t = r.tolerances;
    let res = &r.residuals;
    vec![
        Check::at_most("stage 1 gf - I coefficients", res.left_inverse_coeff, t.residual),
        Check::at_most("stage 1 gf - I torus", res.left_inverse_torus, t.residual),
        Check::at_most("stage 3 commutator max norm", r.commutator.max_norm(), t.commute),
        Check::at_most("stage 4 inner gram deviation", r.inner_cert.gram_deviation, r.inner_cert.tolerance),
        Check::at_most("stage 4 inner torus deviation", r.inner_cert.torus_deviation_max, r.inner_cert.tolerance),
        Check::at_most("stage 4 kernel vs range distance", r.kernel_range_distance, t.range),
        Check::equal("stage 5 dim E_a + rank g", r.dim_check.dim_ea + r.dim_check.rank_g, r.dim_check.dim_ec),
        Check::at_most("stage 7 Gamma residual", res.gamma_solve, t.residual),
        Check::at_most("stage 8 F Omega - I coefficients", res.f_omega_coeff, t.residual),
        Check::at_most("stage 8 F Omega - I torus", res.f_omega_torus, t.residual),
        Check::at_most("stage 8 Omega F - I coefficients", res.omega_f_coeff, t.residual),
        Check::at_most("stage 8 Omega F - I torus", res.omega_f_torus, t.residual),
    ]
}

fn matrix_json(m: &CMat) -> Value {
    json!((0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn completion_failure(e: CompletionError) -> Failure {
    let (stage, name) = e.stage();
    let report = match &e {
        CompletionError::NotDoublyCommuting(rep) => serde_json::to_value(rep.as_ref()).expect("serializes"),
        CompletionError::RankNullity { check, rank } => json!({ "dimCheck": check, "rank": rank }),
        CompletionError::LeftInverse { deviation, tolerance } => json!({ "deviation": deviation, "tolerance": tolerance }),
        _ => Value::Null,
    };
    Failure::Stage(StageFailure { stage, name: name.into(), message: e.to_string(), report })
}

fn apply_problem_overrides(wire: &mut ProblemWire, o: &Overrides) {
    if let Some(d) = o.degree {
        wire.window.d = d;
    }
    if let Some(t) = o.tolerance {
        wire.tolerances.residual = t;
    }
    if let Some(s) = o.seed {
        wire.seed = s;
    }
}

fn run_complete(manifest: &RunManifest) -> Result<Report, Failure> {
    let mut wire: ProblemWire = serde_json::from_value(read_input(manifest)?)?;
    apply_problem_overrides(&mut wire, &manifest.overrides);
    let mut problem = wire.to_problem().map_err(classify(0, "input"))?;
    problem.torus_grid = manifest.grid();
    let r = complete(&problem).map_err(completion_failure)?;
    let checks = completion_checks(&r);
    let mut result = serde_json::to_value(&r).expect("serializes");
    result["valueAtOrigin"] = matrix_json(&r.f_full.constant_term());
    Ok(Report::finish(manifest, checks, result))
}

fn rank(manifest: &RunManifest) -> Result<Report, Failure> {
    let input: RankInput = serde_json::from_value(read_input(manifest)?)?;
    let g = input.g.to_symbol().map_err(classify(0, "input"))?;
    let seed = manifest.overrides.seed.or(input.seed).unwrap_or(1);
    let samples = input.samples.unwrap_or(completion::DEFAULT_RANK_SAMPLES);
    let tol = manifest.overrides.tolerance.unwrap_or(completion::Tolerances::default().rank);
    let rep = local_rank_with_tol(&g, samples, seed, tol).map_err(classify(1, "rank"))?;
    let mut checks = Vec::new();
    checks.push(Check::equal("rank within shape", rep.rank.min(g.rows().min(g.cols())), rep.rank));
    if let Some(e) = input.expected_rank {
        checks.push(Check::equal("rank matches expected", rep.rank, e));
    }
    Ok(Report::finish(manifest, checks, serde_json::to_value(&rep).expect("serializes")))
}

fn verify(manifest: &RunManifest) -> Result<Report, Failure> {
    let mut value = read_input(manifest)?;
    // accept a `complete` report and use its result
    if value.get("F").is_none() {
        if let Some(inner) = value.get("result").filter(|r| r.get("F").is_some()) {
            value = inner.clone();
        }
    }
    let input: VerifyInput = serde_json::from_value(value)?;
    let parse = classify(0, "input");
    let f = input.f.to_symbol().map_err(&parse)?;
    let omega = input.omega.to_symbol().map_err(&parse)?;
    let d = manifest
        .overrides
        .degree
        .or(input.window.map(|w| w.d))
        .unwrap_or(f.window().d().max(omega.window().d()));
    let window = DegreeWindow::new(f.n(), d).map_err(&parse)?;
    let split = match (input.split, &input.theta) {
        (Some(s), _) => Some(s),
        (None, Some(t)) => Some(f.cols().saturating_sub(t.cols)),
        (None, None) => None,
    };
    let tol = manifest.overrides.tolerance.unwrap_or(completion::Tolerances::default().residual);
    let rep = verify_completion(&f, &omega, &window, manifest.grid(), split, tol).map_err(classify(1, "verify"))?;
    let mut checks = vec![
        Check::at_most("F Omega - I coefficients", rep.f_omega_coeff, tol),
        Check::at_most("F Omega - I torus", rep.f_omega_torus, tol),
        Check::at_most("Omega F - I coefficients", rep.omega_f_coeff, tol),
        Check::at_most("Omega F - I torus", rep.omega_f_torus, tol),
    ];
    if let Some(c) = &rep.inner {
        checks.push(Check::at_most("inner gram deviation", c.gram_deviation, c.tolerance));
        checks.push(Check::at_most("inner torus deviation", c.torus_deviation_max, c.tolerance));
    }
    Ok(Report::finish(manifest, checks, serde_json::to_value(&rep).expect("serializes")))
}

/// Distance of `theta` from `theta0 U` for the best constant `U`, plus the
/// deviation of that `U` from a unitary and any non-constant coefficient.
pub fn unitary_equivalence_residual(theta0: &CMat, theta: &OperatorSymbol) -> f64 {
    let t0 = theta.constant_term();
    if t0.shape() != theta0.shape() {
        return f64::INFINITY;
    }
    let u = theta0.adjoint() * &t0;
    let fit = (&t0 - theta0 * &u).camax();
    let unitary = (u.adjoint() * &u - CMat::identity(u.ncols(), u.ncols())).camax();
    let higher = theta
        .terms()
        .filter(|(k, _)| !k.is_zero())
        .map(|(_, m)| m.camax())
        .fold(0.0, f64::max);
    fit.max(unitary).max(higher)
}

/// Projection onto the constants of `H^2_{C^dim}` on the window.
fn constants_projection(window: &DegreeWindow, dim: usize) -> CMat {
    let mut p = CMat::zeros(window.len() * dim, window.len() * dim);
    for j in 0..dim {
        p[(j, j)] = ONE;
    }
    p
}

fn selftest(manifest: &RunManifest) -> Report {
    let seed = manifest.overrides.seed.unwrap_or(1);
    let grid = manifest.grid();
    let tol = manifest.overrides.tolerance.unwrap_or(1e-10);
    let mut checks = Vec::new();

    let mut defects = Vec::new();
    for n in 1..=3 {
        for d in 1..=3 {
            for dim in 1..=2 {
                let window = DegreeWindow::new(n, d).expect("small window");
                let dev = match defect_projection(&window, dim) {
                    Ok(m) => (m - constants_projection(&window, dim)).camax(),
                    Err(_) => f64::INFINITY,
                };
                checks.push(Check::at_most(format!("defect projection n={n} d={d} dimE={dim}"), dev, 1e-12));
                defects.push(json!({ "n": n, "d": d, "dimE": dim, "deviation": dev }));
            }
        }
    }

    let example = match exponential_problem(SELFTEST_EXAMPLE_DEGREE).map_err(CompletionError::Kernel).and_then(|mut p| {
        p.seed = seed;
        p.torus_grid = grid;
        p.tolerances.residual = tol;
        complete(&p)
    }) {
        Ok(r) => {
            checks.extend(completion_checks(&r).into_iter().map(|mut c| {
                c.name = format!("example {}", c.name);
                c
            }));
            let theta_res = unitary_equivalence_residual(&example_theta(), &r.theta);
            checks.push(Check::at_most("example theta up to unitary", theta_res, 1e-8));
            let f0 = r.f_full.constant_term();
            let expect = CMat::from_row_slice(3, 3, &[ONE, ZERO, ZERO, ONE, ONE, ZERO, ONE, ZERO, ONE]);
            let f0_dev = if f0.shape() == (3, 3) { (&f0 - expect).camax() } else { f64::INFINITY };
            checks.push(Check::at_most("example F(0)", f0_dev, 1e-12));
            json!({
                "theta": SymbolWire::from(&r.theta),
                "valueAtOrigin": matrix_json(&f0),
                "residuals": r.residuals,
                "dimCheck": r.dim_check,
            })
        }
        Err(e) => {
            let (stage, name) = e.stage();
            checks.push(Check::equal(format!("example completes (failed at stage {stage} {name})"), 0, 1));
            json!({ "error": e.to_string() })
        }
    };

    let mut trips = Vec::new();
    for i in 0..SELFTEST_ROUND_TRIPS {
        let s = seed.wrapping_mul(1000).wrapping_add(i);
        let theta = random_inner_symbol(s);
        let (max_norm, dist) = round_trip(&theta, SELFTEST_ROUND_TRIP_DEGREE, grid);
        checks.push(Check::at_most(format!("round trip {s} commutator"), max_norm, DEFAULT_COMMUTE_TOL));
        checks.push(Check::at_most(format!("round trip {s} range distance"), dist, beurling::RANGE_TOL));
        trips.push(json!({
            "seed": s,
            "theta": SymbolWire::from(&theta),
            "commutatorMax": max_norm,
            "rangeDistance": dist,
        }));
    }

    let result = json!({ "defect": defects, "example": example, "roundTrips": trips });
    Report::finish(manifest, checks, result)
}

/// Commutator norm of the submodule generated by `theta` and the range
/// distance of the extracted symbol; failures map to infinities.
fn round_trip(theta: &OperatorSymbol, d: u32, grid: usize) -> (f64, f64) {
    let Ok(window) = DegreeWindow::new(theta.n(), d) else { return (f64::INFINITY, f64::INFINITY) };
    let Ok(cols) = theta.with_window_degree(d).map(|t| t.columns()) else { return (f64::INFINITY, f64::INFINITY) };
    let Ok(s) = submodule_span(&cols, &window) else { return (f64::INFINITY, f64::INFINITY) };
    let opts = ExtractOptions { torus_grid: grid, ..ExtractOptions::default() };
    match beurling::extract_inner_with(&s, &opts) {
        Ok(ex) => (ex.commutator.max_norm(), ex.range_distance),
        Err(Error::NotDoublyCommuting(rep)) => (rep.max_norm(), f64::INFINITY),
        Err(_) => (0.0, f64::INFINITY),
    }
}

/// Plain-text rendering: a header, the failing checks, then the passing ones,
/// each group in recorded order.
pub fn render_report(r: &Report) -> String {
    let mut out = String::new();
    let status = match r.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::StageFailure => "STAGE FAILURE",
        Status::ParseError => "PARSE ERROR",
    };
    let _ = writeln!(out, "hardy-factor {} {}: {status}", r.manifest.version, r.manifest.command.name());
    if let Some(s) = &r.stage_failure {
        let _ = writeln!(out, "stage {} ({}): {}", s.stage, s.name, s.message);
        if let Ok(rep) = serde_json::from_value::<crate::subspace::CommutatorReport>(s.report.clone()) {
            let mut pairs = rep.pair_norms.clone();
            pairs.sort_by_key(|p| p.norm <= rep.tolerance);
            for p in pairs {
                let _ = writeln!(out, "  pair (z{}, z{}) norm {:.3e}", p.i, p.j, p.norm);
            }
        }
    }
    let width = r.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in r.checks.iter().filter(|c| !c.pass).chain(r.checks.iter().filter(|c| c.pass)) {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        let _ = match c.relation {
            Relation::Equal => writeln!(out, "{:<width$}  {:>10} {} {:<10}  {verdict}", c.name, c.value, c.relation.symbol(), c.threshold),
            _ => writeln!(out, "{:<width$}  {:>10.3e} {} {:<10.1e}  {verdict}", c.name, c.value, c.relation.symbol(), c.threshold),
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes_and_repeats() {
        let m = RunManifest::new(Command::Selftest);
        let a = execute(&m);
        for c in a.checks.iter().filter(|c| !c.pass) {
            eprintln!("failing: {c:?}");
        }
        assert_eq!(a.status, Status::Pass);
        assert_eq!(a.to_json(), execute(&m).to_json());
        let back: Report = serde_json::from_str(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn text_lists_failures_first() {
        let mut m = RunManifest::new(Command::Rank);
        m.format = Format::Text;
        let r = Report::finish(
            &m,
            vec![Check::at_most("good", 0.0, 1.0), Check::at_most("bad", 2.0, 1.0)],
            Value::Null,
        );
        let text = render_report(&r);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].ends_with("FAIL"));
        assert!(lines[1].starts_with("bad") && lines[1].ends_with("FAIL"));
        assert!(lines[2].starts_with("good") && lines[2].ends_with("PASS"));
    }

    #[test]
    fn missing_input_is_a_parse_error() {
        let r = execute(&RunManifest::new(Command::Complete));
        assert_eq!(r.exit_code(), 2);
    }
}
