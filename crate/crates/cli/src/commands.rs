use std::fs;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;
use serde_json::Value;

use resbvp::conditions::{sign_sets, DEFAULT_C_GRID};
use resbvp::golden::{self, GoldenReport, LogFamily};
use resbvp::oracle::{self, newton_solve, FullSystem, DEFAULT_MAX_ITER};
use resbvp::solver;
use resbvp::{
    CheckOptions, Checker, ConditionReport, ConditionsError, LinearAnalysis, LinearError, LinearReport,
    MultistartReport, Orientation, ProblemError, ProblemSpec, ScalarTrajectory, SignSets, SolveError,
    SolveOptions, SolveResult,
};

use crate::render;
use crate::{CertArgs, Command, OracleArgs, Output, Tolerances};

/// Start-box half-width when no certificate supplies one.
const FALLBACK_BOX: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::Eval(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<LinearError> for CliError {
    fn from(e: LinearError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn conditions_error(e: ConditionsError) -> CliError {
    match e {
        ConditionsError::InvalidInterval { .. } | ConditionsError::InvalidParameter(_) => {
            CliError::Input(e.to_string())
        }
        ConditionsError::Problem(p) => p.into(),
        _ => CliError::Numerical(e.to_string()),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Attempt {
    pub c: f64,
    pub d: f64,
    pub orientation: Orientation,
    pub verdict: String,
}

/// Result of `check`: the passing report, or the most informative failing
/// one, with every attempt made.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub mode: &'static str,
    pub passed: bool,
    pub report: Option<ConditionReport>,
    pub attempts: Vec<Attempt>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyzeOutput {
    pub analysis: LinearReport,
    pub sign_sets: SignSets,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutput {
    pub check: CheckOutcome,
    pub solution: Option<SolveResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WarmOutput {
    pub iterations: usize,
    pub recurrence_residual: f64,
    pub boundary_residual: f64,
    /// Sup distance between the warm start and the converged solution.
    pub distance: f64,
    pub y: ScalarTrajectory,
}

#[derive(Debug, Clone, Serialize)]
pub struct Example5Output {
    pub golden: GoldenReport,
    pub lambda: Vec<Vec<f64>>,
    pub sign_sets: SignSets,
    pub log_family: LogFamily,
    pub check: CheckOutcome,
    pub solution: Option<SolveResult>,
    pub confirmation: Option<WarmOutput>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AllOutput {
    pub analysis: AnalyzeOutput,
    pub check: CheckOutcome,
    pub solution: Option<SolveResult>,
    pub confirmation: Option<WarmOutput>,
    pub multistart: MultistartReport,
}

pub fn run(command: Command) -> Result<bool, CliError> {
    match command {
        Command::Analyze { problem, tol, out } => {
            tol.validate()?;
            let spec = load(&problem)?;
            let a = analyze(&spec, &tol)?;
            emit(&out, &render::analysis(&a.analysis, &a.sign_sets), &a)?;
            Ok(true)
        }
        Command::Check { problem, cert, tol, out } => {
            tol.validate()?;
            let spec = load(&problem)?;
            let la = linear(&spec, &tol)?;
            let outcome = certify(&la, &cert, &tol)?;
            emit(&out, &render::check(&outcome), &outcome)?;
            Ok(outcome.passed)
        }
        Command::Solve { problem, cert, tol, out, csv } => {
            tol.validate()?;
            let spec = load(&problem)?;
            let la = linear(&spec, &tol)?;
            let check = certify(&la, &cert, &tol)?;
            let solution = solve_stage(&la, &check, &tol)?;
            if let (Some(path), Some(res)) = (&csv, &solution) {
                write_csv(path, &res.y)?;
            }
            let passed = solution.is_some();
            let output = SolveOutput { check, solution };
            emit(&out, &render::solve(&output.check, output.solution.as_ref()), &output)?;
            Ok(passed)
        }
        Command::Oracle { problem, oracle, tol, out } => {
            tol.validate()?;
            let spec = load(&problem)?;
            let fs = FullSystem::new(&spec);
            if let Some(path) = &oracle.warm {
                let y0 = read_warm(path, fs.dim())?;
                let warm = confirm(&fs, &y0, &tol)?;
                emit(&out, &render::warm(&warm), &warm)?;
                return Ok(true);
            }
            let radius = match oracle.box_radius {
                Some(r) => r,
                None => default_box(&spec, &tol),
            };
            let report = multistart(&fs, &oracle, radius, &tol)?;
            emit(&out, &render::multistart(&report), &report)?;
            Ok(!report.solutions.is_empty())
        }
        Command::Example5 { tol, out } => {
            tol.validate()?;
            let output = example5(&tol)?;
            let passed = output.golden.passed() && output.check.passed && output.confirmation.is_some();
            emit(&out, &render::example5(&output), &output)?;
            Ok(passed)
        }
        Command::All { problem, cert, oracle, tol, out, csv } => {
            tol.validate()?;
            let spec = load(&problem)?;
            let analysis = analyze(&spec, &tol)?;
            let la = linear(&spec, &tol)?;
            let check = certify(&la, &cert, &tol)?;
            let solution = solve_stage(&la, &check, &tol)?;
            let fs = FullSystem::new(&spec);
            let confirmation = match &solution {
                Some(res) => Some(confirm(&fs, &DVector::from_column_slice(res.y.as_slice()), &tol)?),
                None => None,
            };
            if let (Some(path), Some(res)) = (&csv, &solution) {
                write_csv(path, &res.y)?;
            }
            let radius = oracle.box_radius.unwrap_or_else(|| {
                check
                    .report
                    .as_ref()
                    .filter(|_| check.passed)
                    .map_or(FALLBACK_BOX, |r| 2.0 * r.d)
            });
            let multistart = multistart(&fs, &oracle, radius, &tol)?;
            let passed = solution.is_some();
            let output = AllOutput {
                analysis,
                check,
                solution,
                confirmation,
                multistart,
            };
            emit(&out, &render::all(&output), &output)?;
            Ok(passed)
        }
    }
}

fn load(path: &Path) -> Result<ProblemSpec, CliError> {
    ProblemSpec::load(path).map_err(|e| match e {
        ProblemError::Io(io) => CliError::Input(format!("{}: {io}", path.display())),
        e => e.into(),
    })
}

fn linear(spec: &ProblemSpec, tol: &Tolerances) -> Result<LinearAnalysis, CliError> {
    Ok(LinearAnalysis::with_rank_tol(spec, tol.tol_rank)?)
}

fn check_options(tol: &Tolerances) -> CheckOptions {
    CheckOptions {
        sign_tol: tol.tol_sign,
        strict_tol: tol.tol_strict,
        ..CheckOptions::default()
    }
}

fn solve_options(tol: &Tolerances) -> SolveOptions {
    SolveOptions {
        solve_tol: tol.tol_solve,
        ..SolveOptions::default()
    }
}

fn analyze(spec: &ProblemSpec, tol: &Tolerances) -> Result<AnalyzeOutput, CliError> {
    let la = linear(spec, tol)?;
    let sets = sign_sets(&la.psi_last(), &la.s_lag(), tol.tol_sign);
    Ok(AnalyzeOutput {
        analysis: la.report(),
        sign_sets: sets,
    })
}

fn certify(la: &LinearAnalysis, args: &CertArgs, tol: &Tolerances) -> Result<CheckOutcome, CliError> {
    let checker = Checker::new(la, check_options(tol));
    let orientations = args.orientation.orientations();
    let attempt = |r: &ConditionReport| Attempt {
        c: r.c,
        d: r.d,
        orientation: r.orientation,
        verdict: r.verdict.to_string(),
    };
    if let (false, Some(c), Some(d)) = (args.auto, args.c, args.d) {
        let mut reports = checker
            .certify_main_orientations(c, d, &orientations)
            .map_err(conditions_error)?;
        if checker.sets().alignment().is_some() {
            let ss = checker.certify_same_sign(c, d).map_err(conditions_error)?;
            if orientations.contains(&ss.orientation) {
                reports.push(ss);
            }
        }
        let attempts = reports.iter().map(attempt).collect();
        let pick = reports.iter().position(|r| r.passed());
        let passed = pick.is_some();
        let report = reports.into_iter().nth(pick.unwrap_or(0));
        return Ok(CheckOutcome {
            mode: "manual",
            passed,
            report,
            attempts,
            reason: None,
        });
    }
    match checker.auto_certificate(&DEFAULT_C_GRID, args.d_cap, &orientations) {
        Ok(search) => {
            let attempts = search
                .trace
                .iter()
                .map(|(c, d, o, v)| Attempt {
                    c: *c,
                    d: *d,
                    orientation: *o,
                    verdict: v.clone(),
                })
                .collect();
            let passed = search.found.is_some();
            Ok(CheckOutcome {
                mode: "auto",
                passed,
                report: search.found.or(search.last),
                attempts,
                reason: None,
            })
        }
        // Structural failures of the sign conditions are verdicts, not errors.
        Err(e @ (ConditionsError::O0Nonempty { .. } | ConditionsError::EmptyO)) => Ok(CheckOutcome {
            mode: "auto",
            passed: false,
            report: None,
            attempts: vec![],
            reason: Some(e.to_string()),
        }),
        Err(e) => Err(conditions_error(e)),
    }
}

fn solve_stage(
    la: &LinearAnalysis,
    check: &CheckOutcome,
    tol: &Tolerances,
) -> Result<Option<SolveResult>, CliError> {
    let cert = check.report.as_ref().filter(|_| check.passed).and_then(|r| r.certificate());
    match solver::solve(la, cert.as_ref(), solve_options(tol)) {
        Ok(res) => Ok(Some(res)),
        Err(SolveError::NoCertificate) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn confirm(fs: &FullSystem, y0: &DVector<f64>, tol: &Tolerances) -> Result<WarmOutput, CliError> {
    let outcome = newton_solve(fs, y0, tol.tol_newton, DEFAULT_MAX_ITER)
        .map_err(|e| CliError::Numerical(e.to_string()))?
        .ok_or_else(|| CliError::Numerical("Newton did not converge from the warm start".into()))?;
    let (rec, bnd) = oracle::residuals(fs.problem(), &outcome.y)?;
    let distance = outcome
        .y
        .as_slice()
        .iter()
        .zip(y0.iter())
        .fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
    Ok(WarmOutput {
        iterations: outcome.iterations,
        recurrence_residual: rec,
        boundary_residual: bnd,
        distance,
        y: outcome.y,
    })
}

fn multistart(
    fs: &FullSystem,
    args: &OracleArgs,
    radius: f64,
    tol: &Tolerances,
) -> Result<MultistartReport, CliError> {
    if args.starts == 0 || !(radius > 0.0 && radius.is_finite()) {
        return Err(CliError::Input(format!(
            "need --starts > 0 and a positive --box, got {} and {radius}",
            args.starts
        )));
    }
    Ok(oracle::multistart(fs, args.starts, radius, args.seed, tol.tol_newton)?)
}

/// `2d` of an automatically found certificate, else [`FALLBACK_BOX`].
fn default_box(spec: &ProblemSpec, tol: &Tolerances) -> f64 {
    let Ok(la) = linear(spec, tol) else {
        return FALLBACK_BOX;
    };
    Checker::new(&la, check_options(tol))
        .auto_certificate(&DEFAULT_C_GRID, resbvp::conditions::DEFAULT_D_CAP, &Orientation::BOTH)
        .ok()
        .and_then(|s| s.found)
        .map_or(FALLBACK_BOX, |r| 2.0 * r.d)
}

/// `y` from a JSON report: a bare array, a top-level `y`, or `solution.y`.
fn read_warm(path: &Path, dim: usize) -> Result<DVector<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let y = [&value, &value["y"], &value["solution"]["y"]]
        .into_iter()
        .find_map(|v| v.as_array())
        .ok_or_else(|| CliError::Input(format!("{}: no `y` array found", path.display())))?;
    let y: Vec<f64> = y
        .iter()
        .map(|v| v.as_f64())
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Input(format!("{}: `y` must hold numbers", path.display())))?;
    if y.len() != dim {
        return Err(CliError::Input(format!(
            "{}: `y` has {} entries, the problem needs {dim}",
            path.display(),
            y.len()
        )));
    }
    Ok(DVector::from_vec(y))
}

fn example5(tol: &Tolerances) -> Result<Example5Output, CliError> {
    let la0 = linear(&golden::spec("0")?, tol)?;
    let sets = sign_sets(&la0.psi_last(), &la0.s_lag(), tol.tol_sign);
    let golden_report = golden::compare(&la0, &sets, 1e-12);
    let family = LogFamily::new(la0.a_bar(), 3.0, 0.5, 0.5);
    let spec = golden::spec(&family.expr)?;
    let la = linear(&spec, tol)?;
    let args = CertArgs {
        c: None,
        d: None,
        auto: true,
        orientation: crate::OrientationArg::Both,
        d_cap: resbvp::conditions::DEFAULT_D_CAP,
    };
    let check = certify(&la, &args, tol)?;
    let solution = solve_stage(&la, &check, tol)?;
    let confirmation = match &solution {
        Some(res) => Some(confirm(
            &FullSystem::new(&spec),
            &DVector::from_column_slice(res.y.as_slice()),
            tol,
        )?),
        None => None,
    };
    Ok(Example5Output {
        golden: golden_report,
        lambda: la0.report().lambda,
        sign_sets: sets,
        log_family: family,
        check,
        solution,
        confirmation,
    })
}

fn write_csv(path: &Path, y: &ScalarTrajectory) -> Result<(), CliError> {
    let mut text = String::from("t,y\n");
    for (t, v) in y.as_slice().iter().enumerate() {
        text.push_str(&format!("{t},{v:?}\n"));
    }
    fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn emit<T: Serialize>(out: &Output, human: &str, report: &T) -> Result<(), CliError> {
    let text = if out.json {
        let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
        s.push('\n');
        s
    } else {
        human.to_string()
    };
    match &out.out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
