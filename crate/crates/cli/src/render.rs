//! Plain-text reports.

use std::fmt::Write;

use resbvp::{LinearReport, MultistartReport, SignSets, SolveResult};

use crate::commands::{AllOutput, CheckOutcome, Example5Output, WarmOutput};

/// Rounds away last-digit noise so exact values print exactly.
fn num(v: f64) -> String {
    let r = (v * 1e12).round() / 1e12;
    if r == 0.0 {
        "0".into()
    } else if r.abs() >= 1e6 || r.abs() < 1e-4 {
        format!("{v:.6e}")
    } else {
        format!("{r}")
    }
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| num(*x)).collect();
    format!("({})", parts.join(", "))
}

fn matrix(rows: &[Vec<f64>]) -> String {
    let parts: Vec<String> = rows
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", parts.join(", "))
}

fn set(ix: &[usize]) -> String {
    format!("{{{}}}", ix.iter().map(usize::to_string).collect::<Vec<_>>().join(", "))
}

fn sign_sets(out: &mut String, sets: &SignSets) {
    let _ = writeln!(
        out,
        "O++ = {}  O+- = {}  O-+ = {}  O-- = {}  O0 = {}",
        set(&sets.opp),
        set(&sets.opm),
        set(&sets.omp),
        set(&sets.omm),
        set(&sets.o0)
    );
    if !sets.ambiguous.is_empty() {
        let _ = writeln!(out, "warning: sign classification is threshold-sensitive at t = {}", set(&sets.ambiguous));
    }
}

pub fn analysis(report: &LinearReport, sets: &SignSets) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Lambda = {}", matrix(&report.lambda));
    let _ = writeln!(out, "singular values of Lambda: {}", vector(&report.lambda_singular_values));
    let _ = writeln!(out, "u = {}  w = {}", vector(&report.u), vector(&report.w));
    let _ = writeln!(out, "{:>4}  {:<28} Psi(t)", "t", "S(t)");
    let s = report.s.values();
    let psi = report.psi.values();
    for (t, st) in s.iter().enumerate() {
        let p = psi.get(t).map_or(String::new(), |p| vector(p.as_slice()));
        let _ = writeln!(out, "{t:>4}  {:<28} {p}", vector(st.as_slice()));
    }
    let _ = writeln!(out, "|Psi|^2 = {}", num(report.psi_norm_sq));
    sign_sets(&mut out, sets);
    let _ = writeln!(
        out,
        "norm bound A = {} (largest probe {})",
        num(report.a_bar),
        num(report.a_bar_probe_lower)
    );
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn check(outcome: &CheckOutcome) -> String {
    let mut out = String::new();
    if let Some(reason) = &outcome.reason {
        let _ = writeln!(out, "no certificate: {reason}");
    }
    if outcome.mode == "auto" && !outcome.attempts.is_empty() {
        let shown = if outcome.passed { "found after" } else { "none in" };
        let _ = writeln!(out, "automatic search: {shown} {} attempts", outcome.attempts.len());
    }
    if let Some(report) = &outcome.report {
        if !outcome.passed && outcome.mode == "auto" {
            let _ = writeln!(out, "last attempt:");
        }
        out.push_str(&report.ledger());
    } else if outcome.reason.is_none() {
        let _ = writeln!(out, "verdict: FAIL");
    }
    out
}

fn solution(out: &mut String, res: &SolveResult) {
    let _ = writeln!(
        out,
        "alpha = {}  (bracket +-{}, r* = {}, q = {})",
        num(res.alpha),
        num(res.alpha_star),
        num(res.r_star),
        num(res.contraction_q)
    );
    let _ = writeln!(
        out,
        "residuals: recurrence {:.1e}  boundary {:.1e}  ({} bisection steps, {} auxiliary iterations)",
        res.recurrence_residual, res.boundary_residual, res.bisection_steps, res.aux_iterations
    );
    let _ = writeln!(out, "y = {}", vector(res.y.as_slice()));
    for note in &res.notes {
        let _ = writeln!(out, "note: {note}");
    }
}

pub fn solve(check_outcome: &CheckOutcome, res: Option<&SolveResult>) -> String {
    let mut out = check(check_outcome);
    match res {
        Some(res) => solution(&mut out, res),
        None => {
            let _ = writeln!(out, "not solved: no certificate");
        }
    }
    out
}

pub fn warm(w: &WarmOutput) -> String {
    format!(
        "Newton from warm start: {} iterations, moved {:.1e}\nresiduals: recurrence {:.1e}  boundary {:.1e}\ny = {}\n",
        w.iterations,
        w.distance,
        w.recurrence_residual,
        w.boundary_residual,
        vector(w.y.as_slice())
    )
}

pub fn multistart(m: &MultistartReport) -> String {
    let mut out = format!(
        "{} starts in [-{}, {}] (seed {}): {} converged, {} distinct\n",
        m.starts,
        num(m.box_radius),
        num(m.box_radius),
        m.seed,
        m.converged,
        m.solutions.len()
    );
    for s in &m.solutions {
        let _ = writeln!(
            out,
            "  start {:>4}: residuals {:.1e} / {:.1e}  y = {}",
            s.start_index,
            s.recurrence_residual,
            s.boundary_residual,
            vector(s.y.as_slice())
        );
    }
    out
}

pub fn example5(e: &Example5Output) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Lambda = {}", matrix(&e.lambda));
    sign_sets(&mut out, &e.sign_sets);
    let _ = writeln!(
        out,
        "reference bases: u x {}, w x {}",
        num(e.golden.u_scale),
        num(e.golden.w_scale)
    );
    for c in &e.golden.checks {
        let mark = if c.passed { '✓' } else { '✗' };
        let _ = writeln!(out, "  {mark} {:<10} error {:.1e}  {}", c.name, c.error, c.detail);
    }
    let f = &e.log_family;
    let _ = writeln!(
        out,
        "g = {}  (gamma = {}, d = {})",
        f.expr,
        num(f.gamma),
        num(f.d)
    );
    out.push_str(&check(&e.check));
    if let Some(res) = &e.solution {
        solution(&mut out, res);
    }
    if let Some(w) = &e.confirmation {
        let _ = writeln!(
            out,
            "oracle: {} Newton iterations from the solver output, moved {:.1e}",
            w.iterations, w.distance
        );
    }
    let _ = writeln!(out, "golden values: {}", if e.golden.passed() { "PASS" } else { "FAIL" });
    out
}

pub fn all(a: &AllOutput) -> String {
    let mut out = analysis(&a.analysis.analysis, &a.analysis.sign_sets);
    out.push('\n');
    out.push_str(&solve(&a.check, a.solution.as_ref()));
    if let Some(w) = &a.confirmation {
        let _ = writeln!(
            out,
            "oracle: {} Newton iterations from the solver output, moved {:.1e}",
            w.iterations, w.distance
        );
    }
    out.push('\n');
    out.push_str(&multistart(&a.multistart));
    out
}
