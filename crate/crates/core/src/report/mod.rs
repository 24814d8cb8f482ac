//! Problem files, result tables and the commands behind the `herglotz` binary.
//!
//! Every command returns [`RunArtifacts`] whose status maps to a stable exit
//! code: 0 pass, 1 usage or parse error, 2 validation error, 3 failed check,
//! 4 numerical failure.

mod file;
mod plot;
mod tables;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dynamics::{
    compute_hamiltonian, compute_multipliers, DynamicsError, MultiplierSet, PairContext,
};
use crate::euler_lagrange::{el_residual, verdict_trimmed, ExtremalVerdict};
use crate::problem::{AdmissibilityError, StateSamples};
use crate::reduction::{integrate_reduced, lift, project_z, reduce, ReductionError};
use crate::solver::{solve_extremal, Mode, SolveError};
use crate::symmetry::{
    check_semi_invariance, constancy_report, noether_currents, GaugeGroup, GaugeTestFunction,
    SymmetryError,
};

pub use file::{Checks, FileError, FileIssue, GridSection, Loaded, ProblemFile, ProblemSection};
pub use plot::gnuplot_script;
pub use tables::{
    current_table, format_real, invariance_table, multiplier_table, read_state, residual_table,
    state_from_table, trajectory_table, Table, XSource,
};

/// Test-function degree when the group lists none.
pub const DEFAULT_TEST_DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass,
    Usage,
    Invalid,
    CheckFailed,
    Numerical,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Pass => 0,
            ExitStatus::Usage => 1,
            ExitStatus::Invalid => 2,
            ExitStatus::CheckFailed => 3,
            ExitStatus::Numerical => 4,
        }
    }

    fn verdict(pass: bool) -> Self {
        if pass {
            ExitStatus::Pass
        } else {
            ExitStatus::CheckFailed
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{message}")]
pub struct CommandError {
    pub status: ExitStatus,
    pub message: String,
}

impl CommandError {
    fn new(status: ExitStatus, message: impl std::fmt::Display) -> Self {
        CommandError {
            status,
            message: message.to_string(),
        }
    }
}

impl From<FileError> for CommandError {
    fn from(e: FileError) -> Self {
        let status = match e {
            FileError::Parse(_) => ExitStatus::Usage,
            FileError::Invalid(_) => ExitStatus::Invalid,
        };
        CommandError::new(status, e)
    }
}

impl From<AdmissibilityError> for CommandError {
    fn from(e: AdmissibilityError) -> Self {
        CommandError::new(
            ExitStatus::Invalid,
            format!("trajectory is not admissible: {e}"),
        )
    }
}

impl From<DynamicsError> for CommandError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Admissibility(a) => a.into(),
            other => CommandError::new(ExitStatus::Numerical, other),
        }
    }
}

impl From<SolveError> for CommandError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::BadOptions(_) => CommandError::new(ExitStatus::Invalid, e),
            SolveError::Diverged { .. } => CommandError::new(ExitStatus::Numerical, e),
            SolveError::Dynamics(d) => d.into(),
        }
    }
}

impl From<SymmetryError> for CommandError {
    fn from(e: SymmetryError) -> Self {
        let status = match e {
            SymmetryError::Dimension { .. } | SymmetryError::Formula(_) => ExitStatus::Invalid,
            _ => ExitStatus::Numerical,
        };
        CommandError::new(status, e)
    }
}

impl From<ReductionError> for CommandError {
    fn from(e: ReductionError) -> Self {
        match e {
            ReductionError::NoDelay | ReductionError::Misaligned => {
                CommandError::new(ExitStatus::Invalid, e)
            }
            ReductionError::Linkage { .. } => CommandError::new(ExitStatus::CheckFailed, e),
            ReductionError::Dynamics(d) => d.into(),
        }
    }
}

/// Outcome of one command: status, human-readable summary and CSV tables.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub status: ExitStatus,
    pub summary: String,
    /// `(file name, table)`.
    pub tables: Vec<(String, Table)>,
}

impl RunArtifacts {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Write the tables, `summary.txt` and `plot.gp` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        for (name, table) in &self.tables {
            out.push(tables::write_table(dir, name, table)?);
        }
        let summary = dir.join("summary.txt");
        std::fs::write(&summary, &self.summary)?;
        out.push(summary);
        if !self.tables.is_empty() {
            let refs: Vec<(String, &Table)> =
                self.tables.iter().map(|(n, t)| (n.clone(), t)).collect();
            let plot = dir.join("plot.gp");
            std::fs::write(&plot, gnuplot_script(&refs))?;
            out.push(plot);
        }
        Ok(out)
    }
}

pub fn load_str(text: &str) -> Result<Loaded, CommandError> {
    Ok(ProblemFile::from_json(text)?.load()?)
}

pub fn load_path(path: &Path) -> Result<Loaded, CommandError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CommandError::new(ExitStatus::Usage, format!("{}: {e}", path.display())))?;
    load_str(&text)
}

/// x from `--x-from`, or the history value at a continued over (a, b].
pub fn state_for(loaded: &Loaded, source: Option<&XSource>) -> Result<StateSamples, CommandError> {
    let (problem, grid) = (&loaded.problem, &loaded.grid);
    let x = match source {
        Some(s) => {
            read_state(problem, grid, s).map_err(|e| CommandError::new(ExitStatus::Usage, e))?
        }
        None => {
            let at_a: Vec<f64> = (0..problem.m())
                .map(|c| problem.history_jet(0, c, problem.a()))
                .collect();
            StateSamples::admissible(problem, grid, |_| at_a.clone())
        }
    };
    x.check_admissible(problem, grid)?;
    Ok(x)
}

fn group_of(loaded: &Loaded) -> Result<&GaugeGroup, CommandError> {
    loaded.group.as_ref().ok_or_else(|| {
        CommandError::new(
            ExitStatus::Invalid,
            "/group: this command needs a group section",
        )
    })
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn verdict_line(verdict: &ExtremalVerdict, tol: f64) -> String {
    match verdict.worst {
        Some(w) => format!(
            "extremal: {} (worst residual {:.3e} at {}, tol {tol:e})",
            pass_word(verdict.extremal),
            w.value.abs(),
            w.location
        ),
        None => format!("extremal: {} (no residuals)", pass_word(verdict.extremal)),
    }
}

fn pair_tables(ctx: &PairContext<'_>, mult: &MultiplierSet) -> Vec<(String, Table)> {
    let hamiltonian = compute_hamiltonian(ctx, mult);
    vec![
        ("trajectory.csv".into(), trajectory_table(ctx)),
        (
            "multipliers.csv".into(),
            multiplier_table(ctx, mult, &hamiltonian),
        ),
    ]
}

fn header(loaded: &Loaded) -> String {
    let (p, g) = (&loaded.problem, &loaded.grid);
    format!(
        "problem: n={} m={} [a, b]=[{:?}, {:?}] tau={:?} gamma={:?} L={}\ngrid: h={:?} delay steps={} steps={}\n",
        p.n(),
        p.m(),
        p.a(),
        p.b(),
        p.tau(),
        p.gamma(),
        p.lagrangian(),
        g.h,
        g.delay_steps,
        g.steps
    )
}

pub fn cmd_validate(loaded: &Loaded) -> RunArtifacts {
    let mut summary = header(loaded);
    if let Some(g) = &loaded.group {
        let _ = writeln!(
            summary,
            "group: q={} d={} binding={:?}",
            g.q(),
            g.d(),
            g.binding()
        );
    }
    summary.push_str("valid\n");
    RunArtifacts {
        status: ExitStatus::Pass,
        summary,
        tables: Vec::new(),
    }
}

pub fn cmd_simulate(
    loaded: &Loaded,
    source: Option<&XSource>,
    check_reduction: bool,
) -> Result<RunArtifacts, CommandError> {
    let (problem, grid) = (&loaded.problem, &loaded.grid);
    let x = state_for(loaded, source)?;
    let ctx = PairContext::from_x(problem, grid, &x)?;
    let mut summary = header(loaded);
    let _ = writeln!(summary, "z(b) = {:?}", ctx.pair.z_end());
    let mut status = ExitStatus::Pass;
    if check_reduction {
        let reduced = reduce(problem, grid)?;
        let lifted = lift(problem, grid, &reduced, &x)?;
        let z = project_z(&reduced, &integrate_reduced(problem, &reduced, &lifted)?);
        let gap = z
            .iter()
            .zip(&ctx.pair.z)
            .map(|(r, d)| (r - d).abs())
            .fold(0.0, f64::max);
        let tol = loaded.file.checks.reduction_tol;
        let pass = gap <= tol;
        let _ = writeln!(
            summary,
            "reduction: {} blocks{}, max |dz| = {gap:.3e} (tol {tol:e}), {}",
            reduced.blocks,
            if reduced.padded() {
                " (last block padded)"
            } else {
                ""
            },
            pass_word(pass)
        );
        status = ExitStatus::verdict(pass);
    }
    Ok(RunArtifacts {
        status,
        summary,
        tables: vec![("trajectory.csv".into(), trajectory_table(&ctx))],
    })
}

pub fn cmd_solve(loaded: &Loaded) -> Result<RunArtifacts, CommandError> {
    let (problem, grid) = (&loaded.problem, &loaded.grid);
    let opts = &loaded.file.solver;
    let r = solve_extremal(problem, grid, opts)?;
    let ctx = PairContext::new(problem, grid, r.pair.clone())?;
    let mut summary = header(loaded);
    let mode = match opts.mode {
        Mode::Minimize => "minimize",
        Mode::Maximize => "maximize",
    };
    let _ = writeln!(
        summary,
        "solver: {mode}, {} iterations, gradient {:.3e} (tol {:e}), converged: {}",
        r.iterations,
        r.grad_norm,
        opts.tol_grad,
        pass_word(r.converged)
    );
    let _ = writeln!(summary, "z(b) = {:?}", r.objective);
    let _ = writeln!(
        summary,
        "EL max early {:.3e}, late {:.3e}, transversality {:.3e}",
        r.el_report.max_early, r.el_report.max_late, r.el_report.max_transversality
    );
    let _ = writeln!(summary, "{}", verdict_line(&r.certificate, opts.tol_el));
    let mut tables = pair_tables(&ctx, &r.multipliers);
    tables.push(("residuals.csv".into(), residual_table(grid, &r.el_report)));
    Ok(RunArtifacts {
        status: ExitStatus::verdict(r.converged && r.certificate.extremal),
        summary,
        tables,
    })
}

pub fn cmd_el_check(
    loaded: &Loaded,
    source: Option<&XSource>,
) -> Result<RunArtifacts, CommandError> {
    let (problem, grid) = (&loaded.problem, &loaded.grid);
    let checks = &loaded.file.checks;
    let x = state_for(loaded, source)?;
    let ctx = PairContext::from_x(problem, grid, &x)?;
    let mult = compute_multipliers(&ctx)?;
    let report = el_residual(&ctx, &mult)?;
    let verdict = verdict_trimmed(
        &report,
        checks.el_tol,
        checks.transversality,
        checks.el_margin,
    );
    let mut summary = header(loaded);
    let _ = writeln!(
        summary,
        "EL max early {:.3e}, late {:.3e}, transversality {:.3e}",
        report.max_early, report.max_late, report.max_transversality
    );
    if let Some(gap) = report.junction_gap {
        let _ = writeln!(summary, "junction gap {gap:.3e}");
    }
    let _ = writeln!(summary, "{}", verdict_line(&verdict, checks.el_tol));
    let mut tables = pair_tables(&ctx, &mult);
    tables.push(("residuals.csv".into(), residual_table(grid, &report)));
    Ok(RunArtifacts {
        status: ExitStatus::verdict(verdict.extremal),
        summary,
        tables,
    })
}

/// The seeded test functions of the invariance check.
pub fn test_functions(loaded: &Loaded, group: &GaugeGroup) -> Vec<GaugeTestFunction> {
    let checks = &loaded.file.checks;
    let degrees = loaded
        .file
        .group
        .as_ref()
        .map(|g| g.p_test_degrees.clone())
        .filter(|d| !d.is_empty())
        .unwrap_or_else(|| vec![DEFAULT_TEST_DEGREE]);
    let (a, b) = (loaded.problem.a(), loaded.problem.b());
    (0..checks.test_functions)
        .map(|i| {
            let degree = degrees[i % degrees.len()];
            GaugeTestFunction::random(
                checks.test_seed.wrapping_add(i as u64),
                group.d(),
                degree,
                a,
                b,
            )
        })
        .collect()
}

pub fn cmd_invariance(
    loaded: &Loaded,
    source: Option<&XSource>,
) -> Result<RunArtifacts, CommandError> {
    let (problem, grid) = (&loaded.problem, &loaded.grid);
    let group = group_of(loaded)?;
    let x = state_for(loaded, source)?;
    let ctx = PairContext::from_x(problem, grid, &x)?;
    let tests = test_functions(loaded, group);
    let report = check_semi_invariance(&ctx, group, &tests)?;
    let tol = loaded.file.checks.invariance_tol;
    let pass = report.passes(tol);
    let mut summary = header(loaded);
    for (i, t) in report.tests.iter().enumerate() {
        let _ = writeln!(
            summary,
            "test {}: EQ1 max {:.3e}, EQ2 max {:.3e}  [{}]",
            i + 1,
            t.max_eq1,
            t.max_eq2,
            t.function
        );
    }
    let _ = writeln!(
        summary,
        "EQ1 max {:.3e}, EQ2 max {:.3e}, {} (tol {tol:e})",
        report.max_eq1,
        report.max_eq2,
        pass_word(pass)
    );
    Ok(RunArtifacts {
        status: ExitStatus::verdict(pass),
        summary,
        tables: vec![
            ("trajectory.csv".into(), trajectory_table(&ctx)),
            ("invariance.csv".into(), invariance_table(grid, &report)),
        ],
    })
}

/// Currents along `--x-from`, or along the solver's extremal when no trajectory is given.
pub fn cmd_currents(
    loaded: &Loaded,
    source: Option<&XSource>,
) -> Result<RunArtifacts, CommandError> {
    let (problem, grid) = (&loaded.problem, &loaded.grid);
    let checks = &loaded.file.checks;
    let group = group_of(loaded)?;
    let mut summary = header(loaded);
    let (ctx, mult, report, verdict, tol_el) = match source {
        None => {
            let r = solve_extremal(problem, grid, &loaded.file.solver)?;
            let _ = writeln!(
                summary,
                "solver: {} iterations, gradient {:.3e}, converged: {}",
                r.iterations,
                r.grad_norm,
                pass_word(r.converged)
            );
            let ctx = PairContext::new(problem, grid, r.pair)?;
            let verdict = ExtremalVerdict {
                extremal: r.certificate.extremal && r.converged,
                worst: r.certificate.worst,
            };
            (
                ctx,
                r.multipliers,
                r.el_report,
                verdict,
                loaded.file.solver.tol_el,
            )
        }
        Some(_) => {
            let x = state_for(loaded, source)?;
            let ctx = PairContext::from_x(problem, grid, &x)?;
            let mult = compute_multipliers(&ctx)?;
            let report = el_residual(&ctx, &mult)?;
            let verdict = verdict_trimmed(
                &report,
                checks.el_tol,
                checks.transversality,
                checks.el_margin,
            );
            (ctx, mult, report, verdict, checks.el_tol)
        }
    };
    let _ = writeln!(summary, "{}", verdict_line(&verdict, tol_el));
    let currents = noether_currents(&ctx, group, &mult, checks.formula)?;
    let constancy = constancy_report(&currents, &verdict, checks.constancy_tol);
    for c in &constancy {
        let _ = writeln!(
            summary,
            "{}: deviation {:.3e} (tol {:e}), {}",
            c.label,
            c.deviation,
            checks.constancy_tol,
            if c.constant {
                "constant"
            } else {
                "not certified constant"
            }
        );
    }
    let pass = constancy.iter().all(|c| c.constant);
    let _ = writeln!(summary, "currents: {}", pass_word(pass));
    let mut tables = pair_tables(&ctx, &mult);
    tables.push(("residuals.csv".into(), residual_table(grid, &report)));
    tables.push(("currents.csv".into(), current_table(grid, &currents)));
    Ok(RunArtifacts {
        status: ExitStatus::verdict(pass),
        summary,
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GROWTH: &str = r#"{
        "problem": {"n": 1, "m": 1, "a": 0, "b": 2, "tau": 1, "gamma": 1,
                    "lagrangian": "xt0*z", "history": ["1"]},
        "grid": {"target_h": 0.01}
    }"#;

    #[test]
    fn pointers_locate_errors() {
        let e = load_str(r#"{"problem": {"n": "one"}}"#).unwrap_err();
        assert_eq!(e.status, ExitStatus::Usage);
        assert!(e.message.starts_with("/problem/n:"), "{}", e.message);

        let e = load_str("{ not json").unwrap_err();
        assert_eq!(e.status, ExitStatus::Usage);

        let bad_tau = GROWTH.replace("\"tau\": 1", "\"tau\": 2");
        let e = load_str(&bad_tau).unwrap_err();
        assert_eq!(e.status, ExitStatus::Invalid);
        assert!(e.message.starts_with("/problem/tau:"), "{}", e.message);

        let bad_history = GROWTH.replace("[\"1\"]", "[\"1 +\"]");
        let e = load_str(&bad_history).unwrap_err();
        assert!(
            e.message.starts_with("/problem/history/0:"),
            "{}",
            e.message
        );

        let extra = GROWTH.replace("\"grid\"", "\"gird\": 1, \"grid\"");
        assert_eq!(load_str(&extra).unwrap_err().status, ExitStatus::Usage);
    }

    #[test]
    fn simulate_constant_state() {
        let loaded = load_str(GROWTH).unwrap();
        let run = cmd_simulate(&loaded, None, true).unwrap();
        assert_eq!(run.status, ExitStatus::Pass);
        let z = run.table("trajectory.csv").unwrap().column("z").unwrap();
        let zb = z.last().unwrap().unwrap();
        assert!((zb - 2f64.exp()).abs() < 1e-8, "{zb}");
    }

    #[test]
    fn zero_delay_has_no_reduction() {
        let loaded = load_str(&GROWTH.replace("\"tau\": 1", "\"tau\": 0")).unwrap();
        let e = cmd_simulate(&loaded, None, true).unwrap_err();
        assert_eq!(e.status, ExitStatus::Invalid);
        assert!(e.message.contains("direct mode"));
    }
}
