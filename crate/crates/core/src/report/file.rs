use serde::{Deserialize, Serialize};

use crate::expr::{Expr, SlotId};
use crate::problem::{make_grid, Diagnostic, Grid, HerglotzProblem, ProblemError, ProblemSpec};
use crate::solver::SolveOptions;
use crate::symmetry::{check_identity_at_zero, CurrentFormula, GaugeGroup, GroupError, GroupSpec};

/// A problem file: the problem, its grid, and optional solver, group and check settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub problem: ProblemSection,
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    #[serde(default)]
    pub checks: Checks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n: usize,
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub gamma: f64,
    pub lagrangian: String,
    pub history: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub target_h: f64,
}

/// Tolerances and sampling settings of the verification commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Euler–Lagrange residual tolerance of `el-check`.
    pub el_tol: f64,
    /// Nodes skipped at both ends of each branch by `el-check`.
    pub el_margin: usize,
    /// Whether `el-check` also requires the transversality conditions.
    pub transversality: bool,
    pub invariance_tol: f64,
    /// Number of random gauge test functions.
    pub test_functions: usize,
    pub test_seed: u64,
    pub constancy_tol: f64,
    pub formula: CurrentFormula,
    pub reduction_tol: f64,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            el_tol: 1e-3,
            el_margin: 0,
            transversality: true,
            invariance_tol: 1e-8,
            test_functions: 5,
            test_seed: 1,
            constancy_tol: 1e-6,
            formula: CurrentFormula::General,
            reduction_tol: 1e-12,
        }
    }
}

/// A file-level problem: position as a JSON pointer plus a message.
#[derive(Debug, Clone, PartialEq)]
pub struct FileIssue {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for FileIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let pointer = if self.pointer.is_empty() {
            "/"
        } else {
            &self.pointer
        };
        write!(f, "{pointer}: {}", self.message)
    }
}

/// Why a file could not be read.
#[derive(Debug, Clone, PartialEq)]
pub enum FileError {
    /// Not JSON, or JSON not matching the schema.
    Parse(FileIssue),
    /// Well-formed, but an expression or hypothesis is rejected.
    Invalid(Vec<FileIssue>),
}

impl std::fmt::Display for FileError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FileError::Parse(issue) => write!(f, "{issue}"),
            FileError::Invalid(issues) => {
                for (i, issue) in issues.iter().enumerate() {
                    if i > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{issue}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for FileError {}

/// serde path to JSON pointer (RFC 6901).
fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn issue(pointer: impl Into<String>, message: impl std::fmt::Display) -> FileIssue {
    FileIssue {
        pointer: pointer.into(),
        message: message.to_string(),
    }
}

fn diagnostic_pointer(d: &Diagnostic) -> String {
    match d {
        Diagnostic::OrderZero => "/problem/n".into(),
        Diagnostic::DimensionZero => "/problem/m".into(),
        Diagnostic::NonFinite(what) => format!("/problem/{what}"),
        Diagnostic::EmptyInterval => "/problem/b".into(),
        Diagnostic::DelayRange => "/problem/tau".into(),
        Diagnostic::GaugeSlotInLagrangian(_) => "/problem/lagrangian".into(),
        Diagnostic::SlotNotAllowed { field, .. } => {
            match field.strip_prefix("history component ") {
                Some(j) => format!(
                    "/problem/history/{}",
                    j.parse::<usize>().map_or(0, |j| j - 1)
                ),
                None => "/problem/lagrangian".into(),
            }
        }
        Diagnostic::HistoryCount { .. } => "/problem/history".into(),
        Diagnostic::HistoryNotEvaluable { comp, .. } => format!("/problem/history/{comp}"),
    }
}

fn parse_error_pointer(field: &str) -> String {
    match field
        .strip_prefix("history[")
        .and_then(|s| s.strip_suffix(']'))
    {
        Some(j) => format!("/problem/history/{j}"),
        None => format!("/problem/{field}"),
    }
}

fn group_error_pointer(field: &str) -> String {
    match field.split_once('[') {
        Some((name, rest)) => format!("/group/{name}/{}", rest.trim_end_matches(']')),
        None => format!("/group/{field}"),
    }
}

fn identity_pointer(what: &str) -> String {
    match what
        .strip_prefix("X_")
        .and_then(|c| c.parse::<usize>().ok())
    {
        Some(c) => format!("/group/X/{}", c - 1),
        None if what == "Z" => "/group/Z".into(),
        None => "/group/T".into(),
    }
}

/// A problem file with every part built and checked.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ProblemFile,
    pub problem: HerglotzProblem,
    pub grid: Grid,
    pub group: Option<GaugeGroup>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, FileError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_of(e.path());
            FileError::Parse(issue(pointer, e.inner()))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    /// Parse every expression, validate the problem, build the grid and the group.
    pub fn load(&self) -> Result<Loaded, FileError> {
        let p = &self.problem;
        let history: Vec<&str> = p.history.iter().map(String::as_str).collect();
        let spec = ProblemSpec::parse(
            p.n,
            p.m,
            (p.a, p.b, p.tau),
            p.gamma,
            &p.lagrangian,
            &history,
        )
        .map_err(|e| match e {
            ProblemError::Parse { field, source } => {
                FileError::Invalid(vec![issue(parse_error_pointer(&field), source)])
            }
            other => FileError::Invalid(vec![issue("/problem", other)]),
        })?;
        let diags = spec.validate();
        if !diags.is_empty() {
            return Err(FileError::Invalid(
                diags
                    .iter()
                    .map(|d| issue(diagnostic_pointer(d), d))
                    .collect(),
            ));
        }
        let problem = HerglotzProblem::new(spec)
            .map_err(|e| FileError::Invalid(vec![issue("/problem", e)]))?;
        let mut issues = Vec::new();
        if let Err(e) = self.solver.validate(p.m) {
            issues.push(issue("/solver", e));
        }
        let grid = make_grid(p.a, p.b, p.tau, self.grid.target_h)
            .map_err(|e| issues.push(issue("/grid/target_h", e)))
            .ok();
        let group = match &self.group {
            None => None,
            Some(spec) => match GaugeGroup::parse(&problem, spec) {
                Ok(group) => {
                    if let Some(v) = check_identity_at_zero(&problem, &group, 16)
                        .into_iter()
                        .next()
                    {
                        let message = if v.what == "dT/dt" {
                            format!("dT/dt = {:?} is not positive near p = 0", v.value)
                        } else {
                            format!(
                                "{} differs from the identity by {:e} at p = 0",
                                v.what, v.value
                            )
                        };
                        issues.push(issue(identity_pointer(&v.what), message));
                    }
                    Some(group)
                }
                Err(GroupError::Parse { field, source }) => {
                    issues.push(issue(group_error_pointer(&field), source));
                    None
                }
                Err(e @ GroupError::Shape(_)) => {
                    issues.push(issue("/group", e));
                    None
                }
            },
        };
        if !issues.is_empty() {
            return Err(FileError::Invalid(issues));
        }
        Ok(Loaded {
            file: self.clone(),
            problem,
            grid: grid.expect("grid errors are reported above"),
            group,
        })
    }
}

/// Parse a trajectory expression for `--x-from`: only `t` and `a`, `b`, `tau` may appear.
pub(crate) fn check_time_only(e: &Expr) -> Result<(), String> {
    for s in e.slots() {
        if !matches!(s, SlotId::Time | SlotId::Param(_)) {
            return Err(format!("`{s}` is not allowed in a trajectory expression"));
        }
    }
    Ok(())
}
