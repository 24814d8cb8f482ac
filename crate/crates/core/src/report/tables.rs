use std::path::Path;

use crate::dynamics::{MultiplierSet, PairContext};
use crate::euler_lagrange::ElReport;
use crate::expr::{self, SlotValues, Vocabulary};
use crate::problem::{param_value, Grid, HerglotzProblem, StateSamples};
use crate::symmetry::{InvarianceReport, NoetherReport};

use super::file::check_time_only;

/// Node-by-node table with a header row; `None` cells are written empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

/// Shortest decimal that parses back to the same f64.
pub fn format_real(v: f64) -> String {
    format!("{v:?}")
}

impl Table {
    /// One row per time, with only the `t` column filled.
    fn with_times(times: &[f64]) -> Self {
        Table {
            header: vec!["t".into()],
            rows: times.iter().map(|t| vec![Some(*t)]).collect(),
        }
    }

    fn push_column(&mut self, name: String, values: impl Fn(usize) -> Option<f64>) {
        self.header.push(name);
        for (d, row) in self.rows.iter_mut().enumerate() {
            row.push(values(d));
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv(&self, mut out: impl std::io::Write) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.map(format_real).unwrap_or_default()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }

    pub fn read_csv(input: impl std::io::Read) -> Result<Self, String> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| e.to_string())?;
            let row = rec
                .iter()
                .map(|cell| {
                    let cell = cell.trim();
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| format!("row {}: `{cell}` is not a number", i + 1))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Table { header, rows })
    }
}

/// t, the jets x{k}_{c} for k = 0..n, and z on the nodes of [a, b].
pub fn trajectory_table(ctx: &PairContext<'_>) -> Table {
    let (n, m) = (ctx.problem.n(), ctx.problem.m());
    let start = ctx.grid.start();
    let mut table = Table::with_times(&ctx.grid.domain_times());
    for c in 0..m {
        table.push_column(format!("x0_{}", c + 1), |d| {
            Some(ctx.pair.x.get(start + d, c))
        });
    }
    for k in 1..=n {
        for c in 0..m {
            table.push_column(format!("x{k}_{}", c + 1), |d| {
                Some(ctx.jets.node(start + d).get(k, c))
            });
        }
    }
    table.push_column("z".into(), |d| Some(ctx.pair.z[d]));
    table
}

/// t, psi_z, phi{k}_{c} for k = 1..n, and H.
pub fn multiplier_table(ctx: &PairContext<'_>, mult: &MultiplierSet, hamiltonian: &[f64]) -> Table {
    let (n, m) = (ctx.problem.n(), ctx.problem.m());
    let start = ctx.grid.start();
    let mut table = Table::with_times(&ctx.grid.domain_times());
    table.push_column("psi_z".into(), |d| Some(mult.psi_z[d]));
    for k in 1..=n {
        for c in 0..m {
            table.push_column(format!("phi{k}_{}", c + 1), |d| {
                Some(mult.phi(k, start + d, c))
            });
        }
    }
    table.push_column("H".into(), |d| Some(hamiltonian[d]));
    table
}

/// t, el_early_{c} on [a, b − τ] and el_late_{c} on [b − τ, b].
pub fn residual_table(grid: &Grid, report: &ElReport) -> Table {
    let m = report.m();
    let mut table = Table::with_times(&grid.domain_times());
    let early_len = report.residual_early.len() / m;
    let late_start = report.late_start();
    for c in 0..m {
        table.push_column(format!("el_early_{}", c + 1), |d| {
            (d < early_len).then(|| report.residual_early[d * m + c])
        });
    }
    for c in 0..m {
        table.push_column(format!("el_late_{}", c + 1), |d| {
            d.checked_sub(late_start)
                .map(|i| report.residual_late[i * m + c])
        });
    }
    table
}

/// t and one C_{I}_{J} column per current.
pub fn current_table(grid: &Grid, report: &NoetherReport) -> Table {
    let mut table = Table::with_times(&grid.domain_times());
    for c in &report.currents {
        table.push_column(c.label(), |d| Some(c.values[d]));
    }
    table
}

/// t, eq1_{s} and eq2_{s} per test function s.
pub fn invariance_table(grid: &Grid, report: &InvarianceReport) -> Table {
    let mut table = Table::with_times(&grid.domain_times());
    for (s, r) in report.tests.iter().enumerate() {
        table.push_column(format!("eq1_{}", s + 1), |d| Some(r.eq1[d]));
        table.push_column(format!("eq2_{}", s + 1), |d| Some(r.eq2[d]));
    }
    table
}

/// Where `--x-from` takes the state from.
#[derive(Debug, Clone, PartialEq)]
pub enum XSource {
    /// A CSV with `t` and `x0_1..x0_m`, on the nodes of [a, b] or of [a − τ, b].
    Csv(std::path::PathBuf),
    /// One expression in `t` (and `a`, `b`, `tau`) per component, used on (a, b].
    Expr(Vec<String>),
}

impl std::str::FromStr for XSource {
    type Err = String;

    /// `expr:<e1>;<e2>…` or a path to a CSV file.
    fn from_str(s: &str) -> Result<Self, String> {
        match s.strip_prefix("expr:") {
            Some(rest) => Ok(XSource::Expr(
                rest.split(';').map(|e| e.trim().to_string()).collect(),
            )),
            None if s.is_empty() => Err("empty trajectory source".into()),
            None => Ok(XSource::Csv(s.into())),
        }
    }
}

/// Binds `t`, `a`, `b`, `tau` for trajectory expressions.
struct TimeEnv {
    t: f64,
    params: (f64, f64, f64),
}

impl SlotValues for TimeEnv {
    fn value(&self, slot: expr::SlotId) -> Option<f64> {
        match slot {
            expr::SlotId::Time => Some(self.t),
            expr::SlotId::Param(p) => {
                Some(param_value(p, self.params.0, self.params.1, self.params.2))
            }
            _ => None,
        }
    }
}

/// Samples of x on the whole grid; the history comes from the problem
/// unless the CSV covers [a − τ, a] too.
pub fn read_state(
    problem: &HerglotzProblem,
    grid: &Grid,
    source: &XSource,
) -> Result<StateSamples, String> {
    let m = problem.m();
    match source {
        XSource::Expr(srcs) => {
            if srcs.len() != m {
                return Err(format!(
                    "need {m} trajectory expressions, found {}",
                    srcs.len()
                ));
            }
            let exprs = srcs
                .iter()
                .map(|s| {
                    let e = expr::parse(s, &Vocabulary::history())
                        .map_err(|e| format!("`{s}`: {e}"))?;
                    check_time_only(&e)?;
                    Ok(e)
                })
                .collect::<Result<Vec<_>, String>>()?;
            let params = (problem.a(), problem.b(), problem.tau());
            let failure = std::cell::RefCell::new(None);
            let x = StateSamples::admissible(problem, grid, |t| {
                exprs
                    .iter()
                    .map(|e| match e.eval(&TimeEnv { t, params }) {
                        Ok(v) => v,
                        Err(err) => {
                            failure.borrow_mut().get_or_insert_with(|| {
                                format!("cannot evaluate at t={t:?}: {err}")
                            });
                            f64::NAN
                        }
                    })
                    .collect()
            });
            match failure.into_inner() {
                Some(f) => Err(f),
                None => Ok(x),
            }
        }
        XSource::Csv(path) => {
            let file = std::fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let table = Table::read_csv(file).map_err(|e| format!("{}: {e}", path.display()))?;
            state_from_table(problem, grid, &table).map_err(|e| format!("{}: {e}", path.display()))
        }
    }
}

/// Rebuild x from the `t` and `x0_{c}` columns of a table.
pub fn state_from_table(
    problem: &HerglotzProblem,
    grid: &Grid,
    table: &Table,
) -> Result<StateSamples, String> {
    let m = problem.m();
    let times = table.column("t").ok_or("missing column `t`")?;
    let cols = (0..m)
        .map(|c| {
            let name = format!("x0_{}", c + 1);
            table
                .column(&name)
                .ok_or(format!("missing column `{name}`"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let first = match times.len() {
        len if len == grid.node_count() => 0,
        len if len == grid.steps + 1 => grid.start(),
        len => {
            return Err(format!(
                "expected {} rows (nodes of [a, b]) or {} (with the history), found {len}",
                grid.steps + 1,
                grid.node_count()
            ))
        }
    };
    let mut values = Vec::with_capacity(grid.node_count() * m);
    for i in 0..first {
        values.extend((0..m).map(|c| problem.history_jet(0, c, grid.time(i))));
    }
    for (row, t) in times.iter().enumerate() {
        let node = first + row;
        let expected = grid.time(node);
        let t = t.ok_or(format!("row {}: empty `t`", row + 1))?;
        if (t - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(format!(
                "row {}: t={t:?} is not the grid node {expected:?}",
                row + 1
            ));
        }
        for (c, col) in cols.iter().enumerate() {
            values.push(col[row].ok_or(format!("row {}: empty `x0_{}`", row + 1, c + 1))?);
        }
    }
    Ok(StateSamples::from_values(m, values))
}

/// Write a table to `dir/name`.
pub(crate) fn write_table(
    dir: &Path,
    name: &str,
    table: &Table,
) -> std::io::Result<std::path::PathBuf> {
    let path = dir.join(name);
    let file = std::fs::File::create(&path)?;
    table
        .write_csv(std::io::BufWriter::new(file))
        .map_err(std::io::Error::other)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_grid;

    #[test]
    fn reals_round_trip_through_csv() {
        let values = [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            1e300,
            std::f64::consts::PI,
            0.0,
            -0.0,
        ];
        let table = Table {
            header: vec!["t".into(), "v".into()],
            rows: values.iter().map(|v| vec![Some(*v), None]).collect(),
        };
        let back = Table::read_csv(table.to_csv_string().as_bytes()).unwrap();
        for (a, b) in table.rows.iter().zip(&back.rows) {
            assert_eq!(a[0].unwrap().to_bits(), b[0].unwrap().to_bits());
            assert_eq!(b[1], None);
        }
    }

    #[test]
    fn state_from_expressions_and_tables() {
        let p =
            HerglotzProblem::parse(1, 2, (0.0, 1.0, 0.5), 1.0, "x0_1*x0_2", &["1", "t"]).unwrap();
        let g = make_grid(0.0, 1.0, 0.5, 0.1).unwrap();
        let src: XSource = "expr:1 + t^2; t".parse().unwrap();
        let x = read_state(&p, &g, &src).unwrap();
        assert_eq!(x.get(g.end(), 0), 2.0);
        assert_eq!(x.get(0, 1), -0.5);

        let mut table = Table::with_times(&g.domain_times());
        table.push_column("x0_1".into(), |d| Some(x.get(g.start() + d, 0)));
        table.push_column("x0_2".into(), |d| Some(x.get(g.start() + d, 1)));
        assert_eq!(state_from_table(&p, &g, &table).unwrap(), x);

        table.rows.pop();
        assert!(state_from_table(&p, &g, &table).is_err());
        assert!(read_state(&p, &g, &"expr:x0_1; t".parse().unwrap()).is_err());
        assert!(read_state(&p, &g, &"expr:t".parse().unwrap()).is_err());
    }
}
