use std::fmt::Write;

use super::tables::Table;

/// A gnuplot script drawing every column of each CSV against `t`, one PNG per table.
pub fn gnuplot_script(tables: &[(String, &Table)]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set datafile missing ''\n");
    s.push_str("set terminal pngcairo size 960,600\n");
    s.push_str("set xlabel 't'\n");
    s.push_str("set grid\n");
    s.push_str("set key outside right\n");
    for (file, table) in tables {
        let stem = file.strip_suffix(".csv").unwrap_or(file);
        let Some(t) = table.header.iter().position(|h| h == "t") else {
            continue;
        };
        let series: Vec<(usize, &String)> = table
            .header
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != t)
            .collect();
        if series.is_empty() {
            continue;
        }
        let _ = writeln!(s, "\nset output '{stem}.png'");
        let _ = writeln!(s, "set title '{stem}' noenhanced");
        for (i, (j, name)) in series.iter().enumerate() {
            let source = if i == 0 {
                format!("'{file}'")
            } else {
                "''".into()
            };
            let lead = if i == 0 { "plot " } else { "     " };
            let tail = if i + 1 < series.len() { ", \\" } else { "" };
            let _ = writeln!(
                s,
                "{lead}{source} using {}:{} with lines title '{name}' noenhanced{tail}",
                t + 1,
                j + 1
            );
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_plot_per_table() {
        let table = Table {
            header: vec!["t".into(), "x0_1".into(), "z".into()],
            rows: vec![vec![Some(0.0), Some(1.0), Some(2.0)]],
        };
        let s = gnuplot_script(&[("trajectory.csv".into(), &table)]);
        assert!(s.contains("set output 'trajectory.png'"));
        assert!(
            s.contains("plot 'trajectory.csv' using 1:2 with lines title 'x0_1' noenhanced, \\")
        );
        assert!(s.contains("     '' using 1:3 with lines title 'z' noenhanced\n"));
    }
}
