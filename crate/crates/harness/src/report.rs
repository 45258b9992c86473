//! Plot-ready tables derived from a finished `rates` run.

use std::collections::BTreeMap;
use std::path::Path;

use mslln_core::stats::median;

use crate::error::HarnessError;
use crate::output::{read_table, write_tables, FileEntry};
use crate::table::{Cell, Format, Table};

pub const BLOCK_MAXIMA_PLOT: &str = "plot_log2_block_maxima";
pub const RATE_SCATTER_PLOT: &str = "plot_rate_scatter";

fn find(dir: &Path, stem: &str) -> Option<std::path::PathBuf> {
    ["csv", "json"].iter().map(|ext| dir.join(format!("{stem}.{ext}"))).find(|p| p.exists())
}

fn number(t: &Table, row: usize, column: &str) -> Result<f64, HarnessError> {
    t.get(row, column)
        .and_then(Cell::as_f64)
        .ok_or_else(|| HarnessError::Run(format!("{}: missing numeric `{column}` in row {row}", t.name)))
}

/// `log2(median_rep M_r)` against `r` for each grid point, and `e_hat`
/// against `e_star`.
pub fn build_report(dir: &Path) -> Result<Vec<Table>, HarnessError> {
    let rates_path =
        find(dir, "rates").ok_or_else(|| HarnessError::Run(format!("no rates table in {}", dir.display())))?;
    let rates = read_table(&rates_path)?;

    let mut scatter = Table::new(
        RATE_SCATTER_PLOT,
        &["grid", "sigma", "sigma_bar", "alpha", "regime", "e_star", "e_hat", "stderr", "status"],
    );
    let mut maxima = Table::new(BLOCK_MAXIMA_PLOT, &["grid", "r", "n_r", "median_M_r", "log2_median_M_r", "reps"]);
    for i in 0..rates.rows.len() {
        let copy = |c: &str| rates.get(i, c).cloned().unwrap_or(Cell::Empty);
        scatter.push(
            ["grid", "sigma", "sigma_bar", "alpha", "regime", "e_star", "e_hat", "stderr", "status"]
                .iter()
                .map(|c| copy(c))
                .collect(),
        );
        let grid = number(&rates, i, "grid")? as usize;
        let Some(path) = find(dir, &format!("ledgers_g{grid}")) else {
            continue;
        };
        let ledger = read_table(&path)?;
        let mut by_level: BTreeMap<i64, (i64, Vec<f64>)> = BTreeMap::new();
        for row in 0..ledger.rows.len() {
            let Some(m) = ledger.get(row, "M_r").and_then(Cell::as_f64) else {
                continue;
            };
            let r = number(&ledger, row, "r")? as i64;
            let n = number(&ledger, row, "n_r")? as i64;
            by_level.entry(r).or_insert((n, Vec::new())).1.push(m);
        }
        for (r, (n, values)) in by_level {
            let med = median(&values).unwrap_or(f64::NAN);
            maxima.push(vec![
                Cell::Int(grid as i64),
                Cell::Int(r),
                Cell::Int(n),
                med.into(),
                med.log2().into(),
                values.len().into(),
            ]);
        }
    }
    Ok(vec![maxima, scatter])
}

pub fn write_report(dir: &Path, format: Format) -> Result<Vec<FileEntry>, HarnessError> {
    let tables = build_report(dir)?;
    write_tables(dir, &tables, format)
}
