use std::io::{self, Write};

use super::ideal::{ModeLabel, Side};

/// One row of a spectrum dump: the `k`-th eigenvalue at split position `a`,
/// tagged with the ideal label occupying that rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    pub a: f64,
    pub k: usize,
    pub lambda: f64,
    pub label: ModeLabel,
}

/// Writes `a,k,lambda_k,side,index` rows with a header line.
pub fn write_spectrum_csv<W: Write>(mut out: W, rows: &[SpectrumRow]) -> io::Result<()> {
    writeln!(out, "a,k,lambda_k,side,index")?;
    for row in rows {
        let side = match row.label.side {
            Side::Left => "L",
            Side::Right => "R",
        };
        writeln!(out, "{},{},{},{},{}", row.a, row.k, row.lambda, side, row.label.index)?;
    }
    Ok(())
}
