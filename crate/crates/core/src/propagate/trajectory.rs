use std::io::{self, Write};

use super::WaveFunction;
use crate::control::ControlPath;
use crate::error::Result;
use crate::spectral::{assemble, SpectralDecomposition};

#[derive(Debug, Clone, PartialEq)]
struct Row {
    t: f64,
    norm: f64,
    energy: f64,
    overlaps: Vec<f64>,
}

/// Samples norm, energy `<psi, H(t) psi>` and the overlap magnitudes against
/// a fixed basis every `every`-th step of a propagation.
#[derive(Debug)]
pub struct TrajectoryRecorder<'a> {
    path: &'a ControlPath,
    basis: Option<&'a SpectralDecomposition>,
    every: usize,
    seen: usize,
    rows: Vec<Row>,
    error: Option<crate::error::Error>,
}

impl<'a> TrajectoryRecorder<'a> {
    pub fn new(path: &'a ControlPath, basis: Option<&'a SpectralDecomposition>, every: usize) -> Self {
        Self { path, basis, every: every.max(1), seen: 0, rows: Vec::new(), error: None }
    }

    /// Observer callback for [`super::propagate_observed`].
    pub fn observe(&mut self, t: f64, psi: &WaveFunction) {
        self.seen += 1;
        if self.seen % self.every != 0 || self.error.is_some() {
            return;
        }
        match self.sample(t, psi) {
            Ok(row) => self.rows.push(row),
            Err(e) => self.error = Some(e),
        }
    }

    fn sample(&self, t: f64, psi: &WaveFunction) -> Result<Row> {
        let field = self.path.field_at(t)?;
        let ham = assemble(&field, psi.grid())?;
        let h = psi.grid().spacing();
        let re: Vec<f64> = psi.values().iter().map(|v| v.re).collect();
        let im: Vec<f64> = psi.values().iter().map(|v| v.im).collect();
        let (hr, hi) = (ham.apply(&re), ham.apply(&im));
        let norm = psi.norm();
        let quad: f64 = re.iter().zip(&hr).chain(im.iter().zip(&hi)).map(|(a, b)| a * b).sum();
        let energy = h * quad / (norm * norm);
        let overlaps = match self.basis {
            Some(b) => b.eigenvectors().iter().map(|phi| psi.project(phi).norm()).collect(),
            None => Vec::new(),
        };
        Ok(Row { t, norm, energy, overlaps })
    }

    /// First sampling error, if any occurred.
    pub fn error(&self) -> Option<&crate::error::Error> {
        self.error.as_ref()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `t,norm,energy,overlap_1,...` with a header row.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let m = self.basis.map_or(0, |b| b.len());
        let mut header = String::from("t,norm,energy");
        for k in 1..=m {
            header.push_str(&format!(",overlap_{k}"));
        }
        writeln!(out, "{header}")?;
        for row in &self.rows {
            write!(out, "{},{},{}", row.t, row.norm, row.energy)?;
            for o in &row.overlaps {
                write!(out, ",{o}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
