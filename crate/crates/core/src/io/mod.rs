//! File formats and output observers.

pub mod mask;
pub mod vtk;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::grid::SparseBlockGrid;
use crate::scalar::Real;
use crate::solver::{Observer, StepDiagnostics};

pub const MASS_CSV_HEADER: &str = "step,time,total_mass,min_u,max_u";

/// Shortest round-trip text for `x`, in exponent form for tiny or huge magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// One CSV row.
pub fn mass_csv_row(d: &StepDiagnostics) -> String {
    format!(
        "{},{},{},{},{}",
        d.step,
        fmt_f64(d.time),
        fmt_f64(d.total_mass),
        fmt_f64(d.min_u),
        fmt_f64(d.max_u)
    )
}

pub fn mass_csv(series: &[StepDiagnostics]) -> String {
    let mut s = format!("{MASS_CSV_HEADER}\n");
    for d in series {
        s.push_str(&mass_csv_row(d));
        s.push('\n');
    }
    s
}

/// Streams observed diagnostics as mass CSV rows.
pub struct MassCsvWriter<W: Write> {
    out: W,
}

impl<W: Write> MassCsvWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{MASS_CSV_HEADER}")?;
        Ok(MassCsvWriter { out })
    }

    pub fn into_inner(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

impl MassCsvWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<T: Real, W: Write> Observer<T> for MassCsvWriter<W> {
    fn observe(&mut self, _grid: &SparseBlockGrid<T>, diag: &StepDiagnostics) -> Result<()> {
        writeln!(self.out, "{}", mass_csv_row(diag))?;
        Ok(())
    }
}

/// Writes `<dir>/<prefix>_<step>.vtk` whenever the step is a multiple of `every`.
pub struct VtkSeriesWriter {
    pub dir: PathBuf,
    pub prefix: String,
    pub every: usize,
    pub blank: f64,
    pub channels: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl VtkSeriesWriter {
    pub fn new(dir: &Path, prefix: &str, every: usize, blank: f64, channels: &[&str]) -> Self {
        VtkSeriesWriter {
            dir: dir.to_path_buf(),
            prefix: prefix.to_string(),
            every: every.max(1),
            blank,
            channels: channels.iter().map(|s| s.to_string()).collect(),
            written: Vec::new(),
        }
    }

    pub fn write_now<T: Real>(&mut self, grid: &SparseBlockGrid<T>, step: usize) -> Result<()> {
        let path = self.dir.join(format!("{}_{step:06}.vtk", self.prefix));
        let out = BufWriter::new(File::create(&path)?);
        vtk::write_grid_vtk(
            out,
            grid,
            &self.channels,
            T::lit(self.blank),
            &format!("step {step}"),
        )?;
        self.written.push(path);
        Ok(())
    }
}

impl<T: Real> Observer<T> for VtkSeriesWriter {
    fn observe(&mut self, grid: &SparseBlockGrid<T>, diag: &StepDiagnostics) -> Result<()> {
        if diag.step.is_multiple_of(self.every) {
            self.write_now(grid, diag.step)?;
        }
        Ok(())
    }
}

/// Serialises `value` as pretty JSON to `path`.
pub fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
