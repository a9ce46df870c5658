use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use quasiwall_core::ControlPath;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Everything a run decided, enough to replay it: feeding the manifest back
/// as `--config` reruns the same experiment.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, R: Serialize> {
    pub program: &'static str,
    pub version: &'static str,
    pub config: &'a ExperimentConfig,
    pub results: R,
    pub path: Option<&'a ControlPath>,
}

pub struct OutputDir {
    root: PathBuf,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl OutputDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        Ok(Self { root })
    }

    pub fn file(&self, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let path = self.root.join(name);
        let f = File::create(&path).map_err(|e| io_error(&path, e))?;
        Ok((path, BufWriter::new(f)))
    }

    pub fn write_csv<S: Serialize>(&self, name: &str, rows: &[S]) -> Result<(), CliError> {
        let (path, f) = self.file(name)?;
        let mut w = csv::Writer::from_writer(f);
        for row in rows {
            w.serialize(row).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    /// Writes `manifest.json`. The output directory is left out of the
    /// recorded config so identical runs give identical bytes.
    pub fn write_manifest<R: Serialize>(
        &self,
        config: &ExperimentConfig,
        results: R,
        path: Option<&ControlPath>,
    ) -> Result<(), CliError> {
        let mut recorded = config.clone();
        recorded.output_dir = None;
        let manifest = Manifest {
            program: "quasiwall",
            version: env!("CARGO_PKG_VERSION"),
            config: &recorded,
            results,
            path,
        };
        let (file, mut f) = self.file("manifest.json")?;
        serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| io_error(&file, e))?;
        writeln!(f).and_then(|_| f.flush()).map_err(|e| io_error(&file, e))?;
        log::info!("wrote {}", file.display());
        Ok(())
    }
}
