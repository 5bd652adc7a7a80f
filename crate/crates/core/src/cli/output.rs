//! Output directory layout: `results.csv` (streamed), `results.json`,
//! `meta.json` (the only file with a timestamp) and `resolved_config.toml`.

use super::config::{Format, RunConfig};
use crate::error::Result;
use crate::herald::SweepRow;
use crate::phasespace::PhaseSpaceGrid;
use serde::Serialize;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct OutputDir {
    dir: PathBuf,
    formats: Vec<Format>,
    csv: Option<BufWriter<File>>,
}

impl OutputDir {
    pub fn create(dir: &Path, formats: &[Format]) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), formats: formats.to_vec(), csv: None })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.path(name), contents)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, &s)
    }

    pub fn write_config(&self, cfg: &RunConfig) -> Result<()> {
        self.write("resolved_config.toml", &cfg.to_toml()?)
    }

    /// Starts `results.csv` with its header when CSV output is on.
    pub fn begin_rows(&mut self) -> Result<()> {
        if self.wants(Format::Csv) {
            let mut w = BufWriter::new(File::create(self.path("results.csv"))?);
            writeln!(w, "{}", SweepRow::HEADER)?;
            w.flush()?;
            self.csv = Some(w);
        }
        Ok(())
    }

    pub fn append_rows(&mut self, rows: &[SweepRow]) -> Result<()> {
        if let Some(w) = self.csv.as_mut() {
            for r in rows {
                writeln!(w, "{}", r.to_csv())?;
            }
            w.flush()?;
        }
        Ok(())
    }

    pub fn write_grid(&self, stem: &str, grid: &PhaseSpaceGrid) -> Result<()> {
        if self.wants(Format::Csv) {
            self.write(&format!("{stem}.csv"), &grid.to_csv())?;
        }
        if self.wants(Format::Svg) {
            self.write(&format!("{stem}.svg"), &grid.to_svg())?;
        }
        Ok(())
    }
}

#[derive(Serialize)]
pub struct Meta<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub preset: &'a str,
    pub created: String,
    pub cells: usize,
    pub failed_cells: usize,
}

impl<'a> Meta<'a> {
    pub fn new(command: &'a str, preset: &'a str, cells: usize, failed_cells: usize) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            preset,
            created: chrono::Utc::now().to_rfc3339(),
            cells,
            failed_cells,
        }
    }
}
