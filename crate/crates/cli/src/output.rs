use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use softrank::io::write_table;

use crate::error::CliError;

/// An output directory that records what was written to it.
pub struct RunDir {
    root: PathBuf,
    command: &'static str,
    seed: u64,
    threads: usize,
    started: Instant,
    files: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    cli_version: &'static str,
    library_version: &'static str,
    command: &'a str,
    seed: u64,
    threads: usize,
    wall_time_seconds: f64,
    files: &'a [String],
}

impl RunDir {
    pub fn create(root: &Path, command: &'static str, seed: u64, threads: usize) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Core(softrank::Error::Io(format!("{}: {e}", root.display()))))?;
        Ok(Self {
            root: root.to_path_buf(),
            command,
            seed,
            threads,
            started: Instant::now(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.root.join(name)
    }

    /// Echo of the resolved configuration: global keys plus the command section.
    pub fn write_config<T: Serialize>(&mut self, section: &T) -> Result<(), CliError> {
        let mut doc = toml::Table::new();
        let as_int = |v: u64, key: &str| {
            i64::try_from(v).map_err(|_| CliError::Config(format!("{key} {v} does not fit a TOML integer")))
        };
        doc.insert("seed".into(), toml::Value::Integer(as_int(self.seed, "seed")?));
        doc.insert("threads".into(), toml::Value::Integer(as_int(self.threads as u64, "threads")?));
        let value = toml::Value::try_from(section).map_err(|e| CliError::Config(e.to_string()))?;
        doc.insert(self.command.into(), value);
        let text = toml::to_string(&doc).map_err(|e| CliError::Config(e.to_string()))?;
        let path = self.path("config.toml");
        fs::write(path, text)?;
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
        let path = self.path(name);
        let file = File::create(&path)?;
        write_table(BufWriter::new(file), header, rows)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        let files = std::mem::take(&mut self.files);
        let manifest = Manifest {
            tool: "softrank",
            cli_version: env!("CARGO_PKG_VERSION"),
            library_version: softrank::VERSION,
            command: self.command,
            seed: self.seed,
            threads: self.threads,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            files: &files,
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Core(e.into()))?;
        fs::write(self.root.join("manifest.json"), text + "\n")?;
        Ok(self.root)
    }
}
