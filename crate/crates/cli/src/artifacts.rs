use std::path::{Path, PathBuf};
use std::time::Instant;

use hypctl::output::CsvTable;
use serde::Serialize;
use toml::{Table, Value};

use crate::run_config::RunEcho;

pub const MANIFEST: &str = "manifest.toml";
pub const REPORT: &str = "report.toml";
pub const PLOT_SCRIPT: &str = "plot.py";

/// Single writer for everything a run leaves in its output directory.
pub struct Artifacts {
    dir: PathBuf,
    subcommand: &'static str,
    started: Instant,
    files: Vec<String>,
    pub report: Table,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    status: &'a str,
    exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<&'a str>,
    wall_time_s: f64,
    files: &'a [String],
    run: &'a RunEcho,
}

impl Artifacts {
    pub fn create(dir: &Path, subcommand: &'static str) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            subcommand,
            started: Instant::now(),
            files: Vec::new(),
            report: Table::new(),
        })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> std::io::Result<()> {
        std::fs::write(self.dir.join(name), text)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, table: &CsvTable) -> std::io::Result<()> {
        self.write_text(name, &table.render())
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.report.insert(key.to_string(), value.into());
    }

    pub fn set_floats(&mut self, key: &str, values: &[f64]) {
        self.set(key, Value::Array(values.iter().map(|&v| Value::Float(v)).collect()));
    }

    /// Writes the report and the manifest; the manifest goes last so its file list is complete.
    pub fn finish(mut self, run: &RunEcho, exit_code: u8, message: Option<&str>) -> std::io::Result<()> {
        let mut report = Table::new();
        report.insert("subcommand".into(), self.subcommand.into());
        report.insert("exit_code".into(), Value::Integer(exit_code.into()));
        if let Some(m) = message {
            report.insert("message".into(), m.into());
        }
        report.extend(std::mem::take(&mut self.report));
        self.write_text(REPORT, &toml::to_string(&report).expect("report is a table"))?;
        let csvs: Vec<String> = self.files.iter().filter(|f| f.ends_with(".csv")).cloned().collect();
        self.write_text(PLOT_SCRIPT, &plot_script(self.subcommand, &csvs))?;
        self.files.push(MANIFEST.to_string());
        let status = match exit_code {
            0 => "ok",
            4 => "uncontrollable",
            _ => "failed",
        };
        let manifest = Manifest {
            tool: "hypctl",
            version: hypctl::VERSION,
            subcommand: self.subcommand,
            status,
            exit_code,
            message,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            files: &self.files,
            run,
        };
        std::fs::write(self.dir.join(MANIFEST), toml::to_string(&manifest).expect("manifest serializes"))
    }
}

fn plot_script(subcommand: &str, csvs: &[String]) -> String {
    let list = csvs.iter().map(|c| format!("    \"{c}\",\n")).collect::<String>();
    format!(
        r#"#!/usr/bin/env python3
# Plot stub for `hypctl {subcommand}`; edit freely.
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

HERE = Path(__file__).resolve().parent
FILES = [
{list}]


def main():
    for name in FILES:
        df = pd.read_csv(HERE / name)
        numeric = df.select_dtypes("number")
        if numeric.shape[1] < 2:
            continue
        x, ys = numeric.columns[0], numeric.columns[1:6]
        ax = numeric.plot(x=x, y=list(ys), marker=".", linestyle="none", title=name)
        ax.figure.savefig(HERE / (Path(name).stem + ".png"), dpi=120)
        plt.close(ax.figure)


if __name__ == "__main__":
    sys.exit(main())
"#
    )
}
