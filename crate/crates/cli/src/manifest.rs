use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use zenoamp::{ParamSet, Result};

/// Sidecar written next to every file output. Carries no timestamps, so
/// identical runs produce identical manifests.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub params: ParamSet,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub options: serde_json::Value,
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        params: ParamSet,
        inputs: Vec<String>,
        outputs: Vec<String>,
        options: serde_json::Value,
    ) -> Self {
        Self {
            artifact: "zenoamp",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.into(),
            params,
            inputs,
            outputs,
            options,
        }
    }

    /// `<out>.manifest.json`
    pub fn path_for(out: &Path) -> PathBuf {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }

    pub fn write_beside(&self, out: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(Self::path_for(out))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}
