use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use swag_core::Result;

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config_text: String,
    /// `(path as given, sha256)`.
    pub inputs: Vec<(String, String)>,
    /// `(path relative to the output directory, sha256)`.
    pub outputs: Vec<(String, String)>,
    pub timing_seconds: Option<f64>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config_text: String) -> Self {
        Self {
            command: command.into(),
            seed,
            config_text,
            ..Default::default()
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.push((path.display().to_string(), digest));
        Ok(())
    }

    pub fn add_output(&mut self, out_dir: &Path, path: &Path) -> Result<()> {
        let digest = sha256_file(path)?;
        let rel: PathBuf = path.strip_prefix(out_dir).unwrap_or(path).to_path_buf();
        self.outputs.push((rel.display().to_string(), digest));
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "software = swag {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "seed = {}", self.seed);
        if let Some(t) = self.timing_seconds {
            let _ = writeln!(s, "timing_seconds = {t:.3}");
        }
        for (p, d) in &self.inputs {
            let _ = writeln!(s, "input {p} = sha256:{d}");
        }
        for (p, d) in &self.outputs {
            let _ = writeln!(s, "output {p} = sha256:{d}");
        }
        s.push_str("# configuration\n");
        for line in self.config_text.lines() {
            let _ = writeln!(s, "config {line}");
        }
        s
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("run_manifest.txt");
        fs::write(&path, self.to_text())?;
        Ok(path)
    }
}
