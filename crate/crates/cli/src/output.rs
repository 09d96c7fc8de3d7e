use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::run::RunOutput;
use crate::CliError;

/// Default output directory when neither `--out` nor the config names one.
pub const OUT_DIR_ENV: &str = "MEANLAB_OUT_DIR";

/// `--out`, then the config's `output_dir`, then `$MEANLAB_OUT_DIR`, then
/// `./meanlab-out`.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("meanlab-out"))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))
}

/// Writes `report.json` and the CSV tables into `dir`, each through a
/// temporary file and a rename. Returns the written paths.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<Vec<PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::Internal(format!("writing {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    for (name, body) in &out.csv {
        write_atomic(dir, name, body.as_bytes()).map_err(io)?;
        written.push(dir.join(name));
    }
    let mut report = serde_json::to_string_pretty(&out.report).expect("report serializes");
    report.push('\n');
    write_atomic(dir, "report.json", report.as_bytes()).map_err(io)?;
    written.push(dir.join("report.json"));
    Ok(written)
}
