use std::fs;
use std::path::Path;

use crate::experiments::{Artifacts, Summary};
use crate::CliError;

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `summary.json`, `metrics.csv` and `traces/trial_<k>.json` under
/// `out`. Trace files left over from earlier runs in the same directory are
/// removed first.
pub fn write_artifacts(out: &Path, artifacts: &Artifacts) -> Result<(), CliError> {
    let traces = out.join("traces");
    fs::create_dir_all(&traces).map_err(|e| io(&traces, e))?;
    for entry in fs::read_dir(&traces).map_err(|e| io(&traces, e))? {
        let path = entry.map_err(|e| io(&traces, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("trial_") && name.ends_with(".json") {
            fs::remove_file(&path).map_err(|e| io(&path, e))?;
        }
    }
    let mut summary = serde_json::to_string_pretty(&artifacts.summary).map_err(|e| CliError::Io(e.to_string()))?;
    summary.push('\n');
    let path = out.join("summary.json");
    fs::write(&path, summary).map_err(|e| io(&path, e))?;
    let path = out.join("metrics.csv");
    fs::write(&path, &artifacts.csv).map_err(|e| io(&path, e))?;
    for (k, trace) in artifacts.traces.iter().enumerate() {
        let path = traces.join(format!("trial_{k}.json"));
        fs::write(&path, trace).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

pub fn read_summary(out: &Path) -> Result<Summary, CliError> {
    let path = out.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
