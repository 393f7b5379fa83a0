//! Output files of a scenario. Floats are written with Rust's `Display`,
//! which gives the shortest decimal string that parses back to the same
//! value, so files diff cleanly between runs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::scenario::{
    equilibrium_labels, label_order, AuditSummary, OutcomeHistogram, ScenarioOutput,
};
use crate::error::{Error, Result};

pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const HISTOGRAM_FILE: &str = "histogram.json";
pub const CONFIG_FILE: &str = "config.resolved.json";
const OUTCOMES_HEADER: [&str; 4] = ["run_id", "seed", "outcome", "mean_obj_reward"];
const TRAJ_HEADER: [&str; 5] = ["round", "mean_focal", "sd_focal", "mean_opp", "sd_opp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFile {
    #[serde(flatten)]
    pub histogram: OutcomeHistogram,
    /// Classes with no runs; their trajectory files are not written.
    pub omitted_trajectories: Vec<String>,
    pub audit: Option<AuditSummary>,
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(&row).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::Serde(e.to_string()))
}

/// Writes `outcomes.csv`, `histogram.json`, one `traj_<label>.csv` per
/// nonempty class, `config.resolved.json` and any saved histories.
pub fn emit_report(output: &ScenarioOutput, config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.to_path_buf(), e))?;

    let rows = output.records.iter().map(|r| {
        vec![
            r.run_id.to_string(),
            r.seed.to_string(),
            r.outcome.clone(),
            r.mean_obj_reward.to_string(),
        ]
    });
    write(dir.join(OUTCOMES_FILE), &csv_bytes(&OUTCOMES_HEADER, rows)?)?;

    let mut omitted = Vec::new();
    for entry in &output.histogram.entries {
        let Some(stats) = output.trajectories.get(&entry.label) else {
            omitted.push(entry.label.clone());
            continue;
        };
        let (sf, so) = (stats.sd_focal(), stats.sd_opponent());
        let rows = (0..stats.len()).map(|t| {
            vec![
                (t + 1).to_string(),
                stats.mean_focal()[t].to_string(),
                sf[t].to_string(),
                stats.mean_opponent()[t].to_string(),
                so[t].to_string(),
            ]
        });
        write(
            dir.join(format!("traj_{}.csv", entry.label)),
            &csv_bytes(&TRAJ_HEADER, rows)?,
        )?;
    }

    let hist = HistogramFile {
        histogram: output.histogram.clone(),
        omitted_trajectories: omitted,
        audit: output.audit.clone(),
    };
    write(dir.join(HISTOGRAM_FILE), &json(&hist)?)?;
    write(dir.join(CONFIG_FILE), &json(&config.resolved_echo()?)?)?;
    for (id, h) in &output.histories {
        write(dir.join(format!("history_{id}.json")), &json(h)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub histogram: OutcomeHistogram,
    pub mean_obj_reward: f64,
    pub sd_obj_reward: f64,
    /// Whether the stored `histogram.json` agrees, when present.
    pub matches_stored: Option<bool>,
}

#[derive(Deserialize)]
struct OutcomeRow {
    #[allow(dead_code)]
    run_id: usize,
    #[allow(dead_code)]
    seed: u64,
    outcome: String,
    mean_obj_reward: f64,
}

/// Rebuilds the aggregates of a report directory from `outcomes.csv` and
/// `config.resolved.json`.
pub fn recompute_report(dir: &Path) -> Result<ReportSummary> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(cfg_path.clone(), e))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| Error::config(CONFIG_FILE, e.to_string()))?;
    let labels = equilibrium_labels(&config.resolve()?)?;

    let out_path = dir.join(OUTCOMES_FILE);
    let mut reader = csv::Reader::from_path(&out_path)
        .map_err(|e| Error::Serde(format!("{}: {e}", out_path.display())))?;
    let rows: Vec<OutcomeRow> = reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Serde(format!("{}: {e}", out_path.display())))?;
    if rows.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} has no runs",
            out_path.display()
        )));
    }

    let histogram = OutcomeHistogram::from_outcomes(
        &label_order(&labels),
        rows.iter().map(|r| r.outcome.as_str()),
    )?;
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.mean_obj_reward).sum::<f64>() / n;
    let var = rows
        .iter()
        .map(|r| (r.mean_obj_reward - mean).powi(2))
        .sum::<f64>()
        / n;

    let hist_path = dir.join(HISTOGRAM_FILE);
    let matches_stored = match fs::read_to_string(&hist_path) {
        Ok(s) => {
            let stored: HistogramFile =
                serde_json::from_str(&s).map_err(|e| Error::Serde(e.to_string()))?;
            Some(stored.histogram == histogram)
        }
        Err(_) => None,
    };
    Ok(ReportSummary {
        histogram,
        mean_obj_reward: mean,
        sd_obj_reward: var.sqrt(),
        matches_stored,
    })
}
