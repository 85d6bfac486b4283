use std::fs;
use std::path::Path;

use super::{overfit_diagnostics, trajectory_table, HarnessError, SuiteReport, SuiteRun, DEFAULT_EPS_FRAC};
use crate::engine::Event;

pub const REPORT_FILE: &str = "report.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn events_jsonl(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| serde_json::to_string(e).expect("events serialize") + "\n")
        .collect()
}

/// Writes `report.json`, the CSV tables and, per run,
/// `runs/<task>/{record.json, events.jsonl, candidates/<id>.src}`.
pub fn write_run_dir(out: &Path, run: &SuiteRun) -> Result<(), HarnessError> {
    for record in &run.records {
        let dir = out.join("runs").join(&record.task_id);
        let json = serde_json::to_string_pretty(record).expect("records serialize") + "\n";
        write(&dir.join("record.json"), &json)?;
        write(&dir.join("events.jsonl"), &events_jsonl(&record.events))?;
        for (id, source) in &record.candidates {
            write(&dir.join("candidates").join(format!("{id}.src")), source)?;
        }
    }
    write(&out.join(REPORT_FILE), &run.report.to_json())?;
    write_tables(out, &run.report)
}

fn csv_text<F>(fill: F) -> Result<String, HarnessError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let malformed = |e: csv::Error| HarnessError::Malformed {
        path: "csv".into(),
        detail: e.to_string(),
    };
    fill(&mut w).map_err(malformed)?;
    let bytes = w.into_inner().map_err(|e| malformed(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `ablation.csv`, `trajectory.csv` and `overfit.csv` next to the report.
pub fn write_tables(out: &Path, report: &SuiteReport) -> Result<(), HarnessError> {
    let ablation = csv_text(|w| {
        w.write_record([
            "mode",
            "level",
            "tasks",
            "solved",
            "pass_rate",
            "mean_sample_pass_ratio",
            "token_per_iter",
        ])?;
        for m in report.levels.iter().chain([&report.overall]) {
            let level = m.level.map_or("all".to_string(), |l| format!("{l:?}"));
            w.write_record([
                report.mode.clone(),
                level,
                m.tasks.to_string(),
                m.solved.to_string(),
                m.pass_rate.to_string(),
                m.mean_sample_pass_ratio.to_string(),
                report.token_per_iter.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let trajectory = csv_text(|w| {
        w.write_record(["class", "runs", "solved"])?;
        for r in trajectory_table(&report.tasks, DEFAULT_EPS_FRAC) {
            w.write_record([format!("{:?}", r.class), r.runs.to_string(), r.solved.to_string()])?;
        }
        Ok(())
    })?;
    let overfit = csv_text(|w| {
        w.write_record([
            "family",
            "runs",
            "solved",
            "overfit",
            "early_stop_incorrect",
            "mean_len_solved",
            "mean_len_failed",
            "mean_copy_frequency",
        ])?;
        for r in overfit_diagnostics(&report.tasks) {
            w.write_record([
                format!("{:?}", r.family),
                r.runs.to_string(),
                r.solved.to_string(),
                r.overfit.to_string(),
                r.early_stop_incorrect.to_string(),
                opt(r.mean_len_solved),
                opt(r.mean_len_failed),
                r.mean_copy_frequency.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write(&out.join("ablation.csv"), &ablation)?;
    write(&out.join("trajectory.csv"), &trajectory)?;
    write(&out.join("overfit.csv"), &overfit)
}

/// The report of a run directory.
pub fn read_report(dir: &Path) -> Result<SuiteReport, HarnessError> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Malformed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}
