//! Writing run results to disk and reading them back.

use std::fs;
use std::path::Path;

use serde_json::json;

use super::episode::StepRecord;
use super::experiment::RunArtifact;
use super::regression::CoefficientReport;
use super::svg::{render, Chart, Series};
use super::{HarnessError, Joint};
use crate::control::PidGains;
use crate::numfmt::{sig9, sig9_opt};
use crate::plant::Apple;
use crate::tracking::CrashReason;

const STEP_COLUMNS: [&str; 17] = [
    "step",
    "epoch",
    "x",
    "y",
    "z",
    "j1_kp",
    "j1_ki",
    "j1_kd",
    "j2_kp",
    "j2_ki",
    "j2_kd",
    "reward",
    "td_error",
    "value",
    "crash",
    "crash_reason",
    "recovery",
];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_steps_csv(path: &Path, records: &[StepRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(STEP_COLUMNS).map_err(csv_err(path))?;
    for r in records {
        let mut row = vec![
            r.step.to_string(),
            r.epoch.to_string(),
            sig9(r.apple.x),
            sig9(r.apple.y),
            sig9(r.apple.z),
        ];
        for g in &r.gains {
            row.extend(g.as_array().map(sig9));
        }
        row.push(sig9(r.reward));
        row.push(sig9_opt(r.td_error));
        row.push(sig9_opt(r.value));
        row.push(u8::from(r.crashed()).to_string());
        row.push(r.crash.map(|c| c.as_str()).unwrap_or("").to_string());
        row.push(u8::from(r.recovery).to_string());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

pub fn read_steps_csv(path: &Path) -> Result<Vec<StepRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(STEP_COLUMNS.iter().copied()) {
        return Err(HarnessError::Format {
            path: path.display().to_string(),
            message: "unexpected steps.csv header".into(),
        });
    }
    let bad = |line: usize, what: &str| HarnessError::Format {
        path: path.display().to_string(),
        message: format!("row {line}: bad {what}"),
    };
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let f = |i: usize| -> Result<f64, HarnessError> {
            row[i].parse::<f64>().map_err(|_| bad(line + 1, STEP_COLUMNS[i]))
        };
        let opt = |i: usize| -> Result<Option<f64>, HarnessError> {
            if row[i].is_empty() {
                Ok(None)
            } else {
                f(i).map(Some)
            }
        };
        let int = |i: usize| -> Result<u64, HarnessError> {
            row[i].parse::<u64>().map_err(|_| bad(line + 1, STEP_COLUMNS[i]))
        };
        let crash = match &row[15] {
            "" => None,
            s => Some(CrashReason::parse(s).ok_or_else(|| bad(line + 1, "crash_reason"))?),
        };
        out.push(StepRecord {
            step: int(0)?,
            epoch: int(1)?,
            apple: Apple::new(f(2)?, f(3)?, f(4)?),
            gains: [
                PidGains::raw(f(5)?, f(6)?, f(7)?),
                PidGains::raw(f(8)?, f(9)?, f(10)?),
            ],
            reward: f(11)?,
            td_error: opt(12)?,
            value: opt(13)?,
            crash,
            recovery: int(16)? != 0,
        });
    }
    Ok(out)
}

pub fn write_coefficients_csv(path: &Path, report: &CoefficientReport) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["term", "crashes_excluded", "crashes_included"])
        .map_err(csv_err(path))?;
    let (ex, inc) = (&report.crashes_excluded, &report.crashes_included);
    w.write_record(["intercept", &sig9(ex.intercept), &sig9(inc.intercept)])
        .map_err(csv_err(path))?;
    for (i, name) in ex.names.iter().enumerate() {
        w.write_record([name.as_str(), &sig9(ex.coefficients[i]), &sig9(inc.coefficients[i])])
            .map_err(csv_err(path))?;
    }
    w.write_record(["n", &ex.n.to_string(), &inc.n.to_string()])
        .map_err(csv_err(path))?;
    w.flush().map_err(HarnessError::io(path))?;
    Ok(())
}

/// Writes the full result directory for a run.
pub fn export_results(dir: &Path, artifact: &RunArtifact) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(HarnessError::io(dir))?;
    write_steps_csv(&dir.join("steps.csv"), &artifact.records)?;
    if let Some(report) = &artifact.coefficients {
        write_coefficients_csv(&dir.join("coefficients.csv"), report)?;
    }
    for (step, log) in &artifact.trajectories {
        let path = dir.join(format!("trajectory_{step}.csv"));
        let file = fs::File::create(&path).map_err(HarnessError::io(&path))?;
        log.write_csv(std::io::BufWriter::new(file))?;
    }
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": artifact.plan.seed(),
        "plan": artifact.plan,
        "baseline": artifact.baseline,
        "train_apples": artifact.train_apples,
        "aborted_at_step": artifact.aborted,
        "learning_steps_completed": artifact.learning_records().count(),
    });
    let path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).map_err(|e| HarnessError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    fs::write(&path, text + "\n").map_err(HarnessError::io(&path))?;
    artifact.agent.save(dir)?;
    write_plots(
        dir,
        &artifact.records,
        &artifact.plan.tuned_joints,
        Some(artifact.baseline.mean),
        artifact.plan.mode.is_multi(),
    )
}

/// Regenerates the SVG charts of a result directory from `steps.csv` and
/// `meta.json`.
pub fn replot(dir: &Path) -> Result<(), HarnessError> {
    let records = read_steps_csv(&dir.join("steps.csv"))?;
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(HarnessError::io(&path))?;
    let meta: serde_json::Value = serde_json::from_str(&text).map_err(|e| HarnessError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let baseline = meta["baseline"]["mean"].as_f64();
    let joints: Vec<Joint> = serde_json::from_value(meta["plan"]["tuned_joints"].clone())
        .unwrap_or_else(|_| Joint::ALL.to_vec());
    let multi = meta["plan"]["mode"].as_str() == Some("multi_apple");
    write_plots(dir, &records, &joints, baseline, multi)
}

fn write_plots(
    dir: &Path,
    records: &[StepRecord],
    joints: &[Joint],
    baseline: Option<f64>,
    multi: bool,
) -> Result<(), HarnessError> {
    let learning: Vec<&StepRecord> = records.iter().filter(|r| !r.recovery).collect();
    let save = |name: &str, chart: &Chart| -> Result<(), HarnessError> {
        let path = dir.join(name);
        fs::write(&path, render(chart)).map_err(HarnessError::io(&path))
    };

    let reward = Chart {
        title: "Reward over steps",
        x_label: "step",
        y_label: "reward",
        series: vec![Series {
            label: "reward",
            points: learning.iter().map(|r| (r.step as f64, r.reward)).collect(),
        }],
        reference: baseline.map(|b| ("baseline", b)),
    };
    save("reward.svg", &reward)?;

    if multi {
        let mut sums: Vec<(f64, usize)> = Vec::new();
        for r in &learning {
            let e = r.epoch as usize;
            if sums.len() <= e {
                sums.resize(e + 1, (0.0, 0));
            }
            sums[e].0 += r.reward;
            sums[e].1 += 1;
        }
        let chart = Chart {
            title: "Mean reward per epoch",
            x_label: "epoch",
            y_label: "reward",
            series: vec![Series {
                label: "mean reward",
                points: sums
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.1 > 0)
                    .map(|(e, s)| (e as f64, s.0 / s.1 as f64))
                    .collect(),
            }],
            reference: baseline.map(|b| ("baseline", b)),
        };
        save("reward_epoch.svg", &chart)?;
    }

    for joint in joints {
        for (g, label) in ["kp", "ki", "kd"].iter().enumerate() {
            let title = format!("{} {} over steps", joint.name(), label.to_uppercase());
            let chart = Chart {
                title: &title,
                x_label: "step",
                y_label: label,
                series: vec![Series {
                    label,
                    points: learning
                        .iter()
                        .map(|r| (r.step as f64, r.gains[joint.index()].as_array()[g]))
                        .collect(),
                }],
                reference: None,
            };
            save(&format!("gains_{}_{label}.svg", joint.name().to_lowercase()), &chart)?;
        }
    }
    Ok(())
}
