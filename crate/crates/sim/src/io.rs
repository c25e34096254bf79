//! Results files. Everything except `timing.csv` is a pure function of the
//! seeds and the configuration.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use step_core::behaviors::write_events_jsonl;

use crate::episode::{EpisodeRecord, EpisodeTrace};
use crate::stats::BoxStats;
use crate::study::StudyResult;
use crate::SimError;

#[derive(Serialize)]
struct EpisodeRow {
    seed: u64,
    alpha: f64,
    path_length: f64,
    max_risk: f64,
    j_pos: f64,
    success: bool,
    termination: String,
    steps: usize,
    final_x: f64,
    final_y: f64,
    crossed_lethal: bool,
    events: usize,
}

fn termination_name(r: &EpisodeRecord) -> String {
    serde_json::to_value(r.termination)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn write_episodes_csv<W: Write>(records: &[EpisodeRecord], w: W) -> Result<(), SimError> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(EpisodeRow {
            seed: r.seed,
            alpha: r.alpha,
            path_length: r.path_length,
            max_risk: r.max_risk,
            j_pos: r.j_pos,
            success: r.success,
            termination: termination_name(r),
            steps: r.steps,
            final_x: r.final_position[0],
            final_y: r.final_position[1],
            crossed_lethal: r.crossed_lethal,
            events: r.events.len(),
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &EpisodeTrace, w: W) -> Result<(), SimError> {
    let mut out = csv::Writer::from_writer(w);
    for row in &trace.rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

fn episode_stem(r: &EpisodeRecord) -> String {
    format!("seed{:06}_alpha{:.3}", r.seed, r.alpha)
}

#[derive(Serialize)]
struct QuartileRow<'a> {
    metric: &'a str,
    alpha: f64,
    n: usize,
    whisker_low: f64,
    q1: f64,
    median: f64,
    q3: f64,
    whisker_high: f64,
    outliers: String,
}

/// Box-plot table: one row per (metric, α), outliers space-separated.
pub fn write_plotdata<W: Write>(result: &StudyResult, w: W) -> Result<(), SimError> {
    let mut out = csv::Writer::from_writer(w);
    for (metric, pick) in [
        ("path_length", (|s| s.path_length.as_ref()) as fn(&crate::study::AlphaSummary) -> Option<&BoxStats>),
        ("max_risk", |s| s.max_risk.as_ref()),
    ] {
        for s in &result.summaries {
            let Some(b) = pick(s) else { continue };
            out.serialize(QuartileRow {
                metric,
                alpha: s.alpha,
                n: b.n,
                whisker_low: b.whisker_low,
                q1: b.q1,
                median: b.median,
                q3: b.q3,
                whisker_high: b.whisker_high,
                outliers: b.outliers.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "),
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes `episodes.csv`, `study.json`, `plotdata.csv`, `timing.csv` and
/// per-episode `traces/*.csv` and `events/*.jsonl` under `dir`.
pub fn write_study(result: &StudyResult, dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir.join("traces"))?;
    fs::create_dir_all(dir.join("events"))?;
    write_episodes_csv(&result.episodes, BufWriter::new(File::create(dir.join("episodes.csv"))?))?;
    let mut json = BufWriter::new(File::create(dir.join("study.json"))?);
    serde_json::to_writer_pretty(&mut json, &StudyJson::from(result))?;
    json.flush()?;
    write_plotdata(result, BufWriter::new(File::create(dir.join("plotdata.csv"))?))?;
    let mut timing = csv::Writer::from_path(dir.join("timing.csv"))?;
    timing.write_record(["seed", "alpha", "wall_ms"])?;
    for r in &result.episodes {
        timing.write_record([r.seed.to_string(), r.alpha.to_string(), format!("{:.3}", r.wall_ms)])?;
    }
    timing.flush()?;
    for (r, t) in result.episodes.iter().zip(&result.traces) {
        let stem = episode_stem(r);
        write_trace_csv(t, BufWriter::new(File::create(dir.join("traces").join(format!("{stem}.csv")))?))?;
        let mut ev = BufWriter::new(File::create(dir.join("events").join(format!("{stem}.jsonl")))?);
        write_events_jsonl(&r.events, &mut ev)?;
        ev.flush()?;
    }
    Ok(())
}

/// `study.json` body: the summaries and tests, without timing.
#[derive(Serialize)]
struct StudyJson<'a> {
    study: &'a crate::study::Study,
    summaries: &'a [crate::study::AlphaSummary],
    tests: &'a [crate::study::PairedTest],
}

impl<'a> From<&'a StudyResult> for StudyJson<'a> {
    fn from(r: &'a StudyResult) -> Self {
        Self {
            study: &r.study,
            summaries: &r.summaries,
            tests: &r.tests,
        }
    }
}
