//! Aggregation of per-seed metrics into the results table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::evaluate::Metrics;
use super::presets::preset_info;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub section: String,
    pub id: String,
    pub skipping: String,
    pub reward: String,
    pub other: String,
    pub success_rate: f64,
    pub lon_speed: f64,
    pub lat_speed: f64,
    pub seeds: Vec<u64>,
}

/// Median; the mean of the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One row per preset, each metric the median over that preset's seeds.
pub fn aggregate(metrics: &[Metrics]) -> Vec<ReportRow> {
    let mut groups: BTreeMap<&str, Vec<&Metrics>> = BTreeMap::new();
    for m in metrics {
        groups.entry(m.preset.as_str()).or_default().push(m);
    }
    groups
        .into_iter()
        .map(|(id, ms)| {
            let col = |f: fn(&Metrics) -> f64| median(&ms.iter().map(|m| f(m)).collect::<Vec<_>>());
            let info = preset_info(id);
            let label = |f: fn(&super::presets::PresetInfo) -> &'static str| info.map(f).unwrap_or("N/A").to_string();
            ReportRow {
                section: info.map(|i| i.section).unwrap_or("Custom").to_string(),
                id: id.to_string(),
                skipping: label(|i| i.skipping),
                reward: label(|i| i.reward),
                other: label(|i| i.other),
                success_rate: col(|m| m.success_rate),
                lon_speed: col(|m| m.lon_speed),
                lat_speed: col(|m| m.lat_speed),
                seeds: ms.iter().map(|m| m.seed).collect(),
            }
        })
        .collect()
}

pub const HEADER: [&str; 8] = [
    "Section",
    "ID",
    "Skipping",
    "Reward",
    "Other",
    "Success Rate",
    "Lon. Speed",
    "Lat. Speed",
];

fn cells(r: &ReportRow) -> [String; 8] {
    [
        r.section.clone(),
        r.id.clone(),
        r.skipping.clone(),
        r.reward.clone(),
        r.other.clone(),
        format!("{:.3}", r.success_rate),
        format!("{:.2}", r.lon_speed),
        format!("{:.4}", r.lat_speed),
    ]
}

pub fn render_text(rows: &[ReportRow]) -> String {
    let body: Vec<[String; 8]> = rows.iter().map(cells).collect();
    let mut widths = HEADER.map(str::len);
    for r in &body {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cols: &[String]| {
        let padded: Vec<String> = cols.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
    };
    line(&mut out, &HEADER.map(String::from));
    let _ = writeln!(out, "{}", widths.map(|w| "-".repeat(w)).join("-+-"));
    for r in &body {
        line(&mut out, r);
    }
    out
}

pub fn render_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    w.write_record(HEADER).map_err(err)?;
    for r in rows {
        w.write_record(cells(r)).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Every `metrics*.json` file below the given directories, sorted by path.
pub fn collect_metrics(dirs: &[PathBuf]) -> Result<Vec<Metrics>> {
    fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, found)?;
            } else if path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("metrics") && n.ends_with(".json"))
            {
                found.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    for d in dirs {
        walk(d, &mut files)?;
    }
    files.sort();
    files
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Ok(serde_json::from_str(&text)?)
        })
        .collect()
}
