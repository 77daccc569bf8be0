//! Coordination analysis of logged trajectories.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use pursuit_core::geometry::Point2;
use pursuit_core::metrics::{
    capture_angle_histogram, capture_success_rate, ic_report, ActionLog, CaptureAngleHistogram,
    CaptureSnapshot, IcReport,
};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::tables::{read_table_file, sig9, TableWriter, TrajectoryRow, TRAJECTORY_HEADER};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const IC_REPORT_FILE: &str = "ic_report.json";
pub const ANGLE_FILE: &str = "capture_angles.csv";
pub const ANGLE_STATS_FILE: &str = "capture_angle_stats.csv";
pub const ANALYZE_SUCCESS_FILE: &str = "analysis_success.csv";
pub const ANGLE_HEADER: &str = "ratio,agent,bin,angle_lo,angle_hi,count";
pub const ANGLE_STATS_HEADER: &str = "ratio,agent,captures,circular_mean,circular_variance";
pub const ANALYZE_SUCCESS_HEADER: &str = "ratio,episodes,captures,success_rate";

/// One logged episode, reassembled from its rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub id: u64,
    pub ratio: f64,
    pub actions: ActionLog,
    pub captured: bool,
    pub final_pursuers: Vec<Point2>,
    pub final_evader: Point2,
}

fn malformed(message: String) -> CliError {
    CliError::Usage(format!("inconsistent trajectory log: {message}"))
}

/// Groups rows into episodes, checking the per-step layout
/// `p0..p{n-1}, e`.
pub fn episodes_from_rows(rows: &[TrajectoryRow]) -> Result<Vec<Episode>> {
    let mut out: Vec<Episode> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let first = &rows[i];
        let mut pursuers = Vec::new();
        let mut actions = Vec::new();
        let mut j = i;
        while j < rows.len() && rows[j].episode == first.episode && rows[j].step == first.step {
            match rows[j].pursuer_index()? {
                Some(k) if k == pursuers.len() => {
                    pursuers.push(Point2::new(rows[j].x, rows[j].y)?);
                    actions.push(rows[j].action);
                }
                Some(k) => {
                    return Err(malformed(format!(
                        "episode {} step {}: pursuer p{k} out of order",
                        first.episode, first.step
                    )))
                }
                None => break,
            }
            j += 1;
        }
        let evader = rows.get(j).filter(|r| {
            r.agent == "e" && r.episode == first.episode && r.step == first.step
        });
        let Some(e) = evader else {
            return Err(malformed(format!(
                "episode {} step {}: missing evader row",
                first.episode, first.step
            )));
        };
        let evader = Point2::new(e.x, e.y)?;
        match out.last_mut() {
            Some(ep) if ep.id == first.episode => {
                if ep.final_pursuers.len() != pursuers.len() {
                    return Err(malformed(format!("episode {}: pursuer count changes", ep.id)));
                }
                ep.actions.headings.push(actions);
                ep.captured = e.captured == 1;
                ep.final_pursuers = pursuers;
                ep.final_evader = evader;
            }
            _ => {
                if pursuers.is_empty() {
                    return Err(malformed(format!("episode {}: no pursuers", first.episode)));
                }
                out.push(Episode {
                    id: first.episode,
                    ratio: first.ratio,
                    actions: ActionLog {
                        headings: vec![actions],
                    },
                    captured: e.captured == 1,
                    final_pursuers: pursuers,
                    final_evader: evader,
                });
            }
        }
        i = j + 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioAnalysis {
    pub ratio: f64,
    pub episodes: usize,
    pub captures: usize,
    pub success_rate: f64,
    pub coordination: IcReport,
    /// `None` when no episode ended in capture.
    pub capture_angles: Option<CaptureAngleHistogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub heading_bins: usize,
    pub angle_bins: usize,
    pub ratios: Vec<RatioAnalysis>,
}

/// Analysis per velocity ratio, in ascending ratio order.
pub fn analyze_episodes(
    episodes: &[Episode],
    heading_bins: usize,
    angle_bins: usize,
    keep_pointwise: bool,
) -> Result<AnalysisReport> {
    if episodes.is_empty() {
        return Err(CliError::Usage("trajectory log holds no episodes".into()));
    }
    let mut by_ratio: BTreeMap<u64, Vec<&Episode>> = BTreeMap::new();
    for ep in episodes {
        // Ratios are positive, so the bit pattern orders like the value.
        by_ratio.entry(ep.ratio.to_bits()).or_default().push(ep);
    }
    let mut ratios = Vec::new();
    for (bits, eps) in by_ratio {
        let n = eps[0].final_pursuers.len();
        let logs: Vec<ActionLog> = eps.iter().map(|e| e.actions.clone()).collect();
        let captured: Vec<bool> = eps.iter().map(|e| e.captured).collect();
        let snaps: Vec<CaptureSnapshot> = eps
            .iter()
            .filter(|e| e.captured)
            .map(|e| CaptureSnapshot {
                pursuers: e.final_pursuers.clone(),
                evader: e.final_evader,
            })
            .collect();
        ratios.push(RatioAnalysis {
            ratio: f64::from_bits(bits),
            episodes: eps.len(),
            captures: snaps.len(),
            success_rate: capture_success_rate(&captured)?,
            coordination: ic_report(&logs, n, heading_bins, keep_pointwise)?,
            capture_angles: capture_angle_histogram(&snaps, angle_bins)?,
        });
    }
    Ok(AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION,
        heading_bins,
        angle_bins,
        ratios,
    })
}

pub fn read_report(path: &Path) -> Result<AnalysisReport> {
    let report: AnalysisReport = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(CliError::SchemaVersion {
            file: path.display().to_string(),
            found: report.schema_version.to_string(),
            expected: REPORT_SCHEMA_VERSION,
        });
    }
    Ok(report)
}

/// Reads `trajectories` and writes the report JSON plus the angle and
/// success tables into the configured output directory.
pub fn analyze(config: &ExperimentConfig, trajectories: &Path) -> Result<AnalysisReport> {
    let rows: Vec<TrajectoryRow> = read_table_file(trajectories, TRAJECTORY_HEADER)?;
    let m = &config.metrics;
    let report = analyze_episodes(
        &episodes_from_rows(&rows)?,
        m.heading_bins,
        m.angle_bins,
        m.keep_pointwise,
    )?;
    let out = &config.run.out_dir;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join(IC_REPORT_FILE), serde_json::to_string_pretty(&report)?)?;

    let mut angles = TableWriter::create(&out.join(ANGLE_FILE), ANGLE_HEADER)?;
    let mut stats = TableWriter::create(&out.join(ANGLE_STATS_FILE), ANGLE_STATS_HEADER)?;
    let mut success = TableWriter::create(&out.join(ANALYZE_SUCCESS_FILE), ANALYZE_SUCCESS_HEADER)?;
    for r in &report.ratios {
        success.row([
            sig9(r.ratio),
            r.episodes.to_string(),
            r.captures.to_string(),
            sig9(r.success_rate),
        ])?;
        let Some(h) = &r.capture_angles else { continue };
        let width = 2.0 * PI / h.bins as f64;
        for (agent, counts) in h.counts.iter().enumerate() {
            for (b, c) in counts.iter().enumerate() {
                angles.row([
                    sig9(r.ratio),
                    format!("p{agent}"),
                    b.to_string(),
                    sig9(b as f64 * width),
                    sig9((b + 1) as f64 * width),
                    c.to_string(),
                ])?;
            }
            stats.row([
                sig9(r.ratio),
                format!("p{agent}"),
                h.captures.to_string(),
                sig9(h.circular_mean[agent]),
                sig9(h.circular_variance[agent]),
            ])?;
        }
    }
    angles.finish()?.flush()?;
    stats.finish()?.flush()?;
    success.finish()?.flush()?;
    Ok(report)
}
