//! Per-decision and summary CSV output.

use std::fmt::Write as _;
use std::path::Path;

use crate::catalog::QueryId;
use crate::error::{Error, Result};
use crate::queue::ScheduleOutcome;

pub const METRICS_HEADER: &str = "scheduler,step,query_id,hits,misses,hit_ratio,cum_cost";
pub const SUMMARY_HEADER: &str = "scheduler,checkpoint,avg_hit_ratio,total_cost";

/// Simulated execution cost: `hits * hit_cost + misses * miss_cost`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub hit_cost: f64,
    pub miss_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            hit_cost: 1.0,
            miss_cost: 100.0,
        }
    }
}

impl CostModel {
    pub fn cost(&self, hits: u64, misses: u64) -> f64 {
        hits as f64 * self.hit_cost + misses as f64 * self.miss_cost
    }

    pub fn total(&self, outcome: &ScheduleOutcome) -> f64 {
        outcome
            .decisions
            .iter()
            .map(|d| self.cost(d.stats.hits, d.stats.misses))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scheduler: String,
    pub step: usize,
    pub query_id: QueryId,
    pub hits: u64,
    pub misses: u64,
    pub hit_ratio: f64,
    pub cum_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scheduler: String,
    pub checkpoint: u64,
    pub avg_hit_ratio: f64,
    pub total_cost: f64,
}

pub fn metrics_rows(scheduler: &str, outcome: &ScheduleOutcome, cost: CostModel) -> Vec<MetricsRow> {
    let mut cum_cost = 0.0;
    outcome
        .decisions
        .iter()
        .enumerate()
        .map(|(step, d)| {
            cum_cost += cost.cost(d.stats.hits, d.stats.misses);
            MetricsRow {
                scheduler: scheduler.to_string(),
                step,
                query_id: d.query_id,
                hits: d.stats.hits,
                misses: d.stats.misses,
                hit_ratio: d.stats.hit_ratio(),
                cum_cost,
            }
        })
        .collect()
}

pub fn format_metrics(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6},{:.6}",
            r.scheduler, r.step, r.query_id, r.hits, r.misses, r.hit_ratio, r.cum_cost
        );
    }
    out
}

pub fn format_summary(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6}",
            r.scheduler, r.checkpoint, r.avg_hit_ratio, r.total_cost
        );
    }
    out
}

pub fn emit_metrics(rows: &[MetricsRow], path: &Path) -> Result<()> {
    std::fs::write(path, format_metrics(rows)).map_err(|e| Error::io(path, e))
}

pub fn emit_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    std::fs::write(path, format_summary(rows)).map_err(|e| Error::io(path, e))
}

fn field<T: std::str::FromStr>(value: Option<&str>, line: usize) -> Result<T> {
    value
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::validation(format!("malformed metrics line {line}")))
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::validation("missing metrics header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let mut cols = line.split(',');
            let scheduler = field::<String>(cols.next(), i + 2)?;
            Ok(MetricsRow {
                scheduler,
                step: field(cols.next(), i + 2)?,
                query_id: field(cols.next(), i + 2)?,
                hits: field(cols.next(), i + 2)?,
                misses: field(cols.next(), i + 2)?,
                hit_ratio: field(cols.next(), i + 2)?,
                cum_cost: field(cols.next(), i + 2)?,
            })
        })
        .collect()
}
