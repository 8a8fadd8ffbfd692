use std::io::Write;

use serde::{Deserialize, Serialize};

use super::pipeline::{evaluate, GraphSource, PipelineConfig};
use super::protocol::{Protocol, ProtocolMode};
use crate::error::{Error, Result};
use crate::graph::DescriptorSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Graph `k`; the refined `k_out` and the query `k` follow it unless
    /// pinned in the configuration.
    K,
    /// Clique size `L` of the denoiser.
    CliqueSize,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::K => "k",
            SweepAxis::CliqueSize => "clique_size",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    /// `(value, mAP)` sorted by value.
    pub points: Vec<(usize, f64)>,
    /// Values whose run failed, with the error message.
    pub errors: Vec<(usize, String)>,
    /// Flattened `key=value` echo of the base configuration.
    pub config: Vec<(String, String)>,
}

impl SweepResult {
    pub fn map_at(&self, value: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == value).map(|p| p.1)
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn with_value(cfg: &PipelineConfig, axis: SweepAxis, value: usize) -> Result<PipelineConfig> {
    let mut c = *cfg;
    match axis {
        SweepAxis::K => c.k = value,
        SweepAxis::CliqueSize => match &mut c.source {
            GraphSource::Denoised(d) => d.clique_size = value,
            GraphSource::Reciprocity => {
                return Err(Error::param("axis", "clique_size sweeps need a denoised graph source"))
            }
        },
    }
    Ok(c)
}

/// Runs the full pipeline once per value. Failing values are recorded and the
/// sweep carries on.
pub fn sweep(
    axis: SweepAxis,
    values: &[usize],
    cfg: &PipelineConfig,
    database: &DescriptorSet,
    queries: &DescriptorSet,
    protocol: &Protocol,
    mode: ProtocolMode,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::param("values", "sweep needs at least one value"));
    }
    if axis == SweepAxis::CliqueSize && matches!(cfg.source, GraphSource::Reciprocity) {
        return Err(Error::param("axis", "clique_size sweeps need a denoised graph source"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut points = Vec::new();
    let mut errors = Vec::new();
    for v in sorted {
        match with_value(cfg, axis, v).and_then(|c| evaluate(database, queries, protocol, mode, &c)) {
            Ok(run) => points.push((v, run.map)),
            Err(e) => errors.push((v, e.to_string())),
        }
    }
    let mut config = vec![("axis".to_string(), axis.name().to_string()), ("protocol".to_string(), mode.name().to_string())];
    flatten("", &serde_json::to_value(cfg)?, &mut config);
    Ok(SweepResult {
        axis,
        points,
        errors,
        config,
    })
}

/// Writes `# key=value` header lines, then one `<value> <mAP>` line per point.
/// Failed values appear as `# error <value>: <message>`.
pub fn write_plot_data<W: Write>(mut w: W, result: &SweepResult) -> Result<()> {
    for (k, v) in &result.config {
        writeln!(w, "# {k}={v}")?;
    }
    for (v, msg) in &result.errors {
        writeln!(w, "# error {v}: {msg}")?;
    }
    for (v, map) in &result.points {
        writeln!(w, "{v} {map:.4}")?;
    }
    Ok(())
}
