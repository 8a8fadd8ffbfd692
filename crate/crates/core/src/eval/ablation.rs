use std::fmt::Write as _;

use super::pipeline::{evaluate, GraphSource, PipelineConfig};
use super::protocol::{Protocol, ProtocolMode};
use crate::ccrf::CcrfParams;
use crate::error::{Error, Result};
use crate::graph::DescriptorSet;

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub label: &'static str,
    pub euclidean: bool,
    pub statistical: bool,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub mode: ProtocolMode,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn render(&self) -> String {
        let mark = |b: bool| if b { "x" } else { " " };
        let mut s = format!("| weight terms | ED | SD | mAP ({}) |\n|---|---|---|---|\n", self.mode);
        for r in &self.rows {
            let _ = writeln!(s, "| {} | {} | {} | {:.2} |", r.label, mark(r.euclidean), mark(r.statistical), r.map);
        }
        s
    }
}

/// Baseline (no denoising), descriptor-distance-only, divergence-only and
/// combined weight kernels, all with the same pipeline otherwise. A disabled
/// term gets an infinite bandwidth.
pub fn run_ablation(
    database: &DescriptorSet,
    queries: &DescriptorSet,
    protocol: &Protocol,
    mode: ProtocolMode,
    cfg: &PipelineConfig,
) -> Result<AblationTable> {
    let GraphSource::Denoised(base) = cfg.source else {
        return Err(Error::param("source", "ablation needs a denoised graph configuration"));
    };
    let variant = |sigma_d: f64, sigma_r: f64| {
        let mut d = base;
        d.params = CcrfParams { sigma_d, sigma_r, ..base.params };
        PipelineConfig { source: GraphSource::Denoised(d), ..*cfg }
    };
    let configs = [
        ("baseline", false, false, PipelineConfig { source: GraphSource::Reciprocity, ..*cfg }),
        ("ED", true, false, variant(base.params.sigma_d, f64::INFINITY)),
        ("SD", false, true, variant(f64::INFINITY, base.params.sigma_r)),
        ("ED+SD", true, true, variant(base.params.sigma_d, base.params.sigma_r)),
    ];
    let mut rows = Vec::with_capacity(configs.len());
    for (label, euclidean, statistical, c) in configs {
        let run = evaluate(database, queries, protocol, mode, &c)?;
        rows.push(AblationRow {
            label,
            euclidean,
            statistical,
            map: run.map,
        });
    }
    Ok(AblationTable { mode, rows })
}
