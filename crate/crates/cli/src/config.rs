use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ccrf_rerank::ccrf::{CcrfParams, Reselect, Solver};
use ccrf_rerank::diffusion::{DiffusionMode, DiffusionParams};
use ccrf_rerank::eval::{DenoiseConfig, GraphSource, PipelineConfig, ProtocolMode, SweepAxis, SynthConfig, SynthShape};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub graph: GraphSection,
    pub ccrf: Option<CcrfSection>,
    #[serde(default)]
    pub diffusion: DiffusionSection,
    #[serde(default)]
    pub eval: EvalSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub synth: SynthSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub descriptors: Option<PathBuf>,
    pub descriptor_ids: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub query_ids: Option<PathBuf>,
    pub protocol: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// Written by `build-graph` / `denoise`, read by `rerank`.
    pub affinity: Option<PathBuf>,
    /// Written by `rerank`, read by `eval`.
    pub rankings: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            descriptors: None,
            descriptor_ids: None,
            queries: None,
            query_ids: None,
            protocol: None,
            labels: None,
            affinity: None,
            rankings: None,
            output_dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_k() -> usize {
    50
}

fn default_gamma() -> f64 {
    3.0
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            k: default_k(),
            gamma: default_gamma(),
        }
    }
}

/// Bandwidths and clique size have no safe universal default and must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CcrfSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    pub sigma_d: f64,
    pub sigma_r: f64,
    pub clique_size: usize,
    pub k_out: Option<usize>,
    #[serde(default = "default_solver")]
    pub solver: Solver,
    #[serde(default = "default_ccrf_tol")]
    pub tol: f64,
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub reselect: Reselect,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.1
}

fn default_solver() -> Solver {
    Solver::Cg
}

fn default_ccrf_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiffusionSection {
    pub rho: f64,
    pub mode: DiffusionMode,
    pub trunc: Option<usize>,
    pub query_k: Option<usize>,
    pub tol: f64,
    pub max_iter: usize,
    /// Ranked items written per query; all when unset.
    pub top: Option<usize>,
}

impl Default for DiffusionSection {
    fn default() -> Self {
        let d = DiffusionParams::default();
        Self {
            rho: d.rho,
            mode: d.mode,
            trunc: d.trunc,
            query_k: None,
            tol: d.tol,
            max_iter: d.max_iter,
            top: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default)]
    pub protocol_mode: ProtocolMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Reciprocity,
    Denoised,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Reciprocity => "reciprocity",
            GraphKind::Denoised => "denoised",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
    #[serde(default = "default_graphs")]
    pub graphs: Vec<GraphKind>,
}

fn default_graphs() -> Vec<GraphKind> {
    vec![GraphKind::Reciprocity, GraphKind::Denoised]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub shape: SynthShape,
    pub n_per_manifold: usize,
    pub noise_sigma: f64,
    pub lift: f64,
    pub queries_per_manifold: usize,
    pub easy_radius: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let d = SynthConfig::default();
        Self {
            shape: d.shape,
            n_per_manifold: d.n_per_manifold,
            noise_sigma: d.noise_sigma,
            lift: d.lift,
            queries_per_manifold: d.queries_per_manifold,
            easy_radius: d.easy_radius,
        }
    }
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not of the form section.key=value"))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override {assignment:?} has an empty key segment");
    }
    let (last, sections) = parts.split_last().unwrap();
    let mut cur = table;
    for s in sections {
        let entry = cur
            .entry(s.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override {assignment:?}: {s} is not a section"))?;
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => std::fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?
                .parse::<toml::Table>()
                .with_context(|| format!("parsing config {}", p.display()))?,
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let text = toml::to_string(&table)?;
        let cfg: RunConfig = toml::from_str(&text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.graph.k == 0 {
            bail!("graph.k must be at least 1");
        }
        if !(self.graph.gamma > 0.0 && self.graph.gamma.is_finite()) {
            bail!("graph.gamma must be positive and finite");
        }
        if let Some(c) = &self.ccrf {
            if !(c.alpha > 0.0) {
                bail!("ccrf.alpha must be positive");
            }
            if !(c.beta >= 0.0) {
                bail!("ccrf.beta must be nonnegative");
            }
            if !(c.sigma_d > 0.0 && c.sigma_r > 0.0) {
                bail!("ccrf.sigma_d and ccrf.sigma_r must be positive");
            }
            if c.clique_size == 0 {
                bail!("ccrf.clique_size must be at least 1");
            }
            if let Some(k_out) = c.k_out {
                if k_out == 0 || k_out > c.clique_size {
                    bail!("ccrf.k_out must lie in [1, clique_size]");
                }
            }
            if !(c.tol > 0.0) {
                bail!("ccrf.tol must be positive");
            }
        }
        if !(self.diffusion.rho > 0.0 && self.diffusion.rho < 1.0) {
            bail!("diffusion.rho must lie in (0, 1)");
        }
        if !(self.diffusion.tol > 0.0) {
            bail!("diffusion.tol must be positive");
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                bail!("sweep.values must not be empty");
            }
            if s.graphs.is_empty() {
                bail!("sweep.graphs must not be empty");
            }
        }
        Ok(())
    }

    pub fn ccrf(&self) -> Result<&CcrfSection> {
        self.ccrf
            .as_ref()
            .ok_or_else(|| anyhow!("missing [ccrf] section (sigma_d, sigma_r and clique_size are required)"))
    }

    pub fn ccrf_params(&self) -> Result<CcrfParams> {
        let c = self.ccrf()?;
        Ok(CcrfParams {
            alpha: c.alpha,
            beta: c.beta,
            sigma_d: c.sigma_d,
            sigma_r: c.sigma_r,
            gamma: self.graph.gamma,
            solver: c.solver,
            tol: c.tol,
            max_iter: c.max_iter,
            reselect: c.reselect,
        })
    }

    pub fn k_out(&self) -> Result<usize> {
        Ok(self.ccrf()?.k_out.unwrap_or(self.graph.k))
    }

    pub fn diffusion_params(&self) -> DiffusionParams {
        DiffusionParams {
            rho: self.diffusion.rho,
            max_iter: self.diffusion.max_iter,
            tol: self.diffusion.tol,
            mode: self.diffusion.mode,
            trunc: self.diffusion.trunc,
        }
    }

    pub fn pipeline(&self, kind: GraphKind) -> Result<PipelineConfig> {
        let source = match kind {
            GraphKind::Reciprocity => GraphSource::Reciprocity,
            GraphKind::Denoised => GraphSource::Denoised(DenoiseConfig {
                clique_size: self.ccrf()?.clique_size,
                k_out: self.ccrf()?.k_out,
                params: self.ccrf_params()?,
            }),
        };
        Ok(PipelineConfig {
            k: self.graph.k,
            gamma: self.graph.gamma,
            source,
            diffusion: self.diffusion_params(),
            query_k: self.diffusion.query_k,
        })
    }

    pub fn synth(&self) -> SynthConfig {
        let s = &self.synth;
        SynthConfig {
            shape: s.shape,
            n_per_manifold: s.n_per_manifold,
            noise_sigma: s.noise_sigma,
            lift: s.lift,
            queries_per_manifold: s.queries_per_manifold,
            easy_radius: s.easy_radius,
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
