use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::protocol::{Protocol, QueryGroundTruth};
use crate::error::{Error, Result};
use crate::graph::DescriptorSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthShape {
    /// Two interleaved half circles.
    TwoMoons,
    /// Concentric circles of radius 1 and 0.5.
    TwoCircles,
}

/// Generator settings. Points in the plane are centered and lifted to unit
/// vectors `(x, y, lift) / ‖(x, y, lift)‖`, so inner products stay positive
/// for points within distance `lift` of the center and decrease with planar
/// distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub shape: SynthShape,
    pub n_per_manifold: usize,
    pub noise_sigma: f64,
    pub lift: f64,
    /// Held-out queries per manifold (benchmark only).
    pub queries_per_manifold: usize,
    /// Same-manifold items within this planar distance of a query are easy
    /// positives, the rest are hard (benchmark only).
    pub easy_radius: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            shape: SynthShape::TwoMoons,
            n_per_manifold: 200,
            noise_sigma: 0.05,
            lift: 2.0,
            queries_per_manifold: 10,
            easy_radius: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Planar points before centering and lifting.
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub descriptors: DescriptorSet,
}

fn manifold_point(shape: SynthShape, label: usize, t: f64) -> [f64; 2] {
    match (shape, label) {
        (SynthShape::TwoMoons, 0) => [t.cos(), t.sin()],
        (SynthShape::TwoMoons, _) => [1.0 - t.cos(), 0.5 - t.sin()],
        (SynthShape::TwoCircles, 0) => [t.cos(), t.sin()],
        (SynthShape::TwoCircles, _) => [0.5 * t.cos(), 0.5 * t.sin()],
    }
}

fn center(shape: SynthShape) -> [f64; 2] {
    match shape {
        SynthShape::TwoMoons => [0.5, 0.25],
        SynthShape::TwoCircles => [0.0, 0.0],
    }
}

fn param_range(shape: SynthShape) -> f64 {
    match shape {
        SynthShape::TwoMoons => std::f64::consts::PI,
        SynthShape::TwoCircles => 2.0 * std::f64::consts::PI,
    }
}

fn lift(points: &[[f64; 2]], shape: SynthShape, height: f64) -> Result<DescriptorSet> {
    let c = center(shape);
    let mut data = Vec::with_capacity(points.len() * 3);
    for p in points {
        data.extend_from_slice(&[p[0] - c[0], p[1] - c[1], height]);
    }
    let mut set = DescriptorSet::from_flat(3, data, None)?;
    set.normalize_rows();
    Ok(set)
}

fn check(n: usize, noise_sigma: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::param("n_per_manifold", "need at least 2 points per manifold"));
    }
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::param("noise_sigma", "must be nonnegative"));
    }
    Ok(())
}

fn sample(
    shape: SynthShape,
    n_per: usize,
    noise: &Normal<f64>,
    rng: &mut ChaCha8Rng,
    evenly: bool,
) -> (Vec<[f64; 2]>, Vec<usize>) {
    let range = param_range(shape);
    let mut points = Vec::with_capacity(2 * n_per);
    let mut labels = Vec::with_capacity(2 * n_per);
    for label in 0..2 {
        for i in 0..n_per {
            let t = if evenly {
                match shape {
                    SynthShape::TwoMoons => range * i as f64 / (n_per - 1) as f64,
                    SynthShape::TwoCircles => range * i as f64 / n_per as f64,
                }
            } else {
                rng.random_range(0.0..range)
            };
            let mut p = manifold_point(shape, label, t);
            p[0] += noise.sample(rng);
            p[1] += noise.sample(rng);
            points.push(p);
            labels.push(label);
        }
    }
    (points, labels)
}

/// Two noisy planar manifolds, evenly parameterized, lifted to 3-d unit
/// descriptors with the default lift. Output depends only on the arguments.
pub fn synth_manifolds(n_per_manifold: usize, noise_sigma: f64, shape: SynthShape, seed: u64) -> Result<SyntheticData> {
    let cfg = SynthConfig {
        shape,
        n_per_manifold,
        noise_sigma,
        seed,
        ..SynthConfig::default()
    };
    synth_manifolds_with(&cfg)
}

pub fn synth_manifolds_with(cfg: &SynthConfig) -> Result<SyntheticData> {
    check(cfg.n_per_manifold, cfg.noise_sigma)?;
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::param("noise_sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (points, labels) = sample(cfg.shape, cfg.n_per_manifold, &noise, &mut rng, true);
    let descriptors = lift(&points, cfg.shape, cfg.lift)?;
    Ok(SyntheticData {
        points,
        labels,
        descriptors,
    })
}

/// Database, held-out queries and ground truth drawn from the same manifolds.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthBenchmark {
    pub database: SyntheticData,
    pub queries: SyntheticData,
    pub protocol: Protocol,
}

pub fn synth_benchmark(cfg: &SynthConfig) -> Result<SynthBenchmark> {
    let database = synth_manifolds_with(cfg)?;
    if cfg.queries_per_manifold == 0 {
        return Err(Error::param("queries_per_manifold", "must be at least 1"));
    }
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::param("noise_sigma", e.to_string()))?;
    // separate stream so the database does not depend on the query count
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let (qpoints, qlabels) = sample(cfg.shape, cfg.queries_per_manifold, &noise, &mut rng, false);
    let qdesc = lift(&qpoints, cfg.shape, cfg.lift)?;
    let ids: Vec<String> = (0..qpoints.len()).map(|i| format!("q{i}")).collect();
    let queries = SyntheticData {
        descriptors: DescriptorSet::from_flat(3, qdesc.as_flat().to_vec(), Some(ids.clone()))?,
        points: qpoints,
        labels: qlabels,
    };
    let protocol = Protocol {
        queries: (0..queries.points.len())
            .map(|q| {
                let (mut easy, mut hard) = (Vec::new(), Vec::new());
                let qp = queries.points[q];
                for (i, (p, &l)) in database.points.iter().zip(&database.labels).enumerate() {
                    if l != queries.labels[q] {
                        continue;
                    }
                    let d = ((p[0] - qp[0]).powi(2) + (p[1] - qp[1]).powi(2)).sqrt();
                    if d <= cfg.easy_radius {
                        easy.push(i);
                    } else {
                        hard.push(i);
                    }
                }
                QueryGroundTruth {
                    id: ids[q].clone(),
                    easy,
                    hard,
                    junk: Vec::new(),
                }
            })
            .collect(),
    };
    Ok(SynthBenchmark {
        database,
        queries,
        protocol,
    })
}
