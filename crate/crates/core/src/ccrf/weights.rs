use nalgebra::DMatrix;

use super::clique::Clique;
use super::sbd::sbd_pmf;
use crate::error::{Error, Result};
use crate::graph::DescriptorSet;

/// Pairwise clique weights in `[0, 1]`, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub weights: DMatrix<f64>,
    pub sigma_d: f64,
    pub sigma_r: f64,
}

/// Weights `exp(-|f_i - f_j|² / 2σ_d² - D_J(Q_i||Q_j)² / 2σ_r²)` over clique
/// members.
///
/// An infinite bandwidth switches the corresponding term off, which is how the
/// descriptor-distance-only and divergence-only variants are obtained.
pub fn weight_matrix(
    x: &DescriptorSet,
    clique: &Clique,
    sigma_d: f64,
    sigma_r: f64,
) -> Result<WeightMatrix> {
    for (name, v) in [("sigma_d", sigma_d), ("sigma_r", sigma_r)] {
        if !(v > 0.0) {
            return Err(Error::param(name, "bandwidth must be positive"));
        }
    }
    let l = clique.size();
    let use_ed = sigma_d.is_finite();
    let use_sd = sigma_r.is_finite();
    let ed_scale = 1.0 / (2.0 * sigma_d * sigma_d);
    let sd_scale = 1.0 / (2.0 * sigma_r * sigma_r);

    // KL(P||Q) + KL(Q||P) = Σ (p - q)(ln p - ln q), so cache the logs once.
    let (probs, logs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if use_sd {
        (0..l)
            .map(|i| {
                let p = sbd_pmf(&clique.sim_matrix, i).probs().to_vec();
                let lp = p.iter().map(|v| v.ln()).collect();
                (p, lp)
            })
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };

    let mut weights = DMatrix::zeros(l, l);
    for a in 0..l {
        let fa = x.row(clique.members[a]);
        for b in a + 1..l {
            let mut exponent = 0.0;
            if use_ed {
                let fb = x.row(clique.members[b]);
                let d2: f64 = fa.iter().zip(fb).map(|(u, v)| (u - v) * (u - v)).sum();
                exponent += d2 * ed_scale;
            }
            if use_sd {
                let dj = 0.5
                    * probs[a]
                        .iter()
                        .zip(&probs[b])
                        .zip(logs[a].iter().zip(&logs[b]))
                        .map(|((p, q), (lp, lq))| (p - q) * (lp - lq))
                        .sum::<f64>();
                let dj = dj.max(0.0);
                exponent += dj * dj * sd_scale;
            }
            let w = (-exponent).exp();
            weights[(a, b)] = w;
            weights[(b, a)] = w;
        }
    }
    Ok(WeightMatrix {
        weights,
        sigma_d,
        sigma_r,
    })
}
