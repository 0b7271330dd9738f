//! Independent checks of a computed bound.
//!
//! Two routes that share nothing with the recursion beyond the multipliers
//! it reports: the full LipSDP block matrix is assembled and tested for
//! positive semidefiniteness, and the Jacobian norm is sampled to bound the
//! Lipschitz constant from below.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundReport, MultiplierSequence};
use crate::error::{Error, Result};
use crate::matrix::{cholesky_lower, default_psd_shift, DenseMatrix};
use crate::network::Network;
use crate::rng::{derive_seed, SplitMix64};

/// Largest LMI dimension verified by default.
pub const DEFAULT_DIMENSION_CAP: usize = 2000;

/// Default sampling radius for the empirical lower bound.
pub const DEFAULT_RADIUS: f64 = 10.0;

/// Slack allowed on `bound - empirical_lower` before it counts as negative,
/// relative to `max(1, bound)`. Covers the last-digit disagreement between
/// two power iterations on a tight instance.
pub const MARGIN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiCertificate {
    /// `n_0 + n_1 + ... + n_l + n_{l+1}`.
    pub dimension: usize,
    pub shift_used: f64,
    pub psd: bool,
    /// Smallest Cholesky pivot minus the shift; the failing pivot minus the
    /// shift when factorization breaks down.
    pub min_pivot_estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub bound: f64,
    pub empirical_lower: f64,
    pub samples: usize,
    pub margin: f64,
    pub lmi: Option<LmiCertificate>,
    /// Why the LMI check did not run, if it did not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lmi_skipped: Option<String>,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

/// Whether and how the LMI check runs during validation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LmiMode {
    /// Run when the dimension is within the cap, skip silently otherwise.
    Auto,
    /// Run; report the cap violation when it is exceeded.
    Required,
    Skip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationOptions {
    pub samples: usize,
    pub seed: u64,
    pub radius: f64,
    pub dimension_cap: usize,
    pub lmi: LmiMode,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            samples: 200,
            seed: 0,
            radius: DEFAULT_RADIUS,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            lmi: LmiMode::Auto,
        }
    }
}

/// Total LMI dimension for `net`.
pub fn lmi_dimension(net: &Network) -> usize {
    net.dims().iter().sum()
}

fn check_multipliers(net: &Network, ms: &MultiplierSequence) -> Result<()> {
    if ms.lambdas.len() != net.hidden_layers() {
        return Err(Error::DimensionMismatch(format!(
            "{} multipliers for {} hidden layers",
            ms.lambdas.len(),
            net.hidden_layers()
        )));
    }
    for (k, lam) in ms.lambdas.iter().enumerate() {
        if lam.dim() != net.weight(k).rows() {
            return Err(Error::DimensionMismatch(format!(
                "multiplier {} has dimension {}, layer has {} neurons",
                k + 1,
                lam.dim(),
                net.weight(k).rows()
            )));
        }
    }
    Ok(())
}

/// Block-tridiagonal LipSDP matrix with diagonal blocks
/// `I, 2 Lambda_1, ..., 2 Lambda_l, gamma I` and off-diagonal blocks
/// `-Lambda_k W_k` (below) and `-W_{l+1}` (last), mirrored above.
pub fn assemble_lipsdp(net: &Network, ms: &MultiplierSequence) -> Result<DenseMatrix> {
    check_multipliers(net, ms)?;
    let dims = net.dims();
    let total: usize = dims.iter().sum();
    let mut offsets = Vec::with_capacity(dims.len());
    let mut acc = 0;
    for d in &dims {
        offsets.push(acc);
        acc += d;
    }
    let last = dims.len() - 1;
    let mut s = DenseMatrix::zeros(total, total);

    for i in 0..dims[0] {
        s.set(i, i, 1.0);
    }
    for (k, lam) in ms.lambdas.iter().enumerate() {
        let off = offsets[k + 1];
        for (i, &l) in lam.entries().iter().enumerate() {
            s.set(off + i, off + i, 2.0 * l);
        }
    }
    for i in 0..dims[last] {
        s.set(offsets[last] + i, offsets[last] + i, ms.gamma);
    }

    for (k, w) in net.weights().enumerate() {
        let row_off = offsets[k + 1];
        let col_off = offsets[k];
        for i in 0..w.rows() {
            let scale = ms.lambdas.get(k).map_or(1.0, |lam| lam.entries()[i]);
            for (j, &wij) in w.row(i).iter().enumerate() {
                let v = -(scale * wij);
                s.set(row_off + i, col_off + j, v);
                s.set(col_off + j, row_off + i, v);
            }
        }
    }
    Ok(s)
}

/// Assembles the LipSDP matrix and checks it with a shifted Cholesky
/// factorization, refusing matrices above `DEFAULT_DIMENSION_CAP`.
pub fn verify_feasibility(net: &Network, ms: &MultiplierSequence) -> Result<LmiCertificate> {
    verify_feasibility_capped(net, ms, DEFAULT_DIMENSION_CAP)
}

pub fn verify_feasibility_capped(
    net: &Network,
    ms: &MultiplierSequence,
    cap: usize,
) -> Result<LmiCertificate> {
    let dimension = lmi_dimension(net);
    if dimension > cap {
        return Err(Error::DimensionCapExceeded { dimension, cap });
    }
    let s = assemble_lipsdp(net, ms)?;
    let shift = default_psd_shift(&s);
    let (psd, min_pivot_estimate) = match cholesky_lower(&s, shift) {
        Ok(l) => (true, l.min_pivot() - shift),
        Err(Error::NotPositiveDefinite { pivot, .. }) => (false, pivot - shift),
        Err(e) => return Err(e),
    };
    Ok(LmiCertificate {
        dimension,
        shift_used: shift,
        psd,
        min_pivot_estimate,
    })
}

/// Sample `index` (0-based) of the ball of `radius` in `dim` dimensions:
/// a normalized Gaussian direction scaled by `radius * u^(1/dim)`, all drawn
/// from its own derived stream.
fn ball_sample(seed: u64, index: u64, dim: usize, radius: f64) -> Vec<f64> {
    let mut rng = SplitMix64::new(derive_seed(seed, index));
    let mut x: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = radius * rng.next_f64().powf(1.0 / dim as f64);
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v *= r / norm);
    }
    x
}

/// Largest Jacobian spectral norm over the origin and `n_samples` points
/// drawn uniformly from the ball of `radius`. Sample `i` depends only on
/// `(seed, i)`, so larger sample counts extend smaller ones.
pub fn empirical_lower_bound(
    net: &Network,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("n_samples must be at least 1".into()));
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidConfig(format!("invalid radius {radius}")));
    }
    let dim = net.input_dim();
    let origin = net.jacobian_sigma(&vec![0.0; dim])?;
    let sampled = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| net.jacobian_sigma(&ball_sample(seed, i, dim, radius)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(sampled.into_iter().fold(origin, f64::max))
}

/// Runs both checks and records every failure without erroring.
pub fn assess(
    net: &Network,
    report: &BoundReport,
    opts: &ValidationOptions,
) -> Result<ValidationReport> {
    let empirical_lower = empirical_lower_bound(net, opts.samples, opts.radius, opts.seed)?;
    let margin = report.bound - empirical_lower;
    let mut failures = Vec::new();
    if margin < -MARGIN_TOLERANCE * report.bound.max(1.0) {
        failures.push(format!(
            "bound {} is below the empirical lower bound {}",
            report.bound, empirical_lower
        ));
    }

    let mut lmi = None;
    let mut lmi_skipped = None;
    if opts.lmi != LmiMode::Skip {
        let ms = MultiplierSequence {
            lambdas: report.multipliers.lambdas.clone(),
            gamma: report.bound * report.bound,
        };
        match verify_feasibility_capped(net, &ms, opts.dimension_cap) {
            Ok(cert) => {
                if !cert.psd {
                    failures.push(format!(
                        "LipSDP matrix is not PSD (pivot estimate {:e})",
                        cert.min_pivot_estimate
                    ));
                }
                lmi = Some(cert);
            }
            Err(e @ Error::DimensionCapExceeded { .. }) => {
                lmi_skipped = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
    } else {
        lmi_skipped = Some("disabled".into());
    }

    Ok(ValidationReport {
        bound: report.bound,
        empirical_lower,
        samples: opts.samples,
        margin,
        lmi,
        lmi_skipped,
        passed: failures.is_empty(),
        failures,
    })
}

/// [`assess`] with default radius and cap, failing with
/// [`Error::ValidationFailed`] on a negative margin or a non-PSD certificate.
pub fn validate(
    net: &Network,
    report: &BoundReport,
    n_samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    let opts = ValidationOptions {
        samples: n_samples,
        seed,
        ..ValidationOptions::default()
    };
    let v = assess(net, report, &opts)?;
    if v.passed {
        Ok(v)
    } else {
        Err(Error::ValidationFailed(v.failures.join("; ")))
    }
}
