//! Multiplier rules. Each returns a positive diagonal `Lambda` with
//! `Lambda^{-1} > Gamma / 2` for the symmetric PSD input `Gamma`.

use super::{accept_estimate, Method, StrategyConfig};
use crate::error::{Error, Result};
use crate::matrix::{
    power_iteration, power_iteration_op, row_abs_sums, scaled_row_sums, DenseMatrix,
    DiagonalMatrix, POWER_MAX_ITER, POWER_TOL,
};

/// A chosen multiplier plus the statistic it was derived from.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub lambda: DiagonalMatrix,
    pub statistic: f64,
    pub residual: Option<f64>,
}

fn sigma_max(g: &DenseMatrix, layer: usize) -> Result<(f64, f64)> {
    let est = accept_estimate(power_iteration(g, POWER_TOL, POWER_MAX_ITER), layer, || {
        Ok(g.clone())
    })?;
    Ok((est.sigma.max(0.0), est.residual))
}

fn sn_from_sigma(n: usize, sigma: f64, c: f64, d_tilde: f64) -> DiagonalMatrix {
    if sigma > 0.0 {
        DiagonalMatrix::scaled_identity(n, c / sigma)
    } else {
        DiagonalMatrix::scaled_identity(n, d_tilde)
    }
}

/// `Lambda = I / sigma_max(Gamma)`; `d_tilde * I` when `Gamma = 0`.
pub fn strategy_fast(g: &DenseMatrix, d_tilde: f64) -> Result<DiagonalMatrix> {
    let (sigma, _) = sigma_max(g, 0)?;
    Ok(sn_from_sigma(g.rows(), sigma, 1.0, d_tilde))
}

/// `Lambda = c I / sigma_max(Gamma)` for `c` in `(0, 2)`; `d_tilde * I` when
/// `Gamma = 0`.
pub fn strategy_sn(g: &DenseMatrix, c: f64, d_tilde: f64) -> Result<DiagonalMatrix> {
    let (sigma, _) = sigma_max(g, 0)?;
    Ok(sn_from_sigma(g.rows(), sigma, c, d_tilde))
}

fn gc_from_sums(sums: &[f64], c: f64, d_tilde: f64) -> DiagonalMatrix {
    DiagonalMatrix::new(
        sums.iter()
            .map(|&s| if s > 0.0 { c / s } else { d_tilde })
            .collect(),
    )
}

/// Gershgorin rule: `Lambda(i,i) = c / sum_j |Gamma(i,j)|`, or `d_tilde`
/// for a zero row.
pub fn strategy_gc(g: &DenseMatrix, c: f64, d_tilde: f64) -> DiagonalMatrix {
    gc_from_sums(&row_abs_sums(g), c, d_tilde)
}

fn gcs_scaling(g: &DenseMatrix, epsilon_q: Option<f64>) -> Vec<f64> {
    let diag = g.diagonal();
    let eps = epsilon_q.unwrap_or_else(|| 1e-12 * (1.0 + diag.iter().copied().fold(0.0, f64::max)));
    diag.into_iter()
        .map(|d| if d > 0.0 { d } else { eps })
        .collect()
}

/// Scaled Gershgorin rule with `q_i = Gamma(i,i)` (or `epsilon_q` where the
/// diagonal vanishes): `Lambda(i,i) = c / ((1/q_i) sum_j q_j |Gamma(i,j)|)`.
pub fn strategy_gcs(
    g: &DenseMatrix,
    c: f64,
    epsilon_q: Option<f64>,
    d_tilde: f64,
) -> Result<DiagonalMatrix> {
    let q = gcs_scaling(g, epsilon_q);
    let sums = scaled_row_sums(g, &q)?;
    Ok(gc_from_sums(&sums, c, d_tilde))
}

/// Additive floor for the shift rule, `1e-9 * (1 + max_i T(i,i))`.
fn shift_eta(t: &[f64]) -> f64 {
    1e-9 * (1.0 + t.iter().copied().fold(0.0, f64::max))
}

/// Spectral norm of the off-diagonal part of `Gamma / 2`, by power iteration
/// on its square.
fn off_diagonal_norm(g: &DenseMatrix, layer: usize) -> Result<(f64, f64)> {
    let n = g.rows();
    let mut frob2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                frob2 += 0.25 * g.get(i, j) * g.get(i, j);
            }
        }
    }
    if frob2 == 0.0 {
        return Ok((0.0, 0.0));
    }
    let apply_r = |x: &[f64], out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            let row = g.row(i);
            let full: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            *o = 0.5 * (full - row[i] * x[i]);
        }
    };
    let mut tmp = vec![0.0; n];
    let est = accept_estimate(
        power_iteration_op(
            n,
            |x, out| {
                apply_r(x, &mut tmp);
                apply_r(&tmp, out);
            },
            Some(frob2),
            POWER_TOL,
            POWER_MAX_ITER,
        ),
        layer,
        || {
            let mut r = g.clone();
            for i in 0..n {
                r.set(i, i, 0.0);
            }
            let mut r2 = r.matmul(&r)?;
            r2.symmetrize();
            DenseMatrix::from_row_major(n, n, r2.as_slice().iter().map(|v| 0.25 * v).collect())
        },
    )?;
    Ok((est.sigma.max(0.0).sqrt(), est.residual))
}

fn shift_from_norm(g: &DenseMatrix, s: f64, c: f64) -> DiagonalMatrix {
    let t: Vec<f64> = g.diagonal().into_iter().map(|d| 0.5 * d).collect();
    let eta = shift_eta(&t);
    let offset = if c * s >= eta { c * s } else { eta };
    DiagonalMatrix::new(t.into_iter().map(|ti| 1.0 / (ti + offset)).collect())
}

/// Shift rule with `T = diag(Gamma) / 2`:
/// `Lambda(i,i) = 1 / (T(i,i) + c * sigma_max(Gamma/2 - T))` for `c > 1`.
/// When the off-diagonal norm is zero (or `c * s` falls below the floor
/// `eta = 1e-9 (1 + max T(i,i))`), `eta` replaces `c * s`.
pub fn strategy_shift(g: &DenseMatrix, c: f64) -> Result<DiagonalMatrix> {
    let (s, _) = off_diagonal_norm(g, 0)?;
    Ok(shift_from_norm(g, s, c))
}

fn interp_between(sn: &DiagonalMatrix, gc: &DiagonalMatrix, theta: f64) -> DiagonalMatrix {
    if theta == 1.0 {
        return sn.clone();
    }
    if theta == 0.0 {
        return gc.clone();
    }
    DiagonalMatrix::new(
        sn.entries()
            .iter()
            .zip(gc.entries())
            .map(|(a, b)| 1.0 / (theta / a + (1.0 - theta) / b))
            .collect(),
    )
}

/// `Lambda^{-1} = theta Lambda_sn^{-1} + (1 - theta) Lambda_gc^{-1}`, both
/// endpoints at `cfg.c`. `theta` of exactly 0 or 1 returns the endpoint
/// unchanged.
pub fn strategy_interp(
    g: &DenseMatrix,
    theta: f64,
    cfg: &StrategyConfig,
) -> Result<DiagonalMatrix> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidConfig(format!(
            "theta must lie in [0, 1], got {theta}"
        )));
    }
    let sn = strategy_sn(g, cfg.c, cfg.d_tilde)?;
    let gc = strategy_gc(g, cfg.c, cfg.d_tilde);
    Ok(interp_between(&sn, &gc, theta))
}

/// Dispatches to the rule selected by `cfg.method` for layer `layer`.
pub fn select_multiplier(g: &DenseMatrix, cfg: &StrategyConfig, layer: usize) -> Result<Selection> {
    let n = g.rows();
    let max_of = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    Ok(match cfg.method {
        Method::Product => {
            return Err(Error::InvalidConfig(
                "the product bound does not use the recursion".into(),
            ))
        }
        Method::Fast | Method::Sn => {
            let c = if cfg.method == Method::Fast {
                1.0
            } else {
                cfg.c
            };
            let (sigma, residual) = sigma_max(g, layer)?;
            Selection {
                lambda: sn_from_sigma(n, sigma, c, cfg.d_tilde),
                statistic: sigma,
                residual: Some(residual),
            }
        }
        Method::Gc => {
            let sums = row_abs_sums(g);
            Selection {
                lambda: gc_from_sums(&sums, cfg.c, cfg.d_tilde),
                statistic: max_of(&sums),
                residual: None,
            }
        }
        Method::Gcs => {
            let q = gcs_scaling(g, cfg.epsilon_q);
            let sums = scaled_row_sums(g, &q)?;
            Selection {
                lambda: gc_from_sums(&sums, cfg.c, cfg.d_tilde),
                statistic: max_of(&sums),
                residual: None,
            }
        }
        Method::Shift => {
            let (s, residual) = off_diagonal_norm(g, layer)?;
            Selection {
                lambda: shift_from_norm(g, s, cfg.c),
                statistic: s,
                residual: Some(residual),
            }
        }
        Method::Interp => {
            let (sigma, residual) = sigma_max(g, layer)?;
            let sn = sn_from_sigma(n, sigma, cfg.c, cfg.d_tilde);
            let gc = strategy_gc(g, cfg.c, cfg.d_tilde);
            Selection {
                lambda: interp_between(&sn, &gc, cfg.theta),
                statistic: sigma,
                residual: Some(residual),
            }
        }
    })
}
