//! Closed-form Lipschitz bounds built on the layerwise Schur-complement
//! recursion.
//!
//! Starting from `M_1 = I`, every hidden layer forms
//! `Gamma_k = W_k M_k^{-1} W_k^T`, picks a positive diagonal multiplier
//! `Lambda_k` with `Lambda_k^{-1} > Gamma_k / 2`, and continues with
//! `M_{k+1} = 2 Lambda_k - Lambda_k Gamma_k Lambda_k`. The network is then
//! `sqrt(gamma)`-Lipschitz for `gamma = sigma_max(W_{l+1} M_{l+1}^{-1} W_{l+1}^T)`.
//! Strategies differ only in how `Lambda_k` is chosen from `Gamma_k`.

mod strategy;
mod sweep;

pub use strategy::{
    select_multiplier, strategy_fast, strategy_gc, strategy_gcs, strategy_interp, strategy_shift,
    strategy_sn, Selection,
};
pub use sweep::{best_of, default_grid, sweep_c, BestOfConfig, Grid, InterpSearch, SearchPoint};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    cholesky_lower, dense_top_eigen, gamma_matrix, power_iteration, power_iteration_op,
    spectral_upper_bound, DenseMatrix, DiagonalMatrix, LowerFactor, PowerEstimate, POWER_MAX_ITER,
    POWER_TOL,
};
use crate::network::Network;

/// Power-iteration estimates that exhaust their budget are still used when
/// the residual is at most this fraction of the estimate.
pub const ACCEPT_RELATIVE_RESIDUAL: f64 = 1e-6;

/// Bounding method, in tie-breaking order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Product,
    Fast,
    Sn,
    Gc,
    Gcs,
    Shift,
    Interp,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Product,
        Method::Fast,
        Method::Sn,
        Method::Gc,
        Method::Gcs,
        Method::Shift,
        Method::Interp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Product => "product",
            Method::Fast => "fast",
            Method::Sn => "sn",
            Method::Gc => "gc",
            Method::Gcs => "gcs",
            Method::Shift => "shift",
            Method::Interp => "interp",
        }
    }

    /// Whether the method has a tunable `c`.
    pub fn takes_c(self) -> bool {
        !matches!(self, Method::Product | Method::Fast)
    }

    /// `c` used when none is given: 2.0 for shift, 1.0 otherwise.
    pub fn default_c(self) -> f64 {
        if self == Method::Shift {
            2.0
        } else {
            1.0
        }
    }

    /// Whether `c` lies in the method's admissible interval.
    pub fn c_is_valid(self, c: f64) -> bool {
        match self {
            Method::Product | Method::Fast => true,
            Method::Sn | Method::Gc | Method::Gcs | Method::Interp => c > 0.0 && c < 2.0,
            Method::Shift => c > 1.0 && c.is_finite(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Hyperparameters for one run of the recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub method: Method,
    pub c: f64,
    /// Multiplier used for coordinates whose Gershgorin row sum vanishes.
    pub d_tilde: f64,
    /// Scaling used by GCS where `Gamma(i,i) = 0`; `None` means
    /// `1e-12 * (1 + max_i Gamma(i,i))`.
    pub epsilon_q: Option<f64>,
    /// Weight on the SN endpoint for interpolation.
    pub theta: f64,
    /// Use a row-sum upper bound instead of power iteration for the final
    /// spectral norm.
    pub certified: bool,
}

impl StrategyConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            c: method.default_c(),
            d_tilde: 1.0,
            epsilon_q: None,
            theta: 0.5,
            certified: false,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_d_tilde(mut self, d_tilde: f64) -> Self {
        self.d_tilde = d_tilde;
        self
    }

    pub fn with_epsilon_q(mut self, epsilon_q: f64) -> Self {
        self.epsilon_q = Some(epsilon_q);
        self
    }

    pub fn certified(mut self, certified: bool) -> Self {
        self.certified = certified;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.method.c_is_valid(self.c) {
            let range = if self.method == Method::Shift {
                "(1, inf)"
            } else {
                "(0, 2)"
            };
            return Err(Error::InvalidConfig(format!(
                "{} requires c in {range}, got {}",
                self.method, self.c
            )));
        }
        if !(self.d_tilde > 0.0 && self.d_tilde.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "d_tilde must be positive, got {}",
                self.d_tilde
            )));
        }
        if let Some(eps) = self.epsilon_q {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "epsilon_q must be positive, got {eps}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!(
                "theta must lie in [0, 1], got {}",
                self.theta
            )));
        }
        Ok(())
    }
}

/// Per-layer record of the recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerDiagnostic {
    /// 1-based layer index.
    pub layer: usize,
    /// The quantity the strategy used: `sigma_max(Gamma_k)` for fast/sn/interp,
    /// the largest (scaled) row sum for gc/gcs, the off-diagonal spectral
    /// norm for shift, `sigma_max(W_k)` for the product bound.
    pub statistic: f64,
    /// Smallest diagonal entry of `M_{k+1}` (absent for the product bound).
    pub min_diag_m: Option<f64>,
    /// Power-iteration residual behind `statistic`, when one was run.
    pub residual: Option<f64>,
}

/// Multipliers of the LipSDP feasibility matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSequence {
    pub lambdas: Vec<DiagonalMatrix>,
    pub gamma: f64,
}

/// Outcome of a bound computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub method: Method,
    pub config: StrategyConfig,
    /// `sqrt(multipliers.gamma)`.
    pub bound: f64,
    pub per_layer: Vec<LayerDiagnostic>,
    /// Residual of the final power iteration (absent in certified mode).
    pub final_residual: Option<f64>,
    pub wall_time_seconds: f64,
    pub multipliers: MultiplierSequence,
    /// Every grid point evaluated by a sweep, in evaluation order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub search: Vec<SearchPoint>,
}

/// Accepts a converged estimate, or an unconverged one whose residual is
/// small relative to the estimate. Anything else is recomputed from the
/// explicit matrix built by `dense` with a symmetric eigensolver.
pub(crate) fn accept_estimate<F>(
    result: Result<PowerEstimate>,
    layer: usize,
    dense: F,
) -> Result<PowerEstimate>
where
    F: FnOnce() -> Result<DenseMatrix>,
{
    match result {
        Ok(est) => Ok(est),
        Err(Error::NotConverged {
            sigma,
            residual,
            iterations,
        }) => {
            if residual <= ACCEPT_RELATIVE_RESIDUAL * sigma.abs() {
                return Ok(PowerEstimate {
                    sigma,
                    residual,
                    iterations,
                });
            }
            dense_top_eigen(&dense()?).ok_or(Error::SpectralNotConverged {
                layer,
                sigma,
                residual,
            })
        }
        Err(e) => Err(e),
    }
}

/// The smaller of `W^T W` and `W W^T`, explicitly.
fn gram_matrix(w: &DenseMatrix) -> Result<DenseMatrix> {
    let wt = w.transpose();
    let mut g = if w.cols() <= w.rows() {
        wt.matmul(w)?
    } else {
        w.matmul(&wt)?
    };
    g.symmetrize();
    Ok(g)
}

/// Dominant eigenvalue of the smaller of `W^T W` and `W W^T`.
fn gram_power(w: &DenseMatrix) -> Result<PowerEstimate> {
    let (rows, cols) = (w.rows(), w.cols());
    let frob2: f64 = w.as_slice().iter().map(|v| v * v).sum();
    let mut tmp = vec![0.0; rows.max(cols)];
    if cols <= rows {
        power_iteration_op(
            cols,
            |x, out| {
                w.matvec_into(x, &mut tmp[..rows]);
                w.matvec_transposed_into(&tmp[..rows], out);
            },
            Some(frob2),
            POWER_TOL,
            POWER_MAX_ITER,
        )
    } else {
        power_iteration_op(
            rows,
            |x, out| {
                w.matvec_transposed_into(x, &mut tmp[..cols]);
                w.matvec_into(&tmp[..cols], out);
            },
            Some(frob2),
            POWER_TOL,
            POWER_MAX_ITER,
        )
    }
}

/// `sigma_max(W)` via power iteration on the smaller Gram operator. The
/// returned residual refers to the Gram operator.
pub fn spectral_norm(w: &DenseMatrix) -> Result<PowerEstimate> {
    match gram_power(w) {
        Ok(est) => Ok(PowerEstimate {
            sigma: est.sigma.max(0.0).sqrt(),
            ..est
        }),
        Err(Error::NotConverged {
            sigma,
            residual,
            iterations,
        }) => Err(Error::NotConverged {
            sigma: sigma.max(0.0).sqrt(),
            residual,
            iterations,
        }),
        Err(e) => Err(e),
    }
}

/// Product of layer spectral norms.
///
/// The accompanying multipliers are `Lambda_k = I / prod_{m<=k} sigma_m^2`
/// (zero factors skipped) with `gamma = bound^2`.
pub fn product_bound(net: &Network) -> Result<BoundReport> {
    let start = Instant::now();
    let mut bound = 1.0;
    let mut running = 1.0;
    let mut per_layer = Vec::with_capacity(net.num_layers());
    let mut lambdas = Vec::with_capacity(net.hidden_layers());
    for (k, w) in net.weights().enumerate() {
        let est = accept_estimate(gram_power(w), k + 1, || gram_matrix(w))?;
        let sigma = est.sigma.max(0.0).sqrt();
        bound *= sigma;
        if k < net.hidden_layers() {
            if sigma > 0.0 {
                running *= sigma * sigma;
            }
            lambdas.push(DiagonalMatrix::scaled_identity(w.rows(), 1.0 / running));
        }
        per_layer.push(LayerDiagnostic {
            layer: k + 1,
            statistic: sigma,
            min_diag_m: None,
            residual: Some(est.residual),
        });
    }
    Ok(BoundReport {
        method: Method::Product,
        config: StrategyConfig::new(Method::Product),
        bound,
        per_layer,
        final_residual: None,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        multipliers: MultiplierSequence {
            lambdas,
            gamma: bound * bound,
        },
        search: Vec::new(),
    })
}

/// `M = 2 Lambda - Lambda Gamma Lambda`, lower triangle only.
fn next_m(gamma: &DenseMatrix, lambda: &DiagonalMatrix) -> DenseMatrix {
    let n = gamma.rows();
    let l = lambda.entries();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let row = gamma.row(i);
        for j in 0..=i {
            let p = l[i] * l[j];
            let mut v = -(p * row[j]);
            if i == j {
                v += 2.0 * l[i];
            }
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

/// Runs the recursion with the multiplier rule given by `cfg`.
///
/// Fails with [`Error::DefinitenessLost`] when `M_{k+1}` does not factor.
pub fn run_recursion(net: &Network, cfg: &StrategyConfig) -> Result<BoundReport> {
    cfg.validate()?;
    if cfg.method == Method::Product {
        return product_bound(net);
    }
    let start = Instant::now();
    let hidden = net.hidden_layers();
    let mut factor = LowerFactor::identity(net.input_dim());
    let mut lambdas = Vec::with_capacity(hidden);
    let mut per_layer = Vec::with_capacity(hidden);

    for k in 0..hidden {
        let layer = k + 1;
        let gamma = gamma_matrix(net.weight(k), &factor)?;
        if !gamma.is_finite() {
            return Err(Error::DefinitenessLost {
                layer,
                index: 0,
                pivot: f64::NAN,
            });
        }
        let sel = select_multiplier(&gamma, cfg, layer)?;
        let m = next_m(&gamma, &sel.lambda);
        factor = cholesky_lower(&m, 0.0).map_err(|e| match e {
            Error::NotPositiveDefinite { index, pivot } => Error::DefinitenessLost {
                layer,
                index,
                pivot,
            },
            other => other,
        })?;
        per_layer.push(LayerDiagnostic {
            layer,
            statistic: sel.statistic,
            min_diag_m: Some(m.diagonal().into_iter().fold(f64::INFINITY, f64::min)),
            residual: sel.residual,
        });
        lambdas.push(sel.lambda);
    }

    let last = net.weight(hidden);
    let final_gamma = gamma_matrix(last, &factor)?;
    if !final_gamma.is_finite() {
        return Err(Error::DefinitenessLost {
            layer: hidden,
            index: 0,
            pivot: f64::NAN,
        });
    }
    let (gamma, final_residual) = if cfg.certified {
        (spectral_upper_bound(&final_gamma), None)
    } else {
        let est = accept_estimate(
            power_iteration(&final_gamma, POWER_TOL, POWER_MAX_ITER),
            hidden + 1,
            || Ok(final_gamma.clone()),
        )?;
        (est.sigma.max(0.0), Some(est.residual))
    };

    Ok(BoundReport {
        method: cfg.method,
        config: cfg.clone(),
        bound: gamma.sqrt(),
        per_layer,
        final_residual,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        multipliers: MultiplierSequence { lambdas, gamma },
        search: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;

    fn scalar_net() -> Network {
        Network::from_weights(
            vec![
                DenseMatrix::from_rows(&[[2.0]]).unwrap(),
                DenseMatrix::from_rows(&[[3.0]]).unwrap(),
            ],
            Activation::Tanh,
        )
        .unwrap()
    }

    #[test]
    fn product_examples() {
        assert_eq!(product_bound(&scalar_net()).unwrap().bound, 6.0);
        let perm = Network::from_weights(
            vec![DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()],
            Activation::Relu,
        )
        .unwrap();
        assert!((product_bound(&perm).unwrap().bound - 1.0).abs() < 1e-12);
        let ids =
            Network::from_weights(vec![DenseMatrix::identity(3); 6], Activation::Relu).unwrap();
        assert!((product_bound(&ids).unwrap().bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fast_on_scalar_oracle() {
        let r = run_recursion(&scalar_net(), &StrategyConfig::new(Method::Fast)).unwrap();
        assert_eq!(r.multipliers.lambdas[0].entries(), &[0.25]);
        assert_eq!(r.per_layer[0].min_diag_m, Some(0.25));
        assert_eq!(r.multipliers.gamma, 36.0);
        assert_eq!(r.bound, 6.0);
    }

    #[test]
    fn sn_closed_form_on_scalar_oracle() {
        for c in [0.5, 1.0, 1.5] {
            let r =
                run_recursion(&scalar_net(), &StrategyConfig::new(Method::Sn).with_c(c)).unwrap();
            let expected = (36.0 / (c * (2.0 - c))).sqrt();
            assert!((r.bound - expected).abs() <= 1e-9 * expected, "c={c}");
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let net = scalar_net();
        for cfg in [
            StrategyConfig::new(Method::Sn).with_c(2.0),
            StrategyConfig::new(Method::Gc).with_c(0.0),
            StrategyConfig::new(Method::Shift).with_c(1.0),
            StrategyConfig::new(Method::Interp).with_theta(1.5),
            StrategyConfig::new(Method::Gc).with_d_tilde(0.0),
            StrategyConfig::new(Method::Gcs).with_epsilon_q(-1.0),
        ] {
            assert!(matches!(
                run_recursion(&net, &cfg),
                Err(Error::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn single_affine_layer_is_spectral_norm() {
        let net = Network::from_weights(
            vec![DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap()],
            Activation::Tanh,
        )
        .unwrap();
        for m in [Method::Fast, Method::Gc, Method::Shift] {
            let r = run_recursion(&net, &StrategyConfig::new(m)).unwrap();
            assert!((r.bound - 2.0).abs() < 1e-12);
            assert!(r.multipliers.lambdas.is_empty());
        }
    }

    #[test]
    fn method_parsing() {
        assert_eq!("GCS".parse::<Method>().unwrap(), Method::Gcs);
        assert!("best".parse::<Method>().is_err());
        assert!(Method::Product < Method::Fast && Method::Shift < Method::Interp);
    }

    #[test]
    fn report_json_round_trip() {
        let r = run_recursion(&scalar_net(), &StrategyConfig::new(Method::Gcs)).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: BoundReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
