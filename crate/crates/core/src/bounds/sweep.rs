//! Grid search over the scalar `c` and the best-of reduction across methods.

use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{product_bound, run_recursion, BoundReport, Method, StrategyConfig};
use crate::error::{Error, Result};
use crate::network::Network;

/// A set of `c` values.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    /// `lo, lo + step, ...` up to and including `hi` (within rounding).
    Range {
        lo: f64,
        hi: f64,
        step: f64,
    },
    List(Vec<f64>),
}

impl Grid {
    /// Grid points; range points are rounded to 12 decimals so that e.g.
    /// `0.1:1.9:0.1` contains exactly `1.0`.
    pub fn points(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { lo, hi, step } => {
                if step.is_nan() || *step <= 0.0 || hi < lo {
                    return Vec::new();
                }
                let count = ((hi - lo) / step + 1e-9).floor() as usize;
                (0..=count)
                    .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
                    .collect()
            }
        }
    }
}

impl FromStr for Grid {
    type Err = Error;

    /// Accepts `lo:hi:step` or a comma-separated list.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse grid {s:?}"));
        if s.contains(':') {
            let parts: Vec<f64> = s
                .split(':')
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            match parts.as_slice() {
                &[lo, hi, step] if step > 0.0 && hi >= lo => Ok(Grid::Range { lo, hi, step }),
                _ => Err(bad()),
            }
        } else {
            let pts = s
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            if pts.is_empty() {
                return Err(bad());
            }
            Ok(Grid::List(pts))
        }
    }
}

/// Default `c` grid for a method: `{0.05, 0.10, ..., 1.95, 1.99}` for the
/// Gershgorin/spectral rules, `{1.01, 1.1, 1.3, 1.5, 1.7, 2, 3, 5}` for shift,
/// and `{1}` for methods without a `c`.
pub fn default_grid(method: Method) -> Vec<f64> {
    match method {
        Method::Sn | Method::Gc | Method::Gcs | Method::Interp => {
            let mut v = Grid::Range {
                lo: 0.05,
                hi: 1.95,
                step: 0.05,
            }
            .points();
            v.push(1.99);
            v
        }
        Method::Shift => vec![1.01, 1.1, 1.3, 1.5, 1.7, 2.0, 3.0, 5.0],
        Method::Product | Method::Fast => vec![1.0],
    }
}

/// One evaluated point of a search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub method: Method,
    pub c: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    /// Why the point was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SearchPoint {
    fn from_result(cfg: &StrategyConfig, r: &Result<BoundReport>) -> Self {
        Self {
            method: cfg.method,
            c: cfg.c,
            theta: (cfg.method == Method::Interp).then_some(cfg.theta),
            bound: r.as_ref().ok().map(|r| r.bound),
            error: r.as_ref().err().map(|e| e.to_string()),
        }
    }
}

fn skippable(e: &Error) -> bool {
    matches!(
        e,
        Error::DefinitenessLost { .. } | Error::SpectralNotConverged { .. }
    )
}

/// Evaluates every configuration concurrently and keeps the smallest bound,
/// earliest configuration first on ties. Points that lose definiteness or
/// fail to converge are skipped and recorded.
fn reduce_configs(net: &Network, configs: Vec<StrategyConfig>) -> Result<BoundReport> {
    let start = Instant::now();
    for cfg in &configs {
        cfg.validate()?;
    }
    let results: Vec<Result<BoundReport>> = configs
        .par_iter()
        .map(|cfg| run_recursion(net, cfg))
        .collect();

    let mut search = Vec::with_capacity(configs.len());
    let mut best: Option<BoundReport> = None;
    for (cfg, res) in configs.iter().zip(results) {
        search.push(SearchPoint::from_result(cfg, &res));
        match res {
            Ok(report) => {
                if best.as_ref().is_none_or(|b| report.bound < b.bound) {
                    best = Some(report);
                }
            }
            Err(e) if skippable(&e) => {}
            Err(e) => return Err(e),
        }
    }
    let mut best = best.ok_or(Error::AllInfeasible {
        attempted: configs.len(),
    })?;
    best.search = search;
    best.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(best)
}

/// Runs the recursion for every `c` in `grid` with the remaining settings
/// taken from `base`, returning the report with the smallest bound.
pub fn sweep_c(net: &Network, base: &StrategyConfig, grid: &[f64]) -> Result<BoundReport> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty c grid".into()));
    }
    let configs = grid.iter().map(|&c| base.clone().with_c(c)).collect();
    reduce_configs(net, configs)
}

/// Interpolation candidates for [`best_of`].
#[derive(Clone, Debug, PartialEq)]
pub struct InterpSearch {
    pub c_grid: Vec<f64>,
    pub thetas: Vec<f64>,
}

/// Per-method grids for [`best_of`].
#[derive(Clone, Debug, PartialEq)]
pub struct BestOfConfig {
    pub sn_grid: Vec<f64>,
    pub gc_grid: Vec<f64>,
    pub gcs_grid: Vec<f64>,
    pub shift_grid: Vec<f64>,
    pub interp: Option<InterpSearch>,
    pub d_tilde: f64,
    pub certified: bool,
}

impl Default for BestOfConfig {
    fn default() -> Self {
        Self {
            sn_grid: default_grid(Method::Sn),
            gc_grid: default_grid(Method::Gc),
            gcs_grid: default_grid(Method::Gcs),
            shift_grid: default_grid(Method::Shift),
            interp: None,
            d_tilde: 1.0,
            certified: false,
        }
    }
}

impl BestOfConfig {
    fn base(&self, method: Method) -> StrategyConfig {
        StrategyConfig::new(method)
            .with_d_tilde(self.d_tilde)
            .certified(self.certified)
    }

    /// Every configuration in candidate order: product, fast, sn, gc, gcs,
    /// shift, interp.
    fn configs(&self) -> Vec<StrategyConfig> {
        let mut out = vec![self.base(Method::Product), self.base(Method::Fast)];
        for (method, grid) in [
            (Method::Sn, &self.sn_grid),
            (Method::Gc, &self.gc_grid),
            (Method::Gcs, &self.gcs_grid),
            (Method::Shift, &self.shift_grid),
        ] {
            out.extend(grid.iter().map(|&c| self.base(method).with_c(c)));
        }
        if let Some(interp) = &self.interp {
            for &theta in &interp.thetas {
                out.extend(
                    interp
                        .c_grid
                        .iter()
                        .map(|&c| self.base(Method::Interp).with_c(c).with_theta(theta)),
                );
            }
        }
        out
    }
}

/// Smallest bound over the product bound, the fast recursion and sweeps of
/// every other method. Ties go to the earlier candidate.
pub fn best_of(net: &Network, cfg: &BestOfConfig) -> Result<BoundReport> {
    let configs = cfg.configs();
    let report = reduce_configs(net, configs)?;
    debug_assert!(report.bound <= product_bound(net).map_or(f64::INFINITY, |p| p.bound));
    Ok(report)
}
