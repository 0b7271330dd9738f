use lipbound::bounds::{default_grid, InterpSearch};
use lipbound::{
    best_of, run_recursion, sweep_c, BestOfConfig, BoundReport, Method, StrategyConfig,
};
use serde::{Deserialize, Serialize};

use super::{load, pool, write_json};
use crate::args::{ComputeArgs, MethodChoice};
use crate::error::CliError;
use crate::manifest::{path_string, CommandKind, GridRecord, RunManifest};

/// The JSON written by `compute`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComputeOutput {
    #[serde(flatten)]
    pub report: BoundReport,
    pub manifest: RunManifest,
}

fn check_flags(a: &ComputeArgs) -> Result<(), CliError> {
    match a.method {
        MethodChoice::Single(m) => {
            if !m.takes_c() && (a.c.is_some() || a.sweep.is_some()) {
                return Err(CliError::usage(format!("{m} does not take a c value")));
            }
            if a.thetas.is_some() {
                return Err(CliError::usage("--thetas only applies to --method best"));
            }
            if a.theta.is_some() && m != Method::Interp {
                return Err(CliError::usage("--theta only applies to --method interp"));
            }
        }
        MethodChoice::Best => {
            if a.c.is_some() {
                return Err(CliError::usage(
                    "--c cannot be combined with --method best; use --sweep",
                ));
            }
            if a.theta.is_some() || a.epsilon_q.is_some() {
                return Err(CliError::usage(
                    "--theta and --epsilon-q only apply to single methods",
                ));
            }
        }
    }
    Ok(())
}

fn best_config(a: &ComputeArgs) -> BestOfConfig {
    let mut cfg = BestOfConfig {
        d_tilde: a.d_tilde,
        certified: a.certified,
        ..BestOfConfig::default()
    };
    if let Some(grid) = &a.sweep {
        let pts = grid.points();
        cfg.sn_grid = pts.clone();
        cfg.gc_grid = pts.clone();
        cfg.gcs_grid = pts;
    }
    if let Some(thetas) = &a.thetas {
        cfg.interp = Some(InterpSearch {
            c_grid: a
                .sweep
                .as_ref()
                .map_or_else(|| default_grid(Method::Interp), |g| g.points()),
            thetas: thetas.clone(),
        });
    }
    cfg
}

fn best_grids(cfg: &BestOfConfig) -> Vec<GridRecord> {
    let mut grids = vec![
        GridRecord {
            method: Method::Sn,
            values: cfg.sn_grid.clone(),
            thetas: None,
        },
        GridRecord {
            method: Method::Gc,
            values: cfg.gc_grid.clone(),
            thetas: None,
        },
        GridRecord {
            method: Method::Gcs,
            values: cfg.gcs_grid.clone(),
            thetas: None,
        },
        GridRecord {
            method: Method::Shift,
            values: cfg.shift_grid.clone(),
            thetas: None,
        },
    ];
    if let Some(interp) = &cfg.interp {
        grids.push(GridRecord {
            method: Method::Interp,
            values: interp.c_grid.clone(),
            thetas: Some(interp.thetas.clone()),
        });
    }
    grids
}

/// One-line summary printed on success.
pub fn summary(report: &BoundReport, best: bool) -> String {
    let mut line = String::new();
    if best {
        line.push_str("best: ");
    }
    line.push_str(report.method.name());
    if report.method.takes_c() {
        line.push_str(&format!(" c={}", report.config.c));
    }
    if report.method == Method::Interp {
        line.push_str(&format!(" theta={}", report.config.theta));
    }
    line.push_str(&format!(
        " bound={:?} time={:.6}s",
        report.bound, report.wall_time_seconds
    ));
    line
}

pub(super) fn run(a: ComputeArgs, arguments: Vec<String>) -> Result<(), CliError> {
    check_flags(&a)?;
    let mut manifest = RunManifest::start(CommandKind::Compute, arguments);
    manifest.network = path_string(Some(&a.net));
    manifest.output = path_string(a.output.as_deref());
    manifest.certified = a.certified;

    let net = load(&a.net)?;
    let pool = pool(a.jobs)?;

    let report = match a.method {
        MethodChoice::Single(method) => {
            let mut cfg = StrategyConfig::new(method)
                .with_c(a.c.unwrap_or(method.default_c()))
                .with_theta(a.theta.unwrap_or(0.5))
                .with_d_tilde(a.d_tilde)
                .certified(a.certified);
            if let Some(eps) = a.epsilon_q {
                cfg = cfg.with_epsilon_q(eps);
            }
            manifest.methods = vec![method];
            match &a.sweep {
                Some(grid) => {
                    let points = grid.points();
                    manifest.grids = vec![GridRecord {
                        method,
                        values: points.clone(),
                        thetas: None,
                    }];
                    pool.install(|| sweep_c(&net, &cfg, &points))?
                }
                None => {
                    if method.takes_c() {
                        manifest.grids = vec![GridRecord {
                            method,
                            values: vec![cfg.c],
                            thetas: None,
                        }];
                    }
                    pool.install(|| run_recursion(&net, &cfg))?
                }
            }
        }
        MethodChoice::Best => {
            let cfg = best_config(&a);
            manifest.methods = vec![
                Method::Product,
                Method::Fast,
                Method::Sn,
                Method::Gc,
                Method::Gcs,
                Method::Shift,
            ];
            if cfg.interp.is_some() {
                manifest.methods.push(Method::Interp);
            }
            manifest.grids = best_grids(&cfg);
            pool.install(|| best_of(&net, &cfg))?
        }
    };

    println!("{}", summary(&report, a.method == MethodChoice::Best));
    if let Some(path) = &a.output {
        let out = ComputeOutput {
            report,
            manifest: manifest.finish(),
        };
        write_json(&out, path)?;
    }
    Ok(())
}
