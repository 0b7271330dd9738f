//! Benchmark harness: bound and wall time for every method over a grid of
//! random network shapes.

use std::io::Write;
use std::time::Instant;

use lipbound::{
    generate_random, run_recursion, Activation, Error, Method, Network, StrategyConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct BenchPlan {
    pub depths: Vec<usize>,
    pub widths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Input dimension; `None` uses the width.
    pub in_dim: Option<usize>,
    pub out_dim: usize,
    pub activation: Activation,
    pub c_sn: f64,
    pub c_gc: f64,
    pub c_gcs: f64,
    pub c_shift: f64,
    pub c_interp: f64,
    pub theta: f64,
    pub certified: bool,
    pub jobs: usize,
}

impl BenchPlan {
    pub fn new(depths: Vec<usize>, widths: Vec<usize>, seeds: Vec<u64>) -> Self {
        Self {
            depths,
            widths,
            seeds,
            methods: Method::ALL.to_vec(),
            in_dim: None,
            out_dim: 10,
            activation: Activation::Tanh,
            c_sn: 1.0,
            c_gc: 1.0,
            c_gcs: 1.0,
            c_shift: 2.0,
            c_interp: 1.0,
            theta: 0.5,
            certified: false,
            jobs: 1,
        }
    }

    pub fn with_methods(mut self, methods: Vec<Method>) -> Self {
        self.methods = methods;
        self
    }

    pub fn config(&self, method: Method) -> StrategyConfig {
        let c = match method {
            Method::Sn => self.c_sn,
            Method::Gc => self.c_gc,
            Method::Gcs => self.c_gcs,
            Method::Shift => self.c_shift,
            Method::Interp => self.c_interp,
            Method::Product | Method::Fast => 1.0,
        };
        StrategyConfig::new(method)
            .with_c(c)
            .with_theta(self.theta)
            .certified(self.certified)
    }

    /// Number of rows [`run_bench`] produces.
    pub fn len(&self) -> usize {
        self.depths.len() * self.widths.len() * self.seeds.len() * self.methods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One CSV row. `bound` is empty and `status` names the error when the run
/// failed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub depth: usize,
    pub width: usize,
    pub seed: u64,
    pub method: Method,
    pub c: Option<f64>,
    pub bound: Option<f64>,
    pub seconds: f64,
    pub certified: bool,
    pub status: String,
}

impl BenchRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    /// Wall time divided by the number of hidden layers.
    pub fn seconds_per_layer(&self) -> f64 {
        self.seconds / self.depth as f64
    }
}

fn status_of(e: &Error) -> &'static str {
    match e {
        Error::DefinitenessLost { .. } => "definiteness_lost",
        Error::SpectralNotConverged { .. } | Error::NotConverged { .. } => "not_converged",
        _ => "error",
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::new(crate::exit::FAILURE, e.to_string()))
}

/// Runs every `(depth, width, seed, method)` combination, at most
/// `plan.jobs` at a time, and returns the rows sorted by depth, width, seed
/// and method. Individual failures become rows; only an invalid plan is an
/// error.
pub fn run_bench(plan: &BenchPlan) -> Result<Vec<BenchRow>, CliError> {
    if plan.jobs == 0 {
        return Err(CliError::usage("--jobs must be at least 1"));
    }
    if plan.is_empty() {
        return Err(CliError::usage("empty benchmark grid"));
    }
    for &m in &plan.methods {
        plan.config(m).validate()?;
    }

    let mut shapes = Vec::new();
    for &depth in &plan.depths {
        for &width in &plan.widths {
            for &seed in &plan.seeds {
                shapes.push((depth, width, seed));
            }
        }
    }

    pool(plan.jobs)?.install(|| {
        let nets = shapes
            .par_iter()
            .map(|&(depth, width, seed)| {
                let net = generate_random(
                    depth,
                    width,
                    plan.in_dim.unwrap_or(width),
                    plan.out_dim,
                    seed,
                )
                .map_err(|e| CliError::usage(e.to_string()))?;
                Ok(net.with_activation(plan.activation))
            })
            .collect::<Result<Vec<Network>, CliError>>()?;

        let tasks: Vec<(usize, Method)> = (0..shapes.len())
            .flat_map(|i| plan.methods.iter().map(move |&m| (i, m)))
            .collect();
        let mut rows: Vec<BenchRow> = tasks
            .par_iter()
            .map(|&(i, method)| {
                let (depth, width, seed) = shapes[i];
                let cfg = plan.config(method);
                let start = Instant::now();
                let result = run_recursion(&nets[i], &cfg);
                let seconds = start.elapsed().as_secs_f64();
                let (bound, status) = match &result {
                    Ok(r) => (Some(r.bound), "ok".to_string()),
                    Err(e) => (None, status_of(e).to_string()),
                };
                BenchRow {
                    depth,
                    width,
                    seed,
                    method,
                    c: method.takes_c().then_some(cfg.c),
                    bound,
                    seconds,
                    certified: cfg.certified,
                    status,
                }
            })
            .collect();
        rows.sort_by(|a, b| {
            (a.depth, a.width, a.seed, a.method).cmp(&(b.depth, b.width, b.seed, b.method))
        });
        Ok(rows)
    })
}

/// Writes `rows` as CSV with a header line.
pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_sorted_and_complete() {
        let plan = BenchPlan::new(vec![3, 2], vec![4], vec![2, 1])
            .with_methods(vec![Method::Gc, Method::Fast]);
        let rows = run_bench(&plan).unwrap();
        assert_eq!(rows.len(), plan.len());
        let keys: Vec<_> = rows.iter().map(|r| (r.depth, r.seed, r.method)).collect();
        assert_eq!(
            keys,
            vec![
                (2, 1, Method::Fast),
                (2, 1, Method::Gc),
                (2, 2, Method::Fast),
                (2, 2, Method::Gc),
                (3, 1, Method::Fast),
                (3, 1, Method::Gc),
                (3, 2, Method::Fast),
                (3, 2, Method::Gc),
            ]
        );
        assert!(rows.iter().all(BenchRow::ok));
        assert_eq!(rows[0].c, None);
        assert_eq!(rows[1].c, Some(1.0));
    }

    #[test]
    fn csv_header_matches_schema() {
        let plan = BenchPlan::new(vec![1], vec![2], vec![0]).with_methods(vec![Method::Fast]);
        let mut buf = Vec::new();
        write_csv(&run_bench(&plan).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(
            header,
            "depth,width,seed,method,c,bound,seconds,certified,status"
        );
        assert!(text.lines().nth(1).unwrap().starts_with("1,2,0,fast,,"));
    }

    #[test]
    fn invalid_plans_are_usage_errors() {
        let mut plan = BenchPlan::new(vec![1], vec![2], vec![0]);
        plan.c_shift = 0.5;
        assert_eq!(run_bench(&plan).unwrap_err().code, crate::exit::USAGE);
        let plan = BenchPlan::new(vec![0], vec![2], vec![0]);
        assert_eq!(run_bench(&plan).unwrap_err().code, crate::exit::USAGE);
        let plan = BenchPlan::new(vec![], vec![2], vec![0]);
        assert_eq!(run_bench(&plan).unwrap_err().code, crate::exit::USAGE);
    }
}
