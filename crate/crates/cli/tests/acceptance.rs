//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use lipbound::bounds::{default_grid, strategy_shift};
use lipbound::certify::empirical_lower_bound;
use lipbound::{
    best_of, generate_random, product_bound, run_recursion, sweep_c, verify_feasibility,
    Activation, BestOfConfig, DenseMatrix, Method, Network, StrategyConfig,
};
use lipbound_cli::bench::{run_bench, BenchPlan};

const ORACLE_REL_TOL: f64 = 1e-9;
const SN_FAST_REL_TOL: f64 = 1e-10;
const SHARPNESS_SCALE: f64 = 0.9;
const LMI_MAX_DIMENSION: usize = 500;
const SANDWICH_SAMPLES: usize = 200;
const MIN_IMPROVEMENT: f64 = 1e-3;
const ROW_SUM_TIME_RATIO: f64 = 1.5;

const ORACLE_LIMIT: Duration = Duration::from_secs(1);
const EQUIVALENCE_LIMIT: Duration = Duration::from_secs(30);
const LMI_LIMIT: Duration = Duration::from_secs(120);
const SANDWICH_LIMIT: Duration = Duration::from_secs(120);
const BENCH_LIMIT: Duration = Duration::from_secs(600);

type Check = Result<String, String>;
type Criterion<'a> = (
    &'static str,
    Option<Duration>,
    Box<dyn FnOnce() -> Check + 'a>,
);

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_net(depth: usize, width: usize, seed: u64) -> Network {
    generate_random(depth, width, width, 10, seed).expect("valid shape")
}

fn scalar_oracle() -> Network {
    Network::from_weights(
        vec![
            DenseMatrix::from_rows(&[[2.0]]).unwrap(),
            DenseMatrix::from_rows(&[[3.0]]).unwrap(),
        ],
        Activation::Tanh,
    )
    .unwrap()
}

fn equivalence_nets() -> Vec<Network> {
    (0..20)
        .map(|i| {
            let depth = [3, 10, 30][i % 3];
            let width = [10, 50][(i / 3) % 2];
            random_net(depth, width, 200 + i as u64)
        })
        .collect()
}

fn lmi_nets() -> Vec<Network> {
    [
        (1, 10),
        (2, 20),
        (3, 30),
        (4, 40),
        (5, 50),
        (6, 60),
        (8, 50),
        (10, 40),
        (12, 30),
        (20, 20),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (d, w))| random_net(d, w, 300 + i as u64))
    .collect()
}

fn sandwich_nets() -> Vec<Network> {
    [
        (2, 100),
        (5, 20),
        (10, 50),
        (15, 80),
        (20, 30),
        (25, 25),
        (30, 100),
        (40, 60),
        (50, 50),
        (50, 100),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (d, w))| random_net(d, w, 400 + i as u64))
    .collect()
}

/// Every method at the hyperparameters the LMI and sandwich suites cover.
fn method_configs() -> Vec<StrategyConfig> {
    let mut out = vec![StrategyConfig::new(Method::Fast)];
    out.extend([0.5, 1.3, 1.9].map(|c| StrategyConfig::new(Method::Sn).with_c(c)));
    out.extend([1.0, 1.99].map(|c| StrategyConfig::new(Method::Gc).with_c(c)));
    out.extend([1.0, 1.99].map(|c| StrategyConfig::new(Method::Gcs).with_c(c)));
    out.extend([1.5, 2.0].map(|c| StrategyConfig::new(Method::Shift).with_c(c)));
    out.extend([0.25, 0.75].map(|t| StrategyConfig::new(Method::Interp).with_theta(t)));
    out
}

fn label(cfg: &StrategyConfig) -> String {
    match cfg.method {
        Method::Interp => format!("interp(theta={})", cfg.theta),
        m if m.takes_c() => format!("{m}(c={})", cfg.c),
        m => m.to_string(),
    }
}

fn scalar_oracle_exactness() -> Check {
    let net = scalar_oracle();
    let product = product_bound(&net).map_err(|e| e.to_string())?.bound;
    ensure(rel(product, 6.0) <= ORACLE_REL_TOL, || {
        format!("product {product}")
    })?;
    let fast = run_recursion(&net, &StrategyConfig::new(Method::Fast))
        .map_err(|e| e.to_string())?
        .bound;
    ensure(rel(fast, 6.0) <= ORACLE_REL_TOL, || format!("fast {fast}"))?;
    for c in [0.5, 1.0, 1.5] {
        let sn = run_recursion(&net, &StrategyConfig::new(Method::Sn).with_c(c))
            .map_err(|e| e.to_string())?
            .bound;
        let expected = (36.0 / (c * (2.0 - c))).sqrt();
        ensure(rel(sn, expected) <= ORACLE_REL_TOL, || {
            format!("sn(c={c}) {sn}, expected {expected}")
        })?;
    }
    Ok("product = fast = 6, sn matches sqrt(36/(c(2-c))) for c in {0.5, 1, 1.5}".into())
}

fn sn_fast_equivalence(nets: &[Network]) -> Check {
    let mut worst: f64 = 0.0;
    for (i, net) in nets.iter().enumerate() {
        let fast = run_recursion(net, &StrategyConfig::new(Method::Fast))
            .map_err(|e| format!("net {i}: {e}"))?;
        let sn = run_recursion(net, &StrategyConfig::new(Method::Sn).with_c(1.0))
            .map_err(|e| format!("net {i}: {e}"))?;
        let r = rel(fast.bound, sn.bound);
        worst = worst.max(r);
        ensure(r <= SN_FAST_REL_TOL, || {
            format!(
                "net {i}: fast {} vs sn {} (rel {r:e})",
                fast.bound, sn.bound
            )
        })?;
    }
    Ok(format!("{} nets, worst relative gap {worst:e}", nets.len()))
}

fn lmi_feasibility(nets: &[Network]) -> Check {
    let mut checks = 0;
    for (i, net) in nets.iter().enumerate() {
        let dim: usize = net.dims().iter().sum();
        ensure(dim <= LMI_MAX_DIMENSION, || {
            format!("net {i} has dimension {dim}")
        })?;
        for cfg in method_configs() {
            let report =
                run_recursion(net, &cfg).map_err(|e| format!("net {i} {}: {e}", label(&cfg)))?;
            let cert = verify_feasibility(net, &report.multipliers).map_err(|e| e.to_string())?;
            ensure(cert.psd, || {
                format!(
                    "net {i} {}: not PSD (pivot {:e})",
                    label(&cfg),
                    cert.min_pivot_estimate
                )
            })?;
            checks += 1;
        }
    }
    let net = scalar_oracle();
    let mut ms = run_recursion(&net, &StrategyConfig::new(Method::Fast))
        .map_err(|e| e.to_string())?
        .multipliers;
    ms.gamma *= SHARPNESS_SCALE;
    let witness = verify_feasibility(&net, &ms).map_err(|e| e.to_string())?;
    ensure(!witness.psd, || {
        "scaled oracle gamma still certified PSD".into()
    })?;
    Ok(format!(
        "{checks} certificates PSD; oracle with gamma x {SHARPNESS_SCALE} rejected"
    ))
}

fn sandwich(nets: &[Network]) -> Check {
    let mut tightest = f64::INFINITY;
    for (i, net) in nets.iter().enumerate() {
        let lower = empirical_lower_bound(
            net,
            SANDWICH_SAMPLES,
            lipbound::certify::DEFAULT_RADIUS,
            i as u64,
        )
        .map_err(|e| e.to_string())?;
        let mut configs = vec![StrategyConfig::new(Method::Product)];
        configs.extend(method_configs());
        for cfg in configs {
            let bound = run_recursion(net, &cfg)
                .map_err(|e| format!("net {i} {}: {e}", label(&cfg)))?
                .bound;
            ensure(bound - lower >= 0.0, || {
                format!(
                    "net {i} {}: bound {bound} below empirical {lower}",
                    label(&cfg)
                )
            })?;
            tightest = tightest.min(bound / lower);
        }
    }
    Ok(format!(
        "{} nets, smallest bound/empirical ratio {tightest:.3}",
        nets.len()
    ))
}

fn dominance(suites: &[&[Network]]) -> Check {
    let mut count = 0;
    for net in suites.iter().flat_map(|s| s.iter()) {
        let best = best_of(net, &BestOfConfig::default())
            .map_err(|e| e.to_string())?
            .bound;
        let product = product_bound(net).map_err(|e| e.to_string())?.bound;
        let fast = run_recursion(net, &StrategyConfig::new(Method::Fast))
            .map_err(|e| e.to_string())?
            .bound;
        ensure(best <= product.min(fast), || {
            format!("net {count}: best {best} > min(product {product}, fast {fast})")
        })?;
        count += 1;
    }

    for depth in [50, 75, 100] {
        let net = random_net(depth, 100, 1);
        let fast = run_recursion(&net, &StrategyConfig::new(Method::Fast))
            .map_err(|e| e.to_string())?
            .bound;
        for method in [Method::Shift, Method::Gcs, Method::Gc, Method::Sn] {
            let Ok(r) = sweep_c(&net, &StrategyConfig::new(method), &default_grid(method)) else {
                continue;
            };
            let gain = 1.0 - r.bound / fast;
            if gain >= MIN_IMPROVEMENT {
                return Ok(format!(
                    "best_of dominates on {count} nets; depth {depth}: {}(c={}) beats fast by {:.1}%",
                    method,
                    r.config.c,
                    100.0 * gain
                ));
            }
        }
    }
    Err(format!(
        "best_of dominates on {count} nets, but no method beat fast by {MIN_IMPROVEMENT} on the deep nets"
    ))
}

fn degenerate_cases() -> Check {
    let zero_out = Network::from_weights(
        vec![
            DenseMatrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]).unwrap(),
            DenseMatrix::from_rows(&[[0.7, 0.1], [0.2, -0.4]]).unwrap(),
            DenseMatrix::zeros(1, 2),
        ],
        Activation::Tanh,
    )
    .unwrap();
    let mut configs = vec![StrategyConfig::new(Method::Product)];
    configs.extend(method_configs());
    for cfg in &configs {
        let r =
            run_recursion(&zero_out, cfg).map_err(|e| format!("zero layer {}: {e}", label(cfg)))?;
        ensure(r.bound == 0.0, || {
            format!("zero layer {}: bound {}", label(cfg), r.bound)
        })?;
    }

    let diagonal = Network::from_weights(
        vec![
            DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).unwrap(),
            DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap(),
        ],
        Activation::Tanh,
    )
    .unwrap();
    let eta = 1e-9 * (1.0 + 2.0);
    let expected = [1.0 / (0.5 + eta), 1.0 / (2.0 + eta)];
    let lam =
        strategy_shift(&DenseMatrix::from_diagonal(&[1.0, 4.0]), 2.0).map_err(|e| e.to_string())?;
    ensure(lam.entries() == expected, || {
        format!("shift multipliers {:?}", lam.entries())
    })?;
    let r = run_recursion(&diagonal, &StrategyConfig::new(Method::Shift))
        .map_err(|e| format!("diagonal shift: {e}"))?;
    ensure(r.per_layer[0].statistic == 0.0, || {
        "off-diagonal norm is not zero".into()
    })?;
    ensure(r.multipliers.lambdas[0].entries() == expected, || {
        format!(
            "shift recursion multipliers {:?}",
            r.multipliers.lambdas[0].entries()
        )
    })?;

    let d_tilde = 0.7;
    let zero_row = Network::from_weights(
        vec![
            DenseMatrix::from_rows(&[[1.0, 2.0], [0.0, 0.0]]).unwrap(),
            DenseMatrix::from_rows(&[[1.0, -1.0]]).unwrap(),
        ],
        Activation::Tanh,
    )
    .unwrap();
    for method in [Method::Gc, Method::Gcs] {
        let r = run_recursion(
            &zero_row,
            &StrategyConfig::new(method).with_d_tilde(d_tilde),
        )
        .map_err(|e| format!("zero row {method}: {e}"))?;
        let lam = r.multipliers.lambdas[0].entries();
        ensure(lam[1] == d_tilde, || {
            format!("zero row {method}: multiplier {}", lam[1])
        })?;
    }
    for cfg in &configs {
        run_recursion(&zero_row, cfg).map_err(|e| format!("zero row {}: {e}", label(cfg)))?;
        run_recursion(&diagonal, cfg).map_err(|e| format!("diagonal {}: {e}", label(cfg)))?;
    }
    Ok("zero final layer gives 0; shift floor and zero-row fallback hit exactly".into())
}

fn bias_invariance() -> Check {
    let net = random_net(6, 12, 77);
    let biases: Vec<Vec<f64>> = net
        .dims()
        .iter()
        .skip(1)
        .enumerate()
        .map(|(k, &n)| (0..n).map(|i| (k * 31 + i) as f64 * 0.37 - 2.0).collect())
        .collect();
    let biased = net.with_biases(Some(biases)).map_err(|e| e.to_string())?;
    ensure(biased.has_biases(), || "biases were not attached".into())?;
    let mut configs = vec![StrategyConfig::new(Method::Product)];
    configs.extend(method_configs());
    for cfg in &configs {
        let a = run_recursion(&net, cfg).map_err(|e| e.to_string())?.bound;
        let b = run_recursion(&biased, cfg)
            .map_err(|e| e.to_string())?
            .bound;
        ensure(a.to_bits() == b.to_bits(), || {
            format!("{}: {a} vs {b}", label(cfg))
        })?;
    }
    let a = best_of(&net, &BestOfConfig::default())
        .map_err(|e| e.to_string())?
        .bound;
    let b = best_of(&biased, &BestOfConfig::default())
        .map_err(|e| e.to_string())?
        .bound;
    ensure(a.to_bits() == b.to_bits(), || {
        format!("best_of: {a} vs {b}")
    })?;
    Ok(format!(
        "{} methods and best_of bit-identical",
        configs.len()
    ))
}

fn timing() -> Check {
    let plan = BenchPlan::new(vec![100], vec![80, 100, 120, 140, 160], vec![1]);
    let rows = run_bench(&plan).map_err(|e| e.to_string())?;
    ensure(rows.len() == plan.len(), || format!("{} rows", rows.len()))?;
    let mut ratios = Vec::new();
    for width in [80, 120, 160] {
        let per_layer = |m: Method| {
            rows.iter()
                .find(|r| r.width == width && r.method == m && r.ok())
                .map(|r| r.seconds_per_layer())
        };
        let fast = per_layer(Method::Fast).ok_or(format!("fast failed at width {width}"))?;
        for m in [Method::Gc, Method::Gcs] {
            let t = per_layer(m).ok_or(format!("{m} failed at width {width}"))?;
            let ratio = t / fast;
            ensure(ratio <= ROW_SUM_TIME_RATIO, || {
                format!("width {width}: {m} per-layer time is {ratio:.2}x fast")
            })?;
            ratios.push(ratio);
        }
    }
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let total: f64 = rows.iter().map(|r| r.seconds).sum();
    Ok(format!(
        "worst gc/gcs to fast per-layer ratio {worst:.2}; {} bench rows in {total:.1} s",
        rows.len()
    ))
}

fn main() {
    let equivalence = equivalence_nets();
    let lmi = lmi_nets();
    let sandwich_set = sandwich_nets();

    let criteria: Vec<Criterion<'_>> = vec![
        (
            "scalar oracle exactness",
            Some(ORACLE_LIMIT),
            Box::new(scalar_oracle_exactness),
        ),
        (
            "sn at c = 1 matches fast",
            Some(EQUIVALENCE_LIMIT),
            Box::new(|| sn_fast_equivalence(&equivalence)),
        ),
        (
            "LMI feasibility",
            Some(LMI_LIMIT),
            Box::new(|| lmi_feasibility(&lmi)),
        ),
        (
            "sandwich validity",
            Some(SANDWICH_LIMIT),
            Box::new(|| sandwich(&sandwich_set)),
        ),
        (
            "dominance",
            None,
            Box::new(|| dominance(&[&equivalence, &lmi, &sandwich_set])),
        ),
        ("degenerate cases", None, Box::new(degenerate_cases)),
        ("bias invariance", None, Box::new(bias_invariance)),
        ("timing", Some(BENCH_LIMIT), Box::new(timing)),
    ];

    let total = criteria.len();
    let mut passed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, limit) {
            if elapsed > limit {
                outcome = Err(format!(
                    "took {:.1} s, limit {} s",
                    elapsed.as_secs_f64(),
                    limit.as_secs()
                ));
            }
        }
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!(
            "[{tag}] {} {name} ({:.2} s): {detail}",
            i + 1,
            elapsed.as_secs_f64()
        );
        passed += usize::from(outcome.is_ok());
    }
    println!("acceptance: {passed}/{total} criteria passed");
    if passed != total {
        std::process::exit(1);
    }
}
