use std::fs::File;
use std::io::{self, BufWriter};

use super::write_json;
use crate::args::BenchArgs;
use crate::bench::{run_bench, write_csv, BenchPlan};
use crate::error::{exit, CliError};
use crate::manifest::{path_string, CommandKind, GridRecord, RunManifest};

pub(super) fn run(a: BenchArgs, arguments: Vec<String>) -> Result<(), CliError> {
    let plan = BenchPlan {
        depths: a.depths,
        widths: a.widths,
        seeds: a.seeds,
        methods: a.methods,
        in_dim: a.in_dim,
        out_dim: a.out_dim,
        activation: a.activation,
        c_sn: a.c_sn,
        c_gc: a.c_gc,
        c_gcs: a.c_gcs,
        c_shift: a.c_shift,
        c_interp: a.c_interp,
        theta: a.theta,
        certified: a.certified,
        jobs: a.jobs,
    };
    let mut manifest = RunManifest::start(CommandKind::Bench, arguments);
    manifest.methods = plan.methods.clone();
    manifest.grids = plan
        .methods
        .iter()
        .filter(|m| m.takes_c())
        .map(|&m| GridRecord {
            method: m,
            values: vec![plan.config(m).c],
            thetas: (m == lipbound::Method::Interp).then(|| vec![plan.theta]),
        })
        .collect();
    manifest.seeds = plan.seeds.clone();
    manifest.certified = plan.certified;
    manifest.output = path_string(a.output.as_deref());

    let rows = run_bench(&plan)?;
    match &a.output {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::input(path, e))?;
            write_csv(&rows, BufWriter::new(file)).map_err(|e| CliError::input(path, e))?;
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".manifest.json");
            write_json(&manifest.finish(), sidecar.as_ref())?;
        }
        None => write_csv(&rows, io::stdout().lock()).map_err(|e| CliError::io(e.to_string()))?,
    }

    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} runs failed", rows.len());
    }
    if failed == rows.len() {
        return Err(CliError::new(
            exit::ALL_INFEASIBLE,
            "every benchmark run failed",
        ));
    }
    Ok(())
}
