mod bench;
mod compute;
mod gen;
mod verify;

use std::fs;
use std::path::Path;

use lipbound::{load_network, Network};
use serde::Serialize;

use crate::args::Command;
use crate::error::CliError;

pub use compute::ComputeOutput;
pub use verify::VerifyOutput;

pub fn dispatch(command: Command, arguments: Vec<String>) -> Result<(), CliError> {
    match command {
        Command::Gen(a) => gen::run(a),
        Command::Compute(a) => compute::run(a, arguments),
        Command::Verify(a) => verify::run(a, arguments),
        Command::Bench(a) => bench::run(a, arguments),
    }
}

fn load(path: &Path) -> Result<Network, CliError> {
    load_network(path).map_err(|e| CliError::input(path, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::input(path, e))?;
    fs::write(path, text + "\n").map_err(|e| CliError::input(path, e))
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    match jobs {
        Some(0) => return Err(CliError::usage("--jobs must be at least 1")),
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    builder
        .build()
        .map_err(|e| CliError::new(crate::exit::FAILURE, e.to_string()))
}
