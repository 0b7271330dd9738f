use lipbound::generate_random;
use lipbound::network::{network_to_json, save_network};

use crate::args::GenArgs;
use crate::error::CliError;

pub(super) fn run(a: GenArgs) -> Result<(), CliError> {
    let net = generate_random(a.layers, a.width, a.in_dim, a.out_dim, a.seed)
        .map_err(|e| CliError::usage(e.to_string()))?
        .with_activation(a.activation);
    let chain = net
        .dims()
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(" -> ");
    match &a.output {
        Some(path) => {
            save_network(&net, path).map_err(|e| CliError::input(path, e))?;
            println!("{chain}");
        }
        None => {
            println!("{}", network_to_json(&net));
            eprintln!("{chain}");
        }
    }
    Ok(())
}
