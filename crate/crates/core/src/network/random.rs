use super::{Activation, Network};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::SplitMix64;

/// Random tanh network with `depth` hidden layers of `width` neurons.
///
/// Produces `depth + 1` weight matrices with shapes `width x in_dim`,
/// `depth - 1` times `width x width`, and `out_dim x width`. Entries are
/// standard normals from [`SplitMix64`] (one stream seeded with `seed`,
/// consumed layer by layer in row-major order) scaled by `1/sqrt(fan_in)`.
/// No biases are generated.
pub fn generate_random(
    depth: usize,
    width: usize,
    in_dim: usize,
    out_dim: usize,
    seed: u64,
) -> Result<Network> {
    if depth == 0 || width == 0 || in_dim == 0 || out_dim == 0 {
        return Err(Error::InvalidNetwork(format!(
            "depth, width and dimensions must be positive (got depth {depth}, width {width}, in {in_dim}, out {out_dim})"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let mut shapes = Vec::with_capacity(depth + 1);
    shapes.push((width, in_dim));
    shapes.extend(std::iter::repeat_n((width, width), depth - 1));
    shapes.push((out_dim, width));

    let weights = shapes
        .into_iter()
        .map(|(rows, cols)| {
            let scale = 1.0 / (cols as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| rng.next_gaussian() * scale)
                .collect();
            DenseMatrix::from_row_major(rows, cols, data)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::from_weights(weights, Activation::Tanh)
}
