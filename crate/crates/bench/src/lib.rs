//! Deterministic fixtures shared by the benchmarks.

use lipbound::matrix::{cholesky, LowerFactor};
use lipbound::rng::SplitMix64;
use lipbound::{generate_random, DenseMatrix, Network};

/// Widths used by the kernel benchmarks.
pub const WIDTHS: [usize; 3] = [40, 100, 160];

pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = SplitMix64::new(seed);
    let scale = 1.0 / (cols as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.next_gaussian() * scale)
        .collect();
    DenseMatrix::from_row_major(rows, cols, data).expect("finite entries")
}

/// `A A^T + I` for a Gaussian `A`.
pub fn spd_matrix(n: usize, seed: u64) -> DenseMatrix {
    let a = gaussian_matrix(n, n, seed);
    let mut s = a.matmul(&a.transpose()).expect("square");
    for i in 0..n {
        s.set(i, i, s.get(i, i) + 1.0);
    }
    s.symmetrize();
    s
}

pub fn spd_factor(n: usize, seed: u64) -> LowerFactor {
    cholesky(&spd_matrix(n, seed)).expect("SPD by construction")
}

/// Random tanh network with `depth` hidden layers of `width` neurons,
/// input dimension `width` and 10 outputs.
pub fn network(depth: usize, width: usize, seed: u64) -> Network {
    generate_random(depth, width, width, 10, seed).expect("valid shape")
}
