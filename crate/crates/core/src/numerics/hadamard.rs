use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::TensorF32;

/// Seeded `±1` diagonal of length `g`.
pub fn random_signs(g: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..g).map(|_| if rng.gen::<bool>() { -1.0 } else { 1.0 }).collect()
}

/// In-place Walsh–Hadamard transform scaled by `1/√g` (orthonormal, self-inverse).
pub fn fwht_normalized(x: &mut [f32]) {
    let g = x.len();
    debug_assert!(g.is_power_of_two());
    let mut h = 1;
    while h < g {
        for start in (0..g).step_by(h * 2) {
            for i in start..start + h {
                let (a, b) = (x[i], x[i + h]);
                x[i] = a + b;
                x[i + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (g as f32).sqrt();
    for v in x.iter_mut() {
        *v *= scale;
    }
}

/// Sign flips followed by the normalized transform, in place.
pub fn randomized_hadamard_slice(x: &mut [f32], signs: &[f32]) {
    for (v, s) in x.iter_mut().zip(signs) {
        *v *= s;
    }
    fwht_normalized(x);
}

pub(crate) fn inverse_randomized_hadamard_slice(x: &mut [f32], signs: &[f32]) {
    fwht_normalized(x);
    for (v, s) in x.iter_mut().zip(signs) {
        *v *= s;
    }
}

/// `H · diag(signs(seed)) · x` for a 1-D tensor whose length is a power of two.
pub fn randomized_hadamard(x: &TensorF32, seed: u64) -> Result<TensorF32> {
    let g = check_len(x)?;
    let mut out = x.data().to_vec();
    randomized_hadamard_slice(&mut out, &random_signs(g, seed));
    TensorF32::new(x.dims().to_vec(), out)
}

/// Inverse of [`randomized_hadamard`] for the same seed.
pub fn inverse_randomized_hadamard(y: &TensorF32, seed: u64) -> Result<TensorF32> {
    let g = check_len(y)?;
    let mut out = y.data().to_vec();
    inverse_randomized_hadamard_slice(&mut out, &random_signs(g, seed));
    TensorF32::new(y.dims().to_vec(), out)
}

fn check_len(x: &TensorF32) -> Result<usize> {
    let g = x.len();
    if g == 0 || !g.is_power_of_two() {
        return Err(Error::invalid(format!("hadamard length {g} is not a power of two")));
    }
    Ok(g)
}
