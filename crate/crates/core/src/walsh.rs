//! Fourier analysis on `{+1,-1}^n` with the bit encoding used throughout
//! (bit set means spin -1).

/// In-place unnormalized Walsh-Hadamard transform:
/// `out[z] = sum_b (-1)^{|b & z|} in[b]`.
pub fn walsh_hadamard(values: &mut [f64]) {
    let n = values.len();
    assert!(
        n.is_power_of_two(),
        "transform length must be a power of two"
    );
    let mut h = 1;
    while h < n {
        for chunk in values.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Normalized coefficients `f^(Z) = 2^{-n} sum_sigma sigma_Z f(sigma)`, indexed
/// by the bit encoding of `Z`.
pub fn fourier_coefficients(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    walsh_hadamard(&mut out);
    let scale = 1.0 / values.len() as f64;
    for v in &mut out {
        *v *= scale;
    }
    out
}

/// Single coefficient by direct summation.
pub fn fourier_coefficient(values: &[f64], z: u64) -> f64 {
    let sum: f64 = values
        .iter()
        .enumerate()
        .map(|(b, v)| {
            if (b as u64 & z).count_ones() & 1 == 1 {
                -v
            } else {
                *v
            }
        })
        .sum();
    sum / values.len() as f64
}

/// Gathers the bits of `global` at the given positions into a compact index.
#[inline]
pub fn extract_bits(global: u64, positions: &[usize]) -> usize {
    positions.iter().enumerate().fold(0usize, |acc, (i, &p)| {
        acc | (((global >> p) & 1) as usize) << i
    })
}

/// Inverse of [`extract_bits`].
#[inline]
pub fn deposit_bits(local: usize, positions: &[usize]) -> u64 {
    positions
        .iter()
        .enumerate()
        .fold(0u64, |acc, (i, &p)| acc | (((local >> i) & 1) as u64) << p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn butterfly_matches_direct_sum(values in prop::collection::vec(-3.0f64..3.0, 16)) {
            let fast = fourier_coefficients(&values);
            for z in 0..16u64 {
                prop_assert!((fast[z as usize] - fourier_coefficient(&values, z)).abs() < 1e-12);
            }
        }

        #[test]
        fn inversion(values in prop::collection::vec(-3.0f64..3.0, 8)) {
            let coeffs = fourier_coefficients(&values);
            for (b, v) in values.iter().enumerate() {
                let rebuilt: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(z, c)| if (b & z).count_ones() & 1 == 1 { -c } else { *c })
                    .sum();
                prop_assert!((rebuilt - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bit_gather_scatter() {
        let pos = [1, 4, 5];
        assert_eq!(extract_bits(0b110010, &pos), 0b111);
        assert_eq!(deposit_bits(0b101, &pos), 0b100010);
    }
}
