//! Orthonormal 2-D DCT-II and scalar quantization.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::codec::Qp;

/// Row-major orthonormal DCT-II matrix for size n: c[k][i].
fn dct_matrix(n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    let a0 = (1.0 / n as f64).sqrt();
    let ak = (2.0 / n as f64).sqrt();
    for k in 0..n {
        let a = if k == 0 { a0 } else { ak };
        for i in 0..n {
            c[k * n + i] = a * (PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * n as f64)).cos();
        }
    }
    c
}

fn matrix_for(n: usize) -> &'static [f64] {
    static TABLES: OnceLock<[Vec<f64>; 5]> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        [
            dct_matrix(4),
            dct_matrix(8),
            dct_matrix(16),
            dct_matrix(32),
            dct_matrix(64),
        ]
    });
    match n {
        4 => &tables[0],
        8 => &tables[1],
        16 => &tables[2],
        32 => &tables[3],
        64 => &tables[4],
        _ => panic!("unsupported transform size {n}"),
    }
}

/// Y = C X C^T, block row-major, n in {4, 8, 16, 32, 64}.
pub fn dct_forward(block: &[f64], n: usize) -> Vec<f64> {
    let c = matrix_for(n);
    let mut tmp = vec![0.0; n * n];
    // rows: tmp = X C^T  (tmp[y][k] = sum_i X[y][i] * C[k][i])
    for y in 0..n {
        for k in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += block[y * n + i] * c[k * n + i];
            }
            tmp[y * n + k] = acc;
        }
    }
    // cols: out = C tmp  (out[k][x] = sum_y C[k][y] * tmp[y][x])
    let mut out = vec![0.0; n * n];
    for k in 0..n {
        for x in 0..n {
            let mut acc = 0.0;
            for y in 0..n {
                acc += c[k * n + y] * tmp[y * n + x];
            }
            out[k * n + x] = acc;
        }
    }
    out
}

/// X = C^T Y C, exact inverse of [`dct_forward`].
pub fn dct_inverse(coeffs: &[f64], n: usize) -> Vec<f64> {
    let c = matrix_for(n);
    let mut tmp = vec![0.0; n * n];
    // tmp = Y C  (tmp[k][i] = sum_x Y[k][x] * C[x][i])
    for k in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for x in 0..n {
                acc += coeffs[k * n + x] * c[x * n + i];
            }
            tmp[k * n + i] = acc;
        }
    }
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += c[k * n + j] * tmp[k * n + i];
            }
            out[j * n + i] = acc;
        }
    }
    out
}

/// Quantizer step doubles every 6 QP.
pub fn quant_step(qp: Qp) -> f64 {
    2f64.powf((qp.value() as f64 - 4.0) / 6.0)
}

/// Round-half-away-from-zero scalar quantization.
pub fn quantize(coeffs: &[f64], qp: Qp) -> Vec<i32> {
    let step = quant_step(qp);
    coeffs
        .iter()
        .map(|&c| {
            let v = (c.abs() / step + 0.5).floor() as i32;
            if c < 0.0 {
                -v
            } else {
                v
            }
        })
        .collect()
}

pub fn dequantize(levels: &[i32], qp: Qp) -> Vec<f64> {
    let step = quant_step(qp);
    levels.iter().map(|&l| l as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_block_has_only_dc() {
        for &n in &[4usize, 8, 16, 32, 64] {
            let block = vec![3.0; n * n];
            let coeffs = dct_forward(&block, n);
            assert!((coeffs[0] - n as f64 * 3.0).abs() < 1e-9, "n={n}");
            for (i, &c) in coeffs.iter().enumerate().skip(1) {
                assert!(c.abs() < 1e-9, "n={n} coeff {i} = {c}");
            }
        }
    }

    #[test]
    fn parseval() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &n in &[4usize, 8, 16] {
            let block: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-128.0..128.0)).collect();
            let coeffs = dct_forward(&block, n);
            let e_pix: f64 = block.iter().map(|v| v * v).sum();
            let e_coef: f64 = coeffs.iter().map(|v| v * v).sum();
            assert!((e_pix - e_coef).abs() / e_pix < 1e-6);
        }
    }

    #[test]
    fn inverse_roundtrip_within_rounding() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let block: Vec<f64> = (0..64).map(|_| rng.gen_range(-255i32..=255) as f64).collect();
        let back = dct_inverse(&dct_forward(&block, 8), 8);
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() <= 0.5);
            assert_eq!(a.round() as i32, b.round() as i32);
        }
    }

    #[test]
    fn quant_step_values() {
        assert!((quant_step(Qp::new(4).unwrap()) - 1.0).abs() < 1e-12);
        assert!((quant_step(Qp::new(10).unwrap()) - 2.0).abs() < 1e-12);
        assert!((quant_step(Qp::new(16).unwrap()) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quantize_lossless_at_step_one() {
        let qp = Qp::new(4).unwrap();
        let coeffs = vec![-3.0, 0.0, 7.0, 120.0];
        let levels = quantize(&coeffs, qp);
        assert_eq!(levels, vec![-3, 0, 7, 120]);
        assert_eq!(dequantize(&levels, qp), coeffs);
    }

    #[test]
    fn quantize_error_bounded_by_half_step() {
        let qp = Qp::new(26).unwrap();
        let step = quant_step(qp);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let c: f64 = rng.gen_range(-500.0..500.0);
            let back = dequantize(&quantize(&[c], qp), qp)[0];
            assert!((c - back).abs() <= step / 2.0 + 1e-9);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let qp = Qp::new(32).unwrap();
        assert_eq!(quantize(&[0.0; 16], qp), vec![0; 16]);
    }
}
