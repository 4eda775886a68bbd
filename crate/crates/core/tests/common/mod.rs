#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stabfem::sparse::{to_csr, BlockLabel, CsrMatrix, SparseSystem, TripletBuffer};

/// Dense Gaussian elimination with partial pivoting.
pub fn dense_lu_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
            .unwrap();
        m.swap(k, p);
        x.swap(k, p);
        assert!(m[k][k] != 0.0, "singular oracle matrix");
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
        x[k] = (x[k] - s) / m[k][k];
    }
    x
}

pub fn dense_matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

/// Random triplets (duplicates included) and the dense matrix they sum to.
pub fn random_triplets(rng: &mut ChaCha8Rng, n: usize, count: usize) -> (TripletBuffer, Vec<Vec<f64>>) {
    let mut buf = TripletBuffer::new(n);
    let mut dense = vec![vec![0.0; n]; n];
    for _ in 0..count {
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let v = rng.gen_range(-1.0..1.0);
        buf.push(i, j, v);
        dense[i][j] += v;
    }
    (buf, dense)
}

/// Sparse nonsymmetric matrix with a dominant diagonal.
pub fn random_dominant(rng: &mut ChaCha8Rng, n: usize) -> (CsrMatrix, Vec<Vec<f64>>) {
    let (mut buf, mut dense) = random_triplets(rng, n, 4 * n);
    for i in 0..n {
        let off: f64 = dense[i].iter().map(|v| v.abs()).sum();
        let d = off + 1.0 + rng.gen_range(0.0..1.0);
        buf.push(i, i, d);
        dense[i][i] += d;
    }
    (to_csr(&buf, n).unwrap(), dense)
}

/// Random symmetric positive definite matrix `B^T B + I`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> (CsrMatrix, Vec<Vec<f64>>) {
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut buf = TripletBuffer::new(n);
    let mut dense = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut v: f64 = (0..n).map(|k| b[k][i] * b[k][j]).sum();
            if i == j {
                v += 1.0;
            }
            buf.push(i, j, v);
            dense[i][j] = v;
        }
    }
    (to_csr(&buf, n).unwrap(), dense)
}

pub fn system(matrix: CsrMatrix, rhs: Vec<f64>) -> SparseSystem {
    let n = rhs.len();
    SparseSystem::new(matrix, rhs, vec![(BlockLabel::Concentration, n)]).unwrap()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
