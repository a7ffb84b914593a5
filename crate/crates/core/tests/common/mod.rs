#![allow(dead_code)]

use detperturb::{Mat, SymMatrix};

/// Determinant by Laplace expansion along the first row. Exponential cost;
/// only meant for n <= 6.
pub fn cofactor_det(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    match n {
        0 => 1.0,
        1 => rows[0][0],
        _ => (0..n)
            .map(|col| {
                let minor: Vec<Vec<f64>> = rows[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|&(j, _)| j != col).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                sign * rows[0][col] * cofactor_det(&minor)
            })
            .sum(),
    }
}

/// `G·Gᵀ/n + δI` from raw entries, independent of the crate's generator.
pub fn spd_from_entries(n: usize, entries: &[f64], delta: f64) -> SymMatrix {
    let g = Mat::from_vec(n, n, entries[..n * n].to_vec()).unwrap();
    let ggt = g.matmul(&g.transpose()).unwrap();
    SymMatrix::from_mat(&ggt).unwrap().scale(1.0 / n as f64).shift(delta)
}

/// `H·Hᵀ/n` for an `n × r` matrix `H`.
pub fn psd_from_entries(n: usize, r: usize, entries: &[f64]) -> SymMatrix {
    if r == 0 {
        return SymMatrix::zeros(n);
    }
    let h = Mat::from_vec(n, r, entries[..n * r].to_vec()).unwrap();
    SymMatrix::from_mat(&h.matmul(&h.transpose()).unwrap()).unwrap().scale(1.0 / n as f64)
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.sub(b).unwrap().max_abs()
}
