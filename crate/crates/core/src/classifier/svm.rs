//! Kernel SVM trained by sequential minimal optimization with second-order
//! working-set selection.

use rayon::prelude::*;

use crate::error::{invalid, Result};

/// Largest training set the dense kernel matrix is built for.
pub const MAX_DENSE: usize = 16_000;

const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RbfSvm {
    pub gamma: f64,
    pub rho: f64,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    /// Support vectors, row-major, `dims` values each.
    pub vectors: Vec<f64>,
    pub dims: usize,
}

pub(crate) fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

impl RbfSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.vectors.chunks_exact(self.dims).zip(&self.coef).map(|(sv, c)| c * rbf(self.gamma, sv, x)).sum::<f64>()
            - self.rho
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }
}

/// Solves the C-SVM dual with per-sample box bounds `c[i]`.
/// `x` is row-major with `dims` columns; labels are `+1` / `-1`.
pub fn train_rbf(x: &[f64], dims: usize, y: &[f64], c: &[f64], gamma: f64, eps: f64) -> Result<RbfSvm> {
    let n = y.len();
    if n == 0 || x.len() != n * dims || c.len() != n {
        return Err(invalid("inconsistent SVM training arrays"));
    }
    if n > MAX_DENSE {
        return Err(invalid(format!("{n} training samples exceed the dense kernel limit of {MAX_DENSE}")));
    }
    let rows: Vec<&[f64]> = x.chunks_exact(dims).collect();
    let kernel: Vec<f32> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (0..n).map(move |j| rbf(gamma, rows[i], rows[j]) as f32)
        })
        .collect();
    let k = |i: usize, j: usize| f64::from(kernel[i * n + j]);

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = (100 * n).max(10_000_000);
    let is_up = |t: usize, a: &[f64]| if y[t] > 0.0 { a[t] < c[t] } else { a[t] > 0.0 };
    let is_low = |t: usize, a: &[f64]| if y[t] > 0.0 { a[t] > 0.0 } else { a[t] < c[t] };

    for _ in 0..max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if is_up(t, &alpha) {
                let v = -y[t] * grad[t];
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            break;
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if !is_low(t, &alpha) {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let b = gmax + v;
            if b > 0.0 {
                let mut a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj <= obj_min {
                    obj_min = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < eps || j == usize::MAX {
            break;
        }

        let (ci, cj) = (c[i], c[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let quad = (k(i, i) + k(j, j) - 2.0 * k(i, j)).max(TAU);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    let (mut ub, mut lb, mut free, mut sum_free) = (f64::INFINITY, f64::NEG_INFINITY, 0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c[t] {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };

    let mut coef = Vec::new();
    let mut vectors = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            coef.push(alpha[t] * y[t]);
            vectors.extend_from_slice(rows[t]);
        }
    }
    Ok(RbfSvm { gamma, rho, coef, vectors, dims })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_is_separable_with_rbf() {
        let x = [0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let y = [1.0, 1.0, -1.0, -1.0];
        let m = train_rbf(&x, 2, &y, &[100.0; 4], 1.0, 1e-4).unwrap();
        for (row, &label) in x.chunks(2).zip(&y) {
            assert!(m.decision(row) * label > 0.0);
        }
    }

    #[test]
    fn dual_constraint_holds() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let c: Vec<f64> = y.iter().map(|&l| if l > 0.0 { 3.0 } else { 1.5 }).collect();
        let m = train_rbf(&x, 2, &y, &c, 0.5, 1e-3).unwrap();
        assert!(m.coef.iter().sum::<f64>().abs() < 1e-9);
    }
}
