//! Ridge-regularized logistic regression, the lightweight fallback family.

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub bias: f64,
    pub weights: Vec<f64>,
}

impl LinearModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// In-place Cholesky solve of the symmetric positive definite system `a x = b`.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Result<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 {
            return Err(invalid("logistic regression Hessian is not positive definite"));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(())
}

/// Newton iterations on `sum w_i log(1 + exp(-y_i f(x_i))) + lambda/2 |w|^2`;
/// the bias is not penalized.
pub fn train_logistic(x: &[f64], dims: usize, y: &[f64], w: &[f64], lambda: f64) -> Result<LinearModel> {
    let n = y.len();
    let p = dims + 1;
    let mut theta = vec![0.0; p];
    let loss = |t: &[f64]| -> f64 {
        let mut l = 0.5 * lambda * t[1..].iter().map(|v| v * v).sum::<f64>();
        for i in 0..n {
            let row = &x[i * dims..(i + 1) * dims];
            let f = t[0] + t[1..].iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
            let z = -y[i] * f;
            l += w[i] * if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
        }
        l
    };
    let mut current = loss(&theta);
    for _ in 0..50 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        for (g, t) in grad[1..].iter_mut().zip(&theta[1..]) {
            *g = lambda * t;
        }
        for k in 1..p {
            hess[k * p + k] = lambda;
        }
        hess[0] = 1e-9;
        let mut xi = vec![1.0; p];
        for i in 0..n {
            xi[1..].copy_from_slice(&x[i * dims..(i + 1) * dims]);
            let f: f64 = theta.iter().zip(&xi).map(|(a, b)| a * b).sum();
            let s = sigmoid(y[i] * f);
            let r = -w[i] * y[i] * (1.0 - s);
            let h = w[i] * s * (1.0 - s);
            for a in 0..p {
                grad[a] += r * xi[a];
                let ha = h * xi[a];
                for b in 0..=a {
                    hess[a * p + b] += ha * xi[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                hess[b * p + a] = hess[a * p + b];
            }
        }
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-10 {
            break;
        }
        let mut step = grad.clone();
        cholesky_solve(&mut hess, &mut step, p)?;
        let slope: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
        let mut t = 1.0;
        let mut moved = false;
        while t >= 1e-10 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let l = loss(&cand);
            if l <= current + 1e-4 * t * slope {
                theta = cand;
                current = l;
                moved = true;
                break;
            }
            t /= 2.0;
        }
        if !moved {
            break;
        }
    }
    Ok(LinearModel { bias: theta[0], weights: theta[1..].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_small_system() {
        let mut a = vec![4.0, 2.0, 2.0, 3.0];
        let mut b = vec![6.0, 5.0];
        cholesky_solve(&mut a, &mut b, 2).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_threshold() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 - 9.5).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v > 0.0 { 1.0 } else { -1.0 }).collect();
        let m = train_logistic(&x, 1, &y, &[1.0; 20], 0.1).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!(m.bias.abs() < 1e-6);
    }
}
