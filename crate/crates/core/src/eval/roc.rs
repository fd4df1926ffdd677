//! Shape-preserving ROC interpolation and partial area.

use super::RocSample;

/// Monotone piecewise cubic Hermite interpolant through ROC points.
#[derive(Clone, Debug, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    /// Fits through `(x, y)` knots. Knots are sorted by `x`; repeated `x`
    /// values keep the largest `y`.
    pub fn new(points: &[(f64, f64)]) -> Self {
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        pts.dedup_by(|next, kept| next.0 == kept.0);
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let n = x.len();
        let mut d = vec![0.0; n];
        if n >= 2 {
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let m: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
            if n == 2 {
                d = vec![m[0], m[0]];
            } else {
                for k in 1..n - 1 {
                    if m[k - 1] * m[k] <= 0.0 {
                        d[k] = 0.0;
                    } else {
                        let w1 = 2.0 * h[k] + h[k - 1];
                        let w2 = h[k] + 2.0 * h[k - 1];
                        d[k] = (w1 + w2) / (w1 / m[k - 1] + w2 / m[k]);
                    }
                }
                d[0] = end_slope(h[0], h[1], m[0], m[1]);
                d[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
            }
        }
        Self { x, y, d }
    }

    /// ROC curve from sweep samples, anchored at (0, 0) and (1, 1).
    pub fn from_samples(samples: &[RocSample]) -> Self {
        let mut pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.fp_rate, s.tp_rate)).collect();
        pts.push((0.0, 0.0));
        pts.push((1.0, 1.0));
        Self::new(&pts)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if n == 0 {
            return 0.0;
        }
        if n == 1 || t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let k = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.d[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.d[k + 1]
    }
}

fn simpson(a: f64, fa: f64, b: f64, fb: f64, fm: f64) -> f64 {
    (fa + 4.0 * fm + fb) / 6.0 * (b - a)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &impl Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, fa, m, fm, flm);
    let right = simpson(m, fm, b, fb, frm);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

/// Normalized partial area `(1 / cap) * integral_0^cap curve`, by adaptive
/// Simpson quadrature at tolerance 1e-6, clamped to `[0, 1]`.
pub fn auc(curve: &Pchip, cap: f64) -> f64 {
    assert!(cap > 0.0 && cap <= 1.0, "false-positive cap must be in (0, 1]");
    let f = |t: f64| curve.eval(t);
    // integrate knot-to-knot so each piece is a single cubic
    let mut edges: Vec<f64> = curve.x.iter().copied().filter(|&x| x > 0.0 && x < cap).collect();
    edges.insert(0, 0.0);
    edges.push(cap);
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = (a + b) / 2.0;
        let (fa, fb, fm) = (f(a), f(b), f(m));
        let whole = simpson(a, fa, b, fb, fm);
        total += adaptive(&f, a, fa, b, fb, m, fm, whole, 1e-6 * (b - a) / cap, 30);
    }
    (total / cap).clamp(0.0, 1.0)
}
