//! Coefficient-distribution detectors for aligned double compression.
//!
//! Requantizing with step `s2` values that were already quantized with step
//! `s1` leaves a periodic comb in each AC histogram: some bins collect no
//! first-pass bin at all, others collect several. [`n_factor`] counts them.
//! The detectors compare each block's coefficients against two per-frequency
//! models built from an estimate of the singly compressed histogram:
//!
//! * single: `P_S(x) = h(x)` (Laplace smoothed),
//! * double: `P_D(x) ∝ n(x) h(x)` for `x != 0`, with the zero bin shared.
//!
//! The first-pass step is unknown and is estimated per frequency by maximum
//! likelihood over a two-component mixture of the above. Frequencies where no
//! candidate beats the single model by a clear margin are left out.
//!
//! Pixel rounding between the two compressions adds noise of standard
//! deviation `sqrt(1/12)` to every DCT coefficient, which spills some mass
//! into the comb's holes. [`DoubleQuantModel::soft`] integrates that noise;
//! setting the noise to zero recovers the exact counting model.

use std::io::Write;

use rayon::prelude::*;

use super::luma_image;
use crate::error::{Error, Result};
use crate::jpeg::{ac_mode_index, quantize, ChromaSubsampling, QuantizedJpeg};
use crate::maps::{logistic_normalize, LogisticParams, TamperingMap};

/// Standard deviation of a DCT coefficient perturbed by uniform pixel rounding.
pub const ROUNDING_SIGMA: f64 = 0.288_675_134_594_812_9;

/// Floor applied to `n(x)` before taking logarithms.
pub const N_EPSILON: f64 = 1e-3;

/// Largest first-pass step considered by the estimator.
pub const MAX_FIRST_STEP: u16 = 64;

/// Integer histogram of one AC frequency over a set of blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoeffHistogram {
    freq: usize,
    lo: i32,
    counts: Vec<u64>,
    total: u64,
}

impl CoeffHistogram {
    /// Empty histogram for zig-zag position `freq`.
    pub fn new(freq: usize) -> Self {
        Self { freq, lo: 0, counts: Vec::new(), total: 0 }
    }

    pub fn from_values(freq: usize, values: impl IntoIterator<Item = i32>) -> Self {
        let mut h = Self::new(freq);
        for v in values {
            h.add(v);
        }
        h
    }

    pub fn add(&mut self, x: i32) {
        if self.counts.is_empty() {
            self.lo = x;
            self.counts.push(0);
        } else if x < self.lo {
            let grow = (self.lo - x) as usize;
            self.counts.splice(0..0, std::iter::repeat_n(0, grow));
            self.lo = x;
        } else if x >= self.lo + self.counts.len() as i32 {
            self.counts.resize((x - self.lo) as usize + 1, 0);
        }
        self.counts[(x - self.lo) as usize] += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &CoeffHistogram) {
        for (x, c) in other.iter() {
            for _ in 0..c {
                self.add(x);
            }
        }
    }

    pub fn freq(&self) -> usize {
        self.freq
    }

    pub fn count(&self, x: i32) -> u64 {
        let i = i64::from(x) - i64::from(self.lo);
        if i < 0 || i >= self.counts.len() as i64 {
            0
        } else {
            self.counts[i as usize]
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Largest `|x|` with a nonzero count; 0 when empty.
    pub fn max_abs(&self) -> i32 {
        if self.counts.is_empty() {
            return 0;
        }
        self.lo.abs().max((self.lo + self.counts.len() as i32 - 1).abs())
    }

    /// `(bin, count)` pairs in ascending bin order, zero counts included.
    pub fn iter(&self) -> impl Iterator<Item = (i32, u64)> + '_ {
        self.counts.iter().enumerate().map(move |(i, &c)| (self.lo + i as i32, c))
    }
}

/// Number of first-pass bins `u` with `round(u * q1_step / q2_step) == x`,
/// rounding half away from zero.
///
/// # Panics
/// If either step is zero.
pub fn n_factor(q1_step: u16, q2_step: u16, x: i32) -> u64 {
    assert!(q1_step >= 1 && q2_step >= 1, "quantization steps must be positive");
    let (a, b) = (i64::from(q1_step), i64::from(q2_step));
    let x = i64::from(x).abs();
    if x == 0 {
        return (2 * ((b - 1) / (2 * a)) + 1) as u64;
    }
    // u*a/b in [x - 1/2, x + 1/2)  <=>  2ua in [(2x-1)b, (2x+1)b)
    let ceil_div = |n: i64, d: i64| (n + d - 1) / d;
    (ceil_div((2 * x + 1) * b, 2 * a) - ceil_div((2 * x - 1) * b, 2 * a)) as u64
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Requantization model for one frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleQuantModel {
    pub q1_step: u16,
    pub q2_step: u16,
    /// Noise added between the two quantizers, in coefficient units.
    pub sigma: f64,
}

impl DoubleQuantModel {
    pub fn new(q1_step: u16, q2_step: u16, sigma: f64) -> Self {
        Self { q1_step, q2_step, sigma }
    }

    pub fn exact(&self, x: i32) -> u64 {
        n_factor(self.q1_step, self.q2_step, x)
    }

    /// Expected number of first-pass bins landing in `x` under Gaussian noise.
    /// Equals [`Self::exact`] when `sigma` is zero.
    pub fn soft(&self, x: i32) -> f64 {
        if self.sigma <= 0.0 {
            return self.exact(x) as f64;
        }
        let (s1, s2) = (f64::from(self.q1_step), f64::from(self.q2_step));
        let lo = (f64::from(x) - 0.5) * s2;
        let hi = (f64::from(x) + 0.5) * s2;
        let reach = 8.0 * self.sigma;
        let u0 = ((lo - reach) / s1).floor() as i64;
        let u1 = ((hi + reach) / s1).ceil() as i64;
        (u0..=u1)
            .map(|u| {
                let c = u as f64 * s1;
                normal_cdf((hi - c) / self.sigma) - normal_cdf((lo - c) / self.sigma)
            })
            .sum()
    }
}

/// Histograms of the given zig-zag AC positions over all luminance blocks.
pub fn observed_histograms(j: &QuantizedJpeg, freqs: &[usize]) -> Vec<CoeffHistogram> {
    freqs
        .iter()
        .map(|&f| {
            let n = ac_mode_index(f);
            CoeffHistogram::from_values(f, j.luma().blocks().iter().map(|b| i32::from(b[n])))
        })
        .collect()
}

/// Estimates the histograms a singly compressed version of `j` would have:
/// decode, shift by (4, 4) pixels to break the grid, requantize with the
/// image's own luminance table.
pub fn estimate_single_histogram(j: &QuantizedJpeg, freqs: &[usize]) -> Result<Vec<CoeffHistogram>> {
    let img = luma_image(j);
    let (w, h) = (img.width(), img.height());
    if w < 12 || h < 12 {
        return Err(Error::DegenerateInput(format!("{w}x{h} image too small for a shifted estimate")));
    }
    let shifted = img.crop(4, 4, (w - 4) / 8 * 8, (h - 4) / 8 * 8)?;
    let table = j.luma().table;
    let requantized = quantize(&shifted, table, table, ChromaSubsampling::S444)?;
    Ok(observed_histograms(&requantized, freqs))
}

/// Symmetric chi-square distance between two normalized histograms, in `[0, 1]`.
pub fn chi_square_distance(a: &CoeffHistogram, b: &CoeffHistogram) -> f64 {
    if a.total() == 0 || b.total() == 0 {
        return if a.total() == b.total() { 0.0 } else { 1.0 };
    }
    let r = a.max_abs().max(b.max_abs());
    let (na, nb) = (a.total() as f64, b.total() as f64);
    let mut d = 0.0;
    for x in -r..=r {
        let (p, q) = (a.count(x) as f64 / na, b.count(x) as f64 / nb);
        if p + q > 0.0 {
            d += (p - q) * (p - q) / (p + q);
        }
    }
    d / 2.0
}

/// Writes `frequency,bin,observed,estimated` rows for every bin either
/// histogram covers.
pub fn write_histogram_csv(observed: &[CoeffHistogram], estimated: &[CoeffHistogram], mut w: impl Write) -> Result<()> {
    writeln!(w, "frequency,bin,observed,estimated")?;
    for (o, e) in observed.iter().zip(estimated) {
        let r = o.max_abs().max(e.max_abs());
        for x in -r..=r {
            writeln!(w, "{},{},{},{}", o.freq(), x, o.count(x), e.count(x))?;
        }
    }
    Ok(())
}

/// Fitted single/double model pair for one frequency.
#[derive(Clone, Debug)]
pub struct FrequencyModel {
    pub freq: usize,
    pub quant: DoubleQuantModel,
    /// Mixture weight of the double component on the observed histogram.
    pub double_weight: f64,
    /// Log-likelihood gain of the mixture over the single model.
    pub gain: f64,
    radius: i32,
    log_single: Vec<f64>,
    /// `max(n(x), eps)` over `[-radius, radius]`.
    n: Vec<f64>,
    /// `log P_S(x) - log P_D(x)` for `x != 0` is `log_k - log n(x)`.
    log_k: f64,
}

impl FrequencyModel {
    fn index(&self, x: i32) -> usize {
        (x.clamp(-self.radius, self.radius) + self.radius) as usize
    }

    /// The floored requantization weight at `x`.
    pub fn n(&self, x: i32) -> f64 {
        self.n[self.index(x)]
    }

    /// `log P(x | single) - log P(x | double)`; 0 at `x = 0`.
    pub fn log_ratio(&self, x: i32) -> f64 {
        if x == 0 {
            0.0
        } else {
            self.log_k - self.n(x).ln()
        }
    }

    pub fn log_single(&self, x: i32) -> f64 {
        self.log_single[self.index(x)]
    }

    pub fn log_double(&self, x: i32) -> f64 {
        self.log_single(x) - self.log_ratio(x)
    }
}

/// Knobs shared by the histogram detectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramDetectorOptions {
    /// Number of leading zig-zag AC positions analysed.
    pub n_freqs: usize,
    /// Requantization noise; 0 selects the exact counting model.
    pub sigma: f64,
    /// Minimum mixture gain, in nats, for a frequency to be used.
    pub min_gain: f64,
    /// Additional gain required per nonzero coefficient.
    pub gain_per_sample: f64,
    /// Minimum fitted weight of the double component.
    pub min_double_weight: f64,
    /// Output normalization.
    pub logistic: LogisticParams,
}

impl HistogramDetectorOptions {
    pub fn cda() -> Self {
        Self {
            n_freqs: 15,
            sigma: ROUNDING_SIGMA,
            min_gain: 10.0,
            gain_per_sample: 0.01,
            min_double_weight: 0.25,
            logistic: LogisticParams { phi1: 1.0, phi2: 0.0 },
        }
    }

    pub fn icda() -> Self {
        Self { logistic: LogisticParams { phi1: 0.25, phi2: 0.0 }, ..Self::cda() }
    }

    pub fn bgcda() -> Self {
        Self { n_freqs: 6, logistic: LogisticParams { phi1: 0.05, phi2: 60.0 }, ..Self::cda() }
    }
}

fn em_weight(counts: &[(f64, f64, f64)]) -> (f64, f64) {
    // counts: (c, p_double, p_single)
    let ll = |a: f64| counts.iter().map(|&(c, pd, ps)| c * (a * pd + (1.0 - a) * ps).ln()).sum::<f64>();
    let total: f64 = counts.iter().map(|t| t.0).sum();
    let mut a = 0.5;
    for _ in 0..300 {
        let next = counts
            .iter()
            .map(|&(c, pd, ps)| {
                let m = a * pd + (1.0 - a) * ps;
                c * a * pd / m
            })
            .sum::<f64>()
            / total;
        let done = (next - a).abs() < 1e-7;
        a = next;
        if done {
            break;
        }
    }
    (a, ll(a))
}

/// Fits the first-pass step for one frequency from its observed and
/// estimated histograms. `None` when the double model is not supported.
pub fn fit_frequency(
    observed: &CoeffHistogram,
    estimated: &CoeffHistogram,
    q2_step: u16,
    opts: &HistogramDetectorOptions,
) -> Option<FrequencyModel> {
    let radius = observed.max_abs().max(estimated.max_abs()).max(1);
    let bins = (2 * radius + 1) as usize;
    let smoothed: Vec<f64> = (-radius..=radius).map(|x| estimated.count(x) as f64 + 1.0).collect();
    let full_total: f64 = smoothed.iter().sum();
    let log_single: Vec<f64> = smoothed.iter().map(|c| (c / full_total).ln()).collect();
    let zero = radius as usize;
    let nz_total = full_total - smoothed[zero];
    let ps: Vec<f64> = smoothed.iter().map(|c| c / nz_total).collect();

    let samples: Vec<(usize, f64)> = (-radius..=radius)
        .filter(|&x| x != 0)
        .map(|x| ((x + radius) as usize, observed.count(x) as f64))
        .filter(|&(_, c)| c > 0.0)
        .collect();
    let m: f64 = samples.iter().map(|s| s.1).sum();
    if m < 20.0 {
        return None;
    }
    let ll_single: f64 = samples.iter().map(|&(i, c)| c * ps[i].ln()).sum();

    let mut best: Option<(f64, f64, u16, Vec<f64>, f64)> = None;
    for s1 in 1..=MAX_FIRST_STEP {
        if s1 == q2_step {
            continue;
        }
        let quant = DoubleQuantModel::new(s1, q2_step, opts.sigma);
        let n: Vec<f64> = (-radius..=radius).map(|x| quant.soft(x).max(N_EPSILON)).collect();
        let z: f64 = (0..bins).filter(|&i| i != zero).map(|i| n[i] * ps[i]).sum();
        let triples: Vec<(f64, f64, f64)> = samples.iter().map(|&(i, c)| (c, n[i] * ps[i] / z, ps[i])).collect();
        let (alpha, ll) = em_weight(&triples);
        let gain = ll - ll_single;
        if best.as_ref().is_none_or(|b| gain > b.0) {
            best = Some((gain, alpha, s1, n, z));
        }
    }
    let (gain, alpha, s1, n, z) = best?;
    if gain < opts.min_gain + opts.gain_per_sample * m || alpha < opts.min_double_weight {
        return None;
    }
    // P_D(x) = n(x) P_S(x) (1 - P_S(0)) / sum_{y != 0} n(y) P_S(y), with P_S over all bins
    let log_k = z.ln();
    Some(FrequencyModel {
        freq: observed.freq(),
        quant: DoubleQuantModel::new(s1, q2_step, opts.sigma),
        double_weight: alpha,
        gain,
        radius,
        log_single,
        n,
        log_k,
    })
}

/// Fits models for the first `opts.n_freqs` AC positions, keeping only
/// frequencies with double-compression evidence.
pub fn fit_models(j: &QuantizedJpeg, opts: &HistogramDetectorOptions) -> Result<Vec<FrequencyModel>> {
    let freqs: Vec<usize> = (1..=opts.n_freqs.min(63)).collect();
    let observed = observed_histograms(j, &freqs);
    let estimated = estimate_single_histogram(j, &freqs)?;
    let table = j.luma().table;
    Ok(observed
        .par_iter()
        .zip(estimated.par_iter())
        .filter_map(|(o, e)| fit_frequency(o, e, table.step(ac_mode_index(o.freq())), opts))
        .collect())
}

fn per_block(j: &QuantizedJpeg, f: impl Fn(&[i16; 64]) -> f64 + Sync + Send) -> Vec<f64> {
    j.luma().blocks().par_iter().map(f).collect()
}

fn neutral(j: &QuantizedJpeg, name: &str) -> Result<TamperingMap> {
    let (gw, gh) = j.block_grid();
    Ok(TamperingMap::uniform(gw, gh, 0.5, name)?.with_reliability(0.0))
}

/// Posterior of single compression per block, `p1 / (p1 + p0)` with
/// `p_c` the product of per-frequency conditionals.
pub fn cda_posterior(log_ratios: impl IntoIterator<Item = f64>) -> f64 {
    logistic_normalize(log_ratios.into_iter().sum(), LogisticParams { phi1: 1.0, phi2: 0.0 })
}

/// Block-wise posterior map using the fitted single/double conditionals.
pub fn cda_map(j: &QuantizedJpeg, n_freqs: usize) -> Result<TamperingMap> {
    cda_map_with(j, &HistogramDetectorOptions { n_freqs, ..HistogramDetectorOptions::cda() })
}

pub fn cda_map_with(j: &QuantizedJpeg, opts: &HistogramDetectorOptions) -> Result<TamperingMap> {
    let models = fit_models(j, opts)?;
    if models.is_empty() {
        return neutral(j, "cda");
    }
    let scores = per_block(j, |b| {
        let llr: f64 = models.iter().map(|m| m.log_ratio(i32::from(b[ac_mode_index(m.freq)]))).sum();
        logistic_normalize(llr, opts.logistic)
    });
    let (gw, gh) = j.block_grid();
    TamperingMap::new(gw, gh, scores, "cda")
}

/// `-sum log max(n, eps)` over the `n(x)` values of a block's nonzero
/// coefficients: the log of the inverse product.
pub fn icda_log_score(ns: impl IntoIterator<Item = f64>) -> f64 {
    ns.into_iter().map(|n| -n.max(N_EPSILON).ln()).sum()
}

/// Inverse-product map: blocks whose coefficients sit on the comb's holes
/// score high; blocks with no nonzero coefficient score 0.5.
pub fn icda_map(j: &QuantizedJpeg, n_freqs: usize) -> Result<TamperingMap> {
    icda_map_with(j, &HistogramDetectorOptions { n_freqs, ..HistogramDetectorOptions::icda() })
}

pub fn icda_map_with(j: &QuantizedJpeg, opts: &HistogramDetectorOptions) -> Result<TamperingMap> {
    let models = fit_models(j, opts)?;
    if models.is_empty() {
        return neutral(j, "icda");
    }
    let scores = per_block(j, |b| {
        let ns = models.iter().filter_map(|m| {
            let x = i32::from(b[ac_mode_index(m.freq)]);
            (x != 0).then(|| m.n(x))
        });
        logistic_normalize(icda_log_score(ns), opts.logistic)
    });
    let (gw, gh) = j.block_grid();
    TamperingMap::new(gw, gh, scores, "icda")
}

/// Result of the two-component EM over blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureFit {
    /// Weight of the single-compression component.
    pub single_weight: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after each iteration, starting with the initial weight.
    pub log_likelihood: Vec<f64>,
}

fn log_mix(w: f64, ls: f64, ld: f64) -> f64 {
    let (a, b) = (w.ln() + ls, (1.0 - w).ln() + ld);
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Fits the mixing weight of `w P_S + (1 - w) P_D` over blocks given each
/// block's `(log P_S, log P_D)`. Starts at 0.5; stops when the weight moves
/// less than `tol` or after `max_iters`.
pub fn fit_block_mixture(blocks: &[(f64, f64)], max_iters: usize, tol: f64) -> MixtureFit {
    let ll = |w: f64| blocks.iter().map(|&(ls, ld)| log_mix(w, ls, ld)).sum::<f64>();
    let mut w: f64 = 0.5;
    let mut trace = vec![ll(w)];
    let mut converged = blocks.is_empty();
    let mut iterations = 0;
    while !converged && iterations < max_iters {
        iterations += 1;
        let next =
            blocks.iter().map(|&(ls, ld)| (w.ln() + ls - log_mix(w, ls, ld)).exp()).sum::<f64>() / blocks.len() as f64;
        converged = (next - w).abs() < tol;
        w = next;
        trace.push(ll(w));
    }
    MixtureFit { single_weight: w, iterations, converged, log_likelihood: trace }
}

/// Mixture-based map over the first `n_freqs` AC positions; scores are the
/// normalized per-block log-likelihood ratio of single over double
/// compression. Reliability drops to 0 when EM does not converge.
pub fn bgcda_map(j: &QuantizedJpeg, n_freqs: usize) -> Result<TamperingMap> {
    bgcda_map_with(j, &HistogramDetectorOptions { n_freqs, ..HistogramDetectorOptions::bgcda() }).map(|(m, _)| m)
}

pub fn bgcda_map_with(j: &QuantizedJpeg, opts: &HistogramDetectorOptions) -> Result<(TamperingMap, MixtureFit)> {
    let models = fit_models(j, opts)?;
    if models.is_empty() {
        let fit = MixtureFit { single_weight: 0.0, iterations: 0, converged: false, log_likelihood: Vec::new() };
        return Ok((neutral(j, "bgcda")?, fit));
    }
    let lls: Vec<(f64, f64)> = j
        .luma()
        .blocks()
        .par_iter()
        .map(|b| {
            models.iter().fold((0.0, 0.0), |(s, d), m| {
                let x = i32::from(b[ac_mode_index(m.freq)]);
                (s + m.log_single(x), d + m.log_double(x))
            })
        })
        .collect();
    let fit = fit_block_mixture(&lls, 100, 1e-4);
    let scores = lls.iter().map(|&(s, d)| logistic_normalize(s - d, opts.logistic)).collect();
    let (gw, gh) = j.block_grid();
    let map = TamperingMap::new(gw, gh, scores, "bgcda")?;
    let map = if fit.converged { map } else { map.with_reliability(0.0) };
    Ok((map, fit))
}
