//! Markov random field fusion of candidate maps: reject unreliable
//! candidates, weight the rest by agreement with the current labeling, and
//! relabel by iterated conditional modes.
//!
//! Energy of a labeling `t` given the weighted mean score `s` per block:
//!
//! ```text
//! E(t) = sum_b t_b * UNARY_GAIN * (tau + alpha * ALPHA_SCALE + drift_b - s_b)
//!      + beta * #{8-neighbour pairs with t_b != t_b'}
//! ```

use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::eval::{evaluate_binary_maps, thresholds, BinaryMap, EvalRecord};
use crate::maps::TamperingMap;
use crate::synth::GroundTruthMask;

/// Score-units shift per unit of `alpha`.
pub const ALPHA_SCALE: f64 = 0.1;

/// Converts score differences into pairwise-energy units.
pub const UNARY_GAIN: f64 = 10.0;

pub const DEFAULT_MAX_ITERS: usize = 20;
const MAX_SWEEPS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FusionParams {
    /// Decision bias; positive values favour the authentic label.
    pub alpha: f64,
    /// Potts interaction strength.
    pub beta: f64,
    /// Threshold drift, strongest where the mean score is near 0.5.
    pub delta: f64,
    /// Candidate rejection threshold on map reliability.
    pub rho: f64,
}

impl FusionParams {
    pub const FDF_F_F1: Self = Self { alpha: 0.25, beta: 1.25, delta: 0.125, rho: 0.05 };
    pub const FDF_F_AUC: Self = Self { alpha: 1.5, beta: 0.25, delta: 0.15, rho: 0.2 };

    pub fn new(alpha: f64, beta: f64, delta: f64, rho: f64) -> Result<Self> {
        let p = Self { alpha, beta, delta, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.delta.is_finite()) {
            return Err(invalid("fusion alpha and delta must be finite"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("fusion beta must be >= 0, got {}", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(invalid(format!("fusion rho must be in [0, 1], got {}", self.rho)));
        }
        Ok(())
    }

    /// `fdf-f1` or `fdf-auc`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "fdf-f1" | "fdf-f/f1" => Ok(Self::FDF_F_F1),
            "fdf-auc" | "fdf-f/auc" => Ok(Self::FDF_F_AUC),
            _ => Err(invalid(format!("unknown fusion preset {name:?}"))),
        }
    }
}

/// Threshold shift at a block whose mean score is `s`.
pub fn threshold_drift(delta: f64, s: f64) -> f64 {
    delta * (1.0 - 2.0 * (s - 0.5).abs())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    /// Indices into the candidate list.
    pub retained: Vec<usize>,
    /// Every candidate fell below `rho`; the most reliable one was kept.
    pub fallback: bool,
}

fn check_dims(candidates: &[TamperingMap]) -> Result<(usize, usize)> {
    let first = candidates.first().ok_or_else(|| invalid("no candidate maps"))?;
    if candidates.iter().any(|c| c.dims() != first.dims()) {
        return Err(invalid("candidate maps differ in size"));
    }
    Ok(first.dims())
}

/// Keeps candidates with reliability at least `rho`.
pub fn reject_candidates(candidates: &[TamperingMap], rho: f64) -> Result<Rejection> {
    check_dims(candidates)?;
    let retained: Vec<usize> = (0..candidates.len()).filter(|&i| candidates[i].reliability() >= rho).collect();
    if !retained.is_empty() {
        return Ok(Rejection { retained, fallback: false });
    }
    let best = (0..candidates.len())
        .max_by(|&a, &b| candidates[a].reliability().total_cmp(&candidates[b].reliability()).then(b.cmp(&a)))
        .expect("nonempty");
    Ok(Rejection { retained: vec![best], fallback: true })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionResult {
    pub decision: BinaryMap,
    /// Weight per retained candidate, in `rejection.retained` order; sums to 1.
    pub weights: Vec<f64>,
    pub rejection: Rejection,
    pub iterations: usize,
    pub converged: bool,
    /// Labeling energy after each ICM sweep, one list per outer iteration.
    pub energy: Vec<Vec<f64>>,
}

/// Block-wise energy terms of one fusion problem.
struct Field {
    w: usize,
    h: usize,
    /// Unary energy of label 1; label 0 costs nothing.
    unary: Vec<f64>,
    beta: f64,
}

impl Field {
    fn new(mean: &[f64], w: usize, h: usize, p: &FusionParams, tau: f64) -> Self {
        let unary = mean
            .iter()
            .map(|&s| UNARY_GAIN * (tau + p.alpha * ALPHA_SCALE + threshold_drift(p.delta, s) - s))
            .collect();
        Self { w, h, unary, beta: p.beta }
    }

    fn neighbours(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let (x, y) = ((i % self.w) as isize, (i / self.w) as isize);
        (-1isize..=1).flat_map(move |dy| (-1isize..=1).map(move |dx| (dx, dy))).filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= self.w as isize || ny >= self.h as isize {
                None
            } else {
                Some(ny as usize * self.w + nx as usize)
            }
        })
    }

    fn energy(&self, t: &[bool]) -> f64 {
        let mut e: f64 = t.iter().zip(&self.unary).filter(|(l, _)| **l).map(|(_, u)| u).sum();
        if self.beta > 0.0 {
            let mut cuts = 0usize;
            for i in 0..t.len() {
                cuts += self.neighbours(i).filter(|&j| j > i && t[j] != t[i]).count();
            }
            e += self.beta * cuts as f64;
        }
        e
    }

    /// One raster-order ICM sweep; returns the number of changed labels.
    /// Label 1 wins exact ties, so `beta = 0` reproduces `s >= threshold`.
    fn sweep(&self, t: &mut [bool]) -> usize {
        let mut flips = 0;
        for i in 0..t.len() {
            let (mut ones, mut zeros) = (0.0, 0.0);
            if self.beta > 0.0 {
                for j in self.neighbours(i) {
                    if t[j] {
                        ones += 1.0;
                    } else {
                        zeros += 1.0;
                    }
                }
            }
            let gain = self.unary[i] + self.beta * (zeros - ones);
            let label = gain <= 0.0;
            if label != t[i] {
                t[i] = label;
                flips += 1;
            }
        }
        flips
    }
}

/// Bitwise-identical candidates merged, with multiplicities.
fn unique_maps<'a>(maps: &[&'a TamperingMap]) -> (Vec<&'a TamperingMap>, Vec<usize>, Vec<f64>) {
    let mut uniq: Vec<&TamperingMap> = Vec::new();
    let mut of = Vec::with_capacity(maps.len());
    let mut mult: Vec<f64> = Vec::new();
    for m in maps {
        match uniq.iter().position(|u| u.scores() == m.scores()) {
            Some(k) => {
                mult[k] += 1.0;
                of.push(k);
            }
            None => {
                uniq.push(m);
                mult.push(1.0);
                of.push(uniq.len() - 1);
            }
        }
    }
    (uniq, of, mult)
}

fn weighted_mean(maps: &[&TamperingMap], weights: &[f64]) -> Vec<f64> {
    if maps.len() == 1 {
        return maps[0].scores().to_vec();
    }
    let n = maps[0].scores().len();
    (0..n).map(|b| maps.iter().zip(weights).map(|(m, w)| w * m.scores()[b]).sum()).collect()
}

/// Fuses candidates at base threshold `tau` (0.5 for a plain decision).
pub fn fuse_em_at(
    candidates: &[TamperingMap],
    params: &FusionParams,
    tau: f64,
    max_iters: usize,
) -> Result<FusionResult> {
    params.validate()?;
    let (w, h) = check_dims(candidates)?;
    let rejection = reject_candidates(candidates, params.rho)?;
    let retained: Vec<&TamperingMap> = rejection.retained.iter().map(|&i| &candidates[i]).collect();
    let (uniq, of, mult) = unique_maps(&retained);
    let total: f64 = mult.iter().sum();
    let mut weights: Vec<f64> = mult.iter().map(|m| m / total).collect();

    let mut mean = weighted_mean(&uniq, &weights);
    let mut field = Field::new(&mean, w, h, params, tau);
    // start from the unary-only minimizer
    let mut labels: Vec<bool> = field.unary.iter().map(|&u| u <= 0.0).collect();
    let mut energy = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut previous: Option<Vec<bool>> = None;
    while iterations < max_iters.max(1) {
        iterations += 1;
        let mut trace = vec![field.energy(&labels)];
        for _ in 0..MAX_SWEEPS {
            let flips = field.sweep(&mut labels);
            trace.push(field.energy(&labels));
            if flips == 0 {
                break;
            }
        }
        energy.push(trace);
        if previous.as_deref() == Some(&labels[..]) {
            converged = true;
            break;
        }
        previous = Some(labels.clone());

        // E-step: softmax of agreement with the current labeling
        let agreement: Vec<f64> = uniq
            .iter()
            .map(|m| {
                let s: f64 =
                    m.scores().iter().zip(&labels).map(|(s, &l)| 1.0 - (s - if l { 1.0 } else { 0.0 }).abs()).sum();
                s / (w * h) as f64
            })
            .collect();
        let top = agreement.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = agreement.iter().zip(&mult).map(|(a, m)| m * (a - top).exp()).collect();
        let z: f64 = raw.iter().sum();
        weights = raw.iter().map(|r| r / z).collect();
        mean = weighted_mean(&uniq, &weights);
        field = Field::new(&mean, w, h, params, tau);
    }
    let per_candidate = of.iter().map(|&k| weights[k] / mult[k]).collect();
    Ok(FusionResult {
        decision: BinaryMap::new(w, h, labels)?,
        weights: per_candidate,
        rejection,
        iterations,
        converged,
        energy,
    })
}

/// Fusion with the plain 0.5 decision threshold.
pub fn fuse_em(candidates: &[TamperingMap], params: &FusionParams, max_iters: usize) -> Result<FusionResult> {
    fuse_em_at(candidates, params, 0.5, max_iters)
}

/// One fused decision per sweep threshold.
pub fn fuse_sweep(candidates: &[TamperingMap], params: &FusionParams, max_iters: usize) -> Result<Vec<BinaryMap>> {
    thresholds().iter().map(|&t| fuse_em_at(candidates, params, t, max_iters).map(|r| r.decision)).collect()
}

/// Stacks the sweep into one map: a block labelled tampered at `tau_k` and
/// no higher threshold scores `tau_k + 1/80`, 0 if never. Thresholding this
/// map at `tau_k` gives the union of the decisions at `tau_k` and above; the
/// half-step offset survives f32 storage.
pub fn fused_map(candidates: &[TamperingMap], params: &FusionParams, max_iters: usize) -> Result<TamperingMap> {
    let sweep = fuse_sweep(candidates, params, max_iters)?;
    let (w, h) = sweep[0].dims();
    let mut scores = vec![0.0; w * h];
    for (b, t) in sweep.iter().zip(thresholds()) {
        for (s, &on) in scores.iter_mut().zip(b.cells()) {
            if on {
                *s = t + 1.0 / 80.0;
            }
        }
    }
    TamperingMap::new(w, h, scores, "fdf-fuse")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMetric {
    F1,
    Auc,
}

impl GridMetric {
    pub fn name(self) -> &'static str {
        match self {
            Self::F1 => "f1",
            Self::Auc => "auc_0.1",
        }
    }

    fn of(self, r: &EvalRecord) -> f64 {
        match self {
            Self::F1 => r.max_f1,
            Self::Auc => r.auc_01,
        }
    }
}

impl std::str::FromStr for GridMetric {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(Self::F1),
            "auc" | "auc_0.1" | "auc01" => Ok(Self::Auc),
            _ => Err(invalid(format!("grid metric must be f1 or auc, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParamGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub rhos: Vec<f64>,
}

impl ParamGrid {
    /// alpha -1.5..=1.5 by 0.25, beta 0..=2.25 by 0.25, delta 0..=0.15 by
    /// 0.025, rho 0..=0.2 by 0.05.
    pub fn standard() -> Self {
        Self {
            alphas: (-6..=6).map(|i| f64::from(i) * 0.25).collect(),
            betas: (0..=9).map(|i| f64::from(i) * 0.25).collect(),
            deltas: (0..=6).map(|i| f64::from(i) / 40.0).collect(),
            rhos: (0..=4).map(|i| f64::from(i) / 20.0).collect(),
        }
    }

    pub fn cells(&self) -> Vec<FusionParams> {
        let mut out = Vec::with_capacity(self.alphas.len() * self.betas.len() * self.deltas.len() * self.rhos.len());
        for &alpha in &self.alphas {
            for &beta in &self.betas {
                for &delta in &self.deltas {
                    for &rho in &self.rhos {
                        out.push(FusionParams { alpha, beta, delta, rho });
                    }
                }
            }
        }
        out
    }
}

/// One case of a grid-search corpus.
#[derive(Clone, Debug)]
pub struct GridCase {
    pub candidates: Vec<TamperingMap>,
    pub mask: GroundTruthMask,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridRow {
    pub params: FusionParams,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSearchResult {
    pub metric: GridMetric,
    /// Best first; ties keep grid order.
    pub ranked: Vec<GridRow>,
}

/// Mean metric of fused maps over the corpus, no cleanup.
pub fn evaluate_fusion(cases: &[GridCase], params: &FusionParams, metric: GridMetric, max_iters: usize) -> Result<f64> {
    if cases.is_empty() {
        return Err(invalid("empty grid-search corpus"));
    }
    let mut total = 0.0;
    for c in cases {
        let m = fused_map(&c.candidates, params, max_iters)?;
        let samples = evaluate_binary_maps(&crate::eval::threshold_sweep(&m), &c.mask, false)?;
        total += metric.of(&EvalRecord::new("", "fdf-fuse", 0, 0, false, samples));
    }
    Ok(total / cases.len() as f64)
}

/// Full-factorial sweep of the grid.
pub fn grid_search(
    grid: &ParamGrid,
    cases: &[GridCase],
    metric: GridMetric,
    max_iters: usize,
) -> Result<GridSearchResult> {
    if cases.is_empty() {
        return Err(invalid("empty grid-search corpus"));
    }
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(invalid("empty parameter grid"));
    }
    let values: Vec<f64> =
        cells.par_iter().map(|p| evaluate_fusion(cases, p, metric, max_iters)).collect::<Result<_>>()?;
    let mut ranked: Vec<GridRow> =
        cells.into_iter().zip(values).map(|(params, value)| GridRow { params, value }).collect();
    ranked.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(GridSearchResult { metric, ranked })
}

type Getter = fn(&FusionParams) -> f64;

impl GridSearchResult {
    /// Best value attainable with each parameter pinned to each of its grid
    /// values: `(parameter, value, best)`.
    pub fn profiles(&self) -> Vec<(&'static str, f64, f64)> {
        let mut out: Vec<(&'static str, f64, f64)> = Vec::new();
        let getters: [(&'static str, Getter); 4] =
            [("alpha", |p| p.alpha), ("beta", |p| p.beta), ("delta", |p| p.delta), ("rho", |p| p.rho)];
        for (name, get) in getters {
            let mut vals: Vec<f64> = self.ranked.iter().map(|r| get(&r.params)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for v in vals {
                let best = self
                    .ranked
                    .iter()
                    .filter(|r| get(&r.params) == v)
                    .map(|r| r.value)
                    .fold(f64::NEG_INFINITY, f64::max);
                out.push((name, v, best));
            }
        }
        out
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "alpha,beta,delta,rho,metric,value")?;
        for r in &self.ranked {
            let p = r.params;
            writeln!(w, "{},{},{},{},{},{}", p.alpha, p.beta, p.delta, p.rho, self.metric.name(), r.value)?;
        }
        Ok(())
    }

    pub fn write_profiles_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "parameter,value,metric,best")?;
        for (name, v, best) in self.profiles() {
            writeln!(w, "{name},{v},{},{best}", self.metric.name())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(w: usize, h: usize, seed: u64) -> TamperingMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TamperingMap::new(w, h, (0..w * h).map(|_| rng.gen_range(0.0..1.0)).collect(), "r").unwrap()
    }

    const PLAIN: FusionParams = FusionParams { alpha: 0.0, beta: 0.0, delta: 0.0, rho: 0.0 };

    #[test]
    fn grid_has_4550_cells() {
        let g = ParamGrid::standard();
        assert_eq!((g.alphas.len(), g.betas.len(), g.deltas.len(), g.rhos.len()), (13, 10, 7, 5));
        assert_eq!(g.cells().len(), 4550);
        assert_eq!(g.deltas[6], 0.15);
        assert_eq!(g.alphas[0], -1.5);
    }

    #[test]
    fn presets() {
        assert_eq!(
            FusionParams::preset("fdf-f1").unwrap(),
            FusionParams { alpha: 0.25, beta: 1.25, delta: 0.125, rho: 0.05 }
        );
        assert_eq!(
            FusionParams::preset("fdf-auc").unwrap(),
            FusionParams { alpha: 1.5, beta: 0.25, delta: 0.15, rho: 0.2 }
        );
        assert!(FusionParams::preset("x").is_err());
        assert!(FusionParams::new(0.0, -1.0, 0.0, 0.0).is_err());
        assert!(FusionParams::new(0.0, 0.0, 0.0, 1.5).is_err());
    }

    #[test]
    fn single_candidate_without_smoothing_is_thresholding() {
        let mut m = random_map(9, 7, 1);
        let mut s = m.scores().to_vec();
        s[3] = 0.5;
        m = TamperingMap::new(9, 7, s, "r").unwrap();
        let r = fuse_em(std::slice::from_ref(&m), &PLAIN, 20).unwrap();
        assert_eq!(r.decision, BinaryMap::threshold(&m, 0.5));
        assert!(r.converged);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn identical_candidates_match_single() {
        let m = random_map(10, 10, 2);
        for p in [PLAIN, FusionParams::FDF_F_F1, FusionParams::FDF_F_AUC] {
            let one = fuse_em(std::slice::from_ref(&m), &p, 20).unwrap();
            let three = fuse_em(&[m.clone(), m.clone(), m.clone()], &p, 20).unwrap();
            assert_eq!(one.decision, three.decision);
            assert!((three.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_blocks_are_smoothed_away() {
        // unary magnitude is UNARY_GAIN * 0.3 = 3 while eight disagreeing
        // neighbours cost 8 * beta, so any beta above 3 / 8 removes spikes
        let scores = (0..144).map(|i| if i % 3 == 0 && (i / 12) % 3 == 0 { 0.8 } else { 0.2 }).collect();
        let m = TamperingMap::new(12, 12, scores, "c").unwrap();
        let r = fuse_em(std::slice::from_ref(&m), &FusionParams { beta: 2.0, ..PLAIN }, 20).unwrap();
        assert_eq!(r.decision.count(), 0);
        let r = fuse_em(std::slice::from_ref(&m), &PLAIN, 20).unwrap();
        assert_eq!(r.decision.count(), 16);
    }

    #[test]
    fn zero_beta_decouples_blocks() {
        let a = random_map(8, 8, 3);
        let mut s = a.scores().to_vec();
        s[63] = 1.0 - s[63];
        let b = TamperingMap::new(8, 8, s, "r").unwrap();
        let p = FusionParams { alpha: 0.5, delta: 0.1, ..PLAIN };
        let ra = fuse_em(std::slice::from_ref(&a), &p, 20).unwrap();
        let rb = fuse_em(std::slice::from_ref(&b), &p, 20).unwrap();
        assert_eq!(ra.decision.cells()[..63], rb.decision.cells()[..63]);
    }

    #[test]
    fn icm_never_raises_energy() {
        for seed in 0..20 {
            let cands: Vec<_> = (0..3).map(|k| random_map(12, 9, seed * 10 + k)).collect();
            let r = fuse_em(&cands, &FusionParams::FDF_F_F1, 20).unwrap();
            for trace in &r.energy {
                assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{trace:?}");
            }
        }
    }

    #[test]
    fn rejection_rules() {
        let noise = TamperingMap::uniform(4, 4, 0.5, "n").unwrap();
        let strong = TamperingMap::new(4, 4, (0..16).map(|i| if i < 8 { 0.95 } else { 0.05 }).collect(), "s").unwrap();
        let maps = [noise.clone(), strong.clone()];
        assert_eq!(reject_candidates(&maps, 0.0).unwrap().retained, vec![0, 1]);
        assert_eq!(reject_candidates(&maps, 0.05).unwrap(), Rejection { retained: vec![1], fallback: false });
        assert_eq!(reject_candidates(&maps, 1.0).unwrap(), Rejection { retained: vec![1], fallback: true });
        let small = TamperingMap::uniform(3, 4, 0.5, "n").unwrap();
        assert!(reject_candidates(&[noise, small], 0.0).is_err());
        assert!(reject_candidates(&[], 0.0).is_err());
    }

    #[test]
    fn fused_map_stacks_nested_decisions() {
        let m = random_map(6, 6, 4);
        let f = fused_map(std::slice::from_ref(&m), &PLAIN, 20).unwrap();
        // with beta = 0 each sweep decision is `s >= tau`, so the stack
        // thresholds back to exactly those decisions
        for (b, t) in crate::eval::threshold_sweep(&f).iter().zip(thresholds()) {
            assert_eq!(*b, BinaryMap::threshold(&m, t));
        }
    }

    #[test]
    fn small_grid_search_ranks_and_profiles() {
        let mask = GroundTruthMask::new(8, 8, (0..64).map(|i| i % 8 < 4).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cand = |rng: &mut ChaCha8Rng| {
            let s = mask.cells().iter().map(|&t| (if t { 0.7 } else { 0.3 }) + rng.gen_range(-0.25..0.25)).collect();
            TamperingMap::new(8, 8, s, "c").unwrap()
        };
        let cases = vec![GridCase { candidates: vec![cand(&mut rng), cand(&mut rng)], mask: mask.clone() }];
        let grid = ParamGrid { alphas: vec![0.0, 1.0], betas: vec![0.0, 1.0], deltas: vec![0.0], rhos: vec![0.0] };
        let r = grid_search(&grid, &cases, GridMetric::F1, 10).unwrap();
        assert_eq!(r.ranked.len(), 4);
        assert!(r.ranked.windows(2).all(|w| w[0].value >= w[1].value));
        let prof = r.profiles();
        assert_eq!(prof.len(), 2 + 2 + 1 + 1);
        assert!(prof.iter().any(|&(n, _, b)| n == "rho" && b == r.ranked[0].value));
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        assert!(String::from_utf8(csv).unwrap().starts_with("alpha,beta,delta,rho,metric,value\n"));
        assert!(grid_search(&grid, &[], GridMetric::F1, 10).is_err());
    }
}
