//! Brute-force verification batteries. Every routine here recomputes a
//! quantity by an independent route (explicit enumeration, Gauss-Jordan
//! elimination, product-measure expansion) and never calls into the code
//! path it checks.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::acquisition::{batchbald_joint_mi, entropy, pairwise_mi};
use crate::bait::{bait_greedy, bait_objective, pool_hessian, BaitState};
use crate::bayes::hessian::fisher_block;
use crate::bayes::{laplace_posterior, LabeledSet, PosteriorEnsemble, PredictiveTensor, Prior, WeightPoint};
use crate::dataset::FeatureMatrix;
use crate::error::Result;
use crate::parbals::{
    commit, exact_parbals_objectives, parbals_next, sample_universes, FitSettings, ParbalsConfig,
    ParbalsVariant, UniverseCoupling,
};
use crate::rng;

/// Dense inverse by Gauss-Jordan elimination with partial pivoting: the
/// independent solve route used to cross-check Cholesky/Woodbury results.
pub fn gauss_jordan_inverse(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let n = mat.nrows();
    let mut a = mat.clone();
    let mut inv = DMatrix::<f64>::identity(n, n);
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[(r, col)].abs() > a[(pivot, col)].abs() {
                pivot = r;
            }
        }
        assert!(a[(pivot, col)].abs() > 1e-300, "singular matrix in oracle");
        if pivot != col {
            a.swap_rows(pivot, col);
            inv.swap_rows(pivot, col);
        }
        let d = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= d;
            inv[(col, j)] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[(r, col)];
            if factor == 0.0 {
                continue;
            }
            for j in 0..n {
                a[(r, j)] -= factor * a[(col, j)];
                inv[(r, j)] -= factor * inv[(col, j)];
            }
        }
    }
    inv
}

/// Pairwise MI recomputed from an explicitly assembled joint table via
/// `H(a) + H(b) - H(joint)`, iterating classes in the transposed order.
pub fn oracle_pairwise_mi(tensor: &PredictiveTensor, a: usize, b: usize) -> f64 {
    let c = tensor.num_classes();
    let k = tensor.k() as f64;
    let mut joint = vec![0.0; c * c];
    for yb in 0..c {
        for ya in 0..c {
            let mut p = 0.0;
            for j in 0..tensor.k() {
                p += tensor.row(j, a)[ya] * tensor.row(j, b)[yb];
            }
            joint[ya * c + yb] = p / k;
        }
    }
    let mut ma = vec![0.0; c];
    let mut mb = vec![0.0; c];
    for ya in 0..c {
        for yb in 0..c {
            ma[ya] += joint[ya * c + yb];
            mb[yb] += joint[ya * c + yb];
        }
    }
    entropy(&ma) + entropy(&mb) - entropy(&joint)
}

/// Joint batch MI by independent exhaustive enumeration: every label
/// configuration's probability is recomputed from scratch, scanning
/// configurations from the last to the first.
pub fn oracle_batch_mi(tensor: &PredictiveTensor) -> f64 {
    let n = tensor.n_points();
    let c = tensor.num_classes();
    let configs = c.pow(n as u32);
    let mut joint_entropy = 0.0;
    for config in (0..configs).rev() {
        let mut labels = vec![0usize; n];
        let mut rest = config;
        for i in (0..n).rev() {
            labels[i] = rest % c;
            rest /= c;
        }
        let mut p = 0.0;
        for j in 0..tensor.k() {
            let mut prod = 1.0;
            for (i, &y) in labels.iter().enumerate() {
                prod *= tensor.row(j, i)[y];
            }
            p += prod;
        }
        p /= tensor.k() as f64;
        if p > 0.0 {
            joint_entropy -= p * p.ln();
        }
    }
    let mut conditional = 0.0;
    for j in 0..tensor.k() {
        for i in 0..n {
            conditional += entropy(tensor.row(j, i));
        }
    }
    conditional /= tensor.k() as f64;
    joint_entropy - conditional
}

fn random_tensor(k: usize, n: usize, c: usize, seed: u64) -> PredictiveTensor {
    let mut rng = rng::stream(seed, &[0x7e5077]);
    let mut probs = Vec::with_capacity(k * n * c);
    for _ in 0..k * n {
        let raw: Vec<f64> = (0..c).map(|_| rng.random::<f64>() + 1e-3).collect();
        let z: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|v| v / z));
    }
    PredictiveTensor::from_probs(probs, k, n, c, (0..n).collect())
}

// ---------------------------------------------------------------------------
// pairwise-MI battery

#[derive(Debug, Clone)]
pub struct MiReport {
    pub cases: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
}

impl MiReport {
    pub fn passed(&self) -> bool {
        self.max_abs_error <= self.tolerance
    }
}

impl fmt::Display for MiReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "pairwise MI vs joint-table oracle: {} cases, max |error| {:.3e} (tol {:.0e}) -> {}",
            self.cases,
            self.max_abs_error,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Pairwise MI against the independent joint-table oracle on the hand case
/// (two opposed certain samples give ln 2) and random small tensors.
pub fn pairwise_mi_battery(cases: usize, seed: u64) -> MiReport {
    let mut max_err: f64 = 0.0;

    let hand = PredictiveTensor::from_probs(
        vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
        2,
        2,
        2,
        vec![0, 1],
    );
    max_err = max_err.max((pairwise_mi(&hand, 0, 1) - std::f64::consts::LN_2).abs());

    let mut rng = rng::stream(seed, &[0x3141]);
    for case in 0..cases {
        let k = rng.random_range(2..=5);
        let c = rng.random_range(2..=3);
        let t = random_tensor(k, 2, c, seed.wrapping_add(case as u64 + 1));
        let err = (pairwise_mi(&t, 0, 1) - oracle_pairwise_mi(&t, 0, 1)).abs();
        max_err = max_err.max(err);
    }
    MiReport {
        cases: cases + 1,
        max_abs_error: max_err,
        tolerance: 1e-10,
    }
}

// ---------------------------------------------------------------------------
// BatchBALD battery

#[derive(Debug, Clone)]
pub struct BatchBaldReport {
    pub cases: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
}

impl BatchBaldReport {
    pub fn passed(&self) -> bool {
        self.max_abs_error <= self.tolerance
    }
}

impl fmt::Display for BatchBaldReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "batch joint MI vs enumeration oracle: {} cases, max |error| {:.3e} (tol {:.0e}) -> {}",
            self.cases,
            self.max_abs_error,
            self.tolerance,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// Joint batch MI against the reversed-order enumeration oracle on random
/// tensors of 2-3 points.
pub fn batchbald_battery(cases: usize, seed: u64) -> BatchBaldReport {
    let mut rng = rng::stream(seed, &[0x2718]);
    let mut max_err: f64 = 0.0;
    for case in 0..cases {
        let k = rng.random_range(2..=5);
        let c = rng.random_range(2..=3);
        let n = rng.random_range(2..=3);
        let t = random_tensor(k, n, c, seed.wrapping_add(1000 + case as u64));
        let got = batchbald_joint_mi(&t).expect("within cap");
        let expect = oracle_batch_mi(&t);
        max_err = max_err.max((got - expect).abs());
    }
    BatchBaldReport {
        cases,
        max_abs_error: max_err,
        tolerance: 1e-10,
    }
}

// ---------------------------------------------------------------------------
// BAIT battery

#[derive(Debug, Clone)]
pub struct BaitReport {
    pub spd_cases: usize,
    pub max_objective_rel_error: f64,
    pub identity_abs_error: f64,
    pub greedy_steps: usize,
    pub greedy_matches: bool,
    pub max_greedy_rel_error: f64,
    pub tolerance: f64,
}

impl BaitReport {
    pub fn passed(&self) -> bool {
        self.max_objective_rel_error <= self.tolerance
            && self.identity_abs_error <= 1e-9
            && self.greedy_matches
            && self.max_greedy_rel_error <= self.tolerance
    }
}

impl fmt::Display for BaitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "bait objective vs dense-inverse oracle: {} SPD cases, max rel error {:.3e}",
            self.spd_cases, self.max_objective_rel_error
        )?;
        writeln!(f, "Tr(A^-1 A) - P: |{:.3e}| (tol 1e-9)", self.identity_abs_error)?;
        writeln!(
            f,
            "greedy low-rank vs dense recompute over {} steps: argmax match {}, max rel error {:.3e} -> {}",
            self.greedy_steps,
            self.greedy_matches,
            self.max_greedy_rel_error,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, &[0x5bd17]);
    let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    &b * b.transpose() + DMatrix::identity(n, n) * 0.5
}

fn trace_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut t = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            t += a[(i, j)] * b[(j, i)];
        }
    }
    t
}

/// BAIT checks: objective vs Gauss-Jordan on random SPD pairs, the
/// `Tr(A^-1 A) = P` identity, and greedy Woodbury updates vs per-step dense
/// recomputation on a 10-point pool.
pub fn bait_battery(spd_cases: usize, seed: u64) -> BaitReport {
    let tolerance = 1e-8;
    let mut max_rel: f64 = 0.0;
    for case in 0..spd_cases {
        let a = random_spd(6, seed.wrapping_add(case as u64));
        let g = random_spd(6, seed.wrapping_add(500 + case as u64));
        let state = BaitState::new(a.clone(), g.clone()).expect("well conditioned");
        let got = bait_objective(&state).expect("well conditioned");
        let expect = trace_product(&gauss_jordan_inverse(&a), &g);
        max_rel = max_rel.max((got - expect).abs() / expect.abs().max(1.0));
    }

    let a = random_spd(7, seed.wrapping_add(9000));
    let state = BaitState::new(a.clone(), a).expect("well conditioned");
    let identity_abs_error = (bait_objective(&state).unwrap() - 7.0).abs();

    // greedy vs dense on a 10-point pool
    let mut rng = rng::stream(seed, &[0x9a1e]);
    let mut map = WeightPoint::zeros(2, 2);
    map.w[(0, 0)] = 0.9;
    map.w[(1, 1)] = -0.6;
    map.b[0] = 0.3;
    let mut labeled = LabeledSet::new(2, 2);
    for i in 0..3 {
        let x: Vec<f64> = (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        labeled.push(&x, i % 2);
    }
    let rows: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let pool = FeatureMatrix::from_rows(&rows, vec!["a".into(), "b".into()]);
    let candidates: Vec<usize> = (0..10).collect();
    let prior = Prior::default();
    let budget = 6;
    let sel = bait_greedy(&map, &labeled, &pool, &candidates, budget, &prior, None, seed)
        .expect("greedy");

    let n = map.n_params();
    let mut a = DMatrix::identity(n, n) * prior.precision();
    for (x, _) in labeled.examples() {
        crate::bayes::hessian::add_fisher_block(&mut a, x, &map);
    }
    let g = pool_hessian(&map, &pool, &candidates, None, seed);
    let mut remaining = candidates.clone();
    let mut greedy_matches = true;
    let mut max_greedy_rel: f64 = 0.0;
    for (step, &chosen) in sel.batch.iter().enumerate() {
        let mut best = (usize::MAX, f64::INFINITY);
        for &cand in &remaining {
            let trial = &a + fisher_block(pool.row(cand), &map);
            let obj = trace_product(&gauss_jordan_inverse(&trial), &g);
            if obj < best.1 - 1e-12 {
                best = (cand, obj);
            }
        }
        if best.0 != chosen {
            greedy_matches = false;
            break;
        }
        max_greedy_rel = max_greedy_rel
            .max((best.1 - sel.objectives[step]).abs() / best.1.abs().max(1.0));
        a += fisher_block(pool.row(chosen), &map);
        remaining.retain(|&c| c != chosen);
    }

    BaitReport {
        spd_cases,
        max_objective_rel_error: max_rel,
        identity_abs_error,
        greedy_steps: budget,
        greedy_matches,
        max_greedy_rel_error: max_greedy_rel,
        tolerance,
    }
}

// ---------------------------------------------------------------------------
// ParBaLS Monte Carlo battery

#[derive(Debug, Clone)]
pub struct ParbalsMcReport {
    pub ms: Vec<usize>,
    pub match_freq: Vec<f64>,
    pub mean_regret: Vec<f64>,
    pub trials: usize,
    pub exact_argmax: usize,
    pub monotonic_tolerance: f64,
    pub final_freq_floor: f64,
}

impl ParbalsMcReport {
    pub fn freq_non_decreasing(&self) -> bool {
        self.match_freq
            .windows(2)
            .all(|w| w[1] >= w[0] - self.monotonic_tolerance)
    }

    pub fn regret_non_increasing(&self) -> bool {
        self.mean_regret
            .windows(2)
            .all(|w| w[1] <= w[0] + self.monotonic_tolerance)
    }

    pub fn final_freq_ok(&self) -> bool {
        self.match_freq.last().is_some_and(|&f| f >= self.final_freq_floor)
    }

    pub fn passed(&self) -> bool {
        self.freq_non_decreasing() && self.regret_non_increasing() && self.final_freq_ok()
    }
}

impl fmt::Display for ParbalsMcReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "ParBaLS Monte Carlo vs exact enumeration ({} trials, exact argmax = pool index {})",
            self.trials, self.exact_argmax
        )?;
        writeln!(f, "{:>8} {:>12} {:>14}", "m", "match freq", "mean regret")?;
        for ((&m, &freq), &regret) in self.ms.iter().zip(&self.match_freq).zip(&self.mean_regret) {
            writeln!(f, "{m:>8} {freq:>12.3} {regret:>14.6}")?;
        }
        writeln!(
            f,
            "match freq non-decreasing (+-{}): {}; final freq >= {}: {}; regret non-increasing: {} -> {}",
            self.monotonic_tolerance,
            self.freq_non_decreasing(),
            self.final_freq_floor,
            self.final_freq_ok(),
            self.regret_non_increasing(),
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// The fixed oracle instance: 2 classes, d = 2, pool of 12 with 3 points
/// pre-committed, 8 validation points, k = 50 posterior samples.
pub struct ParbalsMcInstance {
    pub ensemble: PosteriorEnsemble,
    pub pool: FeatureMatrix,
    pub validation: FeatureMatrix,
    pub labeled: LabeledSet,
    pub committed: Vec<usize>,
    pub remaining: Vec<usize>,
    pub settings: FitSettings,
}

pub fn parbals_mc_instance(seed: u64) -> Result<ParbalsMcInstance> {
    let mut rng = rng::stream(seed, &[0xd0e5]);
    let mut draw = |n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    };
    let pool = FeatureMatrix::from_rows(&draw(12), vec!["a".into(), "b".into()]);
    let validation = FeatureMatrix::from_rows(&draw(8), vec!["a".into(), "b".into()]);
    let mut labeled = LabeledSet::new(2, 2);
    for (i, x) in draw(4).iter().enumerate() {
        labeled.push(x, i % 2);
    }
    let settings = FitSettings {
        prior: Prior::default(),
        k: 50,
        tol: 1e-8,
    };
    let ensemble = laplace_posterior(&labeled, &settings.prior, settings.k, seed, settings.tol)?;
    Ok(ParbalsMcInstance {
        ensemble,
        pool,
        validation,
        labeled,
        committed: vec![0, 1, 2],
        remaining: (3..12).collect(),
        settings,
    })
}

/// Run the Monte Carlo argmax against exact enumeration: for each trial and
/// each m, sample universes, commit the fixed partial batch, pick the next
/// point, and compare with the exact product-measure argmax.
pub fn parbals_mc_battery(trials: usize, ms: &[usize], seed: u64) -> Result<ParbalsMcReport> {
    let instance = parbals_mc_instance(seed)?;
    let exact = exact_parbals_objectives(
        &instance.ensemble,
        &instance.pool,
        &instance.remaining,
        &instance.validation,
        &instance.labeled,
        &instance.committed,
        &instance.settings,
    )?;
    let exact_local = crate::acquisition::argmax_lowest_index(&exact);
    let exact_argmax = instance.remaining[exact_local];
    let exact_best = exact[exact_local];
    let norm = instance.validation.n_rows() as f64; // regret in f-units of [0, ln 2]

    let mut match_freq = Vec::with_capacity(ms.len());
    let mut mean_regret = Vec::with_capacity(ms.len());
    for &m in ms {
        let mut matches = 0usize;
        let mut regret = 0.0;
        for trial in 0..trials {
            let cfg = ParbalsConfig {
                m,
                budget: 1,
                variant: ParbalsVariant::Sampled,
                coupling: UniverseCoupling::Independent,
                val_subsample: usize::MAX,
                seed: rng::stream_id(seed, &[m as u64, trial as u64]),
            };
            let mut universes = sample_universes(&instance.ensemble, &instance.pool, &cfg)?;
            for &s in &instance.committed {
                commit(
                    &mut universes,
                    &instance.pool,
                    &instance.labeled,
                    s,
                    &instance.settings,
                )?;
            }
            let chosen = parbals_next(
                &universes,
                &instance.pool,
                &instance.remaining,
                &instance.validation,
                &cfg,
            );
            if chosen == exact_argmax {
                matches += 1;
            }
            let local = instance.remaining.iter().position(|&p| p == chosen).unwrap();
            regret += (exact_best - exact[local]) / norm;
        }
        match_freq.push(matches as f64 / trials as f64);
        mean_regret.push(regret / trials as f64);
    }

    Ok(ParbalsMcReport {
        ms: ms.to_vec(),
        match_freq,
        mean_regret,
        trials,
        exact_argmax,
        monotonic_tolerance: 0.05,
        final_freq_floor: 0.9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_jordan_inverts_spd() {
        let a = random_spd(5, 3);
        let inv = gauss_jordan_inverse(&a);
        assert!(((a * inv) - DMatrix::identity(5, 5)).abs().max() < 1e-9);
    }

    #[test]
    fn oracle_pairwise_mi_agrees_on_hand_case() {
        let hand = PredictiveTensor::from_probs(
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0],
            2,
            2,
            2,
            vec![0, 1],
        );
        assert!((oracle_pairwise_mi(&hand, 0, 1) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn small_mi_battery_passes() {
        let report = pairwise_mi_battery(5, 1);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn small_batchbald_battery_passes() {
        let report = batchbald_battery(5, 2);
        assert!(report.passed(), "{report}");
    }

    #[test]
    fn small_bait_battery_passes() {
        let report = bait_battery(5, 3);
        assert!(report.passed(), "{report}");
    }
}
