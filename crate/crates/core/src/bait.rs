//! BAIT: greedy batch selection minimizing the V-optimal trace criterion
//! `Tr([candidate Hessian]^-1 [pool Hessian])`, with low-rank inverse
//! updates of block size c per added point.

use nalgebra::DMatrix;

use crate::bayes::{LabeledSet, Prior, WeightPoint};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetric_condition_number, symmetrize};
use crate::parallel;
use crate::rng;

pub const CONDITION_LIMIT: f64 = 1e12;

/// Greedy state: `a` accumulates the labeled-plus-selected Hessian (with the
/// prior term, which guarantees invertibility), `g` is the pool Hessian,
/// both evaluated at the L-MAP. Hessians are label-free.
#[derive(Debug, Clone)]
pub struct BaitState {
    pub a: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub chosen: Vec<usize>,
    a_inv: DMatrix<f64>,
}

impl BaitState {
    pub fn new(a: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols());
        assert_eq!(g.nrows(), g.ncols());
        assert_eq!(a.nrows(), g.nrows());
        let cond = symmetric_condition_number(&a);
        if cond > CONDITION_LIMIT {
            return Err(Error::NearSingular {
                cond,
                limit: CONDITION_LIMIT,
            });
        }
        let a_inv = symmetrize(&spd_inverse(a.clone())?);
        Ok(Self {
            a,
            g,
            chosen: Vec::new(),
            a_inv,
        })
    }

    pub fn a_inverse(&self) -> &DMatrix<f64> {
        &self.a_inv
    }
}

/// `Tr(A^-1 G)`.
pub fn bait_objective(state: &BaitState) -> Result<f64> {
    let cond = symmetric_condition_number(&state.a);
    if cond > CONDITION_LIMIT {
        return Err(Error::NearSingular {
            cond,
            limit: CONDITION_LIMIT,
        });
    }
    Ok(trace_product(&state.a_inv, &state.g))
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

/// Low-rank factor of one point's Fisher block: columns `u_i sqrt(l_i) (x) z`
/// from the eigendecomposition of `diag(p) - p p^T`, so the block equals
/// `F F^T` with at most c columns.
fn fisher_factor(x: &[f64], map: &WeightPoint) -> DMatrix<f64> {
    let c = map.num_classes();
    let d = map.dim();
    let p = map.probs(x);
    let mut class = DMatrix::zeros(c, c);
    for i in 0..c {
        for j in 0..c {
            class[(i, j)] = p[i] * (if i == j { 1.0 } else { 0.0 } - p[j]);
        }
    }
    let eig = class.symmetric_eigen();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= 1e-15 {
            continue;
        }
        let scale = lambda.sqrt();
        let u = eig.eigenvectors.column(idx);
        let mut col = vec![0.0; c * (d + 1)];
        for i in 0..c {
            let base = i * (d + 1);
            for (j, &xj) in x.iter().enumerate() {
                col[base + j] = scale * u[i] * xj;
            }
            col[base + d] = scale * u[i];
        }
        cols.push(col);
    }
    let r = cols.len();
    DMatrix::from_fn(c * (d + 1), r, |i, j| cols[j][i])
}

/// Pool Hessian `sum_x F_x` over the candidate rows, optionally estimated
/// from a seeded subsample for large pools (default off).
pub fn pool_hessian(
    map: &WeightPoint,
    pool: &FeatureMatrix,
    candidates: &[usize],
    subsample: Option<usize>,
    seed: u64,
) -> DMatrix<f64> {
    let n = map.n_params();
    let rows: Vec<usize> = match subsample {
        Some(take) if take < candidates.len() => {
            let mut rng = rng::stream(seed, &[0xba17]);
            rng::sample_without_replacement(&mut rng, candidates.len(), take)
                .into_iter()
                .map(|i| candidates[i])
                .collect()
        }
        _ => candidates.to_vec(),
    };
    let mut g = DMatrix::zeros(n, n);
    for &i in &rows {
        crate::bayes::hessian::add_fisher_block(&mut g, pool.row(i), map);
    }
    g
}

#[derive(Debug, Clone)]
pub struct BaitSelection {
    pub batch: Vec<usize>,
    /// Objective value after each greedy addition.
    pub objectives: Vec<f64>,
}

/// Greedy BAIT: start from `A = prior-regularized labeled Hessian`,
/// `G = pool Hessian`, both at the L-MAP; each step adds the candidate
/// whose Fisher block minimizes `Tr(A^-1 G)`, evaluated and applied through
/// Woodbury updates of `A^-1`. Ties go to the lowest pool index.
pub fn bait_greedy(
    map: &WeightPoint,
    labeled: &LabeledSet,
    pool: &FeatureMatrix,
    candidates: &[usize],
    budget: usize,
    prior: &Prior,
    g_subsample: Option<usize>,
    seed: u64,
) -> Result<BaitSelection> {
    if budget > candidates.len() {
        return Err(Error::PoolExhausted {
            needed: budget,
            available: candidates.len(),
        });
    }
    let n = map.n_params();
    let mut a = DMatrix::identity(n, n) * prior.precision();
    for (x, _) in labeled.examples() {
        crate::bayes::hessian::add_fisher_block(&mut a, x, map);
    }
    let g = pool_hessian(map, pool, candidates, g_subsample, seed);
    let mut state = BaitState::new(a, g)?;

    let mut remaining = candidates.to_vec();
    let mut objectives = Vec::with_capacity(budget);
    for _ in 0..budget {
        let m = &state.a_inv * &state.g * &state.a_inv; // shared per step

        // decrease in Tr(A^-1 G) from adding each candidate's block
        let gains: Vec<f64> = parallel::pool().install(|| {
            use rayon::prelude::*;
            remaining
                .par_iter()
                .map(|&cand| {
                    let f = fisher_factor(pool.row(cand), map);
                    if f.ncols() == 0 {
                        return 0.0;
                    }
                    let y = &state.a_inv * &f;
                    let s = DMatrix::identity(f.ncols(), f.ncols()) + f.transpose() * &y;
                    let fmf = f.transpose() * &m * &f;
                    match s.clone().cholesky() {
                        Some(chol) => trace_product(&chol.inverse(), &fmf),
                        None => 0.0,
                    }
                })
                .collect()
        });
        let best = crate::acquisition::argmax_lowest_index(&gains);
        let chosen = remaining.remove(best);

        let f = fisher_factor(pool.row(chosen), map);
        if f.ncols() > 0 {
            let y = &state.a_inv * &f;
            let s = DMatrix::identity(f.ncols(), f.ncols()) + f.transpose() * &y;
            let s_inv = spd_inverse(s)?;
            state.a_inv = symmetrize(&(&state.a_inv - &y * s_inv * y.transpose()));
            state.a += &f * f.transpose();
        }
        state.chosen.push(chosen);
        objectives.push(bait_objective(&state)?);
    }

    Ok(BaitSelection {
        batch: state.chosen,
        objectives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::hessian::fisher_block;
    use crate::oracle::gauss_jordan_inverse;

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = crate::rng::stream(seed, &[0x5bd]);
        let b = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &b * b.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn identical_matrices_give_the_dimension() {
        let a = random_spd(5, 1);
        let state = BaitState::new(a.clone(), a).unwrap();
        let obj = bait_objective(&state).unwrap();
        assert!((obj - 5.0).abs() < 1e-9, "Tr(A^-1 A) = {obj}");
    }

    #[test]
    fn zero_pool_hessian_gives_zero() {
        let a = random_spd(4, 2);
        let state = BaitState::new(a, DMatrix::zeros(4, 4)).unwrap();
        assert_eq!(bait_objective(&state).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_gauss_jordan_oracle() {
        for seed in 0..10 {
            let a = random_spd(6, seed);
            let g = random_spd(6, seed + 100);
            let state = BaitState::new(a.clone(), g.clone()).unwrap();
            let obj = bait_objective(&state).unwrap();
            let oracle = trace_product(&gauss_jordan_inverse(&a), &g);
            assert!(
                (obj - oracle).abs() <= 1e-8 * oracle.abs().max(1.0),
                "seed {seed}: {obj} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn near_singular_state_is_rejected() {
        let mut a = DMatrix::identity(3, 3);
        a[(0, 0)] = 1e15;
        let err = BaitState::new(a, DMatrix::identity(3, 3)).unwrap_err();
        assert!(matches!(err, Error::NearSingular { .. }));
        assert!(err.to_string().contains("prior"));
    }

    fn toy_problem(seed: u64) -> (WeightPoint, LabeledSet, FeatureMatrix) {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = crate::rng::stream(seed, &[0x70b]);
        let mut map = WeightPoint::zeros(2, 2);
        map.w[(0, 0)] = 0.8;
        map.w[(1, 1)] = -0.5;
        map.b[0] = 0.2;
        let mut labeled = LabeledSet::new(2, 2);
        for i in 0..3 {
            let x: Vec<f64> = (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            labeled.push(&x, i % 2);
        }
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let pool = FeatureMatrix::from_rows(&rows, vec!["a".into(), "b".into()]);
        (map, labeled, pool)
    }

    #[test]
    fn empty_budget_returns_empty_batch() {
        let (map, labeled, pool) = toy_problem(3);
        let candidates: Vec<usize> = (0..pool.n_rows()).collect();
        let sel = bait_greedy(&map, &labeled, &pool, &candidates, 0, &Prior::default(), None, 0)
            .unwrap();
        assert!(sel.batch.is_empty());
        assert!(sel.objectives.is_empty());
    }

    #[test]
    fn objective_sequence_is_non_increasing() {
        let (map, labeled, pool) = toy_problem(4);
        let candidates: Vec<usize> = (0..pool.n_rows()).collect();
        let sel = bait_greedy(&map, &labeled, &pool, &candidates, 6, &Prior::default(), None, 0)
            .unwrap();
        for w in sel.objectives.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "objective increased: {:?}", sel.objectives);
        }
    }

    #[test]
    fn greedy_matches_dense_recomputation() {
        // dense-refactor oracle: rerun every greedy step by explicitly
        // inverting A + F F^T for each candidate
        let (map, labeled, pool) = toy_problem(5);
        let candidates: Vec<usize> = (0..pool.n_rows()).collect();
        let prior = Prior::default();
        let budget = 5;
        let sel = bait_greedy(&map, &labeled, &pool, &candidates, budget, &prior, None, 0)
            .unwrap();

        let n = map.n_params();
        let mut a = DMatrix::identity(n, n) * prior.precision();
        for (x, _) in labeled.examples() {
            crate::bayes::hessian::add_fisher_block(&mut a, x, &map);
        }
        let g = pool_hessian(&map, &pool, &candidates, None, 0);
        let mut remaining = candidates.clone();
        for (step, &expect) in sel.batch.iter().enumerate() {
            let mut best = (usize::MAX, f64::INFINITY);
            for &cand in &remaining {
                let trial = &a + fisher_block(pool.row(cand), &map);
                let obj = trace_product(&gauss_jordan_inverse(&trial), &g);
                if obj < best.1 - 1e-12 {
                    best = (cand, obj);
                }
            }
            assert_eq!(best.0, expect, "greedy step {step} disagrees with dense oracle");
            assert!(
                (best.1 - sel.objectives[step]).abs() <= 1e-8 * best.1.abs().max(1.0),
                "objective at step {step}: dense {} vs incremental {}",
                best.1,
                sel.objectives[step]
            );
            a += fisher_block(pool.row(expect), &map);
            remaining.retain(|&c| c != expect);
        }
    }

    #[test]
    fn low_rank_updates_track_dense_inverse_over_many_steps() {
        let (map, labeled, pool) = toy_problem(6);
        let candidates: Vec<usize> = (0..pool.n_rows()).collect();
        let prior = Prior::default();
        let sel = bait_greedy(&map, &labeled, &pool, &candidates, 10, &prior, None, 0).unwrap();

        let n = map.n_params();
        let mut a = DMatrix::identity(n, n) * prior.precision();
        for (x, _) in labeled.examples() {
            crate::bayes::hessian::add_fisher_block(&mut a, x, &map);
        }
        let g = pool_hessian(&map, &pool, &candidates, None, 0);
        for &c in &sel.batch {
            a += fisher_block(pool.row(c), &map);
        }
        let dense = trace_product(&gauss_jordan_inverse(&a), &g);
        let last = *sel.objectives.last().unwrap();
        assert!(
            (dense - last).abs() <= 1e-8 * dense.abs().max(1.0),
            "after 10 updates: dense {dense} vs incremental {last}"
        );
    }

    #[test]
    fn informative_duplicate_lowers_objective_but_saturated_point_cannot() {
        let (map, labeled, pool) = toy_problem(7);
        let candidates: Vec<usize> = (0..pool.n_rows()).collect();
        let prior = Prior::default();
        let n = map.n_params();
        let mut a = DMatrix::identity(n, n) * prior.precision();
        for (x, _) in labeled.examples() {
            crate::bayes::hessian::add_fisher_block(&mut a, x, &map);
        }
        let g = pool_hessian(&map, &pool, &candidates, None, 0);
        let base = bait_objective(&BaitState::new(a.clone(), g.clone()).unwrap()).unwrap();

        // a high-leverage point strictly reduces the trace, twice over
        let lever = vec![3.0, -3.0];
        let once = &a + fisher_block(&lever, &map);
        let twice = &once + fisher_block(&lever, &map);
        let obj_once = bait_objective(&BaitState::new(once, g.clone()).unwrap()).unwrap();
        let obj_twice = bait_objective(&BaitState::new(twice, g.clone()).unwrap()).unwrap();
        assert!(obj_once < base - 1e-6);
        assert!(obj_twice < obj_once - 1e-9);

        // a point the MAP predicts with near certainty contributes a
        // numerically zero block and leaves the objective unchanged
        let mut saturated_map = map.clone();
        saturated_map.b[0] = 60.0;
        let dead = fisher_block(&[0.0, 0.0], &saturated_map);
        assert!(dead.abs().max() < 1e-20);
        let mut a2 = a.clone();
        a2 += dead;
        let obj2 = bait_objective(&BaitState::new(a2, g).unwrap()).unwrap();
        assert!((obj2 - base).abs() < 1e-12);
    }

    #[test]
    fn objective_ignores_labels_entirely() {
        // same features, shuffled labels -> identical greedy selection
        let (map, labeled, pool) = toy_problem(8);
        let candidates: Vec<usize> = (0..pool.n_rows()).collect();
        let mut flipped = LabeledSet::new(2, 2);
        for (x, y) in labeled.examples() {
            flipped.push(x, 1 - y);
        }
        let a = bait_greedy(&map, &labeled, &pool, &candidates, 4, &Prior::default(), None, 0)
            .unwrap();
        let b = bait_greedy(&map, &flipped, &pool, &candidates, 4, &Prior::default(), None, 0)
            .unwrap();
        assert_eq!(a.batch, b.batch);
        assert_eq!(a.objectives, b.objectives);
    }
}
