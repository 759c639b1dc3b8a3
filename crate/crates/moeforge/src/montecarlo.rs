//! Seeded Monte Carlo cross-checks: empirical compressed norms against the
//! free-limit t-norm, duality attainment, the Bell-state lower bound, and a
//! multi-start minimum-output-entropy search.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certifier::ExtendedCount;
use crate::error::{Error, Result};
use crate::matops::{
    density_project, haar_unitary, hermitian_eigen, kron, partial_trace_right, random_hermitian,
    ChannelParams, DensityMatrix, HermitianMatrix, UnitaryMatrix,
};

/// Maximum k^2 for which the Bell output matrix is dense-eigendecomposed.
const BELL_DIM_LIMIT: usize = 4096;

/// Deterministic per-trial seed derivation (splitmix64 finalizer), so results
/// are independent of worker count and scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Summary of a batch of scalar observables, one per independent trial.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub trials: usize,
    pub master_seed: u64,
    pub per_trial: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub min: f64,
    pub max: f64,
}

impl TrialReport {
    pub fn from_observables(master_seed: u64, per_trial: Vec<f64>) -> Result<Self> {
        if per_trial.is_empty() {
            return Err(Error::Domain("trial report needs at least one trial".into()));
        }
        let trials = per_trial.len();
        let mean = per_trial.iter().sum::<f64>() / trials as f64;
        let var = per_trial.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / trials.max(2).saturating_sub(1) as f64;
        let min = per_trial.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = per_trial.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            trials,
            master_seed,
            per_trial,
            mean,
            stddev: var.sqrt(),
            min,
            max,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_index,observable\n");
        for (i, v) in self.per_trial.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

/// Run `trials` independent seeded trials in parallel, results in trial order.
pub fn run_trials<F>(trials: usize, master_seed: u64, f: F) -> Result<TrialReport>
where
    F: Fn(u64, usize) -> Result<f64> + Sync,
{
    let per_trial: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| f(derive_seed(master_seed, i as u64), i))
        .collect::<Result<Vec<f64>>>()?;
    TrialReport::from_observables(master_seed, per_trial)
}

fn embedding(u: &UnitaryMatrix, d: usize) -> DMatrix<Complex64> {
    u.matrix().columns(0, d).into_owned()
}

/// Output of the random channel: id_k ⊗ tr_n of W X W† with W = U P (the
/// first d columns of U).
pub fn apply_channel(
    params: &ChannelParams,
    u: &UnitaryMatrix,
    x: &DensityMatrix,
) -> Result<DensityMatrix> {
    if u.dim() != params.kn() {
        return Err(Error::Shape(format!(
            "apply_channel: unitary dim {} != k*n = {}",
            u.dim(),
            params.kn()
        )));
    }
    if x.dim() != params.d {
        return Err(Error::Shape(format!(
            "apply_channel: input dim {} != d = {}",
            x.dim(),
            params.d
        )));
    }
    let w = embedding(u, params.d);
    let big = &w * x.matrix() * w.adjoint();
    let reduced = partial_trace_right(&big, params.k, params.n)?;
    Ok(DensityMatrix::new_unchecked(HermitianMatrix::new(reduced)?))
}

/// Largest eigenvalue of the compressed observable W† (A ⊗ I_n) W; by duality
/// this equals sup_{X in D_d} tr(Φ(X) A).
pub fn compressed_norm(
    params: &ChannelParams,
    u: &UnitaryMatrix,
    a: &HermitianMatrix,
) -> Result<f64> {
    let (norm, _) = compressed_top_pair(params, u, a)?;
    Ok(norm)
}

fn compressed_top_pair(
    params: &ChannelParams,
    u: &UnitaryMatrix,
    a: &HermitianMatrix,
) -> Result<(f64, DVector<Complex64>)> {
    if a.dim() != params.k {
        return Err(Error::Shape(format!(
            "compressed_norm: observable dim {} != k = {}",
            a.dim(),
            params.k
        )));
    }
    if u.dim() != params.kn() {
        return Err(Error::Shape(format!(
            "compressed_norm: unitary dim {} != k*n = {}",
            u.dim(),
            params.kn()
        )));
    }
    let w = embedding(u, params.d);
    let big = kron(a.matrix(), &DMatrix::identity(params.n, params.n));
    let compressed = w.adjoint() * big * w;
    let (eigs, vecs) = hermitian_eigen(&HermitianMatrix::new(compressed)?);
    Ok((eigs[0], vecs.column(0).into_owned()))
}

/// Empirical distribution of compressed norms over Haar-random unitaries.
pub fn empirical_t_norm(
    params: &ChannelParams,
    a: &HermitianMatrix,
    trials: usize,
    master_seed: u64,
) -> Result<TrialReport> {
    let a = a.clone();
    run_trials(trials, master_seed, |seed, _| {
        let u = haar_unitary(params.kn(), seed)?;
        compressed_norm(params, &u, &a)
    })
}

/// Witness of the duality sup_X tr(Φ(X) A) <= ||W† (A ⊗ I_n) W|| over
/// sampled output states and test observables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualityReport {
    pub n_states: usize,
    pub n_tests: usize,
    pub seed: u64,
    /// max over (state, test) pairs of tr(X A) - compressed_norm(A); <= 0 up
    /// to rounding when the duality holds
    pub max_violation: f64,
    /// worst over tests of compressed_norm(A) - best sampled tr(X A);
    /// small when the sampled states come close to attaining the norm
    pub attainment_gap: f64,
    /// exact value at the top compressed eigenvector of the first test
    pub eigen_attained_gap: f64,
}

/// Sample `n_states` channel outputs of Haar-random pure inputs and
/// `n_tests` random density-test observables, then probe both directions of
/// the duality: no pair may beat the compressed norm, and the best state
/// should come close to attaining it.
pub fn duality_check(
    params: &ChannelParams,
    u: &UnitaryMatrix,
    n_states: usize,
    n_tests: usize,
    master_seed: u64,
) -> Result<DualityReport> {
    if n_states == 0 || n_tests == 0 {
        return Err(Error::Domain("duality_check: counts must be >= 1".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(master_seed);
    let mut outputs = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        use rand::Rng;
        let mut x = DVector::from_fn(params.d, |_, _| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            Complex64::new(re, im)
        });
        x /= Complex64::new(x.norm(), 0.0);
        outputs.push(apply_channel(params, u, &DensityMatrix::pure_state(&x)?)?);
    }
    let mut max_violation = f64::NEG_INFINITY;
    let mut attainment_gap = f64::NEG_INFINITY;
    let mut eigen_attained_gap = 0.0;
    for test_idx in 0..n_tests {
        let a = density_project(&random_hermitian(params.k, &mut rng));
        let (norm, top) = compressed_top_pair(params, u, a.as_hermitian())?;
        let mut best = f64::NEG_INFINITY;
        for x in &outputs {
            let pairing = (x.matrix() * a.matrix()).trace().re;
            best = best.max(pairing);
        }
        max_violation = max_violation.max(best - norm);
        attainment_gap = attainment_gap.max(norm - best);
        if test_idx == 0 {
            let witness = apply_channel(params, u, &DensityMatrix::pure_state(&top)?)?;
            eigen_attained_gap = norm - (witness.matrix() * a.matrix()).trace().re;
        }
    }
    Ok(DualityReport {
        n_states,
        n_tests,
        seed: master_seed,
        max_violation,
        attainment_gap,
        eigen_attained_gap,
    })
}

/// Spectrum of the Bell-state output (Φ ⊗ Φ̄)(|bell><bell|).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BellReport {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub lambda_max: f64,
    /// deterministic lower bound d / (k n)
    pub lower_bound: f64,
    pub spectrum: Vec<f64>,
}

/// Build the Bell output ρ = (1/d) S S† with S = Σ_{i<d} V_i ⊗ conj(V_i),
/// where V_i is column i of U reshaped to k x n (row-major over the outer
/// k-factor). ρ is k² x k².
pub fn bell_experiment(params: &ChannelParams, seed: u64) -> Result<BellReport> {
    let k = params.k;
    let n = params.n;
    let d = params.d;
    if k * k > BELL_DIM_LIMIT {
        return Err(Error::Refused(format!(
            "bell_experiment: k^2 = {} exceeds the dense-eigensolver limit {}",
            k * k,
            BELL_DIM_LIMIT
        )));
    }
    let u = haar_unitary(params.kn(), seed)?;
    let um = u.matrix();
    let mut s = DMatrix::<Complex64>::zeros(k * k, n * n);
    for i in 0..d {
        for a in 0..k {
            for b in 0..k {
                for p in 0..n {
                    for q in 0..n {
                        s[(a * k + b, p * n + q)] +=
                            um[(a * n + p, i)] * um[(b * n + q, i)].conj();
                    }
                }
            }
        }
    }
    let rho = (&s * s.adjoint()) / Complex64::new(d as f64, 0.0);
    let (spectrum, _) = hermitian_eigen(&HermitianMatrix::new(rho)?);
    Ok(BellReport {
        k,
        n,
        d,
        seed,
        lambda_max: spectrum[0],
        lower_bound: d as f64 / (k * n) as f64,
        spectrum,
    })
}

const EIG_FLOOR: f64 = 1e-300;

fn entropy_of_eigs(eigs: &[f64]) -> f64 {
    eigs.iter()
        .map(|&l| {
            let l = l.max(EIG_FLOOR);
            -l * l.ln()
        })
        .sum()
}

/// Output state Y Y† with Y = reshape(W x, k x n), plus entropy and the
/// Euclidean gradient g with dH = Re<g, dx>; g = 2 W† vec(M Y), M = -ln ρ - I.
pub fn moe_entropy_and_gradient(
    w: &DMatrix<Complex64>,
    x: &DVector<Complex64>,
    k: usize,
    n: usize,
) -> Result<(f64, DVector<Complex64>)> {
    if w.nrows() != k * n || w.ncols() != x.len() {
        return Err(Error::Shape(format!(
            "moe gradient: W is {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            k * n,
            x.len()
        )));
    }
    let y_vec = w * x;
    let y = DMatrix::from_fn(k, n, |a, s| y_vec[a * n + s]);
    let rho = &y * y.adjoint();
    let (eigs, vecs) = hermitian_eigen(&HermitianMatrix::new(rho)?);
    let entropy = entropy_of_eigs(&eigs);
    // M = -ln(rho) - I in the eigenbasis, with a floor against log(0)
    let mut m = DMatrix::<Complex64>::zeros(k, k);
    for (idx, &l) in eigs.iter().enumerate() {
        let coeff = Complex64::new(-l.max(EIG_FLOOR).ln() - 1.0, 0.0);
        let col = vecs.column(idx);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] += coeff * col[i] * col[j].conj();
            }
        }
    }
    let my = m * y;
    let my_vec = DVector::from_fn(k * n, |idx, _| my[(idx / n, idx % n)]);
    let grad = w.adjoint() * my_vec * Complex64::new(2.0, 0.0);
    Ok((entropy, grad))
}

/// Result of the multi-start projected-gradient minimum-entropy search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoeReport {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub restarts: usize,
    pub min_entropy: f64,
    pub per_restart: Vec<f64>,
    pub spectrum: Vec<f64>,
}

/// Minimize H(Φ(x x†)) over unit vectors by projected gradient descent with
/// Armijo backtracking, from `restarts` independent seeded starting points.
pub fn min_entropy_search(
    params: &ChannelParams,
    u: &UnitaryMatrix,
    restarts: usize,
    iters: usize,
    master_seed: u64,
) -> Result<MoeReport> {
    if u.dim() != params.kn() {
        return Err(Error::Shape(format!(
            "min_entropy_search: unitary dim {} != k*n = {}",
            u.dim(),
            params.kn()
        )));
    }
    if restarts == 0 {
        return Err(Error::Domain("min_entropy_search: restarts = 0".into()));
    }
    let w = embedding(u, params.d);
    let (k, n, d) = (params.k, params.n, params.d);

    let run_one = |seed: u64| -> Result<(f64, DVector<Complex64>)> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = DVector::from_fn(d, |_, _| {
            use rand::Rng;
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        x /= Complex64::new(x.norm(), 0.0);
        let (mut f, mut g) = moe_entropy_and_gradient(&w, &x, k, n)?;
        for _ in 0..iters {
            // tangent projection along the real sphere direction
            let radial = x.dotc(&g).re;
            let gt = &g - &x * Complex64::new(radial, 0.0);
            let gt_norm2 = gt.norm_squared();
            if gt_norm2.sqrt() < 1e-10 {
                break;
            }
            let mut step = 1.0;
            let mut advanced = false;
            for _ in 0..40 {
                let mut cand = &x - &gt * Complex64::new(step, 0.0);
                cand /= Complex64::new(cand.norm(), 0.0);
                let (fc, gc) = moe_entropy_and_gradient(&w, &cand, k, n)?;
                if fc <= f - 1e-4 * step * gt_norm2 {
                    x = cand;
                    f = fc;
                    g = gc;
                    advanced = true;
                    break;
                }
                step *= 0.5;
            }
            if !advanced {
                break;
            }
        }
        Ok((f, x))
    };

    let results: Vec<(f64, DVector<Complex64>)> = (0..restarts)
        .into_par_iter()
        .map(|i| run_one(derive_seed(master_seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let per_restart: Vec<f64> = results.iter().map(|(f, _)| *f).collect();
    let (best_idx, _) = per_restart
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .expect("restarts >= 1");
    let best_x = &results[best_idx].1;
    let out = apply_channel(params, u, &DensityMatrix::pure_state(best_x)?)?;
    let (spectrum, _) = hermitian_eigen(out.as_hermitian());
    Ok(MoeReport {
        k,
        n,
        d,
        seed: master_seed,
        restarts,
        min_entropy: per_restart[best_idx],
        per_restart,
        spectrum,
    })
}

/// Specification of the eps-net coverage experiment on D_k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetSpec {
    pub k: usize,
    pub eps: f64,
    /// signed grid u(m + 1/2), m in [-c, c-1]; the nonnegative variant
    /// (m in [0, c-1]) is kept for diagnostics only
    pub signed: bool,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetReport {
    pub k: usize,
    pub eps: f64,
    /// grid pitch u = sqrt(2) eps / (3 k^2)
    pub u: f64,
    pub signed: bool,
    pub samples: usize,
    /// worst Frobenius distance from a sampled density to its net point
    pub max_gap: f64,
    /// guaranteed covering radius eps / (3 k)
    pub gap_bound: f64,
    /// cardinality bound (1/u + 1)^(k^2), extended range
    pub net_size_bound: ExtendedCount,
    pub within_bound: bool,
}

fn snap(value: f64, u: f64, c: i64, signed: bool) -> f64 {
    let lo = if signed { -c } else { 0 };
    let hi = c - 1;
    let m = ((value / u - 0.5).round() as i64).clamp(lo, hi);
    u * (m as f64 + 0.5)
}

/// Round sampled densities to the shifted grid, project back onto D_k, and
/// measure the worst coverage gap; must stay within eps / (3k).
pub fn net_cover_check(spec: &NetSpec) -> Result<NetReport> {
    if spec.k == 0 || spec.k > 3 {
        return Err(Error::Refused(format!(
            "net_cover_check: k = {} outside [1, 3] (net size grows as (1/u)^(k^2))",
            spec.k
        )));
    }
    if !(0.0..=1.0).contains(&spec.eps) || spec.eps == 0.0 {
        return Err(Error::Domain(format!(
            "net_cover_check: eps = {} outside (0, 1]",
            spec.eps
        )));
    }
    if spec.samples == 0 {
        return Err(Error::Domain("net_cover_check: samples = 0".into()));
    }
    let k = spec.k;
    let u = std::f64::consts::SQRT_2 * spec.eps / (3.0 * (k * k) as f64);
    let c = (1.0 / u).ceil() as i64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
    let mut max_gap: f64 = 0.0;
    for _ in 0..spec.samples {
        let x = density_project(&random_hermitian(k, &mut rng));
        let mut rounded = DMatrix::<Complex64>::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let e = x.matrix()[(i, j)];
                let re = snap(e.re, u, c, spec.signed);
                let im = if i == j {
                    0.0
                } else {
                    snap(e.im, u, c, spec.signed)
                };
                rounded[(i, j)] = Complex64::new(re, im);
                if i != j {
                    rounded[(j, i)] = Complex64::new(re, -im);
                }
            }
        }
        let net_point = density_project(&HermitianMatrix::new(rounded)?);
        max_gap = max_gap.max(x.as_hermitian().frobenius_distance(net_point.as_hermitian()));
    }
    let net_size_bound = ExtendedCount::from_ln((k * k) as f64 * (1.0 / u + 1.0).ln());
    let gap_bound = spec.eps / (3.0 * k as f64);
    Ok(NetReport {
        k,
        eps: spec.eps,
        u,
        signed: spec.signed,
        samples: spec.samples,
        max_gap,
        gap_bound,
        net_size_bound,
        within_bound: max_gap <= gap_bound + 1e-12,
    })
}
