//! Dense complex Hermitian linear algebra: Haar sampling, eigendecomposition,
//! partial traces, and convex projections onto the density-matrix body.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Max tolerated Hermitian deviation on ingestion; inputs are symmetrized,
/// anything worse than this is rejected as malformed.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// A k x k complex self-adjoint matrix, symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Ingest a square complex matrix, enforcing hermiticity by (H + H†)/2.
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(Error::Shape(format!(
                "expected nonempty square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let adj = mat.adjoint();
        let dev = (&mat - &adj).norm();
        if dev > HERMITIAN_TOL {
            return Err(Error::Shape(format!(
                "matrix is not Hermitian: deviation {dev:.3e}"
            )));
        }
        Ok(Self {
            mat: (&mat + adj) * Complex64::new(0.5, 0.0),
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Shape("empty diagonal".into()));
        }
        let d = diag.len();
        Ok(Self {
            mat: DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    Complex64::new(diag[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (&self.mat - &other.mat).norm()
    }
}

/// Positive semidefinite, trace-1 element of D_k.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    inner: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let tr = h.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("trace {tr} is not 1 within 1e-10")));
        }
        let (eigs, _) = hermitian_eigen(&h);
        if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
            if min < -1e-10 {
                return Err(Error::Domain(format!(
                    "matrix is not PSD: min eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self { inner: h })
    }

    /// For outputs whose invariants hold by construction (channel outputs,
    /// convex projections); skips the eigenvalue check.
    pub fn new_unchecked(h: HermitianMatrix) -> Self {
        Self { inner: h }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::from_diagonal(diag)?)
    }

    /// The pure state |e_1><e_1| in dimension `dim`.
    pub fn basis_projector(dim: usize) -> Self {
        let mut diag = vec![0.0; dim];
        diag[0] = 1.0;
        Self::new_unchecked(HermitianMatrix::from_diagonal(&diag).expect("dim >= 1"))
    }

    /// The pure state |x><x| / |x|^2.
    pub fn pure_state(x: &DVector<Complex64>) -> Result<Self> {
        let nrm = x.norm();
        if nrm == 0.0 {
            return Err(Error::Domain("zero vector has no associated state".into()));
        }
        let y = x / Complex64::new(nrm, 0.0);
        let mat = DMatrix::from_fn(x.len(), x.len(), |i, j| y[i] * y[j].conj());
        Ok(Self::new_unchecked(HermitianMatrix { mat }))
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        self.inner.matrix()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.inner
    }
}

/// Element of the unitary group U(dim).
#[derive(Debug, Clone)]
pub struct UnitaryMatrix {
    mat: DMatrix<Complex64>,
}

impl UnitaryMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(Error::Shape("unitary must be square and nonempty".into()));
        }
        let dim = mat.nrows();
        let dev = (&mat * mat.adjoint() - DMatrix::<Complex64>::identity(dim, dim)).norm();
        if dev > 1e-8 {
            return Err(Error::Shape(format!("U U† deviates from I by {dev:.3e}")));
        }
        Ok(Self { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }
}

/// Geometry (k, n, t, d) of the random channel: output dim k, environment
/// dim n, ratio t, input dim d with d <= t k n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub k: usize,
    pub n: usize,
    pub t: f64,
    pub d: usize,
}

impl ChannelParams {
    pub fn new(k: usize, n: usize, t: f64, d: usize) -> Result<Self> {
        if k == 0 || n == 0 {
            return Err(Error::InvalidDimension("k and n must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&t) || t == 0.0 {
            return Err(Error::Domain(format!("t = {t} outside (0, 1]")));
        }
        let bound = t * (k * n) as f64;
        if d == 0 || d as f64 > bound + 1e-9 {
            return Err(Error::Domain(format!("d = {d} outside [1, t*k*n = {bound}]")));
        }
        Ok(Self { k, n, t, d })
    }

    /// d = round(t k n); errors when t k n is not integral.
    pub fn with_ratio(k: usize, n: usize, t: f64) -> Result<Self> {
        let exact = t * (k * n) as f64;
        let d = exact.round();
        if (exact - d).abs() > 1e-9 {
            return Err(Error::Domain(format!("t*k*n = {exact} is not an integer")));
        }
        Self::new(k, n, t, d as usize)
    }

    pub fn kn(&self) -> usize {
        self.k * self.n
    }
}

/// Haar-distributed unitary: complex Ginibre + QR with phase correction
/// (each column of Q multiplied by r_ii / |r_ii| to remove the QR gauge bias).
pub fn haar_unitary(dim: usize, seed: u64) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension("haar_unitary: dim = 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * inv_sqrt2, im * inv_sqrt2)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            rjj / Complex64::new(rjj.norm(), 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Ok(UnitaryMatrix { mat: q })
}

/// Eigenvalues sorted descending with the matching unitary eigenvector matrix;
/// V diag(λ) V† reconstructs the input.
pub fn hermitian_eigen(h: &HermitianMatrix) -> (Vec<f64>, DMatrix<Complex64>) {
    let se = nalgebra::SymmetricEigen::new(h.mat.clone());
    let dim = h.dim();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let eigs: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(dim, dim, |i, j| se.eigenvectors[(i, order[j])]);
    (eigs, vecs)
}

/// Trace out the right (inner, size n) tensor factor of a (k n) x (k n) matrix:
/// out[i][j] = Σ_s M[(i,s)][(j,s)] with row index (i-1)·n + s.
pub fn partial_trace_right(
    m: &DMatrix<Complex64>,
    k: usize,
    n: usize,
) -> Result<DMatrix<Complex64>> {
    if m.nrows() != k * n || m.ncols() != k * n {
        return Err(Error::Shape(format!(
            "partial_trace_right: expected {0}x{0}, got {1}x{2}",
            k * n,
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = DMatrix::<Complex64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for s in 0..n {
                acc += m[(i * n + s, j * n + s)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Kronecker product with the left factor as the outer (slow) index.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Euclidean projection onto the probability simplex {x >= 0, Σx = 1}.
pub fn simplex_project(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Shape("simplex_project: empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("simplex_project: non-finite entry".into()));
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    // largest j with u_j - (sum_{i<=j} u_i - 1)/j > 0 gives the threshold
    let mut cumsum = 0.0;
    let mut lambda = sorted[0] - 1.0;
    for (idx, &x) in sorted.iter().enumerate() {
        cumsum += x;
        let candidate = (cumsum - 1.0) / (idx + 1) as f64;
        if x - candidate > 0.0 {
            lambda = candidate;
        }
    }
    Ok(v.iter().map(|&x| (x - lambda).max(0.0)).collect())
}

/// Frobenius-metric projection onto D_k: eigendecompose, simplex-project the
/// spectrum, reassemble in the same eigenbasis. Idempotent and 1-Lipschitz.
pub fn density_project(h: &HermitianMatrix) -> DensityMatrix {
    let (eigs, vecs) = hermitian_eigen(h);
    let probs = simplex_project(&eigs).expect("nonempty spectrum");
    let dim = h.dim();
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for (idx, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let col = vecs.column(idx);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] += Complex64::new(p, 0.0) * col[i] * col[j].conj();
            }
        }
    }
    // reassembly of a simplex spectrum in a unitary basis is Hermitian
    let adj = out.adjoint();
    DensityMatrix::new_unchecked(HermitianMatrix {
        mat: (out + adj) * Complex64::new(0.5, 0.0),
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

/// Read a matrix from the JSON format { "dim": k, "entries": [[re, im], ...] }
/// (row-major).
pub fn read_matrix_json(path: &Path) -> Result<HermitianMatrix> {
    let text = std::fs::read_to_string(path)?;
    let file: MatrixFile = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if file.entries.len() != file.dim * file.dim {
        return Err(Error::Parse(format!(
            "{}: field 'entries' has {} values, expected dim^2 = {}",
            path.display(),
            file.entries.len(),
            file.dim * file.dim
        )));
    }
    let mat = DMatrix::from_fn(file.dim, file.dim, |i, j| {
        let [re, im] = file.entries[i * file.dim + j];
        Complex64::new(re, im)
    });
    HermitianMatrix::new(mat)
}

pub fn write_matrix_json(path: &Path, h: &HermitianMatrix) -> Result<()> {
    let dim = h.dim();
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        for j in 0..dim {
            let z = h.matrix()[(i, j)];
            entries.push([z.re, z.im]);
        }
    }
    let file = MatrixFile { dim, entries };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

/// GUE-like random Hermitian matrix, for tests and net/duality sampling.
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> HermitianMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let adj = g.adjoint();
    HermitianMatrix {
        mat: (g + adj) * Complex64::new(0.5, 0.0),
    }
}
