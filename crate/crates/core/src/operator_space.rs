//! Density-matrix-weighted geometry of operator (Liouville) space.
//!
//! Every operator is stored in the eigenbasis of ρ. In that basis the
//! superoperator `K(Q) = ½{ρ, Q}` acts entrywise, `K(E_ab) = w_ab E_ab` with
//! `w_ab = (ρ_a + ρ_b)/2`, and the inner product
//! `⟨A, B⟩_ρ = ½ Tr[ρ(A†B + BA†)]` reduces to `Σ_ab w_ab conj(A_ab) B_ab`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Smallest admissible eigenvalue of ρ unless overridden.
pub const DEFAULT_EPS_RANK: f64 = 1e-12;

/// Asymmetry `max|M − M†| / max|M|` above which an input is rejected
/// rather than silently symmetrized.
pub const HERMITIAN_RTOL: f64 = 1e-8;

const TRACE_TOL: f64 = 1e-12;
const DIAGONALITY_RTOL: f64 = 1e-10;
const ZERO_SEED_NORM: f64 = 1e-14;
const TRACE_PRESERVING_TOL: f64 = 1e-10;
const TRACELESS_TOL: f64 = 1e-10;

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Returns `(M + M†)/2`, or `NotHermitian` when the asymmetry is above
/// [`HERMITIAN_RTOL`] relative to the largest entry.
pub fn hermitize(raw: &CMatrix) -> Result<CMatrix> {
    if raw.nrows() != raw.ncols() {
        return Err(Error::NotSquare {
            rows: raw.nrows(),
            cols: raw.ncols(),
        });
    }
    let adjoint = raw.adjoint();
    let scale = max_abs(raw);
    let asymmetry = max_abs(&(raw - &adjoint));
    if scale > 0.0 && asymmetry > HERMITIAN_RTOL * scale {
        return Err(Error::NotHermitian {
            asymmetry: asymmetry / scale,
        });
    }
    Ok((raw + adjoint).scale(0.5))
}

/// Rotates the phase of each column so its largest-modulus entry (first one
/// on ties) is real and positive.
fn fix_phases(vectors: &mut CMatrix) {
    for mut col in vectors.column_iter_mut() {
        let max = col.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
        if max == 0.0 {
            continue;
        }
        let pivot = col
            .iter()
            .copied()
            .find(|z| z.norm() >= max * (1.0 - 1e-12))
            .expect("column has a maximal entry");
        let phase = pivot.conj() / pivot.norm();
        for z in col.iter_mut() {
            *z *= phase;
        }
    }
}

fn lexicographic(a: &[Complex64], b: &[Complex64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending
/// order, deterministic eigenvector phases and lexicographic tie-breaking
/// inside numerically degenerate clusters.
pub fn hermitian_eigen(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut vectors = eig.eigenvectors;
    fix_phases(&mut vectors);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let tie = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.eigenvalues[order[start]] - eig.eigenvalues[order[end]] <= tie {
            end += 1;
        }
        if end - start > 1 {
            order[start..end].sort_by(|&i, &j| {
                lexicographic(vectors.column(i).as_slice(), vectors.column(j).as_slice())
            });
        }
        start = end;
    }

    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let sorted = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| vectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, sorted)
}

/// A validated, full-rank density matrix with its cached eigendecomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
    eigenvalues: DVector<f64>,
    eigenvectors: CMatrix,
}

/// Validates `raw` as a full-rank density matrix.
///
/// The input is symmetrized first; residual asymmetry above
/// [`HERMITIAN_RTOL`] is an error.
pub fn validate_density_matrix(raw: &CMatrix, eps_rank: f64) -> Result<DensityMatrix> {
    let matrix = hermitize(raw)?;
    let trace = matrix.trace().re;
    if (trace - 1.0).abs() > TRACE_TOL {
        return Err(Error::NotUnitTrace { trace });
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(&matrix);
    let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -eps_rank {
        return Err(Error::NotPositive { min_eigenvalue: min });
    }
    if min < eps_rank {
        return Err(Error::RankDeficient {
            min_eigenvalue: min,
            eps_rank,
        });
    }

    let rotated = eigenvectors.adjoint() * &matrix * &eigenvectors;
    let scale = eigenvalues[0].abs();
    let off = rotated
        .iter()
        .enumerate()
        .filter(|(k, _)| k % matrix.nrows() != k / matrix.nrows())
        .fold(0.0_f64, |acc, (_, z)| acc.max(z.norm()));
    if off > DIAGONALITY_RTOL * scale {
        return Err(Error::InvalidParameter(format!(
            "eigendecomposition did not diagonalize ρ (off-diagonal {off:.3e})"
        )));
    }

    Ok(DensityMatrix {
        matrix,
        eigenvalues,
        eigenvectors,
    })
}

impl DensityMatrix {
    /// Validates with the default rank threshold.
    pub fn new(raw: &CMatrix) -> Result<Self> {
        validate_density_matrix(raw, DEFAULT_EPS_RANK)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Eigenvalues ρ_a, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    /// Unitary whose columns are the eigenvectors |a⟩.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    /// `U† M U`: a lab-frame operator expressed in the eigenbasis.
    pub fn to_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * m * &self.eigenvectors
    }

    /// `U X U†`: an eigenbasis operator expressed in the lab frame.
    pub fn from_eigenbasis(&self, x: &CMatrix) -> CMatrix {
        &self.eigenvectors * x * self.eigenvectors.adjoint()
    }
}

/// A Hermitian operator such as a Hamiltonian, in the lab frame.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    pub fn new(raw: &CMatrix) -> Result<Self> {
        Ok(Self {
            matrix: hermitize(raw)?,
        })
    }

    pub fn from_real(raw: &DMatrix<f64>) -> Result<Self> {
        Self::new(&raw.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// An operator viewed as a vector of the weighted space, stored in the
/// eigenbasis of ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct LiouvilleVector {
    matrix: CMatrix,
}

impl LiouvilleVector {
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    /// The canonical basis operator `E_ab = |a⟩⟨b|`.
    pub fn canonical(dim: usize, a: usize, b: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.matrix[(a, b)] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs(&(&self.matrix - self.matrix.adjoint())) <= tol * max_abs(&self.matrix).max(1.0)
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        Self {
            matrix: self.matrix.map(|z| z * alpha),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }
}

/// ρ together with the weights `w_ab = (ρ_a + ρ_b)/2` of its operator space.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpace {
    rho: DensityMatrix,
    weights: DMatrix<f64>,
}

/// Builds the weight table from the spectrum of ρ.
pub fn build_weighted_space(rho: DensityMatrix) -> WeightedSpace {
    let p = rho.eigenvalues();
    let n = p.len();
    let weights = DMatrix::from_fn(n, n, |a, b| 0.5 * (p[a] + p[b]));
    WeightedSpace { rho, weights }
}

impl WeightedSpace {
    pub fn new(rho: DensityMatrix) -> Self {
        build_weighted_space(rho)
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Smallest and largest eigenvalue of K, i.e. the range of the spectrum of ρ.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let p = self.rho.eigenvalues();
        (p[p.len() - 1], p[0])
    }

    fn check(&self, v: &LiouvilleVector) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: v.dim(),
            });
        }
        Ok(())
    }

    /// Expresses a lab-frame operator as a Liouville vector.
    pub fn to_liouville(&self, m: &CMatrix) -> Result<LiouvilleVector> {
        if m.nrows() != self.dim() || m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: m.nrows(),
            });
        }
        LiouvilleVector::from_matrix(self.rho.to_eigenbasis(m))
    }

    /// The lab-frame matrix of a Liouville vector.
    pub fn to_lab(&self, v: &LiouvilleVector) -> CMatrix {
        self.rho.from_eigenbasis(v.matrix())
    }

    /// `⟨A, B⟩_ρ = Σ_ab w_ab conj(A_ab) B_ab`.
    pub fn inner_product(&self, a: &LiouvilleVector, b: &LiouvilleVector) -> Result<Complex64> {
        self.check(a)?;
        self.check(b)?;
        Ok(weighted_dot(
            self.weights.as_slice(),
            a.matrix.as_slice(),
            b.matrix.as_slice(),
        ))
    }

    pub fn norm(&self, a: &LiouvilleVector) -> Result<f64> {
        Ok(self.inner_product(a, a)?.re.max(0.0).sqrt())
    }

    /// `(K Q)_ab = w_ab Q_ab`.
    pub fn apply_k(&self, q: &LiouvilleVector) -> Result<LiouvilleVector> {
        self.check(q)?;
        Ok(LiouvilleVector {
            matrix: q.matrix.zip_map(&self.weights, |z, w| z * w),
        })
    }

    /// `(K⁻¹ Q)_ab = Q_ab / w_ab`.
    pub fn apply_k_inverse(&self, q: &LiouvilleVector) -> Result<LiouvilleVector> {
        self.check(q)?;
        Ok(LiouvilleVector {
            matrix: q.matrix.zip_map(&self.weights, |z, w| z / w),
        })
    }

    /// Seed `O0 = i[ρ, H]` and its norm. Fails with `ZeroSeed` when ρ and H
    /// commute, in which case the QFI is exactly zero.
    pub fn unitary_seed(&self, h: &HermitianOperator) -> Result<(LiouvilleVector, f64)> {
        let seed = self.commutator_seed(h)?;
        let norm = self.norm(&seed)?;
        if norm < ZERO_SEED_NORM {
            return Err(Error::ZeroSeed { norm });
        }
        Ok((seed, norm))
    }

    /// `i[ρ, H]` in the eigenbasis, `i(ρ_a − ρ_b) H_ab`, without the
    /// zero-norm check.
    pub fn commutator_seed(&self, h: &HermitianOperator) -> Result<LiouvilleVector> {
        if h.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: h.dim(),
            });
        }
        let hb = self.rho.to_eigenbasis(h.matrix());
        let p = self.rho.eigenvalues();
        let n = self.dim();
        let matrix = CMatrix::from_fn(n, n, |a, b| {
            Complex64::new(0.0, p[a] - p[b]) * hb[(a, b)]
        });
        Ok(LiouvilleVector { matrix })
    }
}

/// `Σ_k w_k conj(a_k) b_k` over matching flat layouts.
pub(crate) fn weighted_dot(w: &[f64], a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for ((w, x), y) in w.iter().zip(a).zip(b) {
        acc += x.conj() * y * *w;
    }
    acc
}

/// Seed produced by a parameter-dependent channel.
#[derive(Debug, Clone)]
pub struct KrausSeed {
    /// Weighted space of the output state ρ_θ.
    pub space: WeightedSpace,
    /// `dρ_θ/dθ` in the eigenbasis of ρ_θ.
    pub seed: LiouvilleVector,
    pub norm: f64,
}

impl KrausSeed {
    pub fn rho_theta(&self) -> &DensityMatrix {
        self.space.rho()
    }
}

/// Builds ρ_θ = Σ K ρ0 K† and its derivative Σ (K′ρ0K† + Kρ0K′†) from
/// Kraus operators and their θ-derivatives.
pub fn kraus_seed(
    rho0: &DensityMatrix,
    kraus: &[CMatrix],
    dkraus: &[CMatrix],
) -> Result<KrausSeed> {
    kraus_seed_with_eps(rho0, kraus, dkraus, DEFAULT_EPS_RANK)
}

pub fn kraus_seed_with_eps(
    rho0: &DensityMatrix,
    kraus: &[CMatrix],
    dkraus: &[CMatrix],
    eps_rank: f64,
) -> Result<KrausSeed> {
    if kraus.len() != dkraus.len() {
        return Err(Error::KrausLengthMismatch {
            kraus: kraus.len(),
            derivatives: dkraus.len(),
        });
    }
    if kraus.is_empty() {
        return Err(Error::InvalidParameter("empty Kraus list".into()));
    }
    let n = rho0.dim();
    for k in kraus.iter().chain(dkraus) {
        if k.nrows() != n || k.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: k.nrows(),
            });
        }
    }

    let completeness = kraus
        .iter()
        .fold(CMatrix::zeros(n, n), |acc, k| acc + k.adjoint() * k);
    let deviation = max_abs(&(completeness - CMatrix::identity(n, n)));
    if deviation > TRACE_PRESERVING_TOL {
        return Err(Error::NotTracePreserving { deviation });
    }

    let r0 = rho0.matrix();
    let rho_theta = kraus
        .iter()
        .fold(CMatrix::zeros(n, n), |acc, k| acc + k * r0 * k.adjoint());
    let derivative = kraus.iter().zip(dkraus).fold(CMatrix::zeros(n, n), |acc, (k, dk)| {
        acc + dk * r0 * k.adjoint() + k * r0 * dk.adjoint()
    });
    let derivative = hermitize(&derivative)?;
    let trace = derivative.trace().norm();
    if trace > TRACELESS_TOL {
        return Err(Error::NonTracelessDerivative { trace });
    }

    let space = WeightedSpace::new(validate_density_matrix(&rho_theta, eps_rank)?);
    let seed = space.to_liouville(&derivative)?;
    let norm = space.norm(&seed)?;
    if norm < ZERO_SEED_NORM {
        return Err(Error::ZeroSeed { norm });
    }
    Ok(KrausSeed { space, seed, norm })
}
