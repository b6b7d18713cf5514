//! Hermitian Lanczos recursion for `K` in the weighted operator space.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator_space::{weighted_dot, CMatrix, LiouvilleVector, WeightedSpace};

const ZERO_SEED_NORM: f64 = 1e-14;
const PIVOT_RTOL: f64 = 1e-14;
const ORTHOGONALITY_LIMIT: f64 = 1e-8;
/// Relative tolerance for treating two weights `w_ab` as the same eigenvalue of K.
pub const EIGENSPACE_RTOL: f64 = 1e-12;

/// Real symmetric tridiagonal matrix with diagonal `a_0..a_{n-1}` and
/// off-diagonal `b_1..b_{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalMatrix {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TridiagonalMatrix {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidParameter("empty tridiagonal matrix".into()));
        }
        if b.len() + 1 != a.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len() - 1,
                actual: b.len(),
            });
        }
        if let Some(bad) = b.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "off-diagonal b_{} = {} is not positive",
                bad + 1,
                b[bad]
            )));
        }
        Ok(Self { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.a
    }

    /// `b_1..b_{n-1}`; entry `k` couples levels `k` and `k + 1`.
    pub fn off_diagonal(&self) -> &[f64] {
        &self.b
    }

    /// Leading `m × m` block.
    pub fn leading(&self, m: usize) -> TridiagonalMatrix {
        let m = m.clamp(1, self.len());
        TridiagonalMatrix {
            a: self.a[..m].to_vec(),
            b: self.b[..m - 1].to_vec(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.a[i]
            } else if i + 1 == j {
                self.b[i]
            } else if j + 1 == i {
                self.b[j]
            } else {
                0.0
            }
        })
    }

    fn max_abs(&self) -> f64 {
        self.a
            .iter()
            .chain(&self.b)
            .fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.to_dense());
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| eig.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        (values, vectors)
    }
}

/// Solves `T z = e_0` by LU factorization without pivoting.
pub fn tridiag_solve_e0(t: &TridiagonalMatrix) -> Result<Vec<f64>> {
    let n = t.len();
    let threshold = PIVOT_RTOL * t.max_abs();
    let mut pivots = Vec::<f64>::with_capacity(n);
    let mut rhs = Vec::<f64>::with_capacity(n);
    for i in 0..n {
        let (u, y) = if i == 0 {
            (t.a[0], 1.0)
        } else {
            let l = t.b[i - 1] / pivots[i - 1];
            (t.a[i] - l * t.b[i - 1], -l * rhs[i - 1])
        };
        if !(u.abs() > threshold) {
            return Err(Error::SingularTridiagonal { order: i + 1 });
        }
        pivots.push(u);
        rhs.push(y);
    }
    let mut z = vec![0.0; n];
    z[n - 1] = rhs[n - 1] / pivots[n - 1];
    for i in (0..n - 1).rev() {
        z[i] = (rhs[i] - t.b[i] * z[i + 1]) / pivots[i];
    }
    Ok(z)
}

/// Truncated QFI sequence `F^(m) = |O0|² |T_m⁻¹ e_0|²` for `m = 1..n`.
pub fn fn_series(t: &TridiagonalMatrix, seed_norm: f64) -> Result<Vec<f64>> {
    let scale = seed_norm * seed_norm;
    (1..=t.len())
        .map(|m| {
            let z = tridiag_solve_e0(&t.leading(m)).map_err(|_| Error::SingularTridiagonal { order: m })?;
            Ok(scale * z.iter().map(|x| x * x).sum::<f64>())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reorth {
    Full,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosOptions {
    pub store_basis: bool,
    /// Breakdown when `b_{k+1} < breakdown_rtol · max(a_0, b_1..b_k)`.
    pub breakdown_rtol: f64,
    pub reorth: Reorth,
    /// Project every new vector onto the seed's component inside each
    /// eigenspace of K. In exact arithmetic this is the identity on the
    /// Krylov space; in floating point it stops round-off from seeding the
    /// degenerate partner directions (e.g. `i·(E_ab − E_ba)`-type
    /// combinations) that otherwise duplicate every eigenvalue.
    pub eigenspace_lock: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            store_basis: false,
            breakdown_rtol: 1e-10,
            reorth: Reorth::Full,
            eigenspace_lock: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovResult {
    pub tridiag: TridiagonalMatrix,
    pub basis: Option<Vec<LiouvilleVector>>,
    /// Breakdown index, present iff the recursion exhausted the Krylov space.
    pub d0: Option<usize>,
    pub seed_norm: f64,
    /// `max |⟨v_i, v_j⟩_ρ − δ_ij|` over the generated vectors.
    pub orthogonality_defect: f64,
}

impl KrylovResult {
    pub fn levels(&self) -> usize {
        self.tridiag.len()
    }

    pub fn is_complete(&self) -> bool {
        self.d0.is_some()
    }
}

/// Groups flat indices by equal weight, keeping only groups the seed touches.
fn seed_eigenspaces(weights: &[f64], seed: &[Complex64]) -> Vec<Vec<usize>> {
    let wmax = weights.iter().fold(0.0_f64, |acc, &w| acc.max(w));
    let tol = EIGENSPACE_RTOL * wmax;
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| weights[i].total_cmp(&weights[j]).then(i.cmp(&j)));

    let mut groups = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for idx in order {
        if let Some(&first) = current.first() {
            if weights[idx] - weights[first] > tol {
                groups.push(std::mem::take(&mut current));
            }
        }
        current.push(idx);
    }
    groups.push(current);
    groups.retain(|g| g.iter().any(|&i| seed[i] != Complex64::new(0.0, 0.0)));
    groups
}

fn lock_to_seed(y: &mut [Complex64], seed: &[Complex64], weights: &[f64], groups: &[Vec<usize>]) {
    let mut locked = vec![Complex64::new(0.0, 0.0); y.len()];
    for g in groups {
        let mut num = 0.0;
        let mut den = 0.0;
        for &i in g {
            num += weights[i] * (seed[i].conj() * y[i]).re;
            den += weights[i] * seed[i].norm_sqr();
        }
        let c = num / den;
        for &i in g {
            locked[i] = seed[i] * c;
        }
    }
    y.copy_from_slice(&locked);
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Runs Lanczos for K from `seed` for at most `max_n` levels.
pub fn run_lanczos(
    ctx: &WeightedSpace,
    seed: &LiouvilleVector,
    max_n: usize,
    opts: LanczosOptions,
) -> Result<KrylovResult> {
    if max_n == 0 {
        return Err(Error::InvalidParameter("max_n must be at least 1".into()));
    }
    let seed_norm = ctx.norm(seed)?;
    if !(seed_norm > ZERO_SEED_NORM) {
        return Err(Error::ZeroSeed { norm: seed_norm });
    }

    let n = ctx.dim();
    let w = ctx.weights().as_slice();
    let dot = |x: &[Complex64], y: &[Complex64]| weighted_dot(w, x, y);
    let v0: Vec<Complex64> = seed.matrix().as_slice().iter().map(|z| z / seed_norm).collect();
    let groups = if opts.eigenspace_lock {
        seed_eigenspaces(w, &v0)
    } else {
        Vec::new()
    };

    let mut basis: Vec<Vec<Complex64>> = vec![v0.clone()];
    let mut a = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    let mut d0 = None;
    let mut defect = (dot(&v0, &v0).re - 1.0).abs();

    for k in 0..max_n {
        let vk = &basis[k];
        let mut u: Vec<Complex64> = vk.iter().zip(w).map(|(z, wi)| z * wi).collect();
        let ak = dot(vk, &u).re;
        a.push(ak);
        axpy(Complex64::new(-ak, 0.0), vk, &mut u);
        if k > 0 {
            axpy(Complex64::new(-b[k - 1], 0.0), &basis[k - 1], &mut u);
        }
        if opts.reorth == Reorth::Full {
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &u);
                    axpy(-c, v, &mut u);
                }
            }
        }
        if opts.eigenspace_lock {
            lock_to_seed(&mut u, &v0, w, &groups);
        }

        let beta = dot(&u, &u).re.max(0.0).sqrt();
        let scale = b.iter().fold(a[0].abs(), |acc, &x| acc.max(x));
        if beta < opts.breakdown_rtol * scale {
            d0 = Some(k + 1);
            break;
        }
        if k + 1 == max_n {
            break;
        }
        let next: Vec<Complex64> = u.iter().map(|z| z / beta).collect();
        for v in &basis {
            defect = defect.max(dot(v, &next).norm());
        }
        defect = defect.max((dot(&next, &next).re - 1.0).abs());
        b.push(beta);
        basis.push(next);
    }

    if opts.reorth == Reorth::Full && defect > ORTHOGONALITY_LIMIT {
        return Err(Error::NonConvergedOrthogonality { defect });
    }

    debug_assert_eq!(basis.len(), a.len());
    let basis = opts.store_basis.then(|| {
        basis
            .into_iter()
            .map(|v| {
                LiouvilleVector::from_matrix(CMatrix::from_vec(n, n, v))
                    .expect("square by construction")
            })
            .collect()
    });

    Ok(KrylovResult {
        tridiag: TridiagonalMatrix::new(a, b)?,
        basis,
        d0,
        seed_norm,
        orthogonality_defect: defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator_space::{DensityMatrix, HermitianOperator};
    use crate::testutil::{pauli_x, qubit_space};
    use approx::assert_relative_eq;

    #[test]
    fn qubit_breaks_down_immediately() {
        let w = qubit_space();
        let (seed, _) = w.unitary_seed(&HermitianOperator::new(&pauli_x()).unwrap()).unwrap();
        let res = run_lanczos(&w, &seed, 10, LanczosOptions::default()).unwrap();
        assert_eq!(res.d0, Some(1));
        assert_eq!(res.tridiag.diagonal(), &[0.5]);
        assert!(res.tridiag.off_diagonal().is_empty());
        let f = fn_series(&res.tridiag, res.seed_norm).unwrap();
        assert_relative_eq!(f[0], 1.0, max_relative = 1e-14);
    }

    #[test]
    fn eigenoperator_seed_is_invariant() {
        let rho = DensityMatrix::new(&CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.3, 0.0),
            Complex64::new(0.1, 0.0),
        ])))
        .unwrap();
        let w = WeightedSpace::new(rho);
        let e = LiouvilleVector::canonical(3, 0, 2);
        let res = run_lanczos(&w, &e, 5, LanczosOptions::default()).unwrap();
        assert_eq!(res.d0, Some(1));
        assert_relative_eq!(res.tridiag.diagonal()[0], 0.35, max_relative = 1e-14);
    }

    #[test]
    fn zero_seed_rejected() {
        let w = qubit_space();
        let zero = LiouvilleVector::zeros(2);
        assert!(matches!(
            run_lanczos(&w, &zero, 3, LanczosOptions::default()),
            Err(Error::ZeroSeed { .. })
        ));
    }

    #[test]
    fn scalar_and_two_by_two_solves() {
        let t = TridiagonalMatrix::new(vec![0.5], vec![]).unwrap();
        assert_eq!(tridiag_solve_e0(&t).unwrap(), vec![2.0]);

        let t = TridiagonalMatrix::new(vec![2.0, 2.0], vec![1.0]).unwrap();
        let z = tridiag_solve_e0(&t).unwrap();
        assert_relative_eq!(z[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(z[1], -1.0 / 3.0, max_relative = 1e-15);

        let f = fn_series(&TridiagonalMatrix::new(vec![0.4], vec![]).unwrap(), 0.2).unwrap();
        assert_relative_eq!(f[0], 0.04 / 0.16, max_relative = 1e-15);
    }

    #[test]
    fn singular_pivot_reported() {
        let t = TridiagonalMatrix::new(vec![1.0, 1.0, 3.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(tridiag_solve_e0(&t), Err(Error::SingularTridiagonal { order: 2 }));
        assert_eq!(fn_series(&t, 1.0), Err(Error::SingularTridiagonal { order: 2 }));
    }

    #[test]
    fn tridiagonal_shape_checked() {
        assert!(TridiagonalMatrix::new(vec![1.0, 2.0], vec![]).is_err());
        assert!(TridiagonalMatrix::new(vec![1.0, 2.0], vec![0.0]).is_err());
        assert!(TridiagonalMatrix::new(vec![], vec![]).is_err());
    }
}
