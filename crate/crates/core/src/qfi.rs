//! Exact and Krylov-truncated quantum Fisher information.
//!
//! Two truncated sequences are tracked. `f_series` is the Galerkin value
//! `|O0|² e_0ᵀ T_n⁻² e_0`, which equals the n-point Gauss quadrature of
//! `λ⁻²` and is a monotone lower bound. `f_projected` is the squared norm of
//! the orthogonal projection of the SLD onto the first n Krylov vectors,
//! `Σ_{k<n} ℓ_k²`. Both reach the exact value at the breakdown index, but
//! only the projected sequence satisfies the tail identity
//! `1 − F^(n)/F = Σ_{k≥n} p_k` and hence the `D/n` bound.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{fn_series, run_lanczos, tridiag_solve_e0, KrylovResult, LanczosOptions};
use crate::operator_space::{HermitianOperator, LiouvilleVector, WeightedSpace};

const TAIL_IDENTITY_TOL: f64 = 1e-9;
const PARSEVAL_RTOL: f64 = 1e-9;

/// What `Σ ℓ_k²` measures for a given seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKind {
    /// The seed is `dρ_θ/dθ` (unitary or channel encoding), so the value is a QFI.
    Qfi,
    /// An arbitrary operator seed: `⟨O0, K⁻² O0⟩_ρ`-type resolvent moment.
    ResolventMoment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiReport {
    pub quantity: QuantityKind,
    pub f_exact: f64,
    pub seed_norm: f64,
    pub d0: Option<usize>,
    /// Whether the Krylov space was exhausted; otherwise `p` covers only
    /// the computed levels and `tail_mass` holds the rest.
    pub complete: bool,
    pub f_series: Vec<f64>,
    pub f_projected: Vec<f64>,
    pub ell: Vec<f64>,
    pub p: Vec<f64>,
    pub tail_mass: f64,
    /// Mean Krylov depth `D = Σ k p_k` (a lower bound when incomplete).
    pub depth: f64,
    /// `1 − F_proj^(n)/F` for `n = 1..levels`.
    pub rel_error: Vec<f64>,
    /// `1 − F_galerkin^(n)/F` for `n = 1..levels`.
    pub galerkin_rel_error: Vec<f64>,
    /// `D/n − rel_error(n)`.
    pub bound_margin: Vec<f64>,
    /// `D/n − galerkin_rel_error(n)`; may be negative.
    pub galerkin_bound_margin: Vec<f64>,
    /// Largest observed `|rel_error(n) − Σ_{k≥n} p_k|`.
    pub tail_deviation: f64,
}

impl QfiReport {
    pub fn levels(&self) -> usize {
        self.rel_error.len()
    }
}

/// Closed-form QFI `Σ_ab (ρ_a − ρ_b)² |H_ab|² / w_ab`.
pub fn exact_qfi(ctx: &WeightedSpace, h: &HermitianOperator) -> Result<f64> {
    let seed = ctx.commutator_seed(h)?;
    exact_resolvent_moment(ctx, &seed)
}

/// `⟨K⁻¹O, K⁻¹O⟩_ρ = Σ_ab |O_ab|² / w_ab`.
pub fn exact_resolvent_moment(ctx: &WeightedSpace, seed: &LiouvilleVector) -> Result<f64> {
    if seed.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.dim(),
            actual: seed.dim(),
        });
    }
    Ok(seed
        .matrix()
        .iter()
        .zip(ctx.weights().iter())
        .map(|(z, w)| z.norm_sqr() / w)
        .sum())
}

/// The SLD `L_ab = i(ρ_a − ρ_b) H_ab / w_ab`.
pub fn exact_sld(ctx: &WeightedSpace, h: &HermitianOperator) -> Result<LiouvilleVector> {
    ctx.apply_k_inverse(&ctx.commutator_seed(h)?)
}

/// `ℓ_k = |O0| (T_{d0}⁻¹ e_0)_k`, exact once the recursion broke down.
pub fn krylov_coefficients(kres: &KrylovResult) -> Result<Vec<f64>> {
    if kres.d0.is_none() {
        return Err(Error::IncompleteKrylov);
    }
    Ok(tridiag_solve_e0(&kres.tridiag)?
        .into_iter()
        .map(|z| kres.seed_norm * z)
        .collect())
}

/// `ℓ_k = ⟨v_k, target⟩_ρ` from a stored basis; valid before breakdown.
pub fn projected_coefficients(
    ctx: &WeightedSpace,
    kres: &KrylovResult,
    target: &LiouvilleVector,
) -> Result<Vec<f64>> {
    let basis = kres
        .basis
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("projection needs a stored Krylov basis".into()))?;
    basis
        .iter()
        .map(|v| ctx.inner_product(v, target).map(|z| z.re))
        .collect()
}

/// `Σ_k ℓ_k v_k` from a stored basis.
pub fn krylov_sld(kres: &KrylovResult, ell: &[f64]) -> Result<LiouvilleVector> {
    let basis = kres
        .basis
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("reconstruction needs a stored Krylov basis".into()))?;
    let dim = basis[0].dim();
    let matrix = basis
        .iter()
        .zip(ell)
        .fold(crate::operator_space::CMatrix::zeros(dim, dim), |acc, (v, &l)| {
            acc + v.matrix().map(|z| z * Complex64::new(l, 0.0))
        });
    LiouvilleVector::from_matrix(matrix)
}

/// `p_k = ℓ_k² / Σ ℓ²` and `D = Σ k p_k`.
pub fn krylov_distribution(ell: &[f64]) -> Result<(Vec<f64>, f64)> {
    let total: f64 = ell.iter().map(|x| x * x).sum();
    if !(total > 0.0) {
        return Err(Error::ZeroVector);
    }
    let p: Vec<f64> = ell.iter().map(|x| x * x / total).collect();
    let depth = p.iter().enumerate().map(|(k, pk)| k as f64 * pk).sum();
    Ok((p, depth))
}

/// Assembles the error curves and checks the tail identity.
///
/// With `complete`, `ell` must span the whole Krylov space and
/// `Σ ℓ² = f_exact` is enforced. Otherwise the missing weight is carried in
/// `tail_mass` and the depth becomes a lower bound that still satisfies the
/// `D/n` bound.
pub fn error_report(f_series: &[f64], ell: &[f64], f_exact: f64, complete: bool) -> Result<QfiReport> {
    if !(f_exact > 0.0) {
        return Err(Error::NonPositiveQfi { value: f_exact });
    }
    if ell.is_empty() || f_series.len() != ell.len() {
        return Err(Error::DimensionMismatch {
            expected: f_series.len(),
            actual: ell.len(),
        });
    }
    let levels = ell.len();

    let (p, depth, tail_mass) = if complete {
        let total: f64 = ell.iter().map(|x| x * x).sum();
        if (total - f_exact).abs() > PARSEVAL_RTOL * f_exact {
            return Err(Error::IdentityViolation {
                n: 0,
                deviation: (total - f_exact).abs() / f_exact,
            });
        }
        let (p, depth) = krylov_distribution(ell)?;
        (p, depth, 0.0)
    } else {
        let p: Vec<f64> = ell.iter().map(|x| x * x / f_exact).collect();
        let tail_mass = 1.0 - p.iter().sum::<f64>();
        let depth = p.iter().enumerate().map(|(k, pk)| k as f64 * pk).sum::<f64>()
            + levels as f64 * tail_mass.max(0.0);
        (p, depth, tail_mass)
    };

    let f_projected: Vec<f64> = ell
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x * x;
            Some(*acc)
        })
        .collect();

    // tails[n] = Σ_{k≥n} p_k + tail_mass, accumulated from the back.
    let mut tails = vec![tail_mass; levels + 1];
    for k in (0..levels).rev() {
        tails[k] = tails[k + 1] + p[k];
    }

    let mut rel_error = Vec::with_capacity(levels);
    let mut tail_deviation = 0.0_f64;
    for n in 1..=levels {
        let rel = 1.0 - f_projected[n - 1] / f_exact;
        let deviation = (rel - tails[n]).abs();
        if deviation > TAIL_IDENTITY_TOL {
            return Err(Error::IdentityViolation { n, deviation });
        }
        tail_deviation = tail_deviation.max(deviation);
        rel_error.push(rel);
    }
    let galerkin_rel_error: Vec<f64> = f_series.iter().map(|f| 1.0 - f / f_exact).collect();
    let margin = |errors: &[f64]| -> Vec<f64> {
        errors
            .iter()
            .enumerate()
            .map(|(i, e)| depth / (i + 1) as f64 - e)
            .collect()
    };

    Ok(QfiReport {
        quantity: QuantityKind::Qfi,
        f_exact,
        seed_norm: f64::NAN,
        d0: None,
        complete,
        f_series: f_series.to_vec(),
        f_projected,
        ell: ell.to_vec(),
        p,
        tail_mass,
        depth,
        bound_margin: margin(&rel_error),
        galerkin_bound_margin: margin(&galerkin_rel_error),
        rel_error,
        galerkin_rel_error,
        tail_deviation,
    })
}

/// Krylov run together with its error report.
#[derive(Debug, Clone)]
pub struct QfiAnalysis {
    pub krylov: KrylovResult,
    pub report: QfiReport,
}

/// Full pipeline for the unitary encoding `O0 = i[ρ, H]`.
pub fn analyze_unitary(
    ctx: &WeightedSpace,
    h: &HermitianOperator,
    max_n: usize,
    opts: LanczosOptions,
) -> Result<QfiAnalysis> {
    let (seed, _) = ctx.unitary_seed(h)?;
    analyze_seed(ctx, &seed, QuantityKind::Qfi, max_n, opts)
}

/// Full pipeline for an arbitrary seed operator.
///
/// When the recursion stops at `max_n` before breakdown, the coefficients
/// are obtained by projecting the exact `K⁻¹ O0` onto a stored basis.
pub fn analyze_seed(
    ctx: &WeightedSpace,
    seed: &LiouvilleVector,
    quantity: QuantityKind,
    max_n: usize,
    opts: LanczosOptions,
) -> Result<QfiAnalysis> {
    let f_exact = exact_resolvent_moment(ctx, seed)?;
    let mut krylov = run_lanczos(ctx, seed, max_n, opts)?;
    let f_series = fn_series(&krylov.tridiag, krylov.seed_norm)?;
    let ell = if krylov.is_complete() {
        krylov_coefficients(&krylov)?
    } else {
        if krylov.basis.is_none() {
            krylov = run_lanczos(ctx, seed, max_n, LanczosOptions { store_basis: true, ..opts })?;
        }
        let target = ctx.apply_k_inverse(seed)?;
        projected_coefficients(ctx, &krylov, &target)?
    };
    let mut report = error_report(&f_series, &ell, f_exact, krylov.is_complete())?;
    report.quantity = quantity;
    report.seed_norm = krylov.seed_norm;
    report.d0 = krylov.d0;
    Ok(QfiAnalysis { krylov, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{pauli_x, pauli_z, qubit_space};
    use approx::assert_relative_eq;

    #[test]
    fn qubit_closed_form() {
        let w = qubit_space();
        let h = HermitianOperator::new(&pauli_x()).unwrap();
        assert_relative_eq!(exact_qfi(&w, &h).unwrap(), 1.0, max_relative = 1e-15);

        let l = exact_sld(&w, &h).unwrap();
        assert_eq!(l.matrix()[(0, 1)], Complex64::new(0.0, 1.0));
        assert_eq!(l.matrix()[(1, 0)], Complex64::new(0.0, -1.0));
        assert_eq!(l.matrix()[(0, 0)], Complex64::new(0.0, 0.0));
        assert_relative_eq!(w.norm(&l).unwrap().powi(2), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn commuting_hamiltonian_has_zero_qfi() {
        let w = qubit_space();
        let h = HermitianOperator::new(&pauli_z()).unwrap();
        assert_eq!(exact_qfi(&w, &h).unwrap(), 0.0);
        let l = exact_sld(&w, &h).unwrap();
        assert!(l.matrix().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn qubit_coefficients() {
        let w = qubit_space();
        let h = HermitianOperator::new(&pauli_x()).unwrap();
        let an = analyze_unitary(&w, &h, 8, LanczosOptions::default()).unwrap();
        assert_eq!(an.report.d0, Some(1));
        assert_relative_eq!(an.report.ell[0], 1.0, max_relative = 1e-14);
        assert_eq!(an.report.rel_error.len(), 1);
        assert!(an.report.rel_error[0].abs() < 1e-15);
        assert_eq!(an.report.depth, 0.0);
        assert!(an.report.bound_margin[0].abs() < 1e-15);
    }

    #[test]
    fn incomplete_runs_need_projection() {
        let kres = KrylovResult {
            tridiag: crate::lanczos::TridiagonalMatrix::new(vec![0.5, 0.5], vec![0.1]).unwrap(),
            basis: None,
            d0: None,
            seed_norm: 1.0,
            orthogonality_defect: 0.0,
        };
        assert_eq!(krylov_coefficients(&kres), Err(Error::IncompleteKrylov));
    }

    #[test]
    fn distribution_examples() {
        let (p, d) = krylov_distribution(&[1.0]).unwrap();
        assert_eq!((p, d), (vec![1.0], 0.0));
        let (p, d) = krylov_distribution(&[1.0, 1.0]).unwrap();
        assert_eq!((p, d), (vec![0.5, 0.5], 0.5));
        let (p, d) = krylov_distribution(&[0.0, 0.0, 3.0]).unwrap();
        assert_eq!((p, d), (vec![0.0, 0.0, 1.0], 2.0));
        assert_eq!(krylov_distribution(&[0.0, 0.0]), Err(Error::ZeroVector));
    }

    #[test]
    fn saturated_bound_example() {
        let r = error_report(&[1.0, 2.0], &[1.0, 1.0], 2.0, true).unwrap();
        assert_eq!(r.rel_error, vec![0.5, 0.0]);
        assert_eq!(r.depth, 0.5);
        assert_eq!(r.bound_margin[0], 0.0);
    }

    #[test]
    fn single_level_report() {
        let r = error_report(&[1.0], &[1.0], 1.0, true).unwrap();
        assert_eq!(r.rel_error, vec![0.0]);
        assert_eq!(r.bound_margin, vec![0.0]);
    }

    #[test]
    fn report_rejects_bad_inputs() {
        assert!(matches!(
            error_report(&[1.0], &[1.0], 0.0, true),
            Err(Error::NonPositiveQfi { .. })
        ));
        // Σℓ² = 1 disagrees with F = 2.
        assert!(matches!(
            error_report(&[1.0], &[1.0], 2.0, true),
            Err(Error::IdentityViolation { .. })
        ));
    }

    #[test]
    fn incomplete_report_carries_tail_mass() {
        let r = error_report(&[0.5, 0.8], &[0.8, 0.4], 1.0, false).unwrap();
        assert_relative_eq!(r.tail_mass, 1.0 - 0.64 - 0.16, max_relative = 1e-12);
        assert_relative_eq!(r.rel_error[1], r.tail_mass, max_relative = 1e-12);
        assert!(r.bound_margin.iter().all(|&m| m >= -1e-12));
    }
}
