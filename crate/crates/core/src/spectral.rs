//! Spectral measure of K relative to the seed, its moments and the
//! orthogonal-polynomial machinery built on it.
//!
//! For a normalized seed `v0`, the measure has an atom at every distinct
//! weight `w_ab` carrying `Σ w_ab |v0_ab|²` (the squared overlap with the
//! normalized eigenoperator `E_ab/√w_ab`). With this convention `μ_0 = 1`
//! and `μ_1 = a_0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lanczos::TridiagonalMatrix;
use crate::operator_space::{LiouvilleVector, WeightedSpace};
use crate::synthetic::{linear_fit, LinearFit};

/// Relative tolerance under which atoms are merged.
pub const MERGE_RTOL: f64 = 1e-12;
/// Atoms lighter than this fraction of the total are dropped.
pub const DROP_WEIGHT: f64 = 1e-16;
pub const N_HANKEL_MAX: usize = 12;
const HANKEL_PIVOT_RTOL: f64 = 1e-13;
const NORMALIZATION_TOL: f64 = 1e-8;
const NODE_FLOOR: f64 = 1e-14;
const MIN_FIT_ATOMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lambda: f64,
    pub weight: f64,
}

/// Normalized atomic measure, sorted by strictly increasing λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
}

impl SpectralMeasure {
    /// Sorts, merges atoms within `MERGE_RTOL` relative to their own λ and
    /// normalizes.
    pub fn from_atoms(raw: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::build(raw, false)
    }

    /// Like [`from_atoms`](Self::from_atoms) but merges within the absolute
    /// tolerance `MERGE_RTOL·λ_max`, matching round-off in eigenvalues
    /// computed on a common scale.
    pub fn from_atoms_global(raw: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::build(raw, true)
    }

    fn build(raw: impl IntoIterator<Item = (f64, f64)>, global: bool) -> Result<Self> {
        let mut atoms: Vec<Atom> = raw
            .into_iter()
            .map(|(lambda, weight)| Atom { lambda, weight })
            .collect();
        for a in &atoms {
            if !(a.lambda.is_finite() && a.lambda > 0.0) {
                return Err(Error::InvalidParameter(format!("atom location {} must be positive", a.lambda)));
            }
            if !(a.weight.is_finite() && a.weight >= 0.0) {
                return Err(Error::InvalidParameter(format!("atom weight {} must be nonnegative", a.weight)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if !(total > 0.0) {
            return Err(Error::NormalizationFailure { total });
        }
        atoms.sort_by(|x, y| x.lambda.total_cmp(&y.lambda));
        let lmax = atoms.last().map_or(0.0, |a| a.lambda);
        let tol = |lambda: f64| MERGE_RTOL * if global { lmax } else { lambda };

        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut anchor = f64::NEG_INFINITY;
        for a in atoms {
            match merged.last_mut() {
                Some(last) if a.lambda - anchor <= tol(a.lambda) => {
                    let w = last.weight + a.weight;
                    if w > 0.0 {
                        last.lambda = (last.lambda * last.weight + a.lambda * a.weight) / w;
                    }
                    last.weight = w;
                }
                _ => {
                    anchor = a.lambda;
                    merged.push(a);
                }
            }
        }
        merged.retain(|a| a.weight > 0.0);
        for a in &mut merged {
            a.weight /= total;
        }
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.lambda).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn lambda_min(&self) -> f64 {
        self.atoms[0].lambda
    }

    pub fn lambda_max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].lambda
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(a.lambda)).sum()
    }

    pub fn moment(&self, k: i32) -> f64 {
        self.integrate(|l| l.powi(k))
    }

    /// `∫ λ⁻ᵏ dμ`; `k = 2` gives `F/|O0|²`.
    pub fn inverse_moment(&self, k: i32) -> f64 {
        self.moment(-k)
    }

    /// Affine image `λ ↦ (λ − shift)/scale`, without the positivity check.
    fn standardized(&self, shift: f64, scale: f64) -> Vec<Atom> {
        self.atoms
            .iter()
            .map(|a| Atom {
                lambda: (a.lambda - shift) / scale,
                weight: a.weight,
            })
            .collect()
    }
}

/// Measure of K relative to a seed normalized in `⟨·,·⟩_ρ`.
pub fn spectral_measure(ctx: &WeightedSpace, v0: &LiouvilleVector) -> Result<SpectralMeasure> {
    if v0.dim() != ctx.dim() {
        return Err(Error::DimensionMismatch {
            expected: ctx.dim(),
            actual: v0.dim(),
        });
    }
    let pairs: Vec<(f64, f64)> = ctx
        .weights()
        .iter()
        .zip(v0.matrix().iter())
        .map(|(&w, z)| (w, w * z.norm_sqr()))
        .collect();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NormalizationFailure { total });
    }
    let merged = SpectralMeasure::from_atoms_global(pairs)?;
    SpectralMeasure::from_atoms_global(
        merged
            .atoms
            .into_iter()
            .filter(|a| a.weight >= DROP_WEIGHT)
            .map(|a| (a.lambda, a.weight)),
    )
}

/// Normalizes `seed` and returns its measure together with `|seed|_ρ`.
pub fn seed_measure(ctx: &WeightedSpace, seed: &LiouvilleVector) -> Result<(SpectralMeasure, f64)> {
    let norm = ctx.norm(seed)?;
    if !(norm > 0.0) {
        return Err(Error::ZeroSeed { norm });
    }
    let v0 = seed.scaled(num_complex::Complex64::new(1.0 / norm, 0.0));
    Ok((spectral_measure(ctx, &v0)?, norm))
}

/// `μ_k = Σ_j μ_j λ_j^k` for `k = 0..=k_max`.
pub fn moments(m: &SpectralMeasure, k_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; k_max + 1];
    for a in m.atoms() {
        let mut p = a.weight;
        for mk in out.iter_mut() {
            *mk += p;
            p *= a.lambda;
        }
    }
    out
}

/// Hankel matrix `M_ij = μ_{i+j}` of order n.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMoments {
    pub mu: Vec<f64>,
    pub m: DMatrix<f64>,
    /// Ratio of the largest to the smallest squared Cholesky pivot.
    pub cond_estimate: f64,
}

impl HankelMoments {
    pub fn new(mu: &[f64], n: usize) -> Result<Self> {
        if mu.len() < 2 * n - 1 {
            return Err(Error::InsufficientMoments {
                needed: 2 * n - 1,
                got: mu.len(),
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| mu[i + j]);
        let pivots = cholesky_pivots(&m)?;
        let (lo, hi) = pivots
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &p| (lo.min(p), hi.max(p)));
        Ok(Self {
            mu: mu[..2 * n - 1].to_vec(),
            m,
            cond_estimate: hi / lo,
        })
    }
}

fn cholesky_pivots(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = m.nrows();
    let r = partial_cholesky(|i, j| m[(i, j)], n, n, m[(0, 0)])?;
    Ok((0..n).map(|k| r[(k, k)] * r[(k, k)]).collect())
}

/// Upper Cholesky factor rows `0..rows` of a Hankel matrix, columns
/// `0..cols`, with pivot checks relative to `mu0`.
fn partial_cholesky(h: impl Fn(usize, usize) -> f64, rows: usize, cols: usize, mu0: f64) -> Result<DMatrix<f64>> {
    let mut r = DMatrix::<f64>::zeros(rows, cols);
    let mut max_pivot = 0.0_f64;
    for k in 0..rows {
        let d = h(k, k) - (0..k).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>();
        max_pivot = max_pivot.max(d);
        if !(d > HANKEL_PIVOT_RTOL * mu0) {
            return Err(Error::HankelIllConditioned {
                order: k + 1,
                cond_estimate: if d > 0.0 { max_pivot / d } else { f64::INFINITY },
            });
        }
        let rkk = d.sqrt();
        r[(k, k)] = rkk;
        for j in k + 1..cols {
            r[(k, j)] = (h(k, j) - (0..k).map(|i| r[(i, k)] * r[(i, j)]).sum::<f64>()) / rkk;
        }
    }
    Ok(r)
}

/// Jacobi matrix `T_n` from raw moments `μ_0..μ_{2n−1}` via the Cholesky
/// factor of the Hankel matrix:
/// `a_k = r_{k,k+1}/r_kk − r_{k−1,k}/r_{k−1,k−1}`, `b_{k+1} = r_{k+1,k+1}/r_kk`.
pub fn lanczos_from_moments(mu: &[f64], n: usize) -> Result<TridiagonalMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("order must be at least 1".into()));
    }
    if n > N_HANKEL_MAX {
        return Err(Error::HankelOrderTooLarge {
            requested: n,
            max: N_HANKEL_MAX,
        });
    }
    if mu.len() < 2 * n {
        return Err(Error::InsufficientMoments {
            needed: 2 * n,
            got: mu.len(),
        });
    }
    let r = partial_cholesky(|i, j| mu[i + j], n, n + 1, mu[0])?;
    let ratio = |k: usize| r[(k, k + 1)] / r[(k, k)];
    let a = (0..n)
        .map(|k| if k == 0 { ratio(0) } else { ratio(k) - ratio(k - 1) })
        .collect();
    let b = (1..n).map(|k| r[(k, k)] / r[(k - 1, k - 1)]).collect();
    TridiagonalMatrix::new(a, b)
}

/// Hankel route on the centered and rescaled measure, mapped back by
/// `a = c + s·a'`, `b = s·b'`. The affine change keeps the Hankel matrix
/// well conditioned when the support is narrow compared with its offset.
pub fn lanczos_from_measure(m: &SpectralMeasure, n: usize) -> Result<TridiagonalMatrix> {
    let shift = m.moment(1);
    let scale = m
        .atoms()
        .iter()
        .fold(0.0_f64, |acc, a| acc.max((a.lambda - shift).abs()));
    if !(scale > 0.0) {
        return lanczos_from_moments(&moments(m, 2 * n - 1), n);
    }
    let std_atoms = m.standardized(shift, scale);
    let mut mu = vec![0.0; 2 * n];
    for a in &std_atoms {
        let mut p = a.weight;
        for mk in mu.iter_mut() {
            *mk += p;
            p *= a.lambda;
        }
    }
    let t = lanczos_from_moments(&mu, n)?;
    TridiagonalMatrix::new(
        t.diagonal().iter().map(|a| shift + scale * a).collect(),
        t.off_diagonal().iter().map(|b| scale * b).collect(),
    )
}

/// `Wᵀ S⁻¹ M S⁻¹ W` with `M_ij = μ_{i+j}`, `S_ij = μ_{i+j+1}` and
/// `W_i = μ_i`, which equals `e_0ᵀ T_n⁻² e_0`: `q = S⁻¹W` is the
/// polynomial interpolating `1/λ` at the Gauss nodes.
pub fn moment_inverse_square(mu: &[f64], n: usize) -> Result<f64> {
    if mu.len() < 2 * n {
        return Err(Error::InsufficientMoments {
            needed: 2 * n,
            got: mu.len(),
        });
    }
    let m = DMatrix::from_fn(n, n, |i, j| mu[i + j]);
    let s = DMatrix::from_fn(n, n, |i, j| mu[i + j + 1]);
    let w = DVector::from_fn(n, |i, _| mu[i]);
    let chol = s.cholesky().ok_or(Error::HankelIllConditioned {
        order: n,
        cond_estimate: f64::INFINITY,
    })?;
    let q = chol.solve(&w);
    Ok(q.dot(&(m * &q)))
}

/// The same quadratic form in the basis `x^i` with `x = (λ − c)/s`, where
/// `c = μ_1` and `s` is the largest distance of an atom from `c`:
/// `M_ij = ν_{i+j}`, `S_ij = c ν_{i+j} + s ν_{i+j+1}`, `W_i = ν_i` with
/// `ν_k = ∫ x^k dμ`. Exact in any polynomial basis, and much better
/// conditioned than raw monomials when the support is narrow.
pub fn measure_inverse_square(m: &SpectralMeasure, n: usize) -> Result<f64> {
    let shift = m.moment(1);
    let scale = m
        .atoms()
        .iter()
        .fold(0.0_f64, |acc, a| acc.max((a.lambda - shift).abs()));
    if !(scale > 0.0) {
        return moment_inverse_square(&moments(m, 2 * n), n);
    }
    let mut nu = vec![0.0; 2 * n];
    for a in m.standardized(shift, scale) {
        let mut p = a.weight;
        for nk in nu.iter_mut() {
            *nk += p;
            p *= a.lambda;
        }
    }
    let mm = DMatrix::from_fn(n, n, |i, j| nu[i + j]);
    let s = DMatrix::from_fn(n, n, |i, j| shift * nu[i + j] + scale * nu[i + j + 1]);
    let w = DVector::from_fn(n, |i, _| nu[i]);
    let chol = s.cholesky().ok_or(Error::HankelIllConditioned {
        order: n,
        cond_estimate: f64::INFINITY,
    })?;
    let q = chol.solve(&w);
    Ok(q.dot(&(mm * &q)))
}

/// Gauss rule of a Jacobi matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, w)| w * f(x)).sum()
    }
}

/// Nodes are the eigenvalues of T, weights the squared first components
/// of its normalized eigenvectors (Golub–Welsch).
pub fn gauss_quadrature(t: &TridiagonalMatrix) -> QuadratureRule {
    let (nodes, vecs) = t.eigen();
    let weights = (0..nodes.len()).map(|k| vecs[(0, k)].powi(2)).collect();
    QuadratureRule { nodes, weights }
}

/// `|O0|² Σ_k w_k/ζ_k²`.
pub fn qfi_by_quadrature(rule: &QuadratureRule, seed_norm: f64) -> Result<f64> {
    if let Some(&node) = rule.nodes.iter().find(|&&x| x < NODE_FLOOR) {
        return Err(Error::NodeAtZero { node });
    }
    Ok(seed_norm * seed_norm * rule.integrate(|x| 1.0 / (x * x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Gapped iff `λ_min ≥ gap_threshold · λ_max`.
    pub gap_threshold: f64,
    /// Decades of λ above `λ_min` used for the edge-exponent fit.
    pub fit_decades: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            gap_threshold: 1e-3,
            fit_decades: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegimeClassification {
    Gapped {
        lambda_min: f64,
        lambda_max: f64,
        /// `ln[(1+√(1−r²))/(1−√(1−r²))]` with `r = λ_min/λ_max`; `+∞` for a
        /// single atom.
        #[serde(with = "extended_f64")]
        gamma: f64,
        /// `ln[(1+√r)/(1−√r)]`, the Bernstein-ellipse rate of `1/λ` on the
        /// support; `+∞` for a single atom.
        #[serde(with = "extended_f64")]
        bernstein_rate: f64,
    },
    HardEdge {
        alpha_hat: f64,
        fit_window: (f64, f64),
        fit_residual: f64,
    },
}

impl RegimeClassification {
    pub fn is_gapped(&self) -> bool {
        matches!(self, Self::Gapped { .. })
    }

    pub fn is_hard_edge(&self) -> bool {
        matches!(self, Self::HardEdge { .. })
    }
}

/// Decay rate `γ(r) = ln[(1+√(1−r²))/(1−√(1−r²))]` for `r = λ_min/λ_max`.
pub fn gapped_rate(ratio: f64) -> f64 {
    let s = (1.0 - ratio * ratio).max(0.0).sqrt();
    ((1.0 + s) / (1.0 - s)).ln()
}

/// `ln[(1+√r)/(1−√r)]`: `1/λ` is analytic inside the Bernstein ellipse of
/// the support with this parameter, so its orthogonal-polynomial
/// coefficients decay as `e^{−k·rate}`.
pub fn bernstein_rate(ratio: f64) -> f64 {
    let s = ratio.clamp(0.0, 1.0).sqrt();
    if s >= 1.0 {
        return f64::INFINITY;
    }
    ((1.0 + s) / (1.0 - s)).ln()
}

pub fn classify_measure(m: &SpectralMeasure, opts: ClassifyOptions) -> Result<RegimeClassification> {
    if m.is_empty() {
        return Err(Error::InsufficientAtoms { atoms: 0, needed: 1 });
    }
    let (lmin, lmax) = (m.lambda_min(), m.lambda_max());
    if lmin >= opts.gap_threshold * lmax {
        let single = m.len() == 1;
        let ratio = lmin / lmax;
        return Ok(RegimeClassification::Gapped {
            lambda_min: lmin,
            lambda_max: lmax,
            gamma: if single { f64::INFINITY } else { gapped_rate(ratio) },
            bernstein_rate: if single { f64::INFINITY } else { bernstein_rate(ratio) },
        });
    }
    if m.len() < MIN_FIT_ATOMS {
        return Err(Error::InsufficientAtoms {
            atoms: m.len(),
            needed: MIN_FIT_ATOMS,
        });
    }
    // Cumulative weight μ([0, λ_j]) ∝ λ_j^{α+1} near the edge.
    let upper = lmin * 10f64.powf(opts.fit_decades);
    let mut xs = Vec::new();
    let mut cumulative = Vec::new();
    let mut acc = 0.0;
    for a in m.atoms() {
        acc += a.weight;
        if a.lambda > upper && xs.len() >= 3 {
            break;
        }
        xs.push(a.lambda.ln());
        cumulative.push(acc);
    }
    let (_, fit) = edge_fit(&xs, &cumulative);
    Ok(RegimeClassification::HardEdge {
        alpha_hat: fit.slope - 1.0,
        fit_window: (lmin, xs.last().copied().map_or(lmin, f64::exp)),
        fit_residual: fit.rms,
    })
}

/// Log-log fit of `m0 + C_j` against `λ_j`, with `m0 ≥ 0` the unobserved
/// mass below the lowest atom chosen to minimize the log-space residual.
/// A discretized edge truncated at `λ_min` otherwise bends the cumulative
/// over the first `~1/(1 − r)` atoms of a mesh with ratio `r`.
fn edge_fit(xs: &[f64], cumulative: &[f64]) -> (f64, LinearFit) {
    let fit_with = |m0: f64| {
        let ys: Vec<f64> = cumulative.iter().map(|c| (c + m0).ln()).collect();
        linear_fit(xs, &ys)
    };
    let base = cumulative[0];
    let rms_at = |t: f64| fit_with(base * t.exp()).rms;
    // Golden-section search over t = ln(m0/C_1).
    let (mut lo, mut hi) = (-40.0_f64, 12.0_f64);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (rms_at(x1), rms_at(x2));
    for _ in 0..120 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = rms_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = rms_at(x2);
        }
    }
    let candidate = base * (0.5 * (lo + hi)).exp();
    let (zero, best) = (fit_with(0.0), fit_with(candidate));
    if zero.rms <= best.rms {
        (0.0, zero)
    } else {
        (candidate, best)
    }
}

/// Serializes non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`,
/// which plain JSON numbers cannot carry.
mod extended_f64 {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("invalid float {other:?}"))),
            },
        }
    }
}
