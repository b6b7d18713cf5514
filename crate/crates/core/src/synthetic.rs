//! Model spectral measures and the measure-space Stieltjes recursion.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::TridiagonalMatrix;
use crate::spectral::SpectralMeasure;

/// Bottom of the hard-edge mesh relative to `λ_max`.
pub const HARD_EDGE_CUTOFF: f64 = 1e-8;
const MIN_HARD_EDGE_ATOMS: usize = 100;
const BREAKDOWN_RTOL: f64 = 1e-13;
const MIN_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    /// `series ≈ C e^{−rate·n}`.
    Exponential,
    /// `series ≈ C n^{−exponent}`.
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub model: DecayModel,
    /// Fitted rate (exponential) or exponent (algebraic).
    pub value: f64,
    /// Inclusive range of n.
    pub window: (usize, usize),
    /// RMS of the log-space residuals.
    pub residual: f64,
}

pub(crate) struct LinearFit {
    pub slope: f64,
    pub rms: f64,
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub(crate) fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    LinearFit {
        slope,
        rms: (ss / n).sqrt(),
    }
}

/// Atoms on the geometric mesh `λ_j = λ_max r^{M−j}` from `HARD_EDGE_CUTOFF·λ_max`
/// to `λ_max`, with `μ_j ∝ λ_j^α · Δλ_j ∝ λ_j^{α+1}`.
pub fn make_hard_edge_measure(alpha: f64, atoms: usize, lambda_max: f64) -> Result<SpectralMeasure> {
    if atoms < MIN_HARD_EDGE_ATOMS {
        return Err(Error::InvalidParameter(format!(
            "hard-edge measure needs at least {MIN_HARD_EDGE_ATOMS} atoms (got {atoms})"
        )));
    }
    let ratio = HARD_EDGE_CUTOFF.powf(1.0 / (atoms - 1) as f64);
    make_hard_edge_mesh(alpha, atoms, lambda_max, ratio)
}

/// Hard-edge measure on a mesh with explicit ratio `r`; the bottom atom sits
/// at `λ_max r^{M−1}`. Holding `r` fixed and growing `M` lowers the cutoff.
pub fn make_hard_edge_mesh(alpha: f64, atoms: usize, lambda_max: f64, ratio: f64) -> Result<SpectralMeasure> {
    if !(alpha.is_finite() && alpha > -1.0) {
        return Err(Error::BadAlpha { alpha });
    }
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(Error::BadInterval {
            lower: 0.0,
            upper: lambda_max,
        });
    }
    if atoms < 2 || !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("bad mesh: {atoms} atoms, ratio {ratio}")));
    }
    let ln_r = ratio.ln();
    // Weights in log space relative to the top atom, so tiny atoms do not underflow early.
    SpectralMeasure::from_atoms((1..=atoms).map(|j| {
        let e = (atoms - j) as f64;
        (lambda_max * (e * ln_r).exp(), ((alpha + 1.0) * e * ln_r).exp())
    }))
}

/// Chebyshev–Lobatto points of `[λ_min, λ_max]` with the discrete arcsine
/// weights (interior `1/(M−1)`, endpoints half that).
pub fn make_gapped_measure(lambda_min: f64, lambda_max: f64, atoms: usize) -> Result<SpectralMeasure> {
    if !(lambda_min.is_finite() && lambda_max.is_finite() && lambda_min > 0.0 && lambda_min < lambda_max) {
        return Err(Error::BadInterval {
            lower: lambda_min,
            upper: lambda_max,
        });
    }
    if atoms < 2 {
        return Err(Error::InvalidParameter(format!("gapped measure needs at least 2 atoms (got {atoms})")));
    }
    let c = 0.5 * (lambda_max + lambda_min);
    let s = 0.5 * (lambda_max - lambda_min);
    let last = atoms - 1;
    SpectralMeasure::from_atoms((0..atoms).map(|j| {
        let lambda = match j {
            0 => lambda_min,
            _ if j == last => lambda_max,
            _ => c - s * (std::f64::consts::PI * j as f64 / last as f64).cos(),
        };
        let weight = if j == 0 || j == last { 0.5 } else { 1.0 };
        (lambda, weight)
    }))
}

/// Orthonormal polynomials of the measure by the three-term recurrence with
/// one full reorthogonalization pass per level. Returns `T_{n_max}` and the
/// values `P[k, j] = P_k(λ_j)`.
pub fn stieltjes_lanczos(m: &SpectralMeasure, n_max: usize) -> Result<(TridiagonalMatrix, DMatrix<f64>)> {
    let atoms = m.len();
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    if n_max > atoms {
        return Err(Error::Breakdown { level: atoms });
    }
    let lambda = m.lambdas();
    let mu = m.weights();
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).zip(&mu).map(|((a, b), w)| w * a * b).sum() };

    let mut polys: Vec<Vec<f64>> = vec![vec![1.0; atoms]];
    let mut a = Vec::with_capacity(n_max);
    let mut b: Vec<f64> = Vec::with_capacity(n_max);
    let scale = m.lambda_max();

    for k in 0..n_max {
        let pk = &polys[k];
        let xp: Vec<f64> = pk.iter().zip(&lambda).map(|(p, l)| p * l).collect();
        let ak = dot(pk, &xp);
        a.push(ak);
        if k + 1 == n_max {
            break;
        }
        let mut q: Vec<f64> = xp.iter().zip(pk).map(|(x, p)| x - ak * p).collect();
        if k > 0 {
            let bk = b[k - 1];
            for (qi, pi) in q.iter_mut().zip(&polys[k - 1]) {
                *qi -= bk * pi;
            }
        }
        for p in &polys {
            let c = dot(p, &q);
            for (qi, pi) in q.iter_mut().zip(p) {
                *qi -= c * pi;
            }
        }
        let bk1 = dot(&q, &q).max(0.0).sqrt();
        if !(bk1 > BREAKDOWN_RTOL * scale) {
            return Err(Error::Breakdown { level: k + 1 });
        }
        b.push(bk1);
        polys.push(q.into_iter().map(|x| x / bk1).collect());
    }
    let p = DMatrix::from_fn(n_max, atoms, |k, j| polys[k][j]);
    Ok((TridiagonalMatrix::new(a, b)?, p))
}

/// Unit-seed SLD coefficients `ℓ_k = ∫ P_k/λ dμ` and
/// `rel_error(n) = 1 − Σ_{k<n} ℓ_k² / ∫λ⁻² dμ` for `n = 1..=n_max`.
///
/// The error is accumulated as the tail `Σ_{n≤k<n_max} ℓ_k²` plus the
/// residual `∫ (1/λ − Σ_{k<n_max} ℓ_k P_k)² dμ`, evaluated pointwise, so
/// values far below machine epsilon relative to F stay resolved.
pub fn coefficient_tail(m: &SpectralMeasure, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, p) = stieltjes_lanczos(m, n_max)?;
    let lambda = m.lambdas();
    let mu = m.weights();
    let ell: Vec<f64> = (0..n_max)
        .map(|k| (0..m.len()).map(|j| mu[j] * p[(k, j)] / lambda[j]).sum())
        .collect();
    let f = m.inverse_moment(2);
    let residual: f64 = (0..m.len())
        .map(|j| {
            let approx: f64 = (0..n_max).map(|k| ell[k] * p[(k, j)]).sum();
            mu[j] * (1.0 / lambda[j] - approx).powi(2)
        })
        .sum();

    let mut rel = vec![0.0; n_max];
    let mut tail = residual;
    for n in (1..=n_max).rev() {
        rel[n - 1] = tail / f;
        tail += ell[n - 1] * ell[n - 1];
    }
    Ok((ell, rel))
}

/// Least-squares fit of `ln series` against `n` or `ln n` over the
/// inclusive window; `series[i]` is the value at `n = i + 1`.
pub fn fit_decay(series: &[f64], model: DecayModel, window: (usize, usize)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if lo < 2 || hi > series.len() || hi < lo || hi - lo + 1 < MIN_WINDOW {
        return Err(Error::WindowTooShort { lo, hi });
    }
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for n in lo..=hi {
        let s = series[n - 1];
        if !(s > 0.0) {
            return Err(Error::NonPositiveSeries { n });
        }
        xs.push(match model {
            DecayModel::Exponential => n as f64,
            DecayModel::Algebraic => (n as f64).ln(),
        });
        ys.push(s.ln());
    }
    let fit = linear_fit(&xs, &ys);
    Ok(DecayFit {
        model,
        value: -fit.slope,
        window,
        residual: fit.rms,
    })
}
