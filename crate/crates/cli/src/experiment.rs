//! Experiment drivers: Ising ensembles, synthetic measures, custom seeds.

use std::time::Instant;

use krylov_qfi::models::{ising_hamiltonian_capped, member_seed};
use krylov_qfi::qfi::krylov_distribution;
use krylov_qfi::spectral::{bernstein_rate, gapped_rate, seed_measure};
use krylov_qfi::{
    analyze_seed, classify_measure, coefficient_tail, fit_decay, fn_series, make_gapped_measure,
    make_hard_edge_measure, random_density_matrix, DecayFit, DecayModel, DensityMatrix, HermitianOperator,
    LanczosOptions, LiouvilleVector, QfiReport, QuantityKind, RegimeClassification, SpectralMeasure,
    TridiagonalMatrix, WeightedSpace,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CustomParams, ExperimentConfig, Model, SyntheticParams, SyntheticRegime};
use crate::error::CliError;
use crate::matrix_io::read_matrix;

pub const SCHEMA: &str = "krylov-qfi/1";

/// Pointwise statistics over the ensemble; index `i` is `n = i + 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub mean: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ErrorCurve {
    /// Members that saturated before `n` contribute zero there.
    pub fn aggregate<'a>(series: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let series: Vec<&[f64]> = series.into_iter().collect();
        let len = series.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut curve = Self::default();
        for n in 0..len {
            let vals: Vec<f64> = series.iter().map(|s| s.get(n).copied().unwrap_or(0.0)).collect();
            curve.mean.push(vals.iter().sum::<f64>() / vals.len() as f64);
            curve.min.push(vals.iter().copied().fold(f64::INFINITY, f64::min));
            curve.max.push(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        curve
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanczosTrace {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl From<&TridiagonalMatrix> for LanczosTrace {
    fn from(t: &TridiagonalMatrix) -> Self {
        Self {
            a: t.diagonal().to_vec(),
            b: t.off_diagonal().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub index: usize,
    pub seed: u64,
    pub report: QfiReport,
    pub regime: Option<RegimeClassification>,
    /// Set when the measure could not be classified.
    pub regime_error: Option<String>,
    pub mean_a: f64,
    pub mean_b: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeCounts {
    pub gapped: usize,
    pub hard_edge: usize,
    pub unclassified: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct D0Stats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    /// Members whose recursion stopped at `max_n` before breakdown.
    pub incomplete: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSummary {
    pub f_exact: f64,
    pub fit: DecayFit,
    /// Reference value for the fitted rate: `2γ(r)` gapped, `2α+1` hard edge.
    pub reference: f64,
    pub reference_label: String,
    /// `2 ln[(1+√r)/(1−√r)]` for gapped measures.
    pub bernstein_reference: Option<f64>,
    pub classification: Option<RegimeClassification>,
    /// The log-space fit residual exceeds 0.5.
    pub regime_unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rng_seed: u64,
    pub cli_version: String,
    pub core_version: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub members: Vec<MemberReport>,
    /// Projection error `1 − F_proj^(n)/F`.
    pub error_curve: ErrorCurve,
    /// Galerkin error `1 − F_galerkin^(n)/F`.
    pub galerkin_curve: ErrorCurve,
    /// Lanczos coefficients of member 0 (or of the synthetic measure).
    pub lanczos: LanczosTrace,
    pub measure: SpectralMeasure,
    /// Krylov distribution `p_k` of member 0.
    pub distribution: Vec<f64>,
    pub regime: Option<RegimeClassification>,
    pub regime_counts: RegimeCounts,
    pub d0: Option<D0Stats>,
    pub synthetic: Option<SyntheticSummary>,
    pub provenance: Provenance,
}

struct MemberRun {
    report: MemberReport,
    trace: LanczosTrace,
    measure: SpectralMeasure,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let cfg = cfg.clone().resolved()?;
    let start = Instant::now();
    let mut report = match &cfg.model {
        Model::Ising(_) => run_ising(&cfg)?,
        Model::Synthetic(p) => run_synthetic(&cfg, p)?,
        Model::CustomSeed(p) => run_custom(&cfg, p)?,
    };
    report.provenance.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

fn analyze_member(
    index: usize,
    seed: u64,
    space: &WeightedSpace,
    seed_op: &LiouvilleVector,
    quantity: QuantityKind,
    cfg: &ExperimentConfig,
) -> Result<MemberRun, CliError> {
    let wrap = CliError::in_member(index);
    let analysis = analyze_seed(space, seed_op, quantity, cfg.max_n, LanczosOptions::default()).map_err(wrap)?;
    let (measure, _) = seed_measure(space, seed_op).map_err(CliError::in_member(index))?;
    let (regime, regime_error) = match classify_measure(&measure, cfg.classify) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(format!("{} ({})", e, e.name()))),
    };
    let trace = LanczosTrace::from(&analysis.krylov.tridiag);
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    Ok(MemberRun {
        report: MemberReport {
            index,
            seed,
            mean_a: mean(&trace.a),
            mean_b: mean(&trace.b),
            report: analysis.report,
            regime,
            regime_error,
        },
        trace,
        measure,
    })
}

fn ising_member(cfg: &ExperimentConfig, h: &HermitianOperator, index: usize) -> Result<MemberRun, CliError> {
    let seed = member_seed(cfg.rng_seed, index);
    let rho = random_density_matrix(h.dim(), seed).map_err(CliError::in_member(index))?;
    let space = WeightedSpace::new(rho);
    let (seed_op, _) = space.unitary_seed(h).map_err(CliError::in_member(index))?;
    analyze_member(index, seed, &space, &seed_op, QuantityKind::Qfi, cfg)
}

fn run_ising(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let Model::Ising(p) = &cfg.model else { unreachable!() };
    let h = ising_hamiltonian_capped(p, cfg.hilbert_cap())?;
    let results: Vec<Result<MemberRun, CliError>> =
        (0..cfg.ensemble_size).into_par_iter().map(|i| ising_member(cfg, &h, i)).collect();
    // The first failure by member index wins, independent of scheduling.
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ensemble_report(cfg, runs))
}

fn run_custom(cfg: &ExperimentConfig, p: &CustomParams) -> Result<ExperimentReport, CliError> {
    let rho = DensityMatrix::new(&read_matrix(&p.rho)?)?;
    let space = WeightedSpace::new(rho);
    let (seed_op, quantity) = match (&p.hamiltonian, &p.seed_operator) {
        (Some(path), _) => {
            let h = HermitianOperator::new(&read_matrix(path)?)?;
            (space.unitary_seed(&h)?.0, QuantityKind::Qfi)
        }
        (None, Some(path)) => (space.to_liouville(&read_matrix(path)?)?, QuantityKind::ResolventMoment),
        (None, None) => return Err(CliError::Config("custom-seed needs an operator".into())),
    };
    let run = analyze_member(0, cfg.rng_seed, &space, &seed_op, quantity, cfg)?;
    Ok(ensemble_report(cfg, vec![run]))
}

fn ensemble_report(cfg: &ExperimentConfig, runs: Vec<MemberRun>) -> ExperimentReport {
    let error_curve = ErrorCurve::aggregate(runs.iter().map(|r| r.report.report.rel_error.as_slice()));
    let galerkin_curve = ErrorCurve::aggregate(runs.iter().map(|r| r.report.report.galerkin_rel_error.as_slice()));
    let mut counts = RegimeCounts::default();
    for r in &runs {
        match &r.report.regime {
            Some(RegimeClassification::Gapped { .. }) => counts.gapped += 1,
            Some(RegimeClassification::HardEdge { .. }) => counts.hard_edge += 1,
            None => counts.unclassified += 1,
        }
    }
    let d0s: Vec<usize> = runs.iter().map(|r| r.report.report.d0.unwrap_or(r.report.report.levels())).collect();
    let d0 = D0Stats {
        min: d0s.iter().copied().min().unwrap_or(0),
        max: d0s.iter().copied().max().unwrap_or(0),
        mean: d0s.iter().sum::<usize>() as f64 / d0s.len().max(1) as f64,
        incomplete: runs.iter().filter(|r| !r.report.report.complete).count(),
    };
    let mut runs = runs.into_iter();
    let first = runs.next().expect("ensemble has at least one member");
    let members: Vec<MemberReport> = std::iter::once(first.report.clone()).chain(runs.map(|r| r.report)).collect();
    ExperimentReport {
        schema: SCHEMA.into(),
        config: cfg.clone(),
        error_curve,
        galerkin_curve,
        lanczos: first.trace,
        measure: first.measure,
        distribution: first.report.report.p.clone(),
        regime: first.report.regime.clone(),
        regime_counts: counts,
        d0: Some(d0),
        synthetic: None,
        members,
        provenance: provenance(cfg),
    }
}

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance {
        rng_seed: cfg.rng_seed,
        cli_version: env!("CARGO_PKG_VERSION").into(),
        core_version: krylov_qfi::VERSION.into(),
        wall_time_s: 0.0,
    }
}

fn run_synthetic(cfg: &ExperimentConfig, p: &SyntheticParams) -> Result<ExperimentReport, CliError> {
    let measure = match p.regime {
        SyntheticRegime::Gapped { lambda_min, lambda_max } => make_gapped_measure(lambda_min, lambda_max, p.atoms)?,
        SyntheticRegime::HardEdge { alpha, lambda_max } => make_hard_edge_measure(alpha, p.atoms, lambda_max)?,
    };
    let n_max = cfg.max_n.min(measure.len());
    let (ell, rel) = coefficient_tail(&measure, n_max)?;
    let (tridiag, _) = krylov_qfi::stieltjes_lanczos(&measure, n_max)?;
    let f_exact = measure.inverse_moment(2);
    let galerkin: Vec<f64> = fn_series(&tridiag, 1.0)?.iter().map(|g| 1.0 - g / f_exact).collect();
    let (distribution, _) = krylov_distribution(&ell)?;

    let (model, reference, label, bernstein) = match p.regime {
        SyntheticRegime::Gapped { lambda_min, lambda_max } => {
            let r = lambda_min / lambda_max;
            (DecayModel::Exponential, 2.0 * gapped_rate(r), "2*gamma", Some(2.0 * bernstein_rate(r)))
        }
        SyntheticRegime::HardEdge { alpha, .. } => (DecayModel::Algebraic, 2.0 * alpha + 1.0, "2*alpha+1", None),
    };
    let fit = fit_decay(&rel, model, p.window())?;
    let classification = classify_measure(&measure, cfg.classify).ok();
    let mut counts = RegimeCounts::default();
    match &classification {
        Some(RegimeClassification::Gapped { .. }) => counts.gapped = 1,
        Some(RegimeClassification::HardEdge { .. }) => counts.hard_edge = 1,
        None => counts.unclassified = 1,
    }
    let single = |v: Vec<f64>| ErrorCurve {
        mean: v.clone(),
        min: v.clone(),
        max: v,
    };
    Ok(ExperimentReport {
        schema: SCHEMA.into(),
        config: cfg.clone(),
        members: Vec::new(),
        error_curve: single(rel),
        galerkin_curve: single(galerkin),
        lanczos: LanczosTrace::from(&tridiag),
        measure,
        distribution,
        regime: classification.clone(),
        regime_counts: counts,
        d0: None,
        synthetic: Some(SyntheticSummary {
            f_exact,
            fit,
            reference,
            reference_label: label.into(),
            bernstein_reference: bernstein,
            classification,
            regime_unresolved: fit.residual > 0.5,
        }),
        provenance: provenance(cfg),
    })
}
