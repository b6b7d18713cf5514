//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! The L = 5 Ising run is skipped unless `--ignored`/`--include-ignored` is
//! passed or `QFI_EXTENDED=1` is set.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use krylov_qfi::lanczos::tridiag_solve_e0;
use krylov_qfi::models::{pauli_z, random_hermitian};
use krylov_qfi::qfi::exact_sld;
use krylov_qfi::spectral::{bernstein_rate, gapped_rate, lanczos_from_measure, measure_inverse_square, seed_measure};
use krylov_qfi::{
    analyze_unitary, exact_qfi, fn_series, gauss_quadrature, kraus_seed, qfi_by_quadrature, random_density_matrix,
    run_lanczos, CMatrix, Complex64, DensityMatrix, HermitianOperator, LanczosOptions, QfiReport, WeightedSpace,
};
use qfi_cli::{run_experiment, ExperimentConfig, ExperimentReport};

const SUITE_DIMS: [usize; 3] = [2, 4, 8];
const SUITE_PAIRS: u64 = 50;

struct Check {
    id: &'static str,
    name: &'static str,
    passed: bool,
    detail: String,
}

impl Check {
    fn new(id: &'static str, name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            id,
            name,
            passed,
            detail: detail.into(),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

struct Pair {
    space: WeightedSpace,
    h: HermitianOperator,
}

fn pair(n: usize, index: u64) -> Pair {
    let seed = 1000 * n as u64 + index;
    Pair {
        space: WeightedSpace::new(random_density_matrix(n, seed).unwrap()),
        h: random_hermitian(n, seed ^ 0xA5A5),
    }
}

struct SuiteRun {
    f: f64,
    f_d0: f64,
    sld_norm: f64,
    atomic: f64,
    report: QfiReport,
}

fn suite() -> (Vec<SuiteRun>, Duration) {
    let start = Instant::now();
    let mut runs = Vec::new();
    for n in SUITE_DIMS {
        for i in 0..SUITE_PAIRS {
            let p = pair(n, i);
            let analysis = analyze_unitary(&p.space, &p.h, n * n, LanczosOptions::default()).unwrap();
            let f_d0 = *analysis.report.f_series.last().unwrap();
            runs.push(SuiteRun {
                f: exact_qfi(&p.space, &p.h).unwrap(),
                f_d0,
                sld_norm: 0.0,
                atomic: 0.0,
                report: analysis.report,
            });
        }
    }
    let elapsed = start.elapsed();
    // Oracles outside the timed section.
    let mut k = 0;
    for n in SUITE_DIMS {
        for i in 0..SUITE_PAIRS {
            let p = pair(n, i);
            let l = exact_sld(&p.space, &p.h).unwrap();
            runs[k].sld_norm = p.space.inner_product(&l, &l).unwrap().re;
            let (seed, _) = p.space.unitary_seed(&p.h).unwrap();
            let (m, norm) = seed_measure(&p.space, &seed).unwrap();
            runs[k].atomic = norm * norm * m.integrate(|x| 1.0 / (x * x));
            k += 1;
        }
    }
    (runs, elapsed)
}

fn criterion_1(runs: &[SuiteRun], elapsed: Duration) -> Check {
    let worst = runs.iter().map(|r| rel(r.f_d0, r.f)).fold(0.0, f64::max);
    let all_complete = runs.iter().all(|r| r.report.complete);
    Check::new(
        "1",
        "oracle equivalence",
        worst <= 1e-9 && all_complete && elapsed < Duration::from_secs(5),
        format!("{} pairs, max rel err {worst:.2e}, {:.2}s", runs.len(), elapsed.as_secs_f64()),
    )
}

fn criterion_2(runs: &[SuiteRun]) -> Check {
    let worst = runs
        .iter()
        .map(|r| rel(r.sld_norm, r.f).max(rel(r.atomic, r.f)))
        .fold(0.0, f64::max);
    Check::new("2", "triangle identity", worst <= 1e-9, format!("max rel err {worst:.2e}"))
}

fn criterion_3(runs: &[SuiteRun]) -> Check {
    let mut violations = 0;
    for r in runs {
        for series in [&r.report.f_series, &r.report.f_projected] {
            violations += series.windows(2).filter(|w| w[1] < w[0] - 1e-12).count();
            violations += series.iter().filter(|&&x| x > r.f + 1e-12).count();
        }
    }
    Check::new(
        "3",
        "monotone lower bounds",
        violations == 0,
        format!("{violations} violations (Galerkin and projection series)"),
    )
}

fn criterion_4(runs: &[SuiteRun]) -> Check {
    let mut worst_tail = 0.0f64;
    let mut worst_bound = f64::INFINITY;
    for r in runs {
        let rep = &r.report;
        for n in 1..=rep.levels() {
            let err = 1.0 - rep.f_projected[n - 1] / r.f;
            let tail: f64 = rep.p[n..].iter().sum::<f64>() + rep.tail_mass;
            worst_tail = worst_tail.max((err - tail).abs());
            worst_bound = worst_bound.min(rep.depth / n as f64 + 1e-10 - err);
        }
    }
    Check::new(
        "4",
        "tail identity and D/n bound",
        worst_tail <= 1e-9 && worst_bound >= 0.0,
        format!("max |err - tail| {worst_tail:.2e}, min bound margin {worst_bound:.2e}"),
    )
}

/// `(T_n⁻²)_00` through a dense inverse.
fn dense_oracle(t: &krylov_qfi::TridiagonalMatrix) -> f64 {
    let inv = t.to_dense().try_inverse().expect("T_n is positive definite");
    (0..t.len()).map(|j| inv[(j, 0)] * inv[(j, 0)]).sum()
}

fn criterion_5() -> Check {
    let (mut solve, mut quad, mut hankel, mut moment) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..SUITE_PAIRS {
        let p = pair(4, i);
        let (seed, norm) = p.space.unitary_seed(&p.h).unwrap();
        let k = run_lanczos(&p.space, &seed, 16, LanczosOptions::default()).unwrap();
        let (m, _) = seed_measure(&p.space, &seed).unwrap();
        let series = fn_series(&k.tridiag, norm).unwrap();
        for n in 1..=k.levels().min(8) {
            let t = k.tridiag.leading(n);
            let x = tridiag_solve_e0(&t).unwrap();
            let via_solve = norm * norm * x.iter().map(|v| v * v).sum::<f64>();
            solve = solve.max(rel(via_solve, norm * norm * dense_oracle(&t)));
            let rule = gauss_quadrature(&t);
            quad = quad.max(rel(qfi_by_quadrature(&rule, norm).unwrap(), series[n - 1]));

            let h = lanczos_from_measure(&m, n).unwrap();
            let scale = m.lambda_max();
            for (x, y) in h.diagonal().iter().zip(t.diagonal()) {
                hankel = hankel.max((x - y).abs() / scale);
            }
            for (x, y) in h.off_diagonal().iter().zip(t.off_diagonal()) {
                hankel = hankel.max((x - y).abs() / scale);
            }
            moment = moment.max(rel(norm * norm * measure_inverse_square(&m, n).unwrap(), series[n - 1]));
        }
    }
    Check::new(
        "5",
        "route equivalence",
        solve <= 1e-10 && quad <= 1e-10 && hankel <= 1e-7 && moment <= 1e-7,
        format!("solve {solve:.2e}, quadrature {quad:.2e}, Hankel coefficients {hankel:.2e}, moment form {moment:.2e}"),
    )
}

fn synthetic(json: &str) -> (ExperimentReport, Duration) {
    let cfg = ExperimentConfig::from_json(json).unwrap();
    let start = Instant::now();
    let rep = run_experiment(&cfg).unwrap();
    (rep, start.elapsed())
}

fn criterion_6() -> Check {
    let (rep, elapsed) = synthetic(
        r#"{"experiment": "synthetic", "regime": "gapped", "lambda_min": 0.3333333333333333,
            "lambda_max": 1.0, "atoms": 500, "max_n": 40, "fit_window": [5, 25]}"#,
    );
    let s = rep.synthetic.unwrap();
    let target = 2.0 * gapped_rate(1.0 / 3.0);
    let bernstein = 2.0 * bernstein_rate(1.0 / 3.0);
    Check::new(
        "6",
        "gapped regime rate",
        rel(s.fit.value, target) <= 0.20 && elapsed < Duration::from_secs(10),
        format!(
            "fitted {:.4} vs 2*gamma {target:.4} ({:+.1}%); 2*ln((1+sqrt r)/(1-sqrt r)) = {bernstein:.4} ({:+.1}%), {:.2}s",
            s.fit.value,
            100.0 * (s.fit.value / target - 1.0),
            100.0 * (s.fit.value / bernstein - 1.0),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7() -> Check {
    let (rep, elapsed) = synthetic(
        r#"{"experiment": "synthetic", "regime": "hard-edge", "alpha": 2.0, "lambda_max": 1.0,
            "atoms": 2000, "max_n": 60, "fit_window": [8, 40]}"#,
    );
    let s = rep.synthetic.unwrap();
    Check::new(
        "7",
        "hard-edge regime exponent",
        rel(s.fit.value, 5.0) <= 0.15 && elapsed < Duration::from_secs(30),
        format!(
            "fitted {:.4} vs 2*alpha+1 = 5 ({:+.1}%), log residual {:.3}, {:.2}s",
            s.fit.value,
            100.0 * (s.fit.value / 5.0 - 1.0),
            s.fit.residual,
            elapsed.as_secs_f64()
        ),
    )
}

fn ising(length: usize, ensemble: usize, max_n: usize) -> (ExperimentReport, Duration) {
    let cfg = ExperimentConfig::from_json(&format!(
        r#"{{"experiment": "ising", "length": {length}, "J": 1.0, "g": -1.05, "h": 0.5,
            "ensemble_size": {ensemble}, "rng_seed": 2024, "max_n": {max_n}}}"#
    ))
    .unwrap();
    let start = Instant::now();
    let rep = run_experiment(&cfg).unwrap();
    (rep, start.elapsed())
}

fn criterion_8() -> Vec<Check> {
    let (rep, elapsed) = ising(4, 20, 150);
    let curve = &rep.error_curve.mean;
    let increases = curve.windows(2).filter(|w| w[1] > w[0]).count();
    let d0_max = rep.members.iter().map(|m| m.report.d0.unwrap_or(usize::MAX)).max().unwrap();
    let ab = rep.members.iter().filter(|m| m.mean_a > m.mean_b).count();
    let counts = rep.regime_counts;
    vec![
        Check::new(
            "8a",
            "Ising L=4: averaged error monotone",
            increases == 0,
            format!("{increases} increases over {} levels", curve.len()),
        ),
        Check::new(
            "8b",
            "Ising L=4: d0 <= 120",
            d0_max <= 120,
            format!("max d0 {d0_max}"),
        ),
        Check::new(
            "8c",
            "Ising L=4: mean a_k > mean b_k",
            ab == rep.members.len(),
            format!("{ab}/{} members", rep.members.len()),
        ),
        Check::new(
            "8d",
            "Ising L=4: HardEdge for >= 18/20",
            counts.hard_edge >= 18,
            format!(
                "{} hard edge, {} gapped, {} unclassified; smallest lambda_min/lambda_max {:.2e}",
                counts.hard_edge,
                counts.gapped,
                counts.unclassified,
                rep.members
                    .iter()
                    .filter_map(|m| match &m.regime {
                        Some(krylov_qfi::RegimeClassification::Gapped {
                            lambda_min, lambda_max, ..
                        }) => Some(lambda_min / lambda_max),
                        _ => None,
                    })
                    .fold(f64::INFINITY, f64::min)
            ),
        ),
        Check::new(
            "8e",
            "Ising L=4: runtime < 2 min",
            elapsed < Duration::from_secs(120),
            format!("{:.2}s", elapsed.as_secs_f64()),
        ),
    ]
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn dephased(rho0: &DensityMatrix, p: f64) -> CMatrix {
    let z = pauli_z();
    rho0.matrix() * c(1.0 - p) + &z * rho0.matrix() * &z * c(p)
}

fn criterion_9() -> Check {
    let mut fd_err = 0.0f64;
    let mut unitary_err = 0.0f64;
    let z = pauli_z();
    let id = CMatrix::identity(2, 2);
    for s in 0..10u64 {
        let rho0 = random_density_matrix(2, 500 + s).unwrap();
        let p = 0.1 + 0.07 * s as f64;
        let kraus = [&id * c((1.0 - p).sqrt()), &z * c(p.sqrt())];
        let dkraus = [&id * c(-0.5 / (1.0 - p).sqrt()), &z * c(0.5 / p.sqrt())];
        let ks = kraus_seed(&rho0, &kraus, &dkraus).unwrap();
        let step = 1e-5;
        let fd = (dephased(&rho0, p + step) - dephased(&rho0, p - step)) * c(0.5 / step);
        let seed = ks.space.to_lab(&ks.seed);
        fd_err = fd_err.max(frobenius(&(&seed - &fd)) / frobenius(&fd));

        let h = random_hermitian(2, 600 + s);
        let dk = h.matrix() * Complex64::new(0.0, -1.0);
        let ks = kraus_seed(&rho0, std::slice::from_ref(&id), &[dk]).unwrap();
        let space = WeightedSpace::new(rho0.clone());
        let (direct, _) = space.unitary_seed(&h).unwrap();
        let a = ks.space.to_lab(&ks.seed);
        let b = space.to_lab(&direct);
        unitary_err = unitary_err.max(frobenius(&(&a - &b)) / frobenius(&b));
    }
    Check::new(
        "9",
        "Kraus-seed consistency",
        fd_err <= 1e-8 && unitary_err <= 1e-12,
        format!("dephasing vs finite difference {fd_err:.2e}, unitary channel {unitary_err:.2e}"),
    )
}

const CSV_FILES: [&str; 4] = ["error_curve.csv", "lanczos.csv", "measure.csv", "distribution.csv"];

fn run_binary(out: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_qfi"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_10() -> Check {
    let cases: [&[&str]; 2] = [
        &["ising", "-L", "3", "--g", "-1.05", "--h", "0.5", "--ensemble", "6", "--seed", "9", "--max-n", "40"],
        &["synthetic", "--regime", "hard-edge", "--alpha", "1.5", "--atoms", "400", "--max-n", "50"],
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for args in cases {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        if !(run_binary(a.path(), args) && run_binary(b.path(), args)) {
            return Check::new("10", "determinism", false, format!("`qfi {}` failed", args.join(" ")));
        }
        for name in CSV_FILES {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            compared += 1;
            if x != y {
                mismatched.push(format!("{} {name}", args[0]));
            }
        }
    }
    Check::new(
        "10",
        "determinism",
        mismatched.is_empty(),
        format!("{compared} CSV files compared, mismatches: {mismatched:?}"),
    )
}

fn extended_requested() -> bool {
    std::env::args().any(|a| a == "--ignored" || a == "--include-ignored")
        || std::env::var("QFI_EXTENDED").is_ok_and(|v| v == "1")
}

fn extended_l5() {
    let (rep, elapsed) = ising(5, 1, 600);
    let m = &rep.members[0];
    println!(
        "INFO extended Ising L=5: measured d0 = {:?} (bound 496), regime {:?}, {:.2}s",
        m.report.d0,
        m.regime,
        elapsed.as_secs_f64()
    );
}

fn main() -> ExitCode {
    let (runs, elapsed) = suite();
    let mut checks = vec![
        criterion_1(&runs, elapsed),
        criterion_2(&runs),
        criterion_3(&runs),
        criterion_4(&runs),
        criterion_5(),
        criterion_6(),
        criterion_7(),
    ];
    checks.extend(criterion_8());
    checks.push(criterion_9());
    checks.push(criterion_10());

    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("{status} [{}] {}: {}", c.id, c.name, c.detail);
    }
    if extended_requested() {
        extended_l5();
    } else {
        println!("SKIP extended Ising L=5 (pass --include-ignored or set QFI_EXTENDED=1)");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
