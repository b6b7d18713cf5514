use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use krylov_qfi::IsingParams;
use qfi_cli::config::{all_formats, CustomParams};
use qfi_cli::{export, run_experiment, CliError, ExperimentConfig, Format, Model, SyntheticParams, SyntheticRegime};

/// Krylov convergence of the quantum Fisher information.
#[derive(Parser)]
#[command(name = "qfi", version)]
struct Cli {
    /// JSON experiment config; when given, it replaces all other flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Random states on the mixed-field Ising chain.
    Ising(IsingArgs),
    /// Model spectral measures.
    Synthetic(SyntheticArgs),
    /// User-supplied state and generator or seed operator.
    Custom(CustomArgs),
}

#[derive(Args)]
struct Common {
    /// Maximum Krylov dimension.
    #[arg(long)]
    max_n: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated output formats.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["json", "csv"])]
    formats: Vec<Format>,
    /// Base RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct IsingArgs {
    /// Number of sites L.
    #[arg(long, short = 'L')]
    length: usize,
    #[arg(long = "J", default_value_t = 1.0, allow_negative_numbers = true)]
    j: f64,
    /// Transverse field.
    #[arg(long, allow_negative_numbers = true)]
    g: f64,
    /// Longitudinal field.
    #[arg(long, allow_negative_numbers = true)]
    h: f64,
    /// Number of random states.
    #[arg(long, default_value_t = 1)]
    ensemble: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Gapped,
    HardEdge,
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long, value_enum)]
    regime: RegimeArg,
    /// Edge exponent of the hard-edge density.
    #[arg(long, required_if_eq("regime", "hard-edge"))]
    alpha: Option<f64>,
    /// Lower support edge of the gapped measure.
    #[arg(long, required_if_eq("regime", "gapped"))]
    lmin: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    lmax: f64,
    /// Number of atoms.
    #[arg(long)]
    atoms: usize,
    /// Inclusive fit window `lo,hi` in n.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    window: Option<Vec<usize>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct CustomArgs {
    /// Density matrix file.
    #[arg(long)]
    rho: PathBuf,
    /// Hamiltonian file (unitary encoding).
    #[arg(long, conflicts_with = "seed_operator", required_unless_present = "seed_operator")]
    hamiltonian: Option<PathBuf>,
    /// Arbitrary seed operator file.
    #[arg(long)]
    seed_operator: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

fn config_from(command: Command) -> ExperimentConfig {
    let (model, ensemble, common) = match command {
        Command::Ising(a) => {
            let p = IsingParams { length: a.length, j: a.j, g: a.g, h: a.h };
            (Model::Ising(p), a.ensemble, a.common)
        }
        Command::Synthetic(a) => {
            let regime = match a.regime {
                RegimeArg::Gapped => SyntheticRegime::Gapped {
                    lambda_min: a.lmin.expect("required by clap"),
                    lambda_max: a.lmax,
                },
                RegimeArg::HardEdge => SyntheticRegime::HardEdge {
                    alpha: a.alpha.expect("required by clap"),
                    lambda_max: a.lmax,
                },
            };
            let fit_window = a.window.map(|w| (w[0], w[1]));
            (Model::Synthetic(SyntheticParams { regime, atoms: a.atoms, fit_window }), 1, a.common)
        }
        Command::Custom(a) => {
            let p = CustomParams { rho: a.rho, hamiltonian: a.hamiltonian, seed_operator: a.seed_operator };
            (Model::CustomSeed(p), 1, a.common)
        }
    };
    ExperimentConfig {
        model,
        ensemble_size: ensemble,
        rng_seed: common.seed,
        max_n: common.max_n,
        output_dir: common.out,
        formats: if common.formats.is_empty() { all_formats() } else { common.formats },
        max_hilbert_dim: None,
        classify: Default::default(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match (cli.config, cli.command) {
        (Some(path), _) => ExperimentConfig::from_file(&path)?,
        (None, Some(command)) => {
            let cfg = config_from(command);
            cfg.validate()?;
            cfg
        }
        (None, None) => return Err(CliError::Config("expected a subcommand or --config FILE".into())),
    };
    let report = run_experiment(&cfg)?;
    let written = export(&report, &cfg.formats, &cfg.output_dir)?;

    if let Some(s) = &report.synthetic {
        println!(
            "fit {:?} {:.4} over n in [{}, {}] (residual {:.3}); reference {} = {:.4}",
            s.fit.model, s.fit.value, s.fit.window.0, s.fit.window.1, s.fit.residual, s.reference_label, s.reference
        );
    } else {
        let d0 = report.d0.expect("ensemble runs record d0");
        println!(
            "{} member(s), d0 in [{}, {}], regimes: {} gapped, {} hard edge, {} unclassified",
            report.members.len(),
            d0.min,
            d0.max,
            report.regime_counts.gapped,
            report.regime_counts.hard_edge,
            report.regime_counts.unclassified
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
