//! `kinface`: batch front end over the toolkit.
//!
//! Exit codes: 0 success, 2 I/O, 3 invalid arguments or configuration,
//! 4 data-contract violation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use kinface::commands::{self, RetrievalFusion, VerifyMode};
use kinface::debias::ProbeOptions;
use kinface::Error;

#[derive(Parser)]
#[command(name = "kinface", version, about = "Kinship and face-verification toolkit over precomputed embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Global,
    PerType,
    PerSubgroup,
}

#[derive(Clone, Copy, ValueEnum)]
enum FusionArg {
    Score,
    Feature,
    Ta,
}

#[derive(Subcommand)]
enum Command {
    /// Semi-supervised clustering; writes partition.csv and report.json.
    Cluster {
        #[arg(long)]
        embeddings: PathBuf,
        /// CSV `id,class_label` of labeled members.
        #[arg(long)]
        side: Option<PathBuf>,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = kinface::clustering::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pair verification; writes report.json and det.csv.
    Verify {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, default_value = "global")]
        mode: Mode,
        /// Comma-separated target FAR values.
        #[arg(long, value_delimiter = ',')]
        targets: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Template retrieval; writes report.json, cmc.csv and ranked.csv.
    Retrieve {
        #[arg(long)]
        embeddings: PathBuf,
        /// Probe subjects, one `fid/mid` per line.
        #[arg(long)]
        probes: PathBuf,
        /// Gallery subjects, one `fid/mid` per line.
        #[arg(long)]
        gallery: PathBuf,
        #[arg(long, value_enum, default_value = "score")]
        fusion: FusionArg,
        #[arg(long, default_value_t = kinface::svm::DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Benchmark pair lists with family-disjoint folds; writes pairs.csv.
    BuildPairs {
        #[arg(long)]
        families: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Comma-separated relationship codes (default: all).
        #[arg(long, value_delimiter = ',')]
        types: Option<Vec<String>>,
        /// Also list same-subject positives.
        #[arg(long)]
        same_subject: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adversarial debiasing; writes checkpoint.json and report.json.
    Debias {
        /// Embeddings with subject and subgroup tags.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated hidden layer sizes of the probe MLP.
        #[arg(long, value_delimiter = ',', default_value = "512,512,256")]
        probe_hidden: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        probe_epochs: usize,
        #[arg(long, default_value_t = 5)]
        probe_folds: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 2,
        Error::InvalidK(_)
        | Error::InvalidHyperparameters(_)
        | Error::InvalidArgument(_)
        | Error::InvalidTarget(_)
        | Error::InvalidFoldCount(_)
        | Error::InvalidThreshold(_)
        | Error::InvalidPercentile(_)
        | Error::UnknownRelationshipType(_) => 3,
        _ => 4,
    }
}

fn run(command: Command) -> kinface::Result<()> {
    match command {
        Command::Cluster {
            embeddings,
            side,
            k,
            lambda,
            seed,
            out,
        } => {
            let r = commands::cluster(&commands::ClusterArgs {
                embeddings,
                side,
                k,
                lambda,
                seed,
                out,
            })?;
            println!("clustered {} points into {} clusters ({} iterations)", r.n, r.k, r.iterations);
        }
        Command::Verify {
            embeddings,
            pairs,
            mode,
            targets,
            out,
        } => {
            let mode = match mode {
                Mode::Global => VerifyMode::Global,
                Mode::PerType => VerifyMode::PerType,
                Mode::PerSubgroup => VerifyMode::PerSubgroup,
            };
            let r = commands::verify(&commands::VerifyArgs {
                embeddings,
                pairs,
                mode,
                targets,
                out,
            })?;
            println!("{} pairs, accuracy {} at threshold {}", r.pairs, r.optimal.accuracy, r.optimal.theta);
        }
        Command::Retrieve {
            embeddings,
            probes,
            gallery,
            fusion,
            lambda,
            out,
        } => {
            let fusion = match fusion {
                FusionArg::Score => RetrievalFusion::Score,
                FusionArg::Feature => RetrievalFusion::Feature,
                FusionArg::Ta => RetrievalFusion::Ta,
            };
            let r = commands::retrieve(&commands::RetrieveArgs {
                embeddings,
                probes,
                gallery,
                fusion,
                lambda,
                out,
            })?;
            println!("{} probes against {} gallery templates, MAP {}", r.probes, r.gallery, r.map);
        }
        Command::BuildPairs {
            families,
            seed,
            folds,
            types,
            same_subject,
            out,
        } => {
            let n = commands::build_pairs(&commands::BuildPairsArgs {
                families,
                seed,
                folds,
                types,
                same_subject,
                out,
            })?;
            println!("wrote {n} pairs");
        }
        Command::Debias {
            features,
            lambda,
            epochs,
            lr,
            batch_size,
            seed,
            probe_hidden,
            probe_epochs,
            probe_folds,
            out,
        } => {
            let probe = ProbeOptions {
                hidden: probe_hidden,
                epochs: probe_epochs,
                folds: probe_folds,
                seed,
                ..ProbeOptions::default()
            };
            let r = commands::debias(&commands::DebiasArgs {
                features,
                lambda,
                epochs,
                lr,
                batch_size,
                seed,
                probe,
                out,
            })?;
            println!("subgroup leakage {} -> {} (chance {})", r.leakage_before, r.leakage_after, r.chance);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
