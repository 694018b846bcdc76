//! Operator front end for the private set alignment toolkit: dataset
//! generation, protocol execution per role, share reveal/verify, cost
//! estimation, and benchmark tables.
//!
//! Exit codes: 0 on success, 1 on usage/file errors, 2 on protocol aborts
//! (and failed verification). Set `PSA_LOG=info|debug` for progress logs.

mod bench;
mod files;
mod run;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use psa_core::crypto::RandomSource;
use psa_core::hecost::{estimate_he, HeCostModel, MIB};
use psa_core::perm::random_permutation;
use psa_core::psa::{plain_inner_join, Dataset, PsaError};
use psa_core::transport::TransportError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Protocol(String),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Usage(e.to_string())
    }
}

impl From<PsaError> for CliError {
    fn from(e: PsaError) -> CliError {
        CliError::Protocol(e.to_string())
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> CliError {
        CliError::Protocol(e.to_string())
    }
}

impl From<psa_core::osn::OsnError> for CliError {
    fn from(e: psa_core::osn::OsnError) -> CliError {
        CliError::Protocol(e.to_string())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Role {
    P1,
    P2,
    Server,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OtModeArg {
    Group,
    Dealer,
}

impl OtModeArg {
    pub fn to_core(self) -> psa_core::ot::OtMode {
        match self {
            OtModeArg::Group => psa_core::ot::OtMode::Group,
            OtModeArg::Dealer => psa_core::ot::OtMode::Dealer,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchTarget {
    Osn,
    Psi,
    Psa,
}

#[derive(Parser)]
#[command(name = "psa-cli", version, about = "Private set alignment toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
pub struct RunArgs {
    /// Which party this process plays.
    #[arg(long, value_enum)]
    pub role: Role,
    /// Privacy level: 1 (two-party, P1 learns the intersection) or 2
    /// (three-party with an oblivious server).
    #[arg(long)]
    pub level: u8,
    /// Input dataset CSV (`id,attr_hex`); owners only.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// P1-side attribute width in bytes; inferred from the dataset for P1.
    #[arg(long)]
    pub u_width: Option<usize>,
    /// P2-side attribute width in bytes; inferred from the dataset for P2.
    #[arg(long)]
    pub v_width: Option<usize>,
    /// Address to listen on (level-1 P2; level-2 P2 listens for P1).
    #[arg(long)]
    pub listen: Option<String>,
    /// Peer address to connect to (level-1 P1; level-2 P1 connects to P2).
    #[arg(long)]
    pub connect: Option<String>,
    /// Server address (level-2 owners).
    #[arg(long)]
    pub connect_server: Option<String>,
    /// Server listen address for P1's connection (level-2 server).
    #[arg(long)]
    pub listen_p1: Option<String>,
    /// Server listen address for P2's connection (level-2 server).
    #[arg(long)]
    pub listen_p2: Option<String>,
    /// Oblivious-transfer realization.
    #[arg(long, value_enum, default_value = "dealer")]
    pub ot_mode: OtModeArg,
    /// Pre-provisioned 32-byte dealer seed (hex), shared out of band.
    #[arg(long)]
    pub dealer_seed: Option<String>,
    /// Dealer seed shared with P1 (server role, dealer mode).
    #[arg(long)]
    pub dealer_seed_p1: Option<String>,
    /// Dealer seed shared with P2 (server role, dealer mode).
    #[arg(long)]
    pub dealer_seed_p2: Option<String>,
    /// Fixed 32-byte RNG seed (hex); requires --test-deterministic.
    #[arg(long)]
    pub seed: Option<String>,
    /// Acknowledge that a fixed RNG seed destroys all security guarantees.
    #[arg(long)]
    pub test_deterministic: bool,
    /// Outbound bandwidth cap in bits per second.
    #[arg(long)]
    pub bandwidth_bits: Option<u64>,
    /// Where to write this party's share file.
    #[arg(long, default_value = "shares.csv")]
    pub shares_out: PathBuf,
    /// Where to write the revealed intersection ids (level-1 P1 only).
    #[arg(long)]
    pub intersection_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a pair of datasets with a controlled ID overlap.
    Gen {
        /// Rows in the first dataset.
        #[arg(long)]
        n: usize,
        /// Rows in the second dataset.
        #[arg(long)]
        m: usize,
        /// Fraction of min(n, m) ids shared by both datasets.
        #[arg(long)]
        alpha: f64,
        /// Attribute width in bytes (both datasets).
        #[arg(long, default_value_t = 8)]
        attr_width: usize,
        /// Deterministic generation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output path for the first dataset.
        #[arg(long)]
        out1: PathBuf,
        /// Output path for the second dataset.
        #[arg(long)]
        out2: PathBuf,
    },
    /// Execute one protocol role; prints a JSON stats line on success.
    Run(RunArgs),
    /// XOR two share files into a plaintext join file.
    Reveal {
        #[arg(long)]
        shares_p1: PathBuf,
        #[arg(long)]
        shares_p2: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a revealed join against the two source datasets.
    Verify {
        #[arg(long)]
        join: PathBuf,
        #[arg(long)]
        dataset1: PathBuf,
        #[arg(long)]
        dataset2: PathBuf,
    },
    /// Cost model for the homomorphic-encryption baseline.
    EstimateHe {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        alpha: f64,
        /// Link bandwidth in bits per second.
        #[arg(long, default_value_t = 1_000_000_000)]
        bandwidth_bits: u64,
    },
    /// In-process benchmarks; prints a text table, optionally writes CSV.
    Bench {
        #[arg(long, value_enum)]
        target: BenchTarget,
        /// Comma-separated problem sizes.
        #[arg(long, default_value = "1024,4096,16384")]
        sizes: String,
        /// Comma-separated bandwidth caps in bits/s (0 = unlimited).
        #[arg(long, default_value = "0")]
        bandwidths: String,
        /// Also write the table as CSV to this path.
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
}

pub fn parse_seed32(hex_str: &str, what: &str) -> Result<[u8; 32], CliError> {
    let bytes = hex::decode(hex_str)
        .map_err(|e| CliError::Usage(format!("{what}: invalid hex: {e}")))?;
    bytes
        .try_into()
        .map_err(|_| CliError::Usage(format!("{what}: expected 32 bytes of hex")))
}

fn cmd_gen(
    n: usize,
    m: usize,
    alpha: f64,
    attr_width: usize,
    seed: Option<u64>,
    out1: &PathBuf,
    out2: &PathBuf,
) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CliError::Usage("alpha must be in [0, 1]".into()));
    }
    if n == 0 || m == 0 || attr_width == 0 {
        return Err(CliError::Usage("n, m, and attr-width must be positive".into()));
    }
    let mut rng = match seed {
        Some(s) => {
            let mut bytes = [0u8; 32];
            bytes[..8].copy_from_slice(&s.to_le_bytes());
            RandomSource::from_seed(bytes)
        }
        None => RandomSource::from_entropy(),
    };
    let shared = (alpha * n.min(m) as f64).floor() as usize;
    let mut build = |rows: usize, tag: char| -> Result<Dataset, CliError> {
        let mut records: Vec<(Vec<u8>, Vec<u8>)> = (0..rows)
            .map(|i| {
                let id = if i < shared {
                    format!("c{i:08}")
                } else {
                    format!("{tag}{i:08}")
                };
                (id.into_bytes(), rng.bytes(attr_width))
            })
            .collect();
        let order = random_permutation(rows, &mut rng)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        records = (0..rows).map(|i| records[order.apply(i)].clone()).collect();
        Dataset::new(attr_width, records).map_err(CliError::from)
    };
    let d1 = build(n, 'a')?;
    let d2 = build(m, 'b')?;
    files::write_dataset(out1, &d1)?;
    files::write_dataset(out2, &d2)?;
    log::info!("wrote {} and {} ({} shared ids)", out1.display(), out2.display(), shared);
    Ok(())
}

fn cmd_reveal(p1: &PathBuf, p2: &PathBuf, out: &PathBuf) -> Result<(), CliError> {
    use psa_core::psa::{reveal_join, ShareRole};
    let a = files::read_shares(p1, ShareRole::P1)?;
    let b = files::read_shares(p2, ShareRole::P2)?;
    if a.u.rows.len() != b.u.rows.len()
        || a.u.width_bytes != b.u.width_bytes
        || a.v.width_bytes != b.v.width_bytes
    {
        return Err(CliError::Usage("share files have mismatched shapes".into()));
    }
    let rows = reveal_join(&a, &b);
    files::write_join(out, &rows)?;
    println!("revealed {} rows to {}", rows.len(), out.display());
    Ok(())
}

fn multiset(rows: &[(Vec<u8>, Vec<u8>)]) -> BTreeMap<(Vec<u8>, Vec<u8>), usize> {
    let mut counts = BTreeMap::new();
    for row in rows {
        *counts.entry(row.clone()).or_insert(0) += 1;
    }
    counts
}

fn cmd_verify(join: &PathBuf, ds1: &PathBuf, ds2: &PathBuf) -> Result<(), CliError> {
    let revealed = files::read_join(join)?;
    let d1 = files::read_dataset(ds1)?;
    let d2 = files::read_dataset(ds2)?;
    let oracle: Vec<(Vec<u8>, Vec<u8>)> = plain_inner_join(&d1, &d2)
        .into_iter()
        .map(|(_, u, v)| (u, v))
        .collect();
    if multiset(&revealed) == multiset(&oracle) {
        println!("verify: PASS (c={})", oracle.len());
        Ok(())
    } else {
        Err(CliError::Protocol(format!(
            "verify: FAIL (revealed {} rows, expected {})",
            revealed.len(),
            oracle.len()
        )))
    }
}

fn cmd_estimate_he(n: u64, alpha: f64, bandwidth_bits: u64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CliError::Usage("alpha must be in [0, 1]".into()));
    }
    if bandwidth_bits == 0 {
        return Err(CliError::Usage("bandwidth must be positive".into()));
    }
    let est = estimate_he(n, alpha, bandwidth_bits, &HeCostModel::default());
    println!(
        "{{\"comm_mib\":{},\"runtime_s\":{:.1}}}",
        est.comm_bytes as f64 / MIB,
        est.runtime_s
    );
    Ok(())
}

fn parse_list(s: &str, what: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<u64>()
                .map_err(|e| CliError::Usage(format!("{what} `{p}`: {e}")))
        })
        .collect()
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen {
            n,
            m,
            alpha,
            attr_width,
            seed,
            out1,
            out2,
        } => cmd_gen(n, m, alpha, attr_width, seed, &out1, &out2),
        Command::Run(args) => run::cmd_run(&args),
        Command::Reveal {
            shares_p1,
            shares_p2,
            out,
        } => cmd_reveal(&shares_p1, &shares_p2, &out),
        Command::Verify {
            join,
            dataset1,
            dataset2,
        } => cmd_verify(&join, &dataset1, &dataset2),
        Command::EstimateHe {
            n,
            alpha,
            bandwidth_bits,
        } => cmd_estimate_he(n, alpha, bandwidth_bits),
        Command::Bench {
            target,
            sizes,
            bandwidths,
            csv_out,
        } => {
            let sizes = parse_list(&sizes, "size")?;
            let bandwidths = parse_list(&bandwidths, "bandwidth")?;
            bench::cmd_bench(target, &sizes, &bandwidths, csv_out.as_deref())
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PSA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Protocol(msg)) => {
            eprintln!("protocol abort: {msg}");
            std::process::exit(2);
        }
    }
}
