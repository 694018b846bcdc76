//! The `run` subcommand: one protocol role over TCP, with optional
//! bandwidth throttling and a JSON stats line on stdout.

use std::time::Duration;

use psa_core::crypto::RandomSource;
use psa_core::osn::MosnStats;
use psa_core::ot::DealerSeed;
use psa_core::psa::{self, Level1Config, Level2Config};
use psa_core::transport::{Channel, TcpChannel, ThrottledChannel};

use crate::files;
use crate::{parse_seed32, CliError, Role, RunArgs};

const CONNECT_TIMEOUT: Duration = Duration::from_secs(30);

fn wrap(ch: TcpChannel, bandwidth_bits: Option<u64>) -> Box<dyn Channel> {
    match bandwidth_bits {
        Some(rate) => Box::new(ThrottledChannel::new(ch, rate)),
        None => Box::new(ch),
    }
}

fn listen(addr: Option<&String>, flag: &str, bw: Option<u64>) -> Result<Box<dyn Channel>, CliError> {
    let addr = addr.ok_or_else(|| CliError::Usage(format!("{flag} is required for this role")))?;
    log::info!("listening on {addr}");
    Ok(wrap(TcpChannel::accept_one(addr.as_str())?, bw))
}

fn connect(addr: Option<&String>, flag: &str, bw: Option<u64>) -> Result<Box<dyn Channel>, CliError> {
    let addr = addr.ok_or_else(|| CliError::Usage(format!("{flag} is required for this role")))?;
    log::info!("connecting to {addr}");
    Ok(wrap(TcpChannel::connect_retry(addr.as_str(), CONNECT_TIMEOUT)?, bw))
}

fn dealer_seed(arg: Option<&String>, flag: &str) -> Result<DealerSeed, CliError> {
    let hex_str =
        arg.ok_or_else(|| CliError::Usage(format!("{flag} is required for this configuration")))?;
    Ok(DealerSeed(parse_seed32(hex_str, flag)?))
}

fn make_rng(args: &RunArgs) -> Result<RandomSource, CliError> {
    match &args.seed {
        None => Ok(RandomSource::from_entropy()),
        Some(hex_str) => {
            if !args.test_deterministic {
                return Err(CliError::Usage(
                    "--seed is test-only; pass --test-deterministic to acknowledge".into(),
                ));
            }
            Ok(RandomSource::from_seed(parse_seed32(hex_str, "--seed")?))
        }
    }
}

fn own_dataset(args: &RunArgs) -> Result<psa_core::psa::Dataset, CliError> {
    let path = args
        .dataset
        .as_ref()
        .ok_or_else(|| CliError::Usage("--dataset is required for owner roles".into()))?;
    files::read_dataset(path)
}

/// Resolve a width that may come from the flag, the local dataset, or both
/// (in which case they must agree).
fn resolve_width(flag_val: Option<usize>, local: Option<usize>, flag: &str) -> Result<usize, CliError> {
    match (flag_val, local) {
        (Some(f), Some(l)) if f != l => Err(CliError::Usage(format!(
            "{flag}={f} contradicts the dataset's attribute width {l}"
        ))),
        (_, Some(l)) => Ok(l),
        (Some(f), None) => Ok(f),
        (None, None) => Err(CliError::Usage(format!("{flag} is required for this role"))),
    }
}

fn print_stats(c: usize, channels: &[&dyn Channel], mosn: &[&MosnStats]) {
    let bytes_sent: u64 = channels.iter().map(|c| c.stats().bytes_sent).sum();
    let bytes_received: u64 = channels.iter().map(|c| c.stats().bytes_received).sum();
    let online_ms: f64 = mosn.iter().map(|s| s.online.wall_ms).sum();
    let offline_ms: f64 = mosn.iter().map(|s| s.offline.wall_ms).sum();
    println!(
        "{{\"c\":{c},\"bytes_sent\":{bytes_sent},\"bytes_received\":{bytes_received},\
         \"online_ms\":{online_ms:.3},\"offline_ms\":{offline_ms:.3}}}"
    );
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    match args.level {
        1 => run_level1(args),
        2 => run_level2(args),
        other => Err(CliError::Usage(format!("--level must be 1 or 2, got {other}"))),
    }
}

fn run_level1(args: &RunArgs) -> Result<(), CliError> {
    if args.connect_server.is_some() || args.listen_p1.is_some() || args.listen_p2.is_some() {
        return Err(CliError::Usage(
            "level 1 uses exactly two endpoints (--listen / --connect)".into(),
        ));
    }
    let mut rng = make_rng(args)?;
    let seed = dealer_seed(args.dealer_seed.as_ref(), "--dealer-seed")?;
    match args.role {
        Role::P1 => {
            let ds = own_dataset(args)?;
            let u_width = resolve_width(args.u_width, Some(ds.attr_width()), "--u-width")?;
            let v_width = resolve_width(args.v_width, None, "--v-width")?;
            let cfg = Level1Config::new(u_width, v_width, args.ot_mode.to_core());
            let mut chan = connect(args.connect.as_ref(), "--connect", args.bandwidth_bits)?;
            let out = psa::psa_level1_p1(&ds, &cfg, &seed, &mut *chan, &mut rng)?;
            files::write_shares(&args.shares_out, &out.shares)?;
            let inter_path = args
                .intersection_out
                .clone()
                .unwrap_or_else(|| "intersection.txt".into());
            files::write_id_list(&inter_path, &out.intersection)?;
            log::info!("shares -> {}, intersection -> {}", args.shares_out.display(), inter_path.display());
            print_stats(out.intersection.len(), &[&*chan], &[&out.mosn]);
        }
        Role::P2 => {
            let ds = own_dataset(args)?;
            let u_width = resolve_width(args.u_width, None, "--u-width")?;
            let v_width = resolve_width(args.v_width, Some(ds.attr_width()), "--v-width")?;
            let cfg = Level1Config::new(u_width, v_width, args.ot_mode.to_core());
            let mut chan = listen(args.listen.as_ref(), "--listen", args.bandwidth_bits)?;
            let out = psa::psa_level1_p2(&ds, &cfg, &seed, &mut *chan, &mut rng)?;
            files::write_shares(&args.shares_out, &out.shares)?;
            print_stats(out.cardinality, &[&*chan], &[&out.mosn]);
        }
        Role::Server => {
            return Err(CliError::Usage("level 1 has no server role".into()));
        }
    }
    Ok(())
}

fn run_level2(args: &RunArgs) -> Result<(), CliError> {
    let mut rng = make_rng(args)?;
    let mode = args.ot_mode.to_core();
    let use_dealer = matches!(mode, psa_core::ot::OtMode::Dealer);
    match args.role {
        Role::P1 => {
            let ds = own_dataset(args)?;
            let u_width = resolve_width(args.u_width, Some(ds.attr_width()), "--u-width")?;
            let v_width = resolve_width(args.v_width, None, "--v-width")?;
            let cfg = Level2Config::new(u_width, v_width, mode);
            let seed = use_dealer
                .then(|| dealer_seed(args.dealer_seed.as_ref(), "--dealer-seed"))
                .transpose()?;
            let mut peer = connect(args.connect.as_ref(), "--connect", args.bandwidth_bits)?;
            let mut server =
                connect(args.connect_server.as_ref(), "--connect-server", args.bandwidth_bits)?;
            let out =
                psa::psa_level2_p1(&ds, &cfg, seed.as_ref(), &mut *peer, &mut *server, &mut rng)?;
            files::write_shares(&args.shares_out, &out.shares)?;
            print_stats(out.cardinality, &[&*peer, &*server], &[&out.mosn]);
        }
        Role::P2 => {
            let ds = own_dataset(args)?;
            let u_width = resolve_width(args.u_width, None, "--u-width")?;
            let v_width = resolve_width(args.v_width, Some(ds.attr_width()), "--v-width")?;
            let cfg = Level2Config::new(u_width, v_width, mode);
            let seed = use_dealer
                .then(|| dealer_seed(args.dealer_seed.as_ref(), "--dealer-seed"))
                .transpose()?;
            let mut peer = listen(args.listen.as_ref(), "--listen", args.bandwidth_bits)?;
            let mut server =
                connect(args.connect_server.as_ref(), "--connect-server", args.bandwidth_bits)?;
            let out =
                psa::psa_level2_p2(&ds, &cfg, seed.as_ref(), &mut *peer, &mut *server, &mut rng)?;
            files::write_shares(&args.shares_out, &out.shares)?;
            print_stats(out.cardinality, &[&*peer, &*server], &[&out.mosn]);
        }
        Role::Server => {
            if args.dataset.is_some() {
                return Err(CliError::Usage("the server holds no dataset".into()));
            }
            let u_width = resolve_width(args.u_width, None, "--u-width")?;
            let v_width = resolve_width(args.v_width, None, "--v-width")?;
            let cfg = Level2Config::new(u_width, v_width, mode);
            let s1 = use_dealer
                .then(|| dealer_seed(args.dealer_seed_p1.as_ref(), "--dealer-seed-p1"))
                .transpose()?;
            let s2 = use_dealer
                .then(|| dealer_seed(args.dealer_seed_p2.as_ref(), "--dealer-seed-p2"))
                .transpose()?;
            let mut ch1 = listen(args.listen_p1.as_ref(), "--listen-p1", args.bandwidth_bits)?;
            let mut ch2 = listen(args.listen_p2.as_ref(), "--listen-p2", args.bandwidth_bits)?;
            let out = psa::psa_level2_server(
                &cfg,
                s1.as_ref(),
                s2.as_ref(),
                &mut *ch1,
                &mut *ch2,
                &mut rng,
            )?;
            log::info!("join cardinality {} over n={} m={}", out.cardinality, out.n, out.m);
            print_stats(out.cardinality, &[&*ch1, &*ch2], &[&out.mosn_u, &out.mosn_v]);
        }
    }
    Ok(())
}
