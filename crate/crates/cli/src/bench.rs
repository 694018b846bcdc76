//! In-process benchmarks over in-memory channels: the oblivious switch on
//! its own, the level-1 two-party join, and the level-2 server-aided join,
//! each across problem sizes and optional bandwidth caps.

use std::path::Path;
use std::time::Instant;

use psa_core::crypto::RandomSource;
use psa_core::osn::{self, MosnParams, MosnStats};
use psa_core::ot::{DealerSeed, OtMode};
use psa_core::perm::{random_permutation, Injection};
use psa_core::psa::{self, Dataset, Level1Config, Level2Config};
use psa_core::transport::{memory_pair, Channel, MemoryChannel, ThrottledChannel};

use crate::{BenchTarget, CliError};

struct BenchRow {
    size: u64,
    bandwidth: u64,
    c: usize,
    online_ms: f64,
    offline_ms: f64,
    comm_mb: f64,
    wall_ms: f64,
}

fn throttled(ch: MemoryChannel, bandwidth: u64) -> Box<dyn Channel> {
    if bandwidth == 0 {
        Box::new(ch)
    } else {
        Box::new(ThrottledChannel::new(ch, bandwidth))
    }
}

fn comm_mb(channels: &[&dyn Channel]) -> f64 {
    let total: u64 = channels
        .iter()
        .map(|c| c.stats().bytes_sent + c.stats().bytes_received)
        .sum();
    total as f64 / 1e6
}

fn rng(tag: u64) -> RandomSource {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&tag.to_le_bytes());
    seed[8] = 0xBE;
    RandomSource::from_seed(seed)
}

fn bench_osn(m: u64, bandwidth: u64) -> Result<BenchRow, CliError> {
    let m = m as usize;
    let params = MosnParams {
        m,
        ell_bytes: 16,
        mode: OtMode::Dealer,
    };
    let dealer = DealerSeed([0xB1; 32]);
    let (ch_r, ch_s) = memory_pair();
    let mut ch_r = throttled(ch_r, bandwidth);
    let mut ch_s = throttled(ch_s, bandwidth);
    let sender = std::thread::spawn(move || -> Result<_, CliError> {
        let mut r = rng(m as u64);
        let u: Vec<Vec<u8>> = (0..m).map(|_| r.bytes(16)).collect();
        let st = osn::mosn_sender_offline(params, Some(&DealerSeed([0xB1; 32])), rng(1), &mut *ch_s)?;
        let (_, stats) = osn::mosn_sender_online(st, &u, &mut *ch_s)?;
        Ok((stats, ch_s))
    });
    let start = Instant::now();
    let st = osn::mosn_receiver_offline(params, Some(&dealer), rng(2), &mut *ch_r)?;
    let c = m / 2;
    let mut r = rng(3);
    let targets = random_permutation(m, &mut r).map_err(|e| CliError::Usage(e.to_string()))?;
    let pi = Injection::from_map(targets.as_slice()[..c].to_vec(), m)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let (_, recv_stats) = osn::mosn_receiver_online(st, &pi, &mut *ch_r)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (_, ch_s) = sender.join().expect("sender thread")?;
    Ok(BenchRow {
        size: m as u64,
        bandwidth,
        c,
        online_ms: recv_stats.online.wall_ms,
        offline_ms: recv_stats.offline.wall_ms,
        comm_mb: comm_mb(&[&*ch_r, &*ch_s]),
        wall_ms,
    })
}

fn gen_pair(n: usize, alpha: f64, width: usize, tag: u64) -> (Dataset, Dataset) {
    let shared = (alpha * n as f64) as usize;
    let mut r = rng(tag);
    let mk = |prefix: char, i: usize, shared: usize, r: &mut RandomSource| {
        let id = if i < shared {
            format!("c{i:08}")
        } else {
            format!("{prefix}{i:08}")
        };
        (id.into_bytes(), r.bytes(width))
    };
    let d1 = Dataset::new(
        width,
        (0..n).map(|i| mk('a', i, shared, &mut r)).collect(),
    )
    .expect("generated dataset");
    let d2 = Dataset::new(
        width,
        (0..n).map(|i| mk('b', i, shared, &mut r)).collect(),
    )
    .expect("generated dataset");
    (d1, d2)
}

fn bench_psi(n: u64, bandwidth: u64) -> Result<BenchRow, CliError> {
    let n = n as usize;
    let (d1, d2) = gen_pair(n, 0.5, 8, n as u64);
    let cfg = Level1Config::new(8, 8, OtMode::Dealer);
    let dealer = DealerSeed([0xB2; 32]);
    let (ch1, ch2) = memory_pair();
    let mut ch1 = throttled(ch1, bandwidth);
    let mut ch2 = throttled(ch2, bandwidth);
    let p2 = std::thread::spawn(move || -> Result<_, CliError> {
        let mut r = rng(11);
        let out = psa::psa_level1_p2(&d2, &cfg, &DealerSeed([0xB2; 32]), &mut *ch2, &mut r)?;
        Ok((out, ch2))
    });
    let start = Instant::now();
    let mut r = rng(12);
    let out = psa::psa_level1_p1(&d1, &cfg, &dealer, &mut *ch1, &mut r)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (_, ch2) = p2.join().expect("p2 thread")?;
    Ok(BenchRow {
        size: n as u64,
        bandwidth,
        c: out.intersection.len(),
        online_ms: out.mosn.online.wall_ms,
        offline_ms: out.mosn.offline.wall_ms,
        comm_mb: comm_mb(&[&*ch1, &*ch2]),
        wall_ms,
    })
}

fn bench_psa(n: u64, bandwidth: u64) -> Result<BenchRow, CliError> {
    let n_sz = n as usize;
    let (d1, d2) = gen_pair(n_sz, 0.5, 8, n);
    let cfg = Level2Config::new(8, 8, OtMode::Dealer);
    let s1 = DealerSeed([0xB3; 32]);
    let s2 = DealerSeed([0xB4; 32]);
    let (p1_p2, p2_p1) = memory_pair();
    let (p1_sv, sv_p1) = memory_pair();
    let (p2_sv, sv_p2) = memory_pair();
    let mut p1_p2 = throttled(p1_p2, bandwidth);
    let mut p2_p1 = throttled(p2_p1, bandwidth);
    let mut p1_sv = throttled(p1_sv, bandwidth);
    let mut sv_p1 = throttled(sv_p1, bandwidth);
    let mut p2_sv = throttled(p2_sv, bandwidth);
    let mut sv_p2 = throttled(sv_p2, bandwidth);
    let h1 = std::thread::spawn(move || -> Result<MosnStats, CliError> {
        let mut r = rng(21);
        let out =
            psa::psa_level2_p1(&d1, &cfg, Some(&DealerSeed([0xB3; 32])), &mut *p1_p2, &mut *p1_sv, &mut r)?;
        Ok(out.mosn)
    });
    let h2 = std::thread::spawn(move || -> Result<(), CliError> {
        let mut r = rng(22);
        psa::psa_level2_p2(&d2, &cfg, Some(&DealerSeed([0xB4; 32])), &mut *p2_p1, &mut *p2_sv, &mut r)?;
        Ok(())
    });
    let start = Instant::now();
    let mut r = rng(23);
    let out = psa::psa_level2_server(&cfg, Some(&s1), Some(&s2), &mut *sv_p1, &mut *sv_p2, &mut r)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let p1_mosn = h1.join().expect("p1 thread")?;
    h2.join().expect("p2 thread")?;
    Ok(BenchRow {
        size: n,
        bandwidth,
        c: out.cardinality,
        online_ms: out.mosn_u.online.wall_ms + out.mosn_v.online.wall_ms + p1_mosn.online.wall_ms,
        offline_ms: out.mosn_u.offline.wall_ms + out.mosn_v.offline.wall_ms + p1_mosn.offline.wall_ms,
        comm_mb: comm_mb(&[&*sv_p1, &*sv_p2]),
        wall_ms,
    })
}

pub fn cmd_bench(
    target: BenchTarget,
    sizes: &[u64],
    bandwidths: &[u64],
    csv_out: Option<&Path>,
) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for &size in sizes {
        if size < 2 {
            return Err(CliError::Usage("sizes must be at least 2".into()));
        }
        for &bw in bandwidths {
            let row = match target {
                BenchTarget::Osn => bench_osn(size, bw)?,
                BenchTarget::Psi => bench_psi(size, bw)?,
                BenchTarget::Psa => bench_psa(size, bw)?,
            };
            rows.push(row);
        }
    }

    println!(
        "{:>10} {:>14} {:>8} {:>12} {:>12} {:>10} {:>12}",
        "size", "bw_bits/s", "c", "online_ms", "offline_ms", "comm_MB", "wall_ms"
    );
    for r in &rows {
        println!(
            "{:>10} {:>14} {:>8} {:>12.1} {:>12.1} {:>10.3} {:>12.1}",
            r.size, r.bandwidth, r.c, r.online_ms, r.offline_ms, r.comm_mb, r.wall_ms
        );
    }

    if let Some(path) = csv_out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["size", "bw_bits_per_s", "c", "online_ms", "offline_ms", "comm_mb", "wall_ms"])?;
        for r in &rows {
            w.write_record([
                r.size.to_string(),
                r.bandwidth.to_string(),
                r.c.to_string(),
                format!("{:.3}", r.online_ms),
                format!("{:.3}", r.offline_ms),
                format!("{:.6}", r.comm_mb),
                format!("{:.3}", r.wall_ms),
            ])?;
        }
        w.flush().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}
