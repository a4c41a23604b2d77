//! `puf`: provision a key/lock pair, initialize it, run challenge
//! sessions, optionally probe it with a manufacturer-rebuilt key, persist
//! device state.
//!
//! A fresh ultra/strong pair is initialized before the counted sessions:
//! the manufacturer key (generation 0) is verified once and replaced by an
//! exchanged key (generation 1). Ultra pairs then renew on every session,
//! so three sessions walk the generation 1 -> 2 -> 3 -> 4; strong pairs
//! keep their exchanged key; simple pairs skip initialization and keep the
//! generation-0 manufacturer key for life.
//!
//! Artifact formats:
//! * text — JSON Lines: header record, an `initialize` record (ultra and
//!   strong only), one `session` record per session, an optional `probe`
//!   record, one `result` record.
//! * csv  — columns `kind,index,verdict,generation,authentication_bits,`
//!   `secure_bits,renewal_aborted,recovered_pending,expected,pass` (the
//!   `expected` column is only filled on the probe row).
//!
//! Gate (exit 0): initialization and every session accepted, the clone
//! probe (if any) matched its expected verdict, and persisted state (if
//! any) reloads identically.

use std::path::Path;

use kljn_puf_core::puf::{
    challenge_simple, challenge_strong, challenge_ultra, load_device, open_pair, provision,
    save_device, ChallengeSession, Phase, ProtocolParams, PufDevice, SessionVerdict, Variant,
};
use kljn_puf_core::seed::derive_seed;
use kljn_puf_core::transport::open_session;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::{output, PufArgs};

fn verdict_str(v: SessionVerdict) -> &'static str {
    match v {
        SessionVerdict::Accept => "accept",
        SessionVerdict::Reject => "reject",
        SessionVerdict::Aborted => "aborted",
    }
}

struct SessionRow {
    index: u64,
    verdict: SessionVerdict,
    generation: u32,
    session: ChallengeSession,
}

pub fn run(cfg: &ExperimentConfig, args: &PufArgs) -> Result<bool, String> {
    let mut p = cfg.puf.clone();
    if let Some(x) = args.variant {
        p.variant = x;
    }
    if let Some(x) = args.n_bits {
        p.n_bits = x;
    }
    if let Some(x) = args.m {
        p.m = x;
    }
    if let Some(x) = args.sessions {
        p.sessions = x;
    }
    if let Some(x) = args.samples_per_cycle {
        p.samples_per_cycle = x;
    }
    if args.clone_probe {
        p.clone_probe = true;
    }
    if args.state_dir.is_some() {
        p.state_dir = args.state_dir.clone();
    }

    let variant: Variant = p.variant.into();
    let mut params = ProtocolParams { m: p.m, ..ProtocolParams::default() };
    params.kljn.noise.samples_per_cycle = p.samples_per_cycle;
    params.validate().map_err(|e| e.to_string())?;

    let manufacturer_seed = derive_seed(cfg.seed, 0, "cli.puf.manufacturer");
    let pair = provision(variant, p.n_bits, manufacturer_seed).map_err(|e| e.to_string())?;
    let (mut lock, mut key) = (pair.lock, pair.key);

    // Ultra/strong pairs leave the factory key behind before any counted
    // session; simple pairs have no such step. `open_pair` on a provisioned
    // pair runs exactly the initialization.
    let init_row = if variant == Variant::Simple {
        None
    } else {
        let session = open_pair(&mut lock, &mut key, &params, derive_seed(cfg.seed, 0, "cli.puf.init"))
            .map_err(|e| e.to_string())?;
        Some(SessionRow {
            index: 0,
            verdict: session.verdict,
            generation: lock.stored.generation,
            session,
        })
    };
    let init_ok = init_row.as_ref().map_or(true, |r| r.verdict == SessionVerdict::Accept);

    let mut rows = Vec::new();
    let mut all_accept = true;
    if init_ok {
        for s in 0..p.sessions {
            let session =
                open_pair(&mut lock, &mut key, &params, derive_seed(cfg.seed, s, "cli.puf.session"))
                    .map_err(|e| e.to_string())?;
            all_accept &= session.verdict == SessionVerdict::Accept;
            rows.push(SessionRow {
                index: s + 1,
                verdict: session.verdict,
                generation: lock.stored.generation,
                session,
            });
        }
    }

    // The manufacturer's replay: rebuild the key from provisioning records
    // and present it. Counterfeit firmware ignores lifecycle phases, so the
    // replica is forced active. Initialized ultra/strong pairs must reject
    // it; simple pairs, whose secret never leaves the factory value, accept.
    // Skipped when initialization failed: the gate is already lost and the
    // lock still holds the factory key, so the probe would prove nothing.
    let probe = if p.clone_probe && (variant == Variant::Simple || lock.phase == Phase::Active) {
        let mut replica = provision(variant, p.n_bits, manufacturer_seed)
            .map_err(|e| e.to_string())?
            .key;
        replica.phase = Phase::Active;
        let (mut le, mut ke) = open_session(derive_seed(cfg.seed, 1, "cli.puf.probe"));
        let seed = derive_seed(cfg.seed, 2, "cli.puf.probe");
        let session = match variant {
            Variant::Ultra => challenge_ultra(&mut lock, &mut replica, &mut le, &mut ke, &params, seed),
            Variant::Strong => challenge_strong(&mut lock, &mut replica, &mut le, &mut ke, &params, seed),
            Variant::Simple => challenge_simple(&mut lock, &mut replica, &mut le, &mut ke, &params, seed),
        }
        .map_err(|e| e.to_string())?;
        let expected =
            if variant == Variant::Simple { SessionVerdict::Accept } else { SessionVerdict::Reject };
        Some((session.verdict, expected, session.verdict == expected))
    } else {
        None
    };
    let probe_ok = probe.map_or(true, |(_, _, ok)| ok);

    // Persist and immediately reload: the state files must round-trip.
    let mut storage_ok = true;
    if let Some(dir) = &p.state_dir {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        storage_ok = persist_and_check(&lock, &dir.join("lock.json"))?
            && persist_and_check(&key, &dir.join("key.json"))?;
    }

    let all_pass = init_ok && all_accept && probe_ok && storage_ok;
    let variant_name = match variant {
        Variant::Ultra => "ultra",
        Variant::Strong => "strong",
        Variant::Simple => "simple",
    };

    let artifact = match cfg.format {
        OutputFormat::Text => {
            let mut s = output::jsonl_header(
                "puf",
                cfg.seed,
                serde_json::json!({
                    "variant": variant_name,
                    "n_bits": p.n_bits,
                    "m": p.m,
                    "sessions": p.sessions,
                    "clone_probe": p.clone_probe,
                    "manufacturer_generation": 0,
                }),
            );
            s.push('\n');
            for r in init_row.iter().chain(&rows) {
                s.push_str(
                    &serde_json::json!({
                        "record": if r.index == 0 { "initialize" } else { "session" },
                        "index": r.index,
                        "verdict": verdict_str(r.verdict),
                        "generation": r.generation,
                        "authentication_bits": r.session.authentication_bits_consumed,
                        "secure_bits": r.session.secure_bits_consumed,
                        "renewal_aborted": r.session.renewal_aborted,
                        "recovered_pending": r.session.recovered_pending,
                    })
                    .to_string(),
                );
                s.push('\n');
            }
            if let Some((got, expected, ok)) = probe {
                s.push_str(
                    &serde_json::json!({
                        "record": "probe",
                        "verdict": verdict_str(got),
                        "expected": verdict_str(expected),
                        "pass": ok,
                    })
                    .to_string(),
                );
                s.push('\n');
            }
            s.push_str(&serde_json::json!({ "record": "result", "all_pass": all_pass }).to_string());
            s.push('\n');
            s
        }
        OutputFormat::Csv => {
            let mut s = String::from(
                "kind,index,verdict,generation,authentication_bits,secure_bits,renewal_aborted,recovered_pending,expected,pass\n",
            );
            for r in init_row.iter().chain(&rows) {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},,{}\n",
                    if r.index == 0 { "initialize" } else { "session" },
                    r.index,
                    verdict_str(r.verdict),
                    r.generation,
                    r.session.authentication_bits_consumed,
                    r.session.secure_bits_consumed,
                    r.session.renewal_aborted,
                    r.session.recovered_pending,
                    r.verdict == SessionVerdict::Accept
                ));
            }
            if let Some((got, expected, ok)) = probe {
                s.push_str(&format!(
                    "probe,{},{},,,,,,{},{}\n",
                    rows.len() + 1,
                    verdict_str(got),
                    verdict_str(expected),
                    ok
                ));
            }
            s
        }
    };
    output::emit(cfg.out.as_deref(), &artifact)?;

    eprintln!("puf: seed {} | {variant_name} pair, {} secret bits, m {}", cfg.seed, p.n_bits, p.m);
    eprintln!(
        "  provisioned: manufacturer key, generation 0{}",
        if variant == Variant::Simple { " (kept for life; no initialization)" } else { "" }
    );
    for r in init_row.iter().chain(&rows) {
        eprintln!(
            "  {}: {} | generation {}{}{}",
            if r.index == 0 { "initialized".to_string() } else { format!("session {}", r.index) },
            verdict_str(r.verdict),
            r.generation,
            if r.session.authentication_bits_consumed > 0 {
                format!(" | authentication bits {}", r.session.authentication_bits_consumed)
            } else {
                String::new()
            },
            if r.session.recovered_pending { " | recovered a parked renewal" } else { "" },
        );
    }
    if let Some((got, expected, ok)) = probe {
        eprintln!(
            "  manufacturer-rebuilt key: {} (expected {}) | {}",
            verdict_str(got),
            verdict_str(expected),
            if ok { "ok" } else { "BREACH" }
        );
    }
    if let Some(dir) = &p.state_dir {
        eprintln!(
            "  state persisted to {} (round-trip {})",
            dir.display(),
            if storage_ok { "ok" } else { "BREACH" }
        );
    }
    eprintln!("  all sessions accepted: {}", init_ok && all_accept);
    Ok(all_pass)
}

fn persist_and_check(device: &PufDevice, path: &Path) -> Result<bool, String> {
    save_device(device, path).map_err(|e| e.to_string())?;
    let reloaded = load_device(path, device.lockout_threshold).map_err(|e| e.to_string())?;
    Ok(reloaded == *device)
}
