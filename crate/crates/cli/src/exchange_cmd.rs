//! `exchange`: run one key exchange, emit the transcript, summarize the
//! agreement.
//!
//! Artifact formats:
//! * text — the transcript as JSON Lines: a schema-versioned header record
//!   (parameters, counters, both keys as hex), then one record per cycle.
//! * csv  — the per-cycle table, columns
//!   `index,class,kept,alarm,msq_u,msq_i` (keys and counters stay on the
//!   stderr summary).
//!
//! Gate (exit 0): the exchange completed all requested bits and both ends
//! derived the same key. A persistent-alarm abort is a breached gate, not a
//! usage error: the channel, not the invocation, was bad.

use kljn_puf_core::kljn::{authentication_budget, run_exchange, ExchangeConfig};
use kljn_puf_core::seed::derive_seed;
use kljn_puf_core::Error;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::{output, ExchangeArgs};

pub fn run(cfg: &ExperimentConfig, args: &ExchangeArgs) -> Result<bool, String> {
    let mut x = cfg.exchange.clone();
    if let Some(v) = args.n_bits {
        x.n_bits = v;
    }
    if let Some(v) = args.r_low {
        x.r_low = v;
    }
    if let Some(v) = args.r_high {
        x.r_high = v;
    }
    if let Some(v) = args.kt_eff {
        x.kt_eff = v;
    }
    if let Some(v) = args.bandwidth {
        x.bandwidth = v;
    }
    if let Some(v) = args.samples_per_cycle {
        x.samples_per_cycle = v;
    }
    if let Some(v) = args.compare_every_kth {
        x.compare_every_kth = v;
    }
    if let Some(v) = args.compare_epsilon {
        x.compare_epsilon = v;
    }
    if args.max_cycles.is_some() {
        x.max_cycles = args.max_cycles;
    }

    let mut ec = ExchangeConfig::new(x.n_bits, derive_seed(cfg.seed, 0, "cli.exchange"));
    ec.params.r_low = x.r_low;
    ec.params.r_high = x.r_high;
    ec.params.noise.kt_eff = x.kt_eff;
    ec.params.noise.bandwidth = x.bandwidth;
    ec.params.noise.samples_per_cycle = x.samples_per_cycle;
    ec.params.compare.every_kth = x.compare_every_kth;
    ec.params.compare.epsilon = x.compare_epsilon;
    if let Some(mc) = x.max_cycles {
        ec.max_cycles = mc;
    }
    ec.validate().map_err(|e| e.to_string())?;

    let transcript = match run_exchange(&ec) {
        Ok(t) => t,
        Err(Error::ExchangeAborted { cycles, alarms, reason }) => {
            eprintln!("exchange aborted after {cycles} cycles ({alarms} alarms): {reason}");
            return Ok(false);
        }
        Err(e) => return Err(e.to_string()),
    };

    let artifact = match cfg.format {
        OutputFormat::Text => transcript.to_jsonl(),
        OutputFormat::Csv => {
            let mut s = String::from("index,class,kept,alarm,msq_u,msq_i\n");
            for c in &transcript.cycles {
                s.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.index,
                    c.class.as_str(),
                    c.kept,
                    c.alarm,
                    c.msq_u,
                    c.msq_i
                ));
            }
            s
        }
    };
    output::emit(cfg.out.as_deref(), &artifact)?;

    let keys_equal = transcript.key_alice == transcript.key_bob;
    let complete = transcript.key_alice.len() == x.n_bits;
    let budget = authentication_budget(transcript.f_public_bits).map_err(|e| e.to_string())?;
    eprintln!("exchange: seed {} | {} bits requested", cfg.seed, x.n_bits);
    eprintln!(
        "  cycles {} | kept {} ({:.4}) | discarded {} | alarms {} | estimation errors {}",
        transcript.cycles.len(),
        transcript.kept_count(),
        transcript.kept_fraction(),
        transcript.discarded_count,
        transcript.alarm_count,
        transcript.estimation_error_count,
    );
    eprintln!(
        "  publicly compared bits {} | authentication budget {} bits",
        transcript.f_public_bits, budget
    );
    eprintln!("  key (this end) {}", transcript.key_alice.to_hex());
    eprintln!("  key (peer end) {}", transcript.key_bob.to_hex());
    eprintln!("  keys equal: {keys_equal} | complete: {complete}");
    Ok(keys_equal && complete)
}
