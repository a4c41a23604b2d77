//! `attack`: run one adversary driver (or the whole registry) and gate the
//! measured rates against the analytic expectations.
//!
//! Artifact formats:
//! * text — JSON Lines: header record, one `attack-report` record per
//!   report, one `result` record.
//! * csv  — columns `name,trials,successes,measured_rate,analytic_rate,`
//!   `tolerance,gate,pass,notes` (notes quoted).
//!
//! Gate (exit 0): every report passes. The hidden `--fixture-leaky-eve`
//! flag injects a deliberately broken wiretap oracle whose report must come
//! out red — invoking it is the self-test that this gate can actually trip.

use kljn_puf_core::adversary::attacks::{find, registry, run_all, AttackContext};
use kljn_puf_core::adversary::report::reports_to_csv;
use kljn_puf_core::seed::derive_seed;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::{output, AttackArgs};

pub fn run(cfg: &ExperimentConfig, args: &AttackArgs) -> Result<bool, String> {
    if args.list {
        for attack in registry() {
            println!("{:<22} {}", attack.name(), attack.description());
        }
        return Ok(true);
    }

    let mut a = cfg.attack.clone();
    if let Some(x) = &args.name {
        a.name = x.clone();
    }
    if args.trials.is_some() {
        a.trials = args.trials;
    }
    if args.n_bits.is_some() {
        a.n_bits = args.n_bits;
    }
    if args.m.is_some() {
        a.m = args.m;
    }
    if args.samples_per_cycle.is_some() {
        a.samples_per_cycle = args.samples_per_cycle;
    }
    if args.amplitude_scale.is_some() {
        a.amplitude_scale = args.amplitude_scale;
    }
    if args.fixture_leaky_eve {
        a.fixture_leaky_eve = true;
    }

    let ctx = AttackContext {
        seed: derive_seed(cfg.seed, 0, "cli.attack"),
        trials: a.trials,
        n_bits: a.n_bits,
        m: a.m,
        samples_per_cycle: a.samples_per_cycle,
        amplitude_scale: a.amplitude_scale,
        fixture_leaky: a.fixture_leaky_eve,
    };

    let reports = if a.name == "all" {
        run_all(&ctx).map_err(|e| e.to_string())?
    } else {
        match find(&a.name) {
            Some(attack) => attack.run(&ctx).map_err(|e| e.to_string())?,
            None => {
                let known: Vec<&str> = registry().iter().map(|x| x.name()).collect();
                return Err(format!(
                    "unknown attack `{}`; known: all, {}",
                    a.name,
                    known.join(", ")
                ));
            }
        }
    };

    let all_pass = reports.iter().all(|r| r.pass);
    let artifact = match cfg.format {
        OutputFormat::Text => {
            let mut s = output::jsonl_header(
                "attack",
                cfg.seed,
                serde_json::json!({ "attack": a.name, "reports": reports.len() }),
            );
            s.push('\n');
            for r in &reports {
                let mut obj = serde_json::json!({ "record": "attack-report" });
                let body = serde_json::to_value(r).map_err(|e| e.to_string())?;
                if let (Some(o), Some(b)) = (obj.as_object_mut(), body.as_object()) {
                    for (k, v) in b {
                        o.insert(k.clone(), v.clone());
                    }
                }
                s.push_str(&obj.to_string());
                s.push('\n');
            }
            s.push_str(&serde_json::json!({ "record": "result", "all_pass": all_pass }).to_string());
            s.push('\n');
            s
        }
        OutputFormat::Csv => reports_to_csv(&reports),
    };
    output::emit(cfg.out.as_deref(), &artifact)?;

    eprintln!("attack: seed {} | {} | {} report(s)", cfg.seed, a.name, reports.len());
    for r in &reports {
        eprintln!(
            "  {:<34} measured {:.6e} vs {:.6e} ({}, tol {:.3e}) over {} trials | {}",
            r.name,
            r.measured_rate,
            r.analytic_rate,
            r.gate.as_str(),
            r.tolerance,
            r.trials,
            if r.pass { "ok" } else { "BREACH" }
        );
    }
    eprintln!("  all gates hold: {all_pass}");
    Ok(all_pass)
}
