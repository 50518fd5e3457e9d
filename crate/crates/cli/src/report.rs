use std::fs;

use anyhow::Context;
use crn_core::graph::{deficiency, linkage_classes};
use crn_core::{KineticsSpec, ReactionNetwork};
use serde_json::{json, Value};

use crate::Cli;

pub const SCHEMA_VERSION: u32 = 1;

/// Result of one subcommand: the JSON body plus a short human summary.
pub struct Outcome {
    pub command: &'static str,
    pub passed: bool,
    pub body: Value,
    pub summary: Vec<String>,
}

pub fn network_digest(net: &ReactionNetwork) -> anyhow::Result<Value> {
    let d = deficiency(net)?;
    Ok(json!({
        "n": net.n(),
        "m": net.m(),
        "r": net.r(),
        "ell": linkage_classes(net).num_classes,
        "s": d.s,
        "delta": d.delta,
        "species": net.species_names(),
    }))
}

pub fn kinetics_descriptor(kin: &KineticsSpec) -> Value {
    json!({
        "kind": kin.kind().keyword(),
        "kappa": kin.kappa(),
        "theta": kin.theta().iter().map(|t| t.to_string()).collect::<Vec<_>>(),
    })
}

pub fn emit(cli: &Cli, outcome: &Outcome) -> anyhow::Result<()> {
    if let Some(path) = &cli.json_out {
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "tool": "crn",
            "version": env!("CARGO_PKG_VERSION"),
            "command": outcome.command,
            "passed": outcome.passed,
            "tolerance": { "abs": cli.tol_abs, "rel": cli.tol },
            "report": outcome.body,
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        if path.as_os_str() == "-" {
            print!("{text}");
        } else {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    if !cli.quiet {
        let verdict = format!("{}: {}", outcome.command, if outcome.passed { "PASS" } else { "FAIL" });
        // keep stdout clean when it carries the JSON report
        let to_stderr = cli.json_out.as_ref().is_some_and(|p| p.as_os_str() == "-");
        for line in outcome.summary.iter().chain(std::iter::once(&verdict)) {
            if to_stderr {
                eprintln!("{line}");
            } else {
                println!("{line}");
            }
        }
    }
    Ok(())
}
