use std::fs;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use crn_core::balance::{
    find_complex_balanced_state, is_complex_balanced_measure, is_complex_balanced_state, is_stationary_measure,
    LatticeMeasure, Tolerance,
};
use crn_core::copies::{
    enumerate_copies, is_active_copy, is_node_balanced, union_chain, verify_any_kinetics, verify_box_theorem,
    verify_single_copy_theorem, verify_translation_family_theorem, Copy as LatticeCopy, TranslationMode,
};
use crn_core::ctmc::{
    build_box_truncation, build_truncation, decompose, solve_stationary, SolveMethod, SolveOptions, TruncatedChain,
    SOLVE_TOL,
};
use crn_core::graph::{
    build_auxiliary_network, deficiency, is_reversible, is_weakly_reversible, linkage_classes,
    stoichiometric_subspace,
};
use crn_core::model::box_states;
use crn_core::ssa::{simulate_ssa, SsaOptions};
use crn_core::{par, KineticsSpec, ParsedNetwork, RateTable, ReactionNetwork, StochasticKinetics};
use serde_json::{json, Value};

use crate::inputs::{load_network, load_states, parse_f64_list, parse_i64_list, parse_measure, parse_offsets};
use crate::report::{kinetics_descriptor, network_digest, Outcome};
use crate::{CheckArgs, Cli, Command, CopiesArgs, Method, SimulateArgs, StationaryArgs, Theorem, TheoremArgs};

pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let tol = Tolerance { abs: cli.tol_abs, rel: cli.tol };
    if !(tol.abs >= 0.0 && tol.rel >= 0.0) {
        bail!("tolerances must be non-negative");
    }
    match &cli.command {
        Command::Analyze { file, auxiliary } => analyze(&load_network(file)?, *auxiliary),
        Command::Stationary(args) => stationary(args),
        Command::Simulate(args) => simulate(args),
        Command::Copies(args) => copies(args, tol),
        Command::Verify(args) => {
            let parsed = load_network(&args.file)?;
            theorem(&parsed, args.theorem, &args.opts, tol, "verify")
        }
        Command::Check(args) => check(args, tol),
    }
}

fn structure(net: &ReactionNetwork) -> anyhow::Result<Value> {
    let lc = linkage_classes(net);
    let stoich = stoichiometric_subspace(net)?;
    let d = deficiency(net)?;
    let labels = |class: &Vec<usize>| class.iter().map(|&c| net.complex_label(c)).collect::<Vec<_>>();
    Ok(json!({
        "digest": network_digest(net)?,
        "complexes": (0..net.m()).map(|c| net.complex_label(c)).collect::<Vec<_>>(),
        "reactions": (0..net.r()).map(|k| net.reaction_label(k)).collect::<Vec<_>>(),
        "linkage_classes": lc.classes.iter().map(labels).collect::<Vec<_>>(),
        "reversible": is_reversible(net),
        "weakly_reversible": is_weakly_reversible(net),
        "stoichiometric_basis": stoich.basis,
        "deficiency": d,
    }))
}

fn analyze(parsed: &ParsedNetwork, auxiliary: bool) -> anyhow::Result<Outcome> {
    let net = &parsed.network;
    let mut body = structure(net)?;
    let d = deficiency(net)?;
    let wr = is_weakly_reversible(net);
    let mut summary = vec![
        format!("species {}  complexes {}  reactions {}", net.n(), net.m(), net.r()),
        format!(
            "linkage classes {}  rank {}  deficiency {} (kernel route {})",
            d.ell, d.s, d.delta, d.delta_kernel
        ),
        format!("reversible {}  weakly reversible {}", is_reversible(net), wr),
    ];
    body["kinetics"] = kinetics_descriptor(&parsed.kinetics);
    match find_complex_balanced_state(net, &parsed.kinetics)? {
        Ok(c) => {
            summary.push(format!("complex balanced state {:?}", c.0));
            body["complex_balanced_state"] = json!({ "found": true, "c": c.0 });
        }
        Err(reason) => {
            summary.push(format!("no complex balanced state ({})", serde_json::to_value(&reason)?["reason"]));
            body["complex_balanced_state"] = json!({ "found": false, "detail": reason });
        }
    }
    let mut passed = true;
    if auxiliary {
        let aux = build_auxiliary_network(net)?;
        let aux_d = deficiency(&aux)?;
        let aux_wr = is_weakly_reversible(&aux);
        passed = aux_d.delta == 0 && aux_wr == wr;
        summary.push(format!(
            "auxiliary network: species {}  deficiency {}  weakly reversible {}",
            aux.n(),
            aux_d.delta,
            aux_wr
        ));
        body["auxiliary"] = structure(&aux)?;
    }
    Ok(Outcome { command: "analyze", passed, body, summary })
}

fn solve_method(m: Method) -> SolveMethod {
    match m {
        Method::Gth => SolveMethod::Gth,
        Method::Lu => SolveMethod::Lu,
        Method::Power => SolveMethod::Power,
    }
}

fn stationary(args: &StationaryArgs) -> anyhow::Result<Outcome> {
    let parsed = load_network(&args.file)?;
    let (net, kin) = (&parsed.network, &parsed.kinetics);
    let (chain, domain): (TruncatedChain, Value) = if let Some(b) = args.box_max {
        (build_box_truncation(net, kin, b)?, json!({ "box": b }))
    } else if let Some(path) = &args.states {
        (build_truncation(net, kin, load_states(path, net.n())?)?, json!({ "states": path.display().to_string() }))
    } else if let Some(b) = args.union_copies {
        let copies = enumerate_copies(net, b, false);
        if copies.is_empty() {
            bail!("no copies fit in the box [0, {b}]^n");
        }
        (union_chain(net, kin, &copies)?, json!({ "union_copies": b, "copies": copies.len() }))
    } else {
        bail!("one of --box, --states or --union-copies is required");
    };
    let dec = decompose(&chain);
    let leaky: Vec<bool> = dec.classes.iter().map(|c| c.iter().any(|&i| chain.boundary_exit(i))).collect();
    let mut targets: Vec<usize> = (0..dec.classes.len())
        .filter(|&c| dec.closed[c] || (args.reflect && dec.terminal[c]))
        .collect();
    if !args.solve_all_classes {
        if let Some(&best) = targets.iter().max_by_key(|&&c| (dec.classes[c].len(), std::cmp::Reverse(c))) {
            targets = vec![best];
        }
    }
    let opts = SolveOptions { method: solve_method(args.method), allow_boundary_exits: args.reflect };
    let solved = par::map(&targets, |&c| solve_stationary(&chain, &dec, c, opts));
    let mut results = Vec::new();
    let mut summary = vec![format!(
        "{} states, {} classes ({} closed, {} terminal)",
        chain.len(),
        dec.classes.len(),
        dec.closed_classes().len(),
        dec.terminal_classes().len()
    )];
    let mut passed = !targets.is_empty();
    if targets.is_empty() {
        summary.push("no closed class; use --reflect to solve leaking terminal classes or --union-copies".into());
    }
    let mut csv = chain_csv_header(net);
    for (c, res) in targets.iter().zip(solved) {
        match res {
            Ok(r) => {
                passed &= r.residual <= SOLVE_TOL;
                summary.push(format!(
                    "class {c}: {} states, residual {:e}, method {:?}{}",
                    r.states.len(),
                    r.residual,
                    r.method,
                    if leaky[*c] { ", boundary exits discarded" } else { "" }
                ));
                for (&i, p) in r.states.iter().zip(&r.pi) {
                    let coords: Vec<String> = chain.states()[i].iter().map(i64::to_string).collect();
                    csv.push_str(&format!("{}{}{c},{p:e}\n", coords.join(","), if coords.is_empty() { "" } else { "," }));
                }
                results.push(json!({
                    "class_id": c,
                    "size": r.states.len(),
                    "residual": r.residual,
                    "method": r.method,
                    "truncated": leaky[*c],
                    "exit_flux": r.exit_flux,
                }));
            }
            Err(e) => {
                passed = false;
                summary.push(format!("class {c}: {e}"));
                results.push(json!({ "class_id": c, "error": e.to_string() }));
            }
        }
    }
    if let Some(path) = &args.csv_out {
        fs::write(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    let classes: Vec<Value> = dec
        .classes
        .iter()
        .enumerate()
        .map(|(c, members)| {
            json!({ "id": c, "size": members.len(), "closed": dec.closed[c], "terminal": dec.terminal[c], "boundary_exits": leaky[c] })
        })
        .collect();
    let body = json!({
        "network": network_digest(net)?,
        "kinetics": kinetics_descriptor(kin),
        "domain": domain,
        "states": chain.len(),
        "classes": classes,
        "solved": results,
        "residual_tolerance": SOLVE_TOL,
    });
    Ok(Outcome { command: "stationary", passed, body, summary })
}

fn chain_csv_header(net: &ReactionNetwork) -> String {
    let mut cols = net.species_names();
    cols.push("class".into());
    cols.push("pi".into());
    format!("{}\n", cols.join(","))
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<Outcome> {
    let parsed = load_network(&args.file)?;
    let (net, kin) = (&parsed.network, &parsed.kinetics);
    let x0 = parse_i64_list(&args.x0)?;
    let seed = args.seed.unwrap_or_else(|| {
        let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos());
        (nanos as u64) ^ ((nanos >> 64) as u64)
    });
    let opts = SsaOptions { burn_in: args.burn_in, batches: args.batches, ..Default::default() };
    let res = simulate_ssa(net, kin, &x0, args.t_end, seed, opts)?;
    if let Some(path) = &args.hist_out {
        let mut cols = net.species_names();
        cols.push("fraction".into());
        let mut csv = format!("{}\n", cols.join(","));
        for (x, w) in &res.occupancy {
            let coords: Vec<String> = x.iter().map(i64::to_string).collect();
            csv.push_str(&format!("{}{}{w:e}\n", coords.join(","), if coords.is_empty() { "" } else { "," }));
        }
        fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut summary = vec![format!("seed {seed}, {} events{}", res.events, if res.absorbed { ", absorbed" } else { "" })];
    for (i, name) in net.species_names().iter().enumerate() {
        summary.push(format!("mean {name} = {:.6} ± {:.6}", res.means[i], res.std_errors[i]));
    }
    let body = json!({
        "network": network_digest(net)?,
        "kinetics": kinetics_descriptor(kin),
        "seed": seed,
        "x0": x0,
        "t_end": args.t_end,
        "burn_in": args.burn_in,
        "batches": args.batches,
        "events": res.events,
        "absorbed": res.absorbed,
        "states_visited": res.occupancy.len(),
        "means": res.means,
        "std_errors": res.std_errors,
    });
    Ok(Outcome { command: "simulate", passed: true, body, summary })
}

fn measure_of(parsed: &ParsedNetwork, opts: &TheoremArgs) -> anyhow::Result<Option<LatticeMeasure>> {
    match (&opts.measure, &opts.c) {
        (Some(_), Some(_)) => bail!("give either --measure or --c, not both"),
        (Some(m), None) => Ok(Some(parse_measure(m, parsed)?)),
        (None, Some(c)) => Ok(Some(parse_measure(&format!("product:c={c}"), parsed)?)),
        (None, None) => Ok(None),
    }
}

fn rate_table(parsed: &ParsedNetwork, opts: &TheoremArgs) -> anyhow::Result<Option<RateTable>> {
    match &opts.rates {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Ok(Some(RateTable::from_csv(&parsed.network, &text)?))
        }
        None => Ok(None),
    }
}

fn copies(args: &CopiesArgs, tol: Tolerance) -> anyhow::Result<Outcome> {
    let parsed = load_network(&args.file)?;
    if let Some(t) = args.theorem {
        return theorem(&parsed, t, &args.opts, tol, "copies");
    }
    let net = &parsed.network;
    let table = rate_table(&parsed, &args.opts)?;
    let kin: &dyn StochasticKinetics = match &table {
        Some(t) => t,
        None => &parsed.kinetics,
    };
    let nu = measure_of(&parsed, &args.opts)?;
    let list = enumerate_copies(net, args.opts.box_max, args.injective_only);
    let checks = par::map(&list, |f| -> crn_core::Result<Option<(bool, bool, f64)>> {
        match &nu {
            Some(nu) => {
                let rep = is_node_balanced(net, kin, nu, f, tol)?;
                let worst = rep.nodes.iter().map(|v| v.rel_residual).fold(0.0, f64::max);
                Ok(Some((rep.balanced, is_active_copy(net, kin, nu, f)?, worst)))
            }
            None => Ok(None),
        }
    });
    let mut entries = Vec::new();
    let mut balanced_count = 0;
    for (f, check) in list.iter().zip(checks) {
        let mut entry = json!({ "offsets": f.offsets, "images": f.images, "injective": f.is_injective() });
        if let Some((balanced, active, worst)) = check? {
            balanced_count += usize::from(balanced);
            entry["node_balanced"] = json!(balanced);
            entry["active"] = json!(active);
            entry["max_rel_residual"] = json!(worst);
        }
        entries.push(entry);
    }
    let mut summary = vec![format!(
        "{} {}copies in box [0, {}]",
        list.len(),
        if args.injective_only { "injective " } else { "" },
        args.opts.box_max
    )];
    let passed = if nu.is_some() {
        summary.push(format!("{balanced_count} node balanced"));
        balanced_count == list.len()
    } else {
        true
    };
    let body = json!({
        "network": network_digest(net)?,
        "kinetics": kinetics_descriptor(&parsed.kinetics),
        "box": args.opts.box_max,
        "injective_only": args.injective_only,
        "count": list.len(),
        "copies": entries,
    });
    Ok(Outcome { command: "copies", passed, body, summary })
}

fn theorem(
    parsed: &ParsedNetwork,
    which: Theorem,
    opts: &TheoremArgs,
    tol: Tolerance,
    command: &'static str,
) -> anyhow::Result<Outcome> {
    let net = &parsed.network;
    let spec: &KineticsSpec = &parsed.kinetics;
    let table = rate_table(parsed, opts)?;
    let kin: &dyn StochasticKinetics = match &table {
        Some(t) => t,
        None => spec,
    };
    let nu = measure_of(parsed, opts)?;
    let need_measure = || nu.as_ref().context("this check needs --measure or --c");
    let no_table = || -> anyhow::Result<()> {
        if table.is_some() {
            bail!("--rates applies only to --theorem any and --theorem cube");
        }
        Ok(())
    };
    let mut summary = Vec::new();
    let (passed, detail) = match which {
        Theorem::Any => {
            let rep = verify_any_kinetics(net, kin, need_measure()?, opts.box_max, tol)?;
            summary.push(format!(
                "injective copies balanced: {} ({} checked)",
                rep.injective.all_balanced, rep.injective.checked
            ));
            summary.push(format!("all copies balanced: {} ({} checked)", rep.all.all_balanced, rep.all.checked));
            summary.push(format!("complex balanced on box: {}", rep.complex_balance.passed));
            if !rep.agree {
                summary.push("DISAGREEMENT between equivalent conditions (implementation bug)".into());
            }
            (rep.agree && rep.complex_balance.passed, serde_json::to_value(&rep)?)
        }
        Theorem::Single => {
            no_table()?;
            let c = match need_measure()? {
                LatticeMeasure::ProductForm { c, .. } => c.clone(),
                _ => bail!("--theorem single needs a product-form measure (--c or --measure product:...)"),
            };
            let rep = verify_single_copy_theorem(net, spec, &c, opts.box_max, tol)?;
            match &rep.found {
                Some(f) => summary.push(format!("balanced copy found at offsets {:?}", f.offsets)),
                None => summary.push(format!("no balanced copy found ({} searched)", rep.copies_searched)),
            }
            summary.push(format!("rate identities hold: {}", rep.identities_hold));
            summary.push(format!("complex balanced on box: {}", rep.complex_balance.passed));
            if !rep.consistent {
                summary.push("INCONSISTENT verdicts (implementation bug)".into());
            }
            (rep.consistent && rep.found.is_some() && rep.complex_balance.passed, serde_json::to_value(&rep)?)
        }
        Theorem::Translations => {
            no_table()?;
            let nu = need_measure()?;
            let offsets = match &opts.offsets {
                Some(text) => parse_offsets(text)?,
                None => vec![vec![0; net.n()]; linkage_classes(net).num_classes],
            };
            let f = LatticeCopy::from_offsets(net, offsets)?;
            let mode = if opts.probe_grid {
                TranslationMode::Probe
            } else {
                match opts.side {
                    Some(side) => TranslationMode::Full { side },
                    None => TranslationMode::default_full(net),
                }
            };
            let rep = verify_translation_family_theorem(net, spec, nu, &f, mode, tol)?;
            summary.push(format!(
                "{} translates checked, all node balanced: {}, copy active: {}",
                rep.translates_checked, rep.all_balanced, rep.active
            ));
            if let Some(note) = &rep.hypothesis_note {
                summary.push(note.clone());
            }
            summary.push(format!("complex balance concluded: {}", rep.cb_concluded));
            let passed = rep.cb_concluded && rep.cb_confirmed == Some(true);
            (passed, serde_json::to_value(&rep)?)
        }
        Theorem::Cube => {
            let rep = verify_box_theorem(net, kin, need_measure()?, opts.m1, tol)?;
            summary.push(format!("measure stationary on cube: {}", rep.stationarity.passed));
            summary.push(format!(
                "injective copies meeting the cube balanced: {} ({} checked)",
                rep.copies.all_balanced, rep.copies.checked
            ));
            let cb = rep.complex_balance.as_ref().map(|c| c.passed);
            if let Some(cb) = cb {
                summary.push(format!("complex balanced on cube: {cb}"));
            }
            (rep.copies.all_balanced && cb == Some(true), serde_json::to_value(&rep)?)
        }
    };
    let body = json!({
        "network": network_digest(net)?,
        "kinetics": kinetics_descriptor(spec),
        "rate_table": table.is_some(),
        "theorem": format!("{which:?}").to_lowercase(),
        "result": detail,
    });
    Ok(Outcome { command, passed, body, summary })
}

fn check(args: &CheckArgs, tol: Tolerance) -> anyhow::Result<Outcome> {
    let parsed = load_network(&args.file)?;
    let (net, kin) = (&parsed.network, &parsed.kinetics);
    let mut body = json!({ "network": network_digest(net)?, "kinetics": kinetics_descriptor(kin) });
    let mut summary = Vec::new();
    let mut passed = true;
    let mut any = false;
    if let Some(spec) = &args.measure {
        any = true;
        let nu = parse_measure(spec, &parsed)?;
        let domain = box_states(net.n(), args.box_max);
        let st = is_stationary_measure(net, kin, &nu, &domain, tol)?;
        summary.push(format!(
            "stationary on box [0, {}]: {} (max rel residual {:e})",
            args.box_max, st.passed, st.max_rel_residual
        ));
        passed &= st.passed;
        body["stationary"] = serde_json::to_value(&st)?;
        if !args.stationary_only {
            let cb = is_complex_balanced_measure(net, kin, &nu, &domain, tol)?;
            summary.push(format!(
                "complex balanced on box [0, {}]: {} (max rel residual {:e})",
                args.box_max, cb.passed, cb.max_rel_residual
            ));
            if let Some(w) = &cb.witness {
                let label = w.complex.map(|c| net.complex_label(c)).unwrap_or_default();
                summary.push(format!("witness: state {:?}, complex {label}", w.state));
            }
            passed &= cb.passed;
            body["complex_balanced"] = serde_json::to_value(&cb)?;
        }
        body["box"] = json!(args.box_max);
    }
    if let Some(text) = &args.state {
        any = true;
        let c = parse_f64_list(text)?;
        let rep = is_complex_balanced_state(net, kin, &c, tol.rel)?;
        summary.push(format!("state {c:?} complex balanced: {}", rep.balanced));
        passed &= rep.balanced;
        body["state"] = serde_json::to_value(&rep)?;
    }
    if args.find_state {
        any = true;
        match find_complex_balanced_state(net, kin)? {
            Ok(c) => {
                summary.push(format!("complex balanced state {:?}", c.0));
                body["found_state"] = json!({ "found": true, "c": c.0 });
            }
            Err(reason) => {
                passed = false;
                summary.push("no complex balanced state".into());
                body["found_state"] = json!({ "found": false, "detail": reason });
            }
        }
    }
    if !any {
        bail!("nothing to check: give --measure, --state or --find-state");
    }
    Ok(Outcome { command: "check", passed, body, summary })
}
