//! Parsing of command-line values and input files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use crn_core::balance::{product_form_measure, LatticeMeasure};
use crn_core::ctmc::{build_box_truncation, decompose, solve_stationary, SolveOptions};
use crn_core::{parse_network, ParsedNetwork};

pub fn load_network(path: &Path) -> anyhow::Result<ParsedNetwork> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_network(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_f64_list(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number '{}'", s.trim())))
        .collect()
}

pub fn parse_i64_list(text: &str) -> anyhow::Result<Vec<i64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|s| s.trim().parse::<i64>().with_context(|| format!("bad integer '{}'", s.trim())))
        .collect()
}

/// `h1;h2;...` with each `h` a comma-separated vector.
pub fn parse_offsets(text: &str) -> anyhow::Result<Vec<Vec<i64>>> {
    text.split(';').map(parse_i64_list).collect()
}

/// States from a CSV with a header row and one state per line.
pub fn load_states(path: &Path, n: usize) -> anyhow::Result<Vec<Vec<i64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let x = parse_i64_list(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        if x.len() != n {
            bail!("{} line {}: expected {n} coordinates, got {}", path.display(), i + 1, x.len());
        }
        out.push(x);
    }
    Ok(out)
}

/// Builds a measure from `product:c=..`, `table:FILE` or `stationary:N`.
pub fn parse_measure(spec: &str, parsed: &ParsedNetwork) -> anyhow::Result<LatticeMeasure> {
    let (kind, arg) = spec.split_once(':').with_context(|| format!("measure '{spec}' needs a 'kind:' prefix"))?;
    let net = &parsed.network;
    match kind {
        "product" => {
            let c = parse_f64_list(arg.strip_prefix("c=").unwrap_or(arg))?;
            Ok(product_form_measure(&c, parsed.kinetics.theta())?)
        }
        "table" => {
            let text = fs::read_to_string(arg).with_context(|| format!("reading {arg}"))?;
            Ok(LatticeMeasure::from_csv(&text, net.n())?)
        }
        "stationary" => {
            let n: i64 = arg.trim().parse().with_context(|| format!("bad box size '{arg}'"))?;
            stationary_measure(parsed, n)
        }
        other => bail!("unknown measure kind '{other}' (expected product, table or stationary)"),
    }
}

/// The stationary distribution of the box truncation, from its unique
/// terminal class with boundary exits discarded; zero outside that class.
fn stationary_measure(parsed: &ParsedNetwork, n: i64) -> anyhow::Result<LatticeMeasure> {
    let chain = build_box_truncation(&parsed.network, &parsed.kinetics, n)?;
    let dec = decompose(&chain);
    let terminal = dec.terminal_classes();
    if terminal.len() != 1 {
        bail!("box {n} truncation has {} terminal classes; expected exactly one", terminal.len());
    }
    let res = solve_stationary(&chain, &dec, terminal[0], SolveOptions { allow_boundary_exits: true, ..Default::default() })?;
    let mut values: BTreeMap<Vec<i64>, f64> = chain.states().iter().map(|x| (x.clone(), 0.0)).collect();
    values.extend(res.distribution(&chain));
    Ok(LatticeMeasure::tabulated(values)?.with_default(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_and_lists() {
        assert_eq!(parse_offsets("2;0").unwrap(), vec![vec![2], vec![0]]);
        assert_eq!(parse_offsets("1,2;-1,0").unwrap(), vec![vec![1, 2], vec![-1, 0]]);
        assert!(parse_i64_list("1,x").is_err());
        assert_eq!(parse_f64_list("1, 2.5").unwrap(), vec![1.0, 2.5]);
    }

    #[test]
    fn measure_specs() {
        let parsed = parse_network("0 -> A ; 1\n3A -> 2A ; 1").unwrap();
        let nu = parse_measure("product:c=2", &parsed).unwrap();
        assert_eq!(nu.eval(&[2]), Some(2.0));
        let pi = parse_measure("stationary:30", &parsed).unwrap();
        assert_eq!(pi.eval(&[0]), Some(0.0));
        assert!(pi.eval(&[2]).unwrap() > 0.5);
        assert_eq!(pi.eval(&[100]), Some(0.0));
        assert!(parse_measure("poisson:1", &parsed).is_err());
        assert!(parse_measure("product", &parsed).is_err());
    }
}
