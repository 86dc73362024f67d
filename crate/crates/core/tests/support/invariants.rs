//! Structural checks for randomized samples. Each returns a description of
//! the first violation found.

use std::collections::BTreeSet;

use crisis_cascade::randomize::unit_totals;
use crisis_cascade::MacroNet;

fn sorted(mut v: Vec<f64>) -> Vec<u64> {
    v.sort_by(f64::total_cmp);
    v.into_iter().map(f64::to_bits).collect()
}

fn simple(net: &MacroNet<f64>) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for l in net.links() {
        if l.source == l.target {
            return Err(format!("self-loop on {}", net.code(l.source)));
        }
        if !seen.insert((l.source, l.target)) {
            return Err(format!("parallel link {} -> {}", net.code(l.source), net.code(l.target)));
        }
    }
    Ok(())
}

pub fn gsn(input: &MacroNet<f64>, sample: &MacroNet<f64>) -> Result<(), String> {
    simple(sample)?;
    if input.len() != sample.len() || input.link_count() != sample.link_count() {
        return Err("node or link count changed".into());
    }
    for i in 0..input.len() {
        let code = input.code(i);
        if input.code(i) != sample.code(i) {
            return Err(format!("country order changed at {code}"));
        }
        if input.in_links(i).len() != sample.in_links(i).len() {
            return Err(format!("in-degree of {code} changed"));
        }
        if input.out_links(i).len() != sample.out_links(i).len() {
            return Err(format!("out-degree of {code} changed"));
        }
        let weights = |n: &MacroNet<f64>| sorted(n.out_links(i).iter().map(|&(_, w)| w).collect());
        if weights(input) != weights(sample) {
            return Err(format!("outgoing weights of {code} changed"));
        }
    }
    let all = |n: &MacroNet<f64>| sorted(n.links().iter().map(|l| l.volume).collect());
    if all(input) != all(sample) {
        return Err("global weight multiset changed".into());
    }
    Ok(())
}

pub fn gdn(input: &MacroNet<f64>, sample: &MacroNet<f64>) -> Result<(), String> {
    simple(sample)?;
    let (ex, im) = unit_totals(input);
    let mut out = vec![0u64; sample.len()];
    let mut inn = vec![0u64; sample.len()];
    for l in sample.links() {
        if l.volume.fract() != 0.0 || l.volume < 1.0 {
            return Err(format!("non-unit volume {}", l.volume));
        }
        out[l.source] += l.volume as u64;
        inn[l.target] += l.volume as u64;
    }
    if out != ex {
        return Err("export unit totals changed".into());
    }
    if inn != im {
        return Err("import unit totals changed".into());
    }
    if out.iter().sum::<u64>() != ex.iter().sum::<u64>() {
        return Err("total units changed".into());
    }
    Ok(())
}
