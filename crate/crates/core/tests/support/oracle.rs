//! Brute-force reference cascade. Every round recomputes each live country's
//! removed volume from the full link list; nothing is carried over.

use std::collections::BTreeMap;

use crisis_cascade::{CascadeParams, Label, MacroNet, Scalar, Side};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleEvent {
    pub country: String,
    pub step: u32,
    pub side: Side,
    pub trigger: Option<String>,
    pub label: Label,
}

fn removed<S: Scalar>(net: &MacroNet<S>, steps: &[Option<u32>], j: usize) -> (S, S) {
    let mut inn = S::zero();
    let mut out = S::zero();
    for l in net.links() {
        if l.target == j && steps[l.source].is_some() {
            inn = inn + l.volume;
        }
        if l.source == j && steps[l.target].is_some() {
            out = out + l.volume;
        }
    }
    (inn, out)
}

fn crosses<S: Scalar>(p: &CascadeParams<S>, amount: S, cap: S) -> bool {
    p.f() * amount > p.t() * cap
}

/// Events in (step, code) order, seed excluded.
pub fn cascade<S: Scalar>(net: &MacroNet<S>, seed: usize, p: &CascadeParams<S>) -> Vec<OracleEvent> {
    let n = net.len();
    let mut steps: Vec<Option<u32>> = vec![None; n];
    let mut labels: Vec<Option<Label>> = vec![None; n];
    steps[seed] = Some(0);
    let mut events = Vec::new();
    let mut step = 0;
    loop {
        step += 1;
        let mut fresh: Vec<OracleEvent> = Vec::new();
        let mut fresh_idx = Vec::new();
        for j in 0..n {
            if steps[j].is_some() {
                continue;
            }
            let cap = net.capacity_at(j);
            let (inn, out) = removed(net, &steps, j);
            let (in_x, out_x) = (crosses(p, inn, cap), crosses(p, out, cap));
            if !in_x && !out_x {
                continue;
            }
            // (weight, step, code, side, node)
            let mut best: Option<(S, u32, String, Side, usize)> = None;
            for l in net.links() {
                let (k, side, crossing) = if l.target == j {
                    (l.source, Side::In, in_x)
                } else if l.source == j {
                    (l.target, Side::Out, out_x)
                } else {
                    continue;
                };
                let Some(ks) = steps[k] else { continue };
                if !crossing || !crosses(p, l.volume, cap) {
                    continue;
                }
                let cand = (l.volume, ks, net.code(k).to_string(), side, k);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        cand.0 > b.0
                            || (cand.0 == b.0
                                && (cand.1, &cand.2, cand.3 == Side::Out) < (b.1, &b.2, b.3 == Side::Out))
                    }
                };
                if better {
                    best = Some(cand);
                }
            }
            let ev = match best {
                Some((_, _, code, side, k)) => {
                    let label = if k == seed {
                        Label::OneStepDirect
                    } else if matches!(labels[k], Some(Label::OneStepDirect | Label::MultiStepDirect)) {
                        Label::MultiStepDirect
                    } else {
                        Label::Residual
                    };
                    OracleEvent {
                        country: net.code(j).to_string(),
                        step,
                        side,
                        trigger: Some(code),
                        label,
                    }
                }
                None => OracleEvent {
                    country: net.code(j).to_string(),
                    step,
                    side: match (in_x, out_x) {
                        (true, false) => Side::In,
                        (false, true) => Side::Out,
                        _ if out > inn => Side::Out,
                        _ => Side::In,
                    },
                    trigger: None,
                    label: Label::Indirect,
                },
            };
            fresh.push(ev);
            fresh_idx.push(j);
        }
        if fresh.is_empty() {
            break;
        }
        for (ev, &j) in fresh.iter().zip(&fresh_idx) {
            steps[j] = Some(step);
            labels[j] = Some(ev.label);
        }
        fresh.sort_by(|a, b| a.country.cmp(&b.country));
        events.extend(fresh);
    }
    events
}

/// Collapsed country -> round, seed excluded.
pub fn rounds<S: Scalar>(net: &MacroNet<S>, seed: usize, p: &CascadeParams<S>) -> BTreeMap<String, u32> {
    cascade(net, seed, p).into_iter().map(|e| (e.country, e.step)).collect()
}
