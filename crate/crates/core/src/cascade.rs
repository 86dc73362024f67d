//! Threshold cascade engine.
//!
//! A collapsing country cuts every incident link by a fraction `f` of its
//! original weight. A live country collapses in the next round once the
//! accumulated cut on its incoming links, or on its outgoing links, exceeds
//! `t` times its capacity. Rounds are synchronous and collapse is absorbing.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::MacroNet;
use crate::scalar::Scalar;

/// The link-cut fraction `f` and threshold fraction `t`; only `f/t` affects dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeParams<S> {
    f: S,
    t: S,
}

impl<S: Scalar> CascadeParams<S> {
    pub fn new(f: S, t: S) -> Result<Self> {
        let valid = |v: S| v.is_finite_value() && v > S::zero() && v <= S::one();
        if !valid(f) || !valid(t) {
            return Err(Error::InvalidParams(format!(
                "f and t must lie in (0, 1], got f = {f}, t = {t}"
            )));
        }
        Ok(CascadeParams { f, t })
    }

    /// Realizes `ratio` as `t = 0.1, f = 0.1 * ratio` up to ratio 10, and as
    /// `f = 1, t = 1 / ratio` beyond it.
    pub fn from_ratio(ratio: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::InvalidParams(format!("f/t ratio must be positive, got {ratio}")));
        }
        let (f, t) = if ratio <= 10.0 {
            (ratio / 10.0, 0.1)
        } else {
            (1.0, 1.0 / ratio)
        };
        let conv = |v: f64| {
            S::from_f64_lossy(v)
                .ok_or_else(|| Error::InvalidParams(format!("{v} is not representable")))
        };
        Self::new(conv(f)?, conv(t)?)
    }

    pub fn f(&self) -> S {
        self.f
    }

    pub fn t(&self) -> S {
        self.t
    }

    pub fn ratio(&self) -> f64 {
        self.f.to_f64_lossy() / self.t.to_f64_lossy()
    }

    /// Whether a cumulative cut of `removed` (original-weight units) crosses
    /// the threshold of a country with capacity `capacity`.
    #[inline]
    pub fn crosses(&self, removed: S, capacity: S) -> bool {
        self.f * removed > self.t * capacity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Cause {
    Direct,
    Indirect,
}

/// Sub-process a collapse belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    /// Direct collapse caused by the seed itself.
    OneStepDirect,
    /// Direct collapse caused by a country on a direct chain from the seed.
    MultiStepDirect,
    /// Only the sum of individually insufficient cuts crossed the threshold.
    Indirect,
    /// Direct collapse caused by a country downstream of an indirect collapse.
    Residual,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::In => "IN",
            Side::Out => "OUT",
        }
    }
}

impl Cause {
    pub fn as_str(self) -> &'static str {
        match self {
            Cause::Direct => "DIRECT",
            Cause::Indirect => "INDIRECT",
        }
    }
}

impl Label {
    pub const ALL: [Label; 4] = [
        Label::OneStepDirect,
        Label::MultiStepDirect,
        Label::Indirect,
        Label::Residual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::OneStepDirect => "ONE_STEP_DIRECT",
            Label::MultiStepDirect => "MULTI_STEP_DIRECT",
            Label::Indirect => "INDIRECT",
            Label::Residual => "RESIDUAL",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CollapseEvent {
    pub country: String,
    pub step: u32,
    pub side: Side,
    pub cause: Cause,
    pub trigger: Option<String>,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Profile {
    pub one_step_direct: usize,
    pub multi_step_direct: usize,
    pub indirect: usize,
    pub residual: usize,
}

impl Profile {
    pub fn count(&self, label: Label) -> usize {
        match label {
            Label::OneStepDirect => self.one_step_direct,
            Label::MultiStepDirect => self.multi_step_direct,
            Label::Indirect => self.indirect,
            Label::Residual => self.residual,
        }
    }

    fn bump(&mut self, label: Label) {
        match label {
            Label::OneStepDirect => self.one_step_direct += 1,
            Label::MultiStepDirect => self.multi_step_direct += 1,
            Label::Indirect => self.indirect += 1,
            Label::Residual => self.residual += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.one_step_direct + self.multi_step_direct + self.indirect + self.residual
    }
}

/// Outcome of a cascade started at one seed. Events are ordered by step, then code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AvalancheResult {
    pub seed: String,
    pub size: usize,
    pub duration: u32,
    pub events: Vec<CollapseEvent>,
    pub profile: Profile,
}

impl AvalancheResult {
    pub fn collapsed(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.country.as_str())
    }
}

/// Per-seed results keyed by country code.
pub type AvalancheMap = BTreeMap<String, AvalancheResult>;

pub fn sizes(results: &AvalancheMap) -> Vec<usize> {
    results.values().map(|r| r.size).collect()
}

pub fn run_avalanche<S: Scalar>(
    net: &MacroNet<S>,
    seed: &str,
    params: &CascadeParams<S>,
) -> Result<AvalancheResult> {
    let idx = net.require(seed)?;
    Ok(Engine::new(net, params).run(idx))
}

/// One independent cascade per country, computed in parallel.
pub fn run_all<S: Scalar>(net: &MacroNet<S>, params: &CascadeParams<S>) -> AvalancheMap {
    (0..net.len())
        .into_par_iter()
        .map_init(|| Engine::new(net, params), |engine, i| engine.run(i))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|r| (r.seed.clone(), r))
        .collect()
}

struct Engine<'a, S> {
    net: &'a MacroNet<S>,
    params: &'a CascadeParams<S>,
    in_removed: Vec<S>,
    out_removed: Vec<S>,
    step: Vec<Option<u32>>,
    label: Vec<Option<Label>>,
    touched: Vec<bool>,
}

struct Trigger<S> {
    node: usize,
    weight: S,
    step: u32,
    side: Side,
}

impl<'a, S: Scalar> Engine<'a, S> {
    fn new(net: &'a MacroNet<S>, params: &'a CascadeParams<S>) -> Self {
        let n = net.len();
        Engine {
            net,
            params,
            in_removed: vec![S::zero(); n],
            out_removed: vec![S::zero(); n],
            step: vec![None; n],
            label: vec![None; n],
            touched: vec![false; n],
        }
    }

    fn reset(&mut self) {
        self.in_removed.fill(S::zero());
        self.out_removed.fill(S::zero());
        self.step.fill(None);
        self.label.fill(None);
        self.touched.fill(false);
    }

    fn run(&mut self, seed: usize) -> AvalancheResult {
        self.reset();
        let net = self.net;
        self.step[seed] = Some(0);
        let mut frontier = vec![seed];
        let mut round = 0u32;
        let mut events = Vec::new();
        let mut profile = Profile::default();

        while !frontier.is_empty() {
            let mut candidates = Vec::new();
            for &k in &frontier {
                for &(j, w) in net.out_links(k) {
                    if self.step[j].is_none() {
                        self.in_removed[j] = self.in_removed[j] + w;
                        self.mark(j, &mut candidates);
                    }
                }
                for &(j, w) in net.in_links(k) {
                    if self.step[j].is_none() {
                        self.out_removed[j] = self.out_removed[j] + w;
                        self.mark(j, &mut candidates);
                    }
                }
            }
            for &j in &candidates {
                self.touched[j] = false;
            }

            let next_round = round + 1;
            let mut fresh: Vec<usize> = candidates
                .into_iter()
                .filter(|&j| {
                    let cap = net.capacity_at(j);
                    self.params.crosses(self.in_removed[j], cap)
                        || self.params.crosses(self.out_removed[j], cap)
                })
                .collect();
            fresh.sort_by(|&a, &b| net.code(a).cmp(net.code(b)));

            // Classify against the collapsed set as it stood before this round.
            let classified: Vec<CollapseEvent> =
                fresh.iter().map(|&j| self.classify(j, next_round, seed)).collect();
            for (&j, event) in fresh.iter().zip(classified) {
                self.step[j] = Some(next_round);
                self.label[j] = Some(event.label);
                profile.bump(event.label);
                events.push(event);
            }
            if !fresh.is_empty() {
                round = next_round;
            }
            frontier = fresh;
        }

        AvalancheResult {
            seed: net.code(seed).to_string(),
            size: events.len(),
            duration: round,
            events,
            profile,
        }
    }

    #[inline]
    fn mark(&mut self, j: usize, candidates: &mut Vec<usize>) {
        if !self.touched[j] {
            self.touched[j] = true;
            candidates.push(j);
        }
    }

    fn classify(&self, j: usize, step: u32, seed: usize) -> CollapseEvent {
        let net = self.net;
        let cap = net.capacity_at(j);
        let in_cross = self.params.crosses(self.in_removed[j], cap);
        let out_cross = self.params.crosses(self.out_removed[j], cap);

        let mut best: Option<Trigger<S>> = None;
        let sides = [(Side::In, in_cross, net.in_links(j)), (Side::Out, out_cross, net.out_links(j))];
        for (side, crossing, adj) in sides {
            if !crossing {
                continue;
            }
            for &(k, w) in adj {
                let Some(k_step) = self.step[k] else { continue };
                if !self.params.crosses(w, cap) {
                    continue;
                }
                let cand = Trigger {
                    node: k,
                    weight: w,
                    step: k_step,
                    side,
                };
                if best.as_ref().is_none_or(|b| self.outranks(&cand, b)) {
                    best = Some(cand);
                }
            }
        }

        let country = net.code(j).to_string();
        match best {
            Some(trigger) => {
                let label = if trigger.node == seed {
                    Label::OneStepDirect
                } else {
                    match self.label[trigger.node] {
                        Some(Label::OneStepDirect | Label::MultiStepDirect) => Label::MultiStepDirect,
                        _ => Label::Residual,
                    }
                };
                CollapseEvent {
                    country,
                    step,
                    side: trigger.side,
                    cause: Cause::Direct,
                    trigger: Some(net.code(trigger.node).to_string()),
                    label,
                }
            }
            None => {
                let side = match (in_cross, out_cross) {
                    (true, false) => Side::In,
                    (false, true) => Side::Out,
                    _ => {
                        if self.out_removed[j] > self.in_removed[j] {
                            Side::Out
                        } else {
                            Side::In
                        }
                    }
                };
                CollapseEvent {
                    country,
                    step,
                    side,
                    cause: Cause::Indirect,
                    trigger: None,
                    label: Label::Indirect,
                }
            }
        }
    }

    /// Larger contribution wins, then earlier collapse, then smaller code.
    fn outranks(&self, a: &Trigger<S>, b: &Trigger<S>) -> bool {
        match a.weight.partial_cmp(&b.weight) {
            Some(Ordering::Greater) => return true,
            Some(Ordering::Less) => return false,
            _ => {}
        }
        match a.step.cmp(&b.step) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => {
                let (ca, cb) = (self.net.code(a.node), self.net.code(b.node));
                ca < cb || (ca == cb && a.side == Side::In && b.side == Side::Out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::m2;

    fn params() -> CascadeParams<f64> {
        CascadeParams::new(0.7, 0.1).unwrap()
    }

    fn summary(r: &AvalancheResult) -> Vec<(String, u32, Label, Option<String>)> {
        r.events
            .iter()
            .map(|e| (e.country.clone(), e.step, e.label, e.trigger.clone()))
            .collect()
    }

    #[test]
    fn seed_a_on_m2() {
        let r = run_avalanche(&m2(), "A", &params()).unwrap();
        assert_eq!(r.size, 3);
        assert_eq!(r.duration, 3);
        assert_eq!(
            summary(&r),
            vec![
                ("B".into(), 1, Label::OneStepDirect, Some("A".into())),
                ("D".into(), 2, Label::Indirect, None),
                ("F".into(), 3, Label::Residual, Some("D".into())),
            ]
        );
        assert_eq!(r.events[1].cause, Cause::Indirect);
        assert_eq!(r.events[1].side, Side::In);
    }

    #[test]
    fn seed_e_exercises_every_label() {
        let r = run_avalanche(&m2(), "E", &params()).unwrap();
        assert_eq!(r.size, 4);
        assert_eq!(r.duration, 4);
        assert_eq!(
            summary(&r),
            vec![
                ("A".into(), 1, Label::OneStepDirect, Some("E".into())),
                ("B".into(), 2, Label::MultiStepDirect, Some("A".into())),
                ("D".into(), 3, Label::Indirect, None),
                ("F".into(), 4, Label::Residual, Some("D".into())),
            ]
        );
        assert_eq!(
            r.profile,
            Profile {
                one_step_direct: 1,
                multi_step_direct: 1,
                indirect: 1,
                residual: 1
            }
        );
        // 0.7*60 > 0.7*50 on A's two crossing sides: the incoming link from E wins.
        assert_eq!(r.events[0].side, Side::In);
    }

    #[test]
    fn seed_d_reaches_b_through_its_export_link() {
        // B -> D carries 1.5; 0.7 * 1.5 = 1.05 > 0.1 * 10.
        let r = run_avalanche(&m2(), "D", &params()).unwrap();
        assert_eq!(r.size, 2);
        assert_eq!(r.duration, 1);
        assert_eq!(r.events[0].country, "B");
        assert_eq!(r.events[0].side, Side::Out);
        assert_eq!(r.events[0].label, Label::OneStepDirect);
        assert_eq!(r.events[1].country, "F");
        assert_eq!(r.events[1].side, Side::In);
    }

    #[test]
    fn leaf_seed_has_empty_avalanche() {
        let r = run_avalanche(&m2(), "F", &params()).unwrap();
        assert_eq!((r.size, r.duration), (0, 0));
        assert!(r.events.is_empty());
    }

    #[test]
    fn run_all_on_m2() {
        let all = run_all(&m2(), &params());
        let got: Vec<(&str, usize)> = all.iter().map(|(k, r)| (k.as_str(), r.size)).collect();
        assert_eq!(got, vec![("A", 3), ("B", 0), ("D", 2), ("E", 4), ("F", 0)]);
    }

    #[test]
    fn tiny_ratio_never_propagates() {
        let p = CascadeParams::new(0.001, 1.0).unwrap();
        assert!(run_all(&m2(), &p).values().all(|r| r.size == 0));
    }

    #[test]
    fn unknown_seed_and_bad_params() {
        assert!(matches!(
            run_avalanche(&m2(), "Q", &params()),
            Err(Error::UnknownCountry(_))
        ));
        assert!(CascadeParams::new(0.0, 0.1).is_err());
        assert!(CascadeParams::new(0.5, 1.5).is_err());
        assert!(CascadeParams::<f64>::from_ratio(-1.0).is_err());
    }

    #[test]
    fn ratio_realization() {
        let p = CascadeParams::<f64>::from_ratio(7.0).unwrap();
        assert!((p.f() - 0.7).abs() < 1e-15 && p.t() == 0.1);
        let p = CascadeParams::<f64>::from_ratio(20.0).unwrap();
        assert_eq!((p.f(), p.t()), (1.0, 0.05));
    }

    #[test]
    fn rational_engine_matches_float_on_m2() {
        use crate::Rational64;
        let exact = crate::fixtures::m2_as::<Rational64>();
        let p = CascadeParams::new(Rational64::new(7, 10), Rational64::new(1, 10)).unwrap();
        let float = run_all(&m2(), &params());
        assert_eq!(run_all(&exact, &p), float);
    }
}
