//! Null models and ensemble statistics.
//!
//! Two randomizations of a trade network:
//!
//! * **GSN** swaps the importers of two links whose weights differ by less than
//!   a relative tolerance. Weights stay attached to their links, so every
//!   exporter keeps its exact set of outgoing weights and both degree
//!   sequences are unchanged.
//! * **GDN** cuts every link into 1 M$ units, then rematches export units to
//!   import units at random, never within one country, and merges parallel
//!   units back into weighted links.
//!
//! All randomness is drawn from ChaCha8. A sample's generator is seeded with
//! the ensemble's master seed and placed on stream `index`, so sample `i` sees
//! the same numbers regardless of how samples are scheduled.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    avalanche_network, intra_continental_fraction, max_spanning_forest, summary_stats,
};
use crate::cascade::{run_all, CascadeParams};
use crate::error::{Error, Result};
use crate::network::{Link, MacroNet};
use crate::scalar::Scalar;

/// Random stream for sample `index` of an ensemble seeded with `master_seed`.
pub fn sample_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GsnConfig {
    /// Maximum relative weight difference for an accepted swap.
    pub weight_tolerance: f64,
    /// Defaults to `20 * |E|`.
    pub max_accepted_swaps: Option<usize>,
    /// Defaults to `200 * |E|`.
    pub max_attempts: Option<usize>,
    pub rng_seed: u64,
}

impl Default for GsnConfig {
    fn default() -> Self {
        GsnConfig {
            weight_tolerance: 0.01,
            max_accepted_swaps: None,
            max_attempts: None,
            rng_seed: 0,
        }
    }
}

impl GsnConfig {
    fn budgets(&self, links: usize) -> Result<(usize, usize)> {
        if self.weight_tolerance.is_nan() || self.weight_tolerance <= 0.0 {
            return Err(Error::InvalidInput("GSN weight tolerance must be positive".into()));
        }
        let accepted = self.max_accepted_swaps.unwrap_or(20 * links);
        let attempts = self.max_attempts.unwrap_or(200 * links);
        if accepted == 0 || attempts == 0 {
            return Err(Error::InvalidInput("GSN budgets must be positive".into()));
        }
        Ok((accepted, attempts))
    }
}

/// `(attempts so far, accepted so far)`, sampled every `|E|` attempts.
pub type AcceptanceTrace = Vec<(usize, usize)>;

#[derive(Debug, Clone)]
pub struct GsnOutcome<S> {
    pub net: MacroNet<S>,
    pub accepted: usize,
    pub attempts: usize,
    pub trace: AcceptanceTrace,
}

/// Whether two weights are within `tolerance` of each other, relative to both.
pub fn swap_compatible(w1: f64, w2: f64, tolerance: f64) -> bool {
    let diff = (w1 - w2).abs();
    diff / w1 < tolerance && diff / w2 < tolerance
}

pub fn gsn_sample<S: Scalar>(net: &MacroNet<S>, config: &GsnConfig) -> Result<GsnOutcome<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    gsn_with_rng(net, config, &mut rng)
}

pub fn gsn_with_rng<S: Scalar, R: Rng>(
    net: &MacroNet<S>,
    config: &GsnConfig,
    rng: &mut R,
) -> Result<GsnOutcome<S>> {
    let m = net.link_count();
    if m < 2 {
        return Err(Error::Randomization(format!(
            "GSN needs at least two links, network has {m}"
        )));
    }
    let (max_accepted, max_attempts) = config.budgets(m)?;
    let mut links: Vec<Link<S>> = net.links().to_vec();
    let weights: Vec<f64> = links.iter().map(|l| l.volume.to_f64_lossy()).collect();
    let mut present: HashSet<(usize, usize)> = links.iter().map(|l| (l.source, l.target)).collect();

    let mut accepted = 0;
    let mut attempts = 0;
    let mut trace = Vec::new();
    while accepted < max_accepted && attempts < max_attempts {
        attempts += 1;
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        let (i, j) = (links[a].source, links[a].target);
        let (k, l) = (links[b].source, links[b].target);
        let admissible = swap_compatible(weights[a], weights[b], config.weight_tolerance)
            && i != l
            && k != j
            && !present.contains(&(i, l))
            && !present.contains(&(k, j));
        if admissible {
            present.remove(&(i, j));
            present.remove(&(k, l));
            present.insert((i, l));
            present.insert((k, j));
            links[a].target = l;
            links[b].target = j;
            accepted += 1;
        }
        if attempts % m == 0 {
            trace.push((attempts, accepted));
        }
    }
    if trace.last().map(|t| t.0) != Some(attempts) {
        trace.push((attempts, accepted));
    }
    if accepted == 0 {
        log::debug!("GSN accepted no swaps in {attempts} attempts; sample equals the input");
    }
    Ok(GsnOutcome {
        net: net.with_links(links),
        accepted,
        attempts,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct GdnOutcome<S> {
    pub net: MacroNet<S>,
    pub warnings: Vec<String>,
    /// Stalled same-country tails resolved by swapping with an earlier pairing.
    pub repairs: usize,
}

/// Number of whole 1 M$ units in `volume`, rounding halves up.
pub fn unit_count<S: Scalar>(volume: S) -> u64 {
    let v = volume.to_f64_lossy();
    if v.is_finite() && v > 0.0 {
        (v + 0.5).floor() as u64
    } else {
        0
    }
}

/// Export-unit and import-unit totals per node after rounding.
pub fn unit_totals<S: Scalar>(net: &MacroNet<S>) -> (Vec<u64>, Vec<u64>) {
    let mut exports = vec![0; net.len()];
    let mut imports = vec![0; net.len()];
    for l in net.links() {
        let u = unit_count(l.volume);
        exports[l.source] += u;
        imports[l.target] += u;
    }
    (exports, imports)
}

pub fn gdn_sample<S: Scalar>(net: &MacroNet<S>, rng_seed: u64) -> Result<GdnOutcome<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    gdn_with_rng(net, &mut rng)
}

pub fn gdn_with_rng<S: Scalar, R: Rng>(net: &MacroNet<S>, rng: &mut R) -> Result<GdnOutcome<S>> {
    let n = net.len();
    if n > u32::MAX as usize {
        return Err(Error::Randomization("too many countries for unit matching".into()));
    }
    let mut warnings = Vec::new();
    let mut exports: Vec<u32> = Vec::new();
    let mut imports: Vec<u32> = Vec::new();
    for l in net.links() {
        let units = unit_count(l.volume);
        if units == 0 {
            let msg = format!(
                "dropped link {} -> {} ({} M$ rounds to zero units)",
                net.code(l.source),
                net.code(l.target),
                l.volume
            );
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        exports.extend(std::iter::repeat_n(l.source as u32, units as usize));
        imports.extend(std::iter::repeat_n(l.target as u32, units as usize));
    }

    let mut exp_left = vec![0u64; n];
    let mut imp_left = vec![0u64; n];
    for &c in &exports {
        exp_left[c as usize] += 1;
    }
    for &c in &imports {
        imp_left[c as usize] += 1;
    }

    let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(exports.len());
    let mut repairs = 0;
    while !exports.is_empty() {
        let a = rng.random_range(0..exports.len());
        let b = rng.random_range(0..imports.len());
        let (x, y) = (exports[a], imports[b]);
        if x != y {
            pairs.push((x, y));
            exports.swap_remove(a);
            imports.swap_remove(b);
            exp_left[x as usize] -= 1;
            imp_left[y as usize] -= 1;
            continue;
        }
        let left = exports.len() as u64;
        if exp_left[x as usize] == left && imp_left[x as usize] == left {
            // Only same-country units remain: trade each with a random earlier pairing.
            for _ in 0..left {
                repair_one(&mut pairs, x, rng).ok_or_else(|| {
                    Error::Randomization(format!(
                        "unit matching deadlocked on `{}`, which holds too many units",
                        net.code(x as usize)
                    ))
                })?;
                repairs += 1;
            }
            exports.clear();
            imports.clear();
        }
    }

    let mut merged: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    for p in pairs {
        *merged.entry(p).or_default() += 1;
    }
    let links = merged
        .into_iter()
        .map(|((s, t), units)| Link {
            source: s as usize,
            target: t as usize,
            volume: S::from_count(units),
        })
        .collect();
    Ok(GdnOutcome {
        net: net.with_links(links),
        warnings,
        repairs,
    })
}

fn repair_one<R: Rng>(pairs: &mut Vec<(u32, u32)>, c: u32, rng: &mut R) -> Option<()> {
    if pairs.is_empty() {
        return None;
    }
    let eligible = |&(x, y): &(u32, u32)| x != c && y != c;
    let mut pick = None;
    for _ in 0..64 {
        let k = rng.random_range(0..pairs.len());
        if eligible(&pairs[k]) {
            pick = Some(k);
            break;
        }
    }
    let pick = match pick {
        Some(k) => k,
        None => {
            let candidates: Vec<usize> = (0..pairs.len()).filter(|&k| eligible(&pairs[k])).collect();
            if candidates.is_empty() {
                return None;
            }
            candidates[rng.random_range(0..candidates.len())]
        }
    };
    let (x, y) = pairs[pick];
    pairs[pick] = (x, c);
    pairs.push((c, y));
    Some(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tail {
    Upper,
    Lower,
}

/// Fraction of null samples at least as extreme as the observed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalP {
    pub tail: Tail,
    pub exceedances: usize,
    pub samples: usize,
    /// `exceedances / samples`, or `1 / samples` when nothing exceeded.
    pub p: f64,
    /// True when `p` is the resolution bound `1 / samples` rather than an estimate.
    pub below_resolution: bool,
}

impl fmt::Display for EmpiricalP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.below_resolution {
            write!(f, "< {}", self.p)
        } else {
            write!(f, "{}", self.p)
        }
    }
}

pub fn empirical_p(observed: f64, samples: &[f64], tail: Tail) -> Result<EmpiricalP> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("empirical p-value needs at least one sample".into()));
    }
    let exceedances = samples
        .iter()
        .filter(|&&s| match tail {
            Tail::Upper => s >= observed,
            Tail::Lower => s <= observed,
        })
        .count();
    let total = samples.len();
    let below_resolution = exceedances == 0;
    Ok(EmpiricalP {
        tail,
        exceedances,
        samples: total,
        p: if below_resolution { 1.0 } else { exceedances as f64 } / total as f64,
        below_resolution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NullModel {
    Gsn,
    Gdn,
}

impl fmt::Display for NullModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NullModel::Gsn => "gsn",
            NullModel::Gdn => "gdn",
        })
    }
}

/// Statistics gathered per network, in [`STATISTICS`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub sum_sizes: f64,
    pub typical_nonzero: Option<f64>,
    pub likelihood: f64,
    pub avnet_edges: f64,
    pub avnet_intra: f64,
    pub avnet_intra_fraction: Option<f64>,
    pub forest_intra: f64,
    pub forest_intra_fraction: Option<f64>,
    pub sizes: Vec<usize>,
}

/// Statistic names with the tail that counts as "at least as extreme".
pub const STATISTICS: [(&str, Tail); 8] = [
    ("sum_sizes", Tail::Upper),
    ("typical_nonzero", Tail::Upper),
    ("likelihood", Tail::Lower),
    ("avnet_edges", Tail::Upper),
    ("avnet_intra", Tail::Lower),
    ("avnet_intra_fraction", Tail::Lower),
    ("forest_intra", Tail::Lower),
    ("forest_intra_fraction", Tail::Lower),
];

impl NetworkStats {
    pub fn compute<S: Scalar>(net: &MacroNet<S>, params: &CascadeParams<S>) -> Result<Self> {
        let results = run_all(net, params);
        let summary = summary_stats(&results)?;
        let continents = net.continent_map();
        let avnet = avalanche_network(&results);
        let av_intra = intra_continental_fraction(avnet.edge_pairs(), &continents)?;
        let forest = max_spanning_forest(net);
        let forest_intra = intra_continental_fraction(forest.edge_pairs(), &continents)?;
        Ok(NetworkStats {
            sum_sizes: summary.sum_sizes as f64,
            typical_nonzero: summary.typical_nonzero,
            likelihood: summary.likelihood,
            avnet_edges: av_intra.total as f64,
            avnet_intra: av_intra.intra as f64,
            avnet_intra_fraction: av_intra.fraction,
            forest_intra: forest_intra.intra as f64,
            forest_intra_fraction: forest_intra.fraction,
            sizes: net
                .countries()
                .iter()
                .map(|c| results[&c.code].size)
                .collect(),
        })
    }

    pub fn values(&self) -> [Option<f64>; 8] {
        [
            Some(self.sum_sizes),
            self.typical_nonzero,
            Some(self.likelihood),
            Some(self.avnet_edges),
            Some(self.avnet_intra),
            self.avnet_intra_fraction,
            Some(self.forest_intra),
            self.forest_intra_fraction,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSeries {
    pub name: String,
    pub tail: Tail,
    /// One entry per successful sample; `None` where the statistic is undefined.
    pub values: Vec<Option<f64>>,
    pub mean: Option<f64>,
    /// Population standard deviation over defined values.
    pub sd: Option<f64>,
    pub observed: Option<f64>,
    pub p: Option<EmpiricalP>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub model: NullModel,
    pub master_seed: u64,
    pub rng: String,
    pub requested: usize,
    pub completed: usize,
    pub statistics: Vec<StatSeries>,
    /// Mean avalanche size per country over the samples.
    pub mean_sizes: BTreeMap<String, f64>,
    pub failures: Vec<SampleFailure>,
    pub warnings: Vec<String>,
    /// Statistics of each successful sample, in index order.
    #[serde(skip)]
    pub per_sample: Vec<(u64, NetworkStats)>,
}

impl EnsembleSummary {
    pub fn stat(&self, name: &str) -> Option<&StatSeries> {
        self.statistics.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub model: NullModel,
    pub samples: usize,
    pub master_seed: u64,
    /// Swap settings for GSN; its `rng_seed` is ignored in favour of per-sample streams.
    pub gsn: GsnConfig,
}

impl EnsembleConfig {
    pub fn new(model: NullModel, samples: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            model,
            samples,
            master_seed,
            gsn: GsnConfig::default(),
        }
    }
}

/// Generates `samples` null networks, runs the cascade pipeline on each and
/// compares against the observed network.
pub fn ensemble<S: Scalar>(
    net: &MacroNet<S>,
    config: &EnsembleConfig,
    params: &CascadeParams<S>,
) -> Result<EnsembleSummary> {
    if config.samples == 0 {
        return Err(Error::InvalidInput("ensemble needs at least one sample".into()));
    }
    let observed = NetworkStats::compute(net, params)?;
    type Outcome = Result<(NetworkStats, Vec<String>, bool)>;
    let outcomes: Vec<(u64, Outcome)> = (0..config.samples as u64)
        .into_par_iter()
        .map(|index| {
            let mut rng = sample_rng(config.master_seed, index);
            let sampled = match config.model {
                NullModel::Gsn => gsn_with_rng(net, &config.gsn, &mut rng)
                    .map(|o| (o.net, Vec::new(), o.accepted == 0)),
                NullModel::Gdn => gdn_with_rng(net, &mut rng).map(|o| {
                    let warn = if index == 0 { o.warnings } else { Vec::new() };
                    (o.net, warn, false)
                }),
            };
            let stats = sampled.and_then(|(sample, warn, stalled)| {
                NetworkStats::compute(&sample, params).map(|s| (s, warn, stalled))
            });
            (index, stats)
        })
        .collect();

    let mut per_sample = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    let mut stalled = 0;
    for (index, outcome) in outcomes {
        match outcome {
            Ok((stats, warn, stuck)) => {
                warnings.extend(warn);
                stalled += usize::from(stuck);
                per_sample.push((index, stats));
            }
            Err(e) => failures.push(SampleFailure {
                index,
                message: e.to_string(),
            }),
        }
    }
    if stalled > 0 {
        warnings.push(format!(
            "{stalled} of {} GSN samples accepted no swaps and equal the input",
            config.samples
        ));
    }

    let observed_values = observed.values();
    let statistics = STATISTICS
        .iter()
        .enumerate()
        .map(|(k, &(name, tail))| {
            let values: Vec<Option<f64>> = per_sample.iter().map(|(_, s)| s.values()[k]).collect();
            let defined: Vec<f64> = values.iter().flatten().copied().collect();
            let (mean, sd) = mean_sd(&defined);
            let observed = observed_values[k];
            let p = match observed {
                Some(obs) if !defined.is_empty() => Some(empirical_p(obs, &defined, tail)?),
                _ => None,
            };
            Ok(StatSeries {
                name: name.to_string(),
                tail,
                values,
                mean,
                sd,
                observed,
                p,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean_sizes = BTreeMap::new();
    if !per_sample.is_empty() {
        for (i, c) in net.countries().iter().enumerate() {
            let total: usize = per_sample.iter().map(|(_, s)| s.sizes[i]).sum();
            mean_sizes.insert(c.code.clone(), total as f64 / per_sample.len() as f64);
        }
    }

    Ok(EnsembleSummary {
        model: config.model,
        master_seed: config.master_seed,
        rng: "ChaCha8, seeded from master_seed, stream = sample index".into(),
        requested: config.samples,
        completed: per_sample.len(),
        statistics,
        mean_sizes,
        failures,
        warnings,
        per_sample,
    })
}

pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}
