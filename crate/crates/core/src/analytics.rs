//! Structural and statistical views of a network and its avalanches.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cascade::{AvalancheMap, AvalancheResult};
use crate::error::{Error, Result};
use crate::network::MacroNet;
use crate::scalar::Scalar;

/// One trading partner in a trade-volume/GDP profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TgpPoint<S> {
    pub partner: String,
    pub partner_gdp: S,
    /// Bilateral volume, both directions summed.
    pub trade_volume: S,
    pub collapsed_by_profiled: bool,
}

/// Trade-volume/GDP profile of the country `result` was seeded at.
pub fn tgp_profile<S: Scalar>(net: &MacroNet<S>, result: &AvalancheResult) -> Result<Vec<TgpPoint<S>>> {
    let c = net.require(&result.seed)?;
    let collapsed: HashSet<&str> = result.collapsed().collect();
    let mut volume: BTreeMap<usize, S> = BTreeMap::new();
    for &(j, w) in net.out_links(c).iter().chain(net.in_links(c)) {
        let v = volume.entry(j).or_insert_with(S::zero);
        *v = *v + w;
    }
    Ok(volume
        .into_iter()
        .map(|(j, trade_volume)| {
            let partner = net.country(j);
            TgpPoint {
                partner: partner.code.clone(),
                partner_gdp: partner.gdp,
                trade_volume,
                collapsed_by_profiled: collapsed.contains(partner.code.as_str()),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankCorrelation {
    pub rho: f64,
    /// Two-sided p-value from the t approximation with `n - 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

/// Average ranks starting at 1; ties share their mean rank.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantVector);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<RankCorrelation> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "rank correlation needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("rank correlation needs n >= 3, got {n}")));
    }
    let rho = pearson(&mid_ranks(x), &mid_ranks(y))?;
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(RankCorrelation { rho, p_value, n })
}

/// GDP against avalanche size, one pair per country in network order.
pub fn spearman_gdp_avalanche<S: Scalar>(
    net: &MacroNet<S>,
    results: &AvalancheMap,
) -> Result<RankCorrelation> {
    let mut gdps = Vec::with_capacity(net.len());
    let mut sizes = Vec::with_capacity(net.len());
    for c in net.countries() {
        let r = results
            .get(&c.code)
            .ok_or_else(|| Error::UnknownCountry(c.code.clone()))?;
        gdps.push(c.gdp.to_f64_lossy());
        sizes.push(r.size as f64);
    }
    spearman(&gdps, &sizes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestEdge<S> {
    /// Lexicographically smaller code.
    pub a: String,
    pub b: String,
    pub weight: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningForest<S> {
    pub nodes: Vec<String>,
    pub edges: Vec<ForestEdge<S>>,
    pub components: usize,
}

impl<S: Scalar> SpanningForest<S> {
    pub fn total_weight(&self) -> S {
        self.edges.iter().fold(S::zero(), |acc, e| acc + e.weight)
    }

    pub fn edge_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|e| (e.a.as_str(), e.b.as_str()))
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Undirected pairs with weight `W(i,j) + W(j,i)`, keyed by `(min, max)` index.
pub fn symmetrized<S: Scalar>(net: &MacroNet<S>) -> BTreeMap<(usize, usize), S> {
    let mut pairs = BTreeMap::new();
    for l in net.links() {
        let key = (l.source.min(l.target), l.source.max(l.target));
        let w = pairs.entry(key).or_insert_with(S::zero);
        *w = *w + l.volume;
    }
    pairs
}

/// Maximum-weight spanning forest of the symmetrized network (Kruskal).
/// Equal weights are ordered by `(min code, max code)`.
pub fn max_spanning_forest<S: Scalar>(net: &MacroNet<S>) -> SpanningForest<S> {
    let mut candidates: Vec<(&str, &str, usize, usize, S)> = symmetrized(net)
        .into_iter()
        .map(|((i, j), w)| {
            let (ci, cj) = (net.code(i), net.code(j));
            if ci <= cj {
                (ci, cj, i, j, w)
            } else {
                (cj, ci, j, i, w)
            }
        })
        .collect();
    candidates.sort_by(|x, y| {
        y.4.partial_cmp(&x.4)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (x.0, x.1).cmp(&(y.0, y.1)))
    });
    let mut sets = DisjointSets::new(net.len());
    let mut edges = Vec::with_capacity(net.len().saturating_sub(1));
    for (a, b, i, j, weight) in candidates {
        if sets.union(i, j) {
            edges.push(ForestEdge {
                a: a.to_string(),
                b: b.to_string(),
                weight,
            });
        }
    }
    SpanningForest {
        nodes: net.countries().iter().map(|c| c.code.clone()).collect(),
        components: net.len() - edges.len(),
        edges,
    }
}

/// Directed graph with `i -> j` whenever `j` collapses in the avalanche seeded at `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvalancheNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<(String, String)>,
    /// Countries that neither cause nor suffer any collapse.
    pub isolated: Vec<String>,
}

impl AvalancheNetwork {
    pub fn edge_pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn out_degree(&self, code: &str) -> usize {
        self.edges.iter().filter(|(a, _)| a == code).count()
    }
}

pub fn avalanche_network(results: &AvalancheMap) -> AvalancheNetwork {
    let mut edges = Vec::new();
    let mut touched = BTreeSet::new();
    for (seed, r) in results {
        for e in &r.events {
            touched.insert(seed.as_str());
            touched.insert(e.country.as_str());
            edges.push((seed.clone(), e.country.clone()));
        }
    }
    let isolated = results
        .keys()
        .filter(|k| !touched.contains(k.as_str()))
        .cloned()
        .collect();
    AvalancheNetwork {
        nodes: results.keys().cloned().collect(),
        edges,
        isolated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntraFraction {
    pub intra: usize,
    pub total: usize,
    /// `None` when there are no edges.
    pub fraction: Option<f64>,
}

impl IntraFraction {
    pub fn inter(&self) -> usize {
        self.total - self.intra
    }
}

/// Share of edges whose endpoints carry the same continent tag.
pub fn intra_continental_fraction<'a, I>(
    edges: I,
    continents: &BTreeMap<String, String>,
) -> Result<IntraFraction>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let tag = |code: &str| {
        continents
            .get(code)
            .ok_or_else(|| Error::InvalidInput(format!("no continent tag for `{code}`")))
    };
    let (mut intra, mut total) = (0, 0);
    for (a, b) in edges {
        total += 1;
        if tag(a)? == tag(b)? {
            intra += 1;
        }
    }
    Ok(IntraFraction {
        intra,
        total,
        fraction: (total > 0).then(|| intra as f64 / total as f64),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinentEdge {
    pub from: String,
    pub to: String,
    pub weight: usize,
}

/// Avalanche network aggregated by continent; self-edges keep intra-continental mass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContinentGraph {
    pub continents: Vec<String>,
    pub edges: Vec<ContinentEdge>,
}

pub fn coarse_grain_continental(
    avnet: &AvalancheNetwork,
    continents: &BTreeMap<String, String>,
) -> Result<ContinentGraph> {
    let tag = |code: &str| {
        continents
            .get(code)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("no continent tag for `{code}`")))
    };
    let mut weights: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (a, b) in avnet.edge_pairs() {
        *weights.entry((tag(a)?, tag(b)?)).or_default() += 1;
    }
    let present: BTreeSet<String> = avnet
        .nodes
        .iter()
        .map(|c| tag(c))
        .collect::<Result<_>>()?;
    Ok(ContinentGraph {
        continents: present.into_iter().collect(),
        edges: weights
            .into_iter()
            .map(|((from, to), weight)| ContinentEdge { from, to, weight })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub countries: usize,
    pub sum_sizes: usize,
    pub nonzero: usize,
    /// Mean size over nonzero avalanches; `None` when every avalanche is empty.
    pub typical_nonzero: Option<f64>,
    /// Fraction of countries with a nonzero avalanche.
    pub likelihood: f64,
}

pub fn summary_stats(results: &AvalancheMap) -> Result<SummaryStats> {
    if results.is_empty() {
        return Err(Error::InvalidInput("no avalanche results".into()));
    }
    let sum_sizes: usize = results.values().map(|r| r.size).sum();
    let nonzero = results.values().filter(|r| r.size > 0).count();
    Ok(SummaryStats {
        countries: results.len(),
        sum_sizes,
        nonzero,
        typical_nonzero: (nonzero > 0).then(|| sum_sizes as f64 / nonzero as f64),
        likelihood: nonzero as f64 / results.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{run_all, run_avalanche, CascadeParams};
    use crate::fixtures::m2;
    use crate::network::{build_network, CapacityMode, Country, EndpointPolicy, TradeLink};

    fn m2_results() -> AvalancheMap {
        run_all(&m2(), &CascadeParams::new(0.7, 0.1).unwrap())
    }

    #[test]
    fn tgp_of_a_and_f() {
        let net = m2();
        let p = CascadeParams::new(0.7, 0.1).unwrap();
        let a = tgp_profile(&net, &run_avalanche(&net, "A", &p).unwrap()).unwrap();
        let got: Vec<(&str, f64, bool)> = a
            .iter()
            .map(|t| (t.partner.as_str(), t.trade_volume, t.collapsed_by_profiled))
            .collect();
        assert_eq!(got, vec![("B", 2.0, true), ("D", 1.6, true), ("E", 110.0, false)]);
        assert_eq!(a[2].partner_gdp, 1000.0);

        let f = tgp_profile(&net, &run_avalanche(&net, "F", &p).unwrap()).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!((f[0].partner.as_str(), f[0].trade_volume), ("D", 1.0));
        assert!(!f[0].collapsed_by_profiled);
    }

    #[test]
    fn tgp_of_isolated_country_is_empty() {
        let (net, _) = build_network(
            vec![Country::new("A", "X", 1.0), Country::new("B", "X", 1.0)],
            Vec::<TradeLink<f64>>::new(),
            CapacityMode::Gdp,
            EndpointPolicy::Strict,
        )
        .unwrap();
        let r = run_avalanche(&net, "A", &CascadeParams::new(0.7, 0.1).unwrap()).unwrap();
        assert!(tgp_profile(&net, &r).unwrap().is_empty());
    }

    #[test]
    fn mid_ranks_average_ties() {
        assert_eq!(mid_ranks(&[3.0, 0.0, 2.0, 4.0, 0.0]), vec![4.0, 1.5, 3.0, 5.0, 1.5]);
    }

    #[test]
    fn spearman_extremes_and_errors() {
        let up = [1.0, 2.0, 3.0, 4.0];
        let r = spearman(&up, &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!(r.rho, 1.0);
        assert_eq!(r.p_value, 0.0);
        assert_eq!(spearman(&up, &[4.0, 3.0, 2.0, 1.0]).unwrap().rho, -1.0);
        assert!(matches!(spearman(&up, &[1.0; 4]), Err(Error::ConstantVector)));
        assert!(spearman(&up[..2], &up[..2]).is_err());
        assert!(spearman(&up, &up[..3]).is_err());
    }

    #[test]
    fn spearman_on_m2() {
        let r = spearman(&[100.0, 10.0, 20.0, 1000.0, 5.0], &[3.0, 0.0, 2.0, 4.0, 0.0]).unwrap();
        let oracle = 9.5 / (10.0f64 * 9.5).sqrt();
        assert!((r.rho - oracle).abs() < 1e-12);
        assert!((r.rho - 0.9747).abs() < 1e-4);
        // t = rho * sqrt(3 / (1 - rho^2)) ~ 7.55 on 3 df.
        assert!(r.p_value > 0.001 && r.p_value < 0.01, "{}", r.p_value);
        let via_net = spearman_gdp_avalanche(&m2(), &m2_results()).unwrap();
        assert_eq!(via_net.rho, r.rho);
    }

    #[test]
    fn forest_of_m2() {
        let forest = max_spanning_forest(&m2());
        let got: Vec<(&str, &str, f64)> = forest
            .edges
            .iter()
            .map(|e| (e.a.as_str(), e.b.as_str(), e.weight))
            .collect();
        assert_eq!(
            got,
            vec![("A", "E", 110.0), ("A", "B", 2.0), ("A", "D", 1.6), ("D", "F", 1.0)]
        );
        assert_eq!(forest.components, 1);
        let frac = intra_continental_fraction(forest.edge_pairs(), &m2().continent_map()).unwrap();
        assert_eq!((frac.intra, frac.total, frac.fraction), (3, 4, Some(0.75)));
    }

    #[test]
    fn forest_of_triangle_and_disconnected() {
        let countries = ["A", "B", "C", "D"]
            .iter()
            .map(|c| Country::new(*c, "X", 1.0))
            .collect();
        let trades = vec![
            TradeLink::new("A", "B", 3.0),
            TradeLink::new("B", "C", 2.0),
            TradeLink::new("C", "A", 1.0),
        ];
        let (net, _) =
            build_network(countries, trades, CapacityMode::Gdp, EndpointPolicy::Strict).unwrap();
        let forest = max_spanning_forest(&net);
        assert_eq!(forest.edges.len(), 2);
        assert_eq!(forest.total_weight(), 5.0);
        assert_eq!(forest.components, 2);
    }

    #[test]
    fn forest_ties_break_by_codes() {
        let countries = ["A", "B", "C"].iter().map(|c| Country::new(*c, "X", 1.0)).collect();
        let trades = vec![
            TradeLink::new("C", "B", 1.0),
            TradeLink::new("B", "A", 1.0),
            TradeLink::new("A", "C", 1.0),
        ];
        let (net, _) =
            build_network(countries, trades, CapacityMode::Gdp, EndpointPolicy::Strict).unwrap();
        let pairs: Vec<(String, String)> = max_spanning_forest(&net)
            .edges
            .into_iter()
            .map(|e| (e.a, e.b))
            .collect();
        assert_eq!(pairs, vec![("A".into(), "B".into()), ("A".into(), "C".into())]);
    }

    #[test]
    fn avalanche_network_of_m2() {
        let avnet = avalanche_network(&m2_results());
        let edges: Vec<(&str, &str)> = avnet.edge_pairs().collect();
        assert_eq!(
            edges,
            vec![
                ("A", "B"),
                ("A", "D"),
                ("A", "F"),
                ("D", "B"),
                ("D", "F"),
                ("E", "A"),
                ("E", "B"),
                ("E", "D"),
                ("E", "F"),
            ]
        );
        assert!(avnet.isolated.is_empty());
        assert_eq!(avnet.out_degree("E"), 4);
        let frac = intra_continental_fraction(avnet.edge_pairs(), &m2().continent_map()).unwrap();
        assert_eq!((frac.intra, frac.total, frac.inter()), (5, 9, 4));

        let cg = coarse_grain_continental(&avnet, &m2().continent_map()).unwrap();
        assert_eq!(cg.continents, vec!["X1", "X2"]);
        assert_eq!(
            cg.edges,
            vec![
                ContinentEdge { from: "X1".into(), to: "X1".into(), weight: 5 },
                ContinentEdge { from: "X2".into(), to: "X1".into(), weight: 4 },
            ]
        );
    }

    #[test]
    fn empty_avalanches() {
        let results = run_all(&m2(), &CascadeParams::new(0.001, 1.0).unwrap());
        let avnet = avalanche_network(&results);
        assert!(avnet.edges.is_empty());
        assert_eq!(avnet.isolated.len(), 5);
        let frac = intra_continental_fraction(avnet.edge_pairs(), &m2().continent_map()).unwrap();
        assert_eq!(frac.fraction, None);
        let cg = coarse_grain_continental(&avnet, &m2().continent_map()).unwrap();
        assert!(cg.edges.is_empty());
        let stats = summary_stats(&results).unwrap();
        assert_eq!((stats.sum_sizes, stats.typical_nonzero, stats.likelihood), (0, None, 0.0));
    }

    #[test]
    fn missing_continent_is_an_error() {
        let map = BTreeMap::from([("A".to_string(), "X".to_string())]);
        assert!(intra_continental_fraction([("A", "B")], &map).is_err());
    }

    #[test]
    fn summary_of_m2() {
        let s = summary_stats(&m2_results()).unwrap();
        assert_eq!(s.sum_sizes, 9);
        assert_eq!(s.nonzero, 3);
        assert_eq!(s.typical_nonzero, Some(3.0));
        assert_eq!(s.likelihood, 0.6);
        assert!(summary_stats(&AvalancheMap::new()).is_err());
    }
}
