//! Countries, trade links and the directed macroeconomic network.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A node of the trade network. Monetary fields are in million US dollars.
#[derive(Debug, Clone, PartialEq)]
pub struct Country<S> {
    pub code: String,
    pub name: String,
    pub continent: String,
    pub gdp: S,
    pub cab: Option<S>,
}

impl<S: Scalar> Country<S> {
    pub fn new(code: impl Into<String>, continent: impl Into<String>, gdp: S) -> Self {
        let code = code.into();
        Country {
            name: code.clone(),
            code,
            continent: continent.into(),
            gdp,
            cab: None,
        }
    }

    pub fn with_cab(mut self, cab: S) -> Self {
        self.cab = Some(cab);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeLink<S> {
    pub exporter: String,
    pub importer: String,
    pub volume: S,
}

impl<S> TradeLink<S> {
    pub fn new(exporter: impl Into<String>, importer: impl Into<String>, volume: S) -> Self {
        TradeLink {
            exporter: exporter.into(),
            importer: importer.into(),
            volume,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityMode {
    #[default]
    Gdp,
    GdpCab,
}

impl CapacityMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CapacityMode::Gdp => "gdp",
            CapacityMode::GdpCab => "gdp-cab",
        }
    }
}

impl fmt::Display for CapacityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CapacityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gdp" => Ok(CapacityMode::Gdp),
            "gdp-cab" => Ok(CapacityMode::GdpCab),
            other => Err(Error::InvalidInput(format!(
                "unknown capacity mode `{other}` (expected gdp or gdp-cab)"
            ))),
        }
    }
}

/// How trade links naming an unknown country are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EndpointPolicy {
    #[default]
    Strict,
    /// Drop the link and record a warning.
    Lenient,
}

/// A directed link between two node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link<S> {
    pub source: usize,
    pub target: usize,
    pub volume: S,
}

/// Directed, node- and link-weighted trade network. Immutable once built.
#[derive(Debug, Clone)]
pub struct MacroNet<S> {
    countries: Vec<Country<S>>,
    index: HashMap<String, usize>,
    links: Vec<Link<S>>,
    out_adj: Vec<Vec<(usize, S)>>,
    in_adj: Vec<Vec<(usize, S)>>,
    capacities: Vec<S>,
    mode: CapacityMode,
}

/// Builds a network from validated parts, returning non-fatal warnings alongside.
pub fn build_network<S: Scalar>(
    countries: Vec<Country<S>>,
    trades: Vec<TradeLink<S>>,
    mode: CapacityMode,
    policy: EndpointPolicy,
) -> Result<(MacroNet<S>, Vec<String>)> {
    let mut index = HashMap::with_capacity(countries.len());
    for (i, c) in countries.iter().enumerate() {
        validate_country(c)?;
        if index.insert(c.code.clone(), i).is_some() {
            return Err(Error::DuplicateCountry(c.code.clone()));
        }
    }
    if mode == CapacityMode::GdpCab {
        let missing: Vec<String> = countries
            .iter()
            .filter(|c| c.cab.is_none())
            .map(|c| c.code.clone())
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingCab(missing));
        }
    }

    let mut warnings = Vec::new();
    let mut seen = HashSet::with_capacity(trades.len());
    let mut links = Vec::with_capacity(trades.len());
    for trade in trades {
        validate_trade(&trade)?;
        let source = index.get(&trade.exporter).copied();
        let target = index.get(&trade.importer).copied();
        let (source, target) = match (source, target) {
            (Some(s), Some(t)) => (s, t),
            _ => {
                let code = if source.is_none() {
                    trade.exporter.clone()
                } else {
                    trade.importer.clone()
                };
                match policy {
                    EndpointPolicy::Strict => {
                        return Err(Error::UnknownEndpoint {
                            exporter: trade.exporter,
                            importer: trade.importer,
                            code,
                        })
                    }
                    EndpointPolicy::Lenient => {
                        let msg = format!(
                            "dropped trade link {} -> {}: unknown country `{code}`",
                            trade.exporter, trade.importer
                        );
                        log::warn!("{msg}");
                        warnings.push(msg);
                        continue;
                    }
                }
            }
        };
        if !seen.insert((source, target)) {
            return Err(Error::DuplicateLink(trade.exporter, trade.importer));
        }
        links.push(Link {
            source,
            target,
            volume: trade.volume,
        });
    }

    let net = MacroNet::assemble(countries, index, links, mode);
    for (i, c) in net.capacities.iter().enumerate() {
        if *c <= S::zero() {
            let msg = format!(
                "country `{}` has non-positive capacity {c}; any decrement collapses it",
                net.countries[i].code
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok((net, warnings))
}

fn validate_country<S: Scalar>(c: &Country<S>) -> Result<()> {
    if !c.gdp.is_finite_value() || c.gdp <= S::zero() {
        return Err(Error::NonPositiveGdp {
            code: c.code.clone(),
            gdp: c.gdp.to_string(),
        });
    }
    if c.continent.trim().is_empty() {
        return Err(Error::EmptyContinent(c.code.clone()));
    }
    if let Some(cab) = c.cab {
        if !cab.is_finite_value() {
            return Err(Error::InvalidInput(format!(
                "country `{}` has a non-finite CAB",
                c.code
            )));
        }
    }
    Ok(())
}

fn validate_trade<S: Scalar>(t: &TradeLink<S>) -> Result<()> {
    if t.exporter == t.importer {
        return Err(Error::SelfLoop(t.exporter.clone()));
    }
    if !t.volume.is_finite_value() || t.volume <= S::zero() {
        return Err(Error::NonPositiveVolume {
            exporter: t.exporter.clone(),
            importer: t.importer.clone(),
            volume: t.volume.to_string(),
        });
    }
    Ok(())
}

impl<S: Scalar> MacroNet<S> {
    fn assemble(
        countries: Vec<Country<S>>,
        index: HashMap<String, usize>,
        links: Vec<Link<S>>,
        mode: CapacityMode,
    ) -> Self {
        let n = countries.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for l in &links {
            out_adj[l.source].push((l.target, l.volume));
            in_adj[l.target].push((l.source, l.volume));
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_by_key(|&(j, _)| j);
        }
        let capacities = countries
            .iter()
            .map(|c| match mode {
                CapacityMode::Gdp => c.gdp,
                CapacityMode::GdpCab => c.gdp + c.cab.unwrap_or_else(S::zero),
            })
            .collect();
        MacroNet {
            countries,
            index,
            links,
            out_adj,
            in_adj,
            capacities,
            mode,
        }
    }

    /// Same countries and capacity mode, different link set. Used by the null models.
    pub(crate) fn with_links(&self, links: Vec<Link<S>>) -> Self {
        MacroNet::assemble(self.countries.clone(), self.index.clone(), links, self.mode)
    }

    /// Rebuilds the network under another capacity mode.
    pub fn with_capacity_mode(&self, mode: CapacityMode) -> Result<Self> {
        let (net, _) = build_network(
            self.countries.clone(),
            self.trade_links(),
            mode,
            EndpointPolicy::Strict,
        )?;
        Ok(net)
    }

    pub fn len(&self) -> usize {
        self.countries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.countries.is_empty()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn countries(&self) -> &[Country<S>] {
        &self.countries
    }

    pub fn country(&self, idx: usize) -> &Country<S> {
        &self.countries[idx]
    }

    pub fn code(&self, idx: usize) -> &str {
        &self.countries[idx].code
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn require(&self, code: &str) -> Result<usize> {
        self.index_of(code)
            .ok_or_else(|| Error::UnknownCountry(code.to_string()))
    }

    pub fn links(&self) -> &[Link<S>] {
        &self.links
    }

    /// Outgoing `(target, volume)` pairs sorted by target index.
    pub fn out_links(&self, idx: usize) -> &[(usize, S)] {
        &self.out_adj[idx]
    }

    /// Incoming `(source, volume)` pairs sorted by source index.
    pub fn in_links(&self, idx: usize) -> &[(usize, S)] {
        &self.in_adj[idx]
    }

    pub fn weight(&self, source: usize, target: usize) -> Option<S> {
        let adj = &self.out_adj[source];
        adj.binary_search_by_key(&target, |&(j, _)| j)
            .ok()
            .map(|pos| adj[pos].1)
    }

    pub fn capacity_mode(&self) -> CapacityMode {
        self.mode
    }

    /// Capacity of the node at `idx` under the network's capacity mode.
    pub fn capacity_at(&self, idx: usize) -> S {
        self.capacities[idx]
    }

    pub fn capacity(&self, code: &str) -> Result<S> {
        Ok(self.capacities[self.require(code)?])
    }

    pub fn in_strength(&self, idx: usize) -> S {
        self.in_adj[idx].iter().fold(S::zero(), |acc, &(_, w)| acc + w)
    }

    pub fn out_strength(&self, idx: usize) -> S {
        self.out_adj[idx].iter().fold(S::zero(), |acc, &(_, w)| acc + w)
    }

    pub fn total_volume(&self) -> S {
        self.links.iter().fold(S::zero(), |acc, l| acc + l.volume)
    }

    /// Links as code-addressed records, in insertion order.
    pub fn trade_links(&self) -> Vec<TradeLink<S>> {
        self.links
            .iter()
            .map(|l| TradeLink::new(self.code(l.source), self.code(l.target), l.volume))
            .collect()
    }

    pub fn continent_map(&self) -> BTreeMap<String, String> {
        self.countries
            .iter()
            .map(|c| (c.code.clone(), c.continent.clone()))
            .collect()
    }
}

/// Capacity of `gdp`/`cab` under `mode`, without building a network.
pub fn capacity<S: Scalar>(country: &Country<S>, mode: CapacityMode) -> Result<S> {
    match mode {
        CapacityMode::Gdp => Ok(country.gdp),
        CapacityMode::GdpCab => country
            .cab
            .map(|cab| country.gdp + cab)
            .ok_or_else(|| Error::MissingCab(vec![country.code.clone()])),
    }
}
