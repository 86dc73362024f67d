//! Avalanche size distributions, tail fits and the f/t sweep.

use serde::{Deserialize, Serialize};

use crate::cascade::{run_all, sizes, AvalancheMap, CascadeParams};
use crate::error::{Error, Result};
use crate::network::MacroNet;
use crate::scalar::Scalar;

/// Number of countries whose avalanche size is at least `size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CumulativePoint {
    pub size: usize,
    pub count: usize,
}

/// Cumulative counts for every size from 0 up to the largest observed.
pub fn cumulative_size_counts(sizes: &[usize]) -> Result<Vec<CumulativePoint>> {
    let max = *sizes
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidInput("no avalanche results".into()))?;
    let mut hist = vec![0usize; max + 1];
    for &s in sizes {
        hist[s] += 1;
    }
    let mut running = 0;
    let mut curve: Vec<CumulativePoint> = hist
        .iter()
        .enumerate()
        .rev()
        .map(|(size, &c)| {
            running += c;
            CumulativePoint { size, count: running }
        })
        .collect();
    curve.reverse();
    Ok(curve)
}

pub fn cumulative_counts(results: &AvalancheMap) -> Result<Vec<CumulativePoint>> {
    cumulative_size_counts(&sizes(results))
}

/// Default fit window: from A = 1 to the largest A still held by two countries.
pub fn default_fit_range(curve: &[CumulativePoint]) -> Option<(usize, usize)> {
    let upper = curve.iter().filter(|p| p.count >= 2).map(|p| p.size).max()?;
    (upper >= 1).then_some((1, upper))
}

/// Least-squares slope of `log10(count)` against `log10(A + 1)` over `[lo, hi]`.
pub fn fit_log_slope<I>(points: I, range: (f64, f64)) -> Result<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (lo, hi) = range;
    let xy: Vec<(f64, f64)> = points
        .into_iter()
        .filter(|&(a, c)| a >= lo && a <= hi && c > 0.0)
        .map(|(a, c)| ((a + 1.0).log10(), c.log10()))
        .collect();
    let mut xs: Vec<f64> = xy.iter().map(|p| p.0).collect();
    xs.dedup();
    if xs.len() < 3 {
        return Err(Error::InsufficientPoints(xs.len()));
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let (sxy, sxx) = xy.iter().fold((0.0, 0.0), |(sxy, sxx), &(x, y)| {
        (sxy + (x - mx) * (y - my), sxx + (x - mx) * (x - mx))
    });
    Ok(sxy / sxx)
}

/// Tail slope of a cumulative curve. A slope near -1 marks the critical regime.
pub fn tail_exponent(curve: &[CumulativePoint], range: Option<(usize, usize)>) -> Result<f64> {
    let (lo, hi) = match range.or_else(|| default_fit_range(curve)) {
        Some(r) => r,
        None => return Err(Error::InsufficientPoints(0)),
    };
    fit_log_slope(
        curve.iter().map(|p| (p.size as f64, p.count as f64)),
        (lo as f64, hi as f64),
    )
}

/// Orders of magnitude spanned by nonzero avalanche sizes, `log10(max A)`.
pub fn decades_spanned(curve: &[CumulativePoint]) -> f64 {
    curve
        .iter()
        .filter(|p| p.size >= 1 && p.count > 0)
        .map(|p| p.size)
        .max()
        .map_or(0.0, |m| (m as f64).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Every avalanche stays below 5% of the network.
    RapidDecay,
    Broad,
    /// Some seed brings down more than half of the network.
    SpanningPeak,
}

impl Regime {
    pub fn classify(max_size: usize, nodes: usize) -> Regime {
        let max = max_size as f64;
        let n = nodes as f64;
        if max < 0.05 * n {
            Regime::RapidDecay
        } else if max > 0.5 * n {
            Regime::SpanningPeak
        } else {
            Regime::Broad
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::RapidDecay => "rapid-decay",
            Regime::Broad => "broad",
            Regime::SpanningPeak => "spanning-peak",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub f: f64,
    pub t: f64,
    pub max_size: usize,
    pub sum_sizes: usize,
    pub tail_slope: Option<f64>,
    pub decades: f64,
    pub regime: Regime,
    pub curve: Vec<CumulativePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub nodes: usize,
    pub rows: Vec<SweepRow>,
    /// Grid ratio whose tail slope is closest to -1.
    pub critical_estimate: Option<f64>,
    /// Set when the grid is too coarse (fewer than three ratios) to trust the estimate.
    pub low_confidence: bool,
    /// Largest ratio whose maximum avalanche stays under 5% of the network.
    pub rapid_decay_upper: Option<f64>,
    /// Smallest ratio where some avalanche exceeds half of the network.
    pub spanning_lower: Option<f64>,
}

/// `points` ratios spaced logarithmically over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && points >= 1) {
        return Err(Error::InvalidInput(format!(
            "bad ratio grid: lo = {lo}, hi = {hi}, points = {points}"
        )));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

pub fn sweep<S: Scalar>(net: &MacroNet<S>, grid: &[f64]) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty f/t grid".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &ratio in grid {
        let params = CascadeParams::<S>::from_ratio(ratio)?;
        let results = run_all(net, &params);
        let sizes = sizes(&results);
        let curve = if sizes.is_empty() {
            vec![CumulativePoint { size: 0, count: 0 }]
        } else {
            cumulative_size_counts(&sizes)?
        };
        let max_size = sizes.iter().copied().max().unwrap_or(0);
        rows.push(SweepRow {
            ratio,
            f: params.f().to_f64_lossy(),
            t: params.t().to_f64_lossy(),
            max_size,
            sum_sizes: sizes.iter().sum(),
            tail_slope: tail_exponent(&curve, None).ok(),
            decades: decades_spanned(&curve),
            regime: Regime::classify(max_size, net.len()),
            curve,
        });
    }

    let critical_estimate = rows
        .iter()
        .filter_map(|r| r.tail_slope.map(|s| (r.ratio, (s + 1.0).abs())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(ratio, _)| ratio)
        .or_else(|| (rows.len() == 1).then(|| rows[0].ratio));
    let rapid_decay_upper = rows
        .iter()
        .filter(|r| r.regime == Regime::RapidDecay)
        .map(|r| r.ratio)
        .max_by(f64::total_cmp);
    let spanning_lower = rows
        .iter()
        .filter(|r| r.regime == Regime::SpanningPeak)
        .map(|r| r.ratio)
        .min_by(f64::total_cmp);

    Ok(SweepReport {
        nodes: net.len(),
        low_confidence: rows.len() < 3,
        rows,
        critical_estimate,
        rapid_decay_upper,
        spanning_lower,
    })
}
