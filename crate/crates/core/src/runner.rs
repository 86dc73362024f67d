//! Batch commands behind the command-line front end.
//!
//! Each command loads the dataset named in a [`RunConfig`], computes, and
//! writes its artifacts under the output directory. Commands are
//! deterministic: the only randomness comes from `rng_seed`.

use std::fmt;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{
    avalanche_network, coarse_grain_continental, intra_continental_fraction, max_spanning_forest,
    spearman_gdp_avalanche, summary_stats, tgp_profile, IntraFraction, RankCorrelation,
};
use crate::cascade::{run_all, run_avalanche, AvalancheMap, CascadeParams};
use crate::criticality::{cumulative_counts, log_grid, sweep, SweepReport};
use crate::error::{Error, Result};
use crate::export;
use crate::io::{scan_countries, scan_trades};
use crate::network::{build_network, CapacityMode, EndpointPolicy, MacroNet};
use crate::randomize::{ensemble, EnsembleConfig, EnsembleSummary, GsnConfig, NullModel};

pub const DEFAULT_F: f64 = 0.7;
pub const DEFAULT_T: f64 = 0.1;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub countries: PathBuf,
    pub trades: PathBuf,
    pub capacity_mode: CapacityMode,
    pub f: Option<f64>,
    pub t: Option<f64>,
    pub ft_ratio: Option<f64>,
    pub rng_seed: u64,
    pub out: PathBuf,
    pub lenient: bool,
}

impl RunConfig {
    pub fn new(countries: impl Into<PathBuf>, trades: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            countries: countries.into(),
            trades: trades.into(),
            capacity_mode: CapacityMode::Gdp,
            f: None,
            t: None,
            ft_ratio: None,
            rng_seed: 0,
            out: out.into(),
            lenient: false,
        }
    }

    /// `--f`/`--t` win over `--ft-ratio`; a missing one falls back to 0.7 / 0.1.
    pub fn params(&self) -> Result<CascadeParams<f64>> {
        match (self.f, self.t, self.ft_ratio) {
            (None, None, Some(ratio)) => CascadeParams::from_ratio(ratio),
            (f, t, _) => CascadeParams::new(f.unwrap_or(DEFAULT_F), t.unwrap_or(DEFAULT_T)),
        }
    }

    fn policy(&self) -> EndpointPolicy {
        if self.lenient {
            EndpointPolicy::Lenient
        } else {
            EndpointPolicy::Strict
        }
    }

    /// Loads and builds the network under the configured capacity mode.
    pub fn load(&self) -> Result<(MacroNet<f64>, Vec<String>)> {
        self.load_with_mode(self.capacity_mode)
    }

    fn load_with_mode(&self, mode: CapacityMode) -> Result<(MacroNet<f64>, Vec<String>)> {
        let countries = scan_countries(File::open(&self.countries)?)?.into_result()?;
        let trades = scan_trades(File::open(&self.trades)?)?.into_result()?;
        build_network(countries, trades, mode, self.policy())
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub countries: usize,
    pub links: usize,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        write!(
            f,
            "{} countries, {} links, {} errors",
            self.countries,
            self.links,
            self.errors.len()
        )
    }
}

/// Checks both tables row by row and reports every problem found.
pub fn cmd_validate(config: &RunConfig) -> Result<ValidationReport> {
    let countries = scan_countries::<f64, _>(File::open(&config.countries)?)?;
    let trades = scan_trades::<f64, _>(File::open(&config.trades)?)?;
    let mut report = ValidationReport::default();
    report
        .errors
        .extend(countries.errors.iter().map(|e| format!("countries.csv {e}")));
    report
        .errors
        .extend(trades.errors.iter().map(|e| format!("trades.csv {e}")));

    let known: std::collections::HashSet<&str> =
        countries.rows.iter().map(|c| c.code.as_str()).collect();
    let mut links = 0;
    for t in &trades.rows {
        let missing: Vec<&str> = [t.exporter.as_str(), t.importer.as_str()]
            .into_iter()
            .filter(|c| !known.contains(c))
            .collect();
        if missing.is_empty() {
            links += 1;
            continue;
        }
        let msg = format!(
            "trade link {} -> {} references unknown country `{}`",
            t.exporter,
            t.importer,
            missing.join("`, `")
        );
        if config.lenient {
            report.warnings.push(format!("{msg}; link dropped"));
        } else {
            links += 1;
            report.errors.push(msg);
        }
    }
    if config.capacity_mode == CapacityMode::GdpCab {
        let lacking: Vec<&str> = countries
            .rows
            .iter()
            .filter(|c| c.cab.is_none())
            .map(|c| c.code.as_str())
            .collect();
        if !lacking.is_empty() {
            report.errors.push(format!(
                "capacity mode gdp-cab requires CAB for: {}",
                lacking.join(", ")
            ));
        }
    }
    for c in &countries.rows {
        if let (CapacityMode::GdpCab, Some(cab)) = (config.capacity_mode, c.cab) {
            if c.gdp + cab <= 0.0 {
                report
                    .warnings
                    .push(format!("country `{}` has non-positive GDP + CAB", c.code));
            }
        }
    }
    report.countries = countries.rows.len();
    report.links = links;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Writes artifacts below a root directory and remembers their hashes.
#[derive(Debug)]
pub struct Bundle {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl Bundle {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Bundle {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write<F>(&mut self, rel: &str, fill: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, &buf)?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            sha256: hex::encode(Sha256::digest(&buf)),
            bytes: buf.len(),
        });
        Ok(path)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn into_files(self) -> Vec<FileEntry> {
        self.files
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedSelection {
    One(String),
    All,
}

impl SeedSelection {
    pub fn parse(text: &str) -> Self {
        if text.eq_ignore_ascii_case("all") {
            SeedSelection::All
        } else {
            SeedSelection::One(text.to_string())
        }
    }
}

#[derive(Debug)]
pub struct AvalancheOutput {
    pub results: AvalancheMap,
    pub files: Vec<FileEntry>,
}

pub fn cmd_avalanche(config: &RunConfig, seeds: &SeedSelection, with_events: bool) -> Result<AvalancheOutput> {
    let (net, _) = config.load()?;
    let params = config.params()?;
    let results: AvalancheMap = match seeds {
        SeedSelection::One(code) => {
            let r = run_avalanche(&net, code, &params)?;
            [(r.seed.clone(), r)].into_iter().collect()
        }
        SeedSelection::All => run_all(&net, &params),
    };
    let mut bundle = Bundle::new(&config.out)?;
    bundle.write("results.csv", |b| export::write_results(results.values(), b))?;
    if with_events {
        bundle.write("events.csv", |b| export::write_events(results.values(), b))?;
    }
    if *seeds == SeedSelection::All {
        let curve = cumulative_counts(&results)?;
        bundle.write("distribution.csv", |b| export::write_distribution(&curve, b))?;
        let stats = summary_stats(&results)?;
        bundle.write("summary.csv", |b| export::write_summary(&stats, b))?;
    }
    Ok(AvalancheOutput {
        results,
        files: bundle.into_files(),
    })
}

/// Parses `log:LO:HI:N` or a comma-separated list of ratios.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("malformed f/t grid `{text}`"));
    if let Some(rest) = text.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].parse().map_err(|_| bad())?;
        let n: usize = parts[2].parse().map_err(|_| bad())?;
        return log_grid(lo, hi, n);
    }
    let grid: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if grid.is_empty() || grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(bad());
    }
    Ok(grid)
}

pub fn default_grid() -> Vec<f64> {
    log_grid(1.0, 30.0, 30).expect("static grid")
}

pub fn critical_line(report: &SweepReport) -> String {
    match report.critical_estimate {
        Some(r) if report.low_confidence => {
            format!("critical f/t estimate: {r} (low confidence: fewer than 3 grid points)")
        }
        Some(r) => format!("critical f/t estimate: {r}"),
        None => "critical f/t estimate: none (no ratio produced a fittable tail)".to_string(),
    }
}

pub fn regime_line(report: &SweepReport) -> String {
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |r| r.to_string());
    format!(
        "regimes: rapid-decay up to f/t = {}, spanning-peak from f/t = {}",
        fmt(report.rapid_decay_upper),
        fmt(report.spanning_lower)
    )
}

#[derive(Debug)]
pub struct SweepOutput {
    pub report: SweepReport,
    pub files: Vec<FileEntry>,
}

pub fn cmd_sweep(config: &RunConfig, grid: &[f64]) -> Result<SweepOutput> {
    let (net, _) = config.load()?;
    let report = sweep(&net, grid)?;
    let mut bundle = Bundle::new(&config.out)?;
    bundle.write("sweep.csv", |b| export::write_sweep(&report, b))?;
    bundle.write("sweep.json", |b| export::write_json(&report, b))?;
    Ok(SweepOutput {
        report,
        files: bundle.into_files(),
    })
}

#[derive(Debug, Clone)]
pub enum AvalancheSource {
    /// Rebuild the avalanche network from an events CSV written by `avalanche --events`.
    Events(PathBuf),
    Recompute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub forest: IntraFraction,
    pub avalanche: IntraFraction,
    pub isolated: Vec<String>,
    pub lines: Vec<String>,
}

fn fraction_line(what: &str, f: &IntraFraction) -> String {
    match f.fraction {
        Some(x) => format!(
            "{what}: {} out of {} links ({:.0}%) intra-continental",
            f.intra,
            f.total,
            100.0 * x
        ),
        None => format!("{what}: no links"),
    }
}

fn topology_of(
    bundle: &mut Bundle,
    prefix: &str,
    net: &MacroNet<f64>,
    results: &AvalancheMap,
) -> Result<TopologyReport> {
    let continents = net.continent_map();
    let forest = max_spanning_forest(net);
    let avnet = avalanche_network(results);
    let forest_frac = intra_continental_fraction(forest.edge_pairs(), &continents)?;
    let av_frac = intra_continental_fraction(avnet.edge_pairs(), &continents)?;
    let coarse = coarse_grain_continental(&avnet, &continents)?;
    let report = TopologyReport {
        lines: vec![
            fraction_line("spanning forest", &forest_frac),
            fraction_line("avalanche network", &av_frac),
            format!("isolated in avalanche network: {}", avnet.isolated.len()),
        ],
        forest: forest_frac,
        avalanche: av_frac,
        isolated: avnet.isolated.clone(),
    };
    bundle.write(&format!("{prefix}forest.dot"), |b| export::forest_dot(net, &forest, b))?;
    bundle.write(&format!("{prefix}avalanche.dot"), |b| export::avalanche_dot(net, &avnet, b))?;
    bundle.write(&format!("{prefix}topology.json"), |b| export::write_json(&report, b))?;
    bundle.write(&format!("{prefix}continental.json"), |b| export::write_json(&coarse, b))?;
    Ok(report)
}

#[derive(Debug)]
pub struct TopologyOutput {
    pub report: TopologyReport,
    pub files: Vec<FileEntry>,
}

pub fn cmd_topology(config: &RunConfig, source: &AvalancheSource) -> Result<TopologyOutput> {
    let (net, _) = config.load()?;
    let results = match source {
        AvalancheSource::Events(path) => export::read_events(&net, File::open(path)?)?,
        AvalancheSource::Recompute => run_all(&net, &config.params()?),
    };
    let mut bundle = Bundle::new(&config.out)?;
    let report = topology_of(&mut bundle, "", &net, &results)?;
    Ok(TopologyOutput {
        report,
        files: bundle.into_files(),
    })
}

#[derive(Debug, Clone)]
pub struct RandomizeOptions {
    pub model: NullModel,
    pub samples: usize,
    pub per_sample_csv: bool,
    /// GSN attempt budget; `None` keeps the default of `200 * |E|`.
    pub gsn_attempts: Option<usize>,
}

fn ensemble_config(config: &RunConfig, model: NullModel, samples: usize, gsn_attempts: Option<usize>) -> EnsembleConfig {
    EnsembleConfig {
        gsn: GsnConfig {
            max_attempts: gsn_attempts,
            ..GsnConfig::default()
        },
        ..EnsembleConfig::new(model, samples, config.rng_seed)
    }
}

#[derive(Debug)]
pub struct RandomizeOutput {
    pub summary: EnsembleSummary,
    pub files: Vec<FileEntry>,
}

pub fn cmd_randomize(config: &RunConfig, opts: &RandomizeOptions) -> Result<RandomizeOutput> {
    let (net, _) = config.load()?;
    let params = config.params()?;
    let summary = ensemble(
        &net,
        &ensemble_config(config, opts.model, opts.samples, opts.gsn_attempts),
        &params,
    )?;
    let mut bundle = Bundle::new(&config.out)?;
    let name = format!("ensemble_{}", opts.model);
    bundle.write(&format!("{name}.json"), |b| export::write_json(&summary, b))?;
    if opts.per_sample_csv {
        bundle.write(&format!("{name}_samples.csv"), |b| {
            export::write_ensemble_samples(&summary, b)
        })?;
    }
    Ok(RandomizeOutput {
        summary,
        files: bundle.into_files(),
    })
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Null-model samples per model; zero skips the ensembles.
    pub samples: usize,
    /// Countries to profile; empty picks the country with the largest avalanche.
    pub tgp: Vec<String>,
    pub grid: Vec<f64>,
    pub gsn_attempts: Option<usize>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            samples: 100,
            tgp: Vec::new(),
            grid: default_grid(),
            gsn_attempts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub parameters: ManifestParameters,
    pub sections: Vec<String>,
    pub notes: Vec<String>,
    pub failures: Vec<String>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestParameters {
    pub f: f64,
    pub t: f64,
    pub rng_seed: u64,
    pub samples: usize,
    pub lenient: bool,
}

#[derive(Debug, Serialize)]
struct SectionSummary<'a> {
    capacity_mode: CapacityMode,
    countries: usize,
    links: usize,
    summary: crate::analytics::SummaryStats,
    spearman: Option<RankCorrelation>,
    topology: &'a [String],
    critical_estimate: Option<f64>,
}

/// Runs every analysis, for both capacity modes when CAB data is present.
pub fn cmd_report(config: &RunConfig, opts: &ReportOptions) -> Result<Manifest> {
    let params = config.params()?;
    let mut bundle = Bundle::new(&config.out)?;
    let mut failures = Vec::new();
    let mut notes = Vec::new();
    let mut sections = Vec::new();

    let (base, warnings) = config.load_with_mode(CapacityMode::Gdp)?;
    notes.extend(warnings);
    let cab_present = base.countries().iter().filter(|c| c.cab.is_some()).count();
    let mut modes = vec![CapacityMode::Gdp];
    if cab_present == base.len() && !base.is_empty() {
        modes.push(CapacityMode::GdpCab);
    } else if cab_present > 0 {
        let lacking: Vec<&str> = base
            .countries()
            .iter()
            .filter(|c| c.cab.is_none())
            .map(|c| c.code.as_str())
            .collect();
        failures.push(format!(
            "gdp-cab section skipped: CAB missing for {}",
            lacking.join(", ")
        ));
    } else {
        notes.push("no CAB column values: gdp-cab section skipped".to_string());
    }

    for mode in modes {
        let net = if mode == base.capacity_mode() {
            base.clone()
        } else {
            base.with_capacity_mode(mode)?
        };
        let prefix = format!("{mode}/");
        report_section(&mut bundle, &prefix, &net, &params, config, opts, &mut failures)?;
        sections.push(mode.to_string());
    }

    let mut manifest = Manifest {
        parameters: ManifestParameters {
            f: params.f(),
            t: params.t(),
            rng_seed: config.rng_seed,
            samples: opts.samples,
            lenient: config.lenient,
        },
        sections,
        notes,
        failures,
        files: Vec::new(),
    };
    manifest.files = bundle.files().to_vec();
    let manifest_json = serde_json::to_vec_pretty(&manifest)?;
    fs::write(config.out.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

fn report_section(
    bundle: &mut Bundle,
    prefix: &str,
    net: &MacroNet<f64>,
    params: &CascadeParams<f64>,
    config: &RunConfig,
    opts: &ReportOptions,
    failures: &mut Vec<String>,
) -> Result<()> {
    let mode = net.capacity_mode();
    let results = run_all(net, params);
    let stats = summary_stats(&results)?;
    let curve = cumulative_counts(&results)?;
    bundle.write(&format!("{prefix}results.csv"), |b| export::write_results(results.values(), b))?;
    bundle.write(&format!("{prefix}events.csv"), |b| export::write_events(results.values(), b))?;
    bundle.write(&format!("{prefix}distribution.csv"), |b| export::write_distribution(&curve, b))?;
    bundle.write(&format!("{prefix}summary.csv"), |b| export::write_summary(&stats, b))?;
    bundle.write(&format!("{prefix}gdp_vs_size.csv"), |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["code", "gdp_musd", "capacity_musd", "size"])?;
        for (i, c) in net.countries().iter().enumerate() {
            w.write_record([
                c.code.clone(),
                c.gdp.to_string(),
                net.capacity_at(i).to_string(),
                results[&c.code].size.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;

    let spearman = match spearman_gdp_avalanche(net, &results) {
        Ok(r) => Some(r),
        Err(e) => {
            failures.push(format!("{mode}: spearman: {e}"));
            None
        }
    };

    let topology = topology_of(bundle, prefix, net, &results)?;

    let mut tgp_codes = opts.tgp.clone();
    if tgp_codes.is_empty() {
        if let Some(r) = results.values().max_by(|a, b| a.size.cmp(&b.size).then(b.seed.cmp(&a.seed))) {
            tgp_codes.push(r.seed.clone());
        }
    }
    for code in &tgp_codes {
        match results.get(code).map(|r| tgp_profile(net, r)) {
            Some(Ok(points)) => {
                bundle.write(&format!("{prefix}tgp_{code}.csv"), |b| export::write_tgp(&points, b))?;
            }
            Some(Err(e)) => failures.push(format!("{mode}: tgp {code}: {e}")),
            None => failures.push(format!("{mode}: tgp: unknown country `{code}`")),
        }
    }

    let critical_estimate = match sweep(net, &opts.grid) {
        Ok(report) => {
            bundle.write(&format!("{prefix}sweep.csv"), |b| export::write_sweep(&report, b))?;
            report.critical_estimate
        }
        Err(e) => {
            failures.push(format!("{mode}: sweep: {e}"));
            None
        }
    };

    if opts.samples > 0 {
        for model in [NullModel::Gsn, NullModel::Gdn] {
            let cfg = ensemble_config(config, model, opts.samples, opts.gsn_attempts);
            match ensemble(net, &cfg, params) {
                Ok(summary) => {
                    failures.extend(summary.failures.iter().map(|f| {
                        format!("{mode}: {model} sample {}: {}", f.index, f.message)
                    }));
                    bundle.write(&format!("{prefix}ensemble_{model}.json"), |b| {
                        export::write_json(&summary, b)
                    })?;
                }
                Err(e) => failures.push(format!("{mode}: {model}: {e}")),
            }
        }
    }

    let section = SectionSummary {
        capacity_mode: mode,
        countries: net.len(),
        links: net.link_count(),
        summary: stats,
        spearman,
        topology: &topology.lines,
        critical_estimate,
    };
    bundle.write(&format!("{prefix}section.json"), |b| export::write_json(&section, b))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_resolution() {
        let mut cfg = RunConfig::new("c", "t", "o");
        let p = cfg.params().unwrap();
        assert_eq!((p.f(), p.t()), (0.7, 0.1));
        cfg.ft_ratio = Some(20.0);
        let p = cfg.params().unwrap();
        assert_eq!((p.f(), p.t()), (1.0, 0.05));
        cfg.f = Some(0.3);
        let p = cfg.params().unwrap();
        assert_eq!((p.f(), p.t()), (0.3, 0.1));
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1,3,7").unwrap(), vec![1.0, 3.0, 7.0]);
        assert_eq!(parse_grid("log:1:30:30").unwrap().len(), 30);
        assert_eq!(parse_grid("7").unwrap(), vec![7.0]);
        for bad in ["", "a,b", "log:1:30", "1,-2", "log:0:3:3"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn seed_selection() {
        assert_eq!(SeedSelection::parse("ALL"), SeedSelection::All);
        assert_eq!(SeedSelection::parse("E"), SeedSelection::One("E".into()));
    }
}
