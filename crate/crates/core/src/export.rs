//! Writers for results, events, distributions, DOT graphs and JSON, plus the
//! events loader used to rebuild avalanche results from disk.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::analytics::{AvalancheNetwork, SpanningForest, SummaryStats, TgpPoint};
use crate::cascade::{AvalancheMap, AvalancheResult, Cause, CollapseEvent, Label, Profile, Side};
use crate::criticality::{CumulativePoint, SweepReport};
use crate::error::{Error, Result};
use crate::network::MacroNet;
use crate::randomize::EnsembleSummary;
use crate::scalar::Scalar;

pub const RESULTS_HEADER: [&str; 7] = [
    "seed",
    "size",
    "duration",
    "n_one_step_direct",
    "n_multi_step_direct",
    "n_indirect",
    "n_residual",
];

pub const EVENTS_HEADER: [&str; 7] = ["seed", "country", "step", "side", "cause", "trigger", "label"];

pub fn write_results<'a, W, I>(results: I, sink: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a AvalancheResult>,
{
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(RESULTS_HEADER)?;
    for r in results {
        let p = &r.profile;
        w.write_record([
            r.seed.clone(),
            r.size.to_string(),
            r.duration.to_string(),
            p.one_step_direct.to_string(),
            p.multi_step_direct.to_string(),
            p.indirect.to_string(),
            p.residual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_events<'a, W, I>(results: I, sink: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a AvalancheResult>,
{
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(EVENTS_HEADER)?;
    for r in results {
        for e in &r.events {
            w.write_record([
                r.seed.as_str(),
                e.country.as_str(),
                &e.step.to_string(),
                e.side.as_str(),
                e.cause.as_str(),
                e.trigger.as_deref().unwrap_or(""),
                e.label.as_str(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_side(s: &str) -> Option<Side> {
    match s {
        "IN" => Some(Side::In),
        "OUT" => Some(Side::Out),
        _ => None,
    }
}

fn parse_cause(s: &str) -> Option<Cause> {
    match s {
        "DIRECT" => Some(Cause::Direct),
        "INDIRECT" => Some(Cause::Indirect),
        _ => None,
    }
}

fn parse_label(s: &str) -> Option<Label> {
    Label::ALL.into_iter().find(|l| l.as_str() == s)
}

/// Rebuilds per-seed results for every country of `net` from an events CSV.
/// Seeds without events get empty avalanches.
pub fn read_events<S: Scalar, R: Read>(net: &MacroNet<S>, source: R) -> Result<AvalancheMap> {
    let mut rdr = csv::Reader::from_reader(source);
    let headers = rdr.headers()?.clone();
    if headers.iter().map(str::trim).ne(EVENTS_HEADER) {
        return Err(Error::InvalidInput(format!(
            "events header must be `{}`",
            EVENTS_HEADER.join(",")
        )));
    }
    let mut events: BTreeMap<String, Vec<CollapseEvent>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let bad = |what: &str| Error::Row {
            row,
            message: format!("invalid {what}"),
        };
        let seed = &record[0];
        net.require(seed)?;
        net.require(&record[1])?;
        let trigger = match &record[5] {
            "" => None,
            code => {
                net.require(code)?;
                Some(code.to_string())
            }
        };
        events.entry(seed.to_string()).or_default().push(CollapseEvent {
            country: record[1].to_string(),
            step: record[2].parse().map_err(|_| bad("step"))?,
            side: parse_side(&record[3]).ok_or_else(|| bad("side"))?,
            cause: parse_cause(&record[4]).ok_or_else(|| bad("cause"))?,
            trigger,
            label: parse_label(&record[6]).ok_or_else(|| bad("label"))?,
        });
    }
    Ok(net
        .countries()
        .iter()
        .map(|c| {
            let events = events.remove(&c.code).unwrap_or_default();
            let mut profile = Profile::default();
            for e in &events {
                match e.label {
                    Label::OneStepDirect => profile.one_step_direct += 1,
                    Label::MultiStepDirect => profile.multi_step_direct += 1,
                    Label::Indirect => profile.indirect += 1,
                    Label::Residual => profile.residual += 1,
                }
            }
            let result = AvalancheResult {
                seed: c.code.clone(),
                size: events.len(),
                duration: events.iter().map(|e| e.step).max().unwrap_or(0),
                events,
                profile,
            };
            (c.code.clone(), result)
        })
        .collect())
}

pub fn write_distribution<W: Write>(curve: &[CumulativePoint], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["size", "count_at_least"])?;
    for p in curve {
        w.write_record([p.size.to_string(), p.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(stats: &SummaryStats, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["countries", "sum_sizes", "nonzero", "typical_nonzero", "likelihood"])?;
    w.write_record([
        stats.countries.to_string(),
        stats.sum_sizes.to_string(),
        stats.nonzero.to_string(),
        stats.typical_nonzero.map(|v| v.to_string()).unwrap_or_default(),
        stats.likelihood.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn write_tgp<S: Scalar, W: Write>(points: &[TgpPoint<S>], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "partner",
        "partner_gdp_musd",
        "trade_volume_musd",
        "collapsed_by_profiled",
    ])?;
    for p in points {
        w.write_record([
            p.partner.clone(),
            p.partner_gdp.to_string(),
            p.trade_volume.to_string(),
            p.collapsed_by_profiled.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: Write>(report: &SweepReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "ratio", "f", "t", "max_size", "sum_sizes", "tail_slope", "decades", "regime",
    ])?;
    for r in &report.rows {
        w.write_record([
            r.ratio.to_string(),
            r.f.to_string(),
            r.t.to_string(),
            r.max_size.to_string(),
            r.sum_sizes.to_string(),
            r.tail_slope.map(|s| s.to_string()).unwrap_or_default(),
            r.decades.to_string(),
            r.regime.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per successful sample with every ensemble statistic.
pub fn write_ensemble_samples<W: Write>(summary: &EnsembleSummary, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["sample".to_string()];
    header.extend(summary.statistics.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    for (row, (index, _)) in summary.per_sample.iter().enumerate() {
        let mut rec = vec![index.to_string()];
        rec.extend(
            summary
                .statistics
                .iter()
                .map(|s| s.values[row].map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn dot_nodes<S: Scalar, W: Write>(net: &MacroNet<S>, sink: &mut W) -> Result<()> {
    for c in net.countries() {
        writeln!(sink, "  {} [continent={}];", dot_id(&c.code), dot_id(&c.continent))?;
    }
    Ok(())
}

fn same_continent<S: Scalar>(net: &MacroNet<S>, a: &str, b: &str) -> Result<bool> {
    Ok(net.country(net.require(a)?).continent == net.country(net.require(b)?).continent)
}

pub fn avalanche_dot<S: Scalar, W: Write>(
    net: &MacroNet<S>,
    avnet: &AvalancheNetwork,
    mut sink: W,
) -> Result<()> {
    writeln!(sink, "digraph avalanche {{")?;
    dot_nodes(net, &mut sink)?;
    for (a, b) in avnet.edge_pairs() {
        writeln!(
            sink,
            "  {} -> {} [intra={}];",
            dot_id(a),
            dot_id(b),
            same_continent(net, a, b)?
        )?;
    }
    writeln!(sink, "}}")?;
    Ok(())
}

pub fn forest_dot<S: Scalar, W: Write>(
    net: &MacroNet<S>,
    forest: &SpanningForest<S>,
    mut sink: W,
) -> Result<()> {
    writeln!(sink, "graph spanning_forest {{")?;
    dot_nodes(net, &mut sink)?;
    for e in &forest.edges {
        writeln!(
            sink,
            "  {} -- {} [weight={}, intra={}];",
            dot_id(&e.a),
            dot_id(&e.b),
            e.weight,
            same_continent(net, &e.a, &e.b)?
        )?;
    }
    writeln!(sink, "}}")?;
    Ok(())
}

pub fn write_json<T: serde::Serialize, W: Write>(value: &T, mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, value)?;
    writeln!(sink)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{avalanche_network, max_spanning_forest};
    use crate::cascade::{run_all, CascadeParams};
    use crate::fixtures::m2;

    fn results() -> AvalancheMap {
        run_all(&m2(), &CascadeParams::new(0.7, 0.1).unwrap())
    }

    #[test]
    fn results_csv_rows() {
        let mut buf = Vec::new();
        write_results(results().values(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER.join(","));
        assert!(lines.contains(&"E,4,4,1,1,1,1"));
        assert!(lines.contains(&"A,3,3,1,0,1,1"));
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn events_round_trip() {
        let net = m2();
        let original = results();
        let mut buf = Vec::new();
        write_events(original.values(), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("A,D,2,IN,INDIRECT,,INDIRECT"));
        assert_eq!(read_events(&net, buf.as_slice()).unwrap(), original);
    }

    #[test]
    fn events_loader_rejects_garbage() {
        let bad = "seed,country,step,side,cause,trigger,label\nA,B,1,UP,DIRECT,A,ONE_STEP_DIRECT\n";
        assert!(read_events(&m2(), bad.as_bytes()).is_err());
        assert!(read_events(&m2(), "a,b\n".as_bytes()).is_err());
        let unknown = "seed,country,step,side,cause,trigger,label\nQ,B,1,IN,DIRECT,Q,ONE_STEP_DIRECT\n";
        assert!(read_events(&m2(), unknown.as_bytes()).is_err());
    }

    #[test]
    fn dot_output() {
        let net = m2();
        let mut buf = Vec::new();
        avalanche_dot(&net, &avalanche_network(&results()), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("digraph avalanche {"));
        assert!(text.contains("\"E\" [continent=\"X2\"];"));
        assert!(text.contains("\"E\" -> \"A\" [intra=false];"));
        assert!(text.contains("\"D\" -> \"B\" [intra=true];"));
        assert_eq!(text.matches("->").count(), 9);

        let mut buf = Vec::new();
        forest_dot(&net, &max_spanning_forest(&net), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("\"A\" -- \"E\" [weight=110, intra=false];"));
        assert_eq!(text.matches("intra=true").count(), 3);
    }
}
