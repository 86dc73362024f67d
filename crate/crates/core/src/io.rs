//! CSV ingestion and export of country and trade tables.
//!
//! `countries.csv`: `code,name,continent,gdp_musd[,cab_musd]` (CAB may be empty).
//! `trades.csv`: `exporter,importer,volume_musd`. Values are million US dollars,
//! `.` is the decimal point, and a header row is required.

use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::network::{Country, MacroNet, TradeLink};
use crate::scalar::Scalar;

/// Parsed rows together with every row-level problem found on the way.
#[derive(Debug)]
pub struct Scan<T> {
    pub rows: Vec<T>,
    pub errors: Vec<Error>,
}

impl<T> Scan<T> {
    pub fn into_result(self) -> Result<Vec<T>> {
        match self.errors.into_iter().next() {
            Some(err) => Err(err),
            None => Ok(self.rows),
        }
    }
}

struct Columns(Vec<Option<usize>>);

impl Columns {
    fn resolve(headers: &csv::StringRecord, required: &[&str], optional: &[&str]) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let mut cols = Vec::new();
        for name in required {
            cols.push(Some(find(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?));
        }
        cols.extend(optional.iter().map(|name| find(name)));
        Ok(Columns(cols))
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, i: usize) -> Option<&'r str> {
        self.0[i].and_then(|c| record.get(c)).map(str::trim)
    }
}

fn reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source)
}

fn row_err(row: usize, message: impl Into<String>) -> Error {
    Error::Row {
        row,
        message: message.into(),
    }
}

pub fn scan_countries<S: Scalar, R: Read>(source: R) -> Result<Scan<Country<S>>> {
    let mut rdr = reader(source);
    let cols = Columns::resolve(
        rdr.headers()?,
        &["code", "name", "continent", "gdp_musd"],
        &["cab_musd"],
    )?;
    let mut scan = Scan {
        rows: Vec::new(),
        errors: Vec::new(),
    };
    let mut codes = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        match parse_country(&cols, &record, row) {
            Ok(country) => {
                if !codes.insert(country.code.clone()) {
                    scan.errors
                        .push(row_err(row, format!("duplicate country code `{}`", country.code)));
                } else {
                    scan.rows.push(country);
                }
            }
            Err(e) => scan.errors.push(e),
        }
    }
    Ok(scan)
}

fn parse_country<S: Scalar>(cols: &Columns, rec: &csv::StringRecord, row: usize) -> Result<Country<S>> {
    let field = |i: usize, name: &str| {
        cols.get(rec, i)
            .ok_or_else(|| row_err(row, format!("missing value for `{name}`")))
    };
    let code = field(0, "code")?;
    if code.is_empty() {
        return Err(row_err(row, "empty country code"));
    }
    let continent = field(2, "continent")?;
    if continent.is_empty() {
        return Err(row_err(row, format!("country `{code}` has an empty continent tag")));
    }
    let gdp_text = field(3, "gdp_musd")?;
    let gdp = S::parse_decimal(gdp_text)
        .ok_or_else(|| row_err(row, format!("unparseable GDP `{gdp_text}`")))?;
    if gdp <= S::zero() {
        return Err(row_err(row, format!("country `{code}` has non-positive GDP {gdp_text}")));
    }
    let cab = match cols.get(rec, 4) {
        None | Some("") => None,
        Some(text) => Some(
            S::parse_decimal(text).ok_or_else(|| row_err(row, format!("unparseable CAB `{text}`")))?,
        ),
    };
    Ok(Country {
        code: code.to_string(),
        name: cols.get(rec, 1).unwrap_or_default().to_string(),
        continent: continent.to_string(),
        gdp,
        cab,
    })
}

pub fn load_countries<S: Scalar, R: Read>(source: R) -> Result<Vec<Country<S>>> {
    scan_countries(source)?.into_result()
}

pub fn scan_trades<S: Scalar, R: Read>(source: R) -> Result<Scan<TradeLink<S>>> {
    let mut rdr = reader(source);
    let cols = Columns::resolve(rdr.headers()?, &["exporter", "importer", "volume_musd"], &[])?;
    let mut scan = Scan {
        rows: Vec::new(),
        errors: Vec::new(),
    };
    let mut pairs = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        match parse_trade(&cols, &record, row) {
            Ok(link) => {
                if !pairs.insert((link.exporter.clone(), link.importer.clone())) {
                    scan.errors.push(row_err(
                        row,
                        format!("duplicate trade link {} -> {}", link.exporter, link.importer),
                    ));
                } else {
                    scan.rows.push(link);
                }
            }
            Err(e) => scan.errors.push(e),
        }
    }
    Ok(scan)
}

fn parse_trade<S: Scalar>(cols: &Columns, rec: &csv::StringRecord, row: usize) -> Result<TradeLink<S>> {
    let field = |i: usize, name: &str| {
        cols.get(rec, i)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| row_err(row, format!("missing value for `{name}`")))
    };
    let exporter = field(0, "exporter")?;
    let importer = field(1, "importer")?;
    if exporter == importer {
        return Err(row_err(row, format!("self-loop trade link on `{exporter}`")));
    }
    let text = field(2, "volume_musd")?;
    let volume = S::parse_decimal(text)
        .ok_or_else(|| row_err(row, format!("unparseable volume `{text}`")))?;
    if volume <= S::zero() {
        return Err(row_err(
            row,
            format!("trade link {exporter} -> {importer} has non-positive volume {text}"),
        ));
    }
    Ok(TradeLink::new(exporter, importer, volume))
}

pub fn load_trades<S: Scalar, R: Read>(source: R) -> Result<Vec<TradeLink<S>>> {
    scan_trades(source)?.into_result()
}

pub fn write_countries<S: Scalar, W: Write>(countries: &[Country<S>], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["code", "name", "continent", "gdp_musd", "cab_musd"])?;
    for c in countries {
        let cab = c.cab.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([&c.code, &c.name, &c.continent, &c.gdp.to_string(), &cab])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trades<S: Scalar, W: Write>(net: &MacroNet<S>, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["exporter", "importer", "volume_musd"])?;
    for l in net.links() {
        w.write_record([net.code(l.source), net.code(l.target), &l.volume.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_network, CapacityMode, EndpointPolicy};

    #[test]
    fn loads_countries_from_gdp_rows() {
        let text = "code,name,continent,gdp_musd,cab_musd\n\
                    ESP,Spain,WE,997000,\n\
                    ZAF,South Africa,AF,199000,-1500.5\n";
        let countries: Vec<Country<f64>> = load_countries(text.as_bytes()).unwrap();
        assert_eq!(countries.len(), 2);
        assert_eq!(countries[0].gdp, 997000.0);
        assert_eq!(countries[0].cab, None);
        assert_eq!(countries[1].name, "South Africa");
        assert_eq!(countries[1].gdp, 199000.0);
        assert_eq!(countries[1].cab, Some(-1500.5));
    }

    #[test]
    fn cab_column_is_optional() {
        let text = "code,name,continent,gdp_musd\nESP,Spain,WE,997000\n";
        let countries: Vec<Country<f64>> = load_countries(text.as_bytes()).unwrap();
        assert_eq!(countries[0].cab, None);
    }

    #[test]
    fn header_only_is_empty() {
        let countries: Vec<Country<f64>> =
            load_countries("code,name,continent,gdp_musd,cab_musd\n".as_bytes()).unwrap();
        assert!(countries.is_empty());
        let trades: Vec<TradeLink<f64>> =
            load_trades("exporter,importer,volume_musd\n".as_bytes()).unwrap();
        assert!(trades.is_empty());
    }

    #[test]
    fn country_errors_carry_row_numbers() {
        let text = "code,name,continent,gdp_musd\nAAA,a,X,1\nBBB,b,X,0\nAAA,c,X,2\n";
        let scan = scan_countries::<f64, _>(text.as_bytes()).unwrap();
        assert_eq!(scan.rows.len(), 1);
        let msgs: Vec<String> = scan.errors.iter().map(|e| e.to_string()).collect();
        assert_eq!(msgs.len(), 2);
        assert!(msgs[0].starts_with("row 3:") && msgs[0].contains("non-positive GDP"));
        assert!(msgs[1].starts_with("row 4:") && msgs[1].contains("duplicate"));
    }

    #[test]
    fn missing_column_is_reported() {
        let err = load_countries::<f64, _>("code,name,gdp_musd\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "continent"));
    }

    #[test]
    fn trade_rows() {
        let ok: Vec<TradeLink<f64>> =
            load_trades("exporter,importer,volume_musd\nAAA,BBB,2.0\n".as_bytes()).unwrap();
        assert_eq!(ok, vec![TradeLink::new("AAA", "BBB", 2.0)]);

        let self_loop = load_trades::<f64, _>("exporter,importer,volume_musd\nAAA,AAA,5.0\n".as_bytes());
        assert!(self_loop.unwrap_err().to_string().contains("self-loop"));

        let dup = load_trades::<f64, _>(
            "exporter,importer,volume_musd\nAAA,BBB,1\nAAA,BBB,2\n".as_bytes(),
        );
        assert!(dup.unwrap_err().to_string().contains("duplicate"));

        let neg = load_trades::<f64, _>("exporter,importer,volume_musd\nAAA,BBB,-1\n".as_bytes());
        assert!(neg.unwrap_err().to_string().contains("non-positive"));
    }

    #[test]
    fn export_reimport_is_bit_exact() {
        let countries = vec![
            Country::new("AAA", "X", 0.1 + 0.2).with_cab(-1e-7),
            Country::new("BBB", "Y", 123456.789),
        ];
        let trades = vec![TradeLink::new("AAA", "BBB", 1.0 / 3.0)];
        let (net, _) =
            build_network(countries, trades, CapacityMode::Gdp, EndpointPolicy::Strict).unwrap();
        let mut cbuf = Vec::new();
        let mut tbuf = Vec::new();
        write_countries(net.countries(), &mut cbuf).unwrap();
        write_trades(&net, &mut tbuf).unwrap();
        let c2: Vec<Country<f64>> = load_countries(cbuf.as_slice()).unwrap();
        let t2: Vec<TradeLink<f64>> = load_trades(tbuf.as_slice()).unwrap();
        assert_eq!(c2, net.countries());
        assert_eq!(t2, net.trade_links());
        assert_eq!(t2[0].volume.to_bits(), (1.0f64 / 3.0).to_bits());
    }
}
