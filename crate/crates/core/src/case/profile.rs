//! CSV side tables: hourly profiles (`interval,bus_<id>,...`) and the
//! `bus_id,county` mapping.

use std::collections::BTreeMap;

use super::{BusId, CaseError};

fn csv_err(e: csv::Error, what: &str) -> CaseError {
    let (line, column) = e
        .position()
        .map(|p| (p.line() as usize, 0))
        .unwrap_or((0, 0));
    CaseError::Syntax {
        line,
        column,
        message: format!("{what}: {e}"),
    }
}

/// Parses an hourly profile table into per-bus series.
///
/// Interval labels must be consecutive integers starting at 0 or 1.
pub fn parse_profile_csv(text: &str) -> Result<BTreeMap<BusId, Vec<f64>>, CaseError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| csv_err(e, "profile header"))?.clone();
    if headers.get(0) != Some("interval") {
        return Err(CaseError::invalid("profile header", "first column must be `interval`"));
    }
    let mut buses = Vec::with_capacity(headers.len() - 1);
    for h in headers.iter().skip(1) {
        let id = h
            .strip_prefix("bus_")
            .and_then(|s| s.parse::<BusId>().ok())
            .ok_or_else(|| CaseError::invalid("profile header", format!("column `{h}` is not `bus_<id>`")))?;
        if buses.contains(&id) {
            return Err(CaseError::invalid("profile header", format!("duplicate column bus_{id}")));
        }
        buses.push(id);
    }
    let mut series: Vec<Vec<f64>> = vec![Vec::new(); buses.len()];
    let mut first_label = None;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e, "profile row"))?;
        let loc = format!("profile row {}", k + 1);
        let label: i64 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CaseError::invalid(&loc, "bad interval label"))?;
        let start = *first_label.get_or_insert(label);
        if !(start == 0 || start == 1) || label != start + k as i64 {
            return Err(CaseError::invalid(&loc, format!("interval {label} out of sequence")));
        }
        for (j, s) in series.iter_mut().enumerate() {
            let v: f64 = rec
                .get(j + 1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| CaseError::invalid(&loc, format!("bad value in column bus_{}", buses[j])))?;
            s.push(v);
        }
    }
    Ok(buses.into_iter().zip(series).collect())
}

pub fn write_profile_csv(series: &BTreeMap<BusId, Vec<f64>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["interval".to_string()];
    header.extend(series.keys().map(|b| format!("bus_{b}")));
    w.write_record(&header).expect("in-memory write");
    let len = series.values().next().map_or(0, Vec::len);
    for t in 0..len {
        let mut row = vec![t.to_string()];
        row.extend(series.values().map(|s| s[t].to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8 csv")
}

/// Parses a `bus_id,county` table.
pub fn parse_county_csv(text: &str) -> Result<BTreeMap<BusId, String>, CaseError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e, "county row"))?;
        let loc = format!("county row {}", k + 1);
        let bus: BusId = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CaseError::invalid(&loc, "bad bus id"))?;
        let county = rec.get(1).unwrap_or("").to_string();
        if county.is_empty() {
            return Err(CaseError::invalid(&loc, "empty county"));
        }
        out.insert(bus, county);
    }
    Ok(out)
}
