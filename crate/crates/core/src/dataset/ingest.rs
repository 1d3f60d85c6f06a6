use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// One counterfactual sample of one auction, in the raw-log schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub bidder_id: String,
    pub timestamp_hour: i64,
    pub auction_id: String,
    pub multiplier: f64,
    pub bid: f64,
    pub click_prob: f64,
    pub cpc: f64,
}

pub const RAW_COLUMNS: [&str; 7] = [
    "bidder_id",
    "timestamp_hour",
    "auction_id",
    "multiplier",
    "bid",
    "click_prob",
    "cpc",
];

impl RawRow {
    fn check(&self) -> Result<(), String> {
        if self.bidder_id.is_empty() {
            return Err("empty bidder_id".into());
        }
        let fields = [
            ("multiplier", self.multiplier),
            ("bid", self.bid),
            ("click_prob", self.click_prob),
            ("cpc", self.cpc),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(format!("{name} is not finite"));
            }
        }
        if self.multiplier <= 0.0 {
            return Err("multiplier must be positive".into());
        }
        if self.bid <= 0.0 {
            return Err("bid must be positive".into());
        }
        if self.click_prob < 0.0 || self.cpc < 0.0 {
            return Err("click_prob and cpc must be nonnegative".into());
        }
        Ok(())
    }
}

/// Streams validated rows of a raw log to `sink`. Errors name the 1-based
/// line of the offending row (the header is line 1).
pub fn read_raw_rows<R: Read>(reader: R, mut sink: impl FnMut(RawRow)) -> Result<usize, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DatasetError::Csv { line: 1, message: e.to_string() })?.clone();
    let missing: Vec<&str> = RAW_COLUMNS
        .iter()
        .copied()
        .filter(|c| !headers.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(DatasetError::Csv {
            line: 1,
            message: format!("missing columns: {}", missing.join(", ")),
        });
    }
    let mut n = 0;
    let mut record = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut record).map_err(|e| DatasetError::Csv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let row: RawRow = record
            .deserialize(Some(&headers))
            .map_err(|e| DatasetError::Csv { line, message: e.to_string() })?;
        row.check().map_err(|message| DatasetError::Csv { line, message })?;
        sink(row);
        n += 1;
    }
    Ok(n)
}

pub fn read_raw_log(path: &Path, sink: impl FnMut(RawRow)) -> Result<usize, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    read_raw_rows(BufReader::new(file), sink)
}

/// Writes rows in the raw-log schema. Floats use the shortest
/// representation that reads back to the same value.
pub fn write_raw_rows<W: Write>(writer: W, rows: impl IntoIterator<Item = RawRow>) -> Result<(), DatasetError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RAW_COLUMNS).map_err(DatasetError::from_csv_write)?;
    for r in rows {
        w.serialize(&r).map_err(DatasetError::from_csv_write)?;
    }
    w.flush().map_err(|e| DatasetError::Io { path: String::new(), message: e.to_string() })?;
    Ok(())
}

pub fn write_raw_log(path: &Path, rows: impl IntoIterator<Item = RawRow>) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(|e| DatasetError::io(path, e))?;
    write_raw_rows(BufWriter::new(file), rows)
}

/// Reads a `bidder_id → won top slot` table (e.g. the simulator sidecar's
/// flags) from JSON.
pub fn read_top_slot_flags(path: &Path) -> Result<BTreeMap<String, bool>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Json(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(b: &str, h: i64, m: f64) -> RawRow {
        RawRow {
            bidder_id: b.into(),
            timestamp_hour: h,
            auction_id: "0".into(),
            multiplier: m,
            bid: 10.0 * m,
            click_prob: 0.1,
            cpc: 3.0 * m,
        }
    }

    #[test]
    fn round_trip() {
        let rows = vec![row("a", 0, 1.0), row("a", 0, 0.1), row("b", 5, 5.0)];
        let mut buf = Vec::new();
        write_raw_rows(&mut buf, rows.clone()).unwrap();
        let mut back = Vec::new();
        read_raw_rows(buf.as_slice(), |r| back.push(r)).unwrap();
        assert_eq!(rows, back);
    }

    #[test]
    fn malformed_row_names_line() {
        let text = "bidder_id,timestamp_hour,auction_id,multiplier,bid,click_prob,cpc\n\
                    a,0,0,1.0,10,0.1,3\n\
                    a,0,0,oops,10,0.1,3\n";
        let err = read_raw_rows(text.as_bytes(), |_| {}).unwrap_err();
        match err {
            DatasetError::Csv { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e}"),
        }
        let text = "bidder_id,timestamp_hour,auction_id,multiplier,bid,click_prob,cpc\n\
                    a,0,0,1.0,-10,0.1,3\n";
        let err = read_raw_rows(text.as_bytes(), |_| {}).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn missing_column() {
        let text = "bidder_id,timestamp_hour,multiplier,bid,click_prob,cpc\n";
        assert!(read_raw_rows(text.as_bytes(), |_| {}).unwrap_err().to_string().contains("auction_id"));
    }
}
