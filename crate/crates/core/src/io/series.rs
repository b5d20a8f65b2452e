//! Reading a time series back from a CSV file with a header row.

use std::io::Read;

use crate::error::{Error, Result};

/// Reads the `t` column and `column` from CSV data.
pub fn read_series<R: Read>(reader: R, column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column {name:?}") })
    };
    let (ti, vi) = (find("t")?, find(column)?);
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let field = |k: usize| -> Result<f64> {
            let s = rec.get(k).ok_or_else(|| Error::Parse { line, message: "short row".into() })?;
            s.parse::<f64>().map_err(|e| Error::Parse { line, message: format!("{s:?}: {e}") })
        };
        times.push(field(ti)?);
        values.push(field(vi)?);
    }
    Ok((times, values))
}
