//! Numeric column extraction from CSV files.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::CliError;

/// Column selector: a 1-based index or a header name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Column {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.parse::<usize>() {
            Ok(0) => Err("column indices start at 1".into()),
            Ok(i) => Ok(Column::Index(i)),
            Err(_) if !s.is_empty() => Ok(Column::Name(s.to_string())),
            Err(_) => Err("empty column name".into()),
        }
    }
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(1)
    }
}

pub fn read_column(path: &Path, column: &Column) -> Result<Vec<f64>, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_column(&text, column)
}

/// Parses one column. A first row whose selected field is not a number is a header.
pub fn parse_column(text: &str, column: &Column) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Usage(format!("malformed CSV: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, rec));
    }
    if rows.is_empty() {
        return Err(CliError::Usage("input has no data rows".into()));
    }

    let header_field = |rec: &csv::StringRecord| match column {
        Column::Index(i) => rec.get(i - 1).map(str::to_string),
        Column::Name(_) => None,
    };
    let first_is_header = match column {
        Column::Name(_) => true,
        Column::Index(_) => header_field(&rows[0].1).is_some_and(|f| f.parse::<f64>().is_err()),
    };
    let index = match column {
        Column::Index(i) => i - 1,
        Column::Name(name) => rows[0]
            .1
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("no column named '{name}' in the header")))?,
    };
    let data = if first_is_header { &rows[1..] } else { &rows[..] };
    if data.is_empty() {
        return Err(CliError::Usage("input has a header but no data rows".into()));
    }

    let mut values = Vec::with_capacity(data.len());
    let mut bad = Vec::new();
    for (line, rec) in data {
        match rec.get(index).map(str::parse::<f64>) {
            Some(Ok(v)) if v.is_finite() => values.push(v),
            _ => bad.push(*line),
        }
    }
    if !bad.is_empty() {
        let shown: Vec<String> = bad.iter().take(20).map(u64::to_string).collect();
        let more = if bad.len() > 20 { ", ..." } else { "" };
        return Err(CliError::Usage(format!(
            "non-numeric, missing or non-finite values on line(s) {}{more}",
            shown.join(", ")
        )));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected() {
        let v = parse_column("x\n1\n2.5\n", &Column::default()).unwrap();
        assert_eq!(v, vec![1.0, 2.5]);
        let v = parse_column("1\n2\n", &Column::default()).unwrap();
        assert_eq!(v, vec![1.0, 2.0]);
    }

    #[test]
    fn columns_by_index_and_name() {
        let text = "a,b\n1,10\n2,20\n";
        assert_eq!(parse_column(text, &Column::Index(2)).unwrap(), vec![10.0, 20.0]);
        assert_eq!(parse_column(text, &"b".parse().unwrap()).unwrap(), vec![10.0, 20.0]);
        assert!(parse_column(text, &"c".parse().unwrap()).is_err());
    }

    #[test]
    fn bad_rows_are_listed() {
        let err = parse_column("1\nfoo\n3\nNaN\ninf\n", &Column::default()).unwrap_err();
        assert!(err.to_string().contains("line(s) 2, 4, 5"), "{err}");
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(parse_column("", &Column::default()).is_err());
        assert!(parse_column("x\n", &Column::default()).is_err());
    }
}
