use crate::{Error, Result};
use std::path::Path;

const TRAILING: [&str; 6] = ["metric", "value", "ci_low", "ci_high", "trials", "seed"];

/// One result value with its sweep coordinates and 95% interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    /// Values of the table's coordinate columns, in order.
    pub coords: Vec<String>,
    pub metric: String,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Rows of one experiment sharing a set of coordinate columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub coord_keys: Vec<String>,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(coord_keys: impl IntoIterator<Item = S>) -> Self {
        Self {
            coord_keys: coord_keys.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Rows whose coordinate `key` equals `value`.
    pub fn filter<'a>(&'a self, key: &str, value: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        let idx = self.coord_keys.iter().position(|k| k == key);
        self.rows
            .iter()
            .filter(move |r| idx.is_some_and(|i| r.coords[i] == value))
    }

    /// The row matching every `(key, value)` pair and `metric`.
    pub fn find(&self, coords: &[(&str, &str)], metric: &str) -> Option<&ResultRow> {
        let idx: Option<Vec<usize>> = coords
            .iter()
            .map(|(k, _)| self.coord_keys.iter().position(|c| c == k))
            .collect();
        let idx = idx?;
        self.rows.iter().find(|r| {
            r.metric == metric && idx.iter().zip(coords).all(|(&i, (_, v))| r.coords[i] == *v)
        })
    }
}

/// Writes `table` as UTF-8 CSV with LF line endings. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    let header: Vec<&str> = std::iter::once("experiment")
        .chain(table.coord_keys.iter().map(String::as_str))
        .chain(TRAILING)
        .collect();
    w.write_record(&header)?;
    for r in &table.rows {
        if r.coords.len() != table.coord_keys.len() {
            return Err(Error::dims(format!(
                "row has {} coordinates, table has {}",
                r.coords.len(),
                table.coord_keys.len()
            )));
        }
        let mut rec = Vec::with_capacity(header.len());
        rec.push(r.experiment.clone());
        rec.extend(r.coords.iter().cloned());
        rec.push(r.metric.clone());
        rec.push(r.value.to_string());
        rec.push(r.ci_low.to_string());
        rec.push(r.ci_high.to_string());
        rec.push(r.trials.to_string());
        rec.push(r.seed.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<ResultTable> {
    let mut r = csv::ReaderBuilder::new().from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let bad = |msg: String| Error::Parse {
        path: path.to_owned(),
        message: msg,
    };
    if header.len() < 1 + TRAILING.len()
        || header[0] != "experiment"
        || header[header.len() - TRAILING.len()..] != TRAILING
    {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let ncoords = header.len() - 1 - TRAILING.len();
    let mut table = ResultTable::new(header[1..=ncoords].iter().cloned());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| bad(format!("record {}: column {i} is not a number", line + 1)))
        };
        let int = |i: usize| -> Result<u64> {
            field(i)
                .parse()
                .map_err(|_| bad(format!("record {}: column {i} is not an integer", line + 1)))
        };
        let base = 1 + ncoords;
        table.rows.push(ResultRow {
            experiment: field(0).to_owned(),
            coords: (1..=ncoords).map(|i| field(i).to_owned()).collect(),
            metric: field(base).to_owned(),
            value: num(base + 1)?,
            ci_low: num(base + 2)?,
            ci_high: num(base + 3)?,
            trials: int(base + 4)?,
            seed: int(base + 5)?,
        });
    }
    Ok(table)
}
