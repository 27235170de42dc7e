use std::io::{Read, Write};

use indexmap::IndexMap;

use crate::error::{Result, StlError};

/// Named scalar channels sampled at the same discrete steps.
///
/// Channel order is insertion order and is preserved by the CSV format.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    channels: IndexMap<String, Vec<f64>>,
    length: usize,
    dt: f64,
}

impl Trace {
    /// Builds a trace from complete channel series. All series must have the
    /// same nonzero length.
    pub fn from_channels<I, S>(channels: I, dt: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut map = IndexMap::new();
        let mut length = None;
        for (name, series) in channels {
            let name = name.into();
            match length {
                None => length = Some(series.len()),
                Some(n) if n != series.len() => {
                    return Err(StlError::Trace(format!(
                        "channel `{name}` has {} samples, expected {n}",
                        series.len()
                    )))
                }
                _ => {}
            }
            if map.insert(name.clone(), series).is_some() {
                return Err(StlError::Trace(format!("duplicate channel `{name}`")));
            }
        }
        let length = length.unwrap_or(0);
        if length == 0 {
            return Err(StlError::Trace("a trace needs at least one step".into()));
        }
        Ok(Self {
            channels: map,
            length,
            dt,
        })
    }

    /// An empty trace with a fixed channel schema, filled row by row with
    /// [`Trace::push_row`]. Used for recording partial trajectories online.
    pub fn recording<I, S>(names: I, dt: f64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = IndexMap::new();
        for name in names {
            let name = name.into();
            if map.insert(name.clone(), Vec::new()).is_some() {
                return Err(StlError::Trace(format!("duplicate channel `{name}`")));
            }
        }
        Ok(Self {
            channels: map,
            length: 0,
            dt,
        })
    }

    /// Appends one sample per channel, in schema order.
    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.channels.len() {
            return Err(StlError::Trace(format!(
                "row has {} values for {} channels",
                row.len(),
                self.channels.len()
            )));
        }
        for (series, &value) in self.channels.values_mut().zip(row) {
            series.push(value);
        }
        self.length += 1;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.get(name).map(Vec::as_slice)
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.keys().map(String::as_str)
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    /// Copy of the steps `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Trace> {
        if len == 0 || start + len > self.length {
            return Err(StlError::Trace(format!(
                "slice {start}..{} does not fit a trace of length {}",
                start + len,
                self.length
            )));
        }
        Ok(Trace {
            channels: self
                .channels
                .iter()
                .map(|(k, v)| (k.clone(), v[start..start + len].to_vec()))
                .collect(),
            length: len,
            dt: self.dt,
        })
    }

    /// Writes the `t,<channel>,...` CSV format, one row per step. The `t`
    /// column holds the step index.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.channels.keys().cloned());
        out.write_record(&header)?;
        for t in 0..self.length {
            let mut record = vec![t.to_string()];
            record.extend(self.channels.values().map(|s| s[t].to_string()));
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| StlError::Csv(e.to_string()))?;
        Ok(())
    }

    /// Reads the CSV format written by [`Trace::write_csv`]. The first column
    /// must be named `t`; its values are ignored apart from the row count.
    pub fn read_csv<R: Read>(reader: R, dt: f64) -> Result<Trace> {
        let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = input.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(StlError::Csv("first column must be `t`".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (row, record) in input.records().enumerate() {
            let record = record?;
            if record.len() != names.len() + 1 {
                return Err(StlError::Csv(format!(
                    "row {} has {} fields, expected {}",
                    row + 1,
                    record.len(),
                    names.len() + 1
                )));
            }
            for (col, field) in record.iter().skip(1).enumerate() {
                let value: f64 = field.parse().map_err(|_| {
                    StlError::Csv(format!("row {}: `{field}` is not a number", row + 1))
                })?;
                columns[col].push(value);
            }
        }
        Trace::from_channels(names.into_iter().zip(columns), dt)
    }
}
