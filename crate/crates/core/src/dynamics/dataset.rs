use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::DynamicsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Ordered `(x, y)` pairs, optionally tagged with the generating mode.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub pairs: Vec<Sample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributions: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(pairs: Vec<Sample>) -> Self {
        Dataset {
            pairs,
            attributions: None,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.pairs.first().map(|s| s.x.len())
    }

    pub fn push(&mut self, sample: Sample) {
        self.pairs.push(sample);
        self.attributions = None;
    }

    pub fn extend(&mut self, other: &Dataset) {
        self.pairs.extend(other.pairs.iter().cloned());
        self.attributions = None;
    }

    /// Writes `x1..xN,y1..yN`, plus a trailing `cluster` column when labels
    /// are given (`-1` for unlabeled rows).
    pub fn write_csv<W: Write>(&self, w: W, clusters: Option<&[Option<usize>]>) -> Result<(), DynamicsError> {
        let n = self.dim().unwrap_or(0);
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.extend((1..=n).map(|i| format!("y{i}")));
        if clusters.is_some() {
            header.push("cluster".into());
        }
        out.write_record(&header)?;
        for (k, s) in self.pairs.iter().enumerate() {
            let mut rec: Vec<String> = s.x.iter().chain(&s.y).map(|v| format!("{v:?}")).collect();
            if let Some(c) = clusters {
                rec.push(c.get(k).copied().flatten().map_or("-1".into(), |v| v.to_string()));
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Reads the layout produced by [`Dataset::write_csv`]. A `cluster`
    /// column, when present, is returned separately.
    pub fn read_csv<R: Read>(r: R) -> Result<(Dataset, Option<Vec<Option<usize>>>), DynamicsError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let has_cluster = headers.iter().next_back() == Some("cluster");
        let width = headers.len() - usize::from(has_cluster);
        if width == 0 || width % 2 != 0 {
            return Err(DynamicsError::MalformedDataset(format!("{width} state columns")));
        }
        let n = width / 2;
        for (i, h) in headers.iter().take(width).enumerate() {
            let expect = if i < n { format!("x{}", i + 1) } else { format!("y{}", i - n + 1) };
            if h.trim() != expect {
                return Err(DynamicsError::MalformedDataset(format!("column {i} is '{h}', expected '{expect}'")));
            }
        }
        let mut pairs = Vec::new();
        let mut clusters = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .take(width)
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DynamicsError::MalformedDataset(format!("row {}: {e}", line + 1)))?;
            if vals.len() != width {
                return Err(DynamicsError::MalformedDataset(format!("row {} is short", line + 1)));
            }
            pairs.push(Sample {
                x: vals[..n].to_vec(),
                y: vals[n..].to_vec(),
            });
            if has_cluster {
                let c = rec.get(width).unwrap_or("-1").trim();
                clusters.push(c.parse::<usize>().ok());
            }
        }
        Ok((Dataset::new(pairs), has_cluster.then_some(clusters)))
    }
}
