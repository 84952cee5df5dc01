use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Binary-classification samples with labels in `{0, 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}

/// Two Gaussian blobs centred at `±(separation/√d)·1` with unit covariance,
/// labels drawn fair. Overlapping blobs keep the logistic optimum finite.
pub fn synthetic_blobs(samples: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if samples == 0 || dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "synthetic dataset needs samples > 0 and dim > 0 (got {samples}, {dim})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let shift = separation / (dim as f64).sqrt();
    let mut features = Vec::with_capacity(samples);
    let mut labels = Vec::with_capacity(samples);
    for _ in 0..samples {
        let y = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let sign = if y == 1.0 { 1.0 } else { -1.0 };
        let row = (0..dim)
            .map(|_| sign * shift + rng.sample::<f64, _>(StandardNormal))
            .collect();
        features.push(row);
        labels.push(y);
    }
    Ok(Dataset { features, labels })
}

/// Reads a CSV with header `y,x1,...,xd`.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || headers.get(0).map(str::trim) != Some("y") {
        return Err(Error::InvalidArgument(
            "dataset header must be `y,x1,...,xd` with at least one feature".into(),
        ));
    }
    let dim = headers.len() - 1;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("row {}: column {} `{raw}` is not a number", line + 1, i + 1))
            })
        };
        let y = parse(0)?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidArgument(format!(
                "row {}: label {y} is not in {{0, 1}}",
                line + 1
            )));
        }
        let row = (1..=dim).map(parse).collect::<Result<Vec<_>>>()?;
        features.push(row);
        labels.push(y);
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("dataset has no rows".into()));
    }
    Ok(Dataset { features, labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_rows() {
        let data = "y,x1,x2\n1,0.5,-1\n0,2,3\n";
        let ds = read_csv(data.as_bytes()).unwrap();
        assert_eq!(ds.labels, vec![1.0, 0.0]);
        assert_eq!(ds.features[1], vec![2.0, 3.0]);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn rejects_bad_labels_and_headers() {
        assert!(read_csv("y,x1\n2,0.5\n".as_bytes()).is_err());
        assert!(read_csv("label,x1\n1,0.5\n".as_bytes()).is_err());
        assert!(read_csv("y,x1\n".as_bytes()).is_err());
        assert!(read_csv("y,x1\n1,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn blobs_are_seeded() {
        let a = synthetic_blobs(50, 3, 1.0, 9).unwrap();
        let b = synthetic_blobs(50, 3, 1.0, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.labels.contains(&0.0) && a.labels.contains(&1.0));
    }
}
