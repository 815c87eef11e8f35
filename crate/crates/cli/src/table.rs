//! Multi-seed result tables and their CSV form.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// One curve of a metric: a value per `x` for every seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub curve: String,
    pub x: Vec<f64>,
    pub per_seed: BTreeMap<u64, Vec<f64>>,
}

impl Series {
    pub fn new(curve: impl Into<String>, x: Vec<f64>) -> Self {
        Self {
            curve: curve.into(),
            x,
            per_seed: BTreeMap::new(),
        }
    }

    /// Mean over seeds at every `x`; seeds are summed in ascending order.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.per_seed.len() as f64;
        (0..self.x.len())
            .map(|i| self.per_seed.values().map(|v| v[i]).sum::<f64>() / n)
            .collect()
    }

    /// Population variance over seeds at every `x`.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.per_seed.len() as f64;
        self.mean()
            .iter()
            .enumerate()
            .map(|(i, m)| self.per_seed.values().map(|v| (v[i] - m).powi(2)).sum::<f64>() / n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub experiment: String,
    pub metrics: Vec<Metric>,
}

impl ResultTable {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

impl Metric {
    pub fn series(&self, curve: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.curve == curve)
    }
}

const HEADER: [&str; 4] = ["x", "curve", "seed", "value"];

/// Writes `metric` as CSV with columns `x, curve, seed, value`. Each `x` of a
/// curve lists every seed, then a `mean` and a `var` row. Floats use the
/// shortest representation that parses back to the same bits.
pub fn emit_csv(metric: &Metric, path: &Path) -> Result<()> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    writer.write_record(HEADER).map_err(csv_err)?;
    for series in &metric.series {
        let (mean, var) = (series.mean(), series.variance());
        for (i, x) in series.x.iter().enumerate() {
            let x = x.to_string();
            for (seed, values) in &series.per_seed {
                writer
                    .write_record([x.as_str(), &series.curve, &seed.to_string(), &values[i].to_string()])
                    .map_err(csv_err)?;
            }
            writer
                .write_record([x.as_str(), &series.curve, "mean", &mean[i].to_string()])
                .map_err(csv_err)?;
            writer
                .write_record([x.as_str(), &series.curve, "var", &var[i].to_string()])
                .map_err(csv_err)?;
        }
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

/// Parsed CSV: the per-seed series plus the `mean` and `var` rows as written.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvContents {
    pub series: Vec<Series>,
    pub mean: BTreeMap<String, Vec<f64>>,
    pub var: BTreeMap<String, Vec<f64>>,
}

pub fn read_csv(path: &Path) -> Result<CsvContents> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    if reader.headers().map_err(csv_err)? != HEADER.as_slice() {
        return Err(bad("unexpected header".into()));
    }
    let mut series: Vec<Series> = Vec::new();
    let mut mean: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut var: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let parse = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let (x, curve, seed, value) = (parse(&record[0])?, &record[1], &record[2], parse(&record[3])?);
        if series.last().is_none_or(|s| s.curve != curve) {
            series.push(Series::new(curve, Vec::new()));
        }
        let current = series.last_mut().expect("pushed above");
        match seed {
            "mean" => mean.entry(curve.to_string()).or_default().push(value),
            "var" => var.entry(curve.to_string()).or_default().push(value),
            seed => {
                let seed: u64 = seed.parse().map_err(|e| bad(format!("seed `{seed}`: {e}")))?;
                // The first seed row of each x opens a new column.
                if current.per_seed.get(&seed).map_or(0, Vec::len) == current.x.len() {
                    current.x.push(x);
                }
                current.per_seed.entry(seed).or_default().push(value);
            }
        }
    }
    Ok(CsvContents { series, mean, var })
}

/// `dir/<metric>.csv`.
pub fn csv_path(dir: &Path, metric: &Metric) -> PathBuf {
    dir.join(format!("{}.csv", metric.name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Metric {
        let mut a = Series::new("a", vec![1e-4, 0.1, 3.0]);
        a.per_seed.insert(3, vec![1.0, 0.1 + 0.2, f64::MIN_POSITIVE]);
        a.per_seed.insert(7, vec![2.0, 1.0 / 3.0, 1e300]);
        let mut b = Series::new("b, quoted", vec![5.0]);
        b.per_seed.insert(0, vec![-0.5]);
        Metric {
            name: "m".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            series: vec![a, b],
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join(format!("explore-table-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let metric = sample();
        let path = csv_path(&dir, &metric);
        emit_csv(&metric, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.series, metric.series);
        assert_eq!(back.mean["a"], metric.series[0].mean());
        assert_eq!(back.var["b, quoted"], vec![0.0]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains('\r'));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn mean_and_variance() {
        let s = &sample().series[0];
        assert_eq!(s.mean()[0], 1.5);
        assert_eq!(s.variance()[0], 0.25);
    }
}
