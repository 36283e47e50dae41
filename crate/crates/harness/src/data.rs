//! Tabular input: CSV ingestion and the synthetic stand-in generator.

use std::io::{Read, Write};
use std::path::Path;

use highlight_core::seeded_stream;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{io_error, HarnessError, Result};

/// Numeric rows with named columns. Every feature is treated as a real
/// number, categorical codes included.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Input rows dropped because a cell was empty or not numeric.
    pub skipped_rows: usize,
}

impl Dataset {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| HarnessError::MissingColumn(name.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let columns: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut skipped_rows = 0;
        for record in csv.records() {
            let record = record?;
            let parsed: Option<Vec<f64>> = record
                .iter()
                .map(|cell| cell.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect();
            match parsed {
                Some(row) if row.len() == columns.len() => rows.push(row),
                _ => skipped_rows += 1,
            }
        }
        if rows.is_empty() {
            return Err(HarnessError::NoRows { skipped: skipped_rows });
        }
        Ok(Self {
            columns,
            rows,
            skipped_rows,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(io_error(path))?;
        Self::from_reader(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(&self.columns)?;
        for row in &self.rows {
            csv.write_record(row.iter().map(|v| v.to_string()))?;
        }
        csv.flush().map_err(io_error("<csv writer>"))?;
        Ok(())
    }
}

/// Block-correlated synthetic features with one latent outcome column.
///
/// Features come in blocks sharing a factor, plus a market-wide factor and
/// idiosyncratic noise: z_j = a·f_block + c·g + √(1 − a² − c²)·e_j. Every
/// `discrete_every`-th feature is coarsened to integer codes 0..=6. The
/// outcome `log_value` loads on the block factors (with decaying weights), the
/// market factor and a few individual features, and is observed with noise;
/// it is the first column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n: usize,
    /// Number of feature columns besides the outcome.
    pub features: usize,
    pub block_size: usize,
    pub block_loading: f64,
    pub market_loading: f64,
    /// Share of outcome variance that is pure noise.
    pub outcome_noise: f64,
    pub discrete_every: usize,
    pub outcome_mean: f64,
    pub outcome_sd: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n: 2000,
            features: 43,
            block_size: 6,
            block_loading: 0.8,
            market_loading: 0.3,
            outcome_noise: 0.3,
            discrete_every: 3,
            outcome_mean: 12.5,
            outcome_sd: 0.6,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(HarnessError::InvalidConfig(format!("synthetic: {msg}")));
        if self.n < 2 || self.features == 0 || self.block_size == 0 || self.discrete_every == 0 {
            return bad("n >= 2 and positive features, block_size and discrete_every required");
        }
        let shared = self.block_loading.powi(2) + self.market_loading.powi(2);
        if !(shared < 1.0) || self.block_loading < 0.0 || self.market_loading < 0.0 {
            return bad("loadings must be nonnegative with squares summing below one");
        }
        if !(0.0..1.0).contains(&self.outcome_noise) || !(self.outcome_sd > 0.0) {
            return bad("outcome_noise in [0, 1) and outcome_sd > 0 required");
        }
        Ok(())
    }

    fn blocks(&self) -> usize {
        self.features.div_ceil(self.block_size)
    }

    /// Column names: the outcome, then `f01`, `f02`, ...
    pub fn columns(&self) -> Vec<String> {
        let width = self.features.to_string().len().max(2);
        std::iter::once("log_value".to_string())
            .chain((1..=self.features).map(|j| format!("f{j:0width$}")))
            .collect()
    }

    /// Draws the dataset; row `i` uses random stream `i` of `seed`.
    pub fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        let blocks = self.blocks();
        let (a, c) = (self.block_loading, self.market_loading);
        let idio = (1.0 - a * a - c * c).sqrt();
        let block_weight: Vec<f64> = (0..blocks).map(|b| 1.0 / (b as f64 + 1.0)).collect();
        let direct: Vec<usize> = (0..self.features).step_by(5).collect();
        let draws: Vec<(Vec<f64>, f64)> = (0..self.n)
            .into_par_iter()
            .map(|i| {
                let mut rng = seeded_stream(self.seed, i as u64);
                let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
                let market = normal();
                let factors: Vec<f64> = (0..blocks).map(|_| normal()).collect();
                let z: Vec<f64> = (0..self.features)
                    .map(|j| a * factors[j / self.block_size] + c * market + idio * normal())
                    .collect();
                let mut latent = 0.5 * market;
                for (b, f) in factors.iter().enumerate() {
                    latent += block_weight[b] * f;
                }
                for &j in &direct {
                    latent += 0.2 * z[j];
                }
                let noise = normal();
                let mut row = Vec::with_capacity(self.features + 1);
                row.push(latent);
                row.extend(z.iter().enumerate().map(|(j, &v)| {
                    if j % self.discrete_every == 0 {
                        (1.5 * v + 3.0).round().clamp(0.0, 6.0)
                    } else {
                        (1.0 + 0.5 * (j % 4) as f64) * v + j as f64
                    }
                }));
                (row, noise)
            })
            .collect();
        // Scale the outcome to the requested mean and spread.
        let n = draws.len() as f64;
        let mean = draws.iter().map(|(r, _)| r[0]).sum::<f64>() / n;
        let sd = (draws.iter().map(|(r, _)| (r[0] - mean).powi(2)).sum::<f64>() / n).sqrt();
        let signal = (1.0 - self.outcome_noise).sqrt();
        let noise = self.outcome_noise.sqrt();
        let rows = draws
            .into_iter()
            .map(|(mut r, e)| {
                r[0] = self.outcome_mean + self.outcome_sd * (signal * (r[0] - mean) / sd + noise * e);
                r
            })
            .collect();
        Ok(Dataset {
            columns: self.columns(),
            rows,
            skipped_rows: 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_skips_bad_rows() {
        let text = "a,b\n1,2\n3,x\n,4\n5.5,-1e3\n";
        let data = Dataset::from_reader(text.as_bytes()).unwrap();
        assert_eq!(data.columns, vec!["a", "b"]);
        assert_eq!(data.rows, vec![vec![1.0, 2.0], vec![5.5, -1000.0]]);
        assert_eq!(data.skipped_rows, 2);
        assert!(matches!(data.column("c"), Err(HarnessError::MissingColumn(_))));
        assert!(matches!(
            Dataset::from_reader("a\nx\n".as_bytes()),
            Err(HarnessError::NoRows { skipped: 1 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let data = SyntheticSpec {
            n: 20,
            features: 7,
            ..Default::default()
        }
        .generate()
        .unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::from_reader(buf.as_slice()).unwrap(), data);
    }

    #[test]
    fn synthetic_is_deterministic_and_shaped() {
        let spec = SyntheticSpec {
            n: 300,
            ..Default::default()
        };
        let a = spec.generate().unwrap();
        assert_eq!(a, spec.generate().unwrap());
        assert_eq!(a.dim(), 44);
        assert_eq!(a.columns[0], "log_value");
        assert_eq!(a.columns[43], "f43");
        let mean = a.rows.iter().map(|r| r[0]).sum::<f64>() / 300.0;
        assert!((mean - 12.5).abs() < 0.1);
        assert!(a.rows.iter().all(|r| r[1].fract() == 0.0 && (0.0..=6.0).contains(&r[1])));
    }
}
