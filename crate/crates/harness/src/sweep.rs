//! The benchmark sweep: every (policy, k, agent) cell on one dataset.

use std::fmt;

use highlight_core::loss::realized_loss;
use highlight_core::naive::TrainingSample;
use highlight_core::policies::{EnumerationLimits, FixedSet, Planner};
use highlight_core::risk::{mean_and_std_error, EmpiricalReceiver, NaiveReceiver, Receiver};
use highlight_core::belief::EmpiricalSupport;
use highlight_core::{seeded_stream, AgentType, Highlighter, HighlightSet, PolicySpec, PriorSampler, Snapper};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrate::{calibrate, Calibration};
use crate::config::{parse_policy, policy_spec, Evaluation, ExperimentConfig};
use crate::data::Dataset;
use crate::error::{HarnessError, Result};

/// Policy label of the reveal-everything benchmark row.
pub const FULL_REVEAL: &str = "full_reveal";

/// Columns with at most this many distinct integer values are treated as
/// categorical codes when simulating the sophisticated receiver.
pub const MAX_CODES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Skipped,
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ok => "ok",
            Self::Skipped => "skipped",
        })
    }
}

/// One cell of the result table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub k: usize,
    pub policy: String,
    pub agent: AgentType,
    pub mean_loss: Option<f64>,
    pub std_error: Option<f64>,
    /// Median number of features actually revealed.
    pub median_revealed: Option<f64>,
    pub status: CellStatus,
    #[serde(default)]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub sample_size: usize,
    pub training_size: usize,
    pub skipped_input_rows: usize,
    pub target: String,
    pub alpha: f64,
    pub ridge_lambda: f64,
    pub r_squared: f64,
    pub revealable: usize,
    pub n_support: usize,
    pub evaluation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: TableMetadata,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn find(&self, policy: &str, k: usize, agent: AgentType) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.policy == policy && r.k == k && r.agent == agent)
    }

    /// Mean loss of an evaluated cell.
    pub fn loss(&self, policy: &str, k: usize, agent: AgentType) -> Option<f64> {
        self.find(policy, k, agent).and_then(|r| r.mean_loss)
    }
}

/// Calibration plus the rows the policies are trained and scored on.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub calibration: Calibration,
    pub train_rows: Vec<Vec<f64>>,
    pub eval_rows: Vec<Vec<f64>>,
    /// Snaps simulated draws onto the alphabets of categorical columns.
    pub snapper: Snapper,
}

/// Loads or generates the data named by `config`.
pub fn load_data(config: &ExperimentConfig) -> Result<Dataset> {
    match (&config.input, &config.synthetic) {
        (Some(path), None) => Dataset::read_csv(path),
        (None, Some(spec)) => spec.generate(),
        _ => Err(HarnessError::InvalidConfig("exactly one data source required".into())),
    }
}

/// Indices of columns whose observed values are few integer codes.
pub fn categorical_columns(rows: &[Vec<f64>], dim: usize) -> Vec<usize> {
    (0..dim)
        .filter(|&j| {
            let mut codes: Vec<f64> = Vec::new();
            for r in rows {
                let v = r[j];
                if v.fract() != 0.0 {
                    return false;
                }
                if !codes.contains(&v) {
                    if codes.len() == MAX_CODES {
                        return false;
                    }
                    codes.push(v);
                }
            }
            true
        })
        .collect()
}

/// Splits the data, calibrates and builds the evaluation rows.
pub fn prepare(config: &ExperimentConfig, data: &Dataset) -> Result<Prepared> {
    let hidden = config.hidden_columns();
    let (train, eval) = match config.evaluation {
        Evaluation::Holdout { fraction } => {
            let n = data.rows.len();
            let n_eval = ((n as f64) * fraction).round() as usize;
            if n_eval == 0 || n_eval + 2 > n {
                return Err(HarnessError::InvalidConfig(format!(
                    "holdout fraction {fraction} leaves no rows on one side of {n}"
                )));
            }
            let (a, b) = data.rows.split_at(n - n_eval);
            (a.to_vec(), Some(b.to_vec()))
        }
        _ => (data.rows.clone(), None),
    };
    let train_data = Dataset {
        columns: data.columns.clone(),
        rows: train,
        skipped_rows: data.skipped_rows,
    };
    let calibration = calibrate(&train_data, &config.target, &hidden, config.alpha, config.ridge_lambda)?;
    let d = data.dim();
    let snapper = Snapper::from_observed(&train_data.rows, d, &categorical_columns(&train_data.rows, d))?;
    let eval_rows = match (config.evaluation, eval) {
        (_, Some(rows)) => rows,
        (Evaluation::Simulated { n, seed }, _) => (0..n)
            .into_par_iter()
            .map(|i| snapper.snap(&calibration.prior.sample(&mut seeded_stream(seed, i as u64))))
            .collect(),
        _ => train_data.rows.clone(),
    };
    Ok(Prepared {
        calibration,
        train_rows: train_data.rows,
        eval_rows,
        snapper,
    })
}

/// Seed of the simulated support behind one cell, derived from the run seed
/// and the cell identity so cells do not share draws.
fn cell_seed(seed: u64, policy: &str, k: usize) -> u64 {
    let digest = Sha256::digest(format!("{seed}/{policy}/{k}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("eight bytes"))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Mean loss, standard error and median message size of one cell.
fn score<H, A>(rows: &[Vec<f64>], policy: &H, receiver: &A, prep: &Prepared) -> Result<(f64, f64, f64)>
where
    H: Highlighter + ?Sized,
    A: Receiver + ?Sized,
{
    let loss = &prep.calibration.loss;
    let scored: Vec<(f64, f64)> = rows
        .par_iter()
        .map(|x| {
            let msg = HighlightSet::reveal(&policy.select(x)?, x)?;
            let value = realized_loss(&receiver.respond(&msg, loss)?, x, None, loss)?;
            Ok((value, msg.len() as f64))
        })
        .collect::<highlight_core::Result<_>>()?;
    let (losses, mut sizes): (Vec<f64>, Vec<f64>) = scored.into_iter().unzip();
    let (mean, se) = mean_and_std_error(&losses);
    Ok((mean, se, median(&mut sizes)))
}

fn skipped(k: usize, policy: &str, agent: AgentType, note: String) -> ResultRow {
    ResultRow {
        k,
        policy: policy.to_string(),
        agent,
        mean_loss: None,
        std_error: None,
        median_revealed: None,
        status: CellStatus::Skipped,
        note,
    }
}

/// Evaluates one policy at one bandwidth for every requested agent.
fn run_cell(
    config: &ExperimentConfig,
    prep: &Prepared,
    planner: &Planner<'_, highlight_core::GaussianBelief>,
    sample: &TrainingSample,
    spec: &PolicySpec,
) -> Result<Vec<ResultRow>> {
    let label = spec.label();
    let skip_all = |note: String| config.agents.iter().map(|&a| skipped(spec.k, &label, a, note.clone())).collect();
    let revealable = planner.revealable().len();
    if spec.k > revealable {
        return Ok(skip_all(format!("k exceeds the {revealable} revealable features")));
    }
    if spec.kind.is_exact() && spec.k > config.k_max_enum {
        return Ok(skip_all(format!("exact search limited to k <= {}", config.k_max_enum)));
    }
    let policy = match planner.train(spec, Some(sample)) {
        Ok(policy) => policy,
        Err(e @ highlight_core::Error::EnumerationBudgetExceeded { .. }) => return Ok(skip_all(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let prior = &prep.calibration.prior;
    let naive = score(&prep.eval_rows, &policy, &NaiveReceiver(prior), prep)?;
    let mut rows = Vec::new();
    for &agent in &config.agents {
        let (mean, se, revealed) = match agent {
            AgentType::Naive => naive,
            // A fixed set carries no information beyond the revealed values.
            AgentType::Sophisticated if spec.kind.is_fixed() || spec.k == 0 => naive,
            AgentType::Sophisticated => {
                let support = EmpiricalSupport::build(
                    prior,
                    &policy,
                    &prep.snapper,
                    config.n_support,
                    cell_seed(config.seed, &label, spec.k),
                )?;
                let receiver = EmpiricalReceiver {
                    support: &support,
                    fallback: prior,
                };
                score(&prep.eval_rows, &policy, &receiver, prep)?
            }
        };
        rows.push(ResultRow {
            k: spec.k,
            policy: label.clone(),
            agent,
            mean_loss: Some(mean),
            std_error: Some(se),
            median_revealed: Some(revealed),
            status: CellStatus::Ok,
            note: String::new(),
        });
    }
    Ok(rows)
}

/// Runs the sweep on already prepared data.
pub fn sweep_prepared(config: &ExperimentConfig, prep: &Prepared, skipped_input_rows: usize) -> Result<ResultTable> {
    config.validate()?;
    let cal = &prep.calibration;
    let limits = EnumerationLimits {
        k_max: config.k_max_enum,
        ..EnumerationLimits::default()
    };
    let planner = Planner::new(&cal.prior, &cal.loss)
        .with_revealable(cal.revealable.clone())?
        .with_limits(limits);
    let sample = TrainingSample::uniform(prep.train_rows.clone())?;

    let mut rows = Vec::new();
    for label in &config.policies {
        parse_policy(label)?;
        for &k in &config.ks {
            rows.extend(run_cell(config, prep, &planner, &sample, &policy_spec(label, k)?)?);
        }
    }

    if config.full_reveal {
        let all = cal.revealable.len();
        let everything = FixedSet::new(cal.revealable.clone());
        let (mean, se, revealed) = score(&prep.eval_rows, &everything, &NaiveReceiver(&cal.prior), prep)?;
        for &agent in &config.agents {
            rows.push(ResultRow {
                k: all,
                policy: FULL_REVEAL.to_string(),
                agent,
                mean_loss: Some(mean),
                std_error: Some(se),
                median_revealed: Some(revealed),
                status: CellStatus::Ok,
                note: String::new(),
            });
        }
        let smart = policy_spec("contextual_greedy+stop", all)?;
        if !rows.iter().any(|r| r.policy == smart.label() && r.k == all) {
            rows.extend(run_cell(config, prep, &planner, &sample, &smart)?);
        }
    }

    Ok(ResultTable {
        metadata: TableMetadata {
            config_hash: config.hash(),
            seed: config.seed,
            sample_size: prep.eval_rows.len(),
            training_size: prep.train_rows.len(),
            skipped_input_rows,
            target: config.target.clone(),
            alpha: config.alpha,
            ridge_lambda: cal.ridge_lambda,
            r_squared: cal.r_squared,
            revealable: cal.revealable.len(),
            n_support: config.n_support,
            evaluation: evaluation_label(config.evaluation),
        },
        rows,
    })
}

fn evaluation_label(evaluation: Evaluation) -> String {
    match evaluation {
        Evaluation::InSample => "in_sample".into(),
        Evaluation::Holdout { fraction } => format!("holdout({fraction})"),
        Evaluation::Simulated { n, seed } => format!("simulated(n={n},seed={seed})"),
    }
}

/// Loads the data, calibrates and runs every cell.
pub fn run_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let data = load_data(config)?;
    let prep = prepare(config, &data)?;
    sweep_prepared(config, &prep, data.skipped_rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_detection() {
        let rows = vec![vec![1.0, 0.5, 3.0], vec![2.0, 1.0, 3.0], vec![1.0, 2.0, 4.0]];
        assert_eq!(categorical_columns(&rows, 3), vec![0, 2]);
        let many: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i)]).collect();
        assert!(categorical_columns(&many, 1).is_empty());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn cell_seeds_differ() {
        assert_ne!(cell_seed(0, "contextual_greedy", 1), cell_seed(0, "contextual_greedy", 2));
        assert_eq!(cell_seed(3, "a", 1), cell_seed(3, "a", 1));
    }
}
