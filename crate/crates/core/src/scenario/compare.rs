use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{run_trial, TrialError, TrialResult};
use super::TaskKind;
use crate::config::Settings;
use crate::technique::TechniqueKind;

/// One trial as emitted on the batch output stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub scenario: TaskKind,
    pub technique: TechniqueKind,
    #[serde(flatten)]
    pub result: TrialResult,
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one sample).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub sd: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: TaskKind,
    pub technique: TechniqueKind,
    pub trials: usize,
    pub completed: usize,
    pub completion_s: Stat,
    pub path_len_m: Stat,
    pub mean_xte_m: Stat,
    pub max_xte_m: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Trials ordered by repetition, then technique.
    pub trials: Vec<TrialRecord>,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, technique: TechniqueKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.technique == technique)
    }
}

/// Runs every technique on the same `reps` seeds (`seed..seed + reps`) and
/// aggregates per technique. Trials run in parallel; the output does not
/// depend on scheduling.
pub fn compare(
    task: TaskKind,
    techniques: &[TechniqueKind],
    reps: usize,
    seed: u64,
    settings: &Settings,
    rate_hz: f64,
) -> Result<Comparison, TrialError> {
    if reps == 0 {
        return Err(TrialError::Config(crate::config::ConfigError::Invalid("reps must be at least 1".into())));
    }
    let jobs: Vec<(u64, TechniqueKind)> = (0..reps as u64)
        .flat_map(|i| techniques.iter().map(move |t| (seed + i, *t)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(s, technique)| {
            let sc = task.build(s, settings.drive.track_w)?;
            let result = run_trial(&sc, technique, settings, rate_hz, s)?;
            Ok(TrialRecord { scenario: task, technique, result })
        })
        .collect::<Result<Vec<_>, TrialError>>()?;

    let rows = techniques
        .iter()
        .map(|&technique| {
            let mine: Vec<&TrialResult> = trials.iter().filter(|r| r.technique == technique).map(|r| &r.result).collect();
            let stat = |f: fn(&TrialResult) -> f64| Stat::of(&mine.iter().map(|r| f(r)).collect::<Vec<_>>());
            ComparisonRow {
                scenario: task,
                technique,
                trials: mine.len(),
                completed: mine.iter().filter(|r| r.completed).count(),
                completion_s: stat(|r| r.completion_s),
                path_len_m: stat(|r| r.path_len_m),
                mean_xte_m: stat(|r| r.mean_xte_m),
                max_xte_m: stat(|r| r.max_xte_m),
            }
        })
        .collect();
    Ok(Comparison { trials, rows })
}
