//! Successive halving over a fixed list of settings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::space::ParamSetting;
use super::{HpoError, Stage, Trial};
use crate::seed;

/// Result of one budgeted evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub fold_losses: Vec<f64>,
}

impl Evaluation {
    pub fn single(loss: f64) -> Self {
        Evaluation {
            loss,
            fold_losses: vec![loss],
        }
    }
}

/// Maps `(setting, budget, seed)` to a loss. Failures eliminate the setting.
pub trait BudgetedEvaluator: Sync {
    fn evaluate(&self, setting: &ParamSetting, budget: f64, seed: u64) -> Result<Evaluation, String>;
}

impl<F> BudgetedEvaluator for F
where
    F: Fn(&ParamSetting, f64, u64) -> Result<Evaluation, String> + Sync,
{
    fn evaluate(&self, setting: &ParamSetting, budget: f64, seed: u64) -> Result<Evaluation, String> {
        self(setting, budget, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingOutcome {
    pub best: ParamSetting,
    /// Position of `best` in the input list.
    pub best_index: usize,
    pub best_loss: f64,
    /// Number of settings evaluated in each round.
    pub round_sizes: Vec<usize>,
    pub trace: Vec<Trial>,
}

/// Evaluates every survivor at the current budget, keeps the better half
/// (rounded up), doubles the budget and repeats until a single setting is
/// left or the survivors have all been evaluated at the full budget.
///
/// Settings are evaluated with seeds derived from `(seed, setting index,
/// round)`, so the outcome does not depend on how rounds are scheduled.
pub fn successive_halving<E: BudgetedEvaluator + ?Sized>(
    settings: &[ParamSetting],
    evaluator: &E,
    initial_budget: f64,
    seed: u64,
) -> Result<HalvingOutcome, HpoError> {
    if settings.is_empty() {
        return Err(HpoError::Config("successive halving needs at least one setting".into()));
    }
    if !(initial_budget > 0.0 && initial_budget <= 1.0) {
        return Err(HpoError::Config(format!(
            "initial budget {initial_budget} outside (0, 1]"
        )));
    }

    let mut survivors: Vec<usize> = (0..settings.len()).collect();
    let mut budget = initial_budget;
    let mut trace = Vec::new();
    let mut round_sizes = Vec::new();
    let mut round = 0usize;

    loop {
        round_sizes.push(survivors.len());
        let results: Vec<Result<Evaluation, String>> = survivors
            .par_iter()
            .map(|&i| {
                let s = seed::derive(seed, &[i as u64, round as u64]);
                evaluator
                    .evaluate(&settings[i], budget, s)
                    .and_then(|e| {
                        if e.loss.is_finite() {
                            Ok(e)
                        } else {
                            Err(format!("non-finite loss {}", e.loss))
                        }
                    })
            })
            .collect();

        let mut ranked: Vec<(usize, f64)> = Vec::with_capacity(survivors.len());
        for (&i, res) in survivors.iter().zip(results) {
            let (loss, fold_losses, error) = match res {
                Ok(e) => {
                    ranked.push((i, e.loss));
                    (Some(e.loss), e.fold_losses, None)
                }
                Err(msg) => (None, Vec::new(), Some(msg)),
            };
            trace.push(Trial {
                setting: settings[i].clone(),
                loss,
                budget,
                fold_losses,
                round,
                stage: Stage::Halving,
                error,
            });
        }
        if ranked.is_empty() {
            return Err(HpoError::AllFailed { round });
        }
        // Stable: ties keep insertion order.
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));

        if ranked.len() == 1 || budget >= 1.0 {
            let (best_index, best_loss) = ranked[0];
            return Ok(HalvingOutcome {
                best: settings[best_index].clone(),
                best_index,
                best_loss,
                round_sizes,
                trace,
            });
        }
        let keep = ranked.len().div_ceil(2);
        survivors = ranked[..keep].iter().map(|&(i, _)| i).collect();
        survivors.sort_unstable();
        budget = (budget * 2.0).min(1.0);
        round += 1;
    }
}
