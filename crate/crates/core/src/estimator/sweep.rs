use serde::{Deserialize, Serialize};

use super::{estimate, AuditOutcome, EpsLowerBound, Method};
use crate::error::{config_err, Result};
use crate::game::{guess_binary, guess_kary, tally_binary, tally_kary, ScoreMatrix};

/// Total guess budgets to try.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetGrid {
    budgets: Vec<usize>,
}

impl BudgetGrid {
    /// `step, 2 step, ...` up to and including `max`.
    pub fn multiples(step: usize, max: usize) -> Result<Self> {
        if step == 0 {
            return config_err("budget step must be >= 1");
        }
        Self::explicit((1..=max / step).map(|i| i * step).collect())
    }

    pub fn explicit(budgets: Vec<usize>) -> Result<Self> {
        if budgets.is_empty() {
            return config_err("guess budget grid is empty");
        }
        Ok(Self { budgets })
    }

    pub fn budgets(&self) -> &[usize] {
        &self.budgets
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub budget: usize,
    pub guesses: u64,
    pub correct: u64,
    pub eps: f64,
}

/// Bound at every budget plus the maximizing one (first budget on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub best: EpsLowerBound,
    pub best_budget: usize,
    pub curve: Vec<SweepPoint>,
}

fn run_sweep(
    grid: &BudgetGrid,
    method: Method,
    alpha: f64,
    mut tally_at: impl FnMut(usize) -> Result<AuditOutcome>,
) -> Result<Sweep> {
    let mut curve = Vec::with_capacity(grid.budgets().len());
    let mut best: Option<(usize, EpsLowerBound)> = None;
    for &budget in grid.budgets() {
        let outcome = tally_at(budget)?.set_alpha(alpha)?;
        let bound = estimate(outcome, method)?;
        curve.push(SweepPoint {
            budget,
            guesses: outcome.guesses,
            correct: outcome.correct,
            eps: bound.eps,
        });
        if best.as_ref().is_none_or(|(_, b)| bound.eps > b.eps) {
            best = Some((budget, bound));
        }
    }
    let (best_budget, best) = best.expect("grid is nonempty");
    Ok(Sweep { best, best_budget, curve })
}

/// Binary game: each budget is split evenly into "in" and "out" guesses
/// (odd budgets lose one guess).
pub fn sweep_binary(selection: &[i8], scores: &[f64], grid: &BudgetGrid, alpha: f64) -> Result<Sweep> {
    if selection.len() != scores.len() {
        return config_err("selection and scores differ in length");
    }
    run_sweep(grid, Method::Or, alpha, |budget| {
        let half = budget / 2;
        let guesses = guess_binary(scores, half, half)?;
        tally_binary(selection, &guesses)
    })
}

/// K-ary game: each budget is the number of sets guessed.
pub fn sweep_kary(chosen: &[usize], scores: &ScoreMatrix, grid: &BudgetGrid, alpha: f64) -> Result<Sweep> {
    if chosen.len() != scores.rows() {
        return config_err("selection and score rows differ in length");
    }
    run_sweep(grid, Method::OrFdp, alpha, |budget| {
        let guesses = guess_kary(scores, budget)?;
        tally_kary(chosen, &guesses, scores.cols())
    })
}
