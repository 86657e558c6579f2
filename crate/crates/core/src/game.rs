//! The two one-run guessing games.
//!
//! *Binary membership*: half of the `m` canaries are included (`S_i = +1`),
//! the rest held out (`S_i = -1`); the auditor makes `k_plus` "in" and
//! `k_minus` "out" guesses. *K-ary reconstruction*: canaries form `M = m / K`
//! sets of size `K`, one uniformly chosen member of each set is included, and
//! the auditor guesses which one or abstains.
//!
//! Scores are oriented so that a larger value means "more likely included".
//! Ties in every ranking are broken toward the lower canary index.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, AuditError, Result};
use crate::estimator::AuditOutcome;

/// Canary `i` is included when `selection[i] == 1`, excluded when `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryGameState {
    pub selection: Vec<i8>,
    pub m: usize,
    pub r: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KaryGameState {
    pub arity: usize,
    /// `sets[i][j]` is the canary id at position `j` of set `i`.
    pub sets: Vec<Vec<usize>>,
    /// Included position of each set, in `0..arity`.
    pub chosen: Vec<usize>,
}

impl KaryGameState {
    pub fn num_sets(&self) -> usize {
        self.sets.len()
    }

    /// Per-canary membership (`+1` for the chosen member of its set), indexed
    /// by position in the flattened set matrix.
    pub fn membership(&self) -> Vec<i8> {
        self.chosen
            .iter()
            .flat_map(|&u| (0..self.arity).map(move |j| if j == u { 1 } else { -1 }))
            .collect()
    }

    /// Canary ids that are included, in set order.
    pub fn included(&self) -> Vec<usize> {
        self.sets.iter().zip(&self.chosen).map(|(set, &u)| set[u]).collect()
    }
}

/// Dense `rows x cols` score matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return config_err(format!(
                "score matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(AuditError::Input("scores must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Assign `+1` to a uniformly random half of `canaries`; every non-canary is
/// included. Returns the state and the included example ids
/// (non-canaries first, then included canaries in index order).
pub fn partition_binary<R: Rng + ?Sized>(
    canaries: &[usize],
    non_canaries: &[usize],
    rng: &mut R,
) -> Result<(BinaryGameState, Vec<usize>)> {
    let m = canaries.len();
    if !m.is_multiple_of(2) {
        return config_err(format!("binary game needs an even number of canaries, got {m}"));
    }
    let mut selection = vec![-1i8; m];
    for i in index::sample(rng, m, m / 2) {
        selection[i] = 1;
    }
    let mut included = non_canaries.to_vec();
    included.extend(canaries.iter().zip(&selection).filter(|(_, &s)| s == 1).map(|(&c, _)| c));
    let r = non_canaries.len();
    let state = BinaryGameState { selection, m, r, n: r + m / 2 };
    Ok((state, included))
}

/// `M` i.i.d. uniform draws from `0..arity`.
pub fn select_kary<R: Rng + ?Sized>(num_sets: usize, arity: usize, rng: &mut R) -> Result<Vec<usize>> {
    if num_sets == 0 || arity == 0 {
        return config_err("K-ary selection needs at least one set of at least one canary");
    }
    Ok((0..num_sets).map(|_| rng.gen_range(0..arity)).collect())
}

/// Group `canaries` into consecutive sets of `arity`, pick one member of each
/// uniformly, and include it alongside every non-canary.
pub fn partition_kary<R: Rng + ?Sized>(
    canaries: &[usize],
    non_canaries: &[usize],
    arity: usize,
    rng: &mut R,
) -> Result<(KaryGameState, Vec<usize>)> {
    if arity == 0 || !canaries.len().is_multiple_of(arity) {
        return config_err(format!(
            "{} canaries cannot be split into sets of {arity}",
            canaries.len()
        ));
    }
    let sets: Vec<Vec<usize>> = canaries.chunks(arity).map(<[usize]>::to_vec).collect();
    let chosen = select_kary(sets.len(), arity, rng)?;
    let state = KaryGameState { arity, sets, chosen };
    let mut included = non_canaries.to_vec();
    included.extend(state.included());
    Ok((state, included))
}

/// Indices sorted by descending score, lower index first among equals.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Maximize `sum T_i Y_i` subject to `sum |T_i| = k_plus + k_minus` and
/// `sum T_i = k_plus - k_minus`: `+1` on the `k_plus` highest scores, `-1` on
/// the `k_minus` lowest of the rest.
pub fn guess_binary(scores: &[f64], k_plus: usize, k_minus: usize) -> Result<Vec<i8>> {
    let m = scores.len();
    if k_plus + k_minus > m {
        return config_err(format!("guess budget {k_plus} + {k_minus} exceeds {m} canaries"));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(AuditError::Input("scores must be finite".into()));
    }
    let mut guesses = vec![0i8; m];
    for &i in descending_order(scores).iter().take(k_plus) {
        guesses[i] = 1;
    }
    let mut ascending: Vec<usize> = (0..m).filter(|&i| guesses[i] == 0).collect();
    ascending.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    for &i in ascending.iter().take(k_minus) {
        guesses[i] = -1;
    }
    Ok(guesses)
}

/// Argmax of each row, keeping only the `k` rows with the largest gap between
/// their best and second-best score. `None` is an abstention.
pub fn guess_kary(scores: &ScoreMatrix, k: usize) -> Result<Vec<Option<usize>>> {
    let num_sets = scores.rows();
    if k > num_sets {
        return config_err(format!("guess budget {k} exceeds {num_sets} canary sets"));
    }
    let mut best = Vec::with_capacity(num_sets);
    let mut margins = Vec::with_capacity(num_sets);
    for i in 0..num_sets {
        let row = scores.row(i);
        let order = descending_order(row);
        best.push(order[0]);
        margins.push(match order.get(1) {
            Some(&second) => row[order[0]] - row[second],
            None => 0.0,
        });
    }
    let mut guesses = vec![None; num_sets];
    for &i in descending_order(&margins).iter().take(k) {
        guesses[i] = Some(best[i]);
    }
    Ok(guesses)
}

pub fn tally_binary(selection: &[i8], guesses: &[i8]) -> Result<AuditOutcome> {
    if selection.len() != guesses.len() {
        return config_err("selection and guesses differ in length");
    }
    let made = guesses.iter().filter(|&&t| t != 0).count() as u64;
    let correct = guesses
        .iter()
        .zip(selection)
        .filter(|&(&t, &s)| t != 0 && t == s)
        .count() as u64;
    AuditOutcome::new(made, correct, 2)
}

pub fn tally_kary(chosen: &[usize], guesses: &[Option<usize>], arity: usize) -> Result<AuditOutcome> {
    if chosen.len() != guesses.len() {
        return config_err("selection and guesses differ in length");
    }
    let made = guesses.iter().filter(|g| g.is_some()).count() as u64;
    let correct = guesses
        .iter()
        .zip(chosen)
        .filter(|&(g, &u)| *g == Some(u))
        .count() as u64;
    AuditOutcome::new(made, correct, arity as u64)
}
