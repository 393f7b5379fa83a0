//! Offline regret audit over a [`RunHistory`].
//!
//! All regret values here are measured on the logged IX loss estimates, not
//! on realized rewards; the finite-time bounds hold pathwise for those
//! quantities, so every check is deterministic. Block indices are 0-based.

use serde::{Deserialize, Serialize};

use crate::bandit::{ix_estimate, omd_entropy_step, SimplexPoint};
use crate::bilevel::RunHistory;
use crate::cones::dot;
use crate::error::{check_dim, Error, Result};

/// Slack allowed on every bound comparison.
pub const BOUND_TOLERANCE: f64 = 1e-9;

/// A regret value next to its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checked {
    pub value: f64,
    pub bound: f64,
}

impl Checked {
    pub fn holds(&self) -> bool {
        self.value <= self.bound + BOUND_TOLERANCE
    }
}

/// Best vertex of the simplex for the linear loss `<q, Σ_t g_t>`; ties go to
/// the lowest index.
pub fn inner_hindsight<V: AsRef<[f64]>>(estimates: &[V]) -> Result<SimplexPoint> {
    let totals = summed(estimates)?;
    SimplexPoint::point_mass(totals.len(), argmin(&totals))
}

fn summed<V: AsRef<[f64]>>(rows: &[V]) -> Result<Vec<f64>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidArgument("no estimates".into()))?;
    let mut total = vec![0.0; first.as_ref().len()];
    for g in rows {
        let g = g.as_ref();
        check_dim(total.len(), g.len())?;
        total.iter_mut().zip(g).for_each(|(s, x)| *s += x);
    }
    Ok(total)
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

fn block_rounds(history: &RunHistory, k: usize) -> Result<&[crate::bilevel::RoundLog]> {
    let sched = history.schedule()?;
    let range = sched.block_indices(k + 1)?;
    let (s0, s1) = (*range.start(), *range.end());
    let rounds = history
        .rounds
        .get(s0 - 1..s1)
        .ok_or_else(|| Error::MissingLog(format!("rounds {s0}..={s1} of block {k}")))?;
    if let Some(r) = rounds.iter().find(|r| r.block != k) {
        return Err(Error::MissingLog(format!(
            "round tagged with block {} inside block {k}",
            r.block
        )));
    }
    Ok(rounds)
}

fn inner_bound(history: &RunHistory, block_rounds: usize) -> f64 {
    let d = history.payoff_dim() as f64;
    let a = history.action_count as f64;
    d.sqrt() * history.payoff_bound / history.params.gamma_q
        * (2.0 * block_rounds as f64 * a.ln()).sqrt()
}

fn outer_bound(history: &RunHistory) -> f64 {
    let d = history.payoff_dim() as f64;
    let m = history.candidates.len() as f64;
    let h = history.blocks.len() as f64;
    d.sqrt() * history.payoff_bound / history.params.gamma_p * (2.0 * h * m.ln()).sqrt()
}

/// Inner regret of block `k` against its hindsight vertex, with the
/// `(√d U / γ_q) √(2 T_k ln|A|)` bound.
pub fn inner_block_regret(history: &RunHistory, k: usize) -> Result<Checked> {
    let rounds = block_rounds(history, k)?;
    let estimates: Vec<&[f64]> = rounds.iter().map(|r| r.estimate.as_slice()).collect();
    let best = inner_hindsight(&estimates)?;
    let mut value = 0.0;
    for r in rounds {
        check_dim(best.len(), r.focal_dist.len())?;
        value += dot(&r.focal_dist, &r.estimate) - dot(best.probs(), &r.estimate);
    }
    Ok(Checked {
        value,
        bound: inner_bound(history, rounds.len()),
    })
}

/// Outer regret against a fixed comparator distribution over candidates,
/// with the `(√d U / γ_p) √(2 h ln m)` bound.
pub fn outer_regret(history: &RunHistory, comparator: &SimplexPoint) -> Result<Checked> {
    let m = history.candidates.len();
    check_dim(m, comparator.len())?;
    if history.blocks.is_empty() {
        return Err(Error::MissingLog("no block log".into()));
    }
    let mut value = 0.0;
    for b in &history.blocks {
        check_dim(m, b.outer_dist.len())?;
        check_dim(m, b.estimate.len())?;
        value += dot(&b.outer_dist, &b.estimate) - dot(comparator.probs(), &b.estimate);
    }
    Ok(Checked {
        value,
        bound: outer_bound(history),
    })
}

/// Outer comparator minimizing the summed block estimates.
pub fn outer_hindsight(history: &RunHistory) -> Result<SimplexPoint> {
    let rows: Vec<&[f64]> = history
        .blocks
        .iter()
        .map(|b| b.estimate.as_slice())
        .collect();
    inner_hindsight(&rows)
}

/// Outer regret at the hindsight vertex plus the sum of inner block regrets.
pub fn bilevel_regret(history: &RunHistory) -> Result<Checked> {
    let best = outer_hindsight(history)?;
    let outer = outer_regret(history, &best)?;
    let mut value = outer.value;
    for k in 0..history.blocks.len() {
        value += inner_block_regret(history, k)?.value;
    }
    let d = history.payoff_dim() as f64;
    let h = history.blocks.len() as f64;
    let m = history.candidates.len() as f64;
    let a = history.action_count as f64;
    let t = history.horizon as f64;
    let p = history.params;
    let bound = d.sqrt()
        * history.payoff_bound
        * ((2.0 * h * m.ln()).sqrt() / p.gamma_p + (2.0 * h * t * a.ln()).sqrt() / p.gamma_q);
    Ok(Checked { value, bound })
}

/// Replays every logged estimate from the logged inputs and compares
/// bit-for-bit; also checks each block reward against its rounds.
pub fn verify_log_integrity(history: &RunHistory) -> Result<()> {
    let p = history.params;
    if history.rounds.len() != history.horizon {
        return Err(Error::MissingLog(format!(
            "{} rounds logged for horizon {}",
            history.rounds.len(),
            history.horizon
        )));
    }
    for (t, r) in history.rounds.iter().enumerate() {
        let psi = history
            .candidates
            .get(r.deployed)
            .ok_or_else(|| Error::MissingLog(format!("round {t}: unknown candidate")))?;
        let reward = dot(psi, &r.payoff);
        let dist = SimplexPoint::new(r.focal_dist.clone())?;
        let g = ix_estimate(&dist, r.focal_action, reward, p.gamma_q)?;
        if g != r.estimate {
            return Err(Error::MissingLog(format!(
                "round {t}: estimate does not replay"
            )));
        }
    }
    for (k, b) in history.blocks.iter().enumerate() {
        let rounds = block_rounds(history, k)?;
        if rounds.iter().any(|r| r.deployed != b.deployed) {
            return Err(Error::MissingLog(format!(
                "block {k}: deployed index varies"
            )));
        }
        let mean = rounds
            .iter()
            .map(|r| dot(&history.objective, &r.payoff))
            .sum::<f64>()
            / rounds.len() as f64;
        if (mean - b.objective_reward).abs() > 1e-12 {
            return Err(Error::MissingLog(format!(
                "block {k}: objective reward mismatch"
            )));
        }
        let dist = SimplexPoint::new(b.outer_dist.clone())?;
        let g = ix_estimate(&dist, b.deployed, b.objective_reward, p.gamma_p)?;
        if g != b.estimate {
            return Err(Error::MissingLog(format!(
                "block {k}: outer estimate does not replay"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConstants {
    pub payoff_dim: usize,
    pub payoff_bound: f64,
    pub gamma_p: f64,
    pub gamma_q: f64,
    pub action_count: usize,
    pub candidate_count: usize,
    pub block_count: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub constants: AuditConstants,
    pub inner: Vec<Checked>,
    /// Outer regret against each vertex comparator.
    pub outer_by_vertex: Vec<Checked>,
    pub outer_best_vertex: usize,
    pub bilevel: Checked,
    /// Realized objective reward of the best fixed focal action against the
    /// logged opponent actions, minus the realized reward. Diagnostic only;
    /// no bound applies to it.
    pub realized_objective_regret: f64,
    pub log_integrity: bool,
    /// Why the replay failed, when it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_integrity_error: Option<String>,
    pub violations: usize,
}

impl RegretReport {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.log_integrity
    }
}

/// Runs every check on one history.
pub fn audit(history: &RunHistory) -> Result<RegretReport> {
    let inner = (0..history.blocks.len())
        .map(|k| inner_block_regret(history, k))
        .collect::<Result<Vec<_>>>()?;
    let m = history.candidates.len();
    let outer_by_vertex = (0..m)
        .map(|j| outer_regret(history, &SimplexPoint::point_mass(m, j)?))
        .collect::<Result<Vec<_>>>()?;
    let outer_best_vertex = argmin(&summed(
        &history
            .blocks
            .iter()
            .map(|b| b.estimate.as_slice())
            .collect::<Vec<_>>(),
    )?);
    let bilevel = bilevel_regret(history)?;
    let violations = inner
        .iter()
        .chain(&outer_by_vertex)
        .chain(std::iter::once(&bilevel))
        .filter(|c| !c.holds())
        .count();
    let integrity = verify_log_integrity(history);
    Ok(RegretReport {
        constants: AuditConstants {
            payoff_dim: history.payoff_dim(),
            payoff_bound: history.payoff_bound,
            gamma_p: history.params.gamma_p,
            gamma_q: history.params.gamma_q,
            action_count: history.action_count,
            candidate_count: m,
            block_count: history.blocks.len(),
            horizon: history.horizon,
        },
        inner,
        outer_by_vertex,
        outer_best_vertex,
        bilevel,
        realized_objective_regret: realized_objective_regret(history),
        log_integrity: integrity.is_ok(),
        log_integrity_error: integrity.err().map(|e| e.to_string()),
        violations,
    })
}

fn realized_objective_regret(history: &RunHistory) -> f64 {
    let earned: f64 = history
        .rounds
        .iter()
        .map(|r| dot(&history.objective, &r.payoff))
        .sum();
    let best = history
        .focal_payoffs
        .iter()
        .map(|row| {
            history
                .rounds
                .iter()
                .map(|r| dot(&history.objective, &row[r.opponent_action]))
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    best - earned
}

/// Full-information entropy mirror descent from uniform against a fixed
/// loss sequence, checked against `ln(n)/η + η T L̄² / 2` for every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub regret_by_vertex: Vec<f64>,
    pub bound: f64,
    pub violations: usize,
}

impl LemmaReport {
    pub fn max_regret(&self) -> f64 {
        self.regret_by_vertex
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn verify_omd_lemma<V: AsRef<[f64]>>(
    losses: &[V],
    eta: f64,
    loss_bound: f64,
) -> Result<LemmaReport> {
    let n = losses
        .first()
        .map(|l| l.as_ref().len())
        .ok_or_else(|| Error::InvalidArgument("empty loss sequence".into()))?;
    let mut q = SimplexPoint::uniform(n)?;
    let mut played = 0.0;
    let mut totals = vec![0.0; n];
    for l in losses {
        let l = l.as_ref();
        check_dim(n, l.len())?;
        if l.iter().any(|x| x.abs() > loss_bound) {
            return Err(Error::InvalidArgument("loss exceeds stated bound".into()));
        }
        played += dot(q.probs(), l);
        totals.iter_mut().zip(l).for_each(|(s, x)| *s += x);
        q = omd_entropy_step(&q, l, eta)?;
    }
    let t = losses.len() as f64;
    let bound = (n as f64).ln() / eta + eta * t * loss_bound * loss_bound / 2.0;
    let regret_by_vertex: Vec<f64> = totals.iter().map(|s| played - s).collect();
    let violations = regret_by_vertex
        .iter()
        .filter(|&&r| r > bound + BOUND_TOLERANCE)
        .count();
    Ok(LemmaReport {
        regret_by_vertex,
        bound,
        violations,
    })
}

/// Step size `η = (R / L̄) √(2 / T)` with `R² = ln n`.
pub fn lemma_step_size(n: usize, horizon: usize, loss_bound: f64) -> f64 {
    ((n as f64).ln()).sqrt() / loss_bound * (2.0 / horizon as f64).sqrt()
}
