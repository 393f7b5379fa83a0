use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, FocalKind, OpponentKind, Resolved};
use crate::audit;
use crate::bandit::{LearnerState, SimplexPoint};
use crate::bilevel::{
    outer_alg, run_expix, BilevelState, BlockSchedule, Environment, Opponent, RunHistory,
    RunStreams,
};
use crate::error::{Error, Result};
use crate::games::{average_payoff, Profile};

/// Label for runs whose final window is not dominated by a labeled profile.
pub const NONE_LABEL: &str = "None";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(master_seed + run_id * 0x9E3779B97F4A7C15)`.
pub fn derive_seed(master_seed: u64, run_id: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(run_id.wrapping_mul(GOLDEN)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub outcome: String,
    pub mean_obj_reward: f64,
    pub final_outer: Vec<f64>,
    /// Per-round `<ψ_obj, u_t>` and `<φ_obj, u_t>`.
    #[serde(skip)]
    pub series: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub label: String,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeHistogram {
    pub runs: usize,
    pub entries: Vec<HistogramEntry>,
}

impl OutcomeHistogram {
    /// Counts `outcomes` over `labels` (in that order).
    pub fn from_outcomes<'a>(
        labels: &[String],
        outcomes: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut counts: Vec<usize> = vec![0; labels.len()];
        let mut runs = 0;
        for o in outcomes {
            let i = labels
                .iter()
                .position(|l| l == o)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown outcome label `{o}`")))?;
            counts[i] += 1;
            runs += 1;
        }
        let entries = labels
            .iter()
            .zip(counts)
            .map(|(label, count)| HistogramEntry {
                label: label.clone(),
                count,
                fraction: if runs == 0 {
                    0.0
                } else {
                    count as f64 / runs as f64
                },
            })
            .collect();
        Ok(Self { runs, entries })
    }

    pub fn fraction(&self, label: &str) -> f64 {
        self.entries
            .iter()
            .find(|e| e.label == label)
            .map_or(0.0, |e| e.fraction)
    }

    pub fn count(&self, label: &str) -> usize {
        self.entries
            .iter()
            .find(|e| e.label == label)
            .map_or(0, |e| e.count)
    }
}

/// Labels the run by the strict-plurality joint profile of its last
/// `window` rounds, if that profile is in `labels`; otherwise [`NONE_LABEL`].
pub fn classify_outcome(
    history: &RunHistory,
    window: usize,
    labels: &BTreeMap<Profile, String>,
) -> Result<String> {
    let t = history.rounds.len();
    if window == 0 || window > t {
        return Err(Error::InvalidArgument(format!(
            "window {window} not in 1..={t}"
        )));
    }
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in &history.rounds[t - window..] {
        *counts
            .entry((r.focal_action, r.opponent_action))
            .or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let mut leaders = counts.iter().filter(|(_, &c)| c == top);
    let (&(a, b), _) = leaders.next().expect("window is nonempty");
    if leaders.next().is_some() {
        return Ok(NONE_LABEL.to_string());
    }
    Ok(labels
        .get(&vec![a, b])
        .cloned()
        .unwrap_or_else(|| NONE_LABEL.to_string()))
}

/// Trailing mean over `[max(0, t - window + 1), t]`; keeps the length.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument(
            "moving-average window must be >= 1".into(),
        ));
    }
    let mut out = Vec::with_capacity(series.len());
    let mut sum = 0.0;
    for t in 0..series.len() {
        sum += series[t];
        if t >= window {
            sum -= series[t - window];
        }
        // resum periodically so rounding drift cannot build up
        if t % window == window - 1 {
            sum = series[t + 1 - window..=t].iter().sum();
        }
        let n = (t + 1).min(window);
        out.push(sum / n as f64);
    }
    Ok(out)
}

/// Labels of the pure equilibria of the objective-scalarized game, mapped
/// from their profiles.
pub fn equilibrium_labels(resolved: &Resolved) -> Result<BTreeMap<Profile, String>> {
    let scalar = resolved
        .game
        .scalarize(&[resolved.objective.clone(), resolved.opponent.clone()])?;
    Ok(scalar
        .pure_nash()?
        .into_iter()
        .map(|p| {
            let label = resolved.game.profile_label(&p);
            (p, label)
        })
        .collect())
}

/// Outcome labels in reporting order: equilibria by profile, then `None`.
pub fn label_order(labels: &BTreeMap<Profile, String>) -> Vec<String> {
    let mut out: Vec<String> = labels.values().cloned().collect();
    out.push(NONE_LABEL.to_string());
    out
}

/// Simulates one run and returns its full history.
pub fn simulate_run(
    config: &ExperimentConfig,
    resolved: &Resolved,
    run_id: usize,
) -> Result<RunHistory> {
    let seed = derive_seed(config.seed, run_id as u64);
    let mut streams = RunStreams::from_seed(seed);
    let n_opp = resolved.game.action_counts()[1];
    let n_focal = resolved.game.action_counts()[0];
    let opponent = match config.opponent_kind() {
        OpponentKind::Expix => {
            let init = match &resolved.opponent_init {
                Some(p) => p.clone(),
                None => SimplexPoint::uniform(n_opp)?,
            };
            Opponent::ExpIx {
                learner: LearnerState::new(
                    init,
                    config.baseline_eta(n_opp),
                    config.baseline.gamma,
                )?,
                weight: resolved.opponent.clone(),
            }
        }
        OpponentKind::Fixed => Opponent::Fixed(
            resolved
                .opponent_policy
                .clone()
                .ok_or_else(|| Error::config("opponent.policy", "missing"))?,
        ),
    };
    let mut env = Environment::new(resolved.game.clone(), opponent, streams.opponent.clone())?;
    match config.focal_kind() {
        FocalKind::Expix => {
            let learner = LearnerState::new(
                SimplexPoint::uniform(n_focal)?,
                config.baseline_eta(n_focal),
                config.baseline.gamma,
            )?;
            run_expix(
                learner,
                &resolved.objective,
                config.rounds,
                &mut env,
                &mut streams.focal,
            )
        }
        FocalKind::Bilevel => {
            let mut state = BilevelState::new(
                resolved.candidates.clone(),
                resolved.objective.clone(),
                n_focal,
                config.bilevel,
            )?;
            let schedule = BlockSchedule::new(config.rounds, config.block_len)?;
            outer_alg(&mut state, &schedule, &mut env, &mut streams)
        }
    }
}

/// Builds the record for a finished run.
pub fn record_run(
    config: &ExperimentConfig,
    resolved: &Resolved,
    labels: &BTreeMap<Profile, String>,
    run_id: usize,
    history: &RunHistory,
    keep_series: bool,
) -> Result<RunRecord> {
    let payoffs: Vec<&[f64]> = history.rounds.iter().map(|r| r.payoff.as_slice()).collect();
    let mean = average_payoff(&payoffs)?;
    let series = keep_series.then(|| {
        (
            history.scalarized_series(resolved.objective.coords()),
            history.scalarized_series(resolved.opponent.coords()),
        )
    });
    Ok(RunRecord {
        run_id,
        seed: derive_seed(config.seed, run_id as u64),
        outcome: classify_outcome(history, config.window, labels)?,
        mean_obj_reward: resolved.objective.scalarize(&mean)?,
        final_outer: history.final_outer.clone(),
        series,
    })
}

/// Running per-round mean and spread of smoothed reward curves for one
/// outcome class (Welford, population standard deviation).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub count: usize,
    mean_focal: Vec<f64>,
    m2_focal: Vec<f64>,
    mean_opp: Vec<f64>,
    m2_opp: Vec<f64>,
}

impl TrajectoryStats {
    fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean_focal: vec![0.0; len],
            m2_focal: vec![0.0; len],
            mean_opp: vec![0.0; len],
            m2_opp: vec![0.0; len],
        }
    }

    fn push(&mut self, focal: &[f64], opp: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        let upd = |mean: &mut [f64], m2: &mut [f64], xs: &[f64]| {
            for ((m, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(xs) {
                let d = x - *m;
                *m += d / n;
                *s += d * (x - *m);
            }
        };
        upd(&mut self.mean_focal, &mut self.m2_focal, focal);
        upd(&mut self.mean_opp, &mut self.m2_opp, opp);
    }

    pub fn len(&self) -> usize {
        self.mean_focal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_focal.is_empty()
    }

    pub fn mean_focal(&self) -> &[f64] {
        &self.mean_focal
    }

    pub fn mean_opponent(&self) -> &[f64] {
        &self.mean_opp
    }

    pub fn sd_focal(&self) -> Vec<f64> {
        self.sd(&self.m2_focal)
    }

    pub fn sd_opponent(&self) -> Vec<f64> {
        self.sd(&self.m2_opp)
    }

    fn sd(&self, m2: &[f64]) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        m2.iter().map(|s| (s / n).max(0.0).sqrt()).collect()
    }
}

/// Audit totals over every run of a scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub audited_runs: usize,
    pub runs_with_violations: Vec<usize>,
    pub max_inner_ratio: f64,
    pub max_outer_ratio: f64,
    pub max_bilevel_ratio: f64,
}

impl AuditSummary {
    fn absorb(&mut self, run_id: usize, report: &audit::RegretReport) {
        let ratio = |c: &audit::Checked| {
            if c.bound > 0.0 {
                c.value / c.bound
            } else {
                0.0
            }
        };
        self.audited_runs += 1;
        if !report.passed() {
            self.runs_with_violations.push(run_id);
        }
        for c in &report.inner {
            self.max_inner_ratio = self.max_inner_ratio.max(ratio(c));
        }
        for c in &report.outer_by_vertex {
            self.max_outer_ratio = self.max_outer_ratio.max(ratio(c));
        }
        self.max_bilevel_ratio = self.max_bilevel_ratio.max(ratio(&report.bilevel));
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub records: Vec<RunRecord>,
    pub histogram: OutcomeHistogram,
    pub trajectories: BTreeMap<String, TrajectoryStats>,
    pub audit: Option<AuditSummary>,
    /// Histories of the first `save_histories` runs.
    pub histories: Vec<(usize, RunHistory)>,
}

struct RunOutput {
    record: RunRecord,
    report: Option<audit::RegretReport>,
    history: Option<RunHistory>,
}

const CHUNK: usize = 64;

/// Runs every simulation of `config`. Runs are independent and may execute
/// in parallel; results are merged in `run_id` order so output does not
/// depend on the worker count.
pub fn run_scenario(config: &ExperimentConfig) -> Result<ScenarioOutput> {
    config.validate()?;
    let resolved = config.resolve()?;
    let labels = equilibrium_labels(&resolved)?;
    let order = label_order(&labels);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let one = |run_id: usize| -> Result<RunOutput> {
        let history = simulate_run(config, &resolved, run_id)?;
        let record = record_run(config, &resolved, &labels, run_id, &history, true)?;
        let report = if config.audit {
            Some(audit::audit(&history)?)
        } else {
            None
        };
        let history = (run_id < config.save_histories).then_some(history);
        Ok(RunOutput {
            record,
            report,
            history,
        })
    };

    let mut records = Vec::with_capacity(config.runs);
    let mut trajectories: BTreeMap<String, TrajectoryStats> = BTreeMap::new();
    let mut audit_summary = config.audit.then(AuditSummary::default);
    let mut histories = Vec::new();
    let mut start = 0;
    while start < config.runs {
        let end = (start + CHUNK).min(config.runs);
        let chunk: Vec<Result<RunOutput>> = pool.install(|| {
            use rayon::prelude::*;
            (start..end).into_par_iter().map(one).collect()
        });
        for out in chunk {
            let mut out = out?;
            if let Some((focal, opp)) = out.record.series.take() {
                let f = moving_average(&focal, config.smoothing)?;
                let o = moving_average(&opp, config.smoothing)?;
                trajectories
                    .entry(out.record.outcome.clone())
                    .or_insert_with(|| TrajectoryStats::new(config.rounds))
                    .push(&f, &o);
            }
            if let (Some(s), Some(r)) = (audit_summary.as_mut(), out.report.as_ref()) {
                s.absorb(out.record.run_id, r);
            }
            if let Some(h) = out.history.take() {
                histories.push((out.record.run_id, h));
            }
            records.push(out.record);
        }
        start = end;
    }

    let histogram =
        OutcomeHistogram::from_outcomes(&order, records.iter().map(|r| r.outcome.as_str()))?;
    Ok(ScenarioOutput {
        records,
        histogram,
        trajectories,
        audit: audit_summary,
        histories,
    })
}
