//! The block protocol: an outer learner picks a deployed weight once per
//! block, and an inner bandit learner (one policy row per candidate weight)
//! picks actions within the block from the scalar feedback that weight
//! induces. Everything the regret audit needs is logged in [`RunHistory`].

use std::ops::RangeInclusive;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bandit::{ix_estimate, omd_entropy_step, LearnerState, SimplexPoint};
use crate::cones::WeightVector;
use crate::error::{check_dim, Error, Result};
use crate::games::VectorGame;

/// Partition of rounds `1..=T` into blocks of length `L` (last may be short).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    horizon: usize,
    block_len: usize,
}

impl BlockSchedule {
    pub fn new(horizon: usize, block_len: usize) -> Result<Self> {
        if horizon == 0 || block_len == 0 {
            return Err(Error::InvalidArgument(
                "horizon and block length must be positive".into(),
            ));
        }
        Ok(Self { horizon, block_len })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// `h = ceil(T / L)`.
    pub fn block_count(&self) -> usize {
        self.horizon.div_ceil(self.block_len)
    }

    /// Rounds of block `k` (both 1-based): `[(k-1)L + 1, min(kL, T)]`.
    pub fn block_indices(&self, k: usize) -> Result<RangeInclusive<usize>> {
        if k == 0 || k > self.block_count() {
            return Err(Error::OutOfRange {
                what: "block",
                index: k,
                len: self.block_count() + 1,
            });
        }
        let start = (k - 1) * self.block_len + 1;
        let end = (k * self.block_len).min(self.horizon);
        Ok(start..=end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilevelParams {
    pub eta_p: f64,
    pub eta_q: f64,
    pub gamma_p: f64,
    pub gamma_q: f64,
}

impl Default for BilevelParams {
    fn default() -> Self {
        Self {
            eta_p: 0.1,
            eta_q: 0.1,
            gamma_p: 0.2,
            gamma_q: 0.2,
        }
    }
}

impl BilevelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_p", self.eta_p), ("eta_q", self.eta_q)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("gamma_p", self.gamma_p), ("gamma_q", self.gamma_q)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Outer distribution over candidates plus one action policy per candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilevelState {
    pub outer: SimplexPoint,
    pub policies: Vec<SimplexPoint>,
    pub candidates: Vec<WeightVector>,
    pub objective: WeightVector,
    pub params: BilevelParams,
}

impl BilevelState {
    /// Uniform outer distribution and uniform policy rows.
    pub fn new(
        candidates: Vec<WeightVector>,
        objective: WeightVector,
        action_count: usize,
        params: BilevelParams,
    ) -> Result<Self> {
        let m = candidates.len();
        let outer = SimplexPoint::uniform(m)?;
        let row = SimplexPoint::uniform(action_count)?;
        Self::with_initial(candidates, objective, outer, vec![row; m], params)
    }

    pub fn with_initial(
        candidates: Vec<WeightVector>,
        objective: WeightVector,
        outer: SimplexPoint,
        policies: Vec<SimplexPoint>,
        params: BilevelParams,
    ) -> Result<Self> {
        params.validate()?;
        let m = candidates.len();
        if m == 0 {
            return Err(Error::InvalidArgument("candidate set is empty".into()));
        }
        check_dim(m, outer.len())?;
        check_dim(m, policies.len())?;
        for c in &candidates {
            check_dim(objective.dim(), c.dim())?;
        }
        let actions = policies[0].len();
        for row in &policies {
            check_dim(actions, row.len())?;
        }
        if !outer.is_strictly_positive() || !policies.iter().all(|r| r.is_strictly_positive()) {
            return Err(Error::InvalidArgument(
                "initial distributions must have no zero entries".into(),
            ));
        }
        Ok(Self {
            outer,
            policies,
            candidates,
            objective,
            params,
        })
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn action_count(&self) -> usize {
        self.policies[0].len()
    }
}

/// Behaviour of the non-focal player.
#[derive(Debug, Clone, PartialEq)]
pub enum Opponent {
    /// Exp-IX learner fed `<weight, u_opponent>`.
    ExpIx {
        learner: LearnerState,
        weight: WeightVector,
    },
    /// Stationary mixed policy.
    Fixed(SimplexPoint),
}

/// Two-player environment; the focal player is player 0.
#[derive(Debug, Clone)]
pub struct Environment {
    game: VectorGame,
    opponent: Opponent,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(game: VectorGame, opponent: Opponent, rng: ChaCha8Rng) -> Result<Self> {
        if game.players() != 2 {
            return Err(Error::InvalidArgument(
                "environment needs a two-player game".into(),
            ));
        }
        let opp_actions = game.action_counts()[1];
        match &opponent {
            Opponent::ExpIx { learner, weight } => {
                check_dim(opp_actions, learner.dist.len())?;
                check_dim(game.payoff_dims()[1], weight.dim())?;
            }
            Opponent::Fixed(p) => check_dim(opp_actions, p.len())?,
        }
        Ok(Self {
            game,
            opponent,
            rng,
        })
    }

    pub fn game(&self) -> &VectorGame {
        &self.game
    }

    pub fn opponent(&self) -> &Opponent {
        &self.opponent
    }

    /// Plays one round: samples the opponent's action, looks up the focal
    /// payoff, and advances the opponent's learner exactly once.
    pub fn step(&mut self, focal_action: usize) -> Result<(Vec<f64>, usize)> {
        let n_focal = self.game.action_counts()[0];
        if focal_action >= n_focal {
            return Err(Error::OutOfRange {
                what: "focal action",
                index: focal_action,
                len: n_focal,
            });
        }
        let b = match &self.opponent {
            Opponent::ExpIx { learner, .. } => learner.dist.sample(&mut self.rng),
            Opponent::Fixed(p) => p.sample(&mut self.rng),
        };
        let profile = [focal_action, b];
        let u = self.game.payoff(&profile, 0)?.to_vec();
        if let Opponent::ExpIx { learner, weight } = &mut self.opponent {
            let r = weight.scalarize(self.game.payoff(&profile, 1)?)?;
            *learner = learner.expix_step(b, r)?;
        }
        Ok((u, b))
    }
}

/// Independent random streams for one run.
#[derive(Debug, Clone)]
pub struct RunStreams {
    pub outer: ChaCha8Rng,
    pub focal: ChaCha8Rng,
    pub opponent: ChaCha8Rng,
}

impl RunStreams {
    /// Streams 0, 1, 2 of the ChaCha8 generator keyed by `seed`.
    pub fn from_seed(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            outer: stream(0),
            focal: stream(1),
            opponent: stream(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    /// 0-based block index.
    pub block: usize,
    /// 0-based index of the deployed candidate.
    pub deployed: usize,
    pub focal_action: usize,
    pub opponent_action: usize,
    pub payoff: Vec<f64>,
    /// Policy row in force when `focal_action` was sampled.
    pub focal_dist: Vec<f64>,
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockLog {
    /// Outer distribution in force when `deployed` was sampled.
    pub outer_dist: Vec<f64>,
    pub deployed: usize,
    pub objective_reward: f64,
    pub estimate: Vec<f64>,
}

/// Complete log of one run; enough to replay every update offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub horizon: usize,
    pub block_len: usize,
    pub payoff_bound: f64,
    pub action_count: usize,
    pub candidates: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
    pub params: BilevelParams,
    /// Focal payoff `u(a, b)` indexed `[a][b]`.
    pub focal_payoffs: Vec<Vec<Vec<f64>>>,
    pub rounds: Vec<RoundLog>,
    pub blocks: Vec<BlockLog>,
    pub final_outer: Vec<f64>,
    pub final_policies: Vec<Vec<f64>>,
}

impl RunHistory {
    pub fn payoff_dim(&self) -> usize {
        self.objective.len()
    }

    pub fn schedule(&self) -> Result<BlockSchedule> {
        BlockSchedule::new(self.horizon, self.block_len)
    }

    /// Per-round `<w, u_t>`.
    pub fn scalarized_series(&self, weight: &[f64]) -> Vec<f64> {
        self.rounds
            .iter()
            .map(|r| crate::cones::dot(weight, &r.payoff))
            .collect()
    }
}

fn focal_table(game: &VectorGame) -> Result<Vec<Vec<Vec<f64>>>> {
    let counts = game.action_counts();
    (0..counts[0])
        .map(|a| {
            (0..counts[1])
                .map(|b| game.payoff(&[a, b], 0).map(<[f64]>::to_vec))
                .collect()
        })
        .collect()
}

/// Result of running the inner learner over one block.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    pub objective_reward: f64,
    pub rounds: Vec<RoundLog>,
}

/// Runs the inner learner for candidate `deployed` over `rounds` (1-based,
/// inclusive). Only policy row `deployed` is touched.
pub fn inner_alg(
    deployed: usize,
    state: &mut BilevelState,
    block: usize,
    rounds: RangeInclusive<usize>,
    env: &mut Environment,
    rng: &mut ChaCha8Rng,
) -> Result<InnerOutcome> {
    let m = state.candidate_count();
    if deployed >= m {
        return Err(Error::OutOfRange {
            what: "candidate",
            index: deployed,
            len: m,
        });
    }
    if rounds.is_empty() {
        return Err(Error::InvalidArgument("empty block".into()));
    }
    if !state.policies[deployed].is_strictly_positive() {
        return Err(Error::InvalidArgument(format!(
            "policy row {deployed} has zero entries"
        )));
    }
    let params = state.params;
    let psi = state.candidates[deployed].clone();
    let mut objective_sum = 0.0;
    let mut log = Vec::with_capacity(rounds.clone().count());
    for _t in rounds {
        let row = &state.policies[deployed];
        let a = row.sample(rng);
        let (u, b) = env.step(a)?;
        objective_sum += state.objective.scalarize(&u)?;
        let r = psi.scalarize(&u)?;
        let g = ix_estimate(row, a, r, params.gamma_q)?;
        let next = omd_entropy_step(row, &g, params.eta_q)?;
        let before = std::mem::replace(&mut state.policies[deployed], next);
        log.push(RoundLog {
            block,
            deployed,
            focal_action: a,
            opponent_action: b,
            payoff: u,
            focal_dist: before.into_inner(),
            estimate: g,
        });
    }
    Ok(InnerOutcome {
        objective_reward: objective_sum / log.len() as f64,
        rounds: log,
    })
}

/// Runs the full block protocol over `schedule`.
pub fn outer_alg(
    state: &mut BilevelState,
    schedule: &BlockSchedule,
    env: &mut Environment,
    streams: &mut RunStreams,
) -> Result<RunHistory> {
    check_dim(env.game().action_counts()[0], state.action_count())?;
    check_dim(env.game().payoff_dims()[0], state.objective.dim())?;
    let params = state.params;
    let mut rounds = Vec::with_capacity(schedule.horizon());
    let mut blocks = Vec::with_capacity(schedule.block_count());
    for k in 1..=schedule.block_count() {
        let interval = schedule.block_indices(k)?;
        let j = state.outer.sample(&mut streams.outer);
        let inner = inner_alg(j, state, k - 1, interval, env, &mut streams.focal)?;
        let g = ix_estimate(&state.outer, j, inner.objective_reward, params.gamma_p)?;
        let next = omd_entropy_step(&state.outer, &g, params.eta_p)?;
        let before = std::mem::replace(&mut state.outer, next);
        blocks.push(BlockLog {
            outer_dist: before.into_inner(),
            deployed: j,
            objective_reward: inner.objective_reward,
            estimate: g,
        });
        rounds.extend(inner.rounds);
    }
    Ok(RunHistory {
        horizon: schedule.horizon(),
        block_len: schedule.block_len(),
        payoff_bound: env.game().payoff_bound(),
        action_count: state.action_count(),
        candidates: state
            .candidates
            .iter()
            .map(|c| c.coords().to_vec())
            .collect(),
        objective: state.objective.coords().to_vec(),
        params,
        focal_payoffs: focal_table(env.game())?,
        rounds,
        blocks,
        final_outer: state.outer.probs().to_vec(),
        final_policies: state.policies.iter().map(|r| r.probs().to_vec()).collect(),
    })
}

/// Plain Exp-IX focal player rewarded by `<objective, u_t>`, logged as a
/// single block with one candidate so the same audit applies.
pub fn run_expix(
    focal: LearnerState,
    objective: &WeightVector,
    horizon: usize,
    env: &mut Environment,
    rng: &mut ChaCha8Rng,
) -> Result<RunHistory> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    check_dim(env.game().action_counts()[0], focal.dist.len())?;
    let mut learner = focal;
    let mut rounds = Vec::with_capacity(horizon);
    let mut objective_sum = 0.0;
    for _ in 0..horizon {
        let a = learner.dist.sample(rng);
        let (u, b) = env.step(a)?;
        let r = objective.scalarize(&u)?;
        objective_sum += r;
        let (next, g) = learner.expix_step_with_estimate(a, r)?;
        let before = std::mem::replace(&mut learner, next);
        rounds.push(RoundLog {
            block: 0,
            deployed: 0,
            focal_action: a,
            opponent_action: b,
            payoff: u,
            focal_dist: before.dist.into_inner(),
            estimate: g,
        });
    }
    let objective_reward = objective_sum / horizon as f64;
    let single = SimplexPoint::uniform(1)?;
    let block_estimate = ix_estimate(&single, 0, objective_reward, learner.gamma)?;
    Ok(RunHistory {
        horizon,
        block_len: horizon,
        payoff_bound: env.game().payoff_bound(),
        action_count: learner.dist.len(),
        candidates: vec![objective.coords().to_vec()],
        objective: objective.coords().to_vec(),
        params: BilevelParams {
            eta_p: learner.eta,
            eta_q: learner.eta,
            gamma_p: learner.gamma,
            gamma_q: learner.gamma,
        },
        focal_payoffs: focal_table(env.game())?,
        rounds,
        blocks: vec![BlockLog {
            outer_dist: vec![1.0],
            deployed: 0,
            objective_reward,
            estimate: block_estimate,
        }],
        final_outer: vec![1.0],
        final_policies: vec![learner.dist.into_inner()],
    })
}
