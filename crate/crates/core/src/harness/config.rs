//! Experiment configuration.
//!
//! Configs are TOML files with dotted keys; every key is optional and
//! defaults to the bi-level vs Exp-IX setup on the `bos4d` game. Values can
//! be overridden from the command line with `key.path=value`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bilevel::BilevelParams;
use crate::cones::{PolyhedralCone, WeightVector};
use crate::error::{Error, Result};
use crate::games::VectorGame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    ExpixVsExpix,
    BilevelVsExpix,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocalKind {
    Bilevel,
    Expix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpponentKind {
    Expix,
    Fixed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GameConfig {
    /// Built-in game name; currently only `bos4d`, which is also used when
    /// neither `preset` nor `payoffs` is given.
    pub preset: Option<String>,
    /// Action labels `[focal, opponent]` for an inline game.
    pub actions: Option<[Vec<String>; 2]>,
    /// Row-major payoff vectors `u(a, b)`, shared by both players.
    pub payoffs: Option<Vec<Vec<f64>>>,
    /// Separate opponent payoffs; defaults to `payoffs`.
    pub opponent_payoffs: Option<Vec<Vec<f64>>>,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    /// Focal objective weight (normalized on load).
    pub objective: Vec<f64>,
    /// Opponent's learning weight.
    pub opponent: Vec<f64>,
    /// Candidate deployed weights for the bi-level player.
    pub candidates: Vec<Vec<f64>>,
}

impl Default for WeightConfig {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            objective: vec![h, h, 0.0, 0.0],
            opponent: vec![0.0, 0.0, h, h],
            candidates: vec![
                vec![h, h, 0.0, 0.0],
                vec![0.5, 0.5, 0.5, 0.5],
                vec![0.5, 0.5, -0.5, -0.5],
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// Absent means [`expix_default_eta`] for the player's action count and
    /// the horizon.
    pub eta: Option<f64>,
    pub gamma: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            eta: None,
            gamma: 0.2,
        }
    }
}

/// Fixed-horizon Exp3-IX learning rate `sqrt(2 ln K / (K T))`.
pub fn expix_default_eta(actions: usize, horizon: usize) -> f64 {
    let k = actions as f64;
    (2.0 * k.ln() / (k * horizon as f64)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpponentConfig {
    pub kind: OpponentKind,
    /// Initial Exp-IX policy (uniform when absent).
    pub init: Option<Vec<f64>>,
    /// Stationary policy for `kind = "fixed"`.
    pub policy: Option<Vec<f64>>,
}

impl Default for OpponentConfig {
    fn default() -> Self {
        Self {
            kind: OpponentKind::Expix,
            init: None,
            policy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FocalConfig {
    /// Only consulted when `scenario = "custom"`.
    pub kind: FocalKind,
}

impl Default for FocalConfig {
    fn default() -> Self {
        Self {
            kind: FocalKind::Bilevel,
        }
    }
}

/// Optional preference cone used to validate the candidate weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeConfig {
    pub generators: Vec<Vec<f64>>,
    pub halfspaces: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub runs: usize,
    pub rounds: usize,
    pub block_len: usize,
    /// Final rounds used to classify a run.
    pub window: usize,
    /// Moving-average window for trajectory output.
    pub smoothing: usize,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Audit every run against the regret bounds.
    pub audit: bool,
    /// Number of leading runs whose full history is written out.
    pub save_histories: usize,
    pub out_dir: Option<PathBuf>,
    pub game: GameConfig,
    pub weights: WeightConfig,
    pub bilevel: BilevelParams,
    pub baseline: BaselineConfig,
    pub opponent: OpponentConfig,
    pub focal: FocalConfig,
    pub cone: Option<ConeConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::BilevelVsExpix,
            seed: 2026,
            runs: 1000,
            rounds: 10_000,
            block_len: 500,
            window: 1000,
            smoothing: 300,
            workers: 0,
            audit: true,
            save_histories: 0,
            out_dir: None,
            game: GameConfig::default(),
            weights: WeightConfig::default(),
            bilevel: BilevelParams::default(),
            baseline: BaselineConfig::default(),
            opponent: OpponentConfig::default(),
            focal: FocalConfig::default(),
            cone: None,
        }
    }
}

/// Applies `key.path=value` to a TOML table. The value is parsed as a TOML
/// value when possible and taken as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must look like key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("`{part}` is not a table")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<file>", e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("<config>", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::config("runs", "must be >= 1"));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be >= 1"));
        }
        if self.window == 0 || self.window > self.rounds {
            return Err(Error::config(
                "window",
                "must satisfy 1 <= window <= rounds",
            ));
        }
        if self.block_len == 0 {
            return Err(Error::config("block_len", "must be >= 1"));
        }
        if self.smoothing == 0 {
            return Err(Error::config("smoothing", "must be >= 1"));
        }
        self.bilevel
            .validate()
            .map_err(|e| Error::config("bilevel", e.to_string()))?;
        if self
            .baseline
            .eta
            .is_some_and(|eta| !(eta > 0.0 && eta.is_finite()))
        {
            return Err(Error::config("baseline.eta", "must be positive"));
        }
        if !(self.baseline.gamma >= 0.0) {
            return Err(Error::config("baseline.gamma", "must be >= 0"));
        }
        self.resolve().map(|_| ())
    }

    /// Effective Exp-IX learning rate for a player with `actions` actions.
    pub fn baseline_eta(&self, actions: usize) -> f64 {
        self.baseline
            .eta
            .unwrap_or_else(|| expix_default_eta(actions, self.rounds))
    }

    pub fn focal_kind(&self) -> FocalKind {
        match self.scenario {
            Scenario::ExpixVsExpix => FocalKind::Expix,
            Scenario::BilevelVsExpix => FocalKind::Bilevel,
            Scenario::Custom => self.focal.kind,
        }
    }

    pub fn opponent_kind(&self) -> OpponentKind {
        match self.scenario {
            Scenario::Custom => self.opponent.kind,
            _ => OpponentKind::Expix,
        }
    }

    /// Builds the game and normalized weights.
    pub fn resolve(&self) -> Result<Resolved> {
        let game = self.build_game()?;
        let dims = game.payoff_dims();
        let weight = |path: String, v: &[f64], dim: usize| -> Result<WeightVector> {
            if v.len() != dim {
                return Err(Error::config(
                    path,
                    format!("expected {dim} coordinates, got {}", v.len()),
                ));
            }
            WeightVector::normalize(v).map_err(|e| Error::config(path, e.to_string()))
        };
        let objective = weight("weights.objective".into(), &self.weights.objective, dims[0])?;
        let opponent = weight("weights.opponent".into(), &self.weights.opponent, dims[1])?;
        if self.focal_kind() == FocalKind::Bilevel && self.weights.candidates.is_empty() {
            return Err(Error::config(
                "weights.candidates",
                "need at least one candidate",
            ));
        }
        let mut candidates = self
            .weights
            .candidates
            .iter()
            .enumerate()
            .map(|(j, c)| weight(format!("weights.candidates[{j}]"), c, dims[0]))
            .collect::<Result<Vec<_>>>()?;
        if let Some(cc) = &self.cone {
            let cone = PolyhedralCone::new(dims[0], cc.generators.clone(), cc.halfspaces.clone())
                .map_err(|e| Error::config("cone", e.to_string()))?;
            candidates = candidates
                .into_iter()
                .enumerate()
                .map(|(j, c)| {
                    c.validated_for(&cone).map_err(|e| {
                        Error::config(format!("weights.candidates[{j}]"), e.to_string())
                    })
                })
                .collect::<Result<_>>()?;
        }
        let n_opp = game.action_counts()[1];
        let dist = |path: &str, v: &Option<Vec<f64>>| -> Result<Option<crate::SimplexPoint>> {
            v.as_ref()
                .map(|p| {
                    if p.len() != n_opp {
                        return Err(Error::config(path, format!("expected {n_opp} entries")));
                    }
                    crate::SimplexPoint::new(p.clone())
                        .map_err(|e| Error::config(path, e.to_string()))
                })
                .transpose()
        };
        let opponent_init = dist("opponent.init", &self.opponent.init)?;
        if let Some(p) = &opponent_init {
            if !p.is_strictly_positive() {
                return Err(Error::config("opponent.init", "must have no zero entries"));
            }
        }
        let opponent_policy = dist("opponent.policy", &self.opponent.policy)?;
        if self.opponent_kind() == OpponentKind::Fixed && opponent_policy.is_none() {
            return Err(Error::config(
                "opponent.policy",
                "required for a fixed opponent",
            ));
        }
        Ok(Resolved {
            game,
            objective,
            opponent,
            candidates,
            opponent_init,
            opponent_policy,
        })
    }

    fn build_game(&self) -> Result<VectorGame> {
        let g = &self.game;
        match (&g.preset, &g.payoffs) {
            (Some(_), Some(_)) => Err(Error::config(
                "game",
                "give either `preset` or `payoffs`, not both",
            )),
            (None, None) => Ok(VectorGame::bos4d()),
            (Some(name), None) => match name.as_str() {
                "bos4d" => Ok(VectorGame::bos4d()),
                other => Err(Error::config(
                    "game.preset",
                    format!("unknown preset `{other}`"),
                )),
            },
            (None, Some(flat)) => {
                let [l0, l1] = g
                    .actions
                    .clone()
                    .ok_or_else(|| Error::config("game.actions", "required with inline payoffs"))?;
                let (n0, n1) = (l0.len(), l1.len());
                if flat.len() != n0 * n1 {
                    return Err(Error::config(
                        "game.payoffs",
                        format!("expected {} profiles, got {}", n0 * n1, flat.len()),
                    ));
                }
                let opp = g.opponent_payoffs.clone().unwrap_or_else(|| flat.clone());
                if opp.len() != flat.len() {
                    return Err(Error::config(
                        "game.opponent_payoffs",
                        "profile count mismatch",
                    ));
                }
                let bound = g.bound.unwrap_or_else(|| {
                    flat.iter()
                        .chain(&opp)
                        .flatten()
                        .fold(0.0f64, |m, x| m.max(x.abs()))
                        .max(f64::MIN_POSITIVE)
                });
                let d0 = flat.first().map_or(0, Vec::len);
                let d1 = opp.first().map_or(0, Vec::len);
                VectorGame::with_labels(
                    vec![n0, n1],
                    vec![d0, d1],
                    vec![flat.clone(), opp],
                    bound,
                    vec![l0, l1],
                )
                .map_err(|e| Error::config("game", e.to_string()))
            }
        }
    }

    /// This config with every weight replaced by its normalized form.
    pub fn resolved_echo(&self) -> Result<Self> {
        let r = self.resolve()?;
        let mut out = self.clone();
        out.weights.objective = r.objective.coords().to_vec();
        out.weights.opponent = r.opponent.coords().to_vec();
        out.weights.candidates = r.candidates.iter().map(|c| c.coords().to_vec()).collect();
        let [k0, k1] = [r.game.action_counts()[0], r.game.action_counts()[1]];
        if self.baseline_eta(k0) == self.baseline_eta(k1) {
            out.baseline.eta = Some(self.baseline_eta(k0));
        }
        Ok(out)
    }
}

/// Validated runtime objects derived from a config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub game: VectorGame,
    pub objective: WeightVector,
    pub opponent: WeightVector,
    pub candidates: Vec<WeightVector>,
    pub opponent_init: Option<crate::SimplexPoint>,
    pub opponent_policy: Option<crate::SimplexPoint>,
}
