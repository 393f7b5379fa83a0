//! Normal-form games with vector payoffs, their scalarizations, and
//! brute-force pure equilibrium checks.

use serde::{Deserialize, Serialize};

use crate::cones::{PolyhedralCone, WeightVector};
use crate::error::{check_dim, Error, Result};

/// Largest game `pure_nash` will enumerate.
pub const MAX_PROFILES: usize = 1_000_000;

/// Deviation gain that still counts as "no profitable deviation".
pub const NASH_TOLERANCE: f64 = 1e-9;

/// Joint action, one index per player.
pub type Profile = Vec<usize>;

fn profile_count(action_counts: &[usize]) -> Option<usize> {
    action_counts
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
}

fn profile_index(action_counts: &[usize], profile: &[usize]) -> Result<usize> {
    check_dim(action_counts.len(), profile.len())?;
    let mut idx = 0;
    for (&a, &n) in profile.iter().zip(action_counts) {
        if a >= n {
            return Err(Error::OutOfRange {
                what: "action",
                index: a,
                len: n,
            });
        }
        idx = idx * n + a;
    }
    Ok(idx)
}

fn profile_at(action_counts: &[usize], mut idx: usize) -> Profile {
    let mut p = vec![0; action_counts.len()];
    for (slot, &n) in p.iter_mut().zip(action_counts).rev() {
        *slot = idx % n;
        idx /= n;
    }
    p
}

/// Dense vector-payoff game. Profiles are stored row-major with player 0
/// as the most significant index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorGame {
    action_counts: Vec<usize>,
    payoff_dims: Vec<usize>,
    /// `payoffs[player][profile]` is a vector of length `payoff_dims[player]`.
    payoffs: Vec<Vec<Vec<f64>>>,
    payoff_bound: f64,
    action_labels: Vec<Vec<String>>,
}

impl VectorGame {
    pub fn new(
        action_counts: Vec<usize>,
        payoff_dims: Vec<usize>,
        payoffs: Vec<Vec<Vec<f64>>>,
        payoff_bound: f64,
    ) -> Result<Self> {
        let labels = action_counts
            .iter()
            .map(|&n| (0..n).map(|a| a.to_string()).collect())
            .collect();
        Self::with_labels(action_counts, payoff_dims, payoffs, payoff_bound, labels)
    }

    pub fn with_labels(
        action_counts: Vec<usize>,
        payoff_dims: Vec<usize>,
        payoffs: Vec<Vec<Vec<f64>>>,
        payoff_bound: f64,
        action_labels: Vec<Vec<String>>,
    ) -> Result<Self> {
        let n = action_counts.len();
        if n == 0 {
            return Err(Error::InvalidArgument(
                "game needs at least one player".into(),
            ));
        }
        if action_counts.contains(&0) || payoff_dims.contains(&0) {
            return Err(Error::InvalidArgument(
                "action counts and payoff dimensions must be positive".into(),
            ));
        }
        check_dim(n, payoff_dims.len())?;
        check_dim(n, payoffs.len())?;
        check_dim(n, action_labels.len())?;
        if !(payoff_bound > 0.0 && payoff_bound.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "payoff bound must be positive, got {payoff_bound}"
            )));
        }
        let total = profile_count(&action_counts)
            .ok_or_else(|| Error::InvalidArgument("profile count overflows".into()))?;
        for (i, table) in payoffs.iter().enumerate() {
            check_dim(total, table.len())?;
            check_dim(action_counts[i], action_labels[i].len())?;
            for u in table {
                check_dim(payoff_dims[i], u.len())?;
                if let Some(x) = u.iter().find(|x| !(x.abs() <= payoff_bound)) {
                    return Err(Error::InvalidArgument(format!(
                        "payoff coordinate {x} exceeds bound {payoff_bound}"
                    )));
                }
            }
        }
        Ok(Self {
            action_counts,
            payoff_dims,
            payoffs,
            payoff_bound,
            action_labels,
        })
    }

    /// Two-player game in which both players read the same vector payoff
    /// `table[a][b]` (row = player 0, column = player 1).
    pub fn shared_bimatrix(
        table: Vec<Vec<Vec<f64>>>,
        payoff_bound: f64,
        labels: [Vec<String>; 2],
    ) -> Result<Self> {
        let rows = table.len();
        let cols = table.first().map_or(0, Vec::len);
        if table.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged payoff table".into()));
        }
        let dim = table.first().and_then(|r| r.first()).map_or(0, Vec::len);
        let flat: Vec<Vec<f64>> = table.into_iter().flatten().collect();
        let [l0, l1] = labels;
        Self::with_labels(
            vec![rows, cols],
            vec![dim, dim],
            vec![flat.clone(), flat],
            payoff_bound,
            vec![l0, l1],
        )
    }

    /// The four-dimensional Bach-or-Stravinsky game with actions `{B, S}`.
    pub fn bos4d() -> Self {
        let table = vec![
            vec![vec![1.0, 1.0, 1.0, 0.0], vec![-1.0, 1.0, 1.0, -1.0]],
            vec![vec![1.0, -1.0, -1.0, 1.0], vec![0.0, 1.0, 1.0, 1.0]],
        ];
        let labels = || vec!["B".to_string(), "S".to_string()];
        Self::shared_bimatrix(table, 1.0, [labels(), labels()]).expect("bos4d is well formed")
    }

    pub fn players(&self) -> usize {
        self.action_counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn payoff_dims(&self) -> &[usize] {
        &self.payoff_dims
    }

    pub fn payoff_bound(&self) -> f64 {
        self.payoff_bound
    }

    pub fn action_labels(&self) -> &[Vec<String>] {
        &self.action_labels
    }

    pub fn profile_count(&self) -> usize {
        self.payoffs[0].len()
    }

    /// Concatenated action labels, e.g. `"BS"` for `(B, S)`.
    pub fn profile_label(&self, profile: &[usize]) -> String {
        profile
            .iter()
            .zip(&self.action_labels)
            .map(|(&a, labels)| labels[a].as_str())
            .collect()
    }

    /// All joint profiles in storage order.
    pub fn profiles(&self) -> impl Iterator<Item = Profile> + '_ {
        (0..self.profile_count()).map(|i| profile_at(&self.action_counts, i))
    }

    pub fn payoff(&self, profile: &[usize], player: usize) -> Result<&[f64]> {
        if player >= self.players() {
            return Err(Error::OutOfRange {
                what: "player",
                index: player,
                len: self.players(),
            });
        }
        let idx = profile_index(&self.action_counts, profile)?;
        Ok(&self.payoffs[player][idx])
    }

    /// Applies one weight per player.
    pub fn scalarize(&self, weights: &[WeightVector]) -> Result<ScalarGame> {
        check_dim(self.players(), weights.len())?;
        let mut payoffs = Vec::with_capacity(self.players());
        for (i, w) in weights.iter().enumerate() {
            check_dim(self.payoff_dims[i], w.dim())?;
            payoffs.push(
                self.payoffs[i]
                    .iter()
                    .map(|u| w.scalarize(u))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        ScalarGame::new(self.action_counts.clone(), payoffs)
    }

    /// Pure weak-Nash test: no player has a pure unilateral deviation whose
    /// payoff is strictly better in the interior order of that player's cone.
    pub fn is_weak_nash(&self, cones: &[PolyhedralCone], profile: &[usize]) -> Result<bool> {
        check_dim(self.players(), cones.len())?;
        for (i, cone) in cones.iter().enumerate() {
            if cone.halfspaces().is_none() {
                return Err(Error::UnsupportedRepresentation(
                    "weak Nash test needs half-space cones",
                ));
            }
            check_dim(self.payoff_dims[i], cone.dim())?;
        }
        let mut dev = profile.to_vec();
        for (i, cone) in cones.iter().enumerate() {
            let here = self.payoff(profile, i)?;
            for alt in 0..self.action_counts[i] {
                if alt == profile[i] {
                    continue;
                }
                dev[i] = alt;
                if cone.order_strict(here, self.payoff(&dev, i)?)? {
                    return Ok(false);
                }
            }
            dev[i] = profile[i];
        }
        Ok(true)
    }
}

/// Coordinate-wise mean of a sequence of payoff vectors.
pub fn average_payoff<V: AsRef<[f64]>>(history: &[V]) -> Result<Vec<f64>> {
    let first = history
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty payoff history".into()))?;
    let d = first.as_ref().len();
    let mut sum = vec![0.0; d];
    for u in history {
        let u = u.as_ref();
        check_dim(d, u.len())?;
        sum.iter_mut().zip(u).for_each(|(s, x)| *s += x);
    }
    let n = history.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarGame {
    action_counts: Vec<usize>,
    payoffs: Vec<Vec<f64>>,
}

impl ScalarGame {
    pub fn new(action_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(action_counts.len(), payoffs.len())?;
        if action_counts.is_empty() || action_counts.contains(&0) {
            return Err(Error::InvalidArgument("bad action counts".into()));
        }
        let total = profile_count(&action_counts)
            .ok_or_else(|| Error::InvalidArgument("profile count overflows".into()))?;
        for table in &payoffs {
            check_dim(total, table.len())?;
        }
        Ok(Self {
            action_counts,
            payoffs,
        })
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn payoff(&self, profile: &[usize], player: usize) -> Result<f64> {
        let idx = profile_index(&self.action_counts, profile)?;
        self.payoffs
            .get(player)
            .map(|t| t[idx])
            .ok_or(Error::OutOfRange {
                what: "player",
                index: player,
                len: self.payoffs.len(),
            })
    }

    /// Every pure profile at which no player gains more than
    /// [`NASH_TOLERANCE`] by a unilateral deviation, in storage order.
    pub fn pure_nash(&self) -> Result<Vec<Profile>> {
        let total = self.payoffs[0].len();
        if total > MAX_PROFILES {
            return Err(Error::SizeLimit {
                size: total,
                limit: MAX_PROFILES,
            });
        }
        // strides[i] = index distance between a_i and a_i + 1
        let n = self.action_counts.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.action_counts[i + 1];
        }
        let mut out = Vec::new();
        'profiles: for idx in 0..total {
            let profile = profile_at(&self.action_counts, idx);
            for (i, table) in self.payoffs.iter().enumerate() {
                let base = idx - profile[i] * strides[i];
                let here = table[idx];
                for alt in 0..self.action_counts[i] {
                    if table[base + alt * strides[i]] > here + NASH_TOLERANCE {
                        continue 'profiles;
                    }
                }
            }
            out.push(profile);
        }
        Ok(out)
    }
}

/// Outcome of checking that every pure NE of every scalarized game in a
/// weight grid is a weak Nash equilibrium of the vector game.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    /// `(grid index, profile)` pairs that were checked.
    pub checked: Vec<(usize, Profile)>,
    pub violations: Vec<(usize, Profile)>,
}

impl InclusionReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Certifies `∪_ψ NE(ψ) ⊆ WNE(G)` over a finite grid of weight profiles.
pub fn certify_scalarized_inclusion(
    game: &VectorGame,
    cones: &[PolyhedralCone],
    grid: &[Vec<WeightVector>],
) -> Result<InclusionReport> {
    let mut report = InclusionReport::default();
    for (g, weights) in grid.iter().enumerate() {
        for profile in game.scalarize(weights)?.pure_nash()? {
            let ok = game.is_weak_nash(cones, &profile)?;
            if !ok {
                report.violations.push((g, profile.clone()));
            }
            report.checked.push((g, profile));
        }
    }
    Ok(report)
}

/// Nonzero points of the simplex lattice `{w ≥ 0 : Σw = 1, w·steps ∈ ℕ^dim}`,
/// normalized to unit ℓ2 norm.
pub fn simplex_weight_grid(dim: usize, steps: usize) -> Result<Vec<WeightVector>> {
    if dim == 0 || steps == 0 {
        return Err(Error::InvalidArgument("grid needs dim, steps > 0".into()));
    }
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(dim, left - k, cur, out);
            cur.pop();
        }
    }
    let mut points = Vec::new();
    rec(dim, steps, &mut Vec::with_capacity(dim), &mut points);
    points
        .into_iter()
        .map(|p| {
            let v: Vec<f64> = p.into_iter().map(|k| k as f64).collect();
            WeightVector::normalize(&v)
        })
        .collect()
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn small_game() -> impl Strategy<Value = VectorGame> {
        (1usize..4, 1usize..4, 1usize..4).prop_flat_map(|(a0, a1, d)| {
            let n = a0 * a1;
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), n).prop_map(move |flat| {
                VectorGame::new(vec![a0, a1], vec![d, d], vec![flat.clone(), flat], 5.0).unwrap()
            })
        })
    }

    fn weight(d: usize) -> impl Strategy<Value = WeightVector> {
        prop::collection::vec(0.01f64..1.0, d).prop_map(|v| WeightVector::normalize(&v).unwrap())
    }

    proptest! {
        #[test]
        fn scalarization_commutes_with_payoff(
            (g, w0, w1) in small_game().prop_flat_map(|g| {
                let d = g.payoff_dims()[0];
                (Just(g), weight(d), weight(d))
            })
        ) {
            let weights = [w0, w1];
            let s = g.scalarize(&weights).unwrap();
            for p in g.profiles() {
                for (i, wi) in weights.iter().enumerate() {
                    let direct = wi.scalarize(g.payoff(&p, i).unwrap()).unwrap();
                    prop_assert_eq!(s.payoff(&p, i).unwrap(), direct);
                }
            }
        }

        #[test]
        fn nash_invariant_under_affine_rescaling(
            a0 in 1usize..4, a1 in 1usize..4,
            seed in prop::collection::vec(-3.0f64..3.0, 18),
            shift in -10.0f64..10.0, scale in 0.1f64..10.0,
        ) {
            let n = a0 * a1;
            let p0: Vec<f64> = seed[..n].to_vec();
            let p1: Vec<f64> = seed[9..9 + n].to_vec();
            let base = ScalarGame::new(vec![a0, a1], vec![p0.clone(), p1.clone()]).unwrap();
            let moved = ScalarGame::new(
                vec![a0, a1],
                vec![p0.iter().map(|x| scale * x + shift).collect(), p1],
            ).unwrap();
            prop_assert_eq!(base.pure_nash().unwrap(), moved.pure_nash().unwrap());
        }

        #[test]
        fn average_of_concatenation(
            a in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..20),
            b in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..20),
        ) {
            let ma = average_payoff(&a).unwrap();
            let mb = average_payoff(&b).unwrap();
            let all: Vec<Vec<f64>> = a.iter().chain(&b).cloned().collect();
            let m = average_payoff(&all).unwrap();
            let (na, nb) = (a.len() as f64, b.len() as f64);
            for j in 0..3 {
                let weighted = (na * ma[j] + nb * mb[j]) / (na + nb);
                prop_assert!((m[j] - weighted).abs() < 1e-12);
            }
        }

        #[test]
        fn scalarized_nash_is_weak_nash(
            (g, w0, w1) in small_game().prop_flat_map(|g| {
                let d = g.payoff_dims()[0];
                (Just(g), weight(d), weight(d))
            })
        ) {
            let d = g.payoff_dims()[0];
            let k = PolyhedralCone::orthant(d).unwrap();
            let w0 = w0.validated_for(&k).unwrap();
            let w1 = w1.validated_for(&k).unwrap();
            let report = certify_scalarized_inclusion(&g, &[k.clone(), k], &[vec![w0, w1]]).unwrap();
            prop_assert!(report.is_clean());
        }
    }
}
