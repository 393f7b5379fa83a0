//! Shared bandit machinery: sampling from the simplex, the implicit
//! exploration (IX) loss estimator, and the negative-entropy mirror step.
//!
//! The inner learner, the outer learner and the Exp-IX baseline are all the
//! same composition `omd_entropy_step(dist, ix_estimate(...), eta)`; they only
//! differ in which distribution they own and what reward they feed it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A probability vector over a finite index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexPoint {
    probs: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidArgument(
                "probabilities must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Like [`SimplexPoint::new`] but additionally requires every entry > 0,
    /// which is what learner initialization needs.
    pub fn strictly_positive(probs: Vec<f64>) -> Result<Self> {
        let p = Self::new(probs)?;
        if !p.is_strictly_positive() {
            return Err(Error::InvalidArgument(
                "initial distribution must have no zero entries".into(),
            ));
        }
        Ok(p)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::OutOfRange {
                what: "index",
                index,
                len: n,
            });
        }
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// Inverse-CDF sampling. Consumes exactly one uniform draw from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        // u landed in the rounding gap above the final partial sum
        last_positive
    }
}

/// IX-stabilized importance-weighted loss estimate:
/// `g[a] = -1{a = chosen} * reward / (dist[chosen] + gamma)`.
pub fn ix_estimate(
    dist: &SimplexPoint,
    chosen: usize,
    reward: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    if chosen >= dist.len() {
        return Err(Error::OutOfRange {
            what: "action",
            index: chosen,
            len: dist.len(),
        });
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative IX parameter {gamma}"
        )));
    }
    let denom = dist.probs[chosen] + gamma;
    if denom == 0.0 {
        return Err(Error::DivisionByZero(
            "chosen index has zero probability and gamma = 0",
        ));
    }
    let mut g = vec![0.0; dist.len()];
    if reward != 0.0 {
        g[chosen] = -reward / denom;
    }
    Ok(g)
}

/// One mirror-descent step with the negative-entropy regularizer, i.e. the
/// minimizer of `<q, loss> + KL(q || dist) / eta` over the simplex:
/// `q(a) ∝ dist(a) * exp(-eta * loss(a))`.
pub fn omd_entropy_step(dist: &SimplexPoint, loss: &[f64], eta: f64) -> Result<SimplexPoint> {
    check_dim(dist.len(), loss.len())?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {eta}"
        )));
    }
    if loss.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("non-finite loss".into()));
    }
    let shift = loss
        .iter()
        .map(|l| -eta * l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = dist
        .probs
        .iter()
        .zip(loss)
        .map(|(p, l)| p * (-eta * l - shift).exp())
        .collect();
    let z: f64 = w.iter().sum();
    if !(z > 0.0) {
        return Err(Error::InvalidArgument(
            "mirror step collapsed to zero mass".into(),
        ));
    }
    w.iter_mut().for_each(|x| *x /= z);
    Ok(SimplexPoint { probs: w })
}

/// Exponential weights with implicit exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState {
    pub dist: SimplexPoint,
    pub eta: f64,
    pub gamma: f64,
}

impl LearnerState {
    pub fn new(dist: SimplexPoint, eta: f64, gamma: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {eta}"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "IX parameter must be >= 0, got {gamma}"
            )));
        }
        Ok(Self { dist, eta, gamma })
    }

    pub fn expix_step(&self, chosen: usize, reward: f64) -> Result<Self> {
        Ok(self.expix_step_with_estimate(chosen, reward)?.0)
    }

    /// Same as [`LearnerState::expix_step`], also returning the loss estimate.
    pub fn expix_step_with_estimate(&self, chosen: usize, reward: f64) -> Result<(Self, Vec<f64>)> {
        let g = ix_estimate(&self.dist, chosen, reward, self.gamma)?;
        let dist = omd_entropy_step(&self.dist, &g, self.eta)?;
        Ok((
            Self {
                dist,
                eta: self.eta,
                gamma: self.gamma,
            },
            g,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp(v: &[f64]) -> SimplexPoint {
        SimplexPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sample_point_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = SimplexPoint::point_mass(4, 2).unwrap();
        assert!((0..1000).all(|_| d.sample(&mut rng) == 2));
    }

    #[test]
    fn sample_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = SimplexPoint::uniform(2).unwrap();
        let zeros = (0..1_000_000).filter(|_| d.sample(&mut rng) == 0).count();
        let f = zeros as f64 / 1e6;
        assert!((0.497..=0.503).contains(&f), "{f}");

        let d = sp(&[0.9, 0.1]);
        let zeros = (0..100_000).filter(|_| d.sample(&mut rng) == 0).count();
        let f = zeros as f64 / 1e5;
        assert!((0.897..=0.903).contains(&f), "{f}");
    }

    #[test]
    fn sample_consumes_one_draw() {
        let d = sp(&[0.2, 0.3, 0.5]);
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        d.sample(&mut a);
        let _: f64 = b.random();
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn ix_examples() {
        let d = SimplexPoint::uniform(2).unwrap();
        let g = ix_estimate(&d, 0, std::f64::consts::SQRT_2, 0.2).unwrap();
        assert!((g[0] + 2.020_305_089_104_421_6).abs() < 1e-12);
        assert_eq!(g[1], 0.0);
        assert_eq!(ix_estimate(&d, 1, 0.0, 0.2).unwrap(), vec![0.0, 0.0]);
        let pm = SimplexPoint::point_mass(3, 1).unwrap();
        assert_eq!(ix_estimate(&pm, 1, 0.7, 0.0).unwrap(), vec![0.0, -0.7, 0.0]);
    }

    #[test]
    fn ix_errors() {
        let pm = SimplexPoint::point_mass(2, 1).unwrap();
        assert!(matches!(
            ix_estimate(&pm, 0, 1.0, 0.0),
            Err(Error::DivisionByZero(_))
        ));
        assert!(ix_estimate(&pm, 5, 1.0, 0.1).is_err());
    }

    #[test]
    fn omd_examples() {
        let d = sp(&[0.3, 0.7]);
        assert_eq!(omd_entropy_step(&d, &[0.0, 0.0], 0.5).unwrap(), d);

        // closed form e^{0.1}/(1+e^{0.1}), confirmed against a numeric minimizer
        let q = omd_entropy_step(&SimplexPoint::uniform(2).unwrap(), &[-1.0, 0.0], 0.1).unwrap();
        assert!((q.probs()[0] - 0.524_979_187_478_939_7).abs() < 1e-12);
        assert!((q.probs()[1] - 0.475_020_812_521_060_3).abs() < 1e-12);

        let a = omd_entropy_step(&sp(&[0.2, 0.3, 0.5]), &[1.0, -2.0, 0.5], 0.3).unwrap();
        let b = omd_entropy_step(&sp(&[0.5, 0.2, 0.3]), &[0.5, 1.0, -2.0], 0.3).unwrap();
        assert_eq!(a.probs()[0], b.probs()[1]);
        assert_eq!(a.probs()[1], b.probs()[2]);
        assert_eq!(a.probs()[2], b.probs()[0]);
    }

    #[test]
    fn omd_survives_extreme_losses() {
        let d = SimplexPoint::uniform(3).unwrap();
        let q = omd_entropy_step(&d, &[-1e5, 0.0, 1e5], 1.0).unwrap();
        assert!(q.probs().iter().all(|p| p.is_finite()));
        assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(omd_entropy_step(&d, &[0.0, 0.0], 1.0).is_err());
        assert!(omd_entropy_step(&d, &[0.0; 3], 0.0).is_err());
    }

    #[test]
    fn expix_examples() {
        let s = LearnerState::new(SimplexPoint::uniform(2).unwrap(), 0.1, 0.2).unwrap();
        assert_eq!(s.expix_step(1, 0.0).unwrap(), s);
        let next = s.expix_step(0, std::f64::consts::SQRT_2).unwrap();
        // compose the two frozen oracles above
        assert!((next.dist.probs()[0] - 0.550_336_530_9).abs() < 1e-9);
        assert!((next.dist.probs()[1] - 0.449_663_469_1).abs() < 1e-9);
        assert!(next.dist.is_strictly_positive());
        assert!(LearnerState::new(SimplexPoint::uniform(2).unwrap(), 0.0, 0.2).is_err());
        assert!(LearnerState::new(SimplexPoint::uniform(2).unwrap(), 0.1, -1.0).is_err());
    }

    #[test]
    fn construction_checks() {
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![1.5, -0.5]).is_err());
        assert!(SimplexPoint::strictly_positive(vec![1.0, 0.0]).is_err());
        assert!(SimplexPoint::strictly_positive(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn chained_updates_stay_on_simplex() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut d = SimplexPoint::uniform(4).unwrap();
        for _ in 0..1_000_000 {
            let loss: Vec<f64> = (0..4).map(|_| rng.random_range(-50.0..50.0)).collect();
            let eta = rng.random_range(0.001..0.2);
            d = omd_entropy_step(&d, &loss, eta).unwrap();
            let s: f64 = d.probs().iter().sum();
            assert!(d.probs().iter().all(|&p| p >= 0.0));
            assert!((s - 1.0).abs() <= SIMPLEX_TOLERANCE);
        }
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn dist(n: usize) -> impl Strategy<Value = SimplexPoint> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            SimplexPoint::new(v.into_iter().map(|x| x / s).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn ix_magnitude_bound(
            p in dist(3), chosen in 0usize..3,
            u in prop::collection::vec(-1.0f64..1.0, 4),
            psi in prop::collection::vec(-1.0f64..1.0, 4),
            gamma in 0.01f64..1.0,
        ) {
            let n: f64 = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assume!(n > 1e-3);
            let r: f64 = psi.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / n;
            let g = ix_estimate(&p, chosen, r, gamma).unwrap();
            let bound = 2.0 * 1.0 / gamma; // sqrt(d) * U / gamma with d = 4, U = 1
            prop_assert!(g.iter().all(|x| x.abs() <= bound + 1e-12));
            prop_assert!(g.iter().filter(|x| **x != 0.0).count() <= 1);
        }

        #[test]
        fn unbiased_without_ix(p in dist(3), rewards in prop::collection::vec(-2.0f64..2.0, 3)) {
            // E_{a~p}[ g(a)[b] ] = -r_b, summed exactly
            let mut expect = [0.0; 3];
            for a in 0..3 {
                let g = ix_estimate(&p, a, rewards[a], 0.0).unwrap();
                for b in 0..3 {
                    expect[b] += p.probs()[a] * g[b];
                }
            }
            for b in 0..3 {
                prop_assert!((expect[b] + rewards[b]).abs() < 1e-12);
            }
        }

        #[test]
        fn sampling_is_deterministic(seed in any::<u64>(), p in dist(4)) {
            use rand::SeedableRng;
            let mut a = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut b = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<usize> = (0..50).map(|_| p.sample(&mut a)).collect();
            let ys: Vec<usize> = (0..50).map(|_| p.sample(&mut b)).collect();
            prop_assert_eq!(xs, ys);
        }
    }
}
