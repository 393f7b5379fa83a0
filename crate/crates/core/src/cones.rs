//! Polyhedral preference cones and linear scalarization.
//!
//! A cone `K` orders payoff vectors by `a <= b` iff `b - a` lies in `K`.
//! Weights drawn from the dual cone `K*` give scalarizations that respect
//! that order. A cone can carry a generator list (`K = cone(g_1, ..., g_r)`),
//! a half-space list (`K = {x : <h, x> >= 0 for all h}`), or both; when both
//! are given they are checked against each other at construction.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Default slack used by every membership test.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Unit-norm tolerance for [`WeightVector`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-12;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyhedralCone {
    dim: usize,
    generators: Vec<Vec<f64>>,
    halfspaces: Option<Vec<Vec<f64>>>,
    tolerance: f64,
}

impl PolyhedralCone {
    /// Builds a cone from a generator list, a half-space list, or both.
    pub fn new(
        dim: usize,
        generators: Vec<Vec<f64>>,
        halfspaces: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        Self::with_tolerance(dim, generators, halfspaces, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(
        dim: usize,
        generators: Vec<Vec<f64>>,
        halfspaces: Option<Vec<Vec<f64>>>,
        tolerance: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "cone dimension must be positive".into(),
            ));
        }
        if !(tolerance >= 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad tolerance {tolerance}")));
        }
        let has_halfspaces = halfspaces.as_ref().is_some_and(|h| !h.is_empty());
        if generators.is_empty() && !has_halfspaces {
            return Err(Error::InvalidArgument(
                "cone needs generators or half-spaces".into(),
            ));
        }
        for g in &generators {
            check_dim(dim, g.len())?;
            if g.iter().all(|&x| x == 0.0) {
                return Err(Error::InvalidArgument("zero generator".into()));
            }
        }
        if let Some(hs) = &halfspaces {
            for h in hs {
                check_dim(dim, h.len())?;
            }
            for (i, g) in generators.iter().enumerate() {
                for (j, h) in hs.iter().enumerate() {
                    if dot(h, g) < -tolerance {
                        return Err(Error::InvalidArgument(format!(
                            "generator {i} violates half-space {j}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            dim,
            generators,
            halfspaces: halfspaces.filter(|h| !h.is_empty()),
            tolerance,
        })
    }

    /// The nonnegative orthant of `R^dim`, with both representations.
    pub fn orthant(dim: usize) -> Result<Self> {
        let basis: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = 1.0;
                e
            })
            .collect();
        Self::new(dim, basis.clone(), Some(basis))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn halfspaces(&self) -> Option<&[Vec<f64>]> {
        self.halfspaces.as_deref()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Membership `v ∈ K`. Uses the half-space list when present, otherwise
    /// nonnegative least squares against the generators.
    pub fn contains(&self, v: &[f64]) -> Result<bool> {
        check_dim(self.dim, v.len())?;
        match &self.halfspaces {
            Some(_) => self.contains_via_halfspaces(v),
            None => self.contains_via_generators(v),
        }
    }

    pub fn contains_via_halfspaces(&self, v: &[f64]) -> Result<bool> {
        check_dim(self.dim, v.len())?;
        let hs = self
            .halfspaces
            .as_ref()
            .ok_or(Error::UnsupportedRepresentation("cone has no half-spaces"))?;
        Ok(hs.iter().all(|h| dot(h, v) >= -self.tolerance))
    }

    pub fn contains_via_generators(&self, v: &[f64]) -> Result<bool> {
        check_dim(self.dim, v.len())?;
        if self.generators.is_empty() {
            return Err(Error::UnsupportedRepresentation("cone has no generators"));
        }
        let (_, residual) = nnls(&self.generators, v);
        Ok(residual <= self.tolerance)
    }

    /// Dual-cone membership: `<psi, g> >= -tol` for every generator `g`.
    pub fn dual_contains(&self, psi: &[f64]) -> Result<bool> {
        if self.generators.is_empty() {
            return Err(Error::UnsupportedRepresentation(
                "dual membership needs a generator list",
            ));
        }
        check_dim(self.dim, psi.len())?;
        Ok(self
            .generators
            .iter()
            .all(|g| dot(psi, g) >= -self.tolerance))
    }

    /// `a <=_K b`, i.e. `b - a ∈ K`.
    pub fn order_leq(&self, a: &[f64], b: &[f64]) -> Result<bool> {
        check_dim(self.dim, a.len())?;
        check_dim(self.dim, b.len())?;
        let diff: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        self.contains(&diff)
    }

    /// Strict order: `b - a` in the interior of `K`. Needs half-spaces.
    pub fn order_strict(&self, a: &[f64], b: &[f64]) -> Result<bool> {
        let hs = self
            .halfspaces
            .as_ref()
            .ok_or(Error::UnsupportedRepresentation(
                "strict order needs a half-space list",
            ))?;
        check_dim(self.dim, a.len())?;
        check_dim(self.dim, b.len())?;
        let diff: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        Ok(hs.iter().all(|h| dot(h, &diff) > self.tolerance))
    }
}

/// A unit-norm scalarization direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    coords: Vec<f64>,
    #[serde(default)]
    dual_checked: bool,
}

impl WeightVector {
    /// Normalizes `v` to unit ℓ2 norm. Rejects the zero vector.
    pub fn normalize(v: &[f64]) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::InvalidArgument("empty weight vector".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        let n = norm2(v);
        if n == 0.0 {
            return Err(Error::InvalidArgument("zero weight vector".into()));
        }
        let mut coords: Vec<f64> = v.iter().map(|x| x / n).collect();
        // A second pass pulls the norm to within a few ulps of one.
        let n2 = norm2(&coords);
        if (n2 - 1.0).abs() > f64::EPSILON {
            coords.iter_mut().for_each(|x| *x /= n2);
        }
        Ok(Self {
            coords,
            dual_checked: false,
        })
    }

    /// Accepts `coords` as-is if it already has unit norm.
    pub fn from_unit(coords: Vec<f64>) -> Result<Self> {
        let n = norm2(&coords);
        if (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "weight norm {n} is not 1 within {UNIT_NORM_TOLERANCE}"
            )));
        }
        Ok(Self {
            coords,
            dual_checked: false,
        })
    }

    /// Marks the weight valid for `cone` after checking dual membership.
    pub fn validated_for(mut self, cone: &PolyhedralCone) -> Result<Self> {
        if !cone.dual_contains(&self.coords)? {
            return Err(Error::InvalidArgument(
                "weight is not in the dual cone".into(),
            ));
        }
        self.dual_checked = true;
        Ok(self)
    }

    pub fn is_dual_checked(&self) -> bool {
        self.dual_checked
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// `<psi, u>`.
    pub fn scalarize(&self, u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        Ok(dot(&self.coords, u))
    }
}

/// Nonnegative least squares (Lawson–Hanson active set).
///
/// Minimizes `‖Σ λ_j c_j − target‖₂` over `λ ≥ 0`. Returns the coefficients
/// and the residual norm.
pub(crate) fn nnls(columns: &[Vec<f64>], target: &[f64]) -> (Vec<f64>, f64) {
    let n = columns.len();
    let scale = columns
        .iter()
        .flatten()
        .chain(target)
        .fold(1.0f64, |m, x| m.max(x.abs()));
    let grad_tol = 1e-13 * scale * scale;

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = target.to_vec();
        for (c, &xj) in columns.iter().zip(x) {
            if xj != 0.0 {
                r.iter_mut().zip(c).for_each(|(ri, ci)| *ri -= xj * ci);
            }
        }
        r
    };

    for _ in 0..(3 * n + 10) {
        let r = residual(&x);
        let best = (0..n)
            .filter(|&j| !passive[j])
            .map(|j| (j, dot(&columns[j], &r)))
            .filter(|&(_, w)| w > grad_tol)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((j, _)) = best else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let sub: Vec<&[f64]> = idx.iter().map(|&i| columns[i].as_slice()).collect();
            let s_sub = least_squares(&sub, target);
            let mut s = vec![0.0; n];
            for (&i, &v) in idx.iter().zip(&s_sub) {
                s[i] = v;
            }
            if idx.iter().all(|&i| s[i] > 0.0) {
                x = s;
                break;
            }
            let alpha = idx
                .iter()
                .filter(|&&i| s[i] <= 0.0)
                .map(|&i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            for i in 0..n {
                x[i] += alpha * (s[i] - x[i]);
            }
            for &i in &idx {
                if x[i] <= 1e-15 * scale {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    let r = residual(&x);
    (x, norm2(&r))
}

/// Least squares over the given columns by modified Gram–Schmidt.
/// Numerically dependent columns get a zero coefficient.
fn least_squares(columns: &[&[f64]], target: &[f64]) -> Vec<f64> {
    let k = columns.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut r = vec![vec![0.0; k]; k];
    let mut keep = vec![true; k];
    for j in 0..k {
        let mut v = columns[j].to_vec();
        let orig = norm2(&v);
        for (i, qi) in q.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            let c = dot(qi, &v);
            r[i][j] = c;
            v.iter_mut().zip(qi).for_each(|(vi, qv)| *vi -= c * qv);
        }
        let nv = norm2(&v);
        if nv <= 1e-12 * orig.max(f64::MIN_POSITIVE) {
            keep[j] = false;
            q.push(vec![0.0; v.len()]);
        } else {
            r[j][j] = nv;
            q.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    let qtb: Vec<f64> = q.iter().map(|qi| dot(qi, target)).collect();
    let mut coef = vec![0.0; k];
    for j in (0..k).rev() {
        if !keep[j] {
            continue;
        }
        let mut acc = qtb[j];
        for l in (j + 1)..k {
            if keep[l] {
                acc -= r[j][l] * coef[l];
            }
        }
        coef[j] = acc / r[j][j];
    }
    coef
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn normalized_weights_have_unit_norm(v in prop::collection::vec(-1e3f64..1e3, 1..8)) {
            prop_assume!(v.iter().any(|x| x.abs() > 1e-6));
            let w = WeightVector::normalize(&v).unwrap();
            let n = norm2(w.coords());
            prop_assert!((n - 1.0).abs() <= UNIT_NORM_TOLERANCE);
            let again = WeightVector::normalize(w.coords()).unwrap();
            for (a, b) in again.coords().iter().zip(w.coords()) {
                prop_assert!((a - b).abs() <= 1e-15);
            }
        }

        #[test]
        fn representations_agree_on_orthant(v in prop::collection::vec(-2.0f64..2.0, 4)) {
            let k = PolyhedralCone::orthant(4).unwrap();
            prop_assert_eq!(
                k.contains_via_generators(&v).unwrap(),
                k.contains_via_halfspaces(&v).unwrap()
            );
        }

        #[test]
        fn representations_agree_on_wedge(x in -3.0f64..3.0, y in -3.0f64..3.0, t in 0.1f64..4.0) {
            // cone{(1,0),(t,1)} = {x2 >= 0, x1 - t x2 >= 0}
            let k = PolyhedralCone::new(
                2,
                vec![vec![1.0, 0.0], vec![t, 1.0]],
                Some(vec![vec![0.0, 1.0], vec![1.0, -t]]),
            ).unwrap();
            let v = [x, y];
            // skip points within rounding distance of a facet
            prop_assume!(y.abs() > 1e-6 && (x - t * y).abs() > 1e-6);
            prop_assert_eq!(
                k.contains_via_generators(&v).unwrap(),
                k.contains_via_halfspaces(&v).unwrap()
            );
        }
    }
}
