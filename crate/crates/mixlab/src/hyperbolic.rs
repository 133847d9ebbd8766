//! Upper half-plane geometry and the PSL2(Z) action: Mobius maps, the
//! hyperbolic distance, Gauss reduction into the standard fundamental
//! domain, and exact enumeration of lattice balls around i.

use crate::error::{MixError, Result};
use crate::lie::GroupElement;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// A point of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && y > 0.0) {
            return Err(MixError::InvalidInput(format!(
                "({x}, {y}) is not in the upper half-plane"
            )));
        }
        Ok(Self { x, y })
    }

    /// The base point i.
    pub fn i() -> Self {
        Self { x: 0.0, y: 1.0 }
    }
}

/// An integer matrix in PSL2(Z): det = 1 exactly, sign canonicalized so the
/// first nonzero entry of (a, b, c, d) is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LatticeElement {
    a: i64,
    b: i64,
    c: i64,
    d: i64,
}

impl LatticeElement {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        if a * d - b * c != 1 {
            return Err(MixError::InvalidInput(format!(
                "integer matrix [{a},{b};{c},{d}] has det != 1"
            )));
        }
        Ok(Self::canonical(a, b, c, d))
    }

    fn canonical(a: i64, b: i64, c: i64, d: i64) -> Self {
        let lead = [a, b, c, d].into_iter().find(|&v| v != 0).unwrap_or(0);
        if lead < 0 {
            Self { a: -a, b: -b, c: -c, d: -d }
        } else {
            Self { a, b, c, d }
        }
    }

    pub fn identity() -> Self {
        Self { a: 1, b: 0, c: 0, d: 1 }
    }

    /// T = [[1, 1], [0, 1]], the unit translation.
    pub fn t() -> Self {
        Self { a: 1, b: 1, c: 0, d: 1 }
    }

    /// T^n.
    pub fn t_pow(n: i64) -> Self {
        Self::canonical(1, n, 0, 1)
    }

    /// The inversion z -> -1/z (sign-canonical form of [[0, -1], [1, 0]]).
    pub fn s() -> Self {
        Self::canonical(0, -1, 1, 0)
    }

    pub fn entries(&self) -> [i64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        Self::canonical(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(self.d, -self.b, -self.c, self.a)
    }

    /// Sum of squared entries; cosh d(gamma i, i) = sum / 2.
    pub fn entry_norm_sq(&self) -> i64 {
        self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d
    }

    pub fn to_group(&self) -> GroupElement {
        GroupElement::new(self.a as f64, self.b as f64, self.c as f64, self.d as f64)
            .expect("integer det-1 matrix is unimodular")
    }
}

/// Mobius action z -> (a z + b) / (c z + d) for real det-1 entries.
pub fn mobius_entries(e: [f64; 4], z: &HPoint) -> HPoint {
    let [a, b, c, d] = e;
    let u = c * z.x + d;
    let v = c * z.y;
    let den = u * u + v * v;
    HPoint {
        x: ((a * z.x + b) * u + a * c * z.y * z.y) / den,
        y: z.y / den,
    }
}

/// Mobius action of a lattice element.
pub fn mobius_act(gamma: &LatticeElement, z: &HPoint) -> HPoint {
    let [a, b, c, d] = gamma.entries();
    mobius_entries([a as f64, b as f64, c as f64, d as f64], z)
}

/// Mobius action of a group element.
pub fn mobius_act_group(g: &GroupElement, z: &HPoint) -> HPoint {
    mobius_entries(g.entries(), z)
}

/// Hyperbolic distance: cosh d = 1 + |z - w|^2 / (2 Im z Im w).
pub fn hyp_dist(z: &HPoint, w: &HPoint) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    let c = 1.0 + (dx * dx + dy * dy) / (2.0 * z.y * w.y);
    c.max(1.0).acosh()
}

const REDUCE_CAP: usize = 10_000;

/// Gauss reduction into the standard fundamental domain
/// |Re z| <= 1/2, |z| >= 1. Returns (z0, gamma) with z0 = gamma z.
pub fn reduce_to_fundamental(z: &HPoint) -> Result<(HPoint, LatticeElement)> {
    let mut cur = *z;
    let mut gamma = LatticeElement::identity();
    for _ in 0..REDUCE_CAP {
        if cur.x.abs() > 0.5 + 1e-15 {
            let n = cur.x.round() as i64;
            cur.x -= n as f64;
            gamma = LatticeElement::t_pow(-n).mul(&gamma);
        }
        if cur.x * cur.x + cur.y * cur.y < 1.0 - 1e-12 {
            cur = mobius_act(&LatticeElement::s(), &cur);
            gamma = LatticeElement::s().mul(&gamma);
        } else if cur.x.abs() <= 0.5 + 1e-12 {
            return Ok((cur, gamma));
        }
    }
    Err(MixError::NumericDegeneracy(format!(
        "fundamental-domain reduction did not terminate for ({}, {})",
        z.x, z.y
    )))
}

/// Entry-norm budget for ball enumeration: 2 cosh R may not exceed this.
pub const BALL_NORM_BUDGET: f64 = 2.0e6;

/// All gamma in PSL2(Z) with d(gamma i, i) <= R, each exactly once,
/// sorted. Exhausts integer matrices with a^2+b^2+c^2+d^2 <= 2 cosh R.
pub fn enumerate_ball(radius: f64) -> Result<Vec<LatticeElement>> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(MixError::InvalidInput(format!("bad ball radius {radius}")));
    }
    let norm_bound = 2.0 * radius.cosh() + 1e-9;
    if norm_bound > BALL_NORM_BUDGET {
        return Err(MixError::BudgetExceeded(format!(
            "ball radius {radius} needs entry norm {norm_bound:.3e}"
        )));
    }
    let s_max = norm_bound.floor() as i64;
    let emax = (norm_bound.sqrt()).floor() as i64;
    let mut set = BTreeSet::new();
    for a in -emax..=emax {
        let ra = s_max - a * a;
        if ra < 0 {
            continue;
        }
        for b in -emax..=emax {
            let rb = ra - b * b;
            if rb < 0 {
                continue;
            }
            for c in -emax..=emax {
                let rc = rb - c * c;
                if rc < 0 {
                    continue;
                }
                // ad - bc = 1 pins d when a != 0; otherwise d is free up to
                // the norm bound.
                if a != 0 {
                    let num = 1 + b * c;
                    if num % a == 0 {
                        let d = num / a;
                        if d * d <= rc {
                            set.insert(LatticeElement::canonical(a, b, c, d));
                        }
                    }
                } else if b * c == -1 {
                    for d in -emax..=emax {
                        if d * d <= rc {
                            set.insert(LatticeElement::canonical(a, b, c, d));
                        }
                    }
                }
            }
        }
    }
    Ok(set.into_iter().collect())
}

/// Sorted unique orbit distances {d(gamma i, i)} up to R.
pub fn distance_set(radius: f64) -> Result<Vec<f64>> {
    let ball = enumerate_ball(radius)?;
    let sums: BTreeSet<i64> = ball.iter().map(|g| g.entry_norm_sq()).collect();
    Ok(sums
        .into_iter()
        .map(|s| (s as f64 / 2.0).max(1.0).acosh())
        .filter(|&d| d <= radius + 1e-9)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn translation_and_inversion_on_i() {
        let i = HPoint::i();
        let t = mobius_act(&LatticeElement::t(), &i);
        assert_relative_eq!(t.x, 1.0);
        assert_relative_eq!(t.y, 1.0);
        let s = mobius_act(&LatticeElement::s(), &i);
        assert_relative_eq!(s.x, 0.0);
        assert_relative_eq!(s.y, 1.0);
        let two_i = HPoint::new(0.0, 2.0).unwrap();
        let inv = mobius_act(&LatticeElement::s(), &two_i);
        assert_relative_eq!(inv.y, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn dist_examples() {
        let i = HPoint::i();
        let two_i = HPoint::new(0.0, 2.0).unwrap();
        assert_relative_eq!(hyp_dist(&i, &i), 0.0, epsilon = 1e-12);
        assert_relative_eq!(hyp_dist(&i, &two_i), 2f64.ln(), max_relative = 1e-12);
        // Symmetry under the group action.
        let g = LatticeElement::new(2, 1, 1, 1).unwrap();
        let a = hyp_dist(&i, &mobius_act(&g, &i));
        let b = hyp_dist(&mobius_act(&g.inverse(), &i), &i);
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn reduce_translation_only() {
        let z = HPoint::new(5.0, 1.0).unwrap();
        let (z0, gamma) = reduce_to_fundamental(&z).unwrap();
        assert_relative_eq!(z0.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(z0.y, 1.0, epsilon = 1e-12);
        assert_eq!(gamma.entries(), [1, -5, 0, 1]);
    }

    #[test]
    fn reduce_single_inversion() {
        let z = HPoint::new(0.0, 0.5).unwrap();
        let (z0, gamma) = reduce_to_fundamental(&z).unwrap();
        assert_relative_eq!(z0.y, 2.0, max_relative = 1e-12);
        assert_eq!(gamma, LatticeElement::s());
    }

    #[test]
    fn reduce_deep_point_lands_in_domain() {
        let z = HPoint::new(0.1, 0.1).unwrap();
        let (z0, gamma) = reduce_to_fundamental(&z).unwrap();
        assert!(z0.x.abs() <= 0.5 + 1e-12);
        assert!(z0.x * z0.x + z0.y * z0.y >= 1.0 - 1e-12);
        let back = mobius_act(&gamma, &z);
        assert_relative_eq!(back.x, z0.x, epsilon = 1e-9);
        assert_relative_eq!(back.y, z0.y, epsilon = 1e-9);
    }

    #[test]
    fn reduce_idempotent() {
        let z = HPoint::new(0.2, 1.4).unwrap();
        let (z0, gamma) = reduce_to_fundamental(&z).unwrap();
        assert_eq!(gamma, LatticeElement::identity());
        assert_relative_eq!(z0.x, z.x);
        assert_relative_eq!(z0.y, z.y);
    }

    #[test]
    fn ball_stabilizer_and_small_radii() {
        let b0 = enumerate_ball(0.0).unwrap();
        assert_eq!(b0.len(), 2); // I and S move i by 0
        assert!(b0.contains(&LatticeElement::identity()));
        assert!(b0.contains(&LatticeElement::s()));
        let bh = enumerate_ball(0.5).unwrap();
        assert_eq!(bh, b0);
    }

    #[test]
    fn ball_radius_one_adds_entry_sum_three() {
        let b = enumerate_ball(1.0).unwrap();
        for g in &b {
            assert!(g.entry_norm_sq() <= 3);
        }
        assert!(b.contains(&LatticeElement::t()));
        assert!(b.contains(&LatticeElement::t().inverse()));
        assert!(b.contains(&LatticeElement::new(1, 0, 1, 1).unwrap()));
        // sum-3 elements all satisfy d = arccosh(3/2)
        let d = hyp_dist(&mobius_act(&LatticeElement::t(), &HPoint::i()), &HPoint::i());
        assert_relative_eq!(d, 1.5f64.acosh(), max_relative = 1e-12);
    }

    #[test]
    fn distance_set_examples() {
        let d1 = distance_set(1.0).unwrap();
        assert_eq!(d1.len(), 2);
        assert_relative_eq!(d1[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(d1[1], 1.5f64.acosh(), max_relative = 1e-12);

        let d2 = distance_set(2.0).unwrap();
        let expect = [0.0, 1.5f64.acosh(), 3.0f64.acosh(), 3.5f64.acosh()];
        assert_eq!(d2.len(), expect.len());
        for (got, want) in d2.iter().zip(expect.iter()) {
            assert_relative_eq!(got, want, epsilon = 1e-10);
        }

        let d0 = distance_set(0.0).unwrap();
        assert_eq!(d0.len(), 1);
        assert_relative_eq!(d0[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ball_budget_error() {
        assert!(matches!(
            enumerate_ball(20.0),
            Err(crate::error::MixError::BudgetExceeded(_))
        ));
    }

    #[test]
    fn lattice_sign_canonical() {
        let g = LatticeElement::new(-1, 0, 0, -1).unwrap();
        assert_eq!(g, LatticeElement::identity());
        let h = LatticeElement::new(0, 1, -1, 0).unwrap();
        assert_eq!(h, LatticeElement::s());
    }
}
