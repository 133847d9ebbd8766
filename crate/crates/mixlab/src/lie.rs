//! Lie-theoretic kernels for SL2(R): Cartan decomposition, adjoint action,
//! the operator norm on Ad, the Cartan pseudo-distance, and closed-form
//! exponentials of sl2.
//!
//! The inner product on sl2 is <X, Y> = tr(X Y^t) throughout, so in the
//! ordered basis (H, E, F) the squared norm of (h, e, f) is 2h^2 + e^2 + f^2.

use crate::error::{MixError, Result};
use serde::{Deserialize, Serialize};

/// Determinant drift tolerated before repair fails.
pub const DET_TOL: f64 = 1e-9;

/// A real 2x2 unimodular matrix, an element of G = SL2(R).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupElement {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl GroupElement {
    /// Construct from entries; rescales by det^{-1/2} to repair rounding
    /// drift and rejects anything farther than `DET_TOL` from det = 1.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(MixError::InvalidInput("non-finite matrix entry".into()));
        }
        let det = a * d - b * c;
        // Rounding drift in a product scales with the squared entry size,
        // so the tolerance does too.
        let scale = 1.0 + a * a + b * b + c * c + d * d;
        if (det - 1.0).abs() > DET_TOL * scale {
            return Err(MixError::InvalidInput(format!(
                "matrix is not unimodular: det = {det}"
            )));
        }
        let s = det.sqrt().recip();
        Ok(Self {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
        })
    }

    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// diag(lambda, 1/lambda); lambda != 0.
    pub fn diagonal(lambda: f64) -> Self {
        Self { a: lambda, b: 0.0, c: 0.0, d: 1.0 / lambda }
    }

    /// Geodesic one-parameter element diag(e^t, e^{-t}).
    pub fn geodesic(t: f64) -> Self {
        Self::diagonal(t.exp())
    }

    /// Rotation by theta: [[cos, -sin], [sin, cos]].
    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { a: c, b: -s, c: s, d: c }
    }

    /// Upper unipotent [[1, t], [0, 1]].
    pub fn upper(t: f64) -> Self {
        Self { a: 1.0, b: t, c: 0.0, d: 1.0 }
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn transpose(&self) -> Self {
        Self { a: self.a, b: self.c, c: self.b, d: self.d }
    }

    pub fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        GroupElement::new(
            self.a * rhs.a + self.b * rhs.c,
            self.a * rhs.b + self.b * rhs.d,
            self.c * rhs.a + self.d * rhs.c,
            self.c * rhs.b + self.d * rhs.d,
        )
    }

    /// Maximal entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let x = self.entries();
        let y = other.entries();
        x.iter()
            .zip(y.iter())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }
}

impl std::ops::Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: GroupElement) -> GroupElement {
        self.checked_mul(&rhs).expect("unimodularity drift beyond tolerance")
    }
}

/// An element of sl2 in the ordered basis (H, E, F) with
/// H = diag(1, -1), E = [[0,1],[0,0]], F = [[0,0],[1,0]].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LieVector {
    pub h: f64,
    pub e: f64,
    pub f: f64,
}

impl LieVector {
    pub const H: LieVector = LieVector { h: 1.0, e: 0.0, f: 0.0 };
    pub const E: LieVector = LieVector { h: 0.0, e: 1.0, f: 0.0 };
    pub const F: LieVector = LieVector { h: 0.0, e: 0.0, f: 1.0 };

    pub fn new(h: f64, e: f64, f: f64) -> Self {
        Self { h, e, f }
    }

    /// Norm induced by tr(X Y^t): ||H|| = sqrt(2), ||E|| = ||F|| = 1.
    pub fn norm(&self) -> f64 {
        (2.0 * self.h * self.h + self.e * self.e + self.f * self.f).sqrt()
    }

    /// Frobenius norm of the matrix representative; identical to `norm`.
    pub fn frobenius_norm(&self) -> f64 {
        self.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { h: s * self.h, e: s * self.e, f: s * self.f }
    }

    /// Matrix entries [[h, e], [f, -h]].
    pub fn to_matrix(self) -> [f64; 4] {
        [self.h, self.e, self.f, -self.h]
    }

    /// True when the matrix is nilpotent: h^2 + e f = 0 (up to tolerance).
    pub fn is_nilpotent(&self, tol: f64) -> bool {
        (self.h * self.h + self.e * self.f).abs() <= tol * (1.0 + self.norm() * self.norm())
    }
}

/// The K A+ K factorization g = k1 * diag(sigma, 1/sigma) * k2 with
/// sigma >= 1 and k1, k2 rotations.
#[derive(Debug, Clone, Copy)]
pub struct CartanTriple {
    pub k1: GroupElement,
    pub sigma: f64,
    pub k2: GroupElement,
}

impl CartanTriple {
    pub fn recompose(&self) -> GroupElement {
        self.k1 * GroupElement::diagonal(self.sigma) * self.k2
    }
}

/// Cartan decomposition via closed-form eigendecomposition of g g^t.
///
/// Ties sigma = 1 (g already a rotation) resolve to (g, 1, I).
pub fn cartan_decompose(g: &GroupElement) -> Result<CartanTriple> {
    let [a, b, c, d] = g.entries();
    // s = g g^t is symmetric positive definite with det 1.
    let s11 = a * a + b * b;
    let s12 = a * c + b * d;
    let s22 = c * c + d * d;
    let tr = s11 + s22;
    let disc = (tr * tr - 4.0).max(0.0);
    if tr <= 2.0 + 1e-12 {
        // g g^t = I: g itself is orthogonal with det 1.
        return Ok(CartanTriple { k1: *g, sigma: 1.0, k2: GroupElement::identity() });
    }
    let lambda1 = 0.5 * (tr + disc.sqrt());
    let sigma = lambda1.sqrt();
    // Eigenvector of s for lambda1; pick the formula with the larger norm.
    let v1 = (s12, lambda1 - s11);
    let v2 = (lambda1 - s22, s12);
    let (mut vx, mut vy) = if v1.0 * v1.0 + v1.1 * v1.1 >= v2.0 * v2.0 + v2.1 * v2.1 {
        v1
    } else {
        v2
    };
    let n = (vx * vx + vy * vy).sqrt();
    vx /= n;
    vy /= n;
    let k1 = GroupElement::new(vx, -vy, vy, vx)?;
    // k2 = a^{-1} k1^t g.
    let k2 = GroupElement::diagonal(1.0 / sigma) * k1.transpose() * *g;
    Ok(CartanTriple { k1, sigma, k2 })
}

/// The largest singular value of g; equals the Cartan projection entry.
pub fn cartan_sigma(g: &GroupElement) -> Result<f64> {
    Ok(cartan_decompose(g)?.sigma)
}

/// The matrix of Ad(g) on sl2 in the ordered basis (H, E, F), rows first.
pub fn ad_matrix(g: &GroupElement) -> [[f64; 3]; 3] {
    let [a, b, c, d] = g.entries();
    [
        [a * d + b * c, -a * c, b * d],
        [-2.0 * a * b, a * a, -b * b],
        [2.0 * c * d, -c * c, d * d],
    ]
}

/// Ad(g) applied to a Lie vector.
pub fn ad_apply(g: &GroupElement, z: &LieVector) -> LieVector {
    let m = ad_matrix(g);
    LieVector {
        h: m[0][0] * z.h + m[0][1] * z.e + m[0][2] * z.f,
        e: m[1][0] * z.h + m[1][1] * z.e + m[1][2] * z.f,
        f: m[2][0] * z.h + m[2][1] * z.e + m[2][2] * z.f,
    }
}

/// Largest eigenvalue of a symmetric 3x3 matrix, closed trigonometric form.
fn sym3_eigmax(m: &[[f64; 3]; 3]) -> f64 {
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let mut p2 = 0.0;
    for (i, row) in m.iter().enumerate() {
        for (j, &e) in row.iter().enumerate() {
            let v = if i == j { e - q } else { e };
            p2 += v * v;
        }
    }
    let p = (p2 / 6.0).sqrt();
    if p < 1e-300 {
        return q;
    }
    // b = (m - q I) / p; r = det(b) / 2 in [-1, 1].
    let b: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|j| (m[i][j] - if i == j { q } else { 0.0 }) / p)
                .collect()
        })
        .collect();
    let det = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    q + 2.0 * p * phi.cos()
}

/// Operator norm of g: the largest stretch of Ad(g) on sl2 with respect to
/// the tr(X Y^t) metric. Computed from the 3x3 adjoint matrix expressed in
/// an orthonormal basis; the Cartan route sigma(g)^2 is kept as an
/// independent oracle in the tests.
pub fn op_norm(g: &GroupElement) -> f64 {
    let a = ad_matrix(g);
    // Conjugate into the orthonormal basis (H/sqrt2, E, F):
    // b = W a W^{-1} with W = diag(sqrt2, 1, 1).
    let s2 = std::f64::consts::SQRT_2;
    let w = [s2, 1.0, 1.0];
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = w[i] * a[i][j] / w[j];
        }
    }
    let mut btb = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            btb[i][j] = (0..3).map(|k| b[k][i] * b[k][j]).sum();
        }
    }
    sym3_eigmax(&btb).max(1.0).sqrt()
}

/// Cartan-projection pseudo-distance ||log a_{g^{-1} h}|| = sqrt2 log sigma.
///
/// Symmetric, left-invariant, bi-K-invariant; vanishes exactly when
/// g^{-1} h is a rotation (a semi-metric on G, a metric on G/K).
pub fn cartan_distance(g: &GroupElement, h: &GroupElement) -> Result<f64> {
    let u = g.inverse().checked_mul(h)?;
    let sigma = cartan_sigma(&u)?;
    Ok(std::f64::consts::SQRT_2 * sigma.ln())
}

/// Closed-form matrix exponential of sl2.
///
/// X^2 = (h^2 + e f) I by Cayley-Hamilton, so exp X = c I + s X with the
/// cosh/sinh, cos/sin, or terminating-series branch depending on the sign.
pub fn exp_sl2(x: &LieVector) -> Result<GroupElement> {
    if !(x.h.is_finite() && x.e.is_finite() && x.f.is_finite()) {
        return Err(MixError::InvalidInput("non-finite Lie coefficients".into()));
    }
    let delta = x.h * x.h + x.e * x.f;
    let (c, s) = if delta.abs() < 1e-8 {
        // Series in delta; covers the nilpotent branch exactly at delta = 0.
        (
            1.0 + delta / 2.0 + delta * delta / 24.0,
            1.0 + delta / 6.0 + delta * delta / 120.0,
        )
    } else if delta > 0.0 {
        let r = delta.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-delta).sqrt();
        (r.cos(), r.sin() / r)
    };
    let g = GroupElement::new(c + s * x.h, s * x.e, s * x.f, c - s * x.h)?;
    debug_assert!({
        let [a, b, cc, d] = g.entries();
        (a * d - b * cc - 1.0).abs() < 1e-10 * (1.0 + g.frobenius_norm().powi(2))
    });
    Ok(g)
}

/// Separation statistics of a k-tuple:
/// (M_hat, q, Q) = (exp min pairwise Cartan distance,
///                  min pairwise op norm, max pairwise op norm).
pub fn separation_stats(elements: &[GroupElement]) -> Result<(f64, f64, f64)> {
    if elements.len() < 2 {
        return Err(MixError::InvalidInput(
            "separation statistics need at least two elements".into(),
        ));
    }
    let mut min_dist = f64::INFINITY;
    let mut q = f64::INFINITY;
    let mut qq = f64::NEG_INFINITY;
    for i in 0..elements.len() {
        for j in 0..elements.len() {
            if i == j {
                continue;
            }
            let u = elements[i].inverse().checked_mul(&elements[j])?;
            let n = op_norm(&u);
            q = q.min(n);
            qq = qq.max(n);
            min_dist = min_dist.min(cartan_distance(&elements[i], &elements[j])?);
        }
    }
    Ok((min_dist.exp(), q, qq))
}

/// Sampling helpers shared by the experiment modules and the kernels.
pub mod sample {
    use super::*;
    use rand::Rng;

    pub fn random_rotation<R: Rng>(rng: &mut R) -> GroupElement {
        GroupElement::rotation(rng.gen::<f64>() * std::f64::consts::TAU)
    }

    /// Random unimodular matrix with heavy-tailed entries (clipped Cauchy),
    /// normalized to det 1.
    pub fn random_unimodular<R: Rng>(rng: &mut R) -> GroupElement {
        loop {
            let mut e = [0.0f64; 4];
            for v in e.iter_mut() {
                let u: f64 = rng.gen::<f64>() - 0.5;
                *v = (std::f64::consts::PI * u).tan().clamp(-50.0, 50.0);
            }
            let det = e[0] * e[3] - e[1] * e[2];
            if det.abs() < 0.05 {
                continue;
            }
            let (a, b) = if det < 0.0 { (e[1], e[0]) } else { (e[0], e[1]) };
            let (c, d) = if det < 0.0 { (e[3], e[2]) } else { (e[2], e[3]) };
            let s = det.abs().sqrt().recip();
            if let Ok(g) = GroupElement::new(a * s, b * s, c * s, d * s) {
                return g;
            }
        }
    }

    /// Random nilpotent element: a conjugate of t E with t log-uniform in
    /// [t_min, t_max], conjugated by a random rotation and a bounded
    /// diagonal.
    pub fn random_nilpotent<R: Rng>(rng: &mut R, t_min: f64, t_max: f64) -> LieVector {
        let t = (rng.gen::<f64>() * (t_max.ln() - t_min.ln()) + t_min.ln()).exp();
        let k = random_rotation(rng);
        let a = GroupElement::diagonal((rng.gen::<f64>() * 2.0 - 1.0).exp());
        let g = k * a;
        ad_apply(&g, &LieVector::E.scale(t))
    }
}
