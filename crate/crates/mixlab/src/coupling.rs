//! Flow construction along nilpotent directions, the time-averaging
//! operator P_T, the E_T statistic, dictionary Wasserstein semi-distances,
//! the three-term coupling decomposition, and the pigeonhole (p, T)
//! scheduler.

use crate::error::{MixError, Result};
use crate::homspace::{self, haar_point, XPoint};
use crate::lie::{ad_apply, cartan_decompose, exp_sl2, op_norm, GroupElement, LieVector};
use crate::testfn::TestFn;
use crate::util::{gauss_legendre, mean_stderr, par_map_indexed};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Nodes for the deterministic time average; an odd high-order rule keeps
/// P_T a fixed linear operator with no Monte Carlo noise of its own.
const TIME_NODES: usize = 257;

fn time_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(TIME_NODES))
}

/// The flow data of a k-tuple: unit-normalized nilpotent directions Z_j
/// with weights w_j = ||Z_j||, relabeled so the weights descend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSpec {
    pub z: Vec<LieVector>,
    pub w: Vec<f64>,
    pub source: Vec<GroupElement>,
    /// Position of the anchor element after relabeling.
    pub s_index: usize,
}

impl FlowSpec {
    pub fn k(&self) -> usize {
        self.z.len()
    }
}

/// Builds the flow directions for a tuple of group elements.
///
/// Selects the pair (i1, s) achieving the maximal pairwise operator norm Q
/// (lexicographic tie-break), takes Z as the image of E under the inverse
/// right Cartan rotation of g_{i1}^{-1} g_s, and sets
/// Z_j = Ad(g_j^{-1} g_s) Z normalized so the largest weight is 1.
pub fn build_flow(g_list: &[GroupElement]) -> Result<FlowSpec> {
    let k = g_list.len();
    if k < 2 {
        return Err(MixError::InvalidInput("flow needs at least two elements".into()));
    }
    let mut best = (0usize, 0usize, f64::NEG_INFINITY);
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let n = op_norm(&g_list[i].inverse().checked_mul(&g_list[j])?);
            if n > best.2 {
                best = (i, j, n);
            }
        }
    }
    let (i1, s, q_big) = best;
    if q_big <= 1.0 + 1e-9 {
        return Err(MixError::DegenerateTuple(format!(
            "max pairwise operator norm {q_big} leaves no contracting direction"
        )));
    }
    let anchor = g_list[i1].inverse().checked_mul(&g_list[s])?;
    let triple = cartan_decompose(&anchor)?;
    let z0 = ad_apply(&triple.k2.inverse(), &LieVector::E);
    let raw: Vec<LieVector> = g_list
        .iter()
        .map(|g| Ok(ad_apply(&g.inverse().checked_mul(&g_list[s])?, &z0)))
        .collect::<Result<_>>()?;
    let scale = raw[i1].norm();
    debug_assert!((scale - q_big).abs() < 1e-6 * q_big);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| raw[b].norm().total_cmp(&raw[a].norm()));
    let z: Vec<LieVector> = order.iter().map(|&i| raw[i].scale(1.0 / scale)).collect();
    let w: Vec<f64> = z.iter().map(|v| v.norm()).collect();
    let source: Vec<GroupElement> = order.iter().map(|&i| g_list[i]).collect();
    let s_index = order.iter().position(|&i| i == s).expect("anchor survives relabeling");
    Ok(FlowSpec { z, w, source, s_index })
}

/// The j-th one-parameter flow applied to a point: exp(t Z_j) . p.
/// j is a zero-based index into the relabeled directions.
pub fn flow_apply(spec: &FlowSpec, j: usize, t: f64, p: &XPoint) -> Result<XPoint> {
    let g = exp_sl2(&spec.z[j].scale(t))?;
    homspace::act(&g, p)
}

/// Deterministic time average (P_T f)(p) over t in [-T, T] along flow j,
/// by the fixed 257-node rule. Linear, positive, unital by construction.
pub fn time_average(f: &TestFn, t_big: f64, spec: &FlowSpec, j: usize, p: &XPoint) -> Result<f64> {
    if t_big <= 0.0 {
        return Err(MixError::InvalidInput("time horizon must be positive".into()));
    }
    let mut acc = 0.0;
    for &(x, w) in time_rule() {
        acc += w * f.eval(&flow_apply(spec, j, t_big * x, p)?)?;
    }
    // Rule weights sum to 2 = the normalized length of [-T, T].
    Ok(acc / 2.0)
}

/// Monte Carlo variant of the time average with t uniform in [-T, T].
pub fn time_average_mc(
    f: &TestFn,
    t_big: f64,
    spec: &FlowSpec,
    j: usize,
    samples: u64,
    seed: u64,
    p: &XPoint,
) -> Result<(f64, f64)> {
    use rand::Rng;
    if t_big <= 0.0 || samples == 0 {
        return Err(MixError::InvalidInput("need T > 0 and samples >= 1".into()));
    }
    let values: Vec<Result<f64>> = par_map_indexed(samples, |i| {
        let mut rng = crate::rng::stream_rng(seed, 0x5054_4d43, i);
        let t = (rng.gen::<f64>() * 2.0 - 1.0) * t_big;
        f.eval(&flow_apply(spec, j, t, p)?)
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(mean_stderr(&values))
}

/// A deterministic sampler of points of X.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PointSampler {
    /// i.i.d. Haar.
    Haar { seed: u64 },
    /// Haar pushed forward by a fixed translation.
    Pushforward { seed: u64, g: GroupElement },
    /// Point mass.
    Fixed(XPoint),
}

impl PointSampler {
    pub fn point(&self, index: u64) -> Result<XPoint> {
        match self {
            PointSampler::Haar { seed } => Ok(haar_point(*seed, index)),
            PointSampler::Pushforward { seed, g } => homspace::act(g, &haar_point(*seed, index)),
            PointSampler::Fixed(p) => Ok(*p),
        }
    }
}

/// A deterministic sampler of pairs (a 2-coupling).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PairSampler {
    /// Independent product of two point samplers.
    Product(PointSampler, PointSampler),
    /// Diagonal Haar sample pushed by a pair of translations:
    /// x -> (left . x, right . x).
    Diagonal { seed: u64, left: GroupElement, right: GroupElement },
}

impl PairSampler {
    pub fn pair(&self, index: u64) -> Result<(XPoint, XPoint)> {
        match self {
            PairSampler::Product(a, b) => Ok((a.point(index)?, b.point(index)?)),
            PairSampler::Diagonal { seed, left, right } => {
                let x = haar_point(*seed, index);
                Ok((homspace::act(left, &x)?, homspace::act(right, &x)?))
            }
        }
    }

    /// The two marginal samplers (exact by construction).
    pub fn marginals(&self) -> (PointSampler, PointSampler) {
        match self {
            PairSampler::Product(a, b) => (a.clone(), b.clone()),
            PairSampler::Diagonal { seed, left, right } => (
                PointSampler::Pushforward { seed: *seed, g: *left },
                PointSampler::Pushforward { seed: *seed, g: *right },
            ),
        }
    }
}

/// A finite test-function dictionary with cached norms; suprema over it
/// are certified lower bounds for the unit-ball suprema.
#[derive(Debug, Clone)]
pub struct Dictionary {
    entries: Vec<(TestFn, f64)>,
}

impl Dictionary {
    pub fn new(entries: Vec<(TestFn, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(MixError::InvalidInput("empty dictionary".into()));
        }
        for (_, n) in &entries {
            if !(n.is_finite() && *n > 0.0) {
                return Err(MixError::InvalidInput(format!("bad cached norm {n}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Norm-rescaled evaluation of entry e.
    fn eval(&self, e: usize, p: &XPoint) -> Result<f64> {
        let (f, n) = &self.entries[e];
        Ok(f.eval(p)? / n)
    }

    /// Uniformly rescale every cached norm by a factor.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Dictionary::new(self.entries.iter().map(|(f, n)| (f.clone(), n * factor)).collect())
    }
}

/// A dictionary of elementary product functions phi (x) psi on X x X with
/// cached projective norms.
#[derive(Debug, Clone)]
pub struct PairDictionary {
    entries: Vec<(TestFn, TestFn, f64)>,
}

impl PairDictionary {
    pub fn new(entries: Vec<(TestFn, TestFn, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(MixError::InvalidInput("empty dictionary".into()));
        }
        for (_, _, n) in &entries {
            if !(n.is_finite() && *n > 0.0) {
                return Err(MixError::InvalidInput(format!("bad cached norm {n}")));
            }
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn max_abs_with_stderr(diffs: Vec<(f64, f64)>) -> (f64, f64) {
    let mut best = (0.0f64, 0.0f64);
    for (d, se) in diffs {
        if d.abs() > best.0 {
            best = (d.abs(), se);
        }
    }
    best
}

/// Dictionary Wasserstein estimate max_phi |mu(phi) - nu(phi)| with the
/// standard error of the maximizing difference.
pub fn wasserstein(
    mu: &PointSampler,
    nu: &PointSampler,
    dict: &Dictionary,
    samples: u64,
) -> Result<(f64, f64)> {
    let mut diffs = Vec::with_capacity(dict.len());
    for e in 0..dict.len() {
        let values: Vec<Result<f64>> =
            par_map_indexed(samples, |i| Ok(dict.eval(e, &mu.point(i)?)? - dict.eval(e, &nu.point(i)?)?));
        let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
        diffs.push(mean_stderr(&values));
    }
    Ok(max_abs_with_stderr(diffs))
}

/// Pair-measure version over a product dictionary, optionally applying
/// P_T along flow j in the first factor of either argument.
fn wasserstein_pair_averaged(
    eta: &PairSampler,
    zeta: &PairSampler,
    dict: &PairDictionary,
    samples: u64,
    smooth_eta: Option<(&FlowSpec, usize, f64)>,
    smooth_zeta: Option<(&FlowSpec, usize, f64)>,
) -> Result<(f64, f64)> {
    let mut diffs = Vec::with_capacity(dict.len());
    for e in 0..dict.len() {
        let (f, g, n) = &dict.entries[e];
        let values: Vec<Result<f64>> = par_map_indexed(samples, |i| {
            let (p1, p2) = eta.pair(i)?;
            let a = match smooth_eta {
                Some((spec, j, t)) => time_average(f, t, spec, j, &p1)? * g.eval(&p2)? / n,
                None => f.eval(&p1)? * g.eval(&p2)? / n,
            };
            let (q1, q2) = zeta.pair(i)?;
            let b = match smooth_zeta {
                Some((spec, j, t)) => time_average(f, t, spec, j, &q1)? * g.eval(&q2)? / n,
                None => f.eval(&q1)? * g.eval(&q2)? / n,
            };
            Ok(a - b)
        });
        let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
        diffs.push(mean_stderr(&values));
    }
    Ok(max_abs_with_stderr(diffs))
}

/// Dictionary Wasserstein estimate between two pair measures.
pub fn wasserstein_pair(
    eta: &PairSampler,
    zeta: &PairSampler,
    dict: &PairDictionary,
    samples: u64,
) -> Result<(f64, f64)> {
    wasserstein_pair_averaged(eta, zeta, dict, samples, None, None)
}

/// E_T(nu): the dictionary maximum of the root mean square deviation of
/// P_T phi from nu(phi) under nu.
pub fn e_t_statistic(
    nu: &PointSampler,
    dict: &Dictionary,
    t_big: f64,
    spec: &FlowSpec,
    j: usize,
    samples: u64,
) -> Result<f64> {
    let mut best = 0.0f64;
    for e in 0..dict.len() {
        let rows: Vec<Result<(f64, f64)>> = par_map_indexed(samples, |i| {
            let p = nu.point(i)?;
            let (f, n) = &dict.entries[e];
            Ok((dict.eval(e, &p)?, time_average(f, t_big, spec, j, &p)? / n))
        });
        let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
        let mean: f64 = rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64;
        let msq: f64 =
            rows.iter().map(|r| (r.1 - mean) * (r.1 - mean)).sum::<f64>() / rows.len() as f64;
        best = best.max(msq.sqrt());
    }
    Ok(best)
}

/// The three-term decomposition of dist(eta, m (x) m) through the smoothed
/// coupling and the product of marginals, plus the direct estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreeTermReport {
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub stderr_i: f64,
    pub stderr_ii: f64,
    pub stderr_iii: f64,
    pub direct: f64,
    pub direct_stderr: f64,
    pub t_big: f64,
}

/// term_I = dist(eta, (P_T (x) id)* eta),
/// term_II = dist((P_T (x) id)* eta, eta_1 (x) eta_2),
/// term_III = dist(eta_1 (x) eta_2, m (x) m); their sum upper-bounds the
/// direct distance up to MC error by the triangle inequality.
#[allow(clippy::too_many_arguments)]
pub fn three_term_diagnostic(
    eta: &PairSampler,
    reference: &PairSampler,
    dict: &PairDictionary,
    t_big: f64,
    spec: &FlowSpec,
    j: usize,
    samples: u64,
) -> Result<ThreeTermReport> {
    let (m1, m2) = eta.marginals();
    // Decorrelate the marginal product from the coupled stream.
    let product = PairSampler::Product(reseed(&m1, 0x4d31), reseed(&m2, 0x4d32));
    let sm = Some((spec, j, t_big));
    let (term_i, stderr_i) = wasserstein_pair_averaged(eta, eta, dict, samples, None, sm)?;
    let (term_ii, stderr_ii) =
        wasserstein_pair_averaged(eta, &product, dict, samples, sm, None)?;
    let (term_iii, stderr_iii) =
        wasserstein_pair_averaged(&product, reference, dict, samples, None, None)?;
    let (direct, direct_stderr) = wasserstein_pair(eta, reference, dict, samples)?;
    Ok(ThreeTermReport {
        term_i,
        term_ii,
        term_iii,
        stderr_i,
        stderr_ii,
        stderr_iii,
        direct,
        direct_stderr,
        t_big,
    })
}

/// Derives an independent stream. The seed is mixed before the salt is
/// applied: with a plain `seed ^ salt` two (seed, salt) pairs whose XORs
/// coincide would collapse onto one stream and turn the product of
/// marginals into a diagonal coupling.
fn reseed(s: &PointSampler, salt: u64) -> PointSampler {
    let derive = |seed: &u64| crate::rng::splitmix64(crate::rng::splitmix64(*seed) ^ salt);
    match s {
        PointSampler::Haar { seed } => PointSampler::Haar { seed: derive(seed) },
        PointSampler::Pushforward { seed, g } => {
            PointSampler::Pushforward { seed: derive(seed), g: *g }
        }
        PointSampler::Fixed(p) => PointSampler::Fixed(*p),
    }
}

/// Input to the pigeonhole scheduler: descending weights with w_1 = 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchedulerInput {
    pub w: Vec<f64>,
    pub q: f64,
    pub tau: f64,
    pub a: f64,
}

impl SchedulerInput {
    pub fn new(w: Vec<f64>, q: f64, tau: f64, a: f64) -> Result<Self> {
        if w.len() < 2 {
            return Err(MixError::InvalidInput("need at least two weights".into()));
        }
        if (w[0] - 1.0).abs() > 1e-9 {
            return Err(MixError::InvalidInput("leading weight must be 1".into()));
        }
        for pair in w.windows(2) {
            if pair[1] > pair[0] + 1e-9 {
                return Err(MixError::InvalidInput("weights must descend".into()));
            }
        }
        if !(q >= 1.0 && q.is_finite()) {
            return Err(MixError::InvalidInput(format!("q = {q} must be >= 1")));
        }
        if !(tau > 0.0 && a > 0.0) {
            return Err(MixError::InvalidInput("tau and a must be positive".into()));
        }
        Ok(Self { w, q, tau, a })
    }

    pub fn k(&self) -> usize {
        self.w.len()
    }
}

/// Scheduler output: split index p (1-based: the gap separates w_p from
/// w_{p+1}), grid index i, the time scale T = q^{(i+1/2) delta}, delta.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SchedulerOutput {
    pub p: usize,
    pub i: usize,
    pub t_big: f64,
    pub delta: f64,
}

/// The geometric grid points q^{-i delta}, i = 0..k-1.
pub fn scheduler_grid(input: &SchedulerInput) -> Vec<f64> {
    let delta = scheduler_delta(input);
    (0..input.k()).map(|i| input.q.powf(-(i as f64) * delta)).collect()
}

pub fn scheduler_delta(input: &SchedulerInput) -> f64 {
    let k = input.k() as f64;
    (1.0 / k).min(1.0 / (2.0 * input.a * k)) * input.tau.min(1.0)
}

/// Finds the first grid gap [q^{-(i+1) delta}, q^{-i delta}] separating two
/// consecutive weights, scanning i then p ascending; T = q^{(i+1/2) delta}.
pub fn pigeonhole_schedule(input: &SchedulerInput) -> Result<SchedulerOutput> {
    let delta = scheduler_delta(input);
    let k = input.k();
    let tol = 1e-12;
    for i in 0..k - 1 {
        let hi = input.q.powf(-(i as f64) * delta);
        let lo = input.q.powf(-((i + 1) as f64) * delta);
        for p in 1..k {
            if input.w[p - 1] >= hi - tol && input.w[p] <= lo + tol {
                return Ok(SchedulerOutput {
                    p,
                    i,
                    t_big: input.q.powf((i as f64 + 0.5) * delta),
                    delta,
                });
            }
        }
    }
    Err(MixError::InvalidInput(
        "no grid gap separates consecutive weights; input outside the feasible region".into(),
    ))
}
