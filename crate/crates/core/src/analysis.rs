//! Exact numerical checks of the identities behind the fair selection score.
//!
//! Every check enumerates a small finite instance completely, so each
//! comparison is an equality up to floating-point rounding.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{cross_entropy, softmax};

/// Largest slice the peer-expectation check will enumerate.
pub const MAX_PEER_SLICE: usize = 8;
pub const MAX_SUPPORT: usize = 32;
pub const MAX_GRID: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub diff: f64,
}

impl Comparison {
    fn new(lhs: f64, rhs: f64) -> Self {
        Comparison {
            lhs,
            rhs,
            diff: (lhs - rhs).abs(),
        }
    }
}

/// One member of the scored group: proxy probabilities and observed label.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerPoint {
    pub probs: Vec<f64>,
    pub label: usize,
}

/// Compares the sampled-pair peer loss, averaged over every admissible
/// `(i, i1 != i, i2)` with `x_i1` from `group` and `y_i2` from `other_labels`,
/// against the closed form `L(y_i, x_i) - gamma * E_{Y ~ other}[L(Y, x_i)]`.
pub fn peer_expectation_equivalence(group: &[PeerPoint], other_labels: &[usize], gamma: f64) -> Result<Comparison> {
    let (ns, no) = (group.len(), other_labels.len());
    if ns > MAX_PEER_SLICE || no > MAX_PEER_SLICE {
        return Err(Error::input(format!("slices of {ns} and {no} exceed {MAX_PEER_SLICE}")));
    }
    if ns < 2 || no == 0 {
        return Err(Error::input("need at least two points in the group and one peer label"));
    }
    let k = group[0].probs.len();
    if group.iter().any(|p| p.probs.len() != k || p.label >= k) || other_labels.iter().any(|&y| y >= k) {
        return Err(Error::input("inconsistent class count"));
    }
    let loss = |p: &PeerPoint, y: usize| cross_entropy(&p.probs, y);

    let mut lhs = 0.0;
    let mut combos = 0usize;
    for (i, pi) in group.iter().enumerate() {
        let own = loss(pi, pi.label)?;
        for (i1, p1) in group.iter().enumerate() {
            if i1 == i {
                continue;
            }
            for &y2 in other_labels {
                lhs += own - gamma * loss(p1, y2)?;
                combos += 1;
            }
        }
    }
    lhs /= combos as f64;

    let mut dist = vec![0.0; k];
    for &y in other_labels {
        dist[y] += 1.0 / no as f64;
    }
    let mut rhs = 0.0;
    for p in group {
        let mut peer = 0.0;
        for (j, w) in dist.iter().enumerate() {
            peer += w * loss(p, j)?;
        }
        rhs += loss(p, p.label)? - gamma * peer;
    }
    rhs /= ns as f64;
    Ok(Comparison::new(lhs, rhs))
}

/// A support point of the clean distribution with its proxy prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPoint {
    pub z: usize,
    pub s: usize,
    /// `P(X = x, Z = z, S = s)`.
    pub prob: f64,
    /// Proxy class probabilities at `x`.
    pub proxy: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionInstance {
    pub points: Vec<SupportPoint>,
    /// `theta_plus[s] = P(Y=1 | Z=0, S=s)`.
    pub theta_plus: [f64; 2],
    /// `theta_minus[s] = P(Y=0 | Z=1, S=s)`.
    pub theta_minus: [f64; 2],
}

impl DecompositionInstance {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() || self.points.len() > MAX_SUPPORT {
            return Err(Error::input(format!("support must have 1..={MAX_SUPPORT} points")));
        }
        if self.points.iter().any(|p| p.z > 1 || p.s > 1) {
            return Err(Error::input("decomposition needs binary z and s"));
        }
        let total: f64 = self.points.iter().map(|p| p.prob).sum();
        if self.points.iter().any(|p| !(p.prob >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::input("support probabilities must be non-negative and sum to 1"));
        }
        for t in self.theta_plus.iter().chain(&self.theta_minus) {
            if !(0.0..=1.0).contains(t) {
                return Err(Error::input(format!("flip rate {t} outside [0, 1]")));
            }
        }
        for s in 0..2 {
            if self.group_mass(s) <= 0.0 {
                return Err(Error::input(format!("group {s} has no mass")));
            }
        }
        Ok(())
    }

    /// `T^s_{ij} = P(Y=j | Z=i, S=s)`.
    pub fn flip(&self, s: usize, i: usize, j: usize) -> f64 {
        let off = if i == 0 { self.theta_plus[s] } else { self.theta_minus[s] };
        if i == j {
            1.0 - off
        } else {
            off
        }
    }

    /// `Delta_s = 1 - theta_s^- - theta_s^+`.
    pub fn delta(&self, s: usize) -> f64 {
        1.0 - self.theta_minus[s] - self.theta_plus[s]
    }

    fn group_mass(&self, s: usize) -> f64 {
        self.points.iter().filter(|p| p.s == s).map(|p| p.prob).sum()
    }

    /// Observed `P(Y=j | S=s)` implied by the flip table.
    pub fn observed_label_dist(&self, s: usize) -> [f64; 2] {
        let a = self.group_mass(s);
        let mut r = [0.0; 2];
        for p in self.points.iter().filter(|p| p.s == s) {
            for (j, rj) in r.iter_mut().enumerate() {
                *rj += p.prob * self.flip(s, p.z, j) / a;
            }
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub lhs: f64,
    /// Clean loss scaled by `Delta_s`.
    pub fair: f64,
    /// Noisy-loss penalty, including the diagonal flip correction.
    pub noisy: f64,
    /// The part of `noisy` carried by `theta` on correctly labelled cells.
    pub noisy_diagonal: f64,
    /// Penalty for the label-distribution gap between groups.
    pub disagreement: f64,
    pub diff: f64,
}

/// Expected biased peer objective against its three-term split.
///
/// The left side builds the observed distribution by pushing every clean
/// point through the flip table and enumerates it directly. The right side
/// works from per-cell loss masses `W_j^{is} = sum_{x in (i,s)} P(x) L_j(x)`.
pub fn decomposition_check(inst: &DecompositionInstance, gamma: f64) -> Result<Decomposition> {
    inst.validate()?;
    let losses: Vec<[f64; 2]> = inst
        .points
        .iter()
        .map(|p| Ok([cross_entropy(&p.proxy, 0)?, cross_entropy(&p.proxy, 1)?]))
        .collect::<Result<_>>()?;

    // observed joint P(Y=j, S=s), enumerated over the biased distribution
    let mut joint = [[0.0; 2]; 2];
    for p in &inst.points {
        for (j, slot) in joint[p.s].iter_mut().enumerate() {
            *slot += p.prob * inst.flip(p.s, p.z, j);
        }
    }
    let peer_dist = |s: usize| {
        let mass = joint[s][0] + joint[s][1];
        [joint[s][0] / mass, joint[s][1] / mass]
    };
    let mut lhs = 0.0;
    for (p, l) in inst.points.iter().zip(&losses) {
        let other = peer_dist(1 - p.s);
        let peer = other[0] * l[0] + other[1] * l[1];
        for y in 0..2 {
            lhs += p.prob * inst.flip(p.s, p.z, y) * (l[y] - gamma * peer);
        }
    }

    // w[i][s][j]: loss mass of label j over clean cell (i, s)
    let mut w = [[[0.0; 2]; 2]; 2];
    for (p, l) in inst.points.iter().zip(&losses) {
        for j in 0..2 {
            w[p.z][p.s][j] += p.prob * l[j];
        }
    }
    let r = [inst.observed_label_dist(0), inst.observed_label_dist(1)];
    let u = |s: usize, i: usize, j: usize| if i == j { 0.0 } else { inst.flip(s, i, j) };

    let mut fair = 0.0;
    let mut noisy = 0.0;
    let mut noisy_diagonal = 0.0;
    for s in 0..2 {
        for i in 0..2 {
            fair += inst.delta(s) * w[i][s][i];
            for j in 0..2 {
                noisy += (u(s, i, j) - gamma * r[s][j]) * w[i][s][j];
            }
        }
        noisy_diagonal += inst.theta_minus[s] * w[0][s][0] + inst.theta_plus[s] * w[1][s][1];
    }
    noisy += noisy_diagonal;
    let mut disagreement = 0.0;
    for j in 0..2 {
        let n1 = w[0][1][j] + w[1][1][j];
        let n0 = w[0][0][j] + w[1][0][j];
        disagreement -= gamma * (r[0][j] - r[1][j]) * (n1 - n0);
    }
    let total = fair + noisy + disagreement;
    Ok(Decomposition {
        lhs,
        fair,
        noisy,
        noisy_diagonal,
        disagreement,
        diff: (lhs - total).abs(),
    })
}

/// Discrete-parameter instance for the Jensen lower bound, in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct JensenInstance {
    /// Prior weight of each grid point.
    pub prior: Vec<f64>,
    /// `log p(D* | theta)` for the holdout set.
    pub holdout_log_lik: Vec<f64>,
    /// `log p(D_t | theta)` for the training prefix.
    pub train_log_lik: Vec<f64>,
    /// `log p(y | x, theta, s)` for the query.
    pub query_log_lik: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenResult {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// A binary logistic model `p(y=1 | x, s) = sigmoid(w . [x, s, 1])`.
fn logistic_log_lik(weights: &[f64], features: &[f64], s: usize, y: usize) -> f64 {
    let d = features.len();
    let logit = features.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + weights[d] * s as f64 + weights[d + 1];
    let p = softmax(&[0.0, logit]);
    p[y].max(crate::model::PROB_FLOOR).ln()
}

/// `(features, s, y)` triple used by [`JensenInstance::logistic`].
pub type Observation<'a> = (&'a [f64], usize, usize);

impl JensenInstance {
    /// Builds the instance for a grid of logistic models.
    pub fn logistic(
        grid: &[Vec<f64>],
        prior: &[f64],
        holdout: &[Observation<'_>],
        train_prefix: &[Observation<'_>],
        query: Observation<'_>,
    ) -> Result<Self> {
        if grid.len() != prior.len() {
            return Err(Error::input("grid and prior differ in length"));
        }
        let d = query.0.len();
        if grid.iter().any(|w| w.len() != d + 2)
            || holdout.iter().chain(train_prefix).any(|o| o.0.len() != d)
        {
            return Err(Error::input("weights must have feature_dim + 2 entries"));
        }
        let total = |obs: &[Observation<'_>], w: &[f64]| obs.iter().map(|o| logistic_log_lik(w, o.0, o.1, o.2)).sum();
        Ok(JensenInstance {
            prior: prior.to_vec(),
            holdout_log_lik: grid.iter().map(|w| total(holdout, w)).collect(),
            train_log_lik: grid.iter().map(|w| total(train_prefix, w)).collect(),
            query_log_lik: grid.iter().map(|w| logistic_log_lik(w, query.0, query.1, query.2)).collect(),
        })
    }

    /// Normalized `p(theta | D*)`.
    pub fn posterior(&self) -> Result<Vec<f64>> {
        let m = self.prior.len();
        if m == 0 || m > MAX_GRID {
            return Err(Error::input(format!("grid must have 1..={MAX_GRID} points")));
        }
        if [&self.holdout_log_lik, &self.train_log_lik, &self.query_log_lik]
            .iter()
            .any(|v| v.len() != m)
        {
            return Err(Error::input("likelihood vectors must match the grid"));
        }
        if self.prior.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::input("prior weights must be non-negative"));
        }
        let logs: Vec<f64> = self
            .prior
            .iter()
            .zip(&self.holdout_log_lik)
            .map(|(p, l)| if *p > 0.0 { p.ln() + l } else { f64::NEG_INFINITY })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::input("posterior has zero mass"));
        }
        let un: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = un.iter().sum();
        Ok(un.into_iter().map(|u| u / z).collect())
    }
}

/// `log E_post[p(D_t|θ) p(y|x,θ,s)]` against `E_post[log p(D_t|θ) + log p(y|x,θ,s)]`.
pub fn jensen_bound_check(inst: &JensenInstance) -> Result<JensenResult> {
    let post = inst.posterior()?;
    let terms: Vec<(f64, f64)> = post
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(k, &w)| (w, inst.train_log_lik[k] + inst.query_log_lik[k]))
        .collect();
    let top = terms.iter().map(|t| t.0.ln() + t.1).fold(f64::NEG_INFINITY, f64::max);
    let lhs = if terms.len() == 1 {
        terms[0].1 + terms[0].0.ln()
    } else {
        top + terms.iter().map(|(w, l)| (w.ln() + l - top).exp()).sum::<f64>().ln()
    };
    let rhs = terms.iter().map(|(w, l)| w * l).sum::<f64>();
    Ok(JensenResult {
        lhs,
        rhs,
        holds: lhs >= rhs - 1e-12,
    })
}

fn random_probs<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Random peer-equivalence instance with slices of at most eight points.
pub fn random_peer_instance<R: Rng + ?Sized>(rng: &mut R) -> (Vec<PeerPoint>, Vec<usize>, f64) {
    let k = rng.random_range(2..=4);
    let ns = rng.random_range(2..=MAX_PEER_SLICE);
    let no = rng.random_range(1..=MAX_PEER_SLICE);
    let group = (0..ns)
        .map(|_| PeerPoint {
            probs: random_probs(rng, k),
            label: rng.random_range(0..k),
        })
        .collect();
    let other = (0..no).map(|_| rng.random_range(0..k)).collect();
    (group, other, rng.random_range(0.0..=1.0))
}

/// Random binary instance with independent `Z` and `S` and flip rates in `[0, 0.5)`.
pub fn random_decomposition_instance<R: Rng + ?Sized>(rng: &mut R) -> DecompositionInstance {
    let a1 = rng.random_range(0.1..0.9);
    let pi1 = rng.random_range(0.1..0.9);
    let mut points = Vec::new();
    for s in 0..2 {
        for z in 0..2 {
            let cell = (if s == 1 { a1 } else { 1.0 - a1 }) * (if z == 1 { pi1 } else { 1.0 - pi1 });
            let n = rng.random_range(1..=MAX_SUPPORT / 4);
            let shares = random_probs(rng, n);
            for share in shares {
                let p1 = rng.random_range(0.02..0.98);
                points.push(SupportPoint {
                    z,
                    s,
                    prob: cell * share,
                    proxy: [1.0 - p1, p1],
                });
            }
        }
    }
    // exact normalization so the validity check is not at the mercy of rounding
    let total: f64 = points.iter().map(|p| p.prob).sum();
    points.iter_mut().for_each(|p| p.prob /= total);
    DecompositionInstance {
        points,
        theta_plus: [rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)],
        theta_minus: [rng.random_range(0.0..0.5), rng.random_range(0.0..0.5)],
    }
}

/// Random logistic grid instance with at most sixteen parameter points.
pub fn random_jensen_instance<R: Rng + ?Sized>(rng: &mut R) -> JensenInstance {
    let d = rng.random_range(1..=3);
    let m = rng.random_range(1..=MAX_GRID);
    let grid: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..d + 2).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let prior = random_probs(rng, m);
    type Owned = (Vec<f64>, usize, usize);
    fn draw<R: Rng + ?Sized>(rng: &mut R, d: usize, n: usize) -> Vec<Owned> {
        (0..n)
            .map(|_| {
                let x = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                (x, rng.random_range(0..2), rng.random_range(0..2))
            })
            .collect()
    }
    fn view(v: &[Owned]) -> Vec<Observation<'_>> {
        v.iter().map(|o| (o.0.as_slice(), o.1, o.2)).collect()
    }
    let n_holdout = rng.random_range(0..=6);
    let holdout = draw(rng, d, n_holdout);
    let n_train = rng.random_range(0..=6);
    let train = draw(rng, d, n_train);
    let query = draw(rng, d, 1).pop().expect("one query");
    JensenInstance::logistic(&grid, &prior, &view(&holdout), &view(&train), (&query.0, query.1, query.2))
        .expect("generated shapes agree")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub name: &'static str,
    pub instances: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Runs the three checks on seeded random instances: 50 peer, 50
/// decomposition (γ cycling through 0, 0.3, 0.9) and 100 Jensen.
pub fn run_suite(seed: u64) -> Result<Vec<CheckSummary>> {
    let mut rng = crate::rng::stream(seed, crate::rng::Stream::Data);
    let mut out = Vec::new();

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (g, o, gamma) = random_peer_instance(&mut rng);
        worst = worst.max(peer_expectation_equivalence(&g, &o, gamma)?.diff);
    }
    out.push(CheckSummary {
        name: "peer-expectation equivalence",
        instances: 50,
        worst,
        tolerance: 1e-12,
        passed: worst < 1e-12,
    });

    let mut worst = 0.0f64;
    for t in 0..50 {
        let inst = random_decomposition_instance(&mut rng);
        let gamma = [0.0, 0.3, 0.9][t % 3];
        worst = worst.max(decomposition_check(&inst, gamma)?.diff);
    }
    out.push(CheckSummary {
        name: "decomposition identity",
        instances: 50,
        worst,
        tolerance: 1e-9,
        passed: worst < 1e-9,
    });

    // worst is the largest shortfall rhs - lhs
    let mut worst = f64::NEG_INFINITY;
    let mut holds = true;
    for _ in 0..100 {
        let r = jensen_bound_check(&random_jensen_instance(&mut rng))?;
        worst = worst.max(r.rhs - r.lhs);
        holds &= r.holds;
    }
    out.push(CheckSummary {
        name: "jensen lower bound",
        instances: 100,
        worst,
        tolerance: 1e-12,
        passed: holds,
    });
    Ok(out)
}
