//! Examples, dataset tables, synthetic generation, group-conditional label
//! flipping, CSV interchange and group statistics.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// One record: features, observed label, clean label when known, group.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub id: u64,
    pub features: Vec<f64>,
    /// Observed (possibly flipped) label.
    pub y: usize,
    /// Clean label, if known.
    pub z: Option<usize>,
    /// Sensitive group index.
    pub s: usize,
}

impl Example {
    /// `Some(true)` when the observed label differs from the clean one.
    pub fn is_flipped(&self) -> Option<bool> {
        self.z.map(|z| z != self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
    Holdout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetTable {
    split: Split,
    feature_dim: usize,
    examples: Vec<Example>,
}

impl DatasetTable {
    /// Checks id uniqueness and a constant feature dimension.
    pub fn new(split: Split, feature_dim: usize, examples: Vec<Example>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if ex.features.len() != feature_dim {
                return Err(Error::input(format!(
                    "example {} has {} features, table has {feature_dim}",
                    ex.id,
                    ex.features.len()
                )));
            }
            if !seen.insert(ex.id) {
                return Err(Error::input(format!("duplicate example id {}", ex.id)));
            }
        }
        Ok(DatasetTable {
            split,
            feature_dim,
            examples,
        })
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Example> {
        self.examples.iter()
    }

    /// Number of classes seen in observed or clean labels (at least 2).
    pub fn num_classes(&self) -> usize {
        self.examples
            .iter()
            .map(|e| e.y.max(e.z.unwrap_or(0)) + 1)
            .max()
            .unwrap_or(0)
            .max(2)
    }

    /// Number of groups seen (at least 2).
    pub fn num_groups(&self) -> usize {
        self.examples.iter().map(|e| e.s + 1).max().unwrap_or(0).max(2)
    }
}

/// Covariance of one class-conditional Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Full(Vec<Vec<f64>>),
}

impl Covariance {
    fn to_matrix(&self, dim: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            Covariance::Diagonal(v) => {
                if v.len() != dim {
                    return Err(Error::input("diagonal covariance has wrong length"));
                }
                Ok((0..dim)
                    .map(|i| (0..dim).map(|j| if i == j { v[i] } else { 0.0 }).collect())
                    .collect())
            }
            Covariance::Full(m) => {
                if m.len() != dim || m.iter().any(|row| row.len() != dim) {
                    return Err(Error::input("covariance matrix has wrong shape"));
                }
                Ok(m.clone())
            }
        }
    }
}

/// Parameters of the synthetic fair distribution: `z` from the class prior,
/// `x | z` Gaussian, `s` independent of both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub num_examples: usize,
    pub feature_dim: usize,
    pub class_priors: Vec<f64>,
    pub class_means: Vec<Vec<f64>>,
    pub class_covariances: Vec<Covariance>,
    pub group_priors: Vec<f64>,
}

impl GenSpec {
    /// Two isotropic unit-variance classes at `±separation/2` along the first axis.
    pub fn two_gaussians(
        num_examples: usize,
        feature_dim: usize,
        separation: f64,
        positive_prior: f64,
    ) -> Self {
        let mut m0 = vec![0.0; feature_dim];
        let mut m1 = vec![0.0; feature_dim];
        m0[0] = -separation / 2.0;
        m1[0] = separation / 2.0;
        GenSpec {
            num_examples,
            feature_dim,
            class_priors: vec![1.0 - positive_prior, positive_prior],
            class_means: vec![m0, m1],
            class_covariances: vec![
                Covariance::Diagonal(vec![1.0; feature_dim]),
                Covariance::Diagonal(vec![1.0; feature_dim]),
            ],
            group_priors: vec![0.5, 0.5],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_priors.len()
    }

    pub fn sampler(&self) -> Result<GaussianClasses> {
        GaussianClasses::new(self)
    }
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::input(format!("{name} must be non-negative and non-empty")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::input(format!("{name} sum to {total}, expected 1")));
    }
    Ok(())
}

fn cholesky(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let sum: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = m[i][i] - sum;
                if d <= 0.0 || !d.is_finite() {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (m[i][j] - sum) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `L v = b` for lower-triangular `L`.
fn forward_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; b.len()];
    for i in 0..b.len() {
        let sum: f64 = (0..i).map(|k| l[i][k] * v[k]).sum();
        v[i] = (b[i] - sum) / l[i][i];
    }
    v
}

/// Validated class-conditional Gaussians with precomputed Cholesky factors.
#[derive(Debug, Clone)]
pub struct GaussianClasses {
    spec: GenSpec,
    factors: Vec<Vec<Vec<f64>>>,
    log_dets: Vec<f64>,
}

impl GaussianClasses {
    fn new(spec: &GenSpec) -> Result<Self> {
        check_distribution("class priors", &spec.class_priors)?;
        check_distribution("group priors", &spec.group_priors)?;
        let k = spec.class_priors.len();
        let d = spec.feature_dim;
        if d == 0 {
            return Err(Error::input("feature_dim must be positive"));
        }
        if spec.class_means.len() != k || spec.class_covariances.len() != k {
            return Err(Error::input("need one mean and one covariance per class"));
        }
        if spec.class_means.iter().any(|m| m.len() != d) {
            return Err(Error::input("class mean has wrong dimension"));
        }
        let mut factors = Vec::with_capacity(k);
        let mut log_dets = Vec::with_capacity(k);
        for cov in &spec.class_covariances {
            let l = cholesky(&cov.to_matrix(d)?)
                .ok_or_else(|| Error::input("covariance is not positive definite"))?;
            log_dets.push(2.0 * (0..d).map(|i| l[i][i].ln()).sum::<f64>());
            factors.push(l);
        }
        Ok(GaussianClasses {
            spec: spec.clone(),
            factors,
            log_dets,
        })
    }

    pub fn spec(&self) -> &GenSpec {
        &self.spec
    }

    fn sample_class<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Vec<f64> {
        let d = self.spec.feature_dim;
        let eps: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let l = &self.factors[class];
        (0..d)
            .map(|i| self.spec.class_means[class][i] + (0..=i).map(|j| l[i][j] * eps[j]).sum::<f64>())
            .collect()
    }

    /// True class posterior `p(z | x)` of the generator.
    pub fn posterior(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.spec.num_classes())
            .map(|c| {
                let diff: Vec<f64> = x.iter().zip(&self.spec.class_means[c]).map(|(a, b)| a - b).collect();
                let v = forward_solve(&self.factors[c], &diff);
                let maha: f64 = v.iter().map(|t| t * t).sum();
                self.spec.class_priors[c].ln() - 0.5 * (maha + self.log_dets[c])
            })
            .collect();
        crate::model::softmax(&logs)
    }

    /// Bayes-optimal accuracy for two classes sharing one covariance.
    pub fn bayes_accuracy(&self) -> Result<f64> {
        if self.spec.num_classes() != 2 || self.spec.class_covariances[0] != self.spec.class_covariances[1] {
            return Err(Error::input(
                "closed-form Bayes accuracy needs two classes with a shared covariance",
            ));
        }
        let diff: Vec<f64> = self.spec.class_means[1]
            .iter()
            .zip(&self.spec.class_means[0])
            .map(|(a, b)| a - b)
            .collect();
        let delta = crate::model::l2_norm(&forward_solve(&self.factors[0], &diff));
        let (p0, p1) = (self.spec.class_priors[0], self.spec.class_priors[1]);
        if delta == 0.0 {
            return Ok(p0.max(p1));
        }
        let phi = Normal::standard();
        let shift = (p0 / p1).ln() / delta;
        Ok(p0 * phi.cdf(delta / 2.0 + shift) + p1 * phi.cdf(delta / 2.0 - shift))
    }
}

fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// Draws a clean table from `spec`; observed labels start equal to clean ones.
pub fn generate_synthetic(spec: &GenSpec, seed: u64) -> Result<DatasetTable> {
    let sampler = spec.sampler()?;
    let mut rng = stream(seed, Stream::Data);
    let examples = (0..spec.num_examples)
        .map(|i| {
            let z = sample_categorical(&spec.class_priors, &mut rng);
            let s = sample_categorical(&spec.group_priors, &mut rng);
            let features = sampler.sample_class(z, &mut rng);
            Example {
                id: i as u64,
                features,
                y: z,
                z: Some(z),
                s,
            }
        })
        .collect();
    DatasetTable::new(Split::Train, spec.feature_dim, examples)
}

/// Seeded shuffle, then contiguous slices of the requested sizes.
pub fn split_table(table: &DatasetTable, parts: &[(Split, usize)], seed: u64) -> Result<Vec<DatasetTable>> {
    let needed: usize = parts.iter().map(|(_, n)| n).sum();
    if needed > table.len() {
        return Err(Error::input(format!(
            "splits need {needed} examples, table has {}",
            table.len()
        )));
    }
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.shuffle(&mut stream(seed, Stream::Split));
    let mut offset = 0;
    parts
        .iter()
        .map(|&(split, n)| {
            let examples = order[offset..offset + n]
                .iter()
                .map(|&i| table.examples[i].clone())
                .collect();
            offset += n;
            DatasetTable::new(split, table.feature_dim, examples)
        })
        .collect()
}

/// Group-conditional flip rates for binary labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    /// `P(Y=1 | Z=0, S=s)` per group.
    pub theta_plus: Vec<f64>,
    /// `P(Y=0 | Z=1, S=s)` per group.
    pub theta_minus: Vec<f64>,
}

impl BiasSpec {
    pub fn new(theta_plus: Vec<f64>, theta_minus: Vec<f64>) -> Result<Self> {
        let spec = BiasSpec {
            theta_plus,
            theta_minus,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Equal flip rate `rho` in both directions on `targets`, zero elsewhere.
    pub fn symmetric(rho: f64, num_groups: usize, targets: &[usize]) -> Result<Self> {
        let mut rates = vec![0.0; num_groups];
        for &t in targets {
            let slot = rates
                .get_mut(t)
                .ok_or_else(|| Error::input(format!("target group {t} out of range")))?;
            *slot = rho;
        }
        BiasSpec::new(rates.clone(), rates)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta_plus.len() != self.theta_minus.len() {
            return Err(Error::input("theta_plus and theta_minus differ in length"));
        }
        if self
            .theta_plus
            .iter()
            .chain(&self.theta_minus)
            .any(|r| !(0.0..=1.0).contains(r))
        {
            return Err(Error::input("flip rates must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Probability that clean label `z` in group `s` is flipped. Groups
    /// beyond the configured ones are unbiased.
    pub fn flip_rate(&self, z: usize, s: usize) -> f64 {
        let rates = if z == 0 { &self.theta_plus } else { &self.theta_minus };
        rates.get(s).copied().unwrap_or(0.0)
    }
}

/// Flips each binary clean label independently with its (z, s) rate.
pub fn inject_label_bias(table: &DatasetTable, bias: &BiasSpec, seed: u64) -> Result<DatasetTable> {
    bias.validate()?;
    let mut rng = stream(seed, Stream::Bias);
    let examples = table
        .examples
        .iter()
        .map(|ex| {
            let z = ex
                .z
                .ok_or_else(|| Error::input(format!("example {} has no clean label", ex.id)))?;
            if z > 1 {
                return Err(Error::input(format!(
                    "label flipping needs binary labels, example {} has {z}",
                    ex.id
                )));
            }
            let u: f64 = rng.random();
            let y = if u < bias.flip_rate(z, ex.s) { 1 - z } else { z };
            Ok(Example { y, ..ex.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    DatasetTable::new(table.split, table.feature_dim, examples)
}

/// Reads a dataset CSV (`id,s,z,y,f0,...`).
pub fn load_table(path: &Path, split: Split) -> Result<DatasetTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| csv_error(path, e))?,
        None => return Err(Error::parse(path, 1, "missing header")),
    };
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 4 || fields[..4] != ["id", "s", "z", "y"] {
        return Err(Error::parse(path, 1, "header must start with id,s,z,y"));
    }
    for (i, name) in fields[4..].iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(Error::parse(path, 1, format!("expected column f{i}, found {name}")));
        }
    }
    let dim = fields.len() - 4;
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for record in records {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |m: String| Error::parse(path, line, m);
        if record.len() != dim + 4 {
            return Err(err(format!("expected {} fields, found {}", dim + 4, record.len())));
        }
        let int = |i: usize, name: &str| {
            record[i]
                .parse::<u64>()
                .map_err(|_| err(format!("{name} '{}' is not a non-negative integer", &record[i])))
        };
        let id = int(0, "id")?;
        let s = int(1, "s")? as usize;
        let z = if record[2].is_empty() {
            None
        } else {
            Some(int(2, "z")? as usize)
        };
        let y = int(3, "y")? as usize;
        let features = (0..dim)
            .map(|j| {
                let raw = &record[4 + j];
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("feature f{j} '{raw}' is not a finite number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert(id) {
            return Err(err(format!("duplicate id {id}")));
        }
        examples.push(Example { id, features, y, z, s });
    }
    DatasetTable::new(split, dim, examples)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Writes the canonical CSV form of `table`.
pub fn save_table(table: &DatasetTable, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_table(table, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_table<W: Write>(table: &DatasetTable, out: &mut W) -> std::io::Result<()> {
    write!(out, "id,s,z,y")?;
    for j in 0..table.feature_dim {
        write!(out, ",f{j}")?;
    }
    writeln!(out)?;
    for ex in &table.examples {
        write!(out, "{},{},", ex.id, ex.s)?;
        if let Some(z) = ex.z {
            write!(out, "{z}")?;
        }
        write!(out, ",{}", ex.y)?;
        for f in &ex.features {
            write!(out, ",{f}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Group and label counts; observed labels stand in for clean ones.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub total: usize,
    /// `C_s`.
    pub group_counts: Vec<usize>,
    /// `C_{s,z}`, indexed `[s][label]`.
    pub joint_counts: Vec<Vec<usize>>,
    /// Empirical `p(s)`.
    pub group_probs: Vec<f64>,
    /// Empirical `p(z)`.
    pub label_probs: Vec<f64>,
    /// `P(Y=j | S=s)`, `None` for groups with no members.
    pub label_given_group: Vec<Option<Vec<f64>>>,
}

impl GroupStats {
    pub fn num_groups(&self) -> usize {
        self.group_counts.len()
    }

    pub fn num_classes(&self) -> usize {
        self.label_probs.len()
    }

    /// Label distribution pooled over every group other than `s`.
    pub fn complement_label_dist(&self, s: usize) -> Option<Vec<f64>> {
        let k = self.num_classes();
        let mut counts = vec![0usize; k];
        for (g, row) in self.joint_counts.iter().enumerate() {
            if g != s {
                for (c, n) in counts.iter_mut().zip(row) {
                    *c += n;
                }
            }
        }
        let total: usize = counts.iter().sum();
        (total > 0).then(|| counts.iter().map(|&c| c as f64 / total as f64).collect())
    }
}

pub fn group_statistics(table: &DatasetTable) -> Result<GroupStats> {
    group_statistics_of(table.examples(), table.num_groups(), table.num_classes())
}

/// Statistics over an arbitrary slice with fixed group and class counts.
pub fn group_statistics_of(examples: &[Example], num_groups: usize, num_classes: usize) -> Result<GroupStats> {
    if examples.is_empty() {
        return Err(Error::Unavailable("group statistics of an empty table".into()));
    }
    let mut joint = vec![vec![0usize; num_classes]; num_groups];
    for ex in examples {
        if ex.s >= num_groups || ex.y >= num_classes {
            return Err(Error::input(format!(
                "example {} has group {} / label {} outside {num_groups} groups, {num_classes} classes",
                ex.id, ex.s, ex.y
            )));
        }
        joint[ex.s][ex.y] += 1;
    }
    let n = examples.len();
    let group_counts: Vec<usize> = joint.iter().map(|row| row.iter().sum()).collect();
    let label_counts: Vec<usize> = (0..num_classes).map(|c| joint.iter().map(|r| r[c]).sum()).collect();
    let label_given_group = joint
        .iter()
        .zip(&group_counts)
        .map(|(row, &cs)| (cs > 0).then(|| row.iter().map(|&c| c as f64 / cs as f64).collect()))
        .collect();
    Ok(GroupStats {
        total: n,
        group_probs: group_counts.iter().map(|&c| c as f64 / n as f64).collect(),
        label_probs: label_counts.iter().map(|&c| c as f64 / n as f64).collect(),
        group_counts,
        joint_counts: joint,
        label_given_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: u64, s: usize, y: usize) -> Example {
        Example {
            id,
            features: vec![id as f64],
            y,
            z: Some(y),
            s,
        }
    }

    #[test]
    fn group_prior_is_respected() {
        let spec = GenSpec::two_gaussians(100_000, 2, 2.0, 0.5);
        let table = generate_synthetic(&spec, 1).unwrap();
        let ones = table.iter().filter(|e| e.s == 1).count() as f64;
        assert!((ones / 1e5 - 0.5).abs() < 0.01);
        assert!(table.iter().all(|e| e.z == Some(e.y)));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = GenSpec::two_gaussians(50, 3, 2.0, 0.3);
        assert_eq!(generate_synthetic(&spec, 9).unwrap(), generate_synthetic(&spec, 9).unwrap());
        assert_ne!(generate_synthetic(&spec, 9).unwrap(), generate_synthetic(&spec, 10).unwrap());
    }

    #[test]
    fn invalid_priors_rejected() {
        let mut spec = GenSpec::two_gaussians(10, 2, 1.0, 0.5);
        spec.class_priors = vec![0.6, 0.6];
        assert!(matches!(generate_synthetic(&spec, 0), Err(Error::Input(_))));
        let mut spec = GenSpec::two_gaussians(10, 2, 1.0, 0.5);
        spec.class_covariances[0] = Covariance::Full(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(generate_synthetic(&spec, 0), Err(Error::Input(_))));
    }

    #[test]
    fn full_covariance_sampling_moments() {
        let mut spec = GenSpec::two_gaussians(40_000, 2, 0.0, 0.5);
        let cov = vec![vec![2.0, 0.8], vec![0.8, 1.0]];
        spec.class_covariances = vec![Covariance::Full(cov.clone()), Covariance::Full(cov)];
        let table = generate_synthetic(&spec, 4).unwrap();
        let n = table.len() as f64;
        let cross: f64 = table.iter().map(|e| e.features[0] * e.features[1]).sum::<f64>() / n;
        let var0: f64 = table.iter().map(|e| e.features[0].powi(2)).sum::<f64>() / n;
        assert!((cross - 0.8).abs() < 0.05, "{cross}");
        assert!((var0 - 2.0).abs() < 0.08, "{var0}");
    }

    #[test]
    fn bayes_accuracy_closed_form() {
        // equal priors, separation 2: Phi(1)
        let g = GenSpec::two_gaussians(1, 2, 2.0, 0.5).sampler().unwrap();
        assert!((g.bayes_accuracy().unwrap() - 0.841_344_746_068_542_9).abs() < 1e-9);
        // identical means: majority class
        let g = GenSpec::two_gaussians(1, 2, 0.0, 0.3).sampler().unwrap();
        assert!((g.bayes_accuracy().unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn posterior_matches_logistic_form() {
        let g = GenSpec::two_gaussians(1, 1, 2.0, 0.5).sampler().unwrap();
        // log-odds for unit variance, means ±1: 2x
        let p = g.posterior(&[0.3]);
        assert!((p[1] - 1.0 / (1.0 + (-0.6f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn zero_bias_is_identity() {
        let table = generate_synthetic(&GenSpec::two_gaussians(500, 2, 2.0, 0.5), 2).unwrap();
        let biased = inject_label_bias(&table, &BiasSpec::symmetric(0.0, 2, &[0, 1]).unwrap(), 3).unwrap();
        assert_eq!(biased, table);
    }

    #[test]
    fn full_flip_on_group_one_only() {
        let table = generate_synthetic(&GenSpec::two_gaussians(500, 2, 2.0, 0.5), 2).unwrap();
        let bias = BiasSpec::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let biased = inject_label_bias(&table, &bias, 3).unwrap();
        for (a, b) in table.iter().zip(biased.iter()) {
            assert_eq!(a.features, b.features);
            assert_eq!(a.z, b.z);
            assert_eq!(a.s, b.s);
            assert_eq!(b.is_flipped(), Some(b.s == 1));
        }
    }

    #[test]
    fn bias_needs_clean_labels() {
        let mut e = ex(0, 0, 1);
        e.z = None;
        let table = DatasetTable::new(Split::Train, 1, vec![e]).unwrap();
        let bias = BiasSpec::symmetric(0.2, 2, &[1]).unwrap();
        assert!(matches!(inject_label_bias(&table, &bias, 0), Err(Error::Input(_))));
        assert!(BiasSpec::new(vec![1.2], vec![0.0]).is_err());
        assert!(BiasSpec::symmetric(0.2, 2, &[2]).is_err());
    }

    #[test]
    fn group_stats_balanced() {
        let table = DatasetTable::new(
            Split::Train,
            1,
            vec![ex(0, 0, 0), ex(1, 0, 1), ex(2, 1, 0), ex(3, 1, 1)],
        )
        .unwrap();
        let st = group_statistics(&table).unwrap();
        assert_eq!(st.group_probs, vec![0.5, 0.5]);
        assert_eq!(st.label_probs, vec![0.5, 0.5]);
        assert_eq!(st.joint_counts, vec![vec![1, 1], vec![1, 1]]);
    }

    #[test]
    fn group_stats_hand_tally() {
        // (s, y): (0,0) (0,1) (0,1) (1,1) (1,1) (1,0)
        let rows = [(0, 0), (0, 1), (0, 1), (1, 1), (1, 1), (1, 0)];
        let examples = rows.iter().enumerate().map(|(i, &(s, y))| ex(i as u64, s, y)).collect();
        let st = group_statistics(&DatasetTable::new(Split::Train, 1, examples).unwrap()).unwrap();
        assert_eq!(st.group_counts, vec![3, 3]);
        assert_eq!(st.joint_counts, vec![vec![1, 2], vec![1, 2]]);
        assert_eq!(st.label_probs, vec![2.0 / 6.0, 4.0 / 6.0]);
        assert_eq!(st.label_given_group[0], Some(vec![1.0 / 3.0, 2.0 / 3.0]));
        assert_eq!(st.complement_label_dist(0), Some(vec![1.0 / 3.0, 2.0 / 3.0]));
    }

    #[test]
    fn single_group_flags_unavailable() {
        let table = DatasetTable::new(Split::Train, 1, vec![ex(0, 0, 0), ex(1, 0, 1)]).unwrap();
        let st = group_statistics(&table).unwrap();
        assert_eq!(st.label_given_group[1], None);
        assert_eq!(st.complement_label_dist(0), None);
        let empty = DatasetTable::new(Split::Train, 1, vec![]).unwrap();
        assert!(matches!(group_statistics(&empty), Err(Error::Unavailable(_))));
    }

    #[test]
    fn splits_are_disjoint_and_cover() {
        let table = generate_synthetic(&GenSpec::two_gaussians(100, 2, 2.0, 0.5), 0).unwrap();
        let parts = split_table(&table, &[(Split::Train, 60), (Split::Test, 40)], 5).unwrap();
        let mut ids: Vec<u64> = parts.iter().flat_map(|t| t.iter().map(|e| e.id)).collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..100).collect::<Vec<_>>());
        assert_eq!(parts[1].split(), Split::Test);
        assert!(split_table(&table, &[(Split::Train, 101)], 5).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(DatasetTable::new(Split::Train, 1, vec![ex(1, 0, 0), ex(1, 1, 1)]).is_err());
    }
}
