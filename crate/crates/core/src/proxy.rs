//! Frozen validation-side predictors and the peer expectation term.
//!
//! A proxy stands in for a model trained on a clean holdout set. It may be a
//! small classifier fitted on clean data, a table of externally computed
//! predictions (for example from a pre-trained zero-shot model), or the
//! generator's own posterior blended with the uniform distribution.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::data::{DatasetTable, Example, GaussianClasses, GenSpec, GroupStats};
use crate::error::{Error, Result};
use crate::model::{cross_entropy, AdamWConfig, Model, ModelSpec, OptimizerState};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone)]
pub enum ProxyKind {
    /// Classifier fitted on clean holdout data.
    HoldoutTrained(Model),
    /// Predictions keyed by example id.
    FileBacked(HashMap<u64, Vec<f64>>),
    /// Generator posterior mixed with uniform at rate `mix`.
    NoisyOracle { classes: GaussianClasses, mix: f64 },
}

#[derive(Debug, Clone)]
pub struct ProxyPredictor {
    kind: ProxyKind,
    num_classes: usize,
}

/// Training budget for [`build_holdout_proxy`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
}

impl Default for ProxyTraining {
    fn default() -> Self {
        ProxyTraining {
            epochs: 100,
            batch_size: 32,
            optimizer: AdamWConfig {
                learning_rate: 0.01,
                ..AdamWConfig::default()
            },
            seed: 0,
        }
    }
}

/// Fits a classifier on clean holdout data with plain mini-batch AdamW.
pub fn build_holdout_proxy(holdout: &DatasetTable, spec: ModelSpec, budget: &ProxyTraining) -> Result<ProxyPredictor> {
    if holdout.is_empty() {
        return Err(Error::input("holdout table is empty"));
    }
    if budget.batch_size == 0 {
        return Err(Error::input("proxy batch size must be positive"));
    }
    let mut rng = stream(budget.seed, Stream::Proxy);
    let mut model = Model::init(spec, &mut rng)?;
    let mut opt = OptimizerState::new(budget.optimizer, spec.num_params());
    let examples = holdout.examples();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..budget.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(budget.batch_size) {
            let mut grad = vec![0.0; spec.num_params()];
            for &i in chunk {
                let ex = &examples[i];
                let label = ex.z.unwrap_or(ex.y);
                let g = model.loss_grad(&model.input_for(ex)?, label)?;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.update(model.params_mut(), &grad)?;
        }
    }
    Ok(ProxyPredictor::from_model(model))
}

/// Reads a prediction CSV (`id,p0,...,p{K-1}`). Rows within 1e-6 of summing
/// to one are renormalized; others are rejected.
pub fn load_file_proxy(path: &Path) -> Result<ProxyPredictor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| Error::parse(path, 1, e.to_string()))?,
        None => return Err(Error::parse(path, 1, "missing header")),
    };
    let fields: Vec<&str> = header.iter().collect();
    if fields.len() < 3 || fields[0] != "id" {
        return Err(Error::parse(path, 1, "header must be id,p0,p1,..."));
    }
    for (i, name) in fields[1..].iter().enumerate() {
        if *name != format!("p{i}") {
            return Err(Error::parse(path, 1, format!("expected column p{i}, found {name}")));
        }
    }
    let k = fields.len() - 1;
    let mut table = HashMap::new();
    for record in records {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |m: String| Error::parse(path, line, m);
        if record.len() != k + 1 {
            return Err(err(format!("expected {} fields, found {}", k + 1, record.len())));
        }
        let id: u64 = record[0]
            .parse()
            .map_err(|_| err(format!("id '{}' is not an integer", &record[0])))?;
        let mut probs = (1..=k)
            .map(|j| {
                record[j]
                    .parse::<f64>()
                    .ok()
                    .filter(|p| p.is_finite() && *p >= 0.0)
                    .ok_or_else(|| err(format!("probability '{}' is invalid", &record[j])))
            })
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(err(format!("probabilities sum to {total}")));
        }
        probs.iter_mut().for_each(|p| *p /= total);
        if table.insert(id, probs).is_some() {
            return Err(err(format!("duplicate id {id}")));
        }
    }
    Ok(ProxyPredictor {
        kind: ProxyKind::FileBacked(table),
        num_classes: k,
    })
}

impl ProxyPredictor {
    pub fn from_model(model: Model) -> Self {
        let num_classes = model.spec().num_classes;
        ProxyPredictor {
            kind: ProxyKind::HoldoutTrained(model),
            num_classes,
        }
    }

    pub fn from_predictions(predictions: HashMap<u64, Vec<f64>>, num_classes: usize) -> Result<Self> {
        for (id, p) in &predictions {
            let total: f64 = p.iter().sum();
            if p.len() != num_classes || (total - 1.0).abs() > 1e-6 {
                return Err(Error::input(format!("prediction for id {id} is not a distribution")));
            }
        }
        Ok(ProxyPredictor {
            kind: ProxyKind::FileBacked(predictions),
            num_classes,
        })
    }

    pub fn noisy_oracle(spec: &GenSpec, mix: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mix) {
            return Err(Error::input("oracle mix rate must lie in [0, 1]"));
        }
        Ok(ProxyPredictor {
            num_classes: spec.num_classes(),
            kind: ProxyKind::NoisyOracle {
                classes: spec.sampler()?,
                mix,
            },
        })
    }

    pub fn kind(&self) -> &ProxyKind {
        &self.kind
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Class probabilities for `example`.
    pub fn predict(&self, example: &Example) -> Result<Vec<f64>> {
        match &self.kind {
            ProxyKind::HoldoutTrained(model) => model.predict_proba(example),
            ProxyKind::FileBacked(table) => table.get(&example.id).cloned().ok_or(Error::Coverage(example.id)),
            ProxyKind::NoisyOracle { classes, mix } => {
                let uniform = 1.0 / self.num_classes as f64;
                Ok(classes
                    .posterior(&example.features)
                    .into_iter()
                    .map(|p| (1.0 - mix) * p + mix * uniform)
                    .collect())
            }
        }
    }

    /// Writes this proxy's predictions for every example of `table`.
    pub fn write_predictions(&self, table: &DatasetTable, path: &Path) -> Result<()> {
        use std::io::Write;
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let io = |e| Error::io(path, e);
        write!(out, "id").map_err(io)?;
        for j in 0..self.num_classes {
            write!(out, ",p{j}").map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        for ex in table.iter() {
            write!(out, "{}", ex.id).map_err(io)?;
            for p in self.predict(ex)? {
                write!(out, ",{p}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Cross-entropy of the proxy's prediction against the observed label.
pub fn proxy_loss(proxy: &ProxyPredictor, example: &Example) -> Result<f64> {
    cross_entropy(&proxy.predict(example)?, example.y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeerScope {
    /// Estimated once over the whole (biased) training table.
    FullTrain,
    /// Re-estimated from each candidate batch.
    PerBatch,
}

/// For each group, the observed label distribution of its complement.
#[derive(Debug, Clone, PartialEq)]
pub struct PeerContext {
    complement: Vec<Option<Vec<f64>>>,
    scope: PeerScope,
}

impl PeerContext {
    pub fn from_stats(stats: &GroupStats, scope: PeerScope) -> Self {
        PeerContext {
            complement: (0..stats.num_groups()).map(|s| stats.complement_label_dist(s)).collect(),
            scope,
        }
    }

    /// Builds a context from explicit per-group complement distributions.
    pub fn from_distributions(complement: Vec<Option<Vec<f64>>>, scope: PeerScope) -> Result<Self> {
        for dist in complement.iter().flatten() {
            let total: f64 = dist.iter().sum();
            if (total - 1.0).abs() > 1e-12 || dist.iter().any(|p| *p < 0.0) {
                return Err(Error::input("peer distribution must sum to 1"));
            }
        }
        Ok(PeerContext { complement, scope })
    }

    pub fn scope(&self) -> PeerScope {
        self.scope
    }

    /// `P(Y | S = s')` for an example in group `s`.
    pub fn complement_of(&self, s: usize) -> Result<&[f64]> {
        self.complement
            .get(s)
            .and_then(|d| d.as_deref())
            .ok_or_else(|| Error::Unavailable(format!("no complementary-group labels for group {s}")))
    }
}

/// `sum_j P(Y=j | S=s') * CE(proxy(x), j)`.
pub fn peer_expectation(proxy: &ProxyPredictor, example: &Example, ctx: &PeerContext) -> Result<f64> {
    let dist = ctx.complement_of(example.s)?;
    peer_expectation_from_probs(&proxy.predict(example)?, dist)
}

pub(crate) fn peer_expectation_from_probs(probs: &[f64], dist: &[f64]) -> Result<f64> {
    if dist.len() != probs.len() {
        return Err(Error::input("peer distribution and proxy output differ in class count"));
    }
    dist.iter()
        .enumerate()
        .map(|(j, w)| Ok(w * cross_entropy(probs, j)?))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Split};
    use std::io::Write;

    fn ex(id: u64, s: usize, y: usize) -> Example {
        Example {
            id,
            features: vec![0.0],
            y,
            z: Some(y),
            s,
        }
    }

    fn fixed(probs: Vec<f64>) -> ProxyPredictor {
        let mut m = HashMap::new();
        m.insert(0, probs.clone());
        m.insert(1, probs);
        ProxyPredictor::from_predictions(m, 2).unwrap()
    }

    fn ctx(dist: Vec<f64>) -> PeerContext {
        PeerContext::from_distributions(vec![Some(dist.clone()), Some(dist)], PeerScope::FullTrain).unwrap()
    }

    #[test]
    fn proxy_loss_values() {
        assert!(proxy_loss(&fixed(vec![1.0, 0.0]), &ex(0, 0, 0)).unwrap().abs() < 1e-15);
        for y in 0..2 {
            let l = proxy_loss(&fixed(vec![0.5, 0.5]), &ex(0, 0, y)).unwrap();
            assert!((l - 2f64.ln()).abs() < 1e-15);
        }
        let l = proxy_loss(&fixed(vec![0.2, 0.8]), &ex(0, 0, 0)).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn peer_expectation_hand_value() {
        let v = peer_expectation(&fixed(vec![0.8, 0.2]), &ex(0, 0, 0), &ctx(vec![0.3, 0.7])).unwrap();
        let expected = 0.3 * -(0.8f64.ln()) + 0.7 * -(0.2f64.ln());
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 1.1935).abs() < 1e-4);
    }

    #[test]
    fn peer_expectation_degenerate_distributions() {
        let proxy = fixed(vec![0.35, 0.65]);
        for j in 0..2 {
            let mut onehot = vec![0.0; 2];
            onehot[j] = 1.0;
            let v = peer_expectation(&proxy, &ex(0, 1, 0), &ctx(onehot)).unwrap();
            assert_eq!(v, proxy_loss(&proxy, &ex(0, 1, j)).unwrap());
        }
        let v = peer_expectation(&proxy, &ex(0, 1, 0), &ctx(vec![0.5, 0.5])).unwrap();
        assert!((v - 0.5 * (-(0.35f64.ln()) - 0.65f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn peer_unavailable_for_single_group() {
        let table = DatasetTable::new(Split::Train, 1, vec![ex(0, 0, 0), ex(1, 0, 1)]).unwrap();
        let stats = crate::data::group_statistics(&table).unwrap();
        let c = PeerContext::from_stats(&stats, PeerScope::FullTrain);
        let err = peer_expectation(&fixed(vec![0.5, 0.5]), &ex(0, 0, 0), &c).unwrap_err();
        assert!(matches!(err, Error::Unavailable(_)));
    }

    #[test]
    fn file_proxy_load_renormalize_and_coverage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "id,p0,p1\n0,0.25,0.75\n1,0.5,0.5000004").unwrap();
        drop(f);
        let proxy = load_file_proxy(&path).unwrap();
        assert_eq!(proxy.predict(&ex(0, 0, 0)).unwrap(), vec![0.25, 0.75]);
        let p = proxy.predict(&ex(1, 0, 0)).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        match proxy.predict(&ex(7, 0, 0)) {
            Err(Error::Coverage(7)) => {}
            other => panic!("{other:?}"),
        }
        assert!(Error::Coverage(7).to_string().contains('7'));

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "id,p0,p1\n0,0.5,0.6\n").unwrap();
        match load_file_proxy(&bad) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn holdout_proxy_zero_budget_and_determinism() {
        let spec = GenSpec::two_gaussians(200, 2, 3.0, 0.5);
        let holdout = generate_synthetic(&spec, 1).unwrap();
        let mspec = ModelSpec::linear(2, 2);
        let budget = ProxyTraining {
            epochs: 0,
            ..ProxyTraining::default()
        };
        let untrained = build_holdout_proxy(&holdout, mspec, &budget).unwrap();
        let ProxyKind::HoldoutTrained(m) = untrained.kind() else {
            panic!()
        };
        let mut rng = stream(budget.seed, Stream::Proxy);
        assert_eq!(m, &Model::init(mspec, &mut rng).unwrap());

        let budget = ProxyTraining {
            epochs: 5,
            ..ProxyTraining::default()
        };
        let a = build_holdout_proxy(&holdout, mspec, &budget).unwrap();
        let b = build_holdout_proxy(&holdout, mspec, &budget).unwrap();
        let (ProxyKind::HoldoutTrained(a), ProxyKind::HoldoutTrained(b)) = (a.kind(), b.kind()) else {
            panic!()
        };
        assert_eq!(a.params(), b.params());
        let empty = DatasetTable::new(Split::Holdout, 2, vec![]).unwrap();
        assert!(build_holdout_proxy(&empty, mspec, &budget).is_err());
    }

    #[test]
    fn noisy_oracle_mixes_toward_uniform() {
        let spec = GenSpec::two_gaussians(1, 1, 2.0, 0.5);
        let sharp = ProxyPredictor::noisy_oracle(&spec, 0.0).unwrap();
        let flat = ProxyPredictor::noisy_oracle(&spec, 1.0).unwrap();
        let mut e = ex(0, 0, 0);
        e.features = vec![1.5];
        let p = sharp.predict(&e).unwrap();
        assert!(p[1] > 0.9);
        assert_eq!(flat.predict(&e).unwrap(), vec![0.5, 0.5]);
    }
}
