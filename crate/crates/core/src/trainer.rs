//! The online batch selection loop: draw `N_B` candidates, score them, keep
//! the best `N_b`, optionally rebalance groups, take one AdamW step.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{group_statistics, group_statistics_of, DatasetTable, Example, Split};
use crate::error::{Error, Result};
use crate::metrics::{epochs_to_target, evaluate};
use crate::model::{AdamWConfig, Model, ModelSpec, OptimizerState};
use crate::proxy::{PeerContext, PeerScope, ProxyPredictor};
use crate::resample::rebalance_indices;
use crate::rng::{stream, Stream, StreamRng};
use crate::selection::{score_candidates, select, Pick, ScoringContext, SelectorConfig, SelectorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Epochs(usize),
    Steps(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// `N_b`, the size of each training sub-batch.
    pub small_batch: usize,
    /// `N_B`, the number of candidates scored per step.
    pub candidate_batch: usize,
    pub budget: Budget,
    /// Evaluate every this many steps; defaults to once per epoch.
    pub eval_every: Option<usize>,
    pub optimizer: AdamWConfig,
    pub seed: u64,
    pub resample: bool,
    pub selector: SelectorConfig,
    pub model: ModelSpec,
    pub peer_scope: PeerScope,
    pub workers: usize,
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Record wall-clock seconds in the log; when off the column is 0 and
    /// logs are byte-stable.
    pub record_time: bool,
    pub audit: bool,
}

impl TrainerConfig {
    pub fn new(model: ModelSpec, selector: SelectorConfig) -> Self {
        TrainerConfig {
            small_batch: 32,
            candidate_batch: 320,
            budget: Budget::Epochs(30),
            eval_every: None,
            optimizer: AdamWConfig::default(),
            seed: 0,
            resample: selector.kind == SelectorKind::Fair,
            selector,
            model,
            peer_scope: PeerScope::FullTrain,
            workers: 1,
            checkpoint_every: 0,
            checkpoint_dir: None,
            record_time: false,
            audit: false,
        }
    }

    /// Sets `N_B = round(N_b / ratio)`.
    pub fn with_batch_ratio(mut self, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::input(format!("batch ratio {ratio} outside (0, 1]")));
        }
        self.candidate_batch = (self.small_batch as f64 / ratio).round() as usize;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.small_batch == 0 || self.candidate_batch == 0 {
            return Err(Error::input("batch sizes must be positive"));
        }
        if self.small_batch > self.candidate_batch {
            return Err(Error::input(format!(
                "N_b = {} exceeds N_B = {}",
                self.small_batch, self.candidate_batch
            )));
        }
        if !(self.optimizer.learning_rate > 0.0) || self.optimizer.weight_decay < 0.0 {
            return Err(Error::input("learning rate must be positive, weight decay non-negative"));
        }
        if self.workers == 0 {
            return Err(Error::input("need at least one worker"));
        }
        if self.eval_every == Some(0) {
            return Err(Error::input("eval_every must be positive"));
        }
        self.model.validate()?;
        self.selector.validate()
    }

    pub fn steps_per_epoch(&self, train_len: usize) -> usize {
        train_len.div_ceil(self.candidate_batch).max(1)
    }

    pub fn total_steps(&self, train_len: usize) -> usize {
        match self.budget {
            Budget::Epochs(e) => e * self.steps_per_epoch(train_len),
            Budget::Steps(s) => s,
        }
    }
}

/// Epoch-wise shuffled index stream; steps take consecutive slices and
/// a new permutation starts whenever the previous one is used up.
#[derive(Debug, Clone)]
pub struct CandidateStream {
    order: Vec<usize>,
    pos: usize,
    rng: StreamRng,
}

impl CandidateStream {
    pub fn new(len: usize, rng: StreamRng) -> Self {
        let mut s = CandidateStream {
            order: (0..len).collect(),
            pos: 0,
            rng,
        };
        s.order.shuffle(&mut s.rng);
        s
    }

    pub fn next_batch(&mut self, n: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n && !self.order.is_empty() {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            let take = (n - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + take]);
            self.pos += take;
        }
        out
    }
}

/// One evaluation row of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub epoch: usize,
    pub step: usize,
    pub split: Split,
    pub accuracy: f64,
    pub delta_dp: Option<f64>,
    pub delta_deo: Option<f64>,
    pub p_percent: Option<f64>,
    /// Share of flipped labels among examples trained on since the previous row.
    pub disc_sel_rate: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub step: usize,
    pub trained: usize,
    /// Flipped examples among those trained on, when clean labels are known.
    pub discriminated: Option<usize>,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsLog {
    pub steps_per_epoch: usize,
    pub rows: Vec<EvalRow>,
    pub steps: Vec<StepStats>,
}

pub const METRICS_HEADER: &str = "epoch,step,split,accuracy,delta_dp,delta_deo,p_percent,disc_sel_rate,seconds";

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Validation => "validation",
        Split::Test => "test",
        Split::Holdout => "holdout",
    }
}

impl MetricsLog {
    /// Test accuracy at the end of each epoch (epoch 1 first).
    pub fn epoch_accuracies(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for row in self.rows.iter().filter(|r| r.split == Split::Test && r.epoch > 0) {
            if row.epoch > out.len() {
                out.resize(row.epoch, f64::NAN);
            }
            out[row.epoch - 1] = row.accuracy;
        }
        out
    }

    pub fn epochs_to_target(&self, target: f64) -> Option<usize> {
        epochs_to_target(&self.epoch_accuracies(), target)
    }

    pub fn final_row(&self) -> Option<&EvalRow> {
        self.rows.last()
    }

    /// Flipped share over every example trained on during the run.
    pub fn overall_disc_sel_rate(&self) -> Option<f64> {
        let mut n = 0;
        let mut flipped = 0;
        for s in &self.steps {
            flipped += s.discriminated?;
            n += s.trained;
        }
        (n > 0).then(|| flipped as f64 / n as f64)
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{METRICS_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.epoch,
                r.step,
                split_name(r.split),
                r.accuracy,
                fmt_opt(r.delta_dp),
                fmt_opt(r.delta_deo),
                fmt_opt(r.p_percent),
                fmt_opt(r.disc_sel_rate),
                r.seconds
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    /// Reads the evaluation rows of a metrics CSV.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(METRICS_HEADER) {
            return Err(Error::parse(path, 1, format!("header must be {METRICS_HEADER}")));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let lineno = i as u64 + 2;
            let err = |m: &str| Error::parse(path, lineno, m.to_string());
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(err("expected 9 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(&format!("'{s}' is not a number")));
            let opt = |s: &str| if s == "-" { Ok(None) } else { num(s).map(Some) };
            let int = |s: &str| s.parse::<usize>().map_err(|_| err(&format!("'{s}' is not an integer")));
            let split = match f[2] {
                "train" => Split::Train,
                "validation" => Split::Validation,
                "test" => Split::Test,
                "holdout" => Split::Holdout,
                other => return Err(err(&format!("unknown split '{other}'"))),
            };
            rows.push(EvalRow {
                epoch: int(f[0])?,
                step: int(f[1])?,
                split,
                accuracy: num(f[3])?,
                delta_dp: opt(f[4])?,
                delta_deo: opt(f[5])?,
                p_percent: opt(f[6])?,
                disc_sel_rate: opt(f[7])?,
                seconds: num(f[8])?,
            });
        }
        Ok(MetricsLog {
            steps_per_epoch: 0,
            rows,
            steps: Vec::new(),
        })
    }
}

/// Per-candidate record of one scoring round.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub step: usize,
    pub id: u64,
    pub train_loss: f64,
    pub proxy_loss: Option<f64>,
    pub peer_term: Option<f64>,
    pub score: f64,
    pub selected: bool,
}

pub fn write_audit_csv<W: Write>(rows: &[AuditRow], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "step,id,train_loss,proxy_loss,peer_term,score,selected")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step,
            r.id,
            r.train_loss,
            fmt_opt(r.proxy_loss),
            fmt_opt(r.peer_term),
            r.score,
            u8::from(r.selected)
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub log: MetricsLog,
    pub model: Model,
    pub audit: Vec<AuditRow>,
}

/// Runs the selection loop for the configured budget.
pub fn run_training(
    config: &TrainerConfig,
    train: &DatasetTable,
    test: &DatasetTable,
    proxy: Option<&ProxyPredictor>,
) -> Result<TrainingOutcome> {
    config.validate()?;
    if train.len() < config.small_batch {
        return Err(Error::input(format!(
            "training table has {} examples, fewer than N_b = {}",
            train.len(),
            config.small_batch
        )));
    }
    if config.selector.needs_proxy() && proxy.is_none() {
        return Err(Error::input(format!("{:?} selection needs a proxy", config.selector.kind)));
    }
    if config.model.input_dim != train.feature_dim() {
        return Err(Error::input(format!(
            "model input_dim {} does not match {} dataset features",
            config.model.input_dim,
            train.feature_dim()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::input(format!("thread pool: {e}")))?;
    pool.install(|| Trainer::new(config, train, test, proxy).and_then(Trainer::run))
}

struct Trainer<'a> {
    config: &'a TrainerConfig,
    train: &'a DatasetTable,
    test: &'a DatasetTable,
    proxy: Option<&'a ProxyPredictor>,
    num_groups: usize,
    num_classes: usize,
    group_probs: Vec<f64>,
    label_probs: Vec<f64>,
    peer: Option<PeerContext>,
    model: Model,
    opt: OptimizerState,
    candidates: CandidateStream,
    selection_rng: StreamRng,
    rebalance_rng: StreamRng,
    started: Instant,
    log: MetricsLog,
    audit: Vec<AuditRow>,
}

impl<'a> Trainer<'a> {
    fn new(
        config: &'a TrainerConfig,
        train: &'a DatasetTable,
        test: &'a DatasetTable,
        proxy: Option<&'a ProxyPredictor>,
    ) -> Result<Self> {
        let num_classes = config.model.num_classes;
        let num_groups = train.num_groups();
        let stats = crate::data::group_statistics_of(train.examples(), num_groups, num_classes)?;
        let peer = (config.selector.kind == SelectorKind::Fair && config.peer_scope == PeerScope::FullTrain)
            .then(|| PeerContext::from_stats(&stats, PeerScope::FullTrain));
        let model = Model::init(config.model, &mut stream(config.seed, Stream::Init))?;
        Ok(Trainer {
            config,
            train,
            test,
            proxy,
            num_groups,
            num_classes,
            group_probs: stats.group_probs,
            label_probs: stats.label_probs,
            peer,
            opt: OptimizerState::new(config.optimizer, model.params().len()),
            model,
            candidates: CandidateStream::new(train.len(), stream(config.seed, Stream::Candidates)),
            selection_rng: stream(config.seed, Stream::Selection),
            rebalance_rng: stream(config.seed, Stream::Rebalance),
            started: Instant::now(),
            log: MetricsLog {
                steps_per_epoch: config.steps_per_epoch(train.len()),
                ..MetricsLog::default()
            },
            audit: Vec::new(),
        })
    }

    fn run(mut self) -> Result<TrainingOutcome> {
        let total = self.config.total_steps(self.train.len());
        let spe = self.log.steps_per_epoch;
        let eval_every = self.config.eval_every.unwrap_or(spe);
        self.evaluate(0)?;
        for step in 1..=total {
            self.step(step)?;
            if step % eval_every == 0 || step == total {
                self.evaluate(step)?;
            }
            if let Some(dir) = &self.config.checkpoint_dir {
                if self.config.checkpoint_every > 0 && step % self.config.checkpoint_every == 0 {
                    self.model.save_checkpoint(&dir.join(format!("step_{step:06}.fsel")))?;
                }
            }
        }
        if let Some(dir) = &self.config.checkpoint_dir {
            self.model.save_checkpoint(&dir.join("final.fsel"))?;
        }
        Ok(TrainingOutcome {
            log: self.log,
            model: self.model,
            audit: self.audit,
        })
    }

    fn evaluate(&mut self, step: usize) -> Result<()> {
        let report = evaluate(&self.model, self.test)?;
        let since = self.log.rows.last().map_or(0, |r| r.step);
        let window = self.log.steps.iter().filter(|s| s.step > since);
        let (mut n, mut flipped, mut known) = (0usize, 0usize, true);
        for s in window {
            n += s.trained;
            match s.discriminated {
                Some(d) => flipped += d,
                None => known = false,
            }
        }
        let spe = self.log.steps_per_epoch;
        self.log.rows.push(EvalRow {
            epoch: step.div_ceil(spe),
            step,
            split: Split::Test,
            accuracy: report.accuracy,
            delta_dp: report.delta_dp,
            delta_deo: report.delta_deo,
            p_percent: report.p_percent,
            disc_sel_rate: (known && n > 0).then(|| flipped as f64 / n as f64),
            seconds: if self.config.record_time {
                self.started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        Ok(())
    }

    fn step(&mut self, step: usize) -> Result<()> {
        let cfg = self.config;
        let examples = self.train.examples();
        let batch: Vec<&Example> = self
            .candidates
            .next_batch(cfg.candidate_batch)
            .into_iter()
            .map(|i| &examples[i])
            .collect();

        let batch_peer;
        let peer = match (cfg.selector.kind, cfg.peer_scope) {
            (SelectorKind::Fair, PeerScope::PerBatch) => {
                let owned: Vec<Example> = batch.iter().map(|e| (*e).clone()).collect();
                let stats = group_statistics_of(&owned, self.num_groups, self.num_classes)?;
                batch_peer = PeerContext::from_stats(&stats, PeerScope::PerBatch);
                Some(&batch_peer)
            }
            _ => self.peer.as_ref(),
        };
        let ctx = ScoringContext {
            model: &self.model,
            proxy: self.proxy,
            peer,
        };
        let scored = score_candidates(&ctx, &batch, &cfg.selector, &mut self.selection_rng)?;
        let picks = select(&scored, cfg.small_batch, &cfg.selector, &mut self.selection_rng)?;

        if cfg.audit {
            let mut chosen = vec![false; scored.len()];
            for p in &picks {
                chosen[p.index] = true;
            }
            self.audit.extend(scored.iter().zip(chosen).map(|(c, selected)| AuditRow {
                step,
                id: c.id,
                train_loss: c.train_loss,
                proxy_loss: c.proxy_loss,
                peer_term: c.peer_term,
                score: c.score,
                selected,
            }));
        }

        let picks: Vec<Pick> = if cfg.resample {
            let keys: Vec<(usize, usize)> = picks.iter().map(|p| (batch[p.index].s, batch[p.index].y)).collect();
            let (idx, _) = rebalance_indices(&keys, &self.group_probs, &self.label_probs, &mut self.rebalance_rng)?;
            idx.into_iter().map(|i| picks[i]).collect()
        } else {
            picks
        };

        let model = &self.model;
        let contributions = picks
            .par_iter()
            .map(|p| {
                let ex = batch[p.index];
                let x = model.input_for(ex)?;
                let loss = crate::model::cross_entropy(&model.forward(&x)?, ex.y)?;
                let grad = model.loss_grad(&x, ex.y)?;
                Ok((loss * p.weight, grad, p.weight))
            })
            .collect::<Result<Vec<_>>>()?;
        let scale = 1.0 / picks.len() as f64;
        let mut grad = vec![0.0; model.params().len()];
        let mut loss = 0.0;
        for (l, g, w) in contributions {
            loss += l;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += w * gi;
            }
        }
        grad.iter_mut().for_each(|g| *g *= scale);
        let mean_loss = loss * scale;
        if !mean_loss.is_finite() {
            return Err(Error::numeric(format!("non-finite training loss at step {step}")));
        }
        self.opt.update(self.model.params_mut(), &grad)?;

        let discriminated = picks
            .iter()
            .map(|p| batch[p.index].is_flipped().map(usize::from))
            .sum::<Option<usize>>();
        self.log.steps.push(StepStats {
            step,
            trained: picks.len(),
            discriminated,
            mean_loss,
        });
        Ok(())
    }
}

/// Final-row metrics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub accuracy: f64,
    pub delta_dp: Option<f64>,
    pub delta_deo: Option<f64>,
    pub p_percent: Option<f64>,
    pub disc_sel_rate: Option<f64>,
}

impl RunSummary {
    pub fn of(log: &MetricsLog) -> Option<Self> {
        let last = log.final_row()?;
        Some(RunSummary {
            accuracy: last.accuracy,
            delta_dp: last.delta_dp,
            delta_deo: last.delta_deo,
            p_percent: last.p_percent,
            disc_sel_rate: log.overall_disc_sel_rate(),
        })
    }
}

/// Mean and sample standard deviation over the valid values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
}

impl MeanStd {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let v: Vec<f64> = values.into_iter().flatten().collect();
        let n = v.len();
        if n == 0 {
            return MeanStd {
                mean: None,
                std: None,
                count: 0,
            };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        MeanStd {
            mean: Some(mean),
            std: Some(std),
            count: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepGrid {
    /// `{0.1, 0.3, 0.5, 0.7, 0.9}` for both hyperparameters.
    pub fn standard(seeds: Vec<u64>) -> Self {
        let values = vec![0.1, 0.3, 0.5, 0.7, 0.9];
        SweepGrid {
            alphas: values.clone(),
            gammas: values,
            seeds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub gamma: f64,
    pub runs: usize,
    pub failures: Vec<String>,
    pub accuracy: MeanStd,
    pub delta_dp: MeanStd,
    pub delta_deo: MeanStd,
    pub p_percent: MeanStd,
    pub disc_sel_rate: MeanStd,
}

pub const SWEEP_HEADER: &str = "alpha,gamma,runs,failures,accuracy_mean,accuracy_std,delta_dp_mean,delta_dp_std,delta_deo_mean,delta_deo_std,p_percent_mean,p_percent_std,disc_sel_rate_mean,disc_sel_rate_std";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let mut cols = vec![
            self.alpha.to_string(),
            self.gamma.to_string(),
            self.runs.to_string(),
            self.failures.len().to_string(),
        ];
        for m in [self.accuracy, self.delta_dp, self.delta_deo, self.p_percent, self.disc_sel_rate] {
            cols.push(fmt_opt(m.mean));
            cols.push(fmt_opt(m.std));
        }
        cols.join(",")
    }
}

/// Runs the template for every (alpha, gamma, seed) cell; failed runs are
/// recorded in their row and the sweep continues.
pub fn sweep(
    grid: &SweepGrid,
    template: &TrainerConfig,
    train: &DatasetTable,
    test: &DatasetTable,
    proxy: Option<&ProxyPredictor>,
) -> Result<Vec<SweepRow>> {
    if grid.alphas.is_empty() || grid.gammas.is_empty() || grid.seeds.is_empty() {
        return Err(Error::input("sweep grid is empty"));
    }
    let cells: Vec<(f64, f64)> = grid
        .alphas
        .iter()
        .flat_map(|&a| grid.gammas.iter().map(move |&g| (a, g)))
        .collect();
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| grid.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(template.workers.max(1))
        .build()
        .map_err(|e| Error::input(format!("thread pool: {e}")))?;
    let results: Vec<std::result::Result<RunSummary, String>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, seed)| {
                let mut cfg = template.clone();
                cfg.selector.alpha = cells[c].0;
                cfg.selector.gamma = cells[c].1;
                cfg.seed = seed;
                cfg.workers = 1;
                cfg.checkpoint_dir = None;
                cfg.audit = false;
                run_training(&cfg, train, test, proxy)
                    .map_err(|e| format!("alpha={} gamma={} seed={seed}: {e}", cells[c].0, cells[c].1))
                    .and_then(|o| RunSummary::of(&o.log).ok_or_else(|| "empty log".to_string()))
            })
            .collect()
    });
    let per_cell = grid.seeds.len();
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, &(alpha, gamma))| {
            let chunk = &results[c * per_cell..(c + 1) * per_cell];
            let ok: Vec<&RunSummary> = chunk.iter().filter_map(|r| r.as_ref().ok()).collect();
            SweepRow {
                alpha,
                gamma,
                runs: chunk.len(),
                failures: chunk.iter().filter_map(|r| r.as_ref().err().cloned()).collect(),
                accuracy: MeanStd::of(ok.iter().map(|s| Some(s.accuracy))),
                delta_dp: MeanStd::of(ok.iter().map(|s| s.delta_dp)),
                delta_deo: MeanStd::of(ok.iter().map(|s| s.delta_deo)),
                p_percent: MeanStd::of(ok.iter().map(|s| s.p_percent)),
                disc_sel_rate: MeanStd::of(ok.iter().map(|s| s.disc_sel_rate)),
            }
        })
        .collect())
}

/// Group statistics of the full training table, as used for rebalancing.
pub fn training_group_stats(train: &DatasetTable) -> Result<crate::data::GroupStats> {
    group_statistics(train)
}
