//! Negative sampling, epoch construction and the optimization loop.

mod checkpoint;
mod optim;
mod sampling;

pub use checkpoint::{vocab_digest, Checkpoint, MAGIC, VERSION};
pub use optim::{Optimizer, OptimizerKind};
pub use sampling::{build_epoch, sample_negatives};

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::LabeledPair;
use crate::error::{Error, Result};
use crate::kv;
use crate::model::{self, ModelDims, ModelGrads, SiameseModel};
use crate::scalar::Scalar;
use crate::text::Vocabulary;

/// Examples per gradient work unit. Fixed so the summation tree does not
/// depend on the number of worker threads.
const GRAD_CHUNK: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Negatives sampled per source sentence each epoch (m).
    pub negatives: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub emb: usize,
    pub hidden: usize,
    pub matching: usize,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            negatives: 7,
            epochs: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            optimizer: OptimizerKind::ADAM,
            emb: model::DEFAULT_EMB,
            hidden: model::DEFAULT_HIDDEN,
            matching: model::DEFAULT_MATCHING,
            init_scale: model::DEFAULT_INIT_SCALE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.negatives < 1 {
            return bad("m (negatives per source) must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch size must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init scale must be non-negative");
        }
        if self.emb == 0 || self.hidden == 0 || self.matching == 0 {
            return bad("layer sizes must be positive");
        }
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
                return bad("adam needs 0 <= beta < 1 and eps > 0");
            }
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let mut pairs = vec![
            ("m", self.negatives.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("seed", self.seed.to_string()),
            ("optimizer", self.optimizer.name().to_string()),
        ];
        if let OptimizerKind::Adam { beta1, beta2, eps } = self.optimizer {
            pairs.push(("adam_beta1", beta1.to_string()));
            pairs.push(("adam_beta2", beta2.to_string()));
            pairs.push(("adam_eps", eps.to_string()));
        }
        pairs.extend([
            ("emb", self.emb.to_string()),
            ("hidden", self.hidden.to_string()),
            ("matching", self.matching.to_string()),
            ("init_scale", self.init_scale.to_string()),
        ]);
        kv::format(pairs)
    }

    /// Starts from defaults and overrides every key present in `map`.
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = TrainConfig::default();
        c.apply(map)?;
        Ok(c)
    }

    /// Overrides fields named in `map`; unknown keys are ignored.
    pub fn apply(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv::get(map, $key)? {
                    $field = v;
                }
            };
        }
        set!("m", self.negatives);
        set!("epochs", self.epochs);
        set!("batch_size", self.batch_size);
        set!("learning_rate", self.learning_rate);
        set!("seed", self.seed);
        set!("emb", self.emb);
        set!("hidden", self.hidden);
        set!("matching", self.matching);
        set!("init_scale", self.init_scale);
        if let Some(name) = map.get("optimizer") {
            self.optimizer = match name.as_str() {
                "sgd" => OptimizerKind::Sgd,
                "adam" => OptimizerKind::ADAM,
                other => return Err(Error::Config(format!("unknown optimizer {other:?}"))),
            };
        }
        if let OptimizerKind::Adam {
            ref mut beta1,
            ref mut beta2,
            ref mut eps,
        } = self.optimizer
        {
            set!("adam_beta1", *beta1);
            set!("adam_beta2", *beta2);
            set!("adam_eps", *eps);
        }
        Ok(())
    }
}

/// Loss totals for one epoch. `sum_loss` is the summed cross entropy over all
/// `examples`; `mean_loss` divides by the example count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub sum_loss: f64,
    pub mean_loss: f64,
    pub examples: usize,
}

impl EpochStats {
    /// `epoch<TAB>sum_loss<TAB>mean_loss`
    pub fn log_line(&self) -> String {
        format!("{}\t{:.6}\t{:.6}", self.epoch, self.sum_loss, self.mean_loss)
    }
}

/// Seeded generator for epoch `epoch`; parameter initialization uses stream 0.
pub fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

fn check_ids(bootstrap: &[LabeledPair], dims: &ModelDims) -> Result<()> {
    for pair in bootstrap {
        for (s, rows) in [(&pair.src, dims.src_vocab), (&pair.tgt, dims.tgt_vocab)] {
            if s.is_empty() {
                return Err(Error::EmptySentence);
            }
            if let Some(bad) = s.ids.iter().find(|id| id.index() >= rows) {
                return Err(Error::IdOutOfRange {
                    id: bad.index(),
                    rows,
                });
            }
        }
    }
    Ok(())
}

/// Summed loss and gradient over `batch`, computed in parallel chunks and
/// reduced in chunk order.
pub fn batch_gradients<T: Scalar>(
    model: &SiameseModel<T>,
    batch: &[LabeledPair],
) -> Result<(T, ModelGrads<T>)> {
    let parts = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| model.loss_and_grads(chunk))
        .collect::<Result<Vec<_>>>()?;
    let mut parts = parts.into_iter();
    let (mut loss, mut grads) = parts.next().ok_or(Error::EmptyBatch)?;
    for (l, g) in parts {
        loss = loss + l;
        grads.add(&g);
    }
    Ok((loss, grads))
}

/// Trains a fresh model on positive `bootstrap` pairs.
pub fn train<T: Scalar>(
    bootstrap: &[LabeledPair],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<Checkpoint<T>> {
    train_with(bootstrap, src_vocab, tgt_vocab, config, |_, _| Ok(()))
}

/// Like [`train`], calling `on_epoch` with the statistics and a checkpoint after every epoch.
pub fn train_with<T: Scalar>(
    bootstrap: &[LabeledPair],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats, &Checkpoint<T>) -> Result<()>,
) -> Result<Checkpoint<T>> {
    config.validate()?;
    if bootstrap.is_empty() {
        return Err(Error::EmptyCorpus("bootstrap has no pairs".into()));
    }
    let dims = ModelDims::new(src_vocab.len(), tgt_vocab.len()).with_sizes(
        config.emb,
        config.hidden,
        config.matching,
    );
    check_ids(bootstrap, &dims)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = SiameseModel::<T>::random(dims, config.init_scale, &mut init_rng)?;
    let mut ckpt = Checkpoint {
        src_vocab_hash: vocab_digest(src_vocab),
        tgt_vocab_hash: vocab_digest(tgt_vocab),
        model,
        config: config.clone(),
        epoch: 0,
        history: Vec::new(),
    };
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &ckpt.model);

    for epoch in 0..config.epochs {
        let mut rng = epoch_rng(config.seed, epoch);
        let examples = build_epoch(bootstrap, config.negatives, &mut rng)?;
        let mut sum = 0.0;
        for (b, batch) in examples.chunks(config.batch_size).enumerate() {
            let diverged = |loss: f64| Error::Diverged { epoch, batch: b, loss };
            let (loss, grads) = match batch_gradients(&ckpt.model, batch) {
                Err(Error::NonFinite { .. }) => return Err(diverged(f64::NAN)),
                other => other?,
            };
            let loss = loss.as_f64();
            if !loss.is_finite() || !grads.all_finite() {
                return Err(diverged(loss));
            }
            opt.apply(&mut ckpt.model, &grads);
            sum += loss;
        }
        let stats = EpochStats {
            epoch,
            sum_loss: sum,
            mean_loss: sum / examples.len() as f64,
            examples: examples.len(),
        };
        ckpt.epoch = epoch + 1;
        ckpt.history.push(stats);
        on_epoch(&stats, &ckpt)?;
    }
    Ok(ckpt)
}
