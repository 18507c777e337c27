//! The full siamese pair classifier: encoder plus matching head.

use std::collections::BTreeMap;

use rand::Rng;

use crate::classifier::{self, HeadParams, LabeledPair, HEAD_TENSORS};
use crate::encoder::{self, EncoderParams, Side, ENCODER_TENSORS, SRC_EMB, TGT_EMB};
use crate::error::{Error, Result};
use crate::ndiff::{GradSink, ParamId, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::text::Sentence;

pub const DEFAULT_EMB: usize = 128;
pub const DEFAULT_HIDDEN: usize = 128;
pub const DEFAULT_MATCHING: usize = 128;
pub const DEFAULT_INIT_SCALE: f64 = 0.08;

const HEAD_FIRST: ParamId = ParamId(ENCODER_TENSORS);
pub const NUM_TENSORS: usize = ENCODER_TENSORS + HEAD_TENSORS;

/// Layer sizes: embedding `emb` (e), GRU hidden `hidden` (d), matching `matching` (k).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelDims {
    pub src_vocab: usize,
    pub tgt_vocab: usize,
    pub emb: usize,
    pub hidden: usize,
    pub matching: usize,
}

impl ModelDims {
    pub fn new(src_vocab: usize, tgt_vocab: usize) -> Self {
        ModelDims {
            src_vocab,
            tgt_vocab,
            emb: DEFAULT_EMB,
            hidden: DEFAULT_HIDDEN,
            matching: DEFAULT_MATCHING,
        }
    }

    pub fn with_sizes(mut self, emb: usize, hidden: usize, matching: usize) -> Self {
        self.emb = emb;
        self.hidden = hidden;
        self.matching = matching;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.src_vocab,
            self.tgt_vocab,
            self.emb,
            self.hidden,
            self.matching,
        ];
        if all.contains(&0) {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        Ok(())
    }

    /// Parameter tensor shapes in checkpoint order.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let (e, d, k) = (self.emb, self.hidden, self.matching);
        let gru = [
            vec![d, e],
            vec![d, e],
            vec![d, e],
            vec![d, d],
            vec![d, d],
            vec![d, d],
            vec![d],
            vec![d],
            vec![d],
        ];
        let mut v = vec![vec![self.src_vocab, e], vec![self.tgt_vocab, e]];
        v.extend(gru.iter().cloned());
        v.extend(gru.iter().cloned());
        v.extend([vec![k, 2 * d], vec![k, 2 * d], vec![k], vec![k], vec![]]);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SiameseModel<T> {
    pub encoder: EncoderParams<T>,
    pub head: HeadParams<T>,
}

impl<T: Scalar> SiameseModel<T> {
    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn random(dims: ModelDims, scale: f64, rng: &mut impl Rng) -> Result<Self> {
        dims.validate()?;
        let encoder = EncoderParams::random(
            dims.src_vocab,
            dims.tgt_vocab,
            dims.emb,
            dims.hidden,
            scale,
            rng,
        );
        let head = HeadParams::random(dims.matching, 2 * dims.hidden, scale, rng);
        Ok(SiameseModel { encoder, head })
    }

    /// Builds a model from tensors in checkpoint order, checking each shape.
    pub fn from_tensors(dims: ModelDims, tensors: Vec<Tensor<T>>) -> Result<Self> {
        dims.validate()?;
        let shapes = dims.shapes();
        if tensors.len() != shapes.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        let mut model = SiameseModel {
            encoder: EncoderParams {
                src_emb: Tensor::zeros(&shapes[0]),
                tgt_emb: Tensor::zeros(&shapes[1]),
                fwd: encoder::GruParams::zeros(dims.hidden, dims.emb),
                bwd: encoder::GruParams::zeros(dims.hidden, dims.emb),
            },
            head: HeadParams::zeros(dims.matching, 2 * dims.hidden),
        };
        for (slot, t) in model.tensors_mut().into_iter().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(Error::shape("from_tensors", slot.shape(), t.shape()));
            }
            *slot = t;
        }
        Ok(model)
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            src_vocab: self.encoder.src_emb.shape()[0],
            tgt_vocab: self.encoder.tgt_emb.shape()[0],
            emb: self.encoder.emb(),
            hidden: self.encoder.hidden(),
            matching: self.head.k(),
        }
    }

    /// All parameter tensors; index `i` is recorded as `ParamId(i)`.
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut v = self.encoder.tensors();
        v.extend(self.head.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> SiameseModel<U> {
        let tensors = self.tensors().into_iter().map(Tensor::cast).collect();
        SiameseModel::from_tensors(self.dims(), tensors).expect("same dims")
    }

    /// Records the full graph for one pair and returns the probability node.
    pub fn forward_pair(&self, tape: &mut Tape<T>, src: &Sentence, tgt: &Sentence) -> Result<Var> {
        let hs = encoder::encode(src, Side::Source, &self.encoder, tape)?;
        let ht = encoder::encode(tgt, Side::Target, &self.encoder, tape)?;
        let (h1, h2) = classifier::match_features(tape, hs.h, ht.h)?;
        let head = self.head.record(tape, HEAD_FIRST)?;
        classifier::probability(tape, h1, h2, &head)
    }

    /// Records the graph for one labeled pair; returns `(probability, loss)` nodes.
    pub fn example_loss(&self, tape: &mut Tape<T>, pair: &LabeledPair) -> Result<(Var, Var)> {
        let p = self.forward_pair(tape, &pair.src, &pair.tgt)?;
        let loss = tape.binary_cross_entropy(p, pair.y())?;
        Ok((p, loss))
    }

    /// Probability that `src` and `tgt` translate each other.
    pub fn score(&self, src: &Sentence, tgt: &Sentence) -> Result<T> {
        let mut tape = Tape::new();
        let p = self.forward_pair(&mut tape, src, tgt)?;
        Ok(tape.value(p).data()[0])
    }

    /// Sentence vector for one side, detached from any tape.
    pub fn sentence_vector(&self, sentence: &Sentence, side: Side) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let v = encoder::encode(sentence, side, &self.encoder, &mut tape)?;
        Ok(tape.value(v.h).clone())
    }

    /// Head output for precomputed sentence vectors; equals [`Self::score`] on the same sentences.
    pub fn score_vectors(&self, hs: &Tensor<T>, ht: &Tensor<T>) -> Result<T> {
        let mut tape = Tape::new();
        let a = tape.input(hs.clone())?;
        let b = tape.input(ht.clone())?;
        let (h1, h2) = classifier::match_features(&mut tape, a, b)?;
        let head = self.head.record(&mut tape, HEAD_FIRST)?;
        let p = classifier::probability(&mut tape, h1, h2, &head)?;
        Ok(tape.value(p).data()[0])
    }

    /// Summed loss over `pairs` and its gradient for every parameter.
    pub fn loss_and_grads(&self, pairs: &[LabeledPair]) -> Result<(T, ModelGrads<T>)> {
        if pairs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut grads = ModelGrads::zeros_like(self);
        let mut total = T::zero();
        for pair in pairs {
            total = total + self.accumulate_example(pair, &mut grads)?;
        }
        Ok((total, grads))
    }

    /// Adds one example's gradient into `grads` and returns its loss.
    pub fn accumulate_example(&self, pair: &LabeledPair, grads: &mut ModelGrads<T>) -> Result<T> {
        let mut tape = Tape::new();
        let (_, loss) = self.example_loss(&mut tape, pair)?;
        tape.backward_into(loss, grads)?;
        Ok(tape.value(loss).data()[0])
    }
}

/// Gradient buffers with the model's parameter layout. Embedding tables are
/// kept as sparse rows since one example touches only a few of them.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads<T> {
    shapes: Vec<Vec<usize>>,
    dense: Vec<Vec<T>>,
    rows: Vec<BTreeMap<usize, Vec<T>>>,
}

fn is_embedding(id: usize) -> bool {
    id == SRC_EMB.0 || id == TGT_EMB.0
}

impl<T: Scalar> ModelGrads<T> {
    pub fn zeros_like(model: &SiameseModel<T>) -> Self {
        let shapes: Vec<Vec<usize>> = model.tensors().iter().map(|t| t.shape().to_vec()).collect();
        let dense = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if is_embedding(i) {
                    Vec::new()
                } else {
                    vec![T::zero(); s.iter().product()]
                }
            })
            .collect();
        ModelGrads {
            rows: vec![BTreeMap::new(); shapes.len()],
            shapes,
            dense,
        }
    }

    pub fn num_tensors(&self) -> usize {
        self.shapes.len()
    }

    /// Adds `other` into `self`, parameter by parameter and row by row in index order.
    pub fn add(&mut self, other: &ModelGrads<T>) {
        for (a, b) in self.dense.iter_mut().zip(&other.dense) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            for (&r, g) in b {
                add_row(a, r, g);
            }
        }
    }

    /// Writes the full gradient of tensor `i` into `out`.
    pub fn write_dense(&self, i: usize, out: &mut Vec<T>) {
        if is_embedding(i) {
            let cols = self.shapes[i][1];
            out.clear();
            out.resize(self.shapes[i].iter().product(), T::zero());
            for (&r, g) in &self.rows[i] {
                out[r * cols..(r + 1) * cols].copy_from_slice(g);
            }
        } else {
            out.clear();
            out.extend_from_slice(&self.dense[i]);
        }
    }

    pub fn to_tensor(&self, i: usize) -> Tensor<T> {
        let mut data = Vec::new();
        self.write_dense(i, &mut data);
        Tensor::new(self.shapes[i].clone(), data).expect("shape matches")
    }

    pub fn all_finite(&self) -> bool {
        self.dense.iter().flatten().all(|v| v.is_finite())
            && self
                .rows
                .iter()
                .flat_map(|m| m.values().flatten())
                .all(|v| v.is_finite())
    }
}

fn add_row<T: Scalar>(rows: &mut BTreeMap<usize, Vec<T>>, row: usize, grad: &[T]) {
    match rows.get_mut(&row) {
        Some(acc) => {
            for (a, &g) in acc.iter_mut().zip(grad) {
                *a = *a + g;
            }
        }
        None => {
            rows.insert(row, grad.to_vec());
        }
    }
}

impl<T: Scalar> GradSink<T> for ModelGrads<T> {
    fn dense(&mut self, id: ParamId, grad: &[T]) {
        for (a, &g) in self.dense[id.0].iter_mut().zip(grad) {
            *a = *a + g;
        }
    }

    fn row(&mut self, id: ParamId, row: usize, grad: &[T]) {
        if is_embedding(id.0) {
            add_row(&mut self.rows[id.0], row, grad);
        } else {
            let cols = self.shapes[id.0][1];
            for (a, &g) in self.dense[id.0][row * cols..(row + 1) * cols]
                .iter_mut()
                .zip(grad)
            {
                *a = *a + g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndiff::fd::{central_diff, rel_err};
    use crate::text::TokenId;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sentence(ids: &[u32]) -> Sentence {
        Sentence {
            ids: ids.iter().map(|&i| TokenId(i)).collect(),
            surface: String::new(),
        }
    }

    fn batch() -> Vec<LabeledPair> {
        vec![
            LabeledPair { src: sentence(&[4, 5, 6]), tgt: sentence(&[7, 4]), label: true },
            LabeledPair { src: sentence(&[8]), tgt: sentence(&[5, 6, 9, 4]), label: false },
            LabeledPair { src: sentence(&[9, 4, 7, 5, 6, 8]), tgt: sentence(&[6]), label: true },
        ]
    }

    #[test]
    fn full_model_gradient_matches_finite_differences() {
        let dims = ModelDims::new(10, 10).with_sizes(4, 4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = SiameseModel::<f64>::random(dims, 0.5, &mut rng).unwrap();
        let pairs = batch();
        let (_, grads) = model.loss_and_grads(&pairs).unwrap();
        for i in 0..NUM_TENSORS {
            let numeric = central_diff(model.tensors()[i].data(), 1e-3, |v| {
                let mut m = model.clone();
                m.tensors_mut()[i].data_mut().copy_from_slice(v);
                m.loss_and_grads(&pairs).unwrap().0
            });
            let analytic = grads.to_tensor(i);
            for (a, n) in analytic.data().iter().zip(&numeric) {
                assert!(rel_err(*a, *n) < 1e-4, "tensor {i}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn cached_vectors_score_identically() {
        let dims = ModelDims::new(10, 12).with_sizes(3, 5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = SiameseModel::<f64>::random(dims, 0.3, &mut rng).unwrap();
        let (s, t) = (sentence(&[4, 9, 2]), sentence(&[11, 5]));
        let hs = model.sentence_vector(&s, Side::Source).unwrap();
        let ht = model.sentence_vector(&t, Side::Target).unwrap();
        assert_eq!(
            model.score(&s, &t).unwrap().to_bits(),
            model.score_vectors(&hs, &ht).unwrap().to_bits()
        );
    }

    #[test]
    fn single_precision_tracks_double() {
        let dims = ModelDims::new(10, 10).with_sizes(6, 5, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let model = SiameseModel::<f64>::random(dims, 0.3, &mut rng).unwrap();
        let narrow: SiameseModel<f32> = model.cast();
        for pair in batch() {
            let a = model.score(&pair.src, &pair.tgt).unwrap();
            let b = narrow.score(&pair.src, &pair.tgt).unwrap() as f64;
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn from_tensors_checks_shapes() {
        let dims = ModelDims::new(6, 6).with_sizes(2, 2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = SiameseModel::<f64>::random(dims, 0.1, &mut rng).unwrap();
        let tensors: Vec<_> = model.tensors().into_iter().cloned().collect();
        assert_eq!(SiameseModel::from_tensors(dims, tensors.clone()).unwrap(), model);
        let wrong = ModelDims::new(7, 6).with_sizes(2, 2, 2);
        assert!(SiameseModel::from_tensors(wrong, tensors).is_err());
        assert_eq!(dims.shapes().len(), NUM_TENSORS);
        assert!(ModelDims::new(0, 3).validate().is_err());
    }
}
