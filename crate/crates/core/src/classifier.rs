//! Matching features, the translation-probability head and the cross-entropy loss.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ndiff::{cross_entropy, ParamId, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::text::Sentence;

/// Fully connected matching head with hidden size `k` over `2d`-sized sentence vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<T> {
    pub w1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b: Tensor<T>,
    pub w3: Tensor<T>,
    pub c: Tensor<T>,
}

pub(crate) const HEAD_TENSORS: usize = 5;

impl<T: Scalar> HeadParams<T> {
    pub fn zeros(k: usize, two_d: usize) -> Self {
        HeadParams {
            w1: Tensor::zeros(&[k, two_d]),
            w2: Tensor::zeros(&[k, two_d]),
            b: Tensor::zeros(&[k]),
            w3: Tensor::zeros(&[k]),
            c: Tensor::scalar(T::zero()),
        }
    }

    /// Weights uniform in `[-scale, scale]`; `b` and `c` zero.
    pub fn random(k: usize, two_d: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut u = || T::of(rng.gen_range(-scale..=scale));
        HeadParams {
            w1: Tensor::from_fn(&[k, two_d], &mut u),
            w2: Tensor::from_fn(&[k, two_d], &mut u),
            b: Tensor::zeros(&[k]),
            w3: Tensor::from_fn(&[k], &mut u),
            c: Tensor::scalar(T::zero()),
        }
    }

    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub(crate) fn tensors(&self) -> [&Tensor<T>; HEAD_TENSORS] {
        [&self.w1, &self.w2, &self.b, &self.w3, &self.c]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Tensor<T>; HEAD_TENSORS] {
        [
            &mut self.w1,
            &mut self.w2,
            &mut self.b,
            &mut self.w3,
            &mut self.c,
        ]
    }

    pub fn record(&self, tape: &mut Tape<T>, first: ParamId) -> Result<HeadVars> {
        Ok(HeadVars {
            w1: tape.param(ParamId(first.0), &self.w1)?,
            w2: tape.param(ParamId(first.0 + 1), &self.w2)?,
            b: tape.param(ParamId(first.0 + 2), &self.b)?,
            w3: tape.param(ParamId(first.0 + 3), &self.w3)?,
            c: tape.param(ParamId(first.0 + 4), &self.c)?,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    pub w1: Var,
    pub w2: Var,
    pub b: Var,
    pub w3: Var,
    pub c: Var,
}

/// A training example: `label` is true for a translation pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledPair {
    pub src: Sentence,
    pub tgt: Sentence,
    pub label: bool,
}

impl LabeledPair {
    pub fn y<T: Scalar>(&self) -> T {
        if self.label {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// Element-wise product and absolute difference of two sentence vectors.
pub fn match_features<T: Scalar>(tape: &mut Tape<T>, hs: Var, ht: Var) -> Result<(Var, Var)> {
    let product = tape.hadamard(hs, ht)?;
    let diff = tape.sub(hs, ht)?;
    let distance = tape.abs(diff)?;
    Ok((product, distance))
}

/// `sigmoid(w3 . tanh(W1 h1 + W2 h2 + b) + c)`.
pub fn probability<T: Scalar>(tape: &mut Tape<T>, h1: Var, h2: Var, head: &HeadVars) -> Result<Var> {
    let a = tape.matmul(head.w1, h1)?;
    let b = tape.matmul(head.w2, h2)?;
    let s = tape.add(a, b)?;
    let s = tape.add(s, head.b)?;
    let hidden = tape.tanh(s)?;
    let logit = tape.matmul(head.w3, hidden)?;
    let logit = tape.add(logit, head.c)?;
    tape.sigmoid(logit)
}

/// Summed cross entropy `-sum(y log p + (1 - y) log(1 - p))` over a batch of
/// `(p, label)` pairs, with `p` clamped away from 0 and 1.
pub fn batch_loss<T: Scalar>(scored: &[(T, bool)]) -> Result<T> {
    if scored.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(scored.iter().fold(T::zero(), |acc, &(p, y)| {
        acc + cross_entropy(p, if y { T::one() } else { T::zero() })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndiff::fd::{central_diff, rel_err};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn prob_of(head: &HeadParams<f64>, hs: &[f64], ht: &[f64]) -> f64 {
        let mut t = Tape::new();
        let a = t.input(Tensor::vector(hs.to_vec())).unwrap();
        let b = t.input(Tensor::vector(ht.to_vec())).unwrap();
        let (h1, h2) = match_features(&mut t, a, b).unwrap();
        let vars = head.record(&mut t, ParamId(0)).unwrap();
        let p = probability(&mut t, h1, h2, &vars).unwrap();
        t.value(p).data()[0]
    }

    #[test]
    fn matching_spot_values() {
        let mut t = Tape::new();
        let v = t.input(Tensor::vector(vec![0.5, -2.0])).unwrap();
        let (h1, h2) = match_features(&mut t, v, v).unwrap();
        assert_eq!(t.value(h1).data(), &[0.25, 4.0]);
        assert_eq!(t.value(h2).data(), &[0.0, 0.0]);

        let a = t.input(Tensor::vector(vec![1.0, -1.0])).unwrap();
        let b = t.input(Tensor::vector(vec![-1.0, 1.0])).unwrap();
        let (h1, h2) = match_features(&mut t, a, b).unwrap();
        assert_eq!(t.value(h1).data(), &[-1.0, -1.0]);
        assert_eq!(t.value(h2).data(), &[2.0, 2.0]);

        let c = t.input(Tensor::vector(vec![1.0])).unwrap();
        assert!(match_features(&mut t, a, c).is_err());
    }

    #[test]
    fn zero_head_gives_half() {
        let head = HeadParams::<f64>::zeros(3, 4);
        assert_eq!(prob_of(&head, &[1., 2., 3., 4.], &[-1., 0., 9., 2.]), 0.5);
    }

    #[test]
    fn large_bias_saturates() {
        let mut head = HeadParams::<f64>::zeros(3, 2);
        head.c = Tensor::scalar(20.0);
        assert!(prob_of(&head, &[1., 2.], &[3., 4.]) > 0.999999);
    }

    #[test]
    fn loss_spot_values() {
        let ln2 = std::f64::consts::LN_2;
        assert!((batch_loss(&[(0.5, true)]).unwrap() - ln2).abs() < 1e-12);
        assert!((batch_loss(&[(0.5, false)]).unwrap() - ln2).abs() < 1e-12);
        assert!(batch_loss(&[(1.0, true), (0.0, false)]).unwrap() < 1e-11);
        // -ln 0.9 - ln 0.8, evaluated independently
        let expected: f64 = 0.328_504_066_972_036;
        assert!((batch_loss(&[(0.9, true), (0.2, false)]).unwrap() - expected).abs() < 1e-12);
        assert!(matches!(batch_loss::<f64>(&[]), Err(Error::EmptyBatch)));
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut head = HeadParams::<f64>::random(4, 6, 0.7, &mut rng);
        head.b.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        head.c = Tensor::scalar(0.3);
        let hs: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ht: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut t = Tape::new();
        let a = t.input(Tensor::vector(hs.clone())).unwrap();
        let b = t.input(Tensor::vector(ht.clone())).unwrap();
        let (h1, h2) = match_features(&mut t, a, b).unwrap();
        let vars = head.record(&mut t, ParamId(0)).unwrap();
        let p = probability(&mut t, h1, h2, &vars).unwrap();
        let grads = t.backward(p).unwrap();

        for i in 0..HEAD_TENSORS {
            let numeric = central_diff(head.tensors()[i].data(), 1e-3, |v| {
                let mut q = head.clone();
                q.tensors_mut()[i].data_mut().copy_from_slice(v);
                prob_of(&q, &hs, &ht)
            });
            for (an, nu) in grads.get(ParamId(i)).unwrap().data().iter().zip(&numeric) {
                assert!(rel_err(*an, *nu) < 1e-4, "head tensor {i}: {an} vs {nu}");
            }
        }
    }

    proptest! {
        #[test]
        fn probability_is_symmetric_and_in_range(
            seed in any::<u64>(),
            hs in prop::collection::vec(-5.0f64..5.0, 6),
            ht in prop::collection::vec(-5.0f64..5.0, 6),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let head = HeadParams::<f64>::random(5, 6, 1.0, &mut rng);
            let p = prob_of(&head, &hs, &ht);
            prop_assert_eq!(p.to_bits(), prob_of(&head, &ht, &hs).to_bits());
            prop_assert!(p > 0.0 && p < 1.0);
        }

        #[test]
        fn loss_decomposes(
            a in prop::collection::vec((0.001f64..0.999, any::<bool>()), 1..10),
            b in prop::collection::vec((0.001f64..0.999, any::<bool>()), 1..10),
        ) {
            let joint: Vec<_> = a.iter().chain(&b).copied().collect();
            let sum = batch_loss(&a).unwrap() + batch_loss(&b).unwrap();
            prop_assert!((batch_loss(&joint).unwrap() - sum).abs() < 1e-9);
        }
    }
}
