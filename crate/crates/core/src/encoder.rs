//! Embedding lookup and the bidirectional GRU sentence encoder.
//!
//! Both languages share one forward and one backward GRU; each language has
//! its own embedding table. A sentence is represented by the final forward
//! state concatenated with the backward state at the first token.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ndiff::{ParamId, Tape, Tensor, Var};
use crate::scalar::Scalar;
use crate::text::Sentence;

/// Which language's embedding table to read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

/// GRU cell weights for hidden size `d` and input size `e`.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams<T> {
    pub w_z: Tensor<T>,
    pub w_r: Tensor<T>,
    pub w_h: Tensor<T>,
    pub u_z: Tensor<T>,
    pub u_r: Tensor<T>,
    pub u_h: Tensor<T>,
    pub b_z: Tensor<T>,
    pub b_r: Tensor<T>,
    pub b_h: Tensor<T>,
}

pub(crate) const GRU_TENSORS: usize = 9;

impl<T: Scalar> GruParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        GruParams {
            w_z: Tensor::zeros(&[hidden, input]),
            w_r: Tensor::zeros(&[hidden, input]),
            w_h: Tensor::zeros(&[hidden, input]),
            u_z: Tensor::zeros(&[hidden, hidden]),
            u_r: Tensor::zeros(&[hidden, hidden]),
            u_h: Tensor::zeros(&[hidden, hidden]),
            b_z: Tensor::zeros(&[hidden]),
            b_r: Tensor::zeros(&[hidden]),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn random(hidden: usize, input: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut u = || T::of(rng.gen_range(-scale..=scale));
        GruParams {
            w_z: Tensor::from_fn(&[hidden, input], &mut u),
            w_r: Tensor::from_fn(&[hidden, input], &mut u),
            w_h: Tensor::from_fn(&[hidden, input], &mut u),
            u_z: Tensor::from_fn(&[hidden, hidden], &mut u),
            u_r: Tensor::from_fn(&[hidden, hidden], &mut u),
            u_h: Tensor::from_fn(&[hidden, hidden], &mut u),
            b_z: Tensor::zeros(&[hidden]),
            b_r: Tensor::zeros(&[hidden]),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    pub fn hidden(&self) -> usize {
        self.b_z.len()
    }

    pub fn input(&self) -> usize {
        self.w_z.shape()[1]
    }

    pub(crate) fn tensors(&self) -> [&Tensor<T>; GRU_TENSORS] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z,
            &self.b_r, &self.b_h,
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut Tensor<T>; GRU_TENSORS] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    /// Records every weight on `tape` under consecutive ids starting at `first`.
    pub fn record(&self, tape: &mut Tape<T>, first: ParamId) -> Result<GruVars> {
        let mut vars = [None; GRU_TENSORS];
        for (i, t) in self.tensors().into_iter().enumerate() {
            vars[i] = Some(tape.param(ParamId(first.0 + i), t)?);
        }
        let [w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h] = vars.map(Option::unwrap);
        Ok(GruVars {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
        })
    }
}

/// GRU weights as recorded on a particular tape.
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub w_z: Var,
    pub w_r: Var,
    pub w_h: Var,
    pub u_z: Var,
    pub u_r: Var,
    pub u_h: Var,
    pub b_z: Var,
    pub b_r: Var,
    pub b_h: Var,
}

/// One GRU update:
///
/// ```text
/// z = sigmoid(W_z x + U_z h + b_z)
/// r = sigmoid(W_r x + U_r h + b_r)
/// c = tanh(W_h x + U_h (r * h) + b_h)
/// h' = (1 - z) * h + z * c
/// ```
pub fn gru_step<T: Scalar>(tape: &mut Tape<T>, h_prev: Var, x: Var, g: &GruVars) -> Result<Var> {
    let gate = |tape: &mut Tape<T>, w: Var, u: Var, b: Var, h: Var| -> Result<Var> {
        let wx = tape.matmul(w, x)?;
        let uh = tape.matmul(u, h)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    };
    let z_pre = gate(tape, g.w_z, g.u_z, g.b_z, h_prev)?;
    let z = tape.sigmoid(z_pre)?;
    let r_pre = gate(tape, g.w_r, g.u_r, g.b_r, h_prev)?;
    let r = tape.sigmoid(r_pre)?;
    let rh = tape.hadamard(r, h_prev)?;
    let c_pre = gate(tape, g.w_h, g.u_h, g.b_h, rh)?;
    let candidate = tape.tanh(c_pre)?;
    let keep = tape.affine(z, -T::one(), T::one())?;
    let kept = tape.hadamard(keep, h_prev)?;
    let fresh = tape.hadamard(z, candidate)?;
    tape.add(kept, fresh)
}

/// Embedding tables plus the shared forward/backward GRUs.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<T> {
    pub src_emb: Tensor<T>,
    pub tgt_emb: Tensor<T>,
    pub fwd: GruParams<T>,
    pub bwd: GruParams<T>,
}

pub(crate) const SRC_EMB: ParamId = ParamId(0);
pub(crate) const TGT_EMB: ParamId = ParamId(1);
pub(crate) const FWD_FIRST: ParamId = ParamId(2);
pub(crate) const BWD_FIRST: ParamId = ParamId(2 + GRU_TENSORS);
pub(crate) const ENCODER_TENSORS: usize = 2 + 2 * GRU_TENSORS;

impl<T: Scalar> EncoderParams<T> {
    pub fn random(
        src_vocab: usize,
        tgt_vocab: usize,
        emb: usize,
        hidden: usize,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut u = || T::of(rng.gen_range(-scale..=scale));
        let src_emb = Tensor::from_fn(&[src_vocab, emb], &mut u);
        let tgt_emb = Tensor::from_fn(&[tgt_vocab, emb], &mut u);
        let fwd = GruParams::random(hidden, emb, scale, rng);
        let bwd = GruParams::random(hidden, emb, scale, rng);
        EncoderParams {
            src_emb,
            tgt_emb,
            fwd,
            bwd,
        }
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden()
    }

    pub fn emb(&self) -> usize {
        self.src_emb.shape()[1]
    }

    fn table(&self, side: Side) -> (ParamId, &Tensor<T>) {
        match side {
            Side::Source => (SRC_EMB, &self.src_emb),
            Side::Target => (TGT_EMB, &self.tgt_emb),
        }
    }

    pub(crate) fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut v = vec![&self.src_emb, &self.tgt_emb];
        v.extend(self.fwd.tensors());
        v.extend(self.bwd.tensors());
        v
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut v = vec![&mut self.src_emb, &mut self.tgt_emb];
        v.extend(self.fwd.tensors_mut());
        v.extend(self.bwd.tensors_mut());
        v
    }
}

/// A sentence representation of size `2d` recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct SentenceVector {
    pub h: Var,
}

/// Looks up one embedding row per token.
pub fn embed<T: Scalar>(
    sentence: &Sentence,
    side: Side,
    params: &EncoderParams<T>,
    tape: &mut Tape<T>,
) -> Result<Vec<Var>> {
    let (id, table) = params.table(side);
    sentence
        .ids
        .iter()
        .map(|tok| tape.gather(id, table, tok.index()))
        .collect()
}

/// Runs both GRU directions and returns `[fwd_N ; bwd_1]`.
pub fn encode<T: Scalar>(
    sentence: &Sentence,
    side: Side,
    params: &EncoderParams<T>,
    tape: &mut Tape<T>,
) -> Result<SentenceVector> {
    if sentence.is_empty() {
        return Err(Error::EmptySentence);
    }
    let xs = embed(sentence, side, params, tape)?;
    let fwd = params.fwd.record(tape, FWD_FIRST)?;
    let bwd = params.bwd.record(tape, BWD_FIRST)?;
    let d = params.hidden();

    let mut h = tape.input(Tensor::zeros(&[d]))?;
    for &x in &xs {
        h = gru_step(tape, h, x, &fwd)?;
    }
    let mut hb = tape.input(Tensor::zeros(&[d]))?;
    for &x in xs.iter().rev() {
        hb = gru_step(tape, hb, x, &bwd)?;
    }
    Ok(SentenceVector {
        h: tape.concat(&[h, hb])?,
    })
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

    fn params(vocab: usize, e: usize, d: usize, scale: f64, seed: u64) -> EncoderParams<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        EncoderParams::random(vocab, vocab, e, d, scale, &mut rng)
    }

    #[test]
    fn embed_is_row_lookup() {
        let mut p = params(3, 3, 2, 0.1, 0);
        p.src_emb = Tensor::matrix(3, 3, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
        let mut t = Tape::new();
        let rows = embed(&sentence(&[0]), Side::Source, &p, &mut t).unwrap();
        assert_eq!(t.value(rows[0]).data(), &[1., 0., 0.]);
        let rows = embed(&sentence(&[2, 2]), Side::Source, &p, &mut t).unwrap();
        assert_eq!(t.value(rows[0]), t.value(rows[1]));
        assert!(matches!(
            embed(&sentence(&[3]), Side::Source, &p, &mut t),
            Err(Error::IdOutOfRange { id: 3, rows: 3 })
        ));
    }

    #[test]
    fn embedding_gradient_is_row_indicator() {
        let p = params(4, 3, 2, 0.5, 1);
        let mut t = Tape::new();
        let rows = embed(&sentence(&[1, 3, 1]), Side::Target, &p, &mut t).unwrap();
        let ones = t.input(Tensor::vector(vec![1.0; 3])).unwrap();
        let mut total = t.matmul(rows[0], ones).unwrap();
        for &r in &rows[1..] {
            let s = t.matmul(r, ones).unwrap();
            total = t.add(total, s).unwrap();
        }
        let g = t.backward(total).unwrap();
        let numeric = central_diff(p.tgt_emb.data(), 1e-3, |x| {
            let mut q = p.clone();
            q.tgt_emb = Tensor::matrix(4, 3, x.to_vec()).unwrap();
            let mut t = Tape::new();
            let rows = embed(&sentence(&[1, 3, 1]), Side::Target, &q, &mut t).unwrap();
            rows.iter().flat_map(|&r| t.value(r).data().to_vec()).sum()
        });
        let analytic = g.get(TGT_EMB).unwrap().data();
        assert_eq!(analytic, &[0., 0., 0., 2., 2., 2., 0., 0., 0., 1., 1., 1.]);
        for (a, n) in analytic.iter().zip(&numeric) {
            assert!(rel_err(*a, *n) < 1e-4);
        }
    }

    #[test]
    fn zero_weights_halve_previous_state() {
        let g = GruParams::<f64>::zeros(2, 3);
        let mut t = Tape::new();
        let vars = g.record(&mut t, ParamId(0)).unwrap();
        let h = t.input(Tensor::vector(vec![0.4, -2.0])).unwrap();
        let x = t.input(Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        let out = gru_step(&mut t, h, x, &vars).unwrap();
        assert_eq!(t.value(out).data(), &[0.2, -1.0]);

        let h0 = t.input(Tensor::zeros(&[2])).unwrap();
        let out = gru_step(&mut t, h0, x, &vars).unwrap();
        assert_eq!(t.value(out).data(), &[0.0, 0.0]);
    }

    #[test]
    fn gru_step_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut g = GruParams::<f64>::random(3, 2, 0.5, &mut rng);
        for b in [&mut g.b_z, &mut g.b_r, &mut g.b_h] {
            b.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        }
        let h0 = Tensor::vector(vec![0.3, -0.2, 0.7]);
        let x = Tensor::vector(vec![1.1, -0.4]);
        let w = [0.5, -1.0, 0.25];

        let loss_of = |g: &GruParams<f64>| -> f64 {
            let mut t = Tape::new();
            let vars = g.record(&mut t, ParamId(0)).unwrap();
            let h = t.input(h0.clone()).unwrap();
            let xv = t.input(x.clone()).unwrap();
            let out = gru_step(&mut t, h, xv, &vars).unwrap();
            t.value(out).data().iter().zip(w).map(|(a, b)| a * b).sum()
        };

        let mut t = Tape::new();
        let vars = g.record(&mut t, ParamId(0)).unwrap();
        let h = t.input(h0.clone()).unwrap();
        let xv = t.input(x.clone()).unwrap();
        let out = gru_step(&mut t, h, xv, &vars).unwrap();
        let wv = t.input(Tensor::vector(w.to_vec())).unwrap();
        let loss = t.matmul(out, wv).unwrap();
        let grads = t.backward(loss).unwrap();

        for i in 0..GRU_TENSORS {
            let base = g.tensors()[i].clone();
            let numeric = central_diff(base.data(), 1e-3, |v| {
                let mut q = g.clone();
                q.tensors_mut()[i].data_mut().copy_from_slice(v);
                loss_of(&q)
            });
            let analytic = grads.get(ParamId(i)).unwrap().data();
            for (a, n) in analytic.iter().zip(&numeric) {
                assert!(rel_err(*a, *n) < 1e-4, "tensor {i}: {a} vs {n}");
            }
        }
    }

    #[test]
    fn output_is_two_d_for_any_length() {
        let p = params(10, 4, 3, 0.3, 2);
        for len in 1..8 {
            let ids: Vec<u32> = (0..len).map(|i| (i % 10) as u32).collect();
            let mut t = Tape::new();
            let v = encode(&sentence(&ids), Side::Source, &p, &mut t).unwrap();
            assert_eq!(t.value(v.h).shape(), &[6]);
        }
        let mut t = Tape::new();
        assert!(matches!(
            encode(&sentence(&[]), Side::Source, &p, &mut t),
            Err(Error::EmptySentence)
        ));
    }

    #[test]
    fn single_token_runs_each_direction_once() {
        let p = params(5, 3, 2, 0.4, 3);
        let mut t = Tape::new();
        let v = encode(&sentence(&[4]), Side::Source, &p, &mut t).unwrap();
        let got = t.value(v.h).data().to_vec();

        let mut t2 = Tape::new();
        let x = t2.input(Tensor::vector(p.src_emb.row(4).to_vec())).unwrap();
        let f = p.fwd.record(&mut t2, ParamId(0)).unwrap();
        let b = p.bwd.record(&mut t2, ParamId(100)).unwrap();
        let z = t2.input(Tensor::zeros(&[2])).unwrap();
        let hf = gru_step(&mut t2, z, x, &f).unwrap();
        let hb = gru_step(&mut t2, z, x, &b).unwrap();
        let mut expect = t2.value(hf).data().to_vec();
        expect.extend_from_slice(t2.value(hb).data());
        assert_eq!(got, expect);
    }

    #[test]
    fn reversal_swaps_halves_when_directions_share_weights() {
        // With fwd == bwd, encoding the reversed sentence swaps the two halves.
        let mut p = params(6, 3, 2, 0.6, 4);
        p.bwd = p.fwd.clone();
        let s = sentence(&[1, 5, 2]);
        let r = sentence(&[2, 5, 1]);
        let mut t = Tape::new();
        let hs = encode(&s, Side::Source, &p, &mut t).unwrap();
        let hr = encode(&r, Side::Source, &p, &mut t).unwrap();
        let (a, b) = (t.value(hs.h).data(), t.value(hr.h).data());
        assert_eq!(&a[..2], &b[2..]);
        assert_eq!(&a[2..], &b[..2]);
        assert_ne!(&a[..2], &a[2..]);
    }

    #[test]
    fn appending_a_token_changes_the_vector() {
        let p = params(6, 3, 4, 0.3, 5);
        let mut t = Tape::new();
        let a = encode(&sentence(&[1, 2]), Side::Target, &p, &mut t).unwrap();
        let b = encode(&sentence(&[1, 2, 3]), Side::Target, &p, &mut t).unwrap();
        assert_ne!(t.value(a.h), t.value(b.h));
    }
}
