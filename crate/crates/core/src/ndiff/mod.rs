//! Dense tensors and a dynamic reverse-mode tape.
//!
//! A [`Tape`] is rebuilt for every forward pass, so recurrences over
//! variable-length input need no padding or static graph. Only scalar-affine
//! maps broadcast; every other binary op requires identical shapes.

mod tape;
mod tensor;

pub use tape::{probability_epsilon, GradSink, Gradients, ParamId, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::cross_entropy;


#[cfg(test)]
mod tests {
    use super::fd::{central_diff, rel_err};
    use super::*;
    use proptest::prelude::*;

    const STEP: f64 = 1e-3;
    const TOL: f64 = 1e-4;

    #[derive(Clone, Copy, Debug)]
    enum Prim {
        MatMul,
        MatVec,
        Dot,
        Add,
        Sub,
        Hadamard,
        Abs,
        Concat,
        Tanh,
        Sigmoid,
        Affine,
    }

    /// Builds `sum(w * op(a, b))` so every output element feeds the scalar loss.
    fn build(prim: Prim, t: &mut Tape<f64>, a: Var, b: Var, w: &Tensor<f64>) -> Var {
        let out = match prim {
            Prim::MatMul | Prim::MatVec | Prim::Dot => t.matmul(a, b).unwrap(),
            Prim::Add => t.add(a, b).unwrap(),
            Prim::Sub => t.sub(a, b).unwrap(),
            Prim::Hadamard => t.hadamard(a, b).unwrap(),
            Prim::Abs => t.abs(a).unwrap(),
            Prim::Concat => t.concat(&[a, b]).unwrap(),
            Prim::Tanh => t.tanh(a).unwrap(),
            Prim::Sigmoid => t.sigmoid(a).unwrap(),
            Prim::Affine => t.affine(a, -1.7, 0.3).unwrap(),
        };
        let weights = |t: &mut Tape<f64>, n: usize| {
            t.input(Tensor::vector(w.data()[..n].to_vec())).unwrap()
        };
        match t.value(out).shape().to_vec().as_slice() {
            [] => t.affine(out, w.data()[0], 0.0).unwrap(),
            [n] => {
                let wv = weights(t, *n);
                t.matmul(out, wv).unwrap()
            }
            [m, p] => {
                let (m, p) = (*m, *p);
                let wp = weights(t, p);
                let rows = t.matmul(out, wp).unwrap();
                let wm = weights(t, m);
                t.matmul(rows, wm).unwrap()
            }
            other => panic!("unexpected rank {other:?}"),
        }
    }

    fn shapes(prim: Prim, m: usize, n: usize, p: usize) -> (Vec<usize>, Vec<usize>) {
        match prim {
            Prim::MatMul => (vec![m, n], vec![n, p]),
            Prim::MatVec => (vec![m, n], vec![n]),
            _ => (vec![n], vec![n]),
        }
    }

    fn loss_at(prim: Prim, a: &Tensor<f64>, b: &Tensor<f64>, w: &Tensor<f64>) -> f64 {
        let mut t = Tape::new();
        let va = t.param(ParamId(0), a).unwrap();
        let vb = t.param(ParamId(1), b).unwrap();
        let l = build(prim, &mut t, va, vb, w);
        t.value(l).data()[0]
    }

    fn prim_strategy() -> impl Strategy<Value = Prim> {
        prop_oneof![
            Just(Prim::MatMul),
            Just(Prim::MatVec),
            Just(Prim::Dot),
            Just(Prim::Add),
            Just(Prim::Sub),
            Just(Prim::Hadamard),
            Just(Prim::Abs),
            Just(Prim::Concat),
            Just(Prim::Tanh),
            Just(Prim::Sigmoid),
            Just(Prim::Affine),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn primitive_gradients_match_finite_differences(
            prim in prim_strategy(),
            m in 1usize..4, n in 1usize..5, p in 1usize..4,
            vals in prop::collection::vec(-3.0f64..3.0, 64),
        ) {
            let (sa, sb) = shapes(prim, m, n, p);
            let na: usize = sa.iter().product();
            let nb: usize = sb.iter().product();
            let a = Tensor::new(sa.clone(), vals[..na].to_vec()).unwrap();
            let b = Tensor::new(sb.clone(), vals[na..na + nb].to_vec()).unwrap();
            let w = Tensor::vector(vals[32..64].iter().map(|v| v + 0.1).collect());
            // |x| is not differentiable at 0; keep the probe away from the kink.
            if matches!(prim, Prim::Abs) {
                prop_assume!(a.data().iter().all(|x| x.abs() > 10.0 * STEP));
            }

            let mut t = Tape::new();
            let va = t.param(ParamId(0), &a).unwrap();
            let vb = t.param(ParamId(1), &b).unwrap();
            let l = build(prim, &mut t, va, vb, &w);
            let g = t.backward(l).unwrap();

            let num_a = central_diff(a.data(), STEP, |x| {
                loss_at(prim, &Tensor::new(sa.clone(), x.to_vec()).unwrap(), &b, &w)
            });
            let num_b = central_diff(b.data(), STEP, |x| {
                loss_at(prim, &a, &Tensor::new(sb.clone(), x.to_vec()).unwrap(), &w)
            });
            for (an, nu) in g.get(ParamId(0)).unwrap().data().iter().zip(&num_a) {
                prop_assert!(rel_err(*an, *nu) < TOL, "{prim:?} a: {an} vs {nu}");
            }
            for (an, nu) in g.get(ParamId(1)).unwrap().data().iter().zip(&num_b) {
                prop_assert!(rel_err(*an, *nu) < TOL, "{prim:?} b: {an} vs {nu}");
            }
        }

        #[test]
        fn backward_is_bit_deterministic(vals in prop::collection::vec(-3.0f64..3.0, 12)) {
            let a = Tensor::matrix(3, 2, vals[..6].to_vec()).unwrap();
            let x = Tensor::vector(vals[6..8].to_vec());
            let run = || {
                let mut t = Tape::new();
                let va = t.param(ParamId(0), &a).unwrap();
                let vx = t.param(ParamId(1), &x).unwrap();
                let y = t.matmul(va, vx).unwrap();
                let y = t.tanh(y).unwrap();
                let w = t.input(Tensor::vector(vals[8..11].to_vec())).unwrap();
                let s = t.matmul(y, w).unwrap();
                let s = t.sigmoid(s).unwrap();
                let l = t.binary_cross_entropy(s, 1.0).unwrap();
                t.backward(l).unwrap()
            };
            prop_assert_eq!(run(), run());
        }
    }
}
