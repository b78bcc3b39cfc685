//! Minimal reverse-mode automatic differentiation over dense f64 tensors.
//!
//! One [`Tape`] per forward computation; parameters live in a [`Params`]
//! store that outlives tapes and is updated by [`AdamW`].

mod checkpoint;
mod grad_check;
mod optim;
mod tape;
mod tensor;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use grad_check::{collected_grads, max_relative_error, numeric_gradient};
pub use optim::{AdamW, OptimConfig};
pub use tape::{Tape, Value};
pub use tensor::{Params, Tensor};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unknown parameter '{0}'")]
    UnknownParam(String),
    #[error("duplicate parameter '{0}'")]
    DuplicateParam(String),
    #[error("parameter '{0}' has no gradient")]
    MissingGrad(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Seeded parameter initializers used by every network in the crate.
pub mod init {
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    use super::Tensor;

    /// Uniform(-limit, limit) with the Glorot limit for a fan-in/fan-out pair.
    pub fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
        Tensor { shape: vec![rows, cols], data, requires_grad: false, grad: None }
    }

    pub fn conv_kernel(rng: &mut ChaCha8Rng, c_out: usize, c_in: usize, k: usize) -> Tensor {
        let fan_in = c_in * k;
        let limit = (6.0 / (fan_in + c_out) as f64).sqrt();
        let data = (0..c_out * c_in * k).map(|_| rng.gen_range(-limit..limit)).collect();
        Tensor { shape: vec![c_out, c_in, k], data, requires_grad: false, grad: None }
    }

    pub fn zeros_vec(n: usize) -> Tensor {
        Tensor::vector(vec![0.0; n])
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn matmul_shapes() {
        let tape = Tape::new();
        let a = tape.constant(Tensor::matrix(2, 3, vec![1.0; 6]).unwrap());
        let b = tape.constant(Tensor::matrix(3, 1, vec![1.0; 3]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.shape_of(c), vec![2, 1]);
        assert_eq!(tape.value_of(c).data, vec![3.0, 3.0]);
        let bad = tape.constant(Tensor::matrix(2, 2, vec![1.0; 4]).unwrap());
        assert!(tape.matmul(a, bad).is_err());
    }

    #[test]
    fn relu_definition() {
        let tape = Tape::new();
        let x = tape.constant_vector(vec![-2.0, 0.0, 3.0]);
        let y = tape.relu(x);
        assert_eq!(tape.value_of(y).data, vec![0.0, 0.0, 3.0]);
    }

    #[test]
    fn softmax_symmetry() {
        let tape = Tape::new();
        let x = tape.constant_vector(vec![0.0, 0.0, 0.0]);
        let y = tape.softmax(x).unwrap();
        let d = tape.value_of(y).data;
        for v in d {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    // High-precision scalar oracle for mish: direct evaluation of the
    // defining expression, no guards, valid for moderate |x|.
    fn mish_oracle(x: f64) -> f64 {
        x * ((1.0 + x.exp()).ln()).tanh()
    }

    #[test]
    fn mish_values() {
        let tape = Tape::new();
        let x = tape.constant_vector(vec![0.0, 1.0, 20.0]);
        let y = tape.mish(x);
        let d = tape.value_of(y).data;
        assert_eq!(d[0], 0.0);
        assert!((d[1] - mish_oracle(1.0)).abs() < 1e-12);
        assert!((d[1] - 0.86509).abs() < 1e-5);
        assert!((d[2] - 20.0).abs() < 1e-6, "asymptote: got {}", d[2]);
        // the overflow guard must not fire for huge inputs
        let big = tape.constant_vector(vec![700.0]);
        let yb = tape.mish(big);
        assert!((tape.value_of(yb).data[0] - 700.0).abs() < 1e-9);
    }

    #[test]
    fn square_gradient() {
        let mut params = Params::new();
        params.insert("x", Tensor::scalar(3.0));
        let tape = Tape::new();
        let x = tape.param(&params, "x").unwrap();
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        tape.accumulate_param_grads(&mut params).unwrap();
        assert_eq!(params.get("x").unwrap().grad.as_ref().unwrap()[0], 6.0);
    }

    #[test]
    fn detached_constant_has_zero_grad() {
        let mut params = Params::new();
        params.insert("x", Tensor::scalar(3.0));
        let tape = Tape::new();
        let _x = tape.param(&params, "x").unwrap();
        let c = tape.constant_scalar(5.0);
        let loss = tape.mul(c, c).unwrap();
        tape.backward(loss).unwrap();
        tape.accumulate_param_grads(&mut params).unwrap();
        assert_eq!(params.get("x").unwrap().grad.as_ref().unwrap(), &vec![0.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(AutodiffError::NonScalarLoss(_))));
    }

    #[test]
    fn double_backward_accumulates_twice() {
        let mut params = Params::new();
        params.insert("x", Tensor::scalar(3.0));
        let tape = Tape::new();
        let x = tape.param(&params, "x").unwrap();
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        tape.backward(y).unwrap();
        tape.accumulate_param_grads(&mut params).unwrap();
        assert_eq!(params.get("x").unwrap().grad.as_ref().unwrap()[0], 12.0);
    }

    // Two-layer MLP with Mish against central finite differences.
    fn mlp_loss(params: &Params, input: &[f64]) -> f64 {
        let tape = Tape::new();
        let x = tape.constant_vector(input.to_vec());
        let w1 = tape.param(params, "w1").unwrap();
        let b1 = tape.param(params, "b1").unwrap();
        let w2 = tape.param(params, "w2").unwrap();
        let b2 = tape.param(params, "b2").unwrap();
        let h = tape.matmul(x, w1).unwrap();
        let h = tape.add_bias(h, b1).unwrap();
        let h = tape.mish(h);
        let o = tape.matmul(h, w2).unwrap();
        let o = tape.add_bias(o, b2).unwrap();
        let loss = tape.sum_squares(o).unwrap();
        tape.item(loss)
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut params = Params::new();
        params.insert("w1", init::glorot(&mut rng, 4, 6));
        params.insert("b1", init::zeros_vec(6));
        params.insert("w2", init::glorot(&mut rng, 6, 2));
        params.insert("b2", init::zeros_vec(2));
        let input: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let tape = Tape::new();
        let x = tape.constant_vector(input.clone());
        let w1 = tape.param(&params, "w1").unwrap();
        let b1 = tape.param(&params, "b1").unwrap();
        let w2 = tape.param(&params, "w2").unwrap();
        let b2 = tape.param(&params, "b2").unwrap();
        let h = tape.matmul(x, w1).unwrap();
        let h = tape.add_bias(h, b1).unwrap();
        let h = tape.mish(h);
        let o = tape.matmul(h, w2).unwrap();
        let o = tape.add_bias(o, b2).unwrap();
        let loss = tape.sum_squares(o).unwrap();
        tape.backward(loss).unwrap();
        tape.accumulate_param_grads(&mut params).unwrap();

        let analytic = collected_grads(&params);
        let numeric = numeric_gradient(|p| mlp_loss(p, &input), &params, 1e-5);
        let err = max_relative_error(&analytic, &numeric);
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn forward_bitwise_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let tape = Tape::new();
            let x = tape.constant_vector((0..8).map(|_| rng.gen::<f64>()).collect());
            let y = tape.mish(x);
            let s = tape.softmax(y).unwrap();
            let m = tape.mean(s);
            tape.item(m).to_bits()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn conv1d_causal_left_pad() {
        let tape = Tape::new();
        // identity kernel on the current step only: w[.., k-1] = 1
        let x = tape.constant(Tensor::matrix(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let w = tape.constant(Tensor::new(vec![1, 1, 3], vec![0.0, 0.0, 1.0]).unwrap());
        let y = tape.conv1d_causal(x, w, 2).unwrap();
        assert_eq!(tape.value_of(y).data, vec![1.0, 2.0, 3.0, 4.0]);
        // kernel that reads only x[t - 2*dilation]
        let w2 = tape.constant(Tensor::new(vec![1, 1, 3], vec![1.0, 0.0, 0.0]).unwrap());
        let y2 = tape.conv1d_causal(x, w2, 2).unwrap();
        assert_eq!(tape.value_of(y2).data, vec![0.0, 0.0, 0.0, 0.0]);
    }
}
