//! Reverse-mode gradients of a tiny MLP loss checked against central
//! finite differences.

use piphen::autodiff::{
    collected_grads, max_relative_error, numeric_gradient, Params, Tape, Tensor,
};

fn loss(tape: &Tape, params: &Params) -> piphen::autodiff::Value {
    let x = tape.constant(Tensor::matrix(1, 3, vec![0.3, -0.7, 1.1]).unwrap());
    let w1 = tape.param(params, "w1").unwrap();
    let w2 = tape.param(params, "w2").unwrap();
    let b = tape.param(params, "b").unwrap();
    let h = tape.mish(tape.add_bias(tape.matmul(x, w1).unwrap(), b).unwrap());
    let y = tape.matmul(h, w2).unwrap();
    tape.sum_squares(y).unwrap()
}

fn main() {
    let mut params = Params::new();
    params.insert("w1", Tensor::matrix(3, 4, (0..12).map(|i| 0.1 * i as f64 - 0.5).collect()).unwrap().requires_grad());
    params.insert("w2", Tensor::matrix(4, 2, (0..8).map(|i| 0.05 * i as f64).collect()).unwrap().requires_grad());
    params.insert("b", Tensor::vector(vec![0.1, -0.2, 0.0, 0.3]).requires_grad());

    let tape = Tape::new();
    let l = loss(&tape, &params);
    println!("loss = {:.6}", tape.item(l));
    tape.backward(l).unwrap();
    tape.accumulate_param_grads(&mut params).unwrap();

    let analytic = collected_grads(&params);
    let numeric = numeric_gradient(
        |p| {
            let t = Tape::new();
            let v = loss(&t, p);
            t.item(v)
        },
        &params,
        1e-5,
    );
    let err = max_relative_error(&analytic, &numeric);
    println!("max relative gradient error vs finite differences: {err:.3e}");
    assert!(err < 1e-6);

    for (name, g) in &analytic {
        println!("d loss / d {name} = {:?}", &g[..g.len().min(4)]);
    }
}
