//! Central finite differences over a parameter store.
//!
//! This only exercises the forward pass of the supplied closure, so it serves
//! as an oracle that is independent of the tape's backward implementation.

use std::collections::BTreeMap;

use super::tensor::Params;

/// Central-difference gradient of `f` with respect to every parameter entry.
pub fn numeric_gradient<F>(f: F, params: &Params, h: f64) -> BTreeMap<String, Vec<f64>>
where
    F: Fn(&Params) -> f64,
{
    let mut out = BTreeMap::new();
    let mut work = params.clone();
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let n = params.get(&name).unwrap().numel();
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let orig = work.get(&name).unwrap().data[i];
            work.get_mut(&name).unwrap().data[i] = orig + h;
            let fp = f(&work);
            work.get_mut(&name).unwrap().data[i] = orig - h;
            let fm = f(&work);
            work.get_mut(&name).unwrap().data[i] = orig;
            grad[i] = (fp - fm) / (2.0 * h);
        }
        out.insert(name, grad);
    }
    out
}

/// Largest relative error between an analytic gradient and the finite
/// difference, with an absolute floor so near-zero entries compare sanely.
pub fn max_relative_error(
    analytic: &BTreeMap<String, Vec<f64>>,
    numeric: &BTreeMap<String, Vec<f64>>,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (name, a) in analytic {
        let n = &numeric[name];
        for (x, y) in a.iter().zip(n) {
            let denom = x.abs().max(y.abs()).max(1.0);
            worst = worst.max((x - y).abs() / denom);
        }
    }
    worst
}

/// Analytic gradients read back from a parameter store after
/// `accumulate_param_grads`.
pub fn collected_grads(params: &Params) -> BTreeMap<String, Vec<f64>> {
    params
        .iter()
        .map(|(name, t)| (name.clone(), t.grad.clone().unwrap_or_else(|| vec![0.0; t.numel()])))
        .collect()
}
