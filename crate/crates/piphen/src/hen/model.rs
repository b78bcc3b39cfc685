//! Policy and Hamiltonian networks over phase-space states, plus the
//! chain-rule energy-drift evaluator used both at inference and as the
//! training penalty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HenError;
use crate::autodiff::{init, Params, Tape, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    /// Generalized coordinates, all robots concatenated.
    pub q: Vec<f64>,
    /// Generalized momenta, p = M qdot with a diagonal positive M.
    pub p: Vec<f64>,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self, HenError> {
        if q.len() != p.len() {
            return Err(HenError::Invalid(format!("q has {} entries, p has {}", q.len(), p.len())));
        }
        Ok(PhaseState { q, p })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.q.clone();
        v.extend_from_slice(&self.p);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HenConfig {
    /// Policy input width (the fused hybrid representation).
    pub d_rep: usize,
    /// Control dimension.
    pub d_u: usize,
    pub policy_hidden: Vec<usize>,
    /// Phase-space dimension per side (q and p each this wide).
    pub phase_dim: usize,
    pub ham_hidden: Vec<usize>,
    /// Actuator limit: actions live in [-u_max, u_max] via a final tanh.
    pub u_max: f64,
    /// Weight of the energy-drift penalty.
    pub lambda: f64,
}

impl Default for HenConfig {
    fn default() -> Self {
        HenConfig {
            d_rep: 768,
            d_u: 2,
            policy_hidden: vec![512; 4],
            phase_dim: 2,
            ham_hidden: vec![256, 128, 64],
            u_max: 1.0,
            lambda: 0.05,
        }
    }
}

impl HenConfig {
    pub fn small() -> Self {
        HenConfig { d_rep: 16, policy_hidden: vec![16; 4], ham_hidden: vec![12, 8, 6], ..Default::default() }
    }
}

#[derive(Debug, Clone)]
pub struct HenModel {
    pub config: HenConfig,
    pub params: Params,
    pub trained: bool,
}

pub fn init_hen(config: &HenConfig, seed: u64) -> Result<HenModel, HenError> {
    if config.d_rep == 0 || config.d_u == 0 || config.phase_dim == 0 || config.u_max <= 0.0 {
        return Err(HenError::Invalid("degenerate architecture".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Params::new();
    let mut widths = vec![config.d_rep];
    widths.extend(&config.policy_hidden);
    widths.push(config.d_u);
    for (l, w) in widths.windows(2).enumerate() {
        p.insert(format!("policy.w{l}"), init::glorot(&mut rng, w[0], w[1]));
        p.insert(format!("policy.b{l}"), init::zeros_vec(w[1]));
    }
    let mut hw = vec![2 * config.phase_dim];
    hw.extend(&config.ham_hidden);
    hw.push(1);
    for (l, w) in hw.windows(2).enumerate() {
        p.insert(format!("ham.w{l}"), init::glorot(&mut rng, w[0], w[1]));
        p.insert(format!("ham.b{l}"), init::zeros_vec(w[1]));
    }
    Ok(HenModel { config: config.clone(), params: p, trained: false })
}

/// Policy MLP on tape: Mish hidden layers, final tanh scaled to u_max.
pub fn policy_tape(tape: &Tape, params: &Params, config: &HenConfig, rep: Value) -> Result<Value, HenError> {
    let shape = tape.shape_of(rep);
    if shape != vec![config.d_rep] {
        return Err(HenError::Invalid(format!("policy expects rep width {}, got {shape:?}", config.d_rep)));
    }
    let mut h = rep;
    let layers = config.policy_hidden.len() + 1;
    for l in 0..layers {
        let w = tape.param(params, &format!("policy.w{l}"))?;
        let b = tape.param(params, &format!("policy.b{l}"))?;
        h = tape.add(tape.matmul(h, w)?, b)?;
        if l + 1 < layers {
            h = tape.mish(h);
        }
    }
    Ok(tape.scale(tape.tanh(h), config.u_max))
}

pub fn policy(model: &HenModel, rep: &[f64]) -> Result<Vec<f64>, HenError> {
    let tape = Tape::new();
    let r = tape.constant_vector(rep.to_vec());
    let u = policy_tape(&tape, &model.params, &model.config, r)?;
    Ok(tape.value_of(u).data)
}

/// Hamiltonian MLP on tape over a flat (q, p) vector; scalar output.
pub fn hamiltonian_tape(tape: &Tape, params: &Params, config: &HenConfig, x: Value) -> Result<Value, HenError> {
    let shape = tape.shape_of(x);
    if shape != vec![2 * config.phase_dim] {
        return Err(HenError::Invalid(format!(
            "hamiltonian expects phase vector of width {}, got {shape:?}",
            2 * config.phase_dim
        )));
    }
    let mut h = x;
    let layers = config.ham_hidden.len() + 1;
    for l in 0..layers {
        let w = tape.param(params, &format!("ham.w{l}"))?;
        let b = tape.param(params, &format!("ham.b{l}"))?;
        h = tape.add(tape.matmul(h, w)?, b)?;
        if l + 1 < layers {
            h = tape.mish(h);
        }
    }
    Ok(tape.sum(h))
}

pub fn hamiltonian(model: &HenModel, x: &PhaseState) -> Result<f64, HenError> {
    let tape = Tape::new();
    let xv = tape.constant_vector(x.flat());
    let h = hamiltonian_tape(&tape, &model.params, &model.config, xv)?;
    Ok(tape.item(h))
}

/// (dH/dq, dH/dp) of any on-tape scalar function of the flat phase vector.
pub fn phase_gradient<F>(f: F, x: &PhaseState) -> Result<(Vec<f64>, Vec<f64>), HenError>
where
    F: FnOnce(&Tape, Value) -> Result<Value, HenError>,
{
    let tape = Tape::new();
    let leaf = tape.leaf(crate::autodiff::Tensor::vector(x.flat()));
    let h = f(&tape, leaf)?;
    tape.backward(h).map_err(HenError::from)?;
    let g = tape.grad_of(leaf);
    let d = x.dim();
    Ok((g[..d].to_vec(), g[d..].to_vec()))
}

/// Chain rule dH/dt = dH/dq . qdot + dH/dp . pdot for any on-tape scalar H.
pub fn dh_dt_with<F>(f: F, x: &PhaseState, qdot: &[f64], pdot: &[f64]) -> Result<f64, HenError>
where
    F: FnOnce(&Tape, Value) -> Result<Value, HenError>,
{
    if qdot.len() != x.dim() || pdot.len() != x.dim() {
        return Err(HenError::Invalid("state derivative dimension mismatch".into()));
    }
    let (dq, dp) = phase_gradient(f, x)?;
    let mut acc = 0.0;
    for i in 0..x.dim() {
        acc += dq[i] * qdot[i] + dp[i] * pdot[i];
    }
    Ok(acc)
}

/// dH/dt of the learned Hamiltonian.
pub fn dh_dt(model: &HenModel, x: &PhaseState, qdot: &[f64], pdot: &[f64]) -> Result<f64, HenError> {
    dh_dt_with(|t, v| hamiltonian_tape(t, &model.params, &model.config, v), x, qdot, pdot)
}

/// ||u - u_expert||^2 + lambda * dhdt^2.
pub fn hen_loss(u: &[f64], u_expert: &[f64], dhdt: f64, lambda: f64) -> Result<f64, HenError> {
    if u.len() != u_expert.len() {
        return Err(HenError::Invalid("action dimension mismatch".into()));
    }
    let task: f64 = u.iter().zip(u_expert).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(task + lambda * dhdt * dhdt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::Rng;

    fn analytic_h(m: f64, g: f64) -> impl Fn(&Tape, Value) -> Result<Value, HenError> {
        // H = p^2 / 2m + m g q for a single degree of freedom (q, p)
        move |tape, x| {
            let q = tape.slice(x, 0, 1)?;
            let p = tape.slice(x, 1, 1)?;
            let ke = tape.scale(tape.sum_squares(p)?, 0.5 / m);
            let pe = tape.scale(tape.sum(q), m * g);
            Ok(tape.add(ke, pe)?)
        }
    }

    #[test]
    fn hamiltonian_is_deterministic_scalar() {
        let cfg = HenConfig { phase_dim: 3, ..HenConfig::small() };
        let model = init_hen(&cfg, 5).unwrap();
        let x = PhaseState::new(vec![0.1, 0.2, -0.3], vec![1.0, -1.0, 0.5]).unwrap();
        let a = hamiltonian(&model, &x).unwrap();
        let b = hamiltonian(&model, &x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn phase_gradient_matches_finite_differences() {
        let cfg = HenConfig { phase_dim: 2, ..HenConfig::small() };
        let model = init_hen(&cfg, 6).unwrap();
        let x = PhaseState::new(vec![0.3, -0.1], vec![0.7, 0.2]).unwrap();
        let f = |t: &Tape, v: Value| hamiltonian_tape(t, &model.params, &model.config, v);
        let (dq, dp) = phase_gradient(f, &x).unwrap();
        let h = 1e-5;
        let flat = x.flat();
        for i in 0..4 {
            let mut plus = flat.clone();
            let mut minus = flat.clone();
            plus[i] += h;
            minus[i] -= h;
            let eval = |v: &[f64]| {
                let x = PhaseState::new(v[..2].to_vec(), v[2..].to_vec()).unwrap();
                hamiltonian(&model, &x).unwrap()
            };
            let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let ad = if i < 2 { dq[i] } else { dp[i - 2] };
            let denom = fd.abs().max(ad.abs()).max(1.0);
            assert!((fd - ad).abs() / denom < 1e-4, "dim {i}: fd {fd} ad {ad}");
        }
    }

    #[test]
    fn dh_dt_zero_for_still_system() {
        let cfg = HenConfig { phase_dim: 2, ..HenConfig::small() };
        let model = init_hen(&cfg, 7).unwrap();
        let x = PhaseState::new(vec![0.5, 0.1], vec![0.2, -0.4]).unwrap();
        assert_eq!(dh_dt(&model, &x, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn analytic_hamiltonian_chain_rule() {
        let (m, g) = (1.0, 9.81);
        // conservative flow: qdot = p/m, pdot = -mg
        let x = PhaseState::new(vec![2.0], vec![2.0]).unwrap();
        let c = dh_dt_with(analytic_h(m, g), &x, &[2.0], &[-g]).unwrap();
        assert!(c.abs() < 1e-12);
        // forced flow: pdot = -g + u with u = 1 gives 9.81*2 + 2*(-8.81) = 2
        let f = dh_dt_with(analytic_h(m, g), &x, &[2.0], &[-8.81]).unwrap();
        assert!((f - 2.0).abs() < 1e-12);
        // the same number from a finite difference of H along the flow
        let eval = |q: f64, p: f64| p * p / (2.0 * m) + m * g * q;
        let d = 1e-6;
        let fd = (eval(2.0 + d * 2.0, 2.0 + d * -8.81) - eval(2.0 - d * 2.0, 2.0 - d * -8.81)) / (2.0 * d);
        assert!((f - fd).abs() < 1e-6);
    }

    #[test]
    fn dh_dt_matches_directional_finite_difference_randomized() {
        let cfg = HenConfig { phase_dim: 3, ..HenConfig::small() };
        let model = init_hen(&cfg, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let rand_vec = |rng: &mut ChaCha8Rng| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
            let x = PhaseState::new(rand_vec(&mut rng), rand_vec(&mut rng)).unwrap();
            let qdot = rand_vec(&mut rng);
            let pdot = rand_vec(&mut rng);
            let ad = dh_dt(&model, &x, &qdot, &pdot).unwrap();
            let d = 1e-5;
            let shift = |s: f64| {
                let q: Vec<f64> = x.q.iter().zip(&qdot).map(|(a, b)| a + s * b).collect();
                let p: Vec<f64> = x.p.iter().zip(&pdot).map(|(a, b)| a + s * b).collect();
                hamiltonian(&model, &PhaseState::new(q, p).unwrap()).unwrap()
            };
            let fd = (shift(d) - shift(-d)) / (2.0 * d);
            let denom = fd.abs().max(ad.abs()).max(1.0);
            assert!((fd - ad).abs() / denom < 1e-4, "ad {ad} fd {fd}");
        }
    }

    #[test]
    fn policy_is_repeatable_bounded_and_pure() {
        let cfg = HenConfig { d_u: 3, u_max: 0.8, ..HenConfig::small() };
        let model = init_hen(&cfg, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let rep: Vec<f64> = (0..cfg.d_rep).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let u = policy(&model, &rep).unwrap();
            assert_eq!(u.len(), 3);
            assert!(u.iter().all(|x| x.abs() <= 0.8));
            assert_eq!(u, policy(&model, &rep).unwrap());
        }
        // inference must not depend on leftover gradient accumulator state
        let rep = vec![0.5; cfg.d_rep];
        let before = policy(&model, &rep).unwrap();
        let tape = Tape::new();
        let leaf = tape.leaf(Tensor::vector(rep.clone()));
        let u = policy_tape(&tape, &model.params, &model.config, leaf).unwrap();
        let loss = tape.sum_squares(u).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(policy(&model, &rep).unwrap(), before);
        assert!(policy(&model, &[0.0; 3]).is_err());
    }

    #[test]
    fn hen_loss_examples() {
        let u = vec![0.5, -0.5];
        assert_eq!(hen_loss(&u, &u, 0.0, 0.05).unwrap(), 0.0);
        assert!((hen_loss(&u, &u, 2.0, 0.05).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(hen_loss(&u, &u, 2.0, 0.0).unwrap(), 0.0);
        let other = vec![0.5, 0.5];
        assert_eq!(hen_loss(&u, &other, 0.0, 0.05).unwrap(), 1.0);
        assert!(hen_loss(&u, &[0.0], 0.0, 0.05).is_err());
        // non-negative, zero iff both terms vanish
        assert!(hen_loss(&u, &other, 3.0, 0.05).unwrap() > 0.0);
    }
}
