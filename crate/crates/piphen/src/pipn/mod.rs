//! Interaction prediction: scene graphs with physics-aware attention, a
//! causal temporal stack, conservation-regularized training, and a
//! three-way uncertainty estimate.

pub mod graph;
pub mod loss;
pub mod model;
pub mod train;
pub mod uncertainty;

pub use graph::{build_graph, default_radius, PhysicsGraph, EDGE_FEATURE_WIDTH, NODE_FEATURE_WIDTH};
pub use loss::{loss_energy, loss_momentum, loss_pred, loss_total, loss_total_tape, TapeLoss};
pub use model::{
    default_task_tokens, encode_task, fuse, init_pipn, pctcn_predict, physgcn_forward, pipn_forward,
    predicted_trajectory, relational_attention, scenes_from_trajectory, PipnConfig, PipnModel, PipnOutput,
    STATE_WIDTH,
};
pub use train::{dataset_loss, make_dataset, train_pipn, PipnSample, PipnTrainConfig};
pub use uncertainty::{estimate_uncertainty, UncertaintyEstimate};

use crate::autodiff::AutodiffError;
use crate::physics::PhysicsError;

#[derive(Debug, thiserror::Error)]
pub enum PipnError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Params, Tape, Tensor};
    use crate::physics::{RigidBody, WorldState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scene(rng: &mut ChaCha8Rng, n: usize) -> WorldState {
        let bodies = (0..n)
            .map(|i| {
                RigidBody::new(
                    i as u32,
                    rng.gen_range(0.5..3.0),
                    [rng.gen_range(-2.0..2.0), rng.gen_range(0.0..4.0)],
                    [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    rng.gen_range(0.2..0.6),
                )
                .unwrap()
            })
            .collect();
        WorldState::new(bodies, 9.81)
    }

    #[test]
    fn attention_weights_normalize_and_symmetrize() {
        let cfg = PipnConfig::small();
        let model = init_pipn(&cfg, 4).unwrap();
        let h_i = vec![0.3; cfg.d_h];
        // identical neighbors with zero edge features split evenly
        let h_js = vec![vec![0.1; cfg.d_h]; 3];
        let e = [[0.0; EDGE_FEATURE_WIDTH]; 3];
        let alpha = relational_attention(&h_i, &h_js, &e, &model.params, 0).unwrap();
        for a in &alpha {
            assert!((a - 1.0 / 3.0).abs() < 1e-12);
        }
        // distinct neighbors still sum to one
        let h_js: Vec<Vec<f64>> = (0..4).map(|k| vec![k as f64 * 0.2; cfg.d_h]).collect();
        let e = [[0.5; EDGE_FEATURE_WIDTH]; 4];
        let alpha = relational_attention(&h_i, &h_js, &e, &model.params, 1).unwrap();
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn attention_is_shift_invariant() {
        // adding a constant to every logit must not change the weights;
        // compare against a direct softmax over manually shifted logits
        let logits = [0.4, -1.1, 2.0, 0.0];
        let softmax = |xs: &[f64]| {
            let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.iter().map(|e| e / z).collect::<Vec<f64>>()
        };
        let base = softmax(&logits);
        let shifted: Vec<f64> = logits.iter().map(|x| x + 7.3).collect();
        let moved = softmax(&shifted);
        for (a, b) in base.iter().zip(&moved) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn physgcn_output_shape_and_isolated_node() {
        let cfg = PipnConfig::small();
        let model = init_pipn(&cfg, 5).unwrap();
        let scene = WorldState::new(
            vec![RigidBody::new(0, 1.0, [0.0, 0.0], [0.0; 2], 0.3).unwrap()],
            0.0,
        );
        let g = build_graph(&scene, 1.0, cfg.d_h).unwrap();
        let tape = Tape::new();
        let r = physgcn_forward(&tape, &model.params, &cfg, &g).unwrap().unwrap();
        assert_eq!(tape.shape_of(r), vec![1, cfg.d_h]);
        // isolated node reduces to layered ReLU(W1 h)
        let mut h = tape.constant_vector(g.nodes[0].clone());
        for l in 0..cfg.gcn_layers {
            let w1 = tape.param(&model.params, &format!("gcn{l}.w1")).unwrap();
            h = tape.relu(tape.matmul(h, w1).unwrap());
        }
        let direct = tape.value_of(h).data;
        assert_eq!(tape.value_of(tape.row(r, 0).unwrap()).data, direct);
    }

    #[test]
    fn physgcn_is_permutation_equivariant() {
        let cfg = PipnConfig::small();
        let model = init_pipn(&cfg, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..5 {
            let scene = random_scene(&mut rng, 5);
            let mut permuted = scene.clone();
            permuted.bodies.reverse();
            let g1 = build_graph(&scene, 5.0, cfg.d_h).unwrap();
            let g2 = build_graph(&permuted, 5.0, cfg.d_h).unwrap();
            let tape = Tape::new();
            let r1 = physgcn_forward(&tape, &model.params, &cfg, &g1).unwrap().unwrap();
            let r2 = physgcn_forward(&tape, &model.params, &cfg, &g2).unwrap().unwrap();
            let (v1, v2) = (tape.value_of(r1), tape.value_of(r2));
            let n = 5;
            for i in 0..n {
                let a = &v1.data[i * cfg.d_h..(i + 1) * cfg.d_h];
                let b = &v2.data[(n - 1 - i) * cfg.d_h..(n - i) * cfg.d_h];
                for (x, y) in a.iter().zip(b) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn fusion_examples() {
        let cfg = PipnConfig::small();
        let model = init_pipn(&cfg, 7).unwrap();
        let tape = Tape::new();
        let tokens = default_task_tokens(&cfg, 0.01, 4, 9.81);
        let task = encode_task(&tape, &model.params, &cfg, &tokens).unwrap();

        // empty graph projects the task vector alone
        let fused = fuse(&tape, &model.params, &cfg, task, None).unwrap();
        assert_eq!(tape.shape_of(fused), vec![cfg.d_rep]);
        let direct = tape
            .matmul(task, tape.param(&model.params, "fuse.proj").unwrap())
            .unwrap();
        assert_eq!(tape.value_of(fused).data, tape.value_of(direct).data);

        // one node: attention weight is 1, fused = proj(W_V h)
        let h = tape.constant(Tensor::matrix(1, cfg.d_h, vec![0.25; cfg.d_h]).unwrap());
        let fused1 = fuse(&tape, &model.params, &cfg, task, Some(h)).unwrap();
        let wv = tape.param(&model.params, "fuse.wv").unwrap();
        let v = tape.matmul(tape.row(h, 0).unwrap(), wv).unwrap();
        let expect = tape.matmul(v, tape.param(&model.params, "fuse.proj").unwrap()).unwrap();
        for (a, b) in tape.value_of(fused1).data.iter().zip(tape.value_of(expect).data) {
            assert!((a - b).abs() < 1e-12);
        }

        // duplicating every node renormalizes to the same result
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<f64> = (0..2 * cfg.d_h).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2 = tape.constant(Tensor::matrix(2, cfg.d_h, rows.clone()).unwrap());
        let mut doubled = rows.clone();
        doubled.extend_from_slice(&rows);
        let r4 = tape.constant(Tensor::matrix(4, cfg.d_h, doubled).unwrap());
        let f2 = fuse(&tape, &model.params, &cfg, task, Some(r2)).unwrap();
        let f4 = fuse(&tape, &model.params, &cfg, task, Some(r4)).unwrap();
        for (a, b) in tape.value_of(f2).data.iter().zip(tape.value_of(f4).data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn random_history(tape: &Tape, rng: &mut ChaCha8Rng, t_len: usize, d_h: usize) -> Vec<Vec<f64>> {
        let _ = tape;
        (0..t_len)
            .map(|_| (0..d_h).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect()
    }

    fn predict_rows(cfg: &PipnConfig, params: &Params, history: &[Vec<f64>]) -> Vec<f64> {
        let tape = Tape::new();
        let hist: Vec<_> = history.iter().map(|h| tape.constant_vector(h.clone())).collect();
        let (s, _) = pctcn_predict(&tape, params, cfg, &hist, None, None).unwrap();
        tape.value_of(s).data
    }

    #[test]
    fn temporal_stack_is_causal() {
        let cfg = PipnConfig::small();
        let model = init_pipn(&cfg, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let t_len = 6;
        for _ in 0..4 {
            let base = random_history(&Tape::new(), &mut rng, t_len, cfg.d_h);
            let out = predict_rows(&cfg, &model.params, &base);
            for t in 0..t_len - 1 {
                let mut fut = base.clone();
                for row in fut.iter_mut().skip(t + 1) {
                    for x in row.iter_mut() {
                        *x += rng.gen_range(-1.0..1.0);
                    }
                }
                let out2 = predict_rows(&cfg, &model.params, &fut);
                // rows <= t unaffected by perturbing steps > t
                for row in 0..=t {
                    for c in 0..STATE_WIDTH {
                        assert_eq!(out[row * STATE_WIDTH + c], out2[row * STATE_WIDTH + c]);
                    }
                }
            }
        }
    }

    #[test]
    fn receptive_field_is_1021() {
        let cfg = PipnConfig::default();
        assert_eq!(cfg.receptive_field(), 1021);
        // impulse response: with all-ones kernels, an impulse at step 0
        // reaches exactly steps 0..1020
        let mut params = Params::new();
        let d = 1;
        let small = PipnConfig { d_h: 7, ..cfg };
        let _ = small;
        let ones = |c: usize, k: usize| Tensor::new(vec![c, c, k], vec![1.0; c * c * k]).unwrap();
        let probe = PipnConfig {
            d_h: d,
            ..PipnConfig::default()
        };
        for b in 0..probe.tcn_blocks {
            params.insert(format!("tcn{b}.conv1"), ones(d, probe.kernel));
            params.insert(format!("tcn{b}.conv2"), ones(d, probe.kernel));
            params.insert(format!("tcn{b}.bias1"), Tensor::vector(vec![0.0; d]));
            params.insert(format!("tcn{b}.bias2"), Tensor::vector(vec![0.0; d]));
        }
        let t_len = 1100;
        let tape = Tape::new();
        let mut x = tape.constant(Tensor::new(vec![d, t_len], {
            let mut v = vec![0.0; t_len];
            v[0] = 1.0;
            v
        }).unwrap());
        for (b, dil) in probe.dilations().iter().enumerate() {
            let w1 = tape.param(&params, &format!("tcn{b}.conv1")).unwrap();
            let w2 = tape.param(&params, &format!("tcn{b}.conv2")).unwrap();
            let y = tape.relu(tape.conv1d_causal(x, w1, *dil).unwrap());
            let y2 = tape.relu(tape.conv1d_causal(y, w2, *dil).unwrap());
            x = tape.add(x, y2).unwrap();
        }
        let out = tape.value_of(x).data;
        assert!(out[1020] > 0.0);
        assert_eq!(out[1021], 0.0);
    }

    #[test]
    fn variance_head_is_positive() {
        let cfg = PipnConfig::small();
        let model = init_pipn(&cfg, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let hist = random_history(&Tape::new(), &mut rng, 5, cfg.d_h);
        let tape = Tape::new();
        let h: Vec<_> = hist.iter().map(|r| tape.constant_vector(r.clone())).collect();
        let (_, sigma) = pctcn_predict(&tape, &model.params, &cfg, &h, None, None).unwrap();
        assert!(tape.value_of(sigma).data.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn dynamic_mask_blocks_pre_event_history() {
        let cfg = PipnConfig { dynamic_mask: true, ..PipnConfig::small() };
        let model = init_pipn(&cfg, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t_len = 6;
        let base = random_history(&Tape::new(), &mut rng, t_len, cfg.d_h);
        let run = |hist: &[Vec<f64>], event: Option<usize>| {
            let tape = Tape::new();
            let h: Vec<_> = hist.iter().map(|r| tape.constant_vector(r.clone())).collect();
            let (s, _) = pctcn_predict(&tape, &model.params, &cfg, &h, event, None).unwrap();
            tape.value_of(s).data
        };
        let masked = run(&base, Some(4));
        let unmasked = run(&base, None);
        assert_ne!(masked, unmasked);
        // with the toggle off, the event flag is ignored
        let plain_cfg = PipnConfig { dynamic_mask: false, ..cfg };
        let plain = init_pipn(&plain_cfg, 12).unwrap();
        let run_plain = |event: Option<usize>| {
            let tape = Tape::new();
            let h: Vec<_> = base.iter().map(|r| tape.constant_vector(r.clone())).collect();
            let (s, _) = pctcn_predict(&tape, &plain.params, &plain_cfg, &h, event, None).unwrap();
            tape.value_of(s).data
        };
        assert_eq!(run_plain(Some(4)), run_plain(None));
    }
}
