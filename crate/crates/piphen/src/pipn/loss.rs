//! Prediction loss plus conservation penalties, in two forms: plain
//! float functions over trajectories, and tape-built versions used for
//! training. A consistency test keeps the two in lockstep.

use super::model::{PipnConfig, PipnOutput, STATE_WIDTH};
use super::PipnError;
use crate::autodiff::{Tape, Tensor, Value};
use crate::physics::{CollisionEvent, Trajectory};

/// Mean squared position and pose error: (1/(N*T)) sum of
/// ||p_hat - p||^2 + (q_hat - q)^2. Velocities are covered by the
/// conservation terms, not here.
pub fn loss_pred(pred: &Trajectory, truth: &Trajectory) -> Result<f64, PipnError> {
    if pred.body_ids != truth.body_ids || pred.len() != truth.len() {
        return Err(PipnError::Invalid(format!(
            "trajectory mismatch: {} bodies x {} steps vs {} x {}",
            pred.body_ids.len(),
            pred.len(),
            truth.body_ids.len(),
            truth.len()
        )));
    }
    let (n, t_len) = (pred.body_ids.len(), pred.len());
    if n == 0 || t_len == 0 {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for (ps, ts) in pred.states.iter().zip(&truth.states) {
        for (pr, tr) in ps.iter().zip(ts) {
            let dp = [pr.position[0] - tr.position[0], pr.position[1] - tr.position[1]];
            let dq = pr.orientation - tr.orientation;
            acc += dp[0] * dp[0] + dp[1] * dp[1] + dq * dq;
        }
    }
    Ok(acc / (n as f64 * t_len as f64))
}

/// Mean squared first difference of total energy along the trajectory.
pub fn loss_energy(traj: &Trajectory, gravity: f64) -> Result<f64, PipnError> {
    if traj.len() < 2 {
        return Err(PipnError::Invalid("energy loss needs at least 2 steps".into()));
    }
    let mut acc = 0.0;
    for t in 0..traj.len() - 1 {
        let d = traj.energy_at(t + 1, gravity) - traj.energy_at(t, gravity);
        acc += d * d;
    }
    Ok(acc / (traj.len() - 1) as f64)
}

fn event_post_index(traj_start: f64, dt: f64, len: usize, ev: &CollisionEvent) -> Result<usize, PipnError> {
    let idx = ((ev.t_post - traj_start) / dt).round() as i64;
    if idx < 0 || idx as usize >= len {
        return Err(PipnError::Invalid(format!(
            "collision at t={} outside the trajectory window",
            ev.t_post
        )));
    }
    Ok(idx as usize)
}

/// Squared pair-momentum error across collision events: predicted
/// post-collision momentum of the pair vs recorded pre-collision momentum.
/// `start_time` is the simulation time of the trajectory's first step.
pub fn loss_momentum(
    pred: &Trajectory,
    events: &[CollisionEvent],
    start_time: f64,
) -> Result<f64, PipnError> {
    let mut acc = 0.0;
    for ev in events {
        let idx = event_post_index(start_time, pred.dt, pred.len(), ev)?;
        let ki = pred
            .body_ids
            .iter()
            .position(|&id| id == ev.body_i)
            .ok_or_else(|| PipnError::Invalid(format!("event references unknown body {}", ev.body_i)))?;
        let kj = pred
            .body_ids
            .iter()
            .position(|&id| id == ev.body_j)
            .ok_or_else(|| PipnError::Invalid(format!("event references unknown body {}", ev.body_j)))?;
        let (mi, mj) = (pred.masses[ki], pred.masses[kj]);
        let (vi, vj) = (pred.states[idx][ki].velocity, pred.states[idx][kj].velocity);
        for axis in 0..2 {
            let post = mi * vi[axis] + mj * vj[axis];
            let pre = mi * ev.v_i_pre[axis] + mj * ev.v_j_pre[axis];
            acc += (post - pre) * (post - pre);
        }
    }
    Ok(acc)
}

/// L_pred + lambda_phy * (w_E * L_E + w_M * L_M).
pub fn loss_total(
    pred: &Trajectory,
    truth: &Trajectory,
    events: &[CollisionEvent],
    gravity: f64,
    start_time: f64,
    config: &PipnConfig,
) -> Result<f64, PipnError> {
    let lp = loss_pred(pred, truth)?;
    let le = loss_energy(pred, gravity)?;
    let lm = loss_momentum(pred, events, start_time)?;
    Ok(lp + config.lambda_phy * (config.w_e * le + config.w_m * lm))
}

/// Scalar loss components of one tape-built training loss.
pub struct TapeLoss {
    pub total: Value,
    pub pred: f64,
    pub energy: f64,
    pub momentum: f64,
}

/// Tape version of [`loss_total`] over a forward pass. Prediction row t is
/// compared with truth step t + 1; events are indexed the same way.
pub fn loss_total_tape(
    tape: &Tape,
    config: &PipnConfig,
    output: &PipnOutput,
    truth: &Trajectory,
    gravity: f64,
    start_time: f64,
) -> Result<TapeLoss, PipnError> {
    let n = output.per_node.len();
    if n == 0 || truth.len() < 2 {
        return Err(PipnError::Invalid("training loss needs bodies and >= 2 truth steps".into()));
    }
    let t_len = truth.len() - 1;

    // prediction term: mask out velocity columns, they feed the physics terms
    let mut pred_terms = Vec::with_capacity(n);
    for (k, (states, _)) in output.per_node.iter().enumerate() {
        let mut target = Vec::with_capacity(t_len * STATE_WIDTH);
        let mut mask = Vec::with_capacity(t_len * STATE_WIDTH);
        for step in truth.states.iter().skip(1) {
            let r = &step[k];
            target.extend_from_slice(&[r.position[0], r.position[1], r.orientation, 0.0, 0.0]);
            mask.extend_from_slice(&[1.0, 1.0, 1.0, 0.0, 0.0]);
        }
        let target = tape.constant(Tensor::matrix(t_len, STATE_WIDTH, target)?);
        let mask = tape.constant(Tensor::matrix(t_len, STATE_WIDTH, mask)?);
        let diff = tape.mul(tape.sub(*states, target)?, mask)?;
        pred_terms.push(tape.sum_squares(diff)?);
    }
    let mut lp = pred_terms[0];
    for t in &pred_terms[1..] {
        lp = tape.add(lp, *t)?;
    }
    let lp = tape.scale(lp, 1.0 / (n as f64 * t_len as f64));

    // energy term from predicted positions and velocities
    let mut energies = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut e = tape.constant_scalar(0.0);
        for (k, (states, _)) in output.per_node.iter().enumerate() {
            let row = tape.row(*states, t)?;
            let v = tape.slice(row, 3, 2)?;
            let ke = tape.scale(tape.sum_squares(v)?, 0.5 * truth.masses[k]);
            let py = tape.slice(row, 1, 1)?;
            let pe = tape.scale(tape.sum(py), truth.masses[k] * gravity);
            e = tape.add(e, tape.add(ke, pe)?)?;
        }
        energies.push(e);
    }
    let mut le = tape.constant_scalar(0.0);
    if t_len >= 2 {
        for t in 0..t_len - 1 {
            let d = tape.sub(energies[t + 1], energies[t])?;
            le = tape.add(le, tape.mul(d, d)?)?;
        }
        le = tape.scale(le, 1.0 / (t_len - 1) as f64);
    }

    // momentum term over recorded collisions
    let mut lm = tape.constant_scalar(0.0);
    for ev in &truth.events {
        let truth_idx = event_post_index(start_time, truth.dt, truth.len(), ev)?;
        if truth_idx == 0 {
            continue; // collision at the seed step is not predicted
        }
        let row_idx = truth_idx - 1;
        let ki = truth
            .body_ids
            .iter()
            .position(|&id| id == ev.body_i)
            .ok_or_else(|| PipnError::Invalid(format!("event references unknown body {}", ev.body_i)))?;
        let kj = truth
            .body_ids
            .iter()
            .position(|&id| id == ev.body_j)
            .ok_or_else(|| PipnError::Invalid(format!("event references unknown body {}", ev.body_j)))?;
        let (mi, mj) = (truth.masses[ki], truth.masses[kj]);
        let vi = tape.slice(tape.row(output.per_node[ki].0, row_idx)?, 3, 2)?;
        let vj = tape.slice(tape.row(output.per_node[kj].0, row_idx)?, 3, 2)?;
        let post = tape.add(tape.scale(vi, mi), tape.scale(vj, mj))?;
        let pre = tape.constant_vector(vec![
            mi * ev.v_i_pre[0] + mj * ev.v_j_pre[0],
            mi * ev.v_i_pre[1] + mj * ev.v_j_pre[1],
        ]);
        lm = tape.add(lm, tape.sum_squares(tape.sub(post, pre)?)?)?;
    }

    let phys = tape.add(tape.scale(le, config.w_e), tape.scale(lm, config.w_m))?;
    let total = tape.add(lp, tape.scale(phys, config.lambda_phy))?;
    Ok(TapeLoss {
        total,
        pred: tape.item(lp),
        energy: tape.item(le),
        momentum: tape.item(lm),
    })
}
