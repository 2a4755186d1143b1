//! Forward-in-time collapse dynamics: history operators, intermediate states
//! and seeded trajectory sampling.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    normalize_history_with, propagator, real_part_checked, trace_product, DensityOperator, Matrix,
};
use crate::model::{CollapseFamily, CollapseRecord, TwoTimeModel};

/// Result of one sampled history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutput {
    pub seed: u64,
    pub record: CollapseRecord,
    /// `tr[pi_n]` of the sampled record.
    pub weight: f64,
    /// Normalized states just after each collapse, when requested.
    pub states: Option<Vec<DensityOperator>>,
}

/// `p_a = w_a tr[L_a^2 rho]`.
pub fn collapse_distribution(rho: &DensityOperator, family: &CollapseFamily) -> Result<Vec<f64>> {
    distribution_of(rho.matrix(), family)
}

pub(crate) fn distribution_of(rho: &Matrix, family: &CollapseFamily) -> Result<Vec<f64>> {
    (0..family.len())
        .map(|a| {
            let p = real_part_checked(trace_product(family.effect(a), rho)?, 1e-9)?;
            if p < -1e-10 {
                return Err(Error::ModelValidity(format!(
                    "collapse probability {p:e} for outcome {a} is negative"
                )));
            }
            Ok(p.max(0.0))
        })
        .collect()
}

/// `U rho U^†`
pub(crate) fn conjugate_by(u: &Matrix, rho: &Matrix) -> Matrix {
    u * rho * u.adjoint()
}

/// `K rho K` for a Hermitian Kraus operator.
pub(crate) fn collapse_by(k: &Matrix, rho: &Matrix) -> Matrix {
    k * rho * k
}

/// Unnormalized history `pi_t` for the events of `record` strictly before
/// `t`. Quadrature weights enter as `sqrt(w_a)` on each side.
pub fn history_operator(model: &TwoTimeModel, record: &CollapseRecord, t: f64) -> Result<DensityOperator> {
    model.check_record(record)?;
    history_of(model, record.outcomes(), t).map(DensityOperator::history_unchecked)
}

/// History for a (possibly partial) outcome list; outcomes past `t` are ignored.
pub(crate) fn history_of(model: &TwoTimeModel, outcomes: &[usize], t: f64) -> Result<Matrix> {
    let times = model.schedule().times();
    let n = model.schedule().n();
    if !(t >= times[0] && t <= times[n]) {
        return Err(Error::InvalidInput(format!(
            "time {t} outside the schedule [{}, {}]",
            times[0], times[n]
        )));
    }
    // events i in 1..n with t_i < t
    let applied = (1..n).filter(|&i| times[i] < t).count();
    if applied > outcomes.len() {
        return Err(Error::InvalidInput(format!(
            "time {t} needs {applied} outcomes, only {} given",
            outcomes.len()
        )));
    }
    let mut pi = model.rho_initial().matrix().clone();
    for (k, &z) in outcomes.iter().take(applied).enumerate() {
        pi = conjugate_by(model.step(k), &pi);
        pi = collapse_by(model.family().kraus(z), &pi);
    }
    let last = times[applied];
    if t == times[applied + 1] {
        pi = conjugate_by(model.step(applied), &pi);
    } else if t > last {
        let u = propagator(model.hamiltonian(), t - last)?;
        pi = conjugate_by(u.matrix(), &pi);
    }
    Ok(pi)
}

/// Pre-collapse history at `t_j` (`j = outcomes.len() + 1`), i.e. after
/// applying every given outcome and propagating to the next event.
pub(crate) fn history_before_event(model: &TwoTimeModel, outcomes: &[usize]) -> Matrix {
    let mut pi = model.rho_initial().matrix().clone();
    for (k, &z) in outcomes.iter().enumerate() {
        pi = conjugate_by(model.step(k), &pi);
        pi = collapse_by(model.family().kraus(z), &pi);
    }
    conjugate_by(model.step(outcomes.len()), &pi)
}

/// Full history `pi_n` at the final time.
pub(crate) fn final_history(model: &TwoTimeModel, outcomes: &[usize]) -> Matrix {
    history_before_event(model, outcomes)
}

/// Normalized state `rho_t = pi_t / tr[pi_t]`.
pub fn state_at(model: &TwoTimeModel, record: &CollapseRecord, t: f64) -> Result<DensityOperator> {
    let pi = history_operator(model, record, t)?;
    normalize_history_with(&pi, model.tolerances()).map(|(rho, _)| rho)
}

/// Draws one history with a generator seeded from `seed`.
pub fn sample_trajectory(model: &TwoTimeModel, seed: u64) -> Result<TrajectoryOutput> {
    sample_trajectory_with(model, seed, true)
}

pub fn sample_trajectory_with(model: &TwoTimeModel, seed: u64, keep_states: bool) -> Result<TrajectoryOutput> {
    let tol = model.tolerances();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = model.rho_initial();
    let tr0 = init.trace();
    if !(tr0 > tol.zero) {
        return Err(Error::ZeroWeight {
            weight: tr0,
            tolerance: tol.zero,
        });
    }
    let mut rho = init.matrix() / Complex64::new(tr0, 0.0);
    let events = model.interior_count();
    let mut outcomes = Vec::with_capacity(events);
    let mut states = keep_states.then(|| Vec::with_capacity(events));
    let mut product = 1.0;
    for k in 0..events {
        rho = conjugate_by(model.step(k), &rho);
        let p = distribution_of(&rho, model.family())?;
        if p.iter().all(|&x| x < tol.zero) {
            return Err(Error::ModelValidity(format!(
                "every outcome at event {} has zero probability",
                k + 1
            )));
        }
        let a = inverse_cdf(&p, rng.random::<f64>());
        outcomes.push(a);
        product *= p[a];
        rho = collapse_by(model.family().kraus(a), &rho) / Complex64::new(p[a], 0.0);
        if let Some(s) = states.as_mut() {
            s.push(DensityOperator::state_unchecked(rho.clone()));
        }
    }
    let weight = real_part_checked(final_history(model, &outcomes).trace(), tol.imag)? / tr0;
    let scale = weight.abs().max(product.abs());
    if (weight - product).abs() > 1e-9 * scale {
        return Err(Error::Numerical(format!(
            "history weight {weight:e} disagrees with the product of step probabilities {product:e}"
        )));
    }
    Ok(TrajectoryOutput {
        seed,
        record: model.record(outcomes)?,
        weight: weight * tr0,
        states,
    })
}

/// Smallest index whose cumulative probability exceeds `u`; probabilities
/// are accumulated in ascending index order.
fn inverse_cdf(p: &[f64], u: f64) -> usize {
    let total: f64 = p.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    for (a, &pa) in p.iter().enumerate() {
        acc += pa;
        if target < acc && pa > 0.0 {
            return a;
        }
    }
    p.iter().rposition(|&pa| pa > 0.0).unwrap_or(p.len() - 1)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Per-trajectory seed derived from the batch seed and trajectory index.
pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ splitmix64(index))
}

/// Samples `count` independent trajectories in parallel. The output order
/// and contents depend only on `(model, base_seed, count)`.
pub fn sample_batch(model: &TwoTimeModel, base_seed: u64, count: usize) -> Result<Vec<TrajectoryOutput>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| sample_trajectory_with(model, trajectory_seed(base_seed, i), false))
        .collect()
}

/// Joins outcome indices with `;`.
pub fn join_outcomes(outcomes: &[usize]) -> String {
    outcomes
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

/// CSV with header `seed,outcomes,weight`, one row per trajectory.
pub fn write_trajectory_csv<W: Write>(out: W, batch: &[TrajectoryOutput]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["seed", "outcomes", "weight"])?;
    for t in batch {
        w.write_record([
            t.seed.to_string(),
            join_outcomes(t.record.outcomes()),
            t.weight.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
