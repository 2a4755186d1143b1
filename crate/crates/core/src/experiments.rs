//! Canned experiments: the beam-splitter retrodiction asymmetry and the
//! shielding sweep.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::Serialize;

use crate::config::{FamilyConfig, ModelConfig};
use crate::error::Result;
use crate::forward::sample_batch;
use crate::linalg::OperatorData;
use crate::model::TwoTimeModel;
use crate::oracle::enumerate_records;
use crate::two_time::{Direction, TwoTimeEngine};

fn real(rows: Vec<Vec<f64>>) -> OperatorData {
    let d = rows.len();
    OperatorData {
        dim: d,
        re: rows,
        im: vec![vec![0.0; d]; d],
    }
}

fn z_projectors() -> FamilyConfig {
    FamilyConfig::Projective {
        projectors: vec![
            real(vec![vec![1.0, 0.0], vec![0.0, 0.0]]),
            real(vec![vec![0.0, 0.0], vec![0.0, 1.0]]),
        ],
        weights: None,
    }
}

/// Outcome index of the source-side interaction and of detection at D.
pub const SOURCE: usize = 0;
pub const DETECTOR_D: usize = 0;

/// Two-path beam-splitter universe.
///
/// Basis vector 0 is the path through the source S before the splitter and
/// through the detector D after it; vector 1 joins the floor F and the
/// ceiling C. The Hamiltonian `(pi/2)(1 - Hadamard)` makes the unit-time
/// propagator the Hadamard splitter and the two-unit propagator the
/// identity. Schedule `(0, 2, 3, 5)`: a source-side event at `t = 2`, the
/// splitter over `[2, 3]`, detection at `t = 3`. The initial state is the
/// source path and the final condition is the identity (no postselection).
pub fn beam_splitter_config() -> ModelConfig {
    let s = FRAC_1_SQRT_2;
    let h = |x: f64| 0.5 * PI * x;
    ModelConfig {
        dim: 2,
        basis_labels: vec!["S/D path".into(), "F/C path".into()],
        hamiltonian: real(vec![vec![h(1.0 - s), h(-s)], vec![h(-s), h(1.0 + s)]]),
        family: z_projectors(),
        schedule: vec![0.0, 2.0, 3.0, 5.0],
        rho_initial: real(vec![vec![1.0, 0.0], vec![0.0, 0.0]]),
        rho_final: real(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
    }
}

pub fn beam_splitter_model() -> Result<TwoTimeModel> {
    beam_splitter_config().build()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamSplitterReport {
    pub samples: usize,
    pub seed: u64,
    /// Fraction of sampled forward trajectories detected at D.
    pub empirical_detection_frequency: f64,
    /// Binomial standard error `sqrt(0.25 / N)`.
    pub empirical_sigma: f64,
    pub exact_detection_probability: f64,
    /// Backward conditional probability that the particle came from S given
    /// detection at D.
    pub backward_conditional_source: f64,
    pub backward_conditional: Vec<f64>,
    pub backward_born: Vec<f64>,
    pub backward_deviation: f64,
}

pub fn run_beam_splitter(samples: usize, seed: u64) -> Result<BeamSplitterReport> {
    let model = beam_splitter_model()?;

    let batch = sample_batch(&model, seed, samples)?;
    let hits = batch
        .iter()
        .filter(|t| t.record.outcomes()[1] == DETECTOR_D)
        .count();

    let exact = enumerate_records(&model)?;
    let exact_detection_probability = exact
        .records
        .iter()
        .zip(&exact.probabilities)
        .filter(|(r, _)| r[1] == DETECTOR_D)
        .map(|(_, p)| p)
        .sum();

    // backward event 1 is detection, backward event 2 the source side
    let engine = TwoTimeEngine::new(&model);
    let analysis = engine.born_analysis(2, Direction::Backward, Some(&[DETECTOR_D]))?;

    Ok(BeamSplitterReport {
        samples,
        seed,
        empirical_detection_frequency: if samples == 0 { 0.0 } else { hits as f64 / samples as f64 },
        empirical_sigma: (0.25 / samples.max(1) as f64).sqrt(),
        exact_detection_probability,
        backward_conditional_source: analysis.conditional[SOURCE],
        backward_conditional: analysis.conditional,
        backward_born: analysis.born,
        backward_deviation: analysis.deviation,
    })
}

/// Step between events in the shielding sweep.
pub const SWEEP_STEP: f64 = 0.3;

/// Qubit with `H = sigma_x`, projective Z collapses, `rho_I = rho_F = |0><0|`,
/// one analysed event at `t = 0.3` followed by `k` further events spaced by
/// the same step.
pub fn shielding_sweep_config(k: usize) -> ModelConfig {
    let zero = real(vec![vec![1.0, 0.0], vec![0.0, 0.0]]);
    ModelConfig {
        dim: 2,
        basis_labels: vec!["0".into(), "1".into()],
        hamiltonian: real(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
        family: z_projectors(),
        schedule: (0..k + 3).map(|i| SWEEP_STEP * i as f64).collect(),
        rho_initial: zero.clone(),
        rho_final: zero,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub future_events: usize,
    pub shielding_residual: f64,
    pub deviation: f64,
}

/// Forward shielding residual and Born deviation at the first event as
/// the number of later events grows from 0 to `max_k`.
pub fn shielding_sweep(max_k: usize) -> Result<Vec<SweepPoint>> {
    (0..=max_k)
        .map(|k| {
            let model = shielding_sweep_config(k).build()?;
            let engine = TwoTimeEngine::new(&model);
            let a = engine.born_analysis(1, Direction::Forward, Some(&[]))?;
            Ok(SweepPoint {
                future_events: k,
                shielding_residual: a.shielding_residual,
                deviation: a.deviation,
            })
        })
        .collect()
}
