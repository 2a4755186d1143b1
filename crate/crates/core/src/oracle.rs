//! Brute-force reference distributions and sample-vs-exact statistics.
//!
//! Everything here is rebuilt from the model's raw ingredients (Hamiltonian,
//! operators, weights, boundaries) with the plainest possible loops. It
//! deliberately shares no evaluation code with the forward or two-time
//! engines so that agreement between them means something.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{propagator, trace_product, Matrix};
use crate::model::TwoTimeModel;
use crate::tolerance::ENUMERATION_CAP;
use crate::two_time::TableRow;

/// Every record of a model with its exact probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    pub records: Vec<Vec<usize>>,
    pub probabilities: Vec<f64>,
    pub weights: Vec<f64>,
    pub denominator: f64,
}

impl ExactDistribution {
    pub fn probability_of(&self, outcomes: &[usize]) -> Option<f64> {
        self.records
            .iter()
            .position(|r| r == outcomes)
            .map(|i| self.probabilities[i])
    }

    pub fn rows(&self) -> Vec<TableRow> {
        self.records
            .iter()
            .zip(&self.weights)
            .zip(&self.probabilities)
            .map(|((r, &w), &p)| TableRow {
                outcomes: r.clone(),
                weight: w,
                probability: p,
            })
            .collect()
    }
}

/// Exact distribution over all `m^(n-1)` records, rebuilding `pi_n` from
/// scratch for each one.
pub fn enumerate_records(model: &TwoTimeModel) -> Result<ExactDistribution> {
    let m = model.outcome_count();
    let events = model.interior_count();
    let mut count: u128 = 1;
    for _ in 0..events {
        count = count.saturating_mul(m as u128);
    }
    if count > ENUMERATION_CAP {
        return Err(Error::Capacity {
            count,
            cap: ENUMERATION_CAP,
        });
    }
    let times = model.schedule().times().to_vec();
    let ops: Vec<Matrix> = model
        .family()
        .operators()
        .iter()
        .zip(model.family().grid().weights())
        .map(|(l, &w)| l.matrix() * Complex64::new(w.sqrt(), 0.0))
        .collect();

    let mut records = Vec::with_capacity(count as usize);
    let mut weights = Vec::with_capacity(count as usize);
    for index in 0..count as usize {
        // most significant digit first, so records come out lexicographically
        let mut rec = vec![0usize; events];
        let mut rest = index;
        for slot in rec.iter_mut().rev() {
            *slot = rest % m;
            rest /= m;
        }
        let mut pi = model.rho_initial().matrix().clone();
        for k in 0..events {
            let u = propagator(model.hamiltonian(), times[k + 1] - times[k])?;
            let u = u.matrix();
            pi = u * &pi * u.adjoint();
            pi = &ops[rec[k]] * &pi * ops[rec[k]].adjoint();
        }
        let u = propagator(model.hamiltonian(), times[events + 1] - times[events])?;
        let u = u.matrix();
        pi = u * &pi * u.adjoint();
        let w = trace_product(model.rho_final().matrix(), &pi)?;
        if w.im.abs() > 1e-9 {
            return Err(Error::ModelValidity(format!("imaginary record weight {:e}", w.im)));
        }
        records.push(rec);
        weights.push(w.re.max(0.0));
    }
    let denominator: f64 = weights.iter().sum();
    if !(denominator > 0.0) {
        return Err(Error::IncompatibleBoundary { denominator });
    }
    let probabilities = weights.iter().map(|w| w / denominator).collect();
    Ok(ExactDistribution {
        records,
        probabilities,
        weights,
        denominator,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalReport {
    pub tv_distance: f64,
    pub chi2: f64,
    pub dof: usize,
}

/// Total-variation distance and Pearson chi-square of sampled records
/// against an exact distribution.
pub fn compare_empirical(samples: &[Vec<usize>], exact: &ExactDistribution) -> Result<EmpiricalReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples to compare".into()));
    }
    if samples.len() < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 samples, got {}",
            samples.len()
        )));
    }
    let mut counts: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for s in samples {
        *counts.entry(s.clone()).or_default() += 1.0;
    }
    compare_counts(&counts, exact)
}

/// As [`compare_empirical`] but from (possibly fractional) counts.
/// Categories expecting fewer than five counts are pooled into one bin.
pub fn compare_counts(counts: &BTreeMap<Vec<usize>, f64>, exact: &ExactDistribution) -> Result<EmpiricalReport> {
    let total: f64 = counts.values().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("no samples to compare".into()));
    }
    let mut tv = 0.0;
    let mut chi2 = 0.0;
    let mut bins = 0usize;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (rec, &p) in exact.records.iter().zip(&exact.probabilities) {
        let obs = counts.get(rec).copied().unwrap_or(0.0);
        tv += (obs / total - p).abs();
        let expected = p * total;
        if expected < 5.0 {
            pooled_obs += obs;
            pooled_exp += expected;
        } else {
            chi2 += (obs - expected).powi(2) / expected;
            bins += 1;
        }
    }
    // samples outside the exact support
    for (rec, &obs) in counts {
        if exact.probability_of(rec).is_none() {
            tv += obs / total;
            pooled_obs += obs;
        }
    }
    if pooled_exp > 0.0 {
        chi2 += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        bins += 1;
    } else if pooled_obs > 0.0 {
        chi2 = f64::INFINITY;
    }
    Ok(EmpiricalReport {
        tv_distance: 0.5 * tv,
        chi2,
        dof: bins.saturating_sub(1),
    })
}
