//! Record probabilities under an initial state and a final POVM element,
//! backward-in-time histories, the time-symmetry check, and Born-rule
//! analysis of single events in either time direction.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{collapse_by, conjugate_by, final_history, history_before_event, history_operator, join_outcomes};
use crate::linalg::{real_part_checked, trace_product, DensityOperator, Matrix};
use crate::model::{count_sequences, reverse_record, CollapseRecord, TwoTimeModel};
use crate::tolerance::ENUMERATION_CAP;

/// Time direction of an analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "fwd")]
    Forward,
    #[serde(rename = "bwd")]
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fwd" | "forward" => Ok(Direction::Forward),
            "bwd" | "backward" => Ok(Direction::Backward),
            other => Err(Error::InvalidInput(format!("unknown direction {other:?}"))),
        }
    }
}

/// Conditional distribution of one event together with its normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditional {
    pub probabilities: Vec<f64>,
    /// Joint weight of the conditioning outcomes and the far boundary.
    pub denominator: f64,
    /// Max difference between the contraction and the brute-force sum.
    pub route_gap: f64,
}

/// Single-event conditional probabilities against the Born rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornAnalysis {
    pub j: usize,
    pub direction: Direction,
    pub conditional: Vec<f64>,
    pub born: Vec<f64>,
    pub deviation: f64,
    pub shielding_residual: f64,
    /// Outcomes conditioned on, in the order of the analysis direction.
    pub prefix: Vec<usize>,
    pub denominator: f64,
    /// Relative spread of the far-boundary weight over the reachable
    /// post-collapse states. Zero means the Born rule is recovered.
    pub reachable_shielding_residual: f64,
}

/// Forward and backward weights of one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryCheck {
    /// `tr[rho_F pi_n]`
    pub forward_weight: f64,
    /// `tr[rho_I* pibar_n]` for the reversed record.
    pub backward_weight: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub outcomes: Vec<usize>,
    pub weight: f64,
    pub probability: f64,
}

/// Writes `outcomes,weight,probability` rows with a header.
pub fn write_probability_csv<W: Write>(out: W, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["outcomes", "weight", "probability"])?;
    for r in rows {
        w.write_record([join_outcomes(&r.outcomes), r.weight.to_string(), r.probability.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn check_capacity(count: u128) -> Result<()> {
    if count > ENUMERATION_CAP {
        return Err(Error::Capacity {
            count,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

fn weight_from_trace(z: Complex64, tol_imag: f64) -> Result<f64> {
    let w = real_part_checked(z, tol_imag)?;
    if w < -1e-12 {
        return Err(Error::ModelValidity(format!("record weight {w:e} is negative")));
    }
    Ok(w.max(0.0))
}

/// `tr[rho_F pi_n]` for the record, quadrature weights included.
pub fn joint_record_weight(model: &TwoTimeModel, record: &CollapseRecord) -> Result<f64> {
    model.check_record(record)?;
    joint_weight_of(model, record.outcomes())
}

fn joint_weight_of(model: &TwoTimeModel, outcomes: &[usize]) -> Result<f64> {
    let pi = final_history(model, outcomes);
    weight_from_trace(trace_product(model.rho_final().matrix(), &pi)?, model.tolerances().imag)
}

/// Sum of joint weights over every completion of a partial history.
/// `pi_pre` is the history just before event `e` (1-based).
fn subtree_weight(model: &TwoTimeModel, pi_pre: &Matrix, e: usize) -> Result<f64> {
    let n = model.schedule().n();
    if e == n {
        return weight_from_trace(trace_product(model.rho_final().matrix(), pi_pre)?, model.tolerances().imag);
    }
    let mut total = 0.0;
    for a in 0..model.outcome_count() {
        let next = conjugate_by(model.step(e), &collapse_by(model.family().kraus(a), pi_pre));
        total += subtree_weight(model, &next, e + 1)?;
    }
    Ok(total)
}

/// Calls `visit(prefix, pi_pre)` for every outcome prefix of length `len`,
/// with `pi_pre` the history just before event `len + 1`.
fn visit_prefixes(
    model: &TwoTimeModel,
    len: usize,
    visit: &mut dyn FnMut(&[usize], &Matrix) -> Result<()>,
) -> Result<()> {
    fn go(
        model: &TwoTimeModel,
        prefix: &mut Vec<usize>,
        pi_pre: &Matrix,
        len: usize,
        visit: &mut dyn FnMut(&[usize], &Matrix) -> Result<()>,
    ) -> Result<()> {
        if prefix.len() == len {
            return visit(prefix, pi_pre);
        }
        let e = prefix.len() + 1;
        for a in 0..model.outcome_count() {
            let next = conjugate_by(model.step(e), &collapse_by(model.family().kraus(a), pi_pre));
            prefix.push(a);
            go(model, prefix, &next, len, visit)?;
            prefix.pop();
        }
        Ok(())
    }
    let start = conjugate_by(model.step(0), model.rho_initial().matrix());
    go(model, &mut Vec::with_capacity(len), &start, len, visit)
}

/// `sum_{z_1..z_{k-1}} pi_k`: the history just before event `k`, summed
/// over every earlier outcome.
pub fn aggregated_history(model: &TwoTimeModel, k: usize) -> Result<Matrix> {
    let n = model.schedule().n();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!("event index {k} outside 1..={n}")));
    }
    let mut pi = model.rho_initial().matrix().clone();
    for i in 1..=k {
        pi = conjugate_by(model.step(i - 1), &pi);
        if i < k {
            pi = dephase(model, &pi);
        }
    }
    Ok(pi)
}

/// `sum_a K_a X K_a`
fn dephase(model: &TwoTimeModel, x: &Matrix) -> Matrix {
    let d = model.dim();
    let mut acc = Matrix::zeros(d, d);
    for a in 0..model.outcome_count() {
        acc += collapse_by(model.family().kraus(a), x);
    }
    acc
}

/// Heisenberg-picture weight of the final constraint pulled back to just
/// after event `j`, with the outcomes of events `j+1..n-1` either fixed or
/// summed over.
fn pulled_back_effect(model: &TwoTimeModel, j: usize, fixed_future: Option<&[usize]>) -> Matrix {
    let n = model.schedule().n();
    let adj = |k: usize, x: &Matrix| {
        let u = model.step(k);
        u.adjoint() * x * u
    };
    let mut f = adj(n - 1, model.rho_final().matrix());
    for k in (j + 1..n).rev() {
        f = match fixed_future {
            Some(outs) => collapse_by(model.family().kraus(outs[k - j - 1]), &f),
            None => dephase(model, &f),
        };
        f = adj(k - 1, &f);
    }
    f
}

fn normalize(v: &[f64]) -> Result<(Vec<f64>, f64)> {
    let total: f64 = v.iter().sum();
    if !(total > 0.0) {
        return Err(Error::ZeroWeight {
            weight: total,
            tolerance: 0.0,
        });
    }
    Ok((v.iter().map(|x| x / total).collect(), total))
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `max |M d / tr[M] - 1|`
fn proportionality_residual(m: &Matrix) -> Result<f64> {
    let d = m.nrows();
    let tr = m.trace().re;
    if !(tr > 0.0) {
        return Err(Error::ZeroWeight {
            weight: tr,
            tolerance: 0.0,
        });
    }
    let scaled = m * Complex64::new(d as f64 / tr, 0.0);
    Ok(crate::linalg::max_abs_diff(&scaled, &Matrix::identity(d, d)))
}

/// Two-time queries against one model. Normalizations and aggregated
/// boundary operators are computed on first use and cached.
pub struct TwoTimeEngine<'m> {
    model: &'m TwoTimeModel,
    reversed: OnceLock<std::result::Result<TwoTimeModel, Error>>,
    denominator: OnceLock<std::result::Result<f64, Error>>,
    aggregates: Mutex<HashMap<(Direction, usize), Arc<Matrix>>>,
}

impl<'m> TwoTimeEngine<'m> {
    pub fn new(model: &'m TwoTimeModel) -> Self {
        Self {
            model,
            reversed: OnceLock::new(),
            denominator: OnceLock::new(),
            aggregates: Mutex::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &'m TwoTimeModel {
        self.model
    }

    /// The model with reversed schedule and swapped, conjugated boundaries.
    pub fn reversed_model(&self) -> Result<&TwoTimeModel> {
        self.reversed
            .get_or_init(|| self.model.reversed())
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Sum of `tr[rho_F pi_n]` over every record, by exact enumeration.
    pub fn denominator(&self) -> Result<f64> {
        self.denominator
            .get_or_init(|| self.compute_denominator())
            .clone()
    }

    fn compute_denominator(&self) -> Result<f64> {
        let model = self.model;
        check_capacity(model.record_count())?;
        let start = conjugate_by(model.step(0), model.rho_initial().matrix());
        let total = if model.interior_count() == 0 {
            subtree_weight(model, &start, 1)?
        } else {
            // one partition per first outcome, combined in index order
            let parts = (0..model.outcome_count())
                .into_par_iter()
                .map(|a| {
                    let next = conjugate_by(model.step(1), &collapse_by(model.family().kraus(a), &start));
                    subtree_weight(model, &next, 2)
                })
                .collect::<Result<Vec<f64>>>()?;
            parts.iter().sum()
        };
        if !(total > model.tolerances().zero) {
            return Err(Error::IncompatibleBoundary { denominator: total });
        }
        Ok(total)
    }

    pub fn joint_record_weight(&self, record: &CollapseRecord) -> Result<f64> {
        joint_record_weight(self.model, record)
    }

    /// Probability of the record given both boundary conditions.
    pub fn record_probability(&self, record: &CollapseRecord) -> Result<f64> {
        let w = self.joint_record_weight(record)?;
        Ok(w / self.denominator()?)
    }

    /// Every record with its weight and probability, in lexicographic order.
    pub fn probability_table(&self) -> Result<Vec<TableRow>> {
        let model = self.model;
        check_capacity(model.record_count())?;
        let events = model.interior_count();
        let mut rows = Vec::new();
        visit_prefixes(model, events, &mut |prefix, pi_n| {
            let w = weight_from_trace(trace_product(model.rho_final().matrix(), pi_n)?, model.tolerances().imag)?;
            rows.push(TableRow {
                outcomes: prefix.to_vec(),
                weight: w,
                probability: 0.0,
            });
            Ok(())
        })?;
        let denom = self.denominator()?;
        for r in &mut rows {
            r.probability = r.weight / denom;
        }
        Ok(rows)
    }

    /// Backward history `pibar` at reversed time `t_bar`, built from
    /// `rho_F*` along the reversed record.
    pub fn backward_history(&self, record: &CollapseRecord, t_bar: f64) -> Result<DensityOperator> {
        self.model.check_record(record)?;
        history_operator(self.reversed_model()?, &reverse_record(record), t_bar)
    }

    /// Compares `tr[rho_F pi_n]` with `tr[rho_I* pibar_n]` of the reversed
    /// record.
    pub fn time_symmetry(&self, record: &CollapseRecord) -> Result<SymmetryCheck> {
        self.model.check_record(record)?;
        let model = self.model;
        let fwd = trace_product(model.rho_final().matrix(), &final_history(model, record.outcomes()))?;
        let rev = self.reversed_model()?;
        let rev_outcomes: Vec<usize> = record.outcomes().iter().rev().copied().collect();
        let bwd = trace_product(rev.rho_final().matrix(), &final_history(rev, &rev_outcomes))?;
        Ok(SymmetryCheck {
            forward_weight: fwd.re,
            backward_weight: bwd.re,
            residual: (fwd - bwd).norm(),
        })
    }

    pub fn time_symmetry_residual(&self, record: &CollapseRecord) -> Result<f64> {
        self.time_symmetry(record).map(|c| c.residual)
    }

    fn check_event(&self, j: usize) -> Result<()> {
        let events = self.model.interior_count();
        if j == 0 || j > events {
            return Err(Error::InvalidInput(format!(
                "event index {j} outside 1..={events}"
            )));
        }
        Ok(())
    }

    /// Sum of the boundary-side history that conditions event `j` in the
    /// given direction: for `Forward` the backward history `sum pibar_{n-j}`
    /// over the outcomes after `t_j`; for `Backward` the forward history
    /// `sum pi_{n-j}` over the outcomes before `t_{n-j}`.
    pub fn aggregated_boundary(&self, j: usize, direction: Direction) -> Result<Arc<Matrix>> {
        self.check_event(j)?;
        let key = (direction, j);
        if let Some(m) = self.aggregates.lock().expect("aggregate cache poisoned").get(&key) {
            return Ok(m.clone());
        }
        let n = self.model.schedule().n();
        let m = match direction {
            Direction::Forward => aggregated_history(self.reversed_model()?, n - j)?,
            Direction::Backward => aggregated_history(self.model, n - j)?,
        };
        let m = Arc::new(m);
        self.aggregates
            .lock()
            .expect("aggregate cache poisoned")
            .insert(key, m.clone());
        Ok(m)
    }

    /// Distribution of `z_j` given `z_1 .. z_{j-1}` and both boundaries.
    ///
    /// Evaluated twice: once by contracting the forward history with the
    /// aggregated backward history, once by summing the joint weights of
    /// every completion. The two must agree within `1e-10`.
    pub fn conditional_next_collapse(&self, prefix: &[usize]) -> Result<Conditional> {
        let model = self.model;
        let j = prefix.len() + 1;
        self.check_event(j)?;
        model.check_outcomes(prefix)?;
        let n = model.schedule().n();
        check_capacity(count_sequences(model.outcome_count(), n - j))?;

        let pi_j = history_before_event(model, prefix);
        let boundary = if model.symmetry().pass {
            crate::linalg::conjugate_in_basis(&*self.aggregated_boundary(j, Direction::Forward)?)
        } else {
            pulled_back_effect(model, j, None)
        };
        let m = model.outcome_count();
        let mut contraction = Vec::with_capacity(m);
        let mut brute = Vec::with_capacity(m);
        for a in 0..m {
            let post = collapse_by(model.family().kraus(a), &pi_j);
            contraction.push(weight_from_trace(trace_product(&boundary, &post)?, model.tolerances().imag)?);
            let next = conjugate_by(model.step(j), &post);
            brute.push(subtree_weight(model, &next, j + 1)?);
        }
        self.finish_conditional(&contraction, &brute)
    }

    /// Distribution of the backward event `zbar_j = z_{n-j}` given the later
    /// outcomes `zbar_1 .. zbar_{j-1} = z_{n-1} .. z_{n-j+1}` and both
    /// boundaries.
    pub fn conditional_previous_collapse(&self, future: &[usize]) -> Result<Conditional> {
        let model = self.model;
        let j = future.len() + 1;
        self.check_event(j)?;
        model.check_outcomes(future)?;
        let n = model.schedule().n();
        let i = n - j;
        check_capacity(count_sequences(model.outcome_count(), n - j))?;
        let later: Vec<usize> = future.iter().rev().copied().collect();
        let m = model.outcome_count();

        let contraction = if model.symmetry().pass {
            let past = crate::linalg::conjugate_in_basis(&*self.aggregated_boundary(j, Direction::Backward)?);
            let pibar_j = history_before_event(self.reversed_model()?, future);
            (0..m)
                .map(|a| {
                    let post = collapse_by(model.family().kraus(a), &pibar_j);
                    weight_from_trace(trace_product(&past, &post)?, model.tolerances().imag)
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            let past = aggregated_history(model, i)?;
            let effect = pulled_back_effect(model, i, Some(&later));
            (0..m)
                .map(|a| {
                    let post = collapse_by(model.family().kraus(a), &past);
                    weight_from_trace(trace_product(&effect, &post)?, model.tolerances().imag)
                })
                .collect::<Result<Vec<_>>>()?
        };

        let mut brute = vec![0.0; m];
        let mut outcomes = vec![0usize; n - 1];
        outcomes[i..].copy_from_slice(&later);
        visit_prefixes(model, i - 1, &mut |past, _| {
            outcomes[..i - 1].copy_from_slice(past);
            for (a, slot) in brute.iter_mut().enumerate() {
                outcomes[i - 1] = a;
                *slot += joint_weight_of(model, &outcomes)?;
            }
            Ok(())
        })?;
        self.finish_conditional(&contraction, &brute)
    }

    fn finish_conditional(&self, contraction: &[f64], brute: &[f64]) -> Result<Conditional> {
        let denominator: f64 = brute.iter().sum();
        if !(denominator > self.model.tolerances().zero) {
            return Err(Error::ZeroWeight {
                weight: denominator,
                tolerance: self.model.tolerances().zero,
            });
        }
        let (p_contract, _) = normalize(contraction)?;
        let (p_brute, _) = normalize(brute)?;
        let route_gap = max_gap(&p_contract, &p_brute);
        if route_gap > 1e-10 {
            return Err(Error::Numerical(format!(
                "contraction and enumeration disagree by {route_gap:e}"
            )));
        }
        Ok(Conditional {
            probabilities: p_contract,
            denominator,
            route_gap,
        })
    }

    /// Conditional distribution of event `j` in the given direction.
    pub fn conditional(&self, j: usize, direction: Direction, prefix: &[usize]) -> Result<Conditional> {
        if prefix.len() + 1 != j {
            return Err(Error::InvalidInput(format!(
                "event {j} needs a prefix of length {}, got {}",
                j.saturating_sub(1),
                prefix.len()
            )));
        }
        match direction {
            Direction::Forward => self.conditional_next_collapse(prefix),
            Direction::Backward => self.conditional_previous_collapse(prefix),
        }
    }

    /// How far the aggregated opposite-boundary history at event `j` is from
    /// being proportional to the identity.
    pub fn shielding_residual(&self, j: usize, direction: Direction) -> Result<f64> {
        proportionality_residual(&*self.aggregated_boundary(j, direction)?)
    }

    /// Most probable conditioning prefix for event `j`; ties go to the
    /// lexicographically smallest prefix.
    pub fn most_probable_prefix(&self, j: usize, direction: Direction) -> Result<Vec<usize>> {
        self.check_event(j)?;
        let model = self.model;
        check_capacity(count_sequences(model.outcome_count(), j - 1))?;
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut consider = |w: f64, p: &[usize]| {
            if best.as_ref().is_none_or(|(bw, _)| w > *bw) {
                best = Some((w, p.to_vec()));
            }
        };
        match direction {
            Direction::Forward => {
                let e = dephase(model, &pulled_back_effect(model, j, None));
                visit_prefixes(model, j - 1, &mut |prefix, pi_j| {
                    consider(trace_product(&e, pi_j)?.re, prefix);
                    Ok(())
                })?;
            }
            Direction::Backward => {
                let n = model.schedule().n();
                let i = n - j;
                let past = dephase(model, &aggregated_history(model, i)?);
                let mut future = vec![0usize; j - 1];
                loop {
                    let later: Vec<usize> = future.iter().rev().copied().collect();
                    let effect = pulled_back_effect(model, i, Some(&later));
                    consider(trace_product(&effect, &past)?.re, &future);
                    if !increment(&mut future, model.outcome_count()) {
                        break;
                    }
                }
            }
        }
        let (w, prefix) = best.expect("at least one prefix");
        if !(w > model.tolerances().zero) {
            return Err(Error::IncompatibleBoundary { denominator: w });
        }
        Ok(prefix)
    }

    /// Conditional distribution of event `j` against the Born rule for the
    /// state carried in the analysis direction. Without a prefix the most
    /// probable one is used. Backward, the carried state is the reversed
    /// model's history when the symmetry conditions hold and the pulled-back
    /// final constraint otherwise.
    pub fn born_analysis(&self, j: usize, direction: Direction, prefix: Option<&[usize]>) -> Result<BornAnalysis> {
        self.check_event(j)?;
        let prefix = match prefix {
            Some(p) => p.to_vec(),
            None => self.most_probable_prefix(j, direction)?,
        };
        let conditional = self.conditional(j, direction, &prefix)?;
        let model = self.model;
        let carrier = match direction {
            Direction::Forward => history_before_event(model, &prefix),
            Direction::Backward if model.symmetry().pass => history_before_event(self.reversed_model()?, &prefix),
            // the reversed model no longer describes these records; retrodict
            // with the final constraint pulled back through the later events
            Direction::Backward => {
                let later: Vec<usize> = prefix.iter().rev().copied().collect();
                pulled_back_effect(model, model.schedule().n() - j, Some(&later))
            }
        };
        let tr = carrier.trace().re;
        if !(tr > model.tolerances().zero) {
            return Err(Error::ZeroWeight {
                weight: tr,
                tolerance: model.tolerances().zero,
            });
        }
        let rho = &carrier / Complex64::new(tr, 0.0);
        let born = crate::forward::distribution_of(&rho, model.family())?;
        let deviation = max_gap(&conditional.probabilities, &born);
        let shielding_residual = self.shielding_residual(j, direction)?;

        // conditional_a / born_a is the far-boundary weight of the a-th
        // post-collapse state; its spread over reachable a is what matters
        let ratios: Vec<f64> = conditional
            .probabilities
            .iter()
            .zip(&born)
            .filter(|(_, &b)| b > 1e-12)
            .map(|(c, b)| c / b)
            .collect();
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let reachable_shielding_residual = if ratios.is_empty() || hi <= 0.0 { 0.0 } else { (hi - lo) / hi };

        Ok(BornAnalysis {
            j,
            direction,
            conditional: conditional.probabilities,
            born,
            deviation,
            shielding_residual,
            prefix,
            denominator: conditional.denominator,
            reachable_shielding_residual,
        })
    }
}

/// Mixed-radix increment; false after the last combination.
pub(crate) fn increment(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, HermitianOperator, HilbertSpace, PureState};
    use crate::model::{build_projective_family, computational_projectors, EventSchedule};

    fn sigma_x() -> HermitianOperator {
        HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    fn sigma_y() -> HermitianOperator {
        HermitianOperator::new(Matrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
            ],
        ))
        .unwrap()
    }

    fn ket(v: &[f64]) -> HermitianOperator {
        PureState::from_real(v).unwrap().to_density().operator().clone()
    }

    fn model(h: HermitianOperator, times: Vec<f64>, rho_i: HermitianOperator, rho_f: HermitianOperator) -> TwoTimeModel {
        TwoTimeModel::new(
            HilbertSpace::numbered(2).unwrap(),
            h,
            build_projective_family(computational_projectors(2)).unwrap(),
            EventSchedule::new(times).unwrap(),
            rho_i,
            rho_f,
        )
        .unwrap()
    }

    #[test]
    fn joint_weight_examples() {
        let h = HermitianOperator::from_real_rows(&[vec![0.2, 0.7], vec![0.7, -0.4]]).unwrap();
        let m = model(h.clone(), vec![0.0, 0.5, 1.0], ket(&[0.6, 0.8]), HermitianOperator::identity(2));
        for z in 0..2 {
            let r = m.record(vec![z]).unwrap();
            let pi = history_operator(&m, &r, 1.0).unwrap();
            assert!((joint_record_weight(&m, &r).unwrap() - pi.trace()).abs() < 1e-15);
        }
        let m0 = model(h, vec![0.0, 0.5, 1.0], ket(&[0.6, 0.8]), HermitianOperator::zeros(2));
        assert_eq!(joint_record_weight(&m0, &m0.record(vec![1]).unwrap()).unwrap(), 0.0);
        let e = TwoTimeEngine::new(&m0);
        assert!(matches!(e.denominator(), Err(Error::IncompatibleBoundary { .. })));

        let m = model(HermitianOperator::zeros(2), vec![0.0, 1.0, 2.0], ket(&[1.0, 1.0]), ket(&[1.0, 0.0]));
        let w = joint_record_weight(&m, &m.record(vec![0]).unwrap()).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn postselected_record_probability() {
        let m = model(HermitianOperator::zeros(2), vec![0.0, 1.0, 2.0], ket(&[1.0, 1.0]), ket(&[1.0, 0.0]));
        let e = TwoTimeEngine::new(&m);
        assert!((e.record_probability(&m.record(vec![0]).unwrap()).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(e.record_probability(&m.record(vec![1]).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn table_sums_to_one() {
        let h = HermitianOperator::from_real_rows(&[vec![0.2, 0.7], vec![0.7, -0.4]]).unwrap();
        let m = model(h, vec![0.0, 0.3, 0.7, 1.2, 1.5], ket(&[0.6, 0.8]), ket(&[1.0, 2.0]));
        let e = TwoTimeEngine::new(&m);
        let rows = e.probability_table().unwrap();
        assert_eq!(rows.len(), 8);
        let total: f64 = rows.iter().map(|r| r.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(rows[3].outcomes, vec![0, 1, 1]);
    }

    #[test]
    fn backward_history_examples() {
        let rho_f = HermitianOperator::from_real_rows(&[vec![0.7, 0.2], vec![0.2, 0.4]]).unwrap();
        let m = model(HermitianOperator::zeros(2), vec![0.0, 2.0], ket(&[1.0, 0.0]), rho_f.clone());
        let e = TwoTimeEngine::new(&m);
        let r = m.record(vec![]).unwrap();
        for tb in [-2.0, -1.0, 0.0] {
            let pib = e.backward_history(&r, tb).unwrap();
            assert!(max_abs_diff(pib.matrix(), rho_f.matrix()) < 1e-15);
        }

        let m = model(sigma_x(), vec![0.0, 0.4, 0.9, 1.5], ket(&[0.6, 0.8]), rho_f.clone());
        let e = TwoTimeEngine::new(&m);
        let r = m.record(vec![1, 0]).unwrap();
        let pib = e.backward_history(&r, -1.5).unwrap();
        assert_eq!(pib.matrix(), rho_f.matrix());
        // direct evaluation of both sides of the trace identity
        let pib_n = e.backward_history(&r, 0.0).unwrap();
        let lhs = trace_product(m.rho_final().matrix(), &final_history(&m, &[1, 0])).unwrap();
        let rhs = trace_product(&crate::linalg::conjugate_in_basis(m.rho_initial().matrix()), pib_n.matrix()).unwrap();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn symmetry_residual_vanishes_for_real_models() {
        let rho_f = HermitianOperator::from_real_rows(&[vec![0.7, 0.2], vec![0.2, 0.4]]).unwrap();
        let m = model(sigma_x(), vec![0.0, 0.4, 0.9, 1.5], ket(&[0.6, 0.8]), rho_f);
        let e = TwoTimeEngine::new(&m);
        for r in 0..4usize {
            let rec = m.record(vec![r & 1, r >> 1]).unwrap();
            assert!(e.time_symmetry_residual(&rec).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn sigma_y_breaks_symmetry() {
        let rho_f = ket(&[0.6, 0.8]);
        let m = model(sigma_y(), vec![0.0, 0.4, 0.9, 1.5], ket(&[1.0, 1.0]), rho_f);
        let e = TwoTimeEngine::new(&m);
        let worst = (0..4usize)
            .map(|r| e.time_symmetry_residual(&m.record(vec![r & 1, r >> 1]).unwrap()).unwrap())
            .fold(0.0, f64::max);
        assert!(worst > 1e-3, "worst {worst}");
    }

    #[test]
    fn backward_born_without_symmetry_uses_pulled_back_state() {
        let m = model(
            sigma_y(),
            vec![0.0, 0.4, 0.9, 1.5],
            HermitianOperator::identity(2).scaled(0.5),
            ket(&[0.6, 0.8]),
        );
        let e = TwoTimeEngine::new(&m);
        for (j, prefix) in [(1, vec![]), (2, vec![0]), (2, vec![1])] {
            let a = e.born_analysis(j, Direction::Backward, Some(&prefix)).unwrap();
            assert!(a.deviation < 1e-12, "j {j} prefix {prefix:?}: {}", a.deviation);
        }
    }

    #[test]
    fn no_event_symmetry_is_transpose_invariance() {
        let h = HermitianOperator::from_real_rows(&[vec![0.5, -1.1], vec![-1.1, 0.2]]).unwrap();
        let rho_f = HermitianOperator::from_real_rows(&[vec![0.3, 0.1], vec![0.1, 0.9]]).unwrap();
        let m = model(h, vec![0.0, 1.3], ket(&[0.3, 0.7]), rho_f);
        let e = TwoTimeEngine::new(&m);
        assert!(e.time_symmetry_residual(&m.record(vec![]).unwrap()).unwrap() <= 1e-12);
    }

    #[test]
    fn conditional_examples() {
        let h = HermitianOperator::from_real_rows(&[vec![0.2, 0.7], vec![0.7, -0.4]]).unwrap();
        let m = model(h, vec![0.0, 0.3, 0.7, 1.2, 1.5], ket(&[0.6, 0.8]), HermitianOperator::identity(2));
        let e = TwoTimeEngine::new(&m);
        for prefix in [vec![], vec![1], vec![0, 1]] {
            let c = e.conditional_next_collapse(&prefix).unwrap();
            let rho = history_before_event(&m, &prefix);
            let rho = &rho / rho.trace();
            let p = crate::forward::distribution_of(&rho, m.family()).unwrap();
            assert!(max_gap(&c.probabilities, &p) < 1e-12);
        }

        let m = model(HermitianOperator::zeros(2), vec![0.0, 1.0, 2.0], ket(&[1.0, 1.0]), ket(&[1.0, 0.0]));
        let e = TwoTimeEngine::new(&m);
        let c = e.conditional_next_collapse(&[]).unwrap();
        assert!(max_gap(&c.probabilities, &[1.0, 0.0]) < 1e-15);
        assert!((c.denominator - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conditional_rejects_bad_prefix() {
        let m = model(HermitianOperator::zeros(2), vec![0.0, 1.0, 2.0], ket(&[1.0, 1.0]), ket(&[1.0, 0.0]));
        let e = TwoTimeEngine::new(&m);
        assert!(e.conditional_next_collapse(&[0]).is_err());
        assert!(e.conditional(1, Direction::Forward, &[0]).is_err());
    }

    #[test]
    fn nonsymmetric_conditionals_still_agree_across_routes() {
        let m = model(sigma_y(), vec![0.0, 0.4, 0.9, 1.5], ket(&[0.6, 0.8]), ket(&[1.0, 3.0]));
        assert!(!m.symmetry().pass);
        let e = TwoTimeEngine::new(&m);
        e.conditional_next_collapse(&[1]).unwrap();
        e.conditional_previous_collapse(&[0]).unwrap();
    }

    #[test]
    fn shielding_examples() {
        let m = model(sigma_x(), vec![0.0, 0.3, 0.6, 0.9], ket(&[1.0, 0.0]), HermitianOperator::identity(2));
        let e = TwoTimeEngine::new(&m);
        for j in 1..=2 {
            assert!(e.shielding_residual(j, Direction::Forward).unwrap() <= 1e-12);
        }
        let m = model(HermitianOperator::zeros(2), vec![0.0, 0.3, 0.6], ket(&[1.0, 1.0]), ket(&[1.0, 0.0]));
        let e = TwoTimeEngine::new(&m);
        // rho_F = |0><0| with no later events: d rho_F - 1 = diag(1, -1)
        assert!((e.shielding_residual(1, Direction::Forward).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn most_probable_prefix_tie_breaks_low() {
        let m = model(HermitianOperator::zeros(2), vec![0.0, 1.0, 2.0, 3.0], ket(&[1.0, 1.0]), HermitianOperator::identity(2));
        let e = TwoTimeEngine::new(&m);
        assert_eq!(e.most_probable_prefix(2, Direction::Forward).unwrap(), vec![0]);
        let m = model(HermitianOperator::zeros(2), vec![0.0, 1.0, 2.0, 3.0], ket(&[1.0, 2.0]), HermitianOperator::identity(2));
        let e = TwoTimeEngine::new(&m);
        assert_eq!(e.most_probable_prefix(2, Direction::Forward).unwrap(), vec![1]);
    }

    #[test]
    fn born_analysis_json_fields() {
        let m = model(sigma_x(), vec![0.0, 0.3, 0.6, 0.9], ket(&[1.0, 0.0]), HermitianOperator::identity(2));
        let e = TwoTimeEngine::new(&m);
        let b = e.born_analysis(2, Direction::Forward, None).unwrap();
        let v = serde_json::to_value(&b).unwrap();
        for key in ["j", "direction", "conditional", "born", "deviation", "shielding_residual"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["direction"], "fwd");
        assert!(b.deviation <= 1e-10);
    }

    #[test]
    fn increment_enumerates_all() {
        let mut d = vec![0, 0];
        let mut seen = vec![d.clone()];
        while increment(&mut d, 3) {
            seen.push(d.clone());
        }
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[5], vec![1, 2]);
    }
}
