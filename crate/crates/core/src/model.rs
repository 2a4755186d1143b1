//! Collapse-operator families, event schedules, collapse records and the
//! two-time model bundle.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    max_abs_diff, propagator, transpose_asymmetry, DensityOperator, DensityRole, HermitianOperator,
    HilbertSpace, Matrix,
};
use crate::tolerance::{Tolerances, GRW_CONDITION_LIMIT};

/// Discretized outcome values with positive measure weights.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl OutcomeGrid {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("outcome grid needs at least one point".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} outcome points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidInput(format!("quadrature weight {w} is not positive")));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("outcome points must be finite".into()));
        }
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("outcome points must be distinct".into()));
        }
        Ok(Self { points, weights })
    }

    /// Integer labels `0..m` with unit weights.
    pub fn labels(m: usize) -> Result<Self> {
        Self::new((0..m).map(|a| a as f64).collect(), vec![1.0; m])
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Collapse operators `L_a` on an outcome grid with `sum_a w_a L_a^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseFamily {
    grid: OutcomeGrid,
    operators: Vec<HermitianOperator>,
    /// `sqrt(w_a) L_a`
    kraus: Vec<Matrix>,
    /// `w_a L_a^2`
    effects: Vec<Matrix>,
}

impl CollapseFamily {
    /// Validated family; fails when completeness is off by more than the
    /// default tolerance.
    pub fn new(grid: OutcomeGrid, operators: Vec<HermitianOperator>) -> Result<Self> {
        let family = Self::new_unchecked(grid, operators)?;
        family.validate(&Tolerances::DEFAULT)?;
        Ok(family)
    }

    /// Builds a family without the completeness check. Shapes are still
    /// checked. Use [`CollapseFamily::validate`] before computing
    /// probabilities with it.
    pub fn new_unchecked(grid: OutcomeGrid, operators: Vec<HermitianOperator>) -> Result<Self> {
        if grid.len() != operators.len() {
            return Err(Error::Shape(format!(
                "{} grid points but {} operators",
                grid.len(),
                operators.len()
            )));
        }
        let d = operators[0].dim();
        if operators.iter().any(|l| l.dim() != d) {
            return Err(Error::Shape("collapse operators differ in dimension".into()));
        }
        let kraus: Vec<Matrix> = grid
            .weights
            .iter()
            .zip(&operators)
            .map(|(w, l)| l.matrix() * Complex64::new(w.sqrt(), 0.0))
            .collect();
        let effects = kraus.iter().map(|k| k * k).collect();
        Ok(Self {
            grid,
            operators,
            kraus,
            effects,
        })
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let residual = self.completeness_residual();
        if !(residual <= tol.complete) {
            return Err(Error::validation(
                "collapse family violates completeness",
                residual,
                tol.complete,
            ));
        }
        Ok(())
    }

    /// Max entrywise `|sum_a w_a L_a^2 - 1|`.
    pub fn completeness_residual(&self) -> f64 {
        let d = self.dim();
        let mut sum = Matrix::zeros(d, d);
        for e in &self.effects {
            sum += e;
        }
        max_abs_diff(&sum, &Matrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn grid(&self) -> &OutcomeGrid {
        &self.grid
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.operators
    }

    pub fn kraus(&self, a: usize) -> &Matrix {
        &self.kraus[a]
    }

    pub fn effect(&self, a: usize) -> &Matrix {
        &self.effects[a]
    }

    /// Same operators with every weight multiplied by `factor`; unchecked.
    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self> {
        let grid = OutcomeGrid::new(
            self.grid.points.clone(),
            self.grid.weights.iter().map(|w| w * factor).collect(),
        )?;
        Self::new_unchecked(grid, self.operators.clone())
    }
}

fn check_projectors(projectors: &[HermitianOperator], tol: f64) -> Result<()> {
    if projectors.is_empty() {
        return Err(Error::InvalidInput("need at least one projector".into()));
    }
    let d = projectors[0].dim();
    if projectors.iter().any(|p| p.dim() != d) {
        return Err(Error::Shape("projectors differ in dimension".into()));
    }
    let mut sum = Matrix::zeros(d, d);
    for (a, p) in projectors.iter().enumerate() {
        let pm = p.matrix();
        let idem = max_abs_diff(&(pm * pm), pm);
        if idem > tol {
            return Err(Error::validation(format!("projector {a} is not idempotent"), idem, tol));
        }
        for (b, q) in projectors.iter().enumerate().skip(a + 1) {
            let overlap = (pm * q.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if overlap > tol {
                return Err(Error::validation(
                    format!("projectors {a} and {b} are not orthogonal"),
                    overlap,
                    tol,
                ));
            }
        }
        sum += pm;
    }
    let incomplete = max_abs_diff(&sum, &Matrix::identity(d, d));
    if incomplete > tol {
        return Err(Error::validation("projectors do not sum to identity", incomplete, tol));
    }
    Ok(())
}

/// Family `L_a = P_a` with unit weights from a complete orthogonal set of
/// projectors.
pub fn build_projective_family(projectors: Vec<HermitianOperator>) -> Result<CollapseFamily> {
    check_projectors(&projectors, Tolerances::DEFAULT.projector)?;
    let grid = OutcomeGrid::labels(projectors.len())?;
    CollapseFamily::new(grid, projectors)
}

/// Projective family with caller-chosen weights. Completeness is not
/// enforced, so corrupted weights survive construction and show up in
/// [`CollapseFamily::completeness_residual`].
pub fn build_projective_family_weighted(
    projectors: Vec<HermitianOperator>,
    weights: Vec<f64>,
) -> Result<CollapseFamily> {
    check_projectors(&projectors, Tolerances::DEFAULT.projector)?;
    let points = (0..projectors.len()).map(|a| a as f64).collect();
    CollapseFamily::new_unchecked(OutcomeGrid::new(points, weights)?, projectors)
}

/// Projectors onto the computational basis vectors.
pub fn computational_projectors(dim: usize) -> Vec<HermitianOperator> {
    (0..dim)
        .map(|i| {
            let mut v = DVector::zeros(dim);
            v[i] = Complex64::new(1.0, 0.0);
            HermitianOperator::projector_onto(&v)
        })
        .collect()
}

/// Cell widths of a strictly increasing lattice. End cells reuse the
/// neighbouring gap so a uniform lattice gets uniform weights.
fn cell_weights(lattice: &[f64]) -> Vec<f64> {
    let q = lattice.len();
    if q == 1 {
        return vec![1.0];
    }
    (0..q)
        .map(|a| {
            if a == 0 {
                lattice[1] - lattice[0]
            } else if a == q - 1 {
                lattice[q - 1] - lattice[q - 2]
            } else {
                0.5 * (lattice[a + 1] - lattice[a - 1])
            }
        })
        .collect()
}

/// One-dimensional GRW localization family on a finite lattice.
///
/// `L_a = c exp(-(alpha/2)(x - z_a)^2)` with `x` the diagonal position
/// operator. `c` is fixed so the mean diagonal completeness sum is one, then
/// every diagonal entry is divided by the square root of its own sum so that
/// completeness holds exactly at each basis index.
pub fn build_grw_family(lattice: &[f64], x_op: &HermitianOperator, alpha: f64) -> Result<CollapseFamily> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    if lattice.is_empty() {
        return Err(Error::InvalidInput("GRW lattice is empty".into()));
    }
    if lattice.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("GRW lattice must be strictly increasing".into()));
    }
    let xm = x_op.matrix();
    let d = x_op.dim();
    let off_diag = (0..d)
        .flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| xm[(i, j)].norm())
        .fold(0.0, f64::max);
    if off_diag > Tolerances::DEFAULT.herm {
        return Err(Error::validation(
            "position operator must be diagonal in the distinguished basis",
            off_diag,
            Tolerances::DEFAULT.herm,
        ));
    }
    let positions: Vec<f64> = (0..d).map(|i| xm[(i, i)].re).collect();
    let weights = cell_weights(lattice);

    let gauss = |x: f64, z: f64| (-0.5 * alpha * (x - z) * (x - z)).exp();
    let mut c = (alpha / std::f64::consts::PI).powf(0.25);
    let sums: Vec<f64> = positions
        .iter()
        .map(|&x| {
            lattice
                .iter()
                .zip(&weights)
                .map(|(&z, &w)| w * (c * gauss(x, z)).powi(2))
                .sum()
        })
        .collect();
    let (min, max) = sums
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let condition = max / min;
    if !(min > 0.0) || !(condition <= GRW_CONDITION_LIMIT) {
        return Err(Error::validation(
            "GRW lattice too coarse or narrow to renormalize completeness",
            condition,
            GRW_CONDITION_LIMIT,
        ));
    }
    let mean = sums.iter().sum::<f64>() / d as f64;
    c /= mean.sqrt();
    let sums: Vec<f64> = sums.iter().map(|s| s / mean).collect();

    let operators = lattice
        .iter()
        .map(|&z| {
            let diag = DVector::from_iterator(
                d,
                positions
                    .iter()
                    .zip(&sums)
                    .map(|(&x, &s)| Complex64::new(c * gauss(x, z) / s.sqrt(), 0.0)),
            );
            HermitianOperator::new(Matrix::from_diagonal(&diag))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = OutcomeGrid::new(lattice.to_vec(), weights)?;
    CollapseFamily::new(grid, operators)
}

/// Diagonal position operator.
pub fn position_operator(positions: &[f64]) -> Result<HermitianOperator> {
    let diag = DVector::from_iterator(positions.len(), positions.iter().map(|&x| Complex64::new(x, 0.0)));
    HermitianOperator::new(Matrix::from_diagonal(&diag))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryReport {
    pub h_asym: f64,
    pub l_asym: f64,
    pub pass: bool,
}

/// Checks that `H` and every `L_a` are symmetric matrices in the
/// distinguished basis. For Hermitian operators this is the same as being
/// real, which makes `U(t)* = U(-t)` and `L* = L`.
pub fn check_symmetry_conditions(h: &HermitianOperator, family: &CollapseFamily) -> SymmetryReport {
    check_symmetry_conditions_with(h, family, Tolerances::DEFAULT.sym)
}

pub fn check_symmetry_conditions_with(
    h: &HermitianOperator,
    family: &CollapseFamily,
    tol_sym: f64,
) -> SymmetryReport {
    let h_asym = transpose_asymmetry(h.matrix());
    let l_asym = family
        .operators()
        .iter()
        .map(|l| transpose_asymmetry(l.matrix()))
        .fold(0.0, f64::max);
    SymmetryReport {
        h_asym,
        l_asym,
        pass: h_asym <= tol_sym && l_asym <= tol_sym,
    }
}

/// Strictly increasing event times `t_0 < ... < t_n`. The first and last
/// slots hold the boundary conditions, the rest are collapse events.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSchedule {
    times: Vec<f64>,
}

impl EventSchedule {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidInput("schedule needs t_0 and t_n at least".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("schedule times must be finite".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("schedule times must be strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Index `n` of the final boundary slot.
    pub fn n(&self) -> usize {
        self.times.len() - 1
    }

    pub fn interior_count(&self) -> usize {
        self.times.len() - 2
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// `t̄_j = -t_{n-j}`.
    pub fn reversed(&self) -> Self {
        Self {
            times: self.times.iter().rev().map(|t| -t).collect(),
        }
    }
}

/// Outcome indices `z_1 .. z_{n-1}` of one history, bound to its schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseRecord {
    schedule: Arc<EventSchedule>,
    outcomes: Vec<usize>,
}

impl CollapseRecord {
    pub fn new(schedule: Arc<EventSchedule>, outcomes: Vec<usize>) -> Result<Self> {
        if outcomes.len() != schedule.interior_count() {
            return Err(Error::Shape(format!(
                "record has {} outcomes but schedule has {} interior events",
                outcomes.len(),
                schedule.interior_count()
            )));
        }
        Ok(Self { schedule, outcomes })
    }

    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    pub fn schedule(&self) -> &Arc<EventSchedule> {
        &self.schedule
    }
}

/// The same record described backward in time: times `-t_{n-j}` and
/// outcomes `z_{n-j}`.
pub fn reverse_record(record: &CollapseRecord) -> CollapseRecord {
    CollapseRecord {
        schedule: Arc::new(record.schedule.reversed()),
        outcomes: record.outcomes.iter().rev().copied().collect(),
    }
}

/// Hamiltonian, collapse family, schedule and the boundary pair.
#[derive(Debug, Clone)]
pub struct TwoTimeModel {
    space: HilbertSpace,
    hamiltonian: HermitianOperator,
    family: CollapseFamily,
    schedule: Arc<EventSchedule>,
    initial: DensityOperator,
    final_: DensityOperator,
    tol: Tolerances,
    /// `U(t_{k+1} - t_k)` for `k = 0..n`.
    steps: Vec<Matrix>,
    symmetry: SymmetryReport,
}

impl TwoTimeModel {
    pub fn new(
        space: HilbertSpace,
        hamiltonian: HermitianOperator,
        family: CollapseFamily,
        schedule: EventSchedule,
        rho_initial: HermitianOperator,
        rho_final: HermitianOperator,
    ) -> Result<Self> {
        Self::with_tolerances(
            space,
            hamiltonian,
            family,
            schedule,
            rho_initial,
            rho_final,
            Tolerances::DEFAULT,
        )
    }

    pub fn with_tolerances(
        space: HilbertSpace,
        hamiltonian: HermitianOperator,
        family: CollapseFamily,
        schedule: EventSchedule,
        rho_initial: HermitianOperator,
        rho_final: HermitianOperator,
        tol: Tolerances,
    ) -> Result<Self> {
        let d = space.dim();
        for (name, dim) in [
            ("H", hamiltonian.dim()),
            ("collapse family", family.dim()),
            ("rho_I", rho_initial.dim()),
            ("rho_F", rho_final.dim()),
        ] {
            if dim != d {
                return Err(Error::Shape(format!("{name} has dim {dim}, space has dim {d}")));
            }
        }
        family.validate(&tol)?;
        let initial = DensityOperator::with_tolerances(rho_initial, DensityRole::State, &tol)?;
        let final_ = DensityOperator::with_tolerances(rho_final, DensityRole::PovmElement, &tol)?;
        Self::assemble(space, hamiltonian, family, Arc::new(schedule), initial, final_, tol)
    }

    fn assemble(
        space: HilbertSpace,
        hamiltonian: HermitianOperator,
        family: CollapseFamily,
        schedule: Arc<EventSchedule>,
        initial: DensityOperator,
        final_: DensityOperator,
        tol: Tolerances,
    ) -> Result<Self> {
        let steps = schedule
            .times()
            .windows(2)
            .map(|w| propagator(&hamiltonian, w[1] - w[0]).map(|u| u.matrix().clone()))
            .collect::<Result<Vec<_>>>()?;
        let symmetry = check_symmetry_conditions_with(&hamiltonian, &family, tol.sym);
        Ok(Self {
            space,
            hamiltonian,
            family,
            schedule,
            initial,
            final_,
            tol,
            steps,
            symmetry,
        })
    }

    /// Model seen backward in time: reversed schedule, initial condition
    /// `rho_F*`, final constraint `rho_I*`. Reversing twice gives back the
    /// original model.
    pub fn reversed(&self) -> Result<Self> {
        let initial = DensityOperator::new(self.final_.operator().conjugate(), DensityRole::UnnormalizedHistory)?;
        let final_ = DensityOperator::new(self.initial.operator().conjugate(), DensityRole::UnnormalizedHistory)?;
        Self::assemble(
            self.space.clone(),
            self.hamiltonian.clone(),
            self.family.clone(),
            Arc::new(self.schedule.reversed()),
            initial,
            final_,
            self.tol,
        )
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn family(&self) -> &CollapseFamily {
        &self.family
    }

    pub fn schedule(&self) -> &Arc<EventSchedule> {
        &self.schedule
    }

    pub fn rho_initial(&self) -> &DensityOperator {
        &self.initial
    }

    pub fn rho_final(&self) -> &DensityOperator {
        &self.final_
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn symmetry(&self) -> SymmetryReport {
        self.symmetry
    }

    /// Number of outcomes per event.
    pub fn outcome_count(&self) -> usize {
        self.family.len()
    }

    pub fn interior_count(&self) -> usize {
        self.schedule.interior_count()
    }

    /// `m^(n-1)`, saturating.
    pub fn record_count(&self) -> u128 {
        count_sequences(self.outcome_count(), self.interior_count())
    }

    /// Free propagator over the interval `[t_k, t_{k+1}]`.
    pub fn step(&self, k: usize) -> &Matrix {
        &self.steps[k]
    }

    /// Record on this model's schedule after range-checking the outcomes.
    pub fn record(&self, outcomes: Vec<usize>) -> Result<CollapseRecord> {
        self.check_outcomes(&outcomes)?;
        CollapseRecord::new(self.schedule.clone(), outcomes)
    }

    pub(crate) fn check_outcomes(&self, outcomes: &[usize]) -> Result<()> {
        let m = self.outcome_count();
        if let Some(z) = outcomes.iter().find(|&&z| z >= m) {
            return Err(Error::InvalidInput(format!("outcome index {z} out of range (m = {m})")));
        }
        Ok(())
    }

    pub(crate) fn check_record(&self, record: &CollapseRecord) -> Result<()> {
        if record.schedule().times() != self.schedule.times() {
            return Err(Error::InvalidInput("record belongs to a different schedule".into()));
        }
        self.check_outcomes(record.outcomes())
    }
}

pub(crate) fn count_sequences(m: usize, len: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..len {
        total = total.saturating_mul(m as u128);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{conjugate_in_basis, real_matrix, PureState};
    use proptest::prelude::*;

    fn plus_minus() -> Vec<HermitianOperator> {
        vec![
            PureState::from_real(&[1.0, 1.0]).unwrap().to_density().operator().clone(),
            PureState::from_real(&[1.0, -1.0]).unwrap().to_density().operator().clone(),
        ]
    }

    #[test]
    fn projective_z_is_exactly_complete() {
        let f = build_projective_family(computational_projectors(2)).unwrap();
        assert_eq!(f.completeness_residual(), 0.0);
    }

    #[test]
    fn projective_plus_minus_is_valid() {
        let f = build_projective_family(plus_minus()).unwrap();
        assert!(f.completeness_residual() < 1e-14);
    }

    #[test]
    fn overlapping_projectors_rejected() {
        let plus = plus_minus().remove(0);
        let zero = computational_projectors(2).remove(0);
        let err = build_projective_family(vec![zero, plus]).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }), "{err}");
    }

    #[test]
    fn incomplete_projectors_rejected() {
        let zero = computational_projectors(3).remove(0);
        assert!(build_projective_family(vec![zero]).is_err());
    }

    #[test]
    fn grw_single_site() {
        let x = position_operator(&[0.3]).unwrap();
        for lattice in [vec![0.0], vec![-1.0, 0.5, 2.0], vec![0.3, 0.31]] {
            let f = build_grw_family(&lattice, &x, 2.0).unwrap();
            assert!(f.completeness_residual() <= 1e-12);
        }
    }

    #[test]
    fn grw_five_sites() {
        let x = position_operator(&[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let lattice: Vec<f64> = (0..41).map(|k| -6.0 + 0.3 * k as f64).collect();
        let f = build_grw_family(&lattice, &x, 1.0).unwrap();
        assert_eq!(f.len(), 41);
        assert!(f.completeness_residual() <= 1e-10);
    }

    #[test]
    fn grw_sharp_limit_is_projective() {
        let pos = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let x = position_operator(&pos).unwrap();
        let grw = build_grw_family(&pos, &x, 1e4).unwrap();
        let proj = build_projective_family(computational_projectors(5)).unwrap();
        let dist = grw
            .operators()
            .iter()
            .zip(proj.operators())
            .map(|(a, b)| max_abs_diff(a.matrix(), b.matrix()))
            .fold(0.0, f64::max);
        assert!(dist <= 1e-6, "distance {dist}");
    }

    #[test]
    fn grw_narrow_lattice_rejected() {
        let x = position_operator(&[-20.0, 0.0, 20.0]).unwrap();
        let err = build_grw_family(&[0.0], &x, 1.0).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn grw_rejects_nondiagonal_position() {
        let x = HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(build_grw_family(&[0.0, 1.0], &x, 1.0).is_err());
    }

    #[test]
    fn halved_weights_show_in_residual() {
        let x = position_operator(&[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
        let lattice: Vec<f64> = (0..41).map(|k| -6.0 + 0.3 * k as f64).collect();
        let f = build_grw_family(&lattice, &x, 1.0).unwrap();
        let bad = f.with_scaled_weights(0.5).unwrap();
        assert!((bad.completeness_residual() - 0.5).abs() < 1e-9);
        assert!(bad.validate(&Tolerances::DEFAULT).is_err());
    }

    #[test]
    fn symmetry_examples() {
        let sx = HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let z = build_projective_family(computational_projectors(2)).unwrap();
        let r = check_symmetry_conditions(&sx, &z);
        assert!(r.pass);
        assert_eq!((r.h_asym, r.l_asym), (0.0, 0.0));

        let sy = HermitianOperator::new(Matrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, 0.0),
            ],
        ))
        .unwrap();
        let r = check_symmetry_conditions(&sy, &z);
        assert!(!r.pass);
        assert!((r.h_asym - 2.0).abs() < 1e-15);

        let x = position_operator(&[-1.0, 0.0, 1.0]).unwrap();
        let grw = build_grw_family(&[-2.0, -1.0, 0.0, 1.0, 2.0], &x, 1.0).unwrap();
        let tri = HermitianOperator::new(real_matrix(&[
            vec![1.0, -0.5, 0.0],
            vec![-0.5, 0.0, -0.5],
            vec![0.0, -0.5, 1.0],
        ]))
        .unwrap();
        assert!(check_symmetry_conditions(&tri, &grw).pass);
    }

    #[test]
    fn symmetry_implies_conjugation_identities() {
        let h = HermitianOperator::new(real_matrix(&[vec![0.5, 1.0], vec![1.0, -0.5]])).unwrap();
        let f = build_projective_family(plus_minus()).unwrap();
        assert!(check_symmetry_conditions(&h, &f).pass);
        for l in f.operators() {
            assert!(max_abs_diff(&conjugate_in_basis(l.matrix()), l.matrix()) <= 1e-10);
        }
        for t in [0.1, 0.7, 2.3, -1.1] {
            let u = propagator(&h, t).unwrap();
            let v = propagator(&h, -t).unwrap();
            assert!(max_abs_diff(&conjugate_in_basis(u.matrix()), v.matrix()) <= 1e-9);
        }
    }

    #[test]
    fn reverse_record_table_example() {
        let s = Arc::new(EventSchedule::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap());
        let r = CollapseRecord::new(s, vec![4, 7]).unwrap();
        let rev = reverse_record(&r);
        assert_eq!(rev.schedule().times(), &[-3.0, -2.0, -1.0, -0.0]);
        assert_eq!(rev.outcomes(), &[7, 4]);
    }

    #[test]
    fn reverse_single_event() {
        let s = Arc::new(EventSchedule::new(vec![0.5, 1.0, 4.0]).unwrap());
        let r = CollapseRecord::new(s, vec![3]).unwrap();
        let rev = reverse_record(&r);
        assert_eq!(rev.outcomes(), &[3]);
        assert_eq!(rev.schedule().times(), &[-4.0, -1.0, -0.5]);
    }

    #[test]
    fn schedule_validation() {
        assert!(EventSchedule::new(vec![0.0]).is_err());
        assert!(EventSchedule::new(vec![0.0, 0.0]).is_err());
        assert!(EventSchedule::new(vec![1.0, 0.0]).is_err());
        assert_eq!(EventSchedule::new(vec![0.0, 1.0]).unwrap().interior_count(), 0);
    }

    #[test]
    fn grid_validation() {
        assert!(OutcomeGrid::new(vec![], vec![]).is_err());
        assert!(OutcomeGrid::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(OutcomeGrid::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn record_length_checked() {
        let s = Arc::new(EventSchedule::new(vec![0.0, 1.0, 2.0]).unwrap());
        assert!(CollapseRecord::new(s, vec![0, 1]).is_err());
    }

    fn random_orthonormal_projectors(d: usize, seed_vals: &[f64]) -> Vec<HermitianOperator> {
        let a = nalgebra::DMatrix::from_iterator(d, d, seed_vals.iter().copied());
        let q = a.qr().q();
        (0..d)
            .map(|i| {
                let col = q.column(i).map(|x| Complex64::new(x, 0.0));
                HermitianOperator::projector_onto(&col)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn random_families_are_complete(
            d in 2usize..6,
            vals in proptest::collection::vec(-1.0f64..1.0, 36),
            alpha in 0.2f64..5.0,
            spacing in 0.2f64..0.8,
        ) {
            let projs = random_orthonormal_projectors(d, &vals[..d * d]);
            if let Ok(f) = build_projective_family(projs) {
                prop_assert!(f.completeness_residual() <= 1e-10);
                for a in 0..f.len() {
                    for b in 0..f.len() {
                        if a != b {
                            let prod = f.operators()[a].matrix() * f.operators()[b].matrix();
                            prop_assert!(prod.iter().all(|z| z.norm() <= 1e-10));
                        }
                    }
                }
            }
            let pos: Vec<f64> = (0..d).map(|i| i as f64 - (d as f64 - 1.0) / 2.0).collect();
            let lattice: Vec<f64> = (0..).map(|k| -5.0 + spacing * k as f64).take_while(|z| *z <= 5.0).collect();
            let f = build_grw_family(&lattice, &position_operator(&pos).unwrap(), alpha).unwrap();
            prop_assert!(f.completeness_residual() <= 1e-10);
        }

        #[test]
        fn reverse_is_involution(
            times in proptest::collection::vec(0.01f64..3.0, 2..7),
            outs in proptest::collection::vec(0usize..5, 6),
        ) {
            let mut acc = -1.0;
            let t: Vec<f64> = times.iter().map(|dt| { acc += dt; acc }).collect();
            let s = Arc::new(EventSchedule::new(t).unwrap());
            let k = s.interior_count();
            let r = CollapseRecord::new(s, outs[..k].to_vec()).unwrap();
            let rev = reverse_record(&r);
            prop_assert!(rev.schedule().times().windows(2).all(|w| w[1] > w[0]));
            let mut a = r.outcomes().to_vec();
            let mut b = rev.outcomes().to_vec();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            prop_assert_eq!(reverse_record(&rev), r);
        }
    }
}
