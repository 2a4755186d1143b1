//! Dense complex linear algebra over a fixed finite Hilbert space.
//!
//! The distinguished basis used by the time-reversal map is the storage
//! basis: `conjugate_in_basis` conjugates entries exactly as stored.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub type Matrix = DMatrix<Complex64>;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// A finite Hilbert space with named basis vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    dim: usize,
    basis_labels: Vec<String>,
}

impl HilbertSpace {
    pub fn new(basis_labels: Vec<String>) -> Result<Self> {
        if basis_labels.is_empty() {
            return Err(Error::InvalidInput("Hilbert space needs dim >= 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &basis_labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate basis label {l:?}")));
            }
        }
        Ok(Self {
            dim: basis_labels.len(),
            basis_labels,
        })
    }

    /// Space with labels `"0"`, `"1"`, ...
    pub fn numbered(dim: usize) -> Result<Self> {
        Self::new((0..dim).map(|i| i.to_string()).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }
}

/// Row-major `{"dim", "re", "im"}` wire form of a square operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorData {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl OperatorData {
    pub fn from_matrix(m: &Matrix) -> Self {
        let d = m.nrows();
        let re = (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect();
        let im = (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect();
        Self { dim: d, re, im }
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        let d = self.dim;
        let rows_ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if d == 0 || !rows_ok(&self.re) || !rows_ok(&self.im) {
            return Err(Error::Shape(format!(
                "operator data must hold two {d}x{d} arrays (dim >= 1)"
            )));
        }
        Ok(Matrix::from_fn(d, d, |i, j| {
            Complex64::new(self.re[i][j], self.im[i][j])
        }))
    }
}

/// Square matrix with `A[i][j] == conj(A[j][i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    m: Matrix,
}

impl HermitianOperator {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::DEFAULT.herm)
    }

    pub fn with_tolerance(m: Matrix, tol_herm: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Shape(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("operator has non-finite entries".into()));
        }
        let residual = max_abs_diff(&m, &m.adjoint());
        if residual > tol_herm {
            return Err(Error::validation("operator is not Hermitian", residual, tol_herm));
        }
        Ok(Self { m })
    }

    /// Builds from real row-major entries.
    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("rows must form a square array".into()));
        }
        Self::new(Matrix::from_fn(d, d, |i, j| Complex64::new(rows[i][j], 0.0)))
    }

    pub fn from_data(data: &OperatorData) -> Result<Self> {
        Self::new(data.to_matrix()?)
    }

    pub fn to_data(&self) -> OperatorData {
        OperatorData::from_matrix(&self.m)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: Matrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: Matrix::zeros(dim, dim),
        }
    }

    /// `|v><v|` for an unnormalized vector `v`.
    pub fn projector_onto(v: &DVector<Complex64>) -> Self {
        Self { m: v * v.adjoint() }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { m: &self.m * Complex64::new(s, 0.0) }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            m: conjugate_in_basis(&self.m),
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = hermitian_eigen(&self.m)?;
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }
}

/// Square matrix with `U U^† = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    m: Matrix,
}

impl UnitaryOperator {
    pub fn new(m: Matrix) -> Result<Self> {
        Self::with_tolerance(m, Tolerances::DEFAULT.unitary)
    }

    pub fn with_tolerance(m: Matrix, tol_unitary: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Shape("unitary must be a non-empty square matrix".into()));
        }
        let d = m.nrows();
        let residual = max_abs_diff(&(&m * m.adjoint()), &Matrix::identity(d, d));
        if !(residual <= tol_unitary) {
            return Err(Error::validation("operator is not unitary", residual, tol_unitary));
        }
        Ok(Self { m })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }
}

/// Nonzero state vector; normalization is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: DVector<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() || !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("pure state must have finite nonzero norm".into()));
        }
        Ok(Self { amplitudes })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(
            amps.len(),
            amps.iter().map(|&a| Complex64::new(a, 0.0)),
        ))
    }

    /// Computational basis vector `|index>`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidInput(format!("basis index {index} >= dim {dim}")));
        }
        let mut v = DVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Self::new(v)
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// Normalized density operator `|psi><psi| / <psi|psi>`.
    pub fn to_density(&self) -> DensityOperator {
        let n = self.norm_sqr();
        let m = (&self.amplitudes * self.amplitudes.adjoint()) / Complex64::new(n, 0.0);
        DensityOperator {
            op: HermitianOperator {
                m: hermitize(m),
            },
            role: DensityRole::State,
        }
    }
}

/// What a positive operator stands for; decides which checks apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DensityRole {
    /// Unit trace, positive semidefinite.
    State,
    /// Eigenvalues in `[0, 1]`.
    PovmElement,
    /// Positive semidefinite with arbitrary nonnegative trace.
    UnnormalizedHistory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
    role: DensityRole,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator, role: DensityRole) -> Result<Self> {
        Self::with_tolerances(op, role, &Tolerances::DEFAULT)
    }

    pub fn with_tolerances(op: HermitianOperator, role: DensityRole, tol: &Tolerances) -> Result<Self> {
        let vals = op.eigenvalues()?;
        let min = vals[0];
        let max = vals[vals.len() - 1];
        if min < -tol.psd {
            return Err(Error::validation(
                format!("{role:?} operator is not positive semidefinite (min eigenvalue {min:e})"),
                -min,
                tol.psd,
            ));
        }
        match role {
            DensityRole::State => {
                let dev = (op.trace() - 1.0).abs();
                if dev > tol.trace {
                    return Err(Error::validation("state does not have unit trace", dev, tol.trace));
                }
            }
            DensityRole::PovmElement => {
                if max > 1.0 + tol.psd {
                    return Err(Error::validation(
                        format!("POVM element has eigenvalue {max:e} above 1"),
                        max - 1.0,
                        tol.psd,
                    ));
                }
            }
            DensityRole::UnnormalizedHistory => {}
        }
        Ok(Self { op, role })
    }

    /// Wraps an operator produced internally by a positivity-preserving map.
    pub(crate) fn history_unchecked(m: Matrix) -> Self {
        Self {
            op: HermitianOperator { m: hermitize(m) },
            role: DensityRole::UnnormalizedHistory,
        }
    }

    pub(crate) fn state_unchecked(m: Matrix) -> Self {
        Self {
            op: HermitianOperator { m: hermitize(m) },
            role: DensityRole::State,
        }
    }

    /// `1/d` times the identity.
    pub fn maximally_mixed(dim: usize) -> Self {
        Self::state_unchecked(Matrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0))
    }

    pub fn role(&self) -> DensityRole {
        self.role
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &Matrix {
        &self.op.m
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> f64 {
        self.op.trace()
    }
}

/// `exp(-i H dt)` via the eigendecomposition of `H`. `dt` may be negative.
pub fn propagator(h: &HermitianOperator, dt: f64) -> Result<UnitaryOperator> {
    if !dt.is_finite() {
        return Err(Error::InvalidInput(format!("propagation time {dt} is not finite")));
    }
    let eig = hermitian_eigen(&h.m)?;
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues
            .iter()
            .map(|&e| Complex64::from_polar(1.0, -e * dt)),
    );
    let v = &eig.eigenvectors;
    let u = v * Matrix::from_diagonal(&phases) * v.adjoint();
    UnitaryOperator::new(u).map_err(|e| Error::Numerical(format!("propagator lost unitarity: {e}")))
}

/// Entrywise complex conjugate in the distinguished (storage) basis.
pub fn conjugate_in_basis(a: &Matrix) -> Matrix {
    a.map(|z| z.conj())
}

/// `tr[A B]` without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> Result<Complex64> {
    if a.nrows() != b.ncols() || a.ncols() != b.nrows() {
        return Err(Error::Shape(format!(
            "trace_product of {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc)
}

/// Splits an unnormalized history into its trace and the normalized state.
///
/// A weight at or below `tol.zero` is an impossible branch and reported as
/// [`Error::ZeroWeight`].
pub fn normalize_history(pi: &DensityOperator) -> Result<(DensityOperator, f64)> {
    normalize_history_with(pi, &Tolerances::DEFAULT)
}

pub fn normalize_history_with(pi: &DensityOperator, tol: &Tolerances) -> Result<(DensityOperator, f64)> {
    let weight = pi.trace();
    if !(weight > tol.zero) {
        return Err(Error::ZeroWeight {
            weight,
            tolerance: tol.zero,
        });
    }
    let rho = pi.matrix() / Complex64::new(weight, 0.0);
    Ok((DensityOperator::state_unchecked(rho), weight))
}

/// Turns a complex trace into a probability-like real number.
///
/// Imaginary parts above `tol_imag` mean the model is broken, not that we
/// should silently drop them.
pub fn real_part_checked(z: Complex64, tol_imag: f64) -> Result<f64> {
    if z.im.abs() > tol_imag {
        return Err(Error::ModelValidity(format!(
            "expected a real trace, imaginary part is {:e}",
            z.im
        )));
    }
    Ok(z.re)
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Max entrywise `|A - A^T|`.
pub fn transpose_asymmetry(a: &Matrix) -> f64 {
    max_abs_diff(a, &a.transpose())
}

/// `(A + A^†)/2`, removing roundoff asymmetry.
pub(crate) fn hermitize(m: Matrix) -> Matrix {
    let adj = m.adjoint();
    (m + adj) * Complex64::new(0.5, 0.0)
}

pub(crate) fn hermitian_eigen(m: &Matrix) -> Result<SymmetricEigen<Complex64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Hermitian eigendecomposition did not converge".into()))
}

/// Real-valued matrix convenience for tests and fixtures.
pub fn real_matrix(rows: &[Vec<f64>]) -> Matrix {
    let d = rows.len();
    Matrix::from_fn(d, rows.first().map_or(0, Vec::len), |i, j| Complex64::new(rows[i][j], 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sigma_x() -> HermitianOperator {
        HermitianOperator::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let u = propagator(&HermitianOperator::zeros(2), 1.7).unwrap();
        assert!(max_abs_diff(u.matrix(), &Matrix::identity(2, 2)) < 1e-14);
    }

    #[test]
    fn pauli_x_half_turn() {
        let u = propagator(&sigma_x(), PI).unwrap();
        let expect = Matrix::identity(2, 2) * c(-1.0, 0.0);
        assert!(max_abs_diff(u.matrix(), &expect) < 1e-10);
    }

    #[test]
    fn diagonal_exponential() {
        let h = HermitianOperator::from_real_rows(&[vec![0.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let u = propagator(&h, 0.5).unwrap();
        let expect = Matrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), Complex64::from_polar(1.0, -1.0)]));
        assert!(max_abs_diff(u.matrix(), &expect) < 1e-12);
    }

    #[test]
    fn propagator_rejects_non_hermitian() {
        let m = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(HermitianOperator::new(m), Err(Error::Validation { .. })));
    }

    #[test]
    fn conjugation_examples() {
        let real = real_matrix(&[vec![1.0, 2.0], vec![2.0, 3.0]]);
        assert_eq!(conjugate_in_basis(&real), real);
        let sy = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let expect = Matrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(0.0, 0.0)]);
        assert_eq!(conjugate_in_basis(&sy), expect);
    }

    #[test]
    fn trace_product_examples() {
        let rho = PureState::from_real(&[0.6, 0.0, 0.8]).unwrap().to_density();
        let one = trace_product(&Matrix::identity(3, 3), rho.matrix()).unwrap();
        assert!((one - c(1.0, 0.0)).norm() < 1e-14);

        let p0 = PureState::basis(2, 0).unwrap().to_density();
        let p1 = PureState::basis(2, 1).unwrap().to_density();
        assert_eq!(trace_product(p0.matrix(), p1.matrix()).unwrap(), c(0.0, 0.0));

        let plus = PureState::from_real(&[1.0, 1.0]).unwrap().to_density();
        let t = trace_product(plus.matrix(), plus.matrix()).unwrap();
        assert!((t - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn trace_product_shape_mismatch() {
        let a = Matrix::identity(2, 2);
        let b = Matrix::identity(3, 3);
        assert!(matches!(trace_product(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn normalize_history_examples() {
        let p0 = PureState::basis(2, 0).unwrap().to_density();
        let pi = DensityOperator::history_unchecked(p0.matrix() * c(0.25, 0.0));
        let (rho, w) = normalize_history(&pi).unwrap();
        assert!((w - 0.25).abs() < 1e-15);
        assert!(max_abs_diff(rho.matrix(), p0.matrix()) < 1e-15);
        assert_eq!(rho.role(), DensityRole::State);

        let zero = DensityOperator::history_unchecked(Matrix::zeros(2, 2));
        assert!(matches!(normalize_history(&zero), Err(Error::ZeroWeight { .. })));

        let half = DensityOperator::history_unchecked(Matrix::identity(2, 2) * c(0.5, 0.0));
        let (rho, w) = normalize_history(&half).unwrap();
        assert!((w - 1.0).abs() < 1e-15);
        assert!(max_abs_diff(rho.matrix(), &(Matrix::identity(2, 2) * c(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn density_roles_are_checked() {
        let not_psd = HermitianOperator::from_real_rows(&[vec![1.5, 0.0], vec![0.0, -0.5]]).unwrap();
        assert!(DensityOperator::new(not_psd, DensityRole::State).is_err());
        let big = HermitianOperator::identity(2).scaled(2.0);
        assert!(DensityOperator::new(big.clone(), DensityRole::PovmElement).is_err());
        assert!(DensityOperator::new(big, DensityRole::UnnormalizedHistory).is_ok());
        let id = HermitianOperator::identity(2);
        assert!(DensityOperator::new(id.clone(), DensityRole::PovmElement).is_ok());
        assert!(DensityOperator::new(id, DensityRole::State).is_err());
    }

    #[test]
    fn zero_pure_state_rejected() {
        assert!(PureState::from_real(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn hilbert_space_rejects_duplicates() {
        assert!(HilbertSpace::new(vec!["a".into(), "a".into()]).is_err());
        assert!(HilbertSpace::new(vec![]).is_err());
        assert_eq!(HilbertSpace::numbered(3).unwrap().dim(), 3);
    }

    #[test]
    fn operator_data_shape_checked() {
        let bad = OperatorData {
            dim: 2,
            re: vec![vec![1.0, 0.0]],
            im: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
        };
        assert!(bad.to_matrix().is_err());
    }

    fn hermitian_from(d: usize, v: &[f64]) -> HermitianOperator {
        let a = Matrix::from_fn(d, d, |i, j| c(v[i * d + j], v[36 + i * d + j]));
        HermitianOperator::new((&a + a.adjoint()) * c(0.5, 0.0)).unwrap()
    }

    fn square_from(d: usize, v: &[f64]) -> Matrix {
        Matrix::from_fn(d, d, |i, j| c(v[i * d + j], v[36 + i * d + j]))
    }

    proptest::proptest! {
        #[test]
        fn propagator_adjoint_is_time_reversal(
            d in 1usize..6,
            v in proptest::collection::vec(-2.0f64..2.0, 72),
            t in -3.0f64..3.0,
        ) {
            let h = hermitian_from(d, &v);
            let fwd = propagator(&h, t).unwrap();
            let back = propagator(&h, -t).unwrap();
            proptest::prop_assert!(max_abs_diff(&fwd.adjoint().matrix().clone(), back.matrix()) <= 1e-10);
        }

        #[test]
        fn conjugation_is_an_involution(d in 1usize..6, v in proptest::collection::vec(-1e3f64..1e3, 72)) {
            let a = square_from(d, &v);
            proptest::prop_assert_eq!(conjugate_in_basis(&conjugate_in_basis(&a)), a);
        }

        #[test]
        fn trace_product_is_cyclic(
            d in 1usize..6,
            v in proptest::collection::vec(-1.0f64..1.0, 72),
            w in proptest::collection::vec(-1.0f64..1.0, 72),
        ) {
            let (a, b) = (square_from(d, &v), square_from(d, &w));
            let ab = trace_product(&a, &b).unwrap();
            let ba = trace_product(&b, &a).unwrap();
            proptest::prop_assert!((ab - ba).norm() <= 1e-12);
        }

        #[test]
        fn normalize_then_rescale_round_trips(
            d in 1usize..6,
            v in proptest::collection::vec(-1.0f64..1.0, 72),
            scale in 1e-3f64..1e3,
        ) {
            let a = square_from(d, &v);
            let psd = HermitianOperator::new(&a * a.adjoint() * c(scale, 0.0) + Matrix::identity(d, d) * c(1e-3, 0.0)).unwrap();
            let pi = DensityOperator::new(psd, DensityRole::UnnormalizedHistory).unwrap();
            let (rho, w) = normalize_history(&pi).unwrap();
            let back = rho.matrix() * c(w, 0.0);
            proptest::prop_assert!(max_abs_diff(&back, pi.matrix()) <= 1e-12 * w.max(1.0));
        }
    }
}
