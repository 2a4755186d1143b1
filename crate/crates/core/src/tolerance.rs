//! Numerical tolerances shared by every validation in the crate.

/// Tolerance configuration. All values are absolute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Entrywise Hermiticity residual.
    pub herm: f64,
    /// Max entrywise deviation of `U U^†` from the identity.
    pub unitary: f64,
    /// Allowed negative eigenvalue slack for positive operators.
    pub psd: f64,
    /// Trace deviation for normalized states.
    pub trace: f64,
    /// Below this a history weight counts as zero.
    pub zero: f64,
    /// Max entrywise completeness residual of a collapse family.
    pub complete: f64,
    /// Max entrywise transpose asymmetry for the time-symmetry conditions.
    pub sym: f64,
    /// Imaginary part allowed on a quantity that must be a probability.
    pub imag: f64,
    /// Mutual orthogonality / idempotence slack for projector sets.
    pub projector: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        herm: 1e-12,
        unitary: 1e-10,
        psd: 1e-10,
        trace: 1e-10,
        zero: 1e-14,
        complete: 1e-10,
        sym: 1e-10,
        imag: 1e-9,
        projector: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Largest number of records any exact enumeration will visit.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// Condition-number ceiling for GRW completeness renormalization.
pub const GRW_CONDITION_LIMIT: f64 = 1e8;
