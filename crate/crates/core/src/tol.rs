/// Numerical thresholds shared by every constructor and check in the crate.
///
/// All thresholds are relative: a quantity is compared against
/// `tol * max(1, scale)` or `tol * sigma_max` depending on the check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Smallest admissible eigenvalue (relative) for positive definiteness.
    pub pd: f64,
    /// Allowed negative eigenvalue (relative) when testing positive semi-definiteness.
    pub psd: f64,
    /// Relative singular-value cutoff for rank and nonsingularity tests.
    pub rank: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        pd: 1e-10,
        psd: 1e-9,
        rank: 1e-9,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
