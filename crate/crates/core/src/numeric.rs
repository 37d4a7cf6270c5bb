//! Numerical tolerances shared by every solver in the crate.

/// One record holding every tolerance and iteration cap used internally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericConfig {
    /// Relative tolerance of the continued fractions behind the t and chi-square tails.
    pub special_rel_tol: f64,
    /// Iteration cap for those continued fractions.
    pub special_max_iter: usize,
    /// Maximum absolute change of the working covariance between constrained-fit sweeps.
    pub fit_tol: f64,
    /// Residual bound on the moment conditions of a converged constrained fit.
    pub moment_tol: f64,
    pub fit_max_iter: usize,
    /// Relative change of the joint log-likelihood that ends a multigroup ascent.
    pub joint_rel_tol: f64,
    pub joint_max_iter: usize,
    /// Slack used when comparing a real-valued weighted degree to an integer shell level.
    pub shell_tol: f64,
    /// Precision entries with smaller magnitude are treated as structural zeros.
    pub zero_tol: f64,
}

impl NumericConfig {
    pub const DEFAULT: NumericConfig = NumericConfig {
        special_rel_tol: 1e-10,
        special_max_iter: 500,
        fit_tol: 1e-13,
        moment_tol: 1e-8,
        fit_max_iter: 20_000,
        joint_rel_tol: 1e-11,
        joint_max_iter: 20_000,
        shell_tol: 1e-9,
        zero_tol: 1e-12,
    };
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub(crate) const TOL: NumericConfig = NumericConfig::DEFAULT;
