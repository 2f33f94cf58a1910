use thiserror::Error;

/// Errors produced by the modeling, certification and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// The feeder graph is disconnected or its admittance matrix is
    /// rank-deficient.
    #[error("singular network: {0}")]
    SingularNetwork(String),

    /// A network description violates a structural invariant.
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    /// The linearized PV curve is degenerate (i_mpp <= 0 or v_oc <= v_mpp).
    #[error("degenerate PV curve: {0}")]
    DegenerateCurve(String),

    /// A physical or controller parameter violates its invariant.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// Matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The delay-free closed loop has no equilibrium (A + A_d singular).
    #[error("singular equilibrium: {0}")]
    SingularEquilibrium(String),

    /// The semidefinite kernel broke down numerically; the feasibility
    /// status is unknown, not infeasible.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// The delay-free system is not Hurwitz; a delay margin is undefined.
    #[error("delay-free system unstable: {0}")]
    DelayFreeUnstable(String),

    /// The LMI criterion failed even at zero delay (criterion conservatism
    /// or numerics), reported distinctly from a genuine margin of zero.
    #[error("not certified at zero delay: {0}")]
    NotCertifiedAtZero(String),

    /// Integration step too large for the requested delay lookup.
    #[error("step too large: {0}")]
    StepTooLarge(String),

    /// Empirical margin bisection bracket does not satisfy its
    /// bounded-below / divergent-above precondition.
    #[error("invalid bracket: {0}")]
    BracketInvalid(String),

    /// A scenario description violates an invariant.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
