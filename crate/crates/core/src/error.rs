use alloc::boxed::Box;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Standing assumptions on a UE type's evaluation function and costs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clause {
    /// v' > 0 and v'' < 0.
    Concavity,
    /// v(0) = 0 and u(M) > 0.
    PositiveAtCap,
    /// r0·v'(r0·M) < c < r0·v'(0): the attack-free optimum is interior.
    InteriorOptimum,
    /// The attack-free optimum is nondecreasing in the unit reward.
    MonotoneInReward,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Clause::Concavity => "concavity (v' > 0, v'' < 0)",
            Clause::PositiveAtCap => "positive utility at the cap (v(0) = 0, v(r0 M) > c M)",
            Clause::InteriorOptimum => "interior optimum (r0 v'(r0 M) < c < r0 v'(0))",
            Clause::MonotoneInReward => "attack-free optimum nondecreasing in r0",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible domain.
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// A standing assumption fails for the given type/scheme.
    Assumption { clause: Clause, detail: &'static str },
    /// A bracketing solver found no sign change.
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    /// An inner per-type solve failed.
    Type { index: usize, source: Box<Error> },
    /// Explicit time stepping left [0, 1] by more than the round-off allowance.
    StepSize { t: f64, theta: f64 },
    /// The requested quantity does not exist in this regime.
    Undefined(&'static str),
    /// The objective is identically zero over the search range.
    Degenerate(&'static str),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }

    pub(crate) fn in_type(self, index: usize) -> Self {
        Error::Type {
            index,
            source: Box::new(self),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, value, reason } => {
                write!(f, "invalid {name} = {value}: {reason}")
            }
            Error::Assumption { clause, detail } => {
                write!(f, "assumption violated: {clause}: {detail}")
            }
            Error::NoSignChange { lo, hi, f_lo, f_hi } => write!(
                f,
                "no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}"
            ),
            Error::Type { index, source } => write!(f, "type {index}: {source}"),
            Error::StepSize { t, theta } => write!(
                f,
                "step size too large: theta = {theta} left [0, 1] at t = {t}"
            ),
            Error::Undefined(what) => write!(f, "undefined: {what}"),
            Error::Degenerate(what) => write!(f, "degenerate objective: {what}"),
        }
    }
}

impl core::error::Error for Error {}
