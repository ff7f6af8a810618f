use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the numerical core.
///
/// Every variant is a domain error: the inputs violate a precondition of the
/// operation. Numerical trouble during integration is reported through
/// [`crate::Status`] instead.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Dimension below 3.
    Dimension { n: u32 },
    /// Exponent outside `(n/(n-2), (n+2)/(n-2)]`.
    Exponent { p: f64, n: u32, bound: &'static str, value: f64, fraction: String },
    /// A coupling coefficient that must be positive (or nonnegative for β) is not.
    Coefficient { name: &'static str, value: f64 },
    /// A Fowler amplitude is negative.
    NegativeComponent { t: f64, w1: f64, w2: f64 },
    /// `(k, l) = (0, 0)` was supplied where a nontrivial scaling is required.
    TrivialScaling,
    /// The state handed to `linearize` is not an equilibrium.
    NotEquilibrium { rhs_norm: f64 },
    /// An operation needs a trajectory of the other system.
    WrongSystem { expected: &'static str },
    /// The Pohozaev check only applies at the critical exponent.
    NotCritical { tau: f64 },
    /// The trajectory left the positive cone and cannot represent a solution.
    ConeExit,
    /// A radius was not positive.
    NonPositiveRadius { r: f64 },
    /// Too few grid points or samples.
    TooFewPoints { got: usize, need: usize },
    /// Any other malformed argument.
    InvalidArgument(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { n } => write!(f, "dimension n = {n} is not admitted (need n >= 3)"),
            Error::Exponent { p, n, bound, value, fraction } => write!(
                f,
                "exponent p = {p} is not admitted for n = {n}: bound {bound} = {fraction} ≈ {value:.6} violated"
            ),
            Error::Coefficient { name, value } => {
                write!(f, "coefficient {name} = {value} is not admitted")
            }
            Error::NegativeComponent { t, w1, w2 } => write!(
                f,
                "state at t = {t} left the positive cone (w1 = {w1}, w2 = {w2})"
            ),
            Error::TrivialScaling => write!(f, "(k, l) = (0, 0) is not a valid scaling"),
            Error::NotEquilibrium { rhs_norm } => {
                write!(f, "state is not an equilibrium (rhs norm {rhs_norm:e})")
            }
            Error::WrongSystem { expected } => {
                write!(f, "operation expects a {expected}-system trajectory")
            }
            Error::NotCritical { tau } => write!(
                f,
                "Pohozaev constancy requires the critical exponent, but tau = {tau}"
            ),
            Error::ConeExit => write!(f, "trajectory left the positive cone"),
            Error::NonPositiveRadius { r } => write!(f, "radius r = {r} must be positive"),
            Error::TooFewPoints { got, need } => {
                write!(f, "got {got} points, need at least {need}")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
