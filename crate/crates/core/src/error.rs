use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid system size N={0}: at least two qubits are required")]
    InvalidSize(usize),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid temperature or inverse temperature: {0}")]
    InvalidTemperature(f64),

    #[error("chi={0} is outside the domain |chi| < 1 of the critical line")]
    CriticalDomain(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: Reason },

    #[error("quasidegenerate ground state (gap {gap:e}){}", fmt_s(.s))]
    Degenerate { gap: f64, s: Option<f64> },

    #[error("time {t} outside the schedule range [0, {t_final}]")]
    OutOfRange { t: f64, t_final: f64 },

    #[error("Matsubara frequency {k} collides with the Drude pole (nu_k = {nu})")]
    PoleCollision { k: usize, nu: f64 },

    #[error("negative terminator residual {0:e}: Matsubara truncation stops inside the nu_k < gamma region")]
    ExpansionInconsistent(f64),

    #[error("hierarchy needs {required} auxiliary operators, cap is {cap}")]
    ResourceCap { required: u128, cap: usize },

    #[error("integrator step size collapsed to {step:e} at t={t}")]
    Stiffness { t: f64, step: f64 },

    #[error("accuracy check failed: {what} = {value:e} exceeds {limit:e}")]
    Accuracy { what: &'static str, value: f64, limit: f64 },

    #[error("gap minimum at the boundary of the scanned range (s={s})")]
    ScanRange { s: f64 },
}

fn fmt_s(s: &Option<f64>) -> alloc::string::String {
    match s {
        Some(s) => alloc::format!(" at s={s}"),
        None => alloc::string::String::new(),
    }
}

/// Short static reason attached to [`Error::InvalidParameter`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reason(pub &'static str);

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason: Reason(reason) }
}
