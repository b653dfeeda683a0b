use thiserror::Error;

/// Errors raised by the simulation building blocks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal contains a non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("transfer function has {got} bins but the signal has {expected} samples")]
    GridMismatch { expected: usize, got: usize },
    #[error("transfer function is not Hermitian at bin {bin}; a real signal would become complex")]
    NonHermitian { bin: usize },
    #[error("expected a {expected} signal, got {got}")]
    WrongDomain {
        expected: &'static str,
        got: &'static str,
    },
    #[error("negative power sample {value} at index {index}")]
    NegativePower { index: usize, value: f64 },
    #[error("signal has zero mean power")]
    ZeroPower,
    #[error("PRBS seed must be nonzero within the register width")]
    ZeroSeed,
    #[error("PAM-4 mapping needs an even number of bits, got {0}")]
    OddBitCount(usize),
    #[error("drive level {value} at index {index} lies outside [0, 1]")]
    DriveOutOfRange { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("the -20 dB frequency must exceed the -3 dB frequency ({f3db} Hz >= {f20db} Hz)")]
    BandwidthOrder { f3db: f64, f20db: f64 },
    #[error("cascade response never reaches {level_db} dB on the provided grid")]
    FitRange { level_db: f64 },
    #[error("timing alignment failed: normalized correlation peak {peak:.3} is below {floor}")]
    AlignmentFailure { peak: f64, floor: f64 },
    #[error("equalizer diverged at symbol {symbol}")]
    Diverged { symbol: usize },
    #[error("not enough bits to count: need {needed}, have {available}")]
    InsufficientBits { needed: usize, available: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
