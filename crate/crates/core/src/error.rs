use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty trace")]
    EmptyTrace,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("symbol shift {shift} outside [{min}, {max}]")]
    SymbolOutOfRange { shift: i64, min: i64, max: i64 },

    #[error("trace has {len} samples, at least {needed} required")]
    TraceTooShort { len: usize, needed: usize },

    #[error("no signal")]
    NoSignal,

    #[error("expected {expected} bits, got {got}")]
    BitWidth { expected: u32, got: usize },

    #[error("shift {0} has no bit encoding")]
    Unencodable(i64),

    #[error("occupancy {0} is not reachable (must lie in [0, 0.95])")]
    OccupancyUnreachable(f64),

    #[error("schedule time {time_us} us exceeds render duration {duration_us} us")]
    ScheduleExceedsDuration { time_us: u64, duration_us: u64 },

    #[error("requested {requested} intervals but only {available} primes are available")]
    Capacity { requested: usize, available: usize },

    #[error("insufficient contact: no duty cycle decodes every sender within the window")]
    InsufficientContact,
}
