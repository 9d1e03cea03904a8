//! Python bindings for `beaconfold_core`.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use beaconfold_core::channel::{self, AccessDelay, ChannelModel};
use beaconfold_core::harness::{self, ExperimentConfig, RhoRange};
use beaconfold_core::modem::{self, BitsPerSymbol, Demodulated, Symbol, Variant};
use beaconfold_core::multiplex::{self, DemuxMode, Receiver, SenderId};
use beaconfold_core::signal::{self, QuantizerConfig, DEFAULT_SAMPLE_PERIOD_US};
use beaconfold_core::{BeaconSchedule, Error};

pyo3::create_exception!(beaconfold, NoSignalError, PyValueError);

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::NoSignal => NoSignalError::new_err("no signal"),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for beaconfold_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn variant(name: &str) -> PyResult<Variant> {
    name.parse().py()
}

/// Sender timing: interval `x·delta_us`, sampled every `sample_period_us`.
#[pyclass(name = "IntervalConfig", frozen, eq, from_py_object)]
#[derive(Clone, Copy, PartialEq)]
struct PyIntervalConfig(modem::IntervalConfig);

#[pymethods]
impl PyIntervalConfig {
    #[new]
    #[pyo3(signature = (delta_us, x, sample_period_us = DEFAULT_SAMPLE_PERIOD_US))]
    fn new(delta_us: u64, x: u32, sample_period_us: u64) -> PyResult<Self> {
        modem::IntervalConfig::new(delta_us, x, sample_period_us)
            .py()
            .map(Self)
    }

    #[staticmethod]
    fn wifi(x: u32) -> PyResult<Self> {
        modem::IntervalConfig::wifi(x).py().map(Self)
    }

    #[staticmethod]
    fn zigbee(x: u32) -> PyResult<Self> {
        modem::IntervalConfig::zigbee(x).py().map(Self)
    }

    #[staticmethod]
    fn bluetooth(x: u32) -> PyResult<Self> {
        modem::IntervalConfig::bluetooth(x).py().map(Self)
    }

    #[getter]
    fn x(&self) -> u32 {
        self.0.x()
    }

    #[getter]
    fn delta_us(&self) -> u64 {
        self.0.delta_us()
    }

    #[getter]
    fn sample_period_us(&self) -> u64 {
        self.0.sample_period_us()
    }

    #[getter]
    fn interval_us(&self) -> u64 {
        self.0.interval_us()
    }

    /// Sample bins per interval.
    #[getter]
    fn samples_per_interval(&self) -> usize {
        self.0.lambda()
    }

    fn shift_range(&self, variant_name: &str) -> PyResult<(i64, i64)> {
        Ok(self.0.shift_range(variant(variant_name)?))
    }

    fn fold_period(&self, variant_name: &str) -> PyResult<usize> {
        Ok(self.0.fold_period(variant(variant_name)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "IntervalConfig(delta_us={}, x={}, sample_period_us={})",
            self.0.delta_us(),
            self.0.x(),
            self.0.sample_period_us()
        )
    }
}

/// Binary busy/idle samples at a fixed period.
#[pyclass(name = "RssiTrace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyRssiTrace(signal::RssiTrace);

#[pymethods]
impl PyRssiTrace {
    #[new]
    #[pyo3(signature = (samples, sample_period_us = DEFAULT_SAMPLE_PERIOD_US, origin_time_us = 0))]
    fn new(samples: Vec<u8>, sample_period_us: u64, origin_time_us: u64) -> PyResult<Self> {
        signal::RssiTrace::new(samples, sample_period_us, origin_time_us)
            .py()
            .map(Self)
    }

    /// Busy wherever the reading is at or above `threshold_dbm`.
    #[staticmethod]
    #[pyo3(signature = (power_dbm, threshold_dbm = signal::DEFAULT_THRESHOLD_DBM))]
    fn quantize(power_dbm: Vec<f64>, threshold_dbm: f64) -> PyResult<Self> {
        signal::quantize(&power_dbm, &QuantizerConfig { threshold_dbm })
            .py()
            .map(Self)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        signal::load_trace(path).py().map(Self)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        signal::save_trace(&self.0, path).py()
    }

    #[getter]
    fn samples(&self) -> Vec<u8> {
        self.0.samples().to_vec()
    }

    #[getter]
    fn sample_period_us(&self) -> u64 {
        self.0.sample_period_us()
    }

    #[getter]
    fn awake(&self) -> Option<Vec<bool>> {
        self.0.awake().map(<[bool]>::to_vec)
    }

    fn busy_fraction(&self) -> f64 {
        self.0.busy_fraction()
    }

    /// Keeps the first two samples of every busy run.
    fn edge_filter(&self) -> Self {
        Self(signal::packet_edge_filter(&self.0))
    }

    fn window(&self, start: usize, len: usize) -> PyResult<Self> {
        self.0.window(start, len).py().map(Self)
    }

    fn fold(&self, period: usize) -> PyResult<Vec<u32>> {
        modem::fold(&self.0, period).py().map(|f| f.sums)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "RssiTrace(len={}, sample_period_us={}, busy={})",
            self.0.len(),
            self.0.sample_period_us(),
            self.0.busy_count()
        )
    }
}

/// Decoded symbol plus diagnostics.
#[pyclass(name = "Demodulated", frozen, get_all)]
struct PyDemodulated {
    shift: i64,
    variant: String,
    confidence: f64,
    peak_columns: Vec<usize>,
    offset_samples: i64,
    fold_period: usize,
}

impl From<Demodulated> for PyDemodulated {
    fn from(d: Demodulated) -> Self {
        Self {
            shift: d.symbol.shift(),
            variant: d.symbol.variant().to_string(),
            confidence: d.confidence,
            peak_columns: d.peak_columns,
            offset_samples: d.offset_samples,
            fold_period: d.fold_period,
        }
    }
}

#[pymethods]
impl PyDemodulated {
    fn __repr__(&self) -> String {
        format!(
            "Demodulated(shift={}, variant={}, confidence={:.3}, peak_columns={:?})",
            self.shift, self.variant, self.confidence, self.peak_columns
        )
    }
}

/// Ideal emission times (µs) for `rho` repetitions of `shift`.
#[pyfunction]
#[pyo3(signature = (reference_us, cfg, shift, rho, variant = "freebee"))]
fn modulate(
    reference_us: u64,
    cfg: &PyIntervalConfig,
    shift: i64,
    rho: u32,
    variant: &str,
) -> PyResult<Vec<u64>> {
    let sym = Symbol::new(shift, self::variant(variant)?, &cfg.0).py()?;
    modem::modulate(reference_us, &cfg.0, sym, rho)
        .py()
        .map(|s| s.times_us().to_vec())
}

#[pyfunction]
#[pyo3(signature = (trace, cfg, reference_column, rho_hint = None))]
fn demodulate_freebee(
    trace: &PyRssiTrace,
    cfg: &PyIntervalConfig,
    reference_column: usize,
    rho_hint: Option<u32>,
) -> PyResult<PyDemodulated> {
    modem::demodulate_freebee(&trace.0, &cfg.0, reference_column, rho_hint)
        .py()
        .map(Into::into)
}

#[pyfunction]
#[pyo3(signature = (trace, cfg, rho_hint = None))]
fn demodulate_afreebee(
    trace: &PyRssiTrace,
    cfg: &PyIntervalConfig,
    rho_hint: Option<u32>,
) -> PyResult<PyDemodulated> {
    modem::demodulate_afreebee(&trace.0, &cfg.0, rho_hint)
        .py()
        .map(Into::into)
}

#[pyfunction]
fn learn_reference(trace: &PyRssiTrace, cfg: &PyIntervalConfig) -> PyResult<usize> {
    modem::learn_reference(&trace.0, &cfg.0).py()
}

#[pyfunction]
#[pyo3(signature = (cfg, rho, variant = "freebee", floor = false))]
fn bit_rate(cfg: &PyIntervalConfig, rho: u32, variant: &str, floor: bool) -> PyResult<f64> {
    let bits = if floor {
        BitsPerSymbol::Floor
    } else {
        BitsPerSymbol::Exact
    };
    modem::bit_rate(&cfg.0, rho, self::variant(variant)?, bits).py()
}

/// `(storage_bits, storage_bytes, fold_period)` per symbol.
#[pyfunction]
#[pyo3(signature = (cfg, rho, variant = "freebee"))]
fn overhead(cfg: &PyIntervalConfig, rho: u32, variant: &str) -> PyResult<(u64, u64, usize)> {
    let r = harness::overhead_report(&cfg.0, rho, self::variant(variant)?);
    Ok((r.storage_bits, r.storage_bytes, r.fold_period))
}

fn channel_model(occupancy: f64, p_fast: Option<f64>) -> PyResult<ChannelModel> {
    let mut m = ChannelModel::with_occupancy(occupancy);
    m.access_delay = match p_fast {
        Some(p) => AccessDelay::TwoPiece { p_fast: p },
        None => AccessDelay::None,
    };
    m.validate().py()?;
    m.calibrated().py()
}

/// Renders beacon schedules (lists of emission times in µs) over background
/// traffic at `occupancy`. `p_fast=None` disables access delay.
#[pyfunction]
#[pyo3(signature = (schedules, duration_us, occupancy = 0.0, seed = 0, p_fast = Some(0.9)))]
fn render(
    schedules: Vec<Vec<u64>>,
    duration_us: u64,
    occupancy: f64,
    seed: u64,
    p_fast: Option<f64>,
) -> PyResult<PyRssiTrace> {
    let model = channel_model(occupancy, p_fast)?;
    let schedules = schedules
        .into_iter()
        .map(|t| BeaconSchedule::new(t, model.beacon_len_us))
        .collect::<beaconfold_core::Result<Vec<_>>>()
        .py()?;
    channel::render(&schedules, &model, duration_us, seed, None)
        .py()
        .map(PyRssiTrace)
}

/// Monte-Carlo SER grid; one dict per `(rho, occupancy)` point.
#[pyfunction]
#[pyo3(signature = (cfg, rho_min, rho_max, occupancies, trials, seed = 0, variant = "freebee", learn_rows = harness::DEFAULT_LEARN_ROWS))]
#[allow(clippy::too_many_arguments)]
fn ser_sweep(
    py: Python<'_>,
    cfg: &PyIntervalConfig,
    rho_min: u32,
    rho_max: u32,
    occupancies: Vec<f64>,
    trials: u64,
    seed: u64,
    variant: &str,
    learn_rows: u32,
) -> PyResult<Vec<BTreeMap<&'static str, f64>>> {
    let rho = RhoRange::new(rho_min, rho_max).py()?;
    let mut exp = ExperimentConfig::new(
        self::variant(variant)?,
        cfg.0,
        rho,
        occupancies,
        trials,
        seed,
    )
    .py()?;
    exp.learn_rows = learn_rows;
    let points = py.detach(|| harness::ser_sweep(&exp)).py()?;
    Ok(points
        .iter()
        .map(|p| {
            BTreeMap::from([
                ("rho", p.rho as f64),
                ("occupancy", p.occupancy),
                ("sampling_duration_s", p.sampling_duration_s),
                ("trials", p.trials as f64),
                ("errors", p.errors as f64),
                ("ser", p.ser()),
                ("wilson_half_width", p.wilson_half_width()),
            ])
        })
        .collect())
}

/// The `n` smallest primes in `[x_min, x_max]` as `x` values.
#[pyfunction]
fn assign_intervals(
    n: usize,
    x_min: u32,
    x_max: u32,
    base: &PyIntervalConfig,
) -> PyResult<Vec<u32>> {
    multiplex::assign_intervals(n, x_min, x_max, &base.0)
        .py()
        .map(|a| a.xs())
}

#[pyfunction]
fn verify_orthogonality(xs: Vec<u32>, trace_len: usize, base: &PyIntervalConfig) -> bool {
    multiplex::verify_orthogonality(&xs, trace_len, &base.0)
}

/// Decodes every sender in `senders` (id → IntervalConfig) from one trace.
/// Synchronous decoding needs `references` (id → column); failures map to `None`.
#[pyfunction]
#[pyo3(signature = (trace, senders, references = None, cancel = false))]
fn demux(
    trace: &PyRssiTrace,
    senders: BTreeMap<u32, PyIntervalConfig>,
    references: Option<BTreeMap<u32, usize>>,
    cancel: bool,
) -> PyResult<BTreeMap<u32, Option<PyDemodulated>>> {
    let assignment = multiplex::IntervalAssignment::from_pairs(
        senders.iter().map(|(&id, c)| (SenderId(id), c.0)),
    )
    .py()?;
    let receiver = match references {
        Some(r) => Receiver::FreeBee {
            references: r.into_iter().map(|(id, c)| (SenderId(id), c)).collect(),
        },
        None => Receiver::AFreeBee,
    };
    let mode = if cancel {
        DemuxMode::Cancelling
    } else {
        DemuxMode::Plain
    };
    Ok(multiplex::demux(&trace.0, &assignment, &receiver, mode)
        .into_iter()
        .map(|(id, r)| (id.0, r.ok().map(Into::into)))
        .collect())
}

#[pyfunction]
fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    harness::wilson_interval(errors, trials)
}

#[pymodule]
fn beaconfold(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIntervalConfig>()?;
    m.add_class::<PyRssiTrace>()?;
    m.add_class::<PyDemodulated>()?;
    m.add("NoSignalError", m.py().get_type::<NoSignalError>())?;
    m.add_function(wrap_pyfunction!(modulate, m)?)?;
    m.add_function(wrap_pyfunction!(demodulate_freebee, m)?)?;
    m.add_function(wrap_pyfunction!(demodulate_afreebee, m)?)?;
    m.add_function(wrap_pyfunction!(learn_reference, m)?)?;
    m.add_function(wrap_pyfunction!(bit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(overhead, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(ser_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(assign_intervals, m)?)?;
    m.add_function(wrap_pyfunction!(verify_orthogonality, m)?)?;
    m.add_function(wrap_pyfunction!(demux, m)?)?;
    m.add_function(wrap_pyfunction!(wilson_interval, m)?)?;
    Ok(())
}
