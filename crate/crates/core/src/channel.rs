//! Stochastic rendering of the shared channel.
//!
//! A render overlays three things on a sample grid: background traffic with a
//! target occupancy, the beacons of one or more schedules after a random
//! channel-access delay, and optionally a receiver duty cycle. The delay is
//! drawn from a fixed distribution rather than emerging from a CSMA state
//! machine; a beacon is always sent into an idle channel, so background energy
//! in the `beacon_vacancy_us` before it is removed.
//!
//! Randomness comes from one root seed: background uses ChaCha stream 0 and
//! schedule `i` uses stream `i + 1`, so renders are replayable bit for bit.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::modem::BeaconSchedule;
use crate::signal::{RssiTrace, DEFAULT_SAMPLE_PERIOD_US};
use crate::{Error, Result};

/// Fast-path access delays are uniform in `[0, FAST_DELAY_WINDOW_US)`.
pub const FAST_DELAY_WINDOW_US: u64 = 256;
/// Mean of a tail delay. Tail delays start where the fast window ends, so the
/// exponential part has mean `TAIL_MEAN_US − FAST_DELAY_WINDOW_US`.
pub const TAIL_MEAN_US: f64 = 512.0;
/// Hard cap on a tail delay.
pub const TAIL_CAP_US: u64 = 5_000;
/// Bluetooth advertisers add a random backoff of up to 10 ms.
pub const BLUETOOTH_BACKOFF_US: u64 = 10_000;
/// Highest occupancy the calibrator will attempt.
pub const MAX_OCCUPANCY: f64 = 0.95;
/// Simulated span used to calibrate the noise arrival rate.
pub const CALIBRATION_DURATION_US: u64 = 100_000_000;

const CALIBRATION_TOLERANCE: f64 = 0.01;
const CALIBRATION_SEED_SALT: u64 = 0x6361_6c69_6272_6174;

/// Uniform distribution over `{min, min + step, …, max}` microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketLengths {
    pub min_us: u64,
    pub max_us: u64,
    pub step_us: u64,
}

impl PacketLengths {
    pub fn uniform_samples(min: u64, max: u64, sample_period_us: u64) -> Self {
        Self {
            min_us: min * sample_period_us,
            max_us: max * sample_period_us,
            step_us: sample_period_us,
        }
    }

    pub fn mean_us(&self) -> f64 {
        (self.min_us + self.max_us) as f64 / 2.0
    }

    fn steps(&self) -> u64 {
        (self.max_us - self.min_us) / self.step_us
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.min_us + rng.random_range(0..=self.steps()) * self.step_us
    }

    fn validate(&self) -> Result<()> {
        if self.min_us == 0 || self.step_us == 0 || self.max_us < self.min_us {
            return Err(Error::InvalidConfig(format!("bad packet lengths {self:?}")));
        }
        Ok(())
    }
}

impl Default for PacketLengths {
    /// 1 to 21 samples. After merging of overlapping packets, edge filtering
    /// keeps 15–17% of background busy time for occupancies up to 0.3.
    fn default() -> Self {
        Self::uniform_samples(1, 21, DEFAULT_SAMPLE_PERIOD_US)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccessDelay {
    /// Beacons leave exactly on schedule.
    None,
    /// With probability `p_fast` uniform in `[0, 256)` us, otherwise an
    /// exponential tail starting at 256 us with mean 512 us, capped at 5 ms.
    TwoPiece { p_fast: f64 },
}

impl Default for AccessDelay {
    fn default() -> Self {
        AccessDelay::TwoPiece { p_fast: 0.9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    /// Background busy fraction before edge filtering.
    pub occupancy: f64,
    pub access_delay: AccessDelay,
    /// Extra uniform backoff in `[0, backoff_extra_max_us]` per beacon.
    pub backoff_extra_max_us: u64,
    pub data_packet_len: PacketLengths,
    /// Airtime given to beacons by schedule builders in the harness.
    pub beacon_len_us: u64,
    /// Idle time guaranteed before each beacon.
    pub beacon_vacancy_us: u64,
    pub sample_period_us: u64,
    pub rng_seed: u64,
    /// Background arrivals per microsecond; `None` uses the analytic rate.
    /// Set by [`calibrated`](Self::calibrated).
    pub noise_rate_per_us: Option<f64>,
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self {
            occupancy: 0.0,
            access_delay: AccessDelay::default(),
            backoff_extra_max_us: 0,
            data_packet_len: PacketLengths::default(),
            beacon_len_us: 2 * DEFAULT_SAMPLE_PERIOD_US,
            beacon_vacancy_us: 2 * DEFAULT_SAMPLE_PERIOD_US,
            sample_period_us: DEFAULT_SAMPLE_PERIOD_US,
            rng_seed: 0,
            noise_rate_per_us: None,
        }
    }
}

impl ChannelModel {
    pub fn with_occupancy(occupancy: f64) -> Self {
        Self {
            occupancy,
            ..Self::default()
        }
    }

    /// Same model at another occupancy; any calibration is dropped.
    pub fn at_occupancy(&self, occupancy: f64) -> Self {
        Self {
            occupancy,
            noise_rate_per_us: None,
            ..self.clone()
        }
    }

    /// No background, no delay: schedules render exactly.
    pub fn noiseless() -> Self {
        Self {
            access_delay: AccessDelay::None,
            ..Self::default()
        }
    }

    pub fn bluetooth_sender(occupancy: f64) -> Self {
        Self {
            backoff_extra_max_us: BLUETOOTH_BACKOFF_US,
            ..Self::with_occupancy(occupancy)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_OCCUPANCY).contains(&self.occupancy) {
            return Err(Error::OccupancyUnreachable(self.occupancy));
        }
        if let AccessDelay::TwoPiece { p_fast } = self.access_delay {
            if !(p_fast > 0.0 && p_fast <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "p_fast {p_fast} outside (0, 1]"
                )));
            }
        }
        if self.beacon_len_us == 0 || self.sample_period_us == 0 {
            return Err(Error::InvalidConfig(
                "beacon length and sample period must be positive".into(),
            ));
        }
        self.data_packet_len.validate()
    }

    /// Arrival rate that yields `occupancy` with the current packet lengths.
    /// Exact for grid-aligned packets: a bin is idle with probability `exp(−ν·m)`.
    pub fn analytic_noise_rate(&self) -> f64 {
        if self.occupancy <= 0.0 {
            return 0.0;
        }
        -(1.0 - self.occupancy).ln() / self.data_packet_len.mean_us()
    }

    /// Background arrival rate per microsecond: calibrated if available.
    pub fn noise_rate(&self) -> f64 {
        self.noise_rate_per_us
            .unwrap_or_else(|| self.analytic_noise_rate())
    }

    /// Runs [`calibrate_noise_rate`] and keeps the result.
    pub fn calibrated(mut self) -> Result<Self> {
        self.noise_rate_per_us = Some(calibrate_noise_rate(&self)?);
        Ok(self)
    }

    pub fn is_calibrated(&self) -> bool {
        self.noise_rate_per_us.is_some()
    }

    fn sample_bins(&self, duration_us: u64) -> usize {
        (duration_us / self.sample_period_us) as usize
    }
}

/// One access delay in microseconds, including any sender backoff.
pub fn sample_access_delay<R: Rng + ?Sized>(model: &ChannelModel, rng: &mut R) -> u64 {
    let base = match model.access_delay {
        AccessDelay::None => 0,
        AccessDelay::TwoPiece { p_fast } => {
            if rng.random::<f64>() < p_fast {
                rng.random_range(0..FAST_DELAY_WINDOW_US)
            } else {
                let excess_mean = TAIL_MEAN_US - FAST_DELAY_WINDOW_US as f64;
                let tail = Exp::new(1.0 / excess_mean)
                    .expect("positive rate")
                    .sample(rng);
                (FAST_DELAY_WINDOW_US + tail as u64).min(TAIL_CAP_US)
            }
        }
    };
    let backoff = if model.backoff_extra_max_us > 0 {
        rng.random_range(0..=model.backoff_extra_max_us)
    } else {
        0
    };
    base + backoff
}

fn background_with_rate<R: Rng + ?Sized>(
    model: &ChannelModel,
    rate_per_us: f64,
    duration_us: u64,
    rng: &mut R,
) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    if rate_per_us <= 0.0 || duration_us == 0 {
        return out;
    }
    let gaps = Exp::new(rate_per_us).expect("positive rate");
    let sp = model.sample_period_us;
    let mut t = 0.0f64;
    loop {
        t += gaps.sample(rng);
        if t >= duration_us as f64 {
            break;
        }
        let start = (t as u64 / sp) * sp;
        let end = (start + model.data_packet_len.sample(rng)).min(duration_us);
        match out.last_mut() {
            Some(last) if start < last.1 => last.1 = last.1.max(end),
            _ => out.push((start, end)),
        }
    }
    out
}

/// Background busy intervals `[start, end)` in microseconds.
///
/// Packets arrive as a Poisson process at the model's noise rate, start on the
/// sample grid, and overlapping packets are merged. Abutting packets stay
/// separate intervals.
pub fn gen_background<R: Rng + ?Sized>(
    model: &ChannelModel,
    duration_us: u64,
    rng: &mut R,
) -> Result<Vec<(u64, u64)>> {
    model.validate()?;
    if duration_us == 0 {
        return Err(Error::InvalidConfig("duration must be positive".into()));
    }
    Ok(background_with_rate(
        model,
        model.noise_rate(),
        duration_us,
        rng,
    ))
}

fn mark(bins: &mut [bool], start_us: u64, end_us: u64, sp: u64) {
    let a = (start_us / sp) as usize;
    let b = (end_us.div_ceil(sp) as usize).min(bins.len());
    if a < b {
        bins[a..b].fill(true);
    }
}

fn busy_fraction_of(intervals: &[(u64, u64)], duration_us: u64, sp: u64) -> f64 {
    let mut bins = vec![false; (duration_us / sp) as usize];
    for &(s, e) in intervals {
        mark(&mut bins, s, e, sp);
    }
    bins.iter().filter(|&&b| b).count() as f64 / bins.len() as f64
}

/// Arrival rate per microsecond whose simulated busy fraction matches the
/// model's occupancy within 1 % relative.
///
/// Starts from the analytic rate and rescales by `ln(1−B)/ln(1−measured)`
/// against a fixed-seed 100 s simulation until the match holds.
pub fn calibrate_noise_rate(model: &ChannelModel) -> Result<f64> {
    model.validate()?;
    let target = model.occupancy;
    if target == 0.0 {
        return Ok(0.0);
    }
    let sp = model.sample_period_us;
    let mut rate = model.analytic_noise_rate();
    let mut best = (f64::INFINITY, rate);
    for _ in 0..12 {
        let mut rng = ChaCha8Rng::seed_from_u64(model.rng_seed ^ CALIBRATION_SEED_SALT);
        let iv = background_with_rate(model, rate, CALIBRATION_DURATION_US, &mut rng);
        let measured = busy_fraction_of(&iv, CALIBRATION_DURATION_US, sp);
        let rel = (measured - target).abs() / target;
        if rel < best.0 {
            best = (rel, rate);
        }
        if rel <= CALIBRATION_TOLERANCE / 2.0 || measured <= 0.0 || measured >= 1.0 {
            break;
        }
        rate *= (1.0 - target).ln() / (1.0 - measured).ln();
    }
    Ok(best.1)
}

/// Receiver sleep schedule: awake for the first `active_fraction` of every
/// `period_us`, offset by `phase_us`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCycleSchedule {
    pub period_us: u64,
    pub active_fraction: f64,
    pub phase_us: u64,
}

impl DutyCycleSchedule {
    pub fn new(period_us: u64, active_fraction: f64, phase_us: u64) -> Result<Self> {
        let d = Self {
            period_us,
            active_fraction,
            phase_us,
        };
        if period_us == 0 || !(active_fraction > 0.0 && active_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!("bad duty cycle {d:?}")));
        }
        if d.active_us() == 0 {
            return Err(Error::InvalidConfig(format!(
                "duty cycle {d:?} has no active time"
            )));
        }
        Ok(d)
    }

    pub fn active_us(&self) -> u64 {
        (self.active_fraction * self.period_us as f64).round() as u64
    }

    pub fn is_awake(&self, t_us: u64) -> bool {
        (t_us + self.phase_us) % self.period_us < self.active_us()
    }
}

/// Renders schedules and background into a trace of `⌊duration / sp⌋` samples.
///
/// A beacon emitted at `t` starts at `t + delay` and occupies
/// `⌈airtime / sp⌉` bins from bin `⌊(t + delay) / sp⌋`, where the airtime is
/// the schedule's beacon duration. With a duty cycle, samples taken while
/// asleep read 0 and the trace carries the awake mask.
pub fn render(
    schedules: &[BeaconSchedule],
    model: &ChannelModel,
    duration_us: u64,
    seed: u64,
    duty: Option<&DutyCycleSchedule>,
) -> Result<RssiTrace> {
    model.validate()?;
    let sp = model.sample_period_us;
    let n = model.sample_bins(duration_us);
    if n == 0 {
        return Err(Error::InvalidConfig(format!(
            "duration {duration_us} us shorter than one sample"
        )));
    }
    for s in schedules {
        if let Some(last) = s.last_time_us().filter(|&t| t >= duration_us) {
            return Err(Error::ScheduleExceedsDuration {
                time_us: last,
                duration_us,
            });
        }
    }

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(0);
    let mut background = vec![false; n];
    for (s, e) in background_with_rate(model, model.noise_rate(), duration_us, &mut noise_rng) {
        mark(&mut background, s, e, sp);
    }

    let vacancy_bins = model.beacon_vacancy_us.div_ceil(sp) as usize;
    let mut beacons = vec![false; n];
    for (i, sched) in schedules.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let width = sched.beacon_duration_us().div_ceil(sp) as usize;
        for &t in sched.times_us() {
            let start = t + sample_access_delay(model, &mut rng);
            let b = (start / sp) as usize;
            if b >= n {
                continue;
            }
            if vacancy_bins > 0 {
                background[b.saturating_sub(vacancy_bins)..b].fill(false);
            }
            beacons[b..(b + width).min(n)].fill(true);
        }
    }

    let samples: Vec<u8> = background
        .iter()
        .zip(&beacons)
        .map(|(&a, &b)| (a | b) as u8)
        .collect();
    let trace = RssiTrace::new(samples, sp, 0)?;
    match duty {
        None => Ok(trace),
        Some(d) => {
            let awake = (0..n).map(|i| d.is_awake(i as u64 * sp)).collect();
            trace.with_awake_mask(awake)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::packet_edge_filter;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn degenerate_fast_delay() {
        let m = ChannelModel {
            access_delay: AccessDelay::TwoPiece { p_fast: 1.0 },
            ..ChannelModel::default()
        };
        let mut r = rng(1);
        assert!((0..10_000).all(|_| sample_access_delay(&m, &mut r) < 256));
    }

    #[test]
    fn ninety_percent_fast() {
        let m = ChannelModel::default();
        let mut r = rng(2);
        let n = 100_000;
        let fast = (0..n)
            .filter(|_| sample_access_delay(&m, &mut r) <= 256)
            .count();
        let p = fast as f64 / n as f64;
        assert!((p - 0.9).abs() <= 0.01, "{p}");
    }

    #[test]
    fn bluetooth_backoff_bounded() {
        let m = ChannelModel::bluetooth_sender(0.0);
        let mut r = rng(3);
        let max = (0..100_000)
            .map(|_| sample_access_delay(&m, &mut r))
            .max()
            .unwrap();
        assert!(max <= TAIL_CAP_US + BLUETOOTH_BACKOFF_US);
        assert!(max > BLUETOOTH_BACKOFF_US / 2);
    }

    #[test]
    fn no_background_at_zero_occupancy() {
        let m = ChannelModel::default();
        assert!(gen_background(&m, 1_000_000, &mut rng(4))
            .unwrap()
            .is_empty());
        assert_eq!(calibrate_noise_rate(&m).unwrap(), 0.0);
    }

    #[test]
    fn background_intervals_sorted_and_disjoint() {
        let m = ChannelModel::with_occupancy(0.6);
        let iv = gen_background(&m, 10_000_000, &mut rng(5)).unwrap();
        assert!(iv.windows(2).all(|w| w[0].1 <= w[1].0));
        assert!(iv.iter().all(|&(s, e)| s < e && s % 128 == 0));
    }

    #[test]
    fn calibration_rejects_unreachable() {
        let m = ChannelModel::with_occupancy(0.99);
        assert!(matches!(
            calibrate_noise_rate(&m),
            Err(Error::OccupancyUnreachable(_))
        ));
        assert!(ChannelModel::with_occupancy(-0.1).validate().is_err());
    }

    #[test]
    fn calibration_is_deterministic() {
        let m = ChannelModel::with_occupancy(0.3);
        assert_eq!(
            calibrate_noise_rate(&m).unwrap(),
            calibrate_noise_rate(&m).unwrap()
        );
    }

    #[test]
    fn single_beacon_rasterizes_two_bins() {
        let s = BeaconSchedule::new(vec![0], 256).unwrap();
        let t = render(&[s], &ChannelModel::noiseless(), 128 * 10, 0, None).unwrap();
        assert_eq!(t.samples(), &[1, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn schedule_beyond_duration_rejected() {
        let s = BeaconSchedule::new(vec![5_000], 256).unwrap();
        assert!(matches!(
            render(&[s], &ChannelModel::noiseless(), 1_000, 0, None),
            Err(Error::ScheduleExceedsDuration { .. })
        ));
    }

    #[test]
    fn disjoint_schedules_superpose() {
        let m = ChannelModel::noiseless();
        let a = BeaconSchedule::new(vec![0, 2_560], 256).unwrap();
        let b = BeaconSchedule::new(vec![1_280], 256).unwrap();
        let ta = render(std::slice::from_ref(&a), &m, 5_120, 0, None).unwrap();
        let tb = render(std::slice::from_ref(&b), &m, 5_120, 0, None).unwrap();
        let tab = render(&[a, b], &m, 5_120, 0, None).unwrap();
        let union: Vec<u8> = ta
            .samples()
            .iter()
            .zip(tb.samples())
            .map(|(x, y)| x | y)
            .collect();
        assert_eq!(tab.samples(), union.as_slice());
    }

    #[test]
    fn duty_cycle_masks_samples() {
        let m = ChannelModel::with_occupancy(0.5);
        let d = DutyCycleSchedule::new(1_280, 0.3, 0).unwrap();
        let t = render(&[], &m, 1_280_000, 9, Some(&d)).unwrap();
        let awake = t.awake().unwrap();
        for (i, (&s, &a)) in t.samples().iter().zip(awake).enumerate() {
            assert_eq!(a, (i % 10) < 3);
            if !a {
                assert_eq!(s, 0);
            }
        }
        assert!(t.busy_count() > 0);
    }

    #[test]
    fn duty_cycle_validation() {
        assert!(DutyCycleSchedule::new(0, 0.5, 0).is_err());
        assert!(DutyCycleSchedule::new(100, 0.0, 0).is_err());
        assert!(DutyCycleSchedule::new(100, 1.5, 0).is_err());
        assert!(DutyCycleSchedule::new(100, 0.001, 0).is_err());
    }

    #[test]
    fn vacancy_precedes_every_beacon() {
        let m = ChannelModel {
            access_delay: AccessDelay::None,
            ..ChannelModel::with_occupancy(0.8)
        };
        let times: Vec<u64> = (1..200).map(|k| k * 12_800).collect();
        let s = BeaconSchedule::new(times.clone(), 256).unwrap();
        let t = render(&[s], &m, 12_800 * 201, 11, None).unwrap();
        let f = packet_edge_filter(&t);
        for &tt in &times {
            let b = (tt / 128) as usize;
            assert_eq!(&t.samples()[b - 2..b], &[0, 0]);
            assert_eq!(&f.samples()[b..b + 2], &[1, 1]);
        }
    }
}
