use std::collections::BTreeMap;

use proptest::prelude::*;

use beaconfold_core::channel::{render, ChannelModel, DutyCycleSchedule};
use beaconfold_core::harness::{throughput_report, ThroughputMode};
use beaconfold_core::modem::{
    demodulate_afreebee, demodulate_freebee, fold, modulate, modulate_afreebee, modulate_freebee,
    BeaconSchedule, IntervalConfig, Symbol, Variant,
};
use beaconfold_core::multiplex::{
    demux, gcd, lcm, verify_orthogonality, DemuxMode, IntervalAssignment, Receiver, SenderId,
};
use beaconfold_core::signal::{packet_edge_filter, quantize, RssiTrace};
use beaconfold_core::QuantizerConfig;

fn bits(max_len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..=1, 1..max_len)
}

fn trace(v: &[u8]) -> RssiTrace {
    RssiTrace::new(v.to_vec(), 128, 0).unwrap()
}

/// Filter oracle: run lengths in, `min(run, 2)` leading ones out.
fn filter_oracle(v: &[u8]) -> Vec<u8> {
    let mut out = vec![0; v.len()];
    let mut i = 0;
    while i < v.len() {
        if v[i] == 1 {
            let start = i;
            while i < v.len() && v[i] == 1 {
                i += 1;
            }
            for o in out.iter_mut().take((start + 2).min(i)).skip(start) {
                *o = 1;
            }
        } else {
            i += 1;
        }
    }
    out
}

fn fold_oracle(v: &[u8], p: usize) -> Vec<u32> {
    let rows = v.len() / p;
    (0..p)
        .map(|c| (0..rows).map(|r| v[r * p + c] as u32).sum())
        .collect()
}

/// Noiseless one-bin beacons at the given times on a unit grid.
fn unit_trace(times: &[u64], len: usize) -> RssiTrace {
    let ones: Vec<usize> = times
        .iter()
        .map(|&t| t as usize)
        .filter(|&t| t < len)
        .collect();
    RssiTrace::from_ones(len, &ones, 1).unwrap()
}

proptest! {
    #[test]
    fn quantize_is_monotone_in_threshold(
        power in prop::collection::vec(-100.0f64..-40.0, 1..200),
        hi in -90.0f64..-50.0,
        gap in 0.0f64..20.0,
    ) {
        let strict = quantize(&power, &QuantizerConfig { threshold_dbm: hi }).unwrap();
        let loose = quantize(&power, &QuantizerConfig { threshold_dbm: hi - gap }).unwrap();
        for (a, b) in strict.samples().iter().zip(loose.samples()) {
            prop_assert!(a <= b);
        }
        for (p, s) in power.iter().zip(strict.samples()) {
            prop_assert_eq!(*s == 1, *p >= hi);
        }
    }

    #[test]
    fn edge_filter_matches_run_oracle(v in bits(300)) {
        let t = trace(&v);
        let f = packet_edge_filter(&t);
        let expected = filter_oracle(&v);
        prop_assert_eq!(f.samples(), expected.as_slice());
        let twice = packet_edge_filter(&f);
        prop_assert_eq!(twice.samples(), f.samples());
        for (a, b) in f.samples().iter().zip(t.samples()) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn fold_matches_oracle_and_is_additive(
        (p, a, b) in (2usize..20).prop_flat_map(|p| (p..=200).prop_flat_map(move |n| {
            let v = prop::collection::vec(0u8..2, n);
            (Just(p), v.clone(), v)
        }))
    ) {
        let (a, b) = (&a[..], &b[..]);
        let fa = fold(&trace(a), p).unwrap();
        prop_assert_eq!(&fa.sums, &fold_oracle(a, p));
        // disjoint parts of a trace fold to the sum of their folds
        let only_a: Vec<u8> = a.iter().zip(b).map(|(&x, &y)| x & !y & 1).collect();
        let only_b: Vec<u8> = a.iter().zip(b).map(|(&x, &y)| y & !x & 1).collect();
        let either: Vec<u8> = a.iter().zip(b).map(|(&x, &y)| (x ^ y) & 1).collect();
        let (f1, f2, f12) = (
            fold(&trace(&only_a), p).unwrap(),
            fold(&trace(&only_b), p).unwrap(),
            fold(&trace(&either), p).unwrap(),
        );
        for c in 0..p {
            prop_assert_eq!(f12.sums[c], f1.sums[c] + f2.sums[c]);
        }
    }

    #[test]
    fn freebee_noiseless_round_trip(
        x in 2u32..=200,
        shift_seed in any::<u64>(),
        reference_bins in 0u64..2000,
        rho in 1u32..4,
    ) {
        let cfg = IntervalConfig::wifi(x).unwrap();
        let (lo, hi) = cfg.shift_range(Variant::FreeBee);
        let shift = lo + (shift_seed % (hi - lo + 1) as u64) as i64;
        let sym = Symbol::freebee(shift, &cfg).unwrap();
        let reference_us = reference_bins * 128;
        let sched = modulate_freebee(reference_us, &cfg, sym, rho).unwrap();
        let duration = sched.last_time_us().unwrap() + cfg.interval_us();
        let t = render(&[sched], &ChannelModel::noiseless(), duration, 0, None).unwrap();
        let reference_column = reference_bins as usize % cfg.lambda();
        let d = demodulate_freebee(&t, &cfg, reference_column, None).unwrap();
        prop_assert_eq!(d.symbol, sym);
    }

    #[test]
    fn freebee_decoding_is_shift_equivariant(
        x in 5u32..60,
        shift_seed in any::<u64>(),
        pad in 0usize..500,
    ) {
        // delaying the whole trace by `pad` samples moves the reference with it
        let cfg = IntervalConfig::wifi(x).unwrap();
        let lambda = cfg.lambda();
        let (lo, hi) = cfg.shift_range(Variant::FreeBee);
        let shift = lo + (shift_seed % (hi - lo + 1) as u64) as i64;
        let sym = Symbol::freebee(shift, &cfg).unwrap();
        let sched = modulate_freebee(0, &cfg, sym, 3).unwrap();
        let t = render(&[sched], &ChannelModel::noiseless(), 5 * cfg.interval_us(), 0, None).unwrap();
        let mut padded = vec![0u8; pad];
        padded.extend_from_slice(t.samples());
        let p = trace(&padded);
        let a = demodulate_freebee(&t, &cfg, 0, None).unwrap();
        let b = demodulate_freebee(&p, &cfg, pad % lambda, None).unwrap();
        prop_assert_eq!(a.symbol, b.symbol);
        // a two-bin beacon ties two adjacent columns; rotation may swap which one wins
        let moved = (a.peak_columns[0] + pad) % lambda;
        prop_assert!(
            b.peak_columns[0] == moved
                || (b.peak_columns[0] + 1) % lambda == moved
                || (moved + 1) % lambda == b.peak_columns[0]
        );
    }

    #[test]
    fn freebee_schedule_keeps_mean_interval(
        x in 2u32..300,
        shift_seed in any::<u64>(),
        reference_us in 0u64..1_000_000,
        rho in 2u32..20,
    ) {
        let cfg = IntervalConfig::wifi(x).unwrap();
        let (lo, hi) = cfg.shift_range(Variant::FreeBee);
        let shift = lo + (shift_seed % (hi - lo + 1) as u64) as i64;
        let s = modulate_freebee(reference_us, &cfg, Symbol::freebee(shift, &cfg).unwrap(), rho).unwrap();
        prop_assert_eq!(s.len(), rho as usize);
        prop_assert_eq!(s.mean_gap_us().unwrap(), cfg.interval_us() as f64);
    }

    #[test]
    fn afreebee_noiseless_round_trip(
        x in 4u32..=160,
        shift_seed in any::<u64>(),
        reference_us in 0u64..200_000,
        rho in 1u32..4,
    ) {
        let cfg = IntervalConfig::wifi(x).unwrap();
        let (lo, hi) = cfg.shift_range(Variant::AFreeBee);
        let shift = lo + (shift_seed % (hi - lo + 1) as u64) as i64;
        let sym = Symbol::afreebee(shift, &cfg).unwrap();
        let sched = modulate_afreebee(reference_us, &cfg, sym, rho).unwrap();
        let duration = sched.last_time_us().unwrap() + 2 * cfg.interval_us();
        let t = render(&[sched], &ChannelModel::noiseless(), duration, 0, None).unwrap();
        let d = demodulate_afreebee(&packet_edge_filter(&t), &cfg, None).unwrap();
        prop_assert_eq!(d.symbol, sym);
    }

    #[test]
    fn coprime_pairs_cross_fold_at_most_one(
        (x1, x2) in (2u32..40).prop_flat_map(|a| {
            let partners: Vec<u32> = (2..40).filter(|&b| b != a && gcd(a as u64, b as u64) == 1).collect();
            (Just(a), prop::sample::select(partners))
        }),
        phase in 0usize..40,
        short in 1usize..200,
    ) {
        let unit = IntervalConfig::new(1, 2, 1).unwrap();
        let len = (x1 as usize * x2 as usize).saturating_sub(short).max(x1.max(x2) as usize);
        prop_assert!(verify_orthogonality(&[x1, x2], len, &unit) == (len < lcm(x1 as u64, x2 as u64) as usize));
        let phase = phase % x2 as usize;
        let times: Vec<u64> = (phase..len).step_by(x2 as usize).map(|t| t as u64).collect();
        let f = fold(&unit_trace(&times, len), x1 as usize).unwrap();
        prop_assert!(f.sums.iter().all(|&s| s <= 1));
    }

    #[test]
    fn plain_demux_equals_independent_decoding(
        phases in prop::collection::vec(0usize..1000, 3),
        order in Just([0usize, 1, 2]).prop_shuffle(),
    ) {
        let xs = [7u32, 11, 13];
        let ids = [SenderId(9), SenderId(2), SenderId(5)];
        let len = 7 * 11 * 3;
        let mut ones = Vec::new();
        for (k, &x) in xs.iter().enumerate() {
            let ph = phases[k] % x as usize;
            ones.extend((ph..len).step_by(x as usize));
        }
        ones.sort();
        ones.dedup();
        let t = RssiTrace::from_ones(len, &ones, 1).unwrap();
        let pairs: Vec<(SenderId, IntervalConfig)> = order
            .iter()
            .map(|&k| (ids[k], IntervalConfig::new(1, xs[k], 1).unwrap()))
            .collect();
        let a = IntervalAssignment::from_pairs(pairs.clone()).unwrap();
        let references: BTreeMap<SenderId, usize> = ids.iter().map(|&id| (id, 0)).collect();
        let rx = Receiver::FreeBee { references };
        let out = demux(&t, &a, &rx, DemuxMode::Plain);
        // implicit addressing: results are keyed by exactly the assigned senders
        prop_assert_eq!(out.keys().copied().collect::<Vec<_>>(), a.entries().keys().copied().collect::<Vec<_>>());
        for (id, cfg) in pairs {
            let alone = demodulate_freebee(&t, &cfg, 0, None).unwrap();
            prop_assert_eq!(out[&id].as_ref().unwrap(), &alone);
        }
        let c1 = demux(&t, &a, &rx, DemuxMode::Cancelling);
        let c2 = demux(&t, &a, &rx, DemuxMode::Cancelling);
        prop_assert_eq!(format!("{c1:?}"), format!("{c2:?}"));
    }

    #[test]
    fn aggregated_throughput_is_the_sum(
        primes in prop::sample::subsequence(beaconfold_core::multiplex::primes_in(2, 300), 1..8),
        rho in 1u32..10,
    ) {
        let a = IntervalAssignment::from_pairs(
            primes.iter().enumerate().map(|(i, &x)| (SenderId(i as u32), IntervalConfig::wifi(x).unwrap())),
        )
        .unwrap();
        for v in [Variant::FreeBee, Variant::AFreeBee] {
            let rows = throughput_report(&a, rho, v, ThroughputMode::Aggregated).unwrap();
            let (total, senders) = rows.split_last().unwrap();
            let sum: f64 = senders.iter().map(|r| r.rate_exact_bps).sum();
            prop_assert!((total.rate_exact_bps - sum).abs() <= 1e-9 * sum.max(1.0));
            prop_assert_eq!(senders.len(), primes.len());
        }
    }

    #[test]
    fn render_is_replayable(seed in any::<u64>(), b in 0.0f64..0.6) {
        let m = ChannelModel::with_occupancy(b);
        let cfg = IntervalConfig::wifi(31).unwrap();
        let s = modulate(1000, &cfg, Symbol::freebee(3, &cfg).unwrap(), 3).unwrap();
        let a = render(std::slice::from_ref(&s), &m, 4 * cfg.interval_us(), seed, None).unwrap();
        let c = render(&[s], &m, 4 * cfg.interval_us(), seed, None).unwrap();
        prop_assert_eq!(a, c);
    }

    #[test]
    fn adding_a_schedule_only_clears_its_vacancy_guard(
        seed in any::<u64>(),
        b in 0.0f64..0.6,
        t1 in prop::collection::btree_set(0u64..400_000, 1..20),
        t2 in prop::collection::btree_set(0u64..400_000, 1..20),
    ) {
        let m = ChannelModel::with_occupancy(b);
        let s1 = BeaconSchedule::new(t1.into_iter().collect(), 256).unwrap();
        let s2 = BeaconSchedule::new(t2.into_iter().collect(), 256).unwrap();
        let one = render(std::slice::from_ref(&s1), &m, 500_000, seed, None).unwrap();
        let both = render(&[s1, s2.clone()], &m, 500_000, seed, None).unwrap();
        // the second sender draws its own delays; mark where its beacons may
        // start (latest possible start is bounded by the delay cap)
        let sp = m.sample_period_us as usize;
        let mut guard = vec![false; one.len()];
        for &t in s2.times_us() {
            let first = t as usize / sp;
            let last = (t as usize + 256 + 5_000) / sp;
            for g in guard.iter_mut().take(last.min(one.len())).skip(first.saturating_sub(2)) {
                *g = true;
            }
        }
        for (i, (&a, &c)) in one.samples().iter().zip(both.samples()).enumerate() {
            prop_assert!(a <= c || guard[i], "sample {i} cleared outside the guard");
        }
        if b == 0.0 {
            prop_assert!(one.samples().iter().zip(both.samples()).all(|(a, c)| a <= c));
        }
    }

    #[test]
    fn duty_cycle_keeps_samples_inside_active_windows(
        seed in any::<u64>(),
        fraction in 0.05f64..1.0,
        phase in 0u64..10_000,
    ) {
        let d = DutyCycleSchedule::new(10_000, fraction, phase).unwrap();
        let m = ChannelModel::with_occupancy(0.4);
        let t = render(&[], &m, 200_000, seed, Some(&d)).unwrap();
        let awake = t.awake().unwrap();
        for (i, (&s, &a)) in t.samples().iter().zip(awake).enumerate() {
            prop_assert_eq!(a, d.is_awake(i as u64 * 128));
            prop_assert!(s == 0 || a);
        }
    }
}

#[test]
fn afreebee_identity_exhaustive_small_lambda() {
    // unit grid: one sample per shift unit, single-sample beacons, two pairs
    for x in 4..=64u32 {
        let cfg = IntervalConfig::new(1, x, 1).unwrap();
        for sym in cfg.symbols(Variant::AFreeBee) {
            let sched = modulate_afreebee(0, &cfg, sym, 2).unwrap();
            let t = unit_trace(sched.times_us(), 4 * x as usize);
            let d = demodulate_afreebee(&t, &cfg, None).unwrap();
            assert_eq!(d.symbol, sym, "x={x}");
            let arc = d.peak_columns[1] - d.peak_columns[0];
            assert_eq!(
                arc.min(2 * x as usize - arc),
                x as usize - sym.shift() as usize
            );
        }
    }
}
