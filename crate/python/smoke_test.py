"""Smoke test for the beaconfold Python extension.

Build and install first:
    pip install -e crates/python --no-build-isolation
then run:
    python python/smoke_test.py
"""

import math
import os
import tempfile

import beaconfold as bf


def round_trip(variant):
    cfg = bf.IntervalConfig.wifi(113)
    shift = 20
    reference_us = 3 * cfg.sample_period_us
    times = bf.modulate(reference_us, cfg, shift, 5, variant)
    rows = 6 if variant == "freebee" else 12
    trace = bf.render([times], rows * cfg.interval_us, occupancy=0.0, p_fast=None)
    trace = trace.edge_filter()
    if variant == "freebee":
        column = reference_us // cfg.sample_period_us
        got = bf.demodulate_freebee(trace, cfg, column)
    else:
        got = bf.demodulate_afreebee(trace, cfg)
    assert got.shift == shift, got
    return got


def main():
    cfg = bf.IntervalConfig.wifi(97)
    assert cfg.samples_per_interval == 776

    for variant in ("freebee", "afreebee"):
        print(variant, round_trip(variant))

    rate = bf.bit_rate(bf.IntervalConfig.wifi(100), 5)
    assert abs(rate - math.log2(100) / 0.512) < 1e-9
    assert bf.bit_rate(bf.IntervalConfig.wifi(100), 5, "afreebee") == rate / 2
    assert bf.overhead(cfg, 5)[:2] == (3880, 485)

    xs = bf.assign_intervals(20, 53, 149, cfg)
    assert len(xs) == 20 and xs[0] == 53 and xs[-1] == 149
    assert bf.verify_orthogonality([3, 5], 14, bf.IntervalConfig(1, 2, 1))

    noisy = bf.render([], 10_000_000, occupancy=0.3, seed=1)
    ratio = noisy.edge_filter().busy_fraction() / noisy.busy_fraction()
    print(f"busy {noisy.busy_fraction():.3f}, filtered/raw {ratio:.3f}")

    points = bf.ser_sweep(cfg, 1, 5, [0.1], trials=200, seed=3)
    sers = [p["ser"] for p in points]
    print("SER rho=1..5 at B=0.1:", " ".join(f"{s:.3f}" for s in sers))
    assert sers[-1] < sers[0]

    try:
        bf.demodulate_afreebee(bf.RssiTrace([0] * 4000), cfg)
    except bf.NoSignalError:
        pass
    else:
        raise AssertionError("silent trace decoded")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "t.trace")
        noisy.save(path)
        assert bf.RssiTrace.load(path).samples == noisy.samples

    print("smoke test passed")


if __name__ == "__main__":
    main()
