"""Time the compiled kernels against the numpy fallback on tracker-sized inputs.

    python benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Every kernel is run through both implementations on the same inputs, the
outputs are checked for equality, and the best-of-N wall time is reported.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from secvos import kernels


def workloads(rng: np.random.Generator) -> dict:
    frame = rng.integers(0, 256, size=(120, 160, 3), dtype=np.uint8)
    large = rng.integers(0, 256, size=(480, 854, 3), dtype=np.uint8)
    binmap = kernels.hs_bin_map(frame, 32, 32, impl=kernels.implementations()["python"])
    lut = np.full(32 * 32, -1, dtype=np.int32)
    lut[rng.choice(32 * 32, size=24, replace=False)] = np.arange(24, dtype=np.int32)
    mask = rng.random((480, 854)) < 0.01
    return {
        "hs_bin_map 160x120": (kernels.hs_bin_map, (frame, 32, 32)),
        "hs_bin_map 854x480": (kernels.hs_bin_map, (large, 32, 32)),
        "window_support_counts 16x16/4": (kernels.window_support_counts, (binmap, lut, 24, 16, 16, 4, 4)),
        "ssd_scores 16x16 r=16": (kernels.ssd_scores, (frame, frame[40:56, 60:76], 40, 60, 16)),
        "ssd_scores 48x48 r=16": (kernels.ssd_scores, (frame, frame[30:78, 50:98], 30, 50, 16)),
        "dilate_square 854x480 r=6": (kernels.dilate_square, (mask, 6)),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the table as JSON")
    args = ap.parse_args(argv)

    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled extension not built; only the fallback is timed", file=sys.stderr)
    rows = []
    for name, (fn, fargs) in workloads(np.random.default_rng(0)).items():
        outputs, times = {}, {}
        for label, impl in impls.items():
            outputs[label] = fn(*fargs, impl=impl)
            number = 3
            times[label] = min(timeit.repeat(lambda: fn(*fargs, impl=impl), number=number,
                                             repeat=args.repeat)) / number
        ref = outputs["python"]
        assert all(np.array_equal(ref, o) for o in outputs.values()), f"{name}: implementations disagree"
        row = {"kernel": name, **{f"{k}_ms": v * 1e3 for k, v in times.items()}}
        if "cython" in times:
            row["speedup"] = times["python"] / times["cython"]
        rows.append(row)

    print(f"{'kernel':32s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for r in rows:
        cy = f"{r['cython_ms']:10.3f}" if "cython_ms" in r else f"{'-':>10s}"
        sp = f"{r['speedup']:7.1f}x" if "speedup" in r else f"{'-':>8s}"
        print(f"{r['kernel']:32s} {r['python_ms']:10.3f} {cy} {sp}")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
