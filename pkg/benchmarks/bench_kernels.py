"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times bilinear sampling at the planner's batch size (55 patches of 4000
cells) and rock stamping for a dense field, and checks that both backends
agree before reporting.
"""
import argparse
import timeit

import numpy as np

from terrainplan import kernels
from terrainplan.terrain import TerrainGenSpec, extract_patches, generate_rock_field, grid_dims


def _sampling_case(rng):
    emap = generate_rock_field(TerrainGenSpec(seed=3))
    x0, x1, y0, y1 = emap.extent
    n = 55
    xs, ys, yaws = rng.uniform(x0, x1, n), rng.uniform(y0, y1, n), rng.uniform(-np.pi, np.pi, n)
    # same query points extract_patches builds, so the timing matches the planner's inner loop
    from terrainplan.terrain import _DEFAULT_OFFSETS
    fwd, left = _DEFAULT_OFFSETS
    c, s = np.cos(yaws)[:, None], np.sin(yaws)[:, None]
    px = xs[:, None] + c * fwd.ravel() - s * left.ravel()
    py = ys[:, None] + s * fwd.ravel() + c * left.ravel()
    return emap, px, py


def _stamp_case(rng, count=200):
    cols, rows = grid_dims(3.1, 1.3, 0.008)
    cx, cy = rng.uniform(0, 3.1, count), rng.uniform(0, 1.3, count)
    radii, peaks = rng.uniform(0.05, 0.3, count), rng.uniform(0.1, 0.6, count)
    return (rows, cols), (cx, cy, radii, peaks)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    emap, px, py = _sampling_case(rng)
    shape, rocks = _stamp_case(rng)
    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy fallback is available")

    ref = None
    for b in backends:
        vals, _ = kernels.sample_bilinear(emap.heights, emap.origin_x, emap.origin_y, emap.resolution, px, py, backend=b)
        ref = vals if ref is None else ref
        assert np.allclose(vals, ref, rtol=0, atol=1e-12), f"{b} sampling disagrees"

    print(f"{'kernel':<28}{'backend':<10}{'ms/call':>10}")
    times = {}
    for b in backends:
        t = min(timeit.repeat(lambda: kernels.sample_bilinear(emap.heights, emap.origin_x, emap.origin_y,
                                                              emap.resolution, px, py, backend=b),
                              number=1, repeat=args.repeat))
        times[("sample", b)] = t
        print(f"{'bilinear 55x4000 points':<28}{b:<10}{1e3 * t:>10.3f}")
    for b in backends:
        def stamp():
            h = np.zeros(shape)
            kernels.stamp_rocks(h, *rocks, 0.0, 0.0, 0.008, backend=b)
        t = min(timeit.repeat(stamp, number=1, repeat=args.repeat))
        times[("stamp", b)] = t
        print(f"{'stamp 200 rocks 163x388':<28}{b:<10}{1e3 * t:>10.3f}")
    if "cython" in backends:
        for k in ("sample", "stamp"):
            print(f"speedup {k}: {times[(k, 'python')] / times[(k, 'cython')]:.1f}x")
    t = min(timeit.repeat(lambda: extract_patches(emap, px[:, 0], py[:, 0], np.zeros(55)), number=1, repeat=args.repeat))
    print(f"extract_patches(55) with default backend ({kernels.BACKEND}): {1e3 * t:.3f} ms")


if __name__ == "__main__":
    main()
