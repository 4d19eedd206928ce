"""Compare the compiled and NumPy metric kernels on saliency-map-sized inputs.

    python benchmarks/bench_metrics.py --size 256 --frames 50
"""

import argparse
import time

import numpy as np

from salrefine import _kernels
from salrefine.metrics import mae, pr_curve, s_measure


def run(kernels, maps, masks):
    start = time.perf_counter()
    for s, g in zip(maps, masks):
        pr_curve(s, g, kernels=kernels)
        s_measure(s, g, kernels=kernels)
        mae(s, g, kernels=kernels)
    return (time.perf_counter() - start) / len(maps)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--frames", type=int, default=50)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    rng = np.random.default_rng(0)
    yy, xx = np.mgrid[0 : args.size, 0 : args.size]
    masks, maps = [], []
    for _ in range(args.frames):
        cx, cy = rng.integers(args.size // 4, 3 * args.size // 4, size=2)
        g = ((xx - cx) ** 2 + (yy - cy) ** 2 <= (args.size // 6) ** 2).astype(np.float64)
        masks.append(g)
        maps.append(np.clip(0.7 * g + 0.3 * rng.random(g.shape), 0, 1))

    results = {}
    for name in _kernels.available_backends():
        k = _kernels.load_backend(name)
        results[name] = min(run(k, maps, masks) for _ in range(args.repeats))
        print(f"backend={name} size={args.size} ms_per_frame={results[name] * 1e3:.3f}")
    if "cython" in results:
        print(f"speedup={results['python'] / results['cython']:.2f}x")
    else:
        print("compiled backend not built; only the NumPy fallback was timed")


if __name__ == "__main__":
    main()
