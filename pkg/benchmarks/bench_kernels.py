"""Time the compiled kernels against the numpy fallback on the same inputs.

    python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from jigsawbench import kernels
from jigsawbench.geometry import Pose2, transform
from jigsawbench.jigsaw import generate_set


def cases():
    js = generate_set("000111", 0.6)
    frag = transform(js.fragments[0].shape, Pose2(3.0, -2.0, 0.4))
    a = frag.convex_parts[0]
    b = transform(js.fragments[0].shape, Pose2(10.0, 5.0, 1.1)).convex_parts[0]
    rng = np.random.default_rng(0)
    jx = rng.normal(0, 1.0, (600, 600))
    jy = rng.normal(0, 1.0, (600, 600))
    verts = transform(js.fragments[1].shape, Pose2(0.0, 0.0, 0.3)).array
    mask = rng.random((600, 600)) < 0.55
    return {
        "convex_clip_area": lambda m: m.convex_clip_area(a, b),
        "coverage": lambda m: m.coverage(verts, -300.0, -300.0, 1.0, 600, 600),
        "coverage_jitter": lambda m: m.coverage(verts, -300.0, -300.0, 1.0, 600, 600, jx, jy, 6.0),
        "label_components": lambda m: m.label_components(mask),
    }


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = ["python"] + (["cython"] if kernels.compiled_available() else [])
    mods = {b: kernels.backend_module(b) for b in backends}
    print(f"{'kernel':<18}" + "".join(f"{b:>14}" for b in backends) + ("     speed-up" if len(backends) == 2 else ""))
    for name, fn in cases().items():
        times = {}
        for b, m in mods.items():
            number = 1 if name == "label_components" and b == "python" else 20
            t = min(timeit.repeat(lambda: fn(m), number=number, repeat=args.repeat)) / number
            times[b] = t
        row = f"{name:<18}" + "".join(f"{times[b] * 1e3:>11.3f} ms" for b in backends)
        if len(backends) == 2:
            row += f"{times['python'] / times['cython']:>12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
