"""Compare the compiled and pure-Python projector kernels.

Usage::

    python benchmarks/bench_kernels.py --n 64 --angles 90 --repeats 3

Times forward projection and back-projection with each available
backend, checks they agree, then times the FBP and 32-iteration SIRT
benchmark pipeline with the default backend.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from ghosttomo import ghost3d, projector
from ghosttomo.projector import AngleSet, back_project, fbp, project_all
from ghosttomo.volume import SpherePhantomSpec, build_phantom


def best_of(fn, repeats):
    times = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def available_backends():
    names = ["python"]
    try:
        projector.get_kernels("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--angles", type=int, default=90)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)

    vol = build_phantom(SpherePhantomSpec(n=args.n))
    angles = AngleSet.uniform(args.angles).angles
    print(f"volume {args.n}^3, {args.angles} angles, default backend: {projector.BACKEND}")
    print(f"{'backend':>8} {'project s':>10} {'backproject s':>14}")
    results = {}
    for name in available_backends():
        # the python backend builds and caches its sparse matrix on first use
        t_first, _ = best_of(lambda: project_all(vol, angles, backend=name), 1)
        t_p, projs = best_of(lambda: project_all(vol, angles, backend=name), args.repeats)
        t_b, bp = best_of(lambda: back_project(projs, angles, backend=name), args.repeats)
        results[name] = (projs, bp)
        print(f"{name:>8} {t_p:10.4f} {t_b:14.4f}   (first call {t_first:.3f} s)")
    if len(results) == 2:
        (p1, b1), (p2, b2) = results.values()
        print(f"max |difference|: projection {np.abs(p1 - p2).max():.2e}, "
              f"back-projection {np.abs(b1 - b2).max():.2e}")

    projs = project_all(vol, AngleSet.uniform(args.angles))
    t0 = time.perf_counter()
    fbp(projs, angles)
    t_fbp = time.perf_counter() - t0
    t0 = time.perf_counter()
    ghost3d.sirt(projs, angles, 32)
    t_sirt = time.perf_counter() - t0
    print(f"FBP {t_fbp:.3f} s, SIRT(32) {t_sirt:.3f} s")


if __name__ == "__main__":
    main()
