"""Time the numba kernels against the pure-numpy fallback.

    python benchmarks/bench_backends.py [--repeat 5] [--quick]

Each case runs once per backend to warm up (numba compiles on first call),
then reports the best of ``--repeat`` timings. Results are also checked for
agreement so a speedup never hides a wrong answer.
"""

import argparse
import timeit

import numpy as np

from modelsets import kernels
from modelsets._backend import HAVE_NUMBA, set_backend
from modelsets.cutproject import Scheme, Window, generate
from modelsets.lattice import Region
from modelsets.numfield import NumberField, OrderBasis, minkowski_lattice


def ab_scheme():
    lat = minkowski_lattice(OrderBasis.power_basis(NumberField((-2, 0, 1))), 2)
    return Scheme(2, 2), lat, Window.box([0, 0], [1, 1])


def cases(scale):
    rng = np.random.default_rng(0)
    B = np.eye(10) + 0.3 * rng.normal(size=(10, 10))
    R = np.linalg.qr(np.eye(6) + 0.2 * rng.normal(size=(6, 6)))[1]
    R *= np.sign(np.diag(R))[:, None]
    z = rng.random(6)
    ref = rng.random((int(20000 * scale), 2)) * 100
    query = rng.random((int(20000 * scale), 2)) * 100
    koch_like = rng.random((int(400000 * scale), 2))
    scheme, lat, window = ab_scheme()
    region = Region.ball([0, 0], 60 * np.sqrt(scale))
    return {
        "lll 10x10": (lambda: kernels.lll(B)[0], np.allclose),
        "fincke-pohst n=6": (lambda: kernels.fincke_pohst(R, z, 3.0), lambda a, b: a.shape == b.shape),
        f"nn {len(query)} pts": (lambda: kernels.nn_distances(query, ref), np.allclose),
        f"count_cells {len(koch_like)} pts": (lambda: kernels.count_cells(koch_like, 512), lambda a, b: a == b),
        "generate AB ball": (lambda: len(generate(scheme, lat, window, region)), lambda a, b: a == b),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args()
    backends = ["numpy", "numba"] if HAVE_NUMBA else ["numpy"]
    print(f"{'case':28s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, (fn, agree) in cases(0.25 if args.quick else 1.0).items():
        times, results = [], []
        for b in backends:
            set_backend(b)
            results.append(fn())
            times.append(min(timeit.repeat(fn, number=1, repeat=args.repeat)))
        line = f"{name:28s}" + "".join(f"{t * 1e3:10.2f}ms" for t in times)
        if len(times) == 2:
            line += f"{times[0] / times[1]:11.1f}x"
            if not agree(results[0], results[1]):
                line += "  MISMATCH"
        print(line)


if __name__ == "__main__":
    main()
