"""Bundled example configurations and random system generators.

These are the reference problems exercised by the test suite and shipped as
JSON files under configs/: a mirror-coupled pair whose coupling graph has
cycles yet whose spectrum is empty (finite-time stabilizable, but fragile:
perturbing a speed or a damping creates eigenvalues), a one-way cascade with
nilpotency index 2, a fully decoupled pair, and a time-modulated gain.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import BoundaryMatrix, HyperbolicSystem, make_system

PI_LITERAL = "3.141592653589793"


def mirror_pair(speed_eps: float = 0.0, damping_eps: float = 0.0) -> dict:
    """Two counter-propagating components, each reflecting the difference
    of the incoming values. Not robustly stabilizable (self-loops), yet the
    unperturbed problem stabilizes in finite time; any speed or damping
    perturbation breaks that.
    """
    return {
        "version": 1,
        "n": 2,
        "m": 1,
        "a": [repr(1.0 + speed_eps) if speed_eps else "1", "-1"],
        "b": [repr(damping_eps) if damping_eps else "0", "0"],
        "P": [[1.0, -1.0], [1.0, -1.0]],
        "phi": [f"sin({PI_LITERAL}*x)", f"sin({PI_LITERAL}*x)"],
        "horizon": 12.0,
    }


def cascade_pair() -> dict:
    """One-way coupling with nilpotency index 2 and T* = 1 + 1/2."""
    return {
        "version": 1,
        "n": 2,
        "m": 1,
        "a": ["1", "-2"],
        "b": ["0", "0"],
        "P": [[0.0, 1.0], [0.0, 0.0]],
        "phi": [f"sin({PI_LITERAL}*x)", f"sin({PI_LITERAL}*x)"],
        "horizon": 6.0,
    }


def decoupled_pair() -> dict:
    """No coupling at all: every component drains through its outflow."""
    return {
        "version": 1,
        "n": 2,
        "m": 1,
        "a": ["1", "-2"],
        "b": ["0", "0"],
        "P": [[0.0, 0.0], [0.0, 0.0]],
        "phi": [f"sin({PI_LITERAL}*x)", f"sin({PI_LITERAL}*x)"],
        "horizon": 6.0,
    }


def modulated_gain_pair(self_loop: bool = False) -> dict:
    """Time-modulated boundary gain on a one-way coupling.

    With the off-diagonal mask the pattern is nilpotent regardless of the
    gain; flipping the mask to a self-loop destroys robust stabilizability.
    """
    mask = [[1, 0], [0, 0]] if self_loop else [[0, 1], [0, 0]]
    return {
        "version": 1,
        "n": 2,
        "m": 1,
        "a": ["1", "-1"],
        "b": ["0", "0"],
        "P": {"mask": mask, "q": [["0", "2+sin(t)"], ["0", "0"]]},
        "phi": [f"sin({PI_LITERAL}*x)", f"sin({PI_LITERAL}*x)"],
        "horizon": 6.0,
    }


FIXTURES = {
    "mirror_pair": mirror_pair,
    "mirror_pair_fast": lambda: mirror_pair(speed_eps=0.1),
    "mirror_pair_damped": lambda: mirror_pair(damping_eps=0.05),
    "cascade_pair": cascade_pair,
    "decoupled_pair": decoupled_pair,
    "modulated_gain_pair": modulated_gain_pair,
    "modulated_gain_self_loop": lambda: modulated_gain_pair(self_loop=True),
}


def random_robust_system(
    rng: np.random.Generator, n_max: int = 4, horizon: float = 12.0
) -> tuple[HyperbolicSystem, tuple[str, ...]]:
    """A random system with nilpotent coupling and smooth nonautonomous
    coefficients, plus random smooth initial profiles.

    Speeds keep magnitude inside [0.5, 1.8]; coupling entries are nonzero
    reals in [-2, 2] placed on a random acyclic pattern with at least one
    arrow.
    """
    n = int(rng.integers(2, n_max + 1))
    m = int(rng.integers(0, n + 1))

    while True:
        perm = rng.permutation(n)
        P = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                if rng.random() < 0.5:
                    P[perm[i], perm[j]] = rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 2.0)
        if P.any():
            break

    def fmt(v: float) -> str:
        return repr(float(v))

    a_exprs = []
    b_exprs = []
    phi_exprs = []
    for j in range(n):
        sign = "" if j < m else "-"
        w1, w2 = rng.uniform(0.5, 2.0, 2)
        p1, p2 = rng.uniform(0.0, 6.28, 2)
        a_exprs.append(
            f"{sign}(1.15 + 0.35*sin({fmt(w1)}*x + {fmt(p1)}) + 0.3*cos({fmt(w2)}*t + {fmt(p2)}))"
        )
        g1, g2 = rng.uniform(0.3, 2.0, 2)
        b_exprs.append(f"{fmt(rng.uniform(-0.4, 0.4))}*sin({fmt(g1)}*x + {fmt(g2)}*t)")
        k = int(rng.integers(1, 4))
        phi_exprs.append(f"{fmt(rng.uniform(0.3, 1.5))}*sin({k}*{PI_LITERAL}*x)")

    system = make_system(
        a_exprs, m=m, b=b_exprs, boundary=BoundaryMatrix.constant(P), horizon=horizon
    )
    return system, tuple(phi_exprs)


def write_fixture_configs(directory: str | Path) -> list[Path]:
    """Write every bundled configuration as a JSON file; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, builder in FIXTURES.items():
        path = directory / f"{name}.json"
        path.write_text(json.dumps(builder(), indent=2, sort_keys=True) + "\n")
        paths.append(path)
    return paths
