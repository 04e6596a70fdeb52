"""Stabilization-time bounds for robustly stabilizable systems.

With k0 the nilpotency index of the coupling pattern and a0 the uniform
speed floor, every solution vanishes by k0/a0. For t-independent speeds the
sharper candidate T* maximizes the summed travel times over all coupling
chains of k0 components; it equals the optimal time for k0 <= 3 and is an
upper bound otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .graph_criteria import SignPattern, nilpotency_index, robust_fts_report, sign_pattern
from .model import HyperbolicSystem, speeds_autonomous, validate_system
from .spectral import compute_travel_times


class StabTimeError(Exception):
    pass


class NotNilpotentError(StabTimeError):
    """The coupling pattern has a cycle; the problem is not robust FTS."""


@dataclass(frozen=True)
class PathSetI:
    """All coupling chains of k0 components (walks of k0-1 arrows)."""

    k0: int
    tuples: tuple[tuple[int, ...], ...]  # 1-based component indices


def path_set(pattern: SignPattern) -> PathSetI:
    """Enumerate the maximal-length coupling chains by depth-first search.

    For k0 = 1 (no coupling at all) the chains degenerate to the n
    singletons.
    """
    k0 = nilpotency_index(pattern)
    if k0 is None:
        raise NotNilpotentError("coupling pattern is not nilpotent")
    n = pattern.n
    if k0 == 1:
        return PathSetI(1, tuple((j + 1,) for j in range(n)))

    chains: list[tuple[int, ...]] = []

    def extend(walk: list[int]):
        if len(walk) == k0:
            chains.append(tuple(v + 1 for v in walk))
            return
        for k in range(n):
            if pattern.w[walk[-1]][k]:
                extend(walk + [k])

    for start in range(n):
        extend([start])
    if not chains:
        raise StabTimeError("internal: no walk of maximal length found")
    return PathSetI(k0, tuple(sorted(chains)))


@dataclass(frozen=True)
class TimeReport:
    k0: int
    a0: float
    upper_bound: float
    t_star: Optional[float]
    t_star_exact: Optional[bool]

    def as_dict(self) -> dict:
        return {
            "k0": self.k0,
            "a0": self.a0,
            "upper_bound": self.upper_bound,
            "T_star": self.t_star,
            "T_star_exact": self.t_star_exact,
        }


def time_report(sys: HyperbolicSystem) -> TimeReport:
    """Stabilization-time bounds; requires a robustly stabilizable pattern.

    a0 is the grid infimum of |a_j| from system validation. T* is computed
    only when the speeds are t-independent, and is flagged exact only for
    k0 <= 3.
    """
    criteria = robust_fts_report(sys.boundary)
    if not criteria.robust_fts:
        raise NotNilpotentError("not robust FTS: coupling graph has a cycle")

    report = validate_system(sys)
    if not report.ok:
        raise StabTimeError("; ".join(report.messages) or "system validation failed")
    a0 = report.a_floor
    pattern = sign_pattern(sys.boundary)
    paths = path_set(pattern)
    k0 = paths.k0
    upper = k0 / a0

    t_star: Optional[float] = None
    exact: Optional[bool] = None
    if speeds_autonomous(sys):
        tau = compute_travel_times(sys).tau
        t_star = max(sum(tau[i - 1] for i in chain) for chain in paths.tuples)
        exact = k0 in (1, 2, 3)
    return TimeReport(k0, a0, upper, t_star, exact)
