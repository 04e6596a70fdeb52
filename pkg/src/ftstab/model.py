"""System description and standing-assumption validation.

A system couples n transport equations

    d_t u_j + a_j(x,t) d_x u_j + b_j(x,t) u_j = 0   on (0,1) x (0,inf)

through reflection boundary conditions: the value entering each component is
a linear combination (matrix P, possibly time-modulated) of the values
leaving the others. Components 1..m travel rightward (a_j > 0), components
m+1..n leftward (a_j < 0); validation checks this sign split on a sampling
grid and estimates the uniform speed floor.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .expr import Expr, compile_numpy, parse_expr, to_source, variables

A_FLOOR_MIN = 1e-9


class ModelError(Exception):
    pass


class SystemValidationError(ModelError):
    """Raised when the standing sign/boundedness assumptions fail."""


@dataclass(frozen=True)
class GainEntry:
    """Time-modulated boundary entry p_jk = mask * gain(t), mask in {0,1}."""

    mask: int
    gain: Expr

    def __post_init__(self):
        if self.mask not in (0, 1):
            raise ModelError(f"mask must be 0 or 1, got {self.mask}")


BoundaryEntry = Union[float, GainEntry]


@dataclass(frozen=True)
class BoundaryMatrix:
    """Reflection coefficients; entries are constants or masked time gains.

    Structural zeros are exact: an entry couples two components iff it is a
    nonzero constant or has mask 1. No tolerance is ever applied here.
    """

    n: int
    entries: tuple[tuple[BoundaryEntry, ...], ...]

    def __post_init__(self):
        if len(self.entries) != self.n or any(len(r) != self.n for r in self.entries):
            raise ModelError(f"boundary matrix must be {self.n}x{self.n}")

    @classmethod
    def constant(cls, matrix: Sequence[Sequence[float]]) -> "BoundaryMatrix":
        rows = tuple(tuple(float(v) for v in row) for row in matrix)
        return cls(len(rows), rows)

    @classmethod
    def time_varying(
        cls, mask: Sequence[Sequence[int]], gains: Sequence[Sequence[Expr | str]]
    ) -> "BoundaryMatrix":
        n = len(mask)
        rows = []
        for j in range(n):
            row: list[BoundaryEntry] = []
            for k in range(n):
                g = gains[j][k]
                if isinstance(g, str):
                    g = parse_expr(g)
                row.append(GainEntry(int(mask[j][k]), g))
            rows.append(tuple(row))
        return cls(n, tuple(rows))

    def is_constant(self) -> bool:
        return all(isinstance(e, float) for row in self.entries for e in row)

    def is_autonomous(self) -> bool:
        for row in self.entries:
            for e in row:
                if isinstance(e, GainEntry) and e.mask and "t" in variables(e.gain):
                    return False
        return True

    def structural_nonzero(self, j: int, k: int) -> bool:
        e = self.entries[j][k]
        if isinstance(e, GainEntry):
            return e.mask == 1
        return e != 0.0

    def constant_array(self) -> np.ndarray:
        if not self.is_constant():
            raise ModelError("boundary matrix has time-dependent entries")
        return np.array(self.entries, dtype=float)

    def entry_values(self, j: int, k: int, t: np.ndarray) -> np.ndarray:
        """Values of p_jk at times t (vectorized)."""
        e = self.entries[j][k]
        t = np.asarray(t, dtype=float)
        if isinstance(e, GainEntry):
            if e.mask == 0:
                return np.zeros(t.shape)
            return compile_numpy(e.gain)(np.zeros(t.shape), t)
        return np.full(t.shape, e)

    def row_nonzeros(self, j: int) -> tuple[int, ...]:
        return tuple(k for k in range(self.n) if self.structural_nonzero(j, k))


@dataclass(frozen=True)
class HyperbolicSystem:
    """The transport system with reflection coupling.

    n: number of components (>= 2); m: how many have positive speed.
    a, b: per-component speed and damping expressions in (x, t).
    horizon: largest simulation time, also the t-extent of the validation grid.
    sample_density: points per axis of the validation grid.
    """

    n: int
    m: int
    a: tuple[Expr, ...]
    b: tuple[Expr, ...]
    boundary: BoundaryMatrix
    horizon: float = 10.0
    sample_density: int = 257

    def __post_init__(self):
        if self.n < 2:
            raise ModelError(f"need at least two components, got n={self.n}")
        if not 0 <= self.m <= self.n:
            raise ModelError(f"m must lie in [0, n], got m={self.m}")
        if len(self.a) != self.n or len(self.b) != self.n:
            raise ModelError("need one speed and one damping expression per component")
        if self.boundary.n != self.n:
            raise ModelError("boundary matrix size does not match n")
        if not self.horizon > 0:
            raise ModelError("horizon must be positive")

    def inflow_x(self, j: int) -> float:
        """Boundary abscissa where component j receives its reflected value."""
        return 0.0 if j < self.m else 1.0

    def outflow_x(self, j: int) -> float:
        """Boundary abscissa where component j feeds the reflection."""
        return 1.0 if j < self.m else 0.0


def make_system(
    a: Sequence[str | Expr],
    m: int,
    b: Sequence[str | Expr] | None = None,
    boundary: BoundaryMatrix | Sequence[Sequence[float]] | None = None,
    horizon: float = 10.0,
    sample_density: int = 257,
) -> HyperbolicSystem:
    """Convenience constructor accepting expression strings."""
    n = len(a)
    aa = tuple(parse_expr(e) if isinstance(e, str) else e for e in a)
    if b is None:
        b = ["0"] * n
    bb = tuple(parse_expr(e) if isinstance(e, str) else e for e in b)
    if boundary is None:
        boundary = BoundaryMatrix.constant([[0.0] * n for _ in range(n)])
    elif not isinstance(boundary, BoundaryMatrix):
        boundary = BoundaryMatrix.constant(boundary)
    return HyperbolicSystem(n, m, aa, bb, boundary, horizon, sample_density)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    a_floor: float
    sign_ok: tuple[bool, ...]
    sup_a: tuple[float, ...]
    sup_b: tuple[float, ...]
    messages: tuple[str, ...]

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "a_floor": self.a_floor,
            "sign_ok": list(self.sign_ok),
            "sup_a": list(self.sup_a),
            "sup_b": list(self.sup_b),
            "messages": list(self.messages),
        }


def _chebyshev_grid(lo: float, hi: float, count: int) -> np.ndarray:
    # Endpoint-including cosine-spaced points; clusters near the ends where
    # sign changes of expression coefficients are most often missed.
    k = np.arange(count)
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * k / (count - 1)))


@lru_cache(maxsize=64)
def validate_system(sys: HyperbolicSystem) -> ValidationReport:
    """Check the sign condition and boundedness on the sampling grid.

    Components j < m must have a_j > 0 and the rest a_j < 0, uniformly on
    [0,1] x [0,horizon], with min |a_j| at least A_FLOOR_MIN. Pure: identical
    systems give identical reports (results are cached).
    """
    xs = _chebyshev_grid(0.0, 1.0, sys.sample_density)
    ts = _chebyshev_grid(0.0, sys.horizon, sys.sample_density)
    X, T = np.meshgrid(xs, ts, indexing="ij")

    sign_ok = []
    sup_a = []
    sup_b = []
    messages = []
    a_floor = np.inf
    for j in range(sys.n):
        vals = compile_numpy(sys.a[j])(X, T)
        finite = np.isfinite(vals).all()
        if not finite:
            sign_ok.append(False)
            sup_a.append(float("nan"))
            messages.append(f"a_{j + 1} is not finite on the grid")
        else:
            if j < sys.m:
                ok = bool((vals > 0).all())
                expected = "positive"
            else:
                ok = bool((vals < 0).all())
                expected = "negative"
            sign_ok.append(ok)
            sup_a.append(float(np.abs(vals).max()))
            a_floor = min(a_floor, float(np.abs(vals).min()))
            if not ok:
                messages.append(f"a_{j + 1} is not uniformly {expected} on the grid")
        bvals = compile_numpy(sys.b[j])(X, T)
        sup_b.append(float(np.abs(bvals).max()) if np.isfinite(bvals).all() else float("nan"))

    if not np.isfinite(a_floor):
        a_floor = 0.0
    if all(sign_ok) and a_floor < A_FLOOR_MIN:
        messages.append(f"speed floor {a_floor:.3e} below {A_FLOOR_MIN:.0e}")

    ok = all(sign_ok) and a_floor >= A_FLOOR_MIN
    return ValidationReport(ok, float(a_floor), tuple(sign_ok), tuple(sup_a), tuple(sup_b), tuple(messages))


def require_valid(sys: HyperbolicSystem) -> ValidationReport:
    report = validate_system(sys)
    if not report.ok:
        raise SystemValidationError("; ".join(report.messages) or "validation failed")
    return report


def is_autonomous(sys: HyperbolicSystem) -> bool:
    """True iff no speed, damping, or boundary gain references t."""
    for e in sys.a + sys.b:
        if "t" in variables(e):
            return False
    return sys.boundary.is_autonomous()


def speeds_autonomous(sys: HyperbolicSystem) -> bool:
    """True iff the speeds alone are t-independent (travel times exist)."""
    return all("t" not in variables(e) for e in sys.a)


@dataclass(frozen=True)
class InitialData:
    """Initial profiles as expressions in x, one per component."""

    profiles: tuple[Expr, ...]

    @classmethod
    def from_strings(cls, sources: Sequence[str]) -> "InitialData":
        return cls(tuple(parse_expr(s) for s in sources))

    def as_callables(self):
        return tuple(_profile_callable(e) for e in self.profiles)

    def sources(self) -> list[str]:
        return [to_source(e) for e in self.profiles]


def _profile_callable(e: Expr):
    fn = compile_numpy(e)

    def profile(x):
        x = np.asarray(x, dtype=float)
        return fn(x, np.zeros(x.shape))

    return profile
