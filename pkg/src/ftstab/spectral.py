"""Spectral finite-time stabilizability test for autonomous systems.

The generator of the autonomous problem has an eigenvalue at lambda exactly
when det(I - diag(e^{-lambda tau_1}, ..., e^{-lambda tau_n}) P1) vanishes,
with tau_j the travel time of component j across the unit interval and P1
the damping-absorbed boundary matrix. Expanding the determinant over index
subsets turns it into a Dirichlet polynomial 1 + sum E_k e^{-lambda r_k};
the problem is FTS iff every coefficient cancels, i.e. the polynomial is
identically 1. When it is not, zeros are located by argument-principle
counting on subdivided rectangles followed by Newton refinement.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .expr import compile_numpy
from .graph_criteria import MAX_MINOR_DIM
from .model import HyperbolicSystem, is_autonomous, require_valid, speeds_autonomous

QUAD_REL_TOL = 1e-12
EXPONENT_MERGE_REL_TOL = 1e-10
COEFF_DROP_REL_TOL = 1e-12
ROOT_RESIDUAL_TOL = 1e-10


class SpectralError(Exception):
    pass


class QuadratureError(SpectralError):
    """Adaptive quadrature failed to converge (near-degenerate speed)."""


class RootSearchError(SpectralError):
    pass


def _adaptive_integral(fn, desc: str) -> float:
    value, err, info = quad(fn, 0.0, 1.0, epsabs=1e-14, epsrel=QUAD_REL_TOL, limit=200, full_output=True)[:3]
    if err > max(1e-11, abs(value) * 1e-9):
        raise QuadratureError(f"quadrature for {desc} did not converge (err={err:.2e})")
    return float(value)


@dataclass(frozen=True)
class TravelTimes:
    """Crossing times of the unit interval, one per component."""

    tau: tuple[float, ...]
    alpha_end: tuple[float, ...]  # signed -integral of 1/a_j over [0,1]
    rel_tol: float = QUAD_REL_TOL
    method: str = "adaptive-gauss-kronrod"


def compute_travel_times(sys: HyperbolicSystem) -> TravelTimes:
    """tau_j = integral_0^1 dx/|a_j(x)| by adaptive Gauss-Kronrod quadrature.

    Requires t-independent speeds and a validated sign condition.
    """
    if not speeds_autonomous(sys):
        raise SpectralError("travel times need t-independent speeds")
    require_valid(sys)
    taus = []
    alphas = []
    for j in range(sys.n):
        a = compile_numpy(sys.a[j])
        signed = _adaptive_integral(lambda x: 1.0 / float(a(x, 0.0)), f"1/a_{j + 1}")
        alphas.append(-signed)
        taus.append(abs(signed))
    return TravelTimes(tuple(taus), tuple(alphas))


@dataclass(frozen=True)
class TransformedBoundary:
    """Boundary matrix with the dampings folded in.

    p1 = diag(1,...,1, e^{beta_{m+1}}, ..., e^{beta_n}) P
         diag(e^{-beta_1}, ..., e^{-beta_m}, 1,...,1)
    with beta_j the integral of b_j/a_j over the interval. The exponentials
    never vanish, so the sign pattern is that of P itself.
    """

    beta: tuple[float, ...]
    p1: tuple[tuple[float, ...], ...]

    def as_array(self) -> np.ndarray:
        return np.array(self.p1, dtype=float)


def transform_boundary(sys: HyperbolicSystem) -> TransformedBoundary:
    if not is_autonomous(sys):
        raise SpectralError("boundary transformation needs an autonomous system")
    if not sys.boundary.is_constant():
        raise SpectralError("boundary transformation needs a constant matrix")
    require_valid(sys)
    betas = []
    for j in range(sys.n):
        a = compile_numpy(sys.a[j])
        b = compile_numpy(sys.b[j])
        betas.append(
            _adaptive_integral(lambda x: float(b(x, 0.0)) / float(a(x, 0.0)), f"b_{j + 1}/a_{j + 1}")
        )
    left = np.ones(sys.n)
    right = np.ones(sys.n)
    for j in range(sys.m, sys.n):
        left[j] = math.exp(betas[j])
    for j in range(sys.m):
        right[j] = math.exp(-betas[j])
    p1 = np.diag(left) @ sys.boundary.constant_array() @ np.diag(right)
    return TransformedBoundary(tuple(betas), tuple(tuple(row) for row in p1))


@dataclass(frozen=True)
class DirichletPolynomial:
    """1 + sum_k E_k e^{-lambda r_k} with distinct increasing exponents r_k."""

    terms: tuple[tuple[float, float], ...]

    @property
    def is_one(self) -> bool:
        return not self.terms

    def coeff_sum(self) -> float:
        return sum(abs(E) for _, E in self.terms)

    def min_exponent(self) -> float:
        return self.terms[0][0]

    def evaluate(self, lam: complex) -> complex:
        return 1.0 + sum(E * cmath.exp(-lam * r) for r, E in self.terms)

    def derivative(self, lam: complex) -> complex:
        return sum(-r * E * cmath.exp(-lam * r) for r, E in self.terms)


def expand_characteristic(p1, tau: Sequence[float] | TravelTimes) -> DirichletPolynomial:
    """Subset expansion of det(I - diag(e^{-lambda tau}) P1).

    Each nonempty index subset J contributes the term
    (-1)^{|J|} * (principal minor of P1 on J) * e^{-lambda * sum(tau_J)}.
    Exponents equal up to a relative tolerance merge by summing coefficients;
    merged coefficients below a drop tolerance disappear. The cancellation of
    merged terms is the single place where the FTS verdict is sensitive to
    perturbations of the travel times.
    """
    if isinstance(p1, TransformedBoundary):
        p1 = p1.as_array()
    P = np.asarray(p1, dtype=float)
    taus = tuple(tau.tau) if isinstance(tau, TravelTimes) else tuple(float(v) for v in tau)
    n = P.shape[0]
    if P.shape != (n, n) or len(taus) != n:
        raise SpectralError("matrix and travel times have inconsistent shapes")
    if n > MAX_MINOR_DIM:
        raise SpectralError(f"subset expansion capped at n <= {MAX_MINOR_DIM}")

    raw = []
    max_minor = 0.0
    for size in range(1, n + 1):
        for subset in itertools.combinations(range(n), size):
            idx = list(subset)
            sub = P[np.ix_(idx, idx)]
            minor = float(sub[0, 0]) if size == 1 else float(np.linalg.det(sub))
            max_minor = max(max_minor, abs(minor))
            coeff = (-1.0) ** size * minor
            raw.append((sum(taus[i] for i in idx), coeff))

    raw.sort(key=lambda item: item[0])
    merge_tol = EXPONENT_MERGE_REL_TOL * max(taus)
    merged: list[list[float]] = []
    for r, E in raw:
        if merged and r - merged[-1][0] <= merge_tol:
            merged[-1][1] += E
        else:
            merged.append([r, E])

    drop_tol = COEFF_DROP_REL_TOL * (1.0 + max_minor)
    terms = tuple((r, E) for r, E in merged if abs(E) > drop_tol)
    return DirichletPolynomial(terms)


def is_spectrum_empty(d: DirichletPolynomial) -> bool:
    """Empty spectrum iff the characteristic function reduces to 1."""
    return d.is_one


@dataclass(frozen=True)
class Window:
    re0: float
    re1: float
    im0: float
    im1: float

    def width(self) -> float:
        return self.re1 - self.re0

    def height(self) -> float:
        return self.im1 - self.im0

    def diameter(self) -> float:
        return math.hypot(self.width(), self.height())

    def center(self) -> complex:
        return complex(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))

    def contains(self, z: complex, slack: float = 0.0) -> bool:
        return (
            self.re0 - slack <= z.real <= self.re1 + slack
            and self.im0 - slack <= z.imag <= self.im1 + slack
        )

    def split(self) -> list["Window"]:
        cr = 0.5 * (self.re0 + self.re1)
        ci = 0.5 * (self.im0 + self.im1)
        return [
            Window(self.re0, cr, self.im0, ci),
            Window(cr, self.re1, self.im0, ci),
            Window(self.re0, cr, ci, self.im1),
            Window(cr, self.re1, ci, self.im1),
        ]

    def grown(self, amount: float) -> "Window":
        return Window(self.re0 - amount, self.re1 + amount, self.im0 - amount, self.im1 + amount)


def default_window(d: DirichletPolynomial) -> Window:
    """Heuristic strip around the zero set. Zeros of a Dirichlet polynomial
    with nonzero coefficients lie in a vertical strip; the bound below is a
    coarse cover of it, and the CLI exposes an override.
    """
    if d.is_one:
        raise SpectralError("constant characteristic function has no zeros")
    rmin = d.min_exponent()
    if rmin <= 0:
        raise SpectralError("exponents must be positive")
    c0 = math.log1p(d.coeff_sum()) / rmin
    return Window(-10.0 * c0, c0, 0.0, 50.0 / rmin)


@dataclass(frozen=True)
class RootHit:
    lam: complex
    residual: float


@dataclass
class RootSearch:
    roots: list[RootHit] = field(default_factory=list)
    failed_boxes: list[Window] = field(default_factory=list)


_PHASE_LIMIT = math.pi / 4


def _winding_number(d: DirichletPolynomial, box: Window) -> Optional[int]:
    """Zero count inside the box by the argument principle.

    The boundary is sampled adaptively so the phase of the characteristic
    function changes by less than pi/4 between consecutive samples, which
    makes the unwrapped argument increment trustworthy. The initial sampling
    is forced below the oscillation scale of the fastest term so that a full
    revolution can never alias into a small accepted increment. Returns None
    when the contour passes too close to a zero.
    """
    corners = [
        complex(box.re0, box.im0),
        complex(box.re1, box.im0),
        complex(box.re1, box.im1),
        complex(box.re0, box.im1),
        complex(box.re0, box.im0),
    ]
    floor = 1e-13 * (1.0 + d.coeff_sum())
    min_seg = 1e-11 * (1.0 + box.diameter())
    r_max = max(r for r, _ in d.terms)
    max_seg = math.pi / (8.0 * r_max)
    total = 0.0
    for za, zb in zip(corners[:-1], corners[1:]):
        pieces = max(1, math.ceil(abs(zb - za) / max_seg))
        knots = [za + (zb - za) * i / pieces for i in range(pieces + 1)]
        fvals = [d.evaluate(z) for z in knots]
        stack = list(zip(knots[:-1], fvals[:-1], knots[1:], fvals[1:]))
        while stack:
            z0, f0, z1, f1 = stack.pop()
            if abs(f0) < floor or abs(f1) < floor:
                return None
            dphi = cmath.phase(f1 / f0)
            if abs(dphi) < _PHASE_LIMIT:
                total += dphi
                continue
            if abs(z1 - z0) < min_seg:
                return None
            zm = 0.5 * (z0 + z1)
            fm = d.evaluate(zm)
            stack.append((zm, fm, z1, f1))
            stack.append((z0, f0, zm, fm))
    w = total / (2.0 * math.pi)
    k = round(w)
    if abs(w - k) > 0.15:
        return None
    return int(k)


def _newton(d: DirichletPolynomial, z0: complex, max_iter: int = 200) -> Optional[RootHit]:
    scale = 1.0 + d.coeff_sum()
    z = z0
    for _ in range(max_iter):
        f = d.evaluate(z)
        if abs(f) <= 1e-13 * scale:
            return RootHit(z, abs(f))
        fp = d.derivative(z)
        if abs(fp) < 1e-300:
            return None
        step = f / fp
        z = z - step
        if abs(step) <= 1e-15 * (1.0 + abs(z)):
            f = d.evaluate(z)
            if abs(f) <= ROOT_RESIDUAL_TOL:
                return RootHit(z, abs(f))
    f = d.evaluate(z)
    if abs(f) <= ROOT_RESIDUAL_TOL:
        return RootHit(z, abs(f))
    return None


def find_roots(
    d: DirichletPolynomial,
    window: Window | tuple[float, float, float, float] | None = None,
    residual_tol: float = ROOT_RESIDUAL_TOL,
    max_depth: int = 60,
) -> RootSearch:
    """Locate zeros inside a rectangle of the complex plane.

    Rectangles are subdivided until each holds at most one zero; a box whose
    contour runs through a zero is perturbed outward up to three times before
    being reported as failed. Each isolated zero is polished by Newton
    iteration until |Delta| <= residual_tol. Roots come back sorted by
    (imag, real).
    """
    if d.is_one:
        raise SpectralError("characteristic function is constant; no roots to find")
    if window is None:
        window = default_window(d)
    elif not isinstance(window, Window):
        window = Window(*window)

    result = RootSearch()
    seed_size = min(2.0, 0.5 + math.pi / (2.0 * max(r for r, _ in d.terms)))
    # (box, depth, perturb attempts)
    stack: list[tuple[Window, int, int]] = [(window, 0, 0)]
    hits: list[RootHit] = []
    while stack:
        box, depth, attempts = stack.pop()
        w = _winding_number(d, box)
        if w is None:
            if attempts < 3:
                bump = (math.sqrt(2.0) - 1.0) * 1e-3 * (attempts + 1) * (1.0 + box.diameter())
                stack.append((box.grown(bump), depth, attempts + 1))
            else:
                result.failed_boxes.append(box)
            continue
        if w == 0:
            continue
        tiny = box.diameter() <= 1e-7 * (1.0 + abs(box.center()))
        if (w == 1 and box.diameter() <= seed_size) or tiny or depth >= max_depth:
            hit = _newton(d, box.center())
            if hit is not None and hit.residual <= residual_tol and box.contains(hit.lam, slack=1e-6):
                hits.append(hit)
            elif w >= 1 and not tiny and depth < max_depth:
                stack.extend((child, depth + 1, 0) for child in box.split())
            else:
                result.failed_boxes.append(box)
            continue
        stack.extend((child, depth + 1, 0) for child in box.split())

    hits.sort(key=lambda h: (h.lam.imag, h.lam.real))
    deduped: list[RootHit] = []
    for h in hits:
        if any(abs(h.lam - other.lam) <= 1e-7 * (1.0 + abs(h.lam)) for other in deduped):
            continue
        deduped.append(h)
    result.roots = deduped
    return result


@dataclass(frozen=True)
class SpectrumReport:
    empty: bool
    terms: tuple[tuple[float, float], ...]
    roots: tuple[tuple[float, float, float], ...]  # (re, im, residual)
    fts: bool

    def as_dict(self) -> dict:
        return {
            "empty": self.empty,
            "terms": [{"r": r, "E": E} for r, E in self.terms],
            "roots": [{"re": re, "im": im, "residual": res} for re, im, res in self.roots],
            "fts": self.fts,
        }


def spectrum_report(
    sys: HyperbolicSystem, window: Window | tuple[float, float, float, float] | None = None
) -> SpectrumReport:
    """Full spectral pipeline: travel times, damping fold-in, expansion, roots."""
    if not is_autonomous(sys):
        raise SpectralError("spectral criterion applies to autonomous systems only")
    tau = compute_travel_times(sys)
    p1 = transform_boundary(sys)
    delta = expand_characteristic(p1, tau)
    if is_spectrum_empty(delta):
        return SpectrumReport(True, (), (), True)
    search = find_roots(delta, window)
    roots = tuple((h.lam.real, h.lam.imag, h.residual) for h in search.roots)
    return SpectrumReport(False, delta.terms, roots, False)
