import math

import numpy as np
import pytest

from ftstab.model import BoundaryMatrix, make_system
from ftstab.simulator import (
    SimulatorError,
    apply_reflected_shift,
    bump_profile,
    decay_curve,
    default_dt,
    default_probe_family,
    evaluate_solution,
    march_boundary_trace,
    offset_grid,
    reflected_inflow,
    snapshot_from_trace,
    solution_snapshot,
    trace_characteristic,
    verify_vanishing,
    zero_profile,
)

PI = "3.141592653589793"
CASCADE = [[0.0, 1.0], [0.0, 0.0]]
MIRROR = [[1.0, -1.0], [1.0, -1.0]]


def _cascade():
    return make_system(["1", "-1"], m=1, boundary=CASCADE, horizon=8)


# --- characteristic tracing ---------------------------------------------------


def test_trace_initial_foot():
    foot = trace_characteristic(_cascade(), 0, 0.5, 0.2)
    assert foot.kind == "initial_line"
    assert foot.x == pytest.approx(0.3, abs=1e-12)
    assert foot.t == 0.0
    assert foot.damping == 1.0


def test_trace_boundary_foot():
    foot = trace_characteristic(_cascade(), 0, 0.5, 2.0)
    assert foot.kind == "left_boundary"
    assert foot.x == 0.0
    assert foot.t == pytest.approx(1.5, abs=1e-12)


def test_trace_damping_factor():
    eps = 0.25
    sys = make_system(["1", "-1"], m=1, b=[repr(eps), "0"], boundary=CASCADE)
    foot = trace_characteristic(sys, 0, 0.5, 0.2)
    # constant b/a integrated over the traversed segment from 0.3 to 0.5
    assert foot.damping == pytest.approx(math.exp(-0.2 * eps), abs=1e-14)


def test_trace_leftward_component():
    foot = trace_characteristic(_cascade(), 1, 0.5, 0.2)
    assert foot.kind == "initial_line"
    assert foot.x == pytest.approx(0.7, abs=1e-12)
    foot = trace_characteristic(_cascade(), 1, 0.5, 2.0)
    assert foot.kind == "right_boundary"
    assert foot.t == pytest.approx(1.5, abs=1e-12)


def test_numeric_tracer_matches_closed_form():
    # same constant speed, once written so the fast path cannot detect it
    closed = make_system(["1.3", "-1"], m=1, b=["0.2", "0"], boundary=CASCADE)
    forced = make_system(["1.3 + 0*x", "-1"], m=1, b=["0.2 + 0*x", "0"], boundary=CASCADE)
    for x, t in ((0.7, 0.3), (0.2, 0.9), (0.95, 4.0)):
        f1 = trace_characteristic(closed, 0, x, t)
        f2 = trace_characteristic(forced, 0, x, t)
        assert f1.kind == f2.kind
        assert f2.x == pytest.approx(f1.x, abs=1e-10)
        assert f2.t == pytest.approx(f1.t, abs=1e-10)
        assert f2.damping == pytest.approx(f1.damping, abs=1e-10)


def test_numeric_tracer_nonautonomous_against_quadrature():
    # dx/dt = 1 + 0.3 sin t integrates in closed form
    sys = make_system(["1+0.3*sin(t)", "-1"], m=1, boundary=CASCADE, horizon=6)
    x, t = 0.9, 0.4
    foot = trace_characteristic(sys, 0, x, t)
    displacement = t + 0.3 * (1.0 - math.cos(t))
    assert foot.kind == "initial_line"
    assert foot.x == pytest.approx(x - displacement, abs=1e-11)


# --- recursive evaluation -----------------------------------------------------


def test_zero_data_gives_zero_solution():
    sys = _cascade()
    phi = [zero_profile, zero_profile]
    xs = offset_grid(65)
    for t in (0.0, 0.5, 1.7, 3.0):
        assert np.all(solution_snapshot(sys, phi, xs, t) == 0.0)


def test_bump_transport_and_reflection():
    sys = _cascade()
    bump = bump_profile(0.5, 0.1)
    phi = (zero_profile, bump)
    # u2 rides leftward: u2(x,t) = bump(x+t) while x+t < 1
    assert evaluate_solution(sys, phi, 0.35, 0.1)[1] == pytest.approx(bump(np.array([0.45]))[0])
    # after reflection at x=0, u1 picks it up: u1(x,t) = bump(t-x) for 0 < t-x < 1
    assert evaluate_solution(sys, phi, 0.2, 0.7)[0] == pytest.approx(1.0)
    # everything is gone after the bump tail leaves through x=1 at t = 1.6
    xs = offset_grid(129)
    assert np.abs(solution_snapshot(sys, phi, xs, 1.61)).max() == 0.0
    assert np.abs(solution_snapshot(sys, phi, xs, 1.55)).max() > 0.1


def test_mirror_system_vanishes_despite_cycles():
    sys = make_system(["1", "-1"], m=1, boundary=MIRROR, horizon=8)
    phi = [f"sin({PI}*x)", "x*(1-x)"]
    xs = offset_grid(129)
    for t in (3.05, 3.5, 4.0):
        assert np.abs(solution_snapshot(sys, phi, xs, t)).max() <= 1e-12


def test_linearity():
    sys = _cascade()
    rng = np.random.default_rng(23)
    phi1 = ("x*(1-x)", f"sin({PI}*x)")
    phi2 = (f"sin(2*{PI}*x)", "x^2*(1-x)")
    a, b = 0.7, -1.3
    f1 = [lambda x, s=s: __import__("ftstab").simulator._phi_callables((s,), 1)[0](x) for s in phi1]
    combo = [
        lambda x, i=i: a * f1[i](x)
        + b * __import__("ftstab").simulator._phi_callables((phi2[i],), 1)[0](x)
        for i in range(2)
    ]
    for _ in range(10):
        x, t = rng.uniform(0, 1), rng.uniform(0, 3)
        u1 = evaluate_solution(sys, phi1, x, t)
        u2 = evaluate_solution(sys, phi2, x, t)
        uc = evaluate_solution(sys, combo, x, t)
        assert np.abs(uc - (a * u1 + b * u2)).max() <= 1e-12 * (1 + np.abs(u1).max() + np.abs(u2).max())


def test_causality_bitwise():
    sys = _cascade()
    base = bump_profile(0.2, 0.05)
    spurious = bump_profile(0.7, 0.05)

    def phi1(x):
        return base(x)

    def phi1_perturbed(x):
        return base(x) + spurious(x)

    # u1(0.3, 0.1) depends only on phi1 at the foot 0.2
    v1 = evaluate_solution(sys, (phi1, zero_profile), 0.3, 0.1)
    v2 = evaluate_solution(sys, (phi1_perturbed, zero_profile), 0.3, 0.1)
    assert v1[0] == v2[0]  # bit-identical: perturbation sits outside the foot
    # whereas perturbing at the foot itself changes the value
    v3 = evaluate_solution(sys, (lambda x: base(x) + bump_profile(0.2, 0.03)(x), zero_profile), 0.3, 0.1)
    assert v3[0] != v1[0]


def test_reflection_residual_recursive():
    bm = BoundaryMatrix.time_varying([[0, 1], [0, 0]], [["0", "2+sin(t)"], ["0", "0"]])
    sys = make_system(["1", "-1"], m=1, boundary=bm, horizon=6)
    phi = (f"sin({PI}*x)", f"sin(2*{PI}*x)")

    def u(j, x, t):
        return float(evaluate_solution(sys, phi, x, t)[j])

    for t in (0.25, 0.8, 1.3):
        u_out = np.array([u(j, sys.inflow_x(j), t) for j in range(2)])
        expected = reflected_inflow(sys, u, t)
        scale = 1.0 + max(abs(u(j, 0.5, t)) for j in range(2))
        assert np.abs(u_out - expected).max() <= 1e-8 * scale


def test_iterate_identity_annihilates_after_k0_crossings():
    sys = make_system(["1", "-2"], m=1, boundary=CASCADE, horizon=8)

    def probe(j, x, t):
        return math.sin(1.0 + j + x + 2.0 * t)

    twice = apply_reflected_shift(sys, apply_reflected_shift(sys, probe))
    for x in (0.1, 0.5, 0.9):
        for t in (2.01, 2.7, 3.5):  # beyond k0/a0 = 2
            for j in range(2):
                assert twice(j, x, t) == 0.0
            # one application is not enough just above one crossing time
    assert apply_reflected_shift(sys, probe)(0, 0.9, 1.5) != 0.0


# --- marching mode -------------------------------------------------------------


def test_march_zero_coupling():
    sys = make_system(["1", "-2"], m=1, horizon=4)
    phi = (f"sin({PI}*x)", f"sin({PI}*x)")
    trace = march_boundary_trace(sys, phi, horizon=3.0)
    assert np.all(trace.values == 0.0)
    xs = offset_grid(65)
    # interior drains after the slowest crossing, tau_max = 1
    assert np.abs(snapshot_from_trace(sys, trace, phi, xs, 1.0 + 2 * trace.dt)).max() <= 1e-12


def test_march_agrees_with_recursive_offgrid():
    # incommensurate delay vs step: the cubic interpolation really runs
    P = [[0, 0.8, 0], [0, 0, -1.1], [0, 0, 0]]
    sys = make_system(["1", "-1.3", "-0.7"], m=1, boundary=P, horizon=8)
    phi = [f"sin({PI}*x)", f"sin(2*{PI}*x)", f"sin(3*{PI}*x)"]
    dt = 0.011
    trace = march_boundary_trace(sys, phi, horizon=5.0, dt=dt)
    worst = 0.0
    for i in range(5, trace.times.size, 41):
        t = trace.times[i]
        rec = np.array(
            [evaluate_solution(sys, phi, sys.inflow_x(j), t)[j] for j in range(3)]
        )
        worst = max(worst, np.abs(rec - trace.values[:, i]).max())
    assert worst <= 50.0 * dt**4 + 1e-8


def test_march_reflection_identity_nonautonomous_gain():
    bm = BoundaryMatrix.time_varying([[0, 1], [0, 0]], [["0", "sin(t)"], ["0", "0"]])
    sys = make_system(["1", "-1"], m=1, boundary=bm, horizon=6)
    phi = (f"sin({PI}*x)", f"sin(2*{PI}*x)")
    trace = march_boundary_trace(sys, phi, horizon=4.0)
    scale = 1.0 + np.abs(trace.values).max()
    for i in range(0, trace.times.size, 37):
        t = trace.times[i]
        u_in = np.empty(2)
        for k in range(2):
            foot = trace_characteristic(sys, k, sys.outflow_x(k), t)
            if foot.kind == "initial_line":
                fn = __import__("ftstab").simulator._phi_callables(phi, 2)[k]
                u_in[k] = foot.damping * float(fn(np.array([foot.x]))[0])
            else:
                u_in[k] = foot.damping * np.interp(foot.t, trace.times, trace.values[k])
        P_t = np.array([[bm.entry_values(j, k, np.array([t]))[0] for k in range(2)] for j in range(2)])
        resid = np.abs(trace.values[:, i] - P_t @ u_in).max()
        assert resid <= 1e-8 * scale


def test_march_rejects_coarse_step():
    sys = _cascade()
    with pytest.raises(SimulatorError):
        march_boundary_trace(sys, (zero_profile, zero_profile), horizon=2.0, dt=1.5)


# --- decay and vanishing --------------------------------------------------------


def test_decay_curve_zero_data():
    curve = decay_curve(_cascade(), (zero_profile, zero_profile), [0.0, 1.0, 2.0])
    assert all(l2 == 0.0 and sup == 0.0 for _, l2, sup in curve.rows)


def test_decay_curve_cascade_hits_zero_after_t_star():
    sys = make_system(["1", "-2"], m=1, boundary=CASCADE, horizon=6)
    phi = (f"sin({PI}*x)", f"sin({PI}*x)")
    curve = decay_curve(sys, phi, [1.0, 1.4, 1.52, 2.0])
    rows = dict((t, l2) for t, l2, _ in curve.rows)
    assert rows[1.0] > 1e-3
    assert rows[1.52] <= 1e-12
    assert rows[2.0] <= 1e-12


def test_decay_curve_march_mode_matches_recursive():
    sys = make_system(["1", "-2"], m=1, boundary=CASCADE, horizon=6)
    phi = (f"sin({PI}*x)", f"sin({PI}*x)")
    times = [0.3, 0.9, 1.2]
    rec = decay_curve(sys, phi, times, mode="recursive")
    mar = decay_curve(sys, phi, times, mode="march")
    for (t1, l2a, supa), (t2, l2b, supb) in zip(rec.rows, mar.rows):
        assert t1 == t2
        # interior reconstruction interpolates off-grid, with one-sided
        # stencils near the top of the filled history: O(dt^4 * |phi''''|)
        assert l2b == pytest.approx(l2a, abs=1e-6)
        assert supb == pytest.approx(supa, abs=1e-6)


def test_persistent_mass_when_not_fts():
    # speed-perturbed mirror coupling has eigenvalues; sin data persists
    sys = make_system(["1.1", "-1"], m=1, boundary=MIRROR, horizon=12)
    phi = (f"sin({PI}*x)", f"sin({PI}*x)")
    curve = decay_curve(sys, phi, [10.0], mode="march")
    assert curve.rows[0][1] > 1e-3


def test_norms_on_constant_function():
    xs = offset_grid(513)
    vals = np.ones((2, xs.size))
    from ftstab.simulator import _norms

    l2, sup = _norms(xs, vals)
    assert sup == 1.0
    assert l2 == pytest.approx(1.0, abs=1e-6)


def test_decay_curve_rejects_times_beyond_horizon():
    with pytest.raises(SimulatorError):
        decay_curve(_cascade(), (zero_profile, zero_profile), [100.0])


def test_verify_vanishing_decoupled():
    sys = make_system(["1", "-2"], m=1, horizon=4)
    report = verify_vanishing(sys, default_probe_family(sys), 1.0, tol=1e-10)
    assert report.status == "pass"
    assert report.exactness_confirmed
    assert abs(report.measured_time - 1.0) <= 2.0 * default_dt(sys)


def test_verify_vanishing_cascade():
    sys = make_system(["1", "-2"], m=1, boundary=CASCADE, horizon=6)
    probes = default_probe_family(sys)
    good = verify_vanishing(sys, probes, 1.5, tol=1e-10)
    assert good.status == "pass" and good.exactness_confirmed
    assert abs(good.measured_time - 1.5) <= 2.0 * default_dt(sys)
    bad = verify_vanishing(sys, probes, 1.4, tol=1e-10)
    assert bad.status == "fail"


def test_verify_vanishing_fails_for_non_fts():
    sys = make_system(["1.1", "-1"], m=1, boundary=MIRROR, horizon=12)
    report = verify_vanishing(sys, default_probe_family(sys), 8.0, tol=1e-10)
    assert report.status == "fail"


def test_probe_family_shape():
    sys = _cascade()
    probes = default_probe_family(sys)
    assert len(probes) == 4  # two probes per component
    xs = np.linspace(0, 1, 101)
    for probe in probes:
        live = [j for j in range(2) if np.abs(probe[j](xs)).max() > 0]
        assert len(live) == 1


def test_decay_csv_format():
    curve = decay_curve(_cascade(), (zero_profile, zero_profile), [0.0, 0.5])
    text = curve.to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "t,l2,sup"
    assert len(lines) == 3
