import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from surf_rd.analysis import (ExactSolution, convergence_rates, heat_decay_exact, linf_l2_error,
                              positive_offdiagonals, rayleigh_quotient, region_violation_scan, solution_distance,
                              temporal_convergence, verify_matrix_properties)
from surf_rd.assembly import NodalField, assemble_operators, interpolate
from surf_rd.errors import AnalysisError
from surf_rd.kinetics import Rectangle, SemilinearDecay
from surf_rd.mesh import surface_area
from surf_rd.timestepper import SimulationConfig, SimulationResult, StepRecord, imex_euler_run


def test_second_order_rate():
    table = convergence_rates([1.0, 0.25], [1.0, 0.5])
    assert table.rows[0].rate is None
    assert table.rows[1].rate == pytest.approx(2.0)


def test_stagnating_error_has_zero_rate():
    assert convergence_rates([0.3, 0.3], [0.2, 0.1]).rates == [pytest.approx(0.0)]


def test_typical_rate():
    table = convergence_rates([3.85e-2, 1e-2], [0.2, 0.1], levels=[3, 4], n_nodes=[642, 2562])
    assert table.rows[1].rate == pytest.approx(1.945, abs=1e-3)
    assert (table.rows[1].level, table.rows[1].n_nodes) == (4, 2562)


def test_mean_rate_uses_last_rows():
    table = convergence_rates([1.0, 0.5, 0.125, 0.03125], [1.0, 0.5, 0.25, 0.125])
    assert table.rates == pytest.approx([1.0, 2.0, 2.0])
    assert table.mean_rate(last=2) == pytest.approx(2.0)
    assert table.mean_rate() == pytest.approx(5.0 / 3.0)


@pytest.mark.parametrize("errors, hs", [
    ([1.0], [1.0]),
    ([1.0, 0.5], [1.0]),
    ([1.0, 0.0], [1.0, 0.5]),
    ([1.0, 0.5], [1.0, -0.5]),
    ([1.0, 0.5], [0.5, 0.5]),
])
def test_rate_input_errors(errors, hs):
    with pytest.raises(AnalysisError):
        convergence_rates(errors, hs)


positive = st.floats(min_value=1e-6, max_value=1e3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(positive, positive), min_size=2, max_size=6), positive, positive)
def test_rates_are_scale_invariant(pairs, c_err, c_h):
    errors, hs = zip(*pairs)
    assume(all(abs(math.log(a / b)) > 1e-3 for a, b in zip(hs, hs[1:])))
    base = convergence_rates(errors, hs).rates
    scaled = convergence_rates([c_err * e for e in errors], [c_h * h for h in hs]).rates
    np.testing.assert_allclose(scaled, base, rtol=1e-6, atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(positive, positive), min_size=2, max_size=6))
def test_rates_are_finite(pairs):
    errors, hs = zip(*pairs)
    assume(all(abs(math.log(a / b)) > 1e-9 for a, b in zip(hs, hs[1:])))
    assert all(math.isfinite(rate) for rate in convergence_rates(errors, hs).rates)


def test_exact_solutions():
    p = np.array([[1.0, 0.0, 0.0], [0.5, 0.5, math.sqrt(0.5)]])
    exact = heat_decay_exact()
    assert exact.r == 1
    values = exact.evaluate(p, math.log(2.0))
    assert values.shape == (1, 2)
    assert values[0, 1] == pytest.approx(0.125 * math.sqrt(0.5))


def result_with_snapshots(fields, tau=0.1):
    records = [StepRecord(n, n * tau, (0.0,), (0.0,), 0) for n in range(1, len(fields))]
    return SimulationResult(final=fields[-1], records=records,
                            snapshots=[(n, f) for n, f in enumerate(fields)], tau=tau)


def test_linf_l2_error_of_constant_against_zero(icosphere, operators):
    mesh, ops = icosphere(2), operators(2)
    zero = ExactSolution("zero", (lambda p, t: np.zeros(len(p)),))
    ones = NodalField(np.ones(mesh.n_vertices))
    result = result_with_snapshots([ones, ones, ones])
    assert linf_l2_error(result, zero, mesh, ops) == pytest.approx(math.sqrt(surface_area(mesh)), rel=1e-12)


def test_linf_l2_error_of_exact_interpolant_is_zero(icosphere, operators):
    mesh, ops = icosphere(2), operators(2)
    exact = heat_decay_exact()
    fields = [interpolate(mesh, exact.evaluate, n * 0.1) for n in range(4)]
    assert linf_l2_error(result_with_snapshots(fields), exact, mesh, ops) == 0.0


def test_linf_l2_error_from_trace(icosphere, operators):
    mesh, ops = icosphere(1), operators(1)
    result = SimulationResult(final=NodalField(np.zeros(42)), error_trace=[0.1, 0.3, 0.2],
                              exact_name=heat_decay_exact().name)
    assert linf_l2_error(result, heat_decay_exact(), mesh, ops) == 0.3
    other = ExactSolution("other", (lambda p, t: p[:, 0],))
    with pytest.raises(AnalysisError):
        linf_l2_error(result, other, mesh, ops)


def test_online_error_matches_snapshots(icosphere, operators):
    mesh, ops = icosphere(3), operators(3)
    exact = heat_decay_exact()
    u0 = interpolate(mesh, exact.evaluate, 0.0)
    config = SimulationConfig((1.0 / 24.0,), tau=0.05, t_final=0.5, snapshot_stride=1, solver="direct")
    result = imex_euler_run(mesh, ops, SemilinearDecay(beta=0.5), u0, config, exact=exact)
    from_snapshots = linf_l2_error(result, exact, mesh, ops)
    assert max(result.error_trace) == pytest.approx(from_snapshots, rel=1e-12)
    assert 0.0 < from_snapshots < 0.05


def record(step, low, high, tau=0.1):
    return StepRecord(step, step * tau, (low,), (high,), 0, (step,), (step + 100,))


def test_region_scan_tolerance_and_first_violation():
    rect = Rectangle((0.0,), (1.0,))
    records = [record(1, -1e-13, 0.9), record(2, 0.1, 1.0), record(3, -1e-6, 0.8), record(4, -1e-3, 1.5)]
    result = SimulationResult(final=NodalField([0.0]), records=records)
    report = region_violation_scan(result, rect)
    assert report.violated
    assert report.first_violation == (3, 3, 0)
    assert report.minima == (-1e-3,)
    assert report.maxima == (1.5,)
    assert report.time_of_min == pytest.approx((0.4,))
    clean = region_violation_scan(SimulationResult(final=NodalField([0.0]), records=records[:2]), rect)
    assert not clean.violated
    assert clean.minima == (-1e-13,)


def test_region_scan_upper_violation_and_dimension():
    rect = Rectangle((0.0,), (1.0,))
    result = SimulationResult(final=NodalField([0.0]), records=[record(1, 0.0, 1.0 + 1e-9)])
    assert region_violation_scan(result, rect).first_violation == (1, 101, 0)
    with pytest.raises(AnalysisError):
        region_violation_scan(result, Rectangle((0.0, 0.0), (1.0, 1.0)))


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_matrix_properties_on_icosphere(icosphere, operators, level):
    report = verify_matrix_properties(icosphere(level), operators(level))
    assert report.angle_condition
    assert report.max_offdiagonal <= 1e-13
    assert report.positive_offdiagonal_edges == []
    assert report.sign_pattern_consistent
    assert report.passed
    assert set(report.min_entry) == {1e-3, 1e-1, 1.0}


@pytest.mark.slow
def test_matrix_properties_on_level_four(icosphere, operators):
    assert verify_matrix_properties(icosphere(4), operators(4)).passed


def test_shift_zero_gives_identity(icosphere, operators):
    report = verify_matrix_properties(icosphere(1), operators(1), s_values=(0.0,))
    assert report.min_entry[0.0] == 0.0
    assert report.row_sum_error[0.0] == 0.0


def test_matrix_properties_on_violating_mesh(bad_mesh):
    ops = assemble_operators(bad_mesh)
    assert positive_offdiagonals(ops) == [(0, 1)]
    report = verify_matrix_properties(bad_mesh, ops)
    assert not report.angle_condition
    assert report.max_offdiagonal > 0.17
    assert report.sign_pattern_consistent
    assert all(report.row_sums_one.values())


def test_matrix_property_node_limit(icosphere, operators):
    with pytest.raises(AnalysisError):
        verify_matrix_properties(icosphere(1), operators(1), max_nodes=10)


def test_rayleigh_quotients_approach_eigenvalues(icosphere, operators):
    mesh, ops = icosphere(6), operators(6)
    xy = interpolate(mesh, lambda p: p[:, 0] * p[:, 1])
    xyz = interpolate(mesh, lambda p: p[:, 0] * p[:, 1] * p[:, 2])
    assert rayleigh_quotient(ops, xy) == pytest.approx(6.0, rel=1e-2)
    assert rayleigh_quotient(ops, xyz) == pytest.approx(12.0, rel=1e-2)


def test_rayleigh_quotient_of_constant_and_zero(operators):
    ops = operators(2)
    assert rayleigh_quotient(ops, np.ones(ops.n_nodes)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(AnalysisError):
        rayleigh_quotient(ops, np.zeros(ops.n_nodes))


def decay_runs(mesh, ops, taus):
    u0 = interpolate(mesh, heat_decay_exact().evaluate, 0.0)
    runs = []
    for tau in taus:
        config = SimulationConfig((1.0 / 24.0,), tau=tau, t_final=0.4, snapshot_stride=1, solver="direct")
        runs.append(imex_euler_run(mesh, ops, SemilinearDecay(beta=0.5), u0, config))
    return runs


def test_temporal_convergence_is_first_order(icosphere, operators):
    mesh, ops = icosphere(2), operators(2)
    runs = decay_runs(mesh, ops, [0.1, 0.05, 0.025, 0.0125])
    table = temporal_convergence(list(reversed(runs)), ops)
    assert len(table.rows) == 3
    assert table.rows[0].h == pytest.approx(0.1 - 0.0125)
    for rate in table.rates:
        assert 0.8 <= rate <= 1.2


def test_temporal_convergence_needs_three_runs_and_nested_grids(icosphere, operators):
    mesh, ops = icosphere(1), operators(1)
    runs = decay_runs(mesh, ops, [0.1, 0.05])
    with pytest.raises(AnalysisError):
        temporal_convergence(runs, ops)
    odd = decay_runs(mesh, ops, [0.08, 0.05])
    with pytest.raises(AnalysisError):
        solution_distance(odd[0], odd[1], ops)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 2, 9), elements=st.floats(-10.0, 10.0)))
def test_clamped_trajectories_never_violate(trajectory):
    rect = Rectangle((0.0, -1.0), (1.0, 0.5))
    records = []
    for n, values in enumerate(trajectory, start=1):
        clamped = rect.clamp(values)
        records.append(StepRecord(n, 0.1 * n, tuple(clamped.min(axis=1)), tuple(clamped.max(axis=1)), 0,
                                  tuple(clamped.argmin(axis=1)), tuple(clamped.argmax(axis=1))))
    result = SimulationResult(final=NodalField(rect.clamp(trajectory[-1])), records=records)
    report = region_violation_scan(result, rect)
    assert not report.violated
    assert report.first_violation is None
