from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistvol.angle_structures import complete_structure_n2, random_shape_structure
from twistvol.twist_triangulations import (
    build_h,
    build_ideal,
    build_spec,
    combinatorics_checks,
    edge_weights,
    h_edge_weights,
    holonomies,
    kernel_data,
    triangulation_from_json,
    triangulation_to_json,
    weight_identity_residual,
)

PI = math.pi


@pytest.mark.parametrize("n, parity, p, ideal, h", [
    (2, "even", 0, 3, 4),
    (3, "odd", 0, 3, 4),
    (7, "odd", 2, 5, 6),
])
def test_build_spec_examples(n, parity, p, ideal, h):
    spec = build_spec(n)
    assert (spec.parity, spec.p, spec.tet_count_ideal, spec.tet_count_h) == (parity, p, ideal, h)


@given(st.integers(min_value=2, max_value=200))
def test_counts_follow_floor_formulas(n):
    spec = build_spec(n)
    assert spec.tet_count_ideal == (n + 4) // 2
    assert spec.tet_count_h == (n + 6) // 2
    assert spec.p >= 0


@pytest.mark.parametrize("bad", [1, 0, -4])
def test_build_spec_rejects_small_index(bad):
    with pytest.raises(ValueError, match="non-hyperbolic"):
        build_spec(bad)


def test_build_spec_rejects_non_integers():
    with pytest.raises(TypeError):
        build_spec(2.0)


def _quotient_counts(records):
    edges = {e for r in records for e in r.edge_classes}
    faces = sum(len(r.face_gluings) for r in records) // 2
    return len(records), len(edges), faces


@pytest.mark.parametrize("n, expected", [(3, (3, 3, 6)), (2, (3, 3, 6)), (9, (6, 6, 12))])
def test_ideal_counts(n, expected):
    assert _quotient_counts(build_ideal(build_spec(n))) == expected


@pytest.mark.parametrize("n, expected", [(3, (4, 5, 8)), (2, (4, 5, 8)), (7, (6, 7, 12))])
def test_h_counts(n, expected):
    assert _quotient_counts(build_h(build_spec(n))) == expected


@pytest.mark.parametrize("n", range(2, 21))
def test_combinatorics_checks(n):
    checks = combinatorics_checks(build_spec(n))
    assert all(checks.values()), [k for k, v in checks.items() if not v]


def test_face_pairing_squares_to_identity():
    records = build_h(build_spec(8))
    for t, rec in enumerate(records):
        for f, (peer, peer_face) in enumerate(rec.face_gluings):
            assert tuple(records[peer].face_gluings[peer_face]) == (t, f)


@pytest.mark.parametrize("n", [3, 5, 9])
def test_odd_regular_angles(n):
    spec = build_spec(n)
    # the s edge carries six angle slots: 2 a_U + b_V + c_V + a_W + b_W
    om = edge_weights(spec, np.full(3 * spec.tet_count_ideal, PI / 3))
    assert om[0] == pytest.approx(2 * PI, abs=1e-14)
    # the d edge of Y_n carries five: b_U + c_U + c_W + b_Z + c_Z
    ext = np.full(3 * spec.tet_count_h, PI / 3)
    assert h_edge_weights(spec, ext)[1] == pytest.approx(5 * PI / 3, abs=1e-14)


def test_knot_edge_is_a_z():
    spec = build_spec(4)
    rng = np.random.default_rng(0)
    ext = np.concatenate([random_shape_structure(spec, rng).entries, [0.0, 1.0, PI - 1.0]])
    assert h_edge_weights(spec, ext)[-1] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=15), st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_edge_weights_sum_to_total_angle(n, seed):
    spec = build_spec(n)
    alpha = random_shape_structure(spec, np.random.default_rng(seed))
    assert edge_weights(spec, alpha).sum() == pytest.approx(2 * (spec.p + 3) * PI, abs=1e-11)


def test_edge_weights_dimension_error():
    with pytest.raises(ValueError):
        edge_weights(build_spec(3), np.zeros(5))


def test_n2_pattern_is_balanced():
    spec = build_spec(2)
    assert np.allclose(edge_weights(spec, complete_structure_n2()), 2 * PI, atol=1e-14)


def test_kernel_data_n3():
    kd = kernel_data(build_spec(3))
    assert kd.q_matrix == ((0, Fraction(1, 2)), (Fraction(1, 2), 0))
    assert np.allclose(kd.w_vector, [PI, PI])


def test_kernel_data_n2():
    kd = kernel_data(build_spec(2))
    assert kd.q_matrix == ((1, Fraction(-1, 2)), (Fraction(-1, 2), 0))
    assert np.allclose(kd.w_vector, [-3 * PI, PI])


def test_kernel_data_n5_w():
    assert np.allclose(kernel_data(build_spec(5)).w_vector, [-2 * PI, 3 * PI, PI])


@pytest.mark.parametrize("n", range(2, 16))
def test_kernel_data_shape(n):
    spec = build_spec(n)
    kd = kernel_data(spec)
    q = np.array(kd.q_matrix, dtype=object)
    assert q.shape == (spec.p + 2, spec.p + 2)
    assert (q == q.T).all()
    assert all((2 * x).denominator == 1 for row in kd.q_matrix for x in row)
    assert all(x.denominator == 1 for x in kd.w_coeffs)
    assert len(kd.q_tilde_matrix) == spec.p + 3


def test_holonomy_odd_example():
    spec = build_spec(5)
    alpha = np.full(3 * spec.tet_count_ideal, 0.0)
    i = spec.angle_index
    alpha[i("U", "a")] = 1.1
    alpha[i("V", "a")] = 1.0
    alpha[i("V", "c")] = 0.7
    alpha[i("W", "b")] = 0.5
    mu, lam = holonomies(spec, alpha)
    assert mu == pytest.approx(0.1, abs=1e-15)
    assert lam == pytest.approx(0.6, abs=1e-15)


def test_holonomy_even_formula():
    spec = build_spec(4)
    rng = np.random.default_rng(3)
    alpha = random_shape_structure(spec, rng).entries
    i = spec.angle_index
    mu, lam = holonomies(spec, alpha)
    assert mu == pytest.approx(alpha[i("U", "a")] - alpha[i("V", "a")], abs=1e-15)
    expected = 2 * (alpha[i("V", "a")] - alpha[i("U", "a")] + alpha[i("W", "a")] - alpha[i("V", "b")])
    assert lam == pytest.approx(expected, abs=1e-14)


def test_weight_identity_regular_n3():
    spec = build_spec(3)
    res = weight_identity_residual(spec, np.full(9, PI / 3))
    assert np.max(np.abs(res)) < 1e-13


@pytest.mark.parametrize("n, count", [(7, 100), (2, 50), (4, 50)])
def test_weight_identity_random(n, count):
    spec = build_spec(n)
    rng = np.random.default_rng(n)
    worst = max(np.max(np.abs(weight_identity_residual(spec, random_shape_structure(spec, rng))))
                for _ in range(count))
    assert worst < 1e-12


@pytest.mark.parametrize("n", [2, 5])
def test_json_round_trip(n):
    spec = build_spec(n)
    records = build_h(spec)
    spec2, records2 = triangulation_from_json(triangulation_to_json(spec, records))
    assert spec2 == spec
    assert records2 == records
