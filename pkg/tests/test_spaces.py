import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ALL_DESCRIPTORS, random_elements
from lipext.errors import DimensionMismatchError, MalformedElementError, MetricError
from lipext.oracle import four_point_example
from lipext.spaces import (
    FiniteMetricSpace,
    PartialFunction,
    SpaceDescriptor,
    SpaceElement,
    coerce,
    from_real,
    lipschitz_constant,
    metric_closure,
    norm,
    norms,
    pairing_sa,
    to_real,
)


# --- norms -------------------------------------------------------------------


def test_norm_examples():
    assert norm(SpaceElement(SpaceDescriptor.matrix_sa(2), np.diag([3.0, -5.0]))) == pytest.approx(5, rel=1e-12)
    assert norm(SpaceElement(SpaceDescriptor.real_euclid(2), [3.0, 4.0])) == pytest.approx(5, rel=1e-12)
    assert norm(SpaceElement(SpaceDescriptor.matrix_full(2), [[0, 2], [0, 0]])) == pytest.approx(2, rel=1e-12)


def test_sup_norms_use_modulus_per_coordinate():
    assert norm(SpaceElement(SpaceDescriptor.real_sup(3), [1.0, -4.0, 2.0])) == 4.0
    v = SpaceElement(SpaceDescriptor.seq_sup_complex(2), [3 + 4j, 1j])
    assert norm(v) == pytest.approx(5.0, rel=1e-14)


def test_complex_plane_matches_real_euclid_2(rng):
    z = rng.standard_normal(1000) + 1j * rng.standard_normal(1000)
    a = norms(SpaceDescriptor.complex_plane(), z[:, None])
    b = norms(SpaceDescriptor.real_euclid(2), np.stack([z.real, z.imag], axis=1))
    np.testing.assert_allclose(a, b, rtol=1e-15)


@pytest.mark.parametrize("desc", ALL_DESCRIPTORS, ids=str)
def test_norm_axioms(desc, rng):
    v = random_elements(desc, 10_000, rng)
    w = random_elements(desc, 10_000, rng)
    nv, nw, nvw = norms(desc, v), norms(desc, w), norms(desc, v + w)
    assert np.all(nvw <= nv + nw + 1e-9)
    c = rng.uniform(-5, 5, size=10_000)
    scaled = norms(desc, v * c.reshape((-1,) + (1,) * len(desc.shape)))
    np.testing.assert_allclose(scaled, np.abs(c) * nv, rtol=1e-9)
    assert np.all(nv > 0)


def test_sa_norm_equals_full_norm_on_hermitian(rng):
    for n in (1, 2, 3, 5):
        a = random_elements(SpaceDescriptor.matrix_sa(n), 2000, rng)
        np.testing.assert_allclose(
            norms(SpaceDescriptor.matrix_sa(n), a), norms(SpaceDescriptor.matrix_full(n), a), rtol=1e-10
        )


@pytest.mark.parametrize("desc", ALL_DESCRIPTORS, ids=str)
def test_real_coordinates_round_trip(desc, rng):
    v = random_elements(desc, 7, rng)
    r = to_real(desc, v)
    assert r.shape == (7, desc.real_dim if desc.kind != "mn-sa" else 2 * desc.size ** 2)
    np.testing.assert_array_equal(from_real(desc, r), v)


# --- elements ----------------------------------------------------------------


def test_malformed_shape_rejected():
    with pytest.raises(MalformedElementError):
        SpaceElement(SpaceDescriptor.real_sup(3), [1.0, 2.0])
    with pytest.raises(MalformedElementError):
        SpaceElement(SpaceDescriptor.matrix_full(2), np.zeros((3, 3)))


def test_non_hermitian_rejected_and_tolerance_respected():
    desc = SpaceDescriptor.matrix_sa(2)
    with pytest.raises(MalformedElementError):
        SpaceElement(desc, [[0, 1], [0, 0]])
    a = np.array([[1.0, 1.0], [1.0 + 1e-13, 1.0]])
    assert SpaceElement(desc, a).norm() == pytest.approx(2.0)


def test_non_finite_rejected():
    with pytest.raises(MalformedElementError):
        coerce(SpaceDescriptor.real_sup(1), [np.nan])


def test_real_kind_rejects_complex_data():
    with pytest.raises(MalformedElementError):
        SpaceElement(SpaceDescriptor.real_euclid(1), [1j])


def test_invalid_descriptor():
    with pytest.raises(Exception):
        SpaceDescriptor("banana", 1)
    with pytest.raises(Exception):
        SpaceDescriptor.real_sup(0)


def test_element_subtraction_checks_descriptor():
    a = SpaceElement(SpaceDescriptor.real_sup(2), [1.0, 2.0])
    b = SpaceElement(SpaceDescriptor.real_euclid(2), [1.0, 2.0])
    with pytest.raises(DimensionMismatchError):
        a - b


# --- pairing -----------------------------------------------------------------


def _rank_one(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def test_pairing_examples(rng):
    p = _rank_one([1, 1j])
    assert pairing_sa(p, p) == pytest.approx(1, abs=1e-12)
    assert pairing_sa(np.eye(2), p) == pytest.approx(1, abs=1e-12)
    v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    w = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    v, w = v / np.linalg.norm(v), w / np.linalg.norm(w)
    assert pairing_sa(_rank_one(v), _rank_one(w)) == pytest.approx(abs(np.vdot(v, w)) ** 2, abs=1e-12)


def test_pairing_symmetric_and_dimension_checked(rng):
    a, b = random_elements(SpaceDescriptor.matrix_sa(3), 2, rng)
    assert pairing_sa(a, b) == pytest.approx(pairing_sa(b, a), abs=1e-12)
    with pytest.raises(DimensionMismatchError):
        pairing_sa(np.eye(2), np.eye(3))


def test_pairing_of_rank_one_nodes_in_unit_interval(rng):
    for n in (2, 3, 4):
        vs = rng.standard_normal((500, n)) + 1j * rng.standard_normal((500, n))
        for a, b in zip(vs[:250], vs[250:]):
            t = pairing_sa(_rank_one(a), _rank_one(b))
            assert -1e-12 <= t <= 1 + 1e-12


# --- metric spaces -----------------------------------------------------------


def test_metric_validation_errors():
    with pytest.raises(MetricError, match="triangle"):
        FiniteMetricSpace(("a", "b", "c"), [[0, 1, 3], [1, 0, 1], [3, 1, 0]])
    with pytest.raises(MetricError, match="symmetric"):
        FiniteMetricSpace((0, 1), [[0, 1], [2, 0]])
    with pytest.raises(MetricError, match="positive"):
        FiniteMetricSpace((0, 1), [[0, 0], [0, 0]])
    with pytest.raises(MetricError):
        FiniteMetricSpace((0, 1), [[1, 1], [1, 0]])
    with pytest.raises(MetricError, match="distinct"):
        FiniteMetricSpace((0, 0), [[0, 1], [1, 0]])


def test_metric_slack_is_relative():
    # violation of 1e-13 relative is tolerated, 1e-9 is not
    FiniteMetricSpace((0, 1, 2), [[0, 1, 2 + 2e-13], [1, 0, 1], [2 + 2e-13, 1, 0]])
    with pytest.raises(MetricError):
        FiniteMetricSpace((0, 1, 2), [[0, 1, 2 + 1e-9], [1, 0, 1], [2 + 1e-9, 1, 0]])


@given(st.lists(st.floats(0.05, 10.0), min_size=3, max_size=28))
def test_metric_closure_always_valid(entries):
    m = 2
    while m * (m - 1) // 2 <= len(entries):
        m += 1
    m -= 1
    d = np.zeros((m, m))
    iu = np.triu_indices(m, 1)
    d[iu] = entries[: len(iu[0])]
    d = d + d.T
    closed = metric_closure(d)
    FiniteMetricSpace(tuple(range(m)), closed)
    assert np.all(closed <= d + 1e-12)


def test_unknown_label():
    with pytest.raises(MetricError, match="unknown"):
        FiniteMetricSpace.line(3).index("x")


# --- Lipschitz constants -----------------------------------------------------


def test_lipschitz_examples():
    space = FiniteMetricSpace.line(5)
    const = PartialFunction(space, range(5), np.full((5, 1), 3.0), SpaceDescriptor.real_sup(1))
    assert lipschitz_constant(const) == 0
    line = PartialFunction(FiniteMetricSpace.line(3), (0, 2), [[0.0], [1.0]], SpaceDescriptor.real_sup(1))
    assert lipschitz_constant(line) == 0.5
    assert lipschitz_constant(four_point_example()) == pytest.approx(np.sqrt(3) / 2, rel=1e-14)


def test_lipschitz_single_point_is_zero():
    f = PartialFunction(FiniteMetricSpace.line(3), (1,), [[7.0]], SpaceDescriptor.real_sup(1))
    assert lipschitz_constant(f) == 0


def test_lipschitz_of_full_assignment_is_brute_force_max(rng):
    space = FiniteMetricSpace.from_points(rng.standard_normal((6, 2)))
    desc = SpaceDescriptor.matrix_full(2)
    vals = random_elements(desc, 6, rng)
    brute = max(
        np.linalg.norm(vals[i] - vals[j], 2) / space.dist[i, j] for i in range(6) for j in range(6) if i != j
    )
    assert lipschitz_constant((space, desc), vals) == pytest.approx(brute, rel=1e-12)
    with pytest.raises(MalformedElementError):
        lipschitz_constant((space, desc), vals[:5])


def test_partial_function_validation():
    space = FiniteMetricSpace.line(3)
    desc = SpaceDescriptor.real_sup(1)
    with pytest.raises(MetricError):
        PartialFunction(space, (), np.zeros((0, 1)), desc)
    with pytest.raises(MetricError):
        PartialFunction(space, (0, 0), [[0.0], [1.0]], desc)
    with pytest.raises(MetricError):
        PartialFunction(space, (0, 5), [[0.0], [1.0]], desc)
    with pytest.raises(MalformedElementError):
        PartialFunction(space, (0, 1), [[0.0]], desc)


def test_partial_function_from_mapping():
    space = FiniteMetricSpace(("a", "b", "c"), [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    f = PartialFunction.from_mapping(space, {"c": [1.0], "a": [0.0]}, SpaceDescriptor.real_sup(1))
    assert f.subset == (2, 0)
    assert f.free == (1,)
    assert f.sup_norm() == 1.0
