import numpy as np
import pytest

from hadexp.errors import DomainError
from hadexp.geometry import (EQUAL, LIGHTLIKE_FUTURE, LIGHTLIKE_PAST, SPACELIKE,
                             STRICT_FUTURE, STRICT_PAST, SpacetimeModel,
                             causal_relation, minkowski, world_function)


def test_default_box():
    m = minkowski(3)
    assert m.dim == 3
    assert np.allclose(m.box, [[-4, 4]] * 3)


@pytest.mark.parametrize("dim", [2, 3, 4])
def test_world_function_signature(dim):
    m = minkowski(dim)
    y = np.zeros(dim)
    y[0] = 1.5
    assert world_function(m, y, np.zeros(dim)) == pytest.approx(1.5 ** 2)
    y = np.zeros(dim)
    y[1] = 2.0
    assert world_function(m, y, np.zeros(dim)) == pytest.approx(-4.0)


def test_box_validation():
    with pytest.raises(ValueError):
        SpacetimeModel(dim=2, box=np.array([[1.0, -1.0], [0.0, 2.0]]))
    with pytest.raises(ValueError):
        minkowski(1)
    with pytest.raises(NotImplementedError):
        SpacetimeModel(dim=2, box=np.array([[-1.0, 1.0]] * 2), backend="curved")


def test_check_inside():
    m = minkowski(2, box=[[-1, 1], [-1, 1]])
    with pytest.raises(DomainError):
        m.check_inside(np.array([2.0, 0.0]))
    assert m.contains([0.5, -0.5])
    assert not m.contains([0.0, 1.5])


@pytest.mark.parametrize("y,expected", [
    ([2.0, 1.0], STRICT_FUTURE),
    ([-2.0, 1.0], STRICT_PAST),
    ([1.0, 1.0], LIGHTLIKE_FUTURE),
    ([-1.0, -1.0], LIGHTLIKE_PAST),
    ([0.5, 2.0], SPACELIKE),
    ([0.0, 0.0], EQUAL),
])
def test_causal_relation(y, expected):
    m = minkowski(2)
    assert causal_relation(m, np.array(y), np.zeros(2)) == expected


def test_in_causal_cone():
    m = minkowski(2)
    x = np.zeros(2)
    assert m.in_causal_cone([1.0, 0.5], x, +1)
    assert not m.in_causal_cone([1.0, 0.5], x, -1)
    assert m.in_causal_cone([-1.0, 0.5], x, -1)
    # the base point itself belongs to both cones
    assert m.in_causal_cone(x, x, +1) and m.in_causal_cone(x, x, -1)


def test_exp_log_roundtrip():
    m = minkowski(3)
    x = np.array([0.3, -0.2, 0.1])
    v = np.array([0.5, 0.4, -0.9])
    assert np.allclose(m.log_map(m.exp_map(v, x), x), v)


def test_transport_weight_flat():
    m = minkowski(4)
    assert m.box_world_function(np.array([1.0, 0, 0, 0]), np.zeros(4)) == 8.0
    assert m.transport_weight(np.array([1.0, 0, 0, 0]), np.zeros(4)) == 0.0
