"""Flat model spacetimes.

A :class:`SpacetimeModel` is a coordinate box in d-dimensional Minkowski
space with signature (-, +, ..., +), ordered (t, x1, ..., x_{d-1}).  It
exposes the squared geodesic distance ``world_function`` (positive on
causally related pairs), its gradient and d'Alembertian, straight-line
exponential/logarithm maps, and causal classification.  The interface
admits curved backends, but only the flat one ships.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# causal_relation return values
STRICT_FUTURE = "strict-future"
STRICT_PAST = "strict-past"
LIGHTLIKE_FUTURE = "lightlike-future"
LIGHTLIKE_PAST = "lightlike-past"
SPACELIKE = "spacelike"
EQUAL = "equal"


def as_event(y) -> np.ndarray:
    """Coerce a coordinate sequence to a float vector (t, x1, ...)."""
    arr = np.asarray(y, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"event must be a flat coordinate vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SpacetimeModel:
    """A geodesically convex block of d-dimensional Minkowski space."""

    dim: int
    box: np.ndarray  # shape (dim, 2): [lo, hi] per coordinate
    backend: str = "minkowski"

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dimension must be >= 2")
        box = np.asarray(self.box, dtype=float)
        if box.shape != (self.dim, 2) or np.any(box[:, 0] >= box[:, 1]):
            raise ValueError("box must be (dim, 2) with lo < hi per axis")
        object.__setattr__(self, "box", box)
        if self.backend != "minkowski":
            raise NotImplementedError(f"backend {self.backend!r} is a stub; only 'minkowski' ships")

    # -- domain handling ---------------------------------------------------

    def contains(self, y, rtol: float = 1e-12) -> bool:
        y = as_event(y)
        pad = rtol * (self.box[:, 1] - self.box[:, 0])
        return bool(np.all(y >= self.box[:, 0] - pad) and np.all(y <= self.box[:, 1] + pad))

    def check_inside(self, *points):
        for p in points:
            if not self.contains(p):
                raise DomainError(f"point {np.asarray(p)} outside domain box")

    @property
    def extent(self) -> float:
        return float(np.max(self.box[:, 1] - self.box[:, 0]))

    # -- metric ------------------------------------------------------------

    def metric_pair(self, v, w) -> float:
        """g(v, w) with signature (-, +, ..., +)."""
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        return float(-v[..., 0] * w[..., 0] + np.sum(v[..., 1:] * w[..., 1:], axis=-1))

    # -- exponential map and world function --------------------------------

    def exp_map(self, v, x) -> np.ndarray:
        x = as_event(x)
        self.check_inside(x)
        return x + np.asarray(v, dtype=float)

    def log_map(self, y, x) -> np.ndarray:
        """v with exp_x(v) = y; straight-line subtraction on the flat backend."""
        y, x = as_event(y), as_event(x)
        self.check_inside(y, x)
        return y - x

    def world_function(self, y, x) -> float:
        """Squared geodesic distance, (t_y - t_x)^2 - sum_i (y_i - x_i)^2."""
        v = self.log_map(y, x)
        return float(-self.metric_pair(v, v))

    def grad_world_function(self, y, x) -> np.ndarray:
        """Index-raised gradient in the first slot: -2 log_map(y, x)."""
        return -2.0 * self.log_map(y, x)

    def box_world_function(self, y, x) -> float:
        """d'Alembertian (first slot) of the world function; 2d on flat space."""
        self.check_inside(as_event(y), as_event(x))
        return 2.0 * self.dim

    def transport_weight(self, y, x) -> float:
        """(1/2) box Gamma - d; identically zero on the flat backend."""
        return 0.5 * self.box_world_function(y, x) - self.dim

    # -- causal structure ---------------------------------------------------

    def causal_relation(self, y, x) -> str:
        v = self.log_map(y, x)
        gamma = float(-self.metric_pair(v, v))
        if np.all(v == 0.0):
            return EQUAL
        if gamma < 0.0:
            return SPACELIKE
        future = v[0] > 0.0
        if gamma == 0.0:
            return LIGHTLIKE_FUTURE if future else LIGHTLIKE_PAST
        return STRICT_FUTURE if future else STRICT_PAST

    def in_causal_cone(self, y, x, sign: int) -> bool:
        """True if y lies in J_+(x) (sign=+1) or J_-(x) (sign=-1)."""
        rel = self.causal_relation(y, x)
        if rel == EQUAL:
            return True
        if sign > 0:
            return rel in (STRICT_FUTURE, LIGHTLIKE_FUTURE)
        return rel in (STRICT_PAST, LIGHTLIKE_PAST)


def minkowski(dim: int = 2, box=None) -> SpacetimeModel:
    """Convenience constructor; default box is [-4, 4]^dim."""
    if box is None:
        box = [[-4.0, 4.0]] * dim
    return SpacetimeModel(dim=dim, box=np.asarray(box, dtype=float))


# free-function forms mirroring the operation names

def world_function(model, y, x):
    return model.world_function(y, x)


def grad_world_function(model, y, x):
    return model.grad_world_function(y, x)


def box_world_function(model, y, x):
    return model.box_world_function(y, x)


def log_map(model, y, x):
    return model.log_map(y, x)


def exp_map(model, v, x):
    return model.exp_map(v, x)


def causal_relation(model, y, x):
    return model.causal_relation(y, x)
