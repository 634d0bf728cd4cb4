"""Periodic voxel fields and the normalized reductions used throughout.

Fields are plain :class:`numpy.ndarray` objects in float64:

* scalar field: shape ``(n1, n2, n3)``
* vector field with ``K`` components: shape ``(K, n1, n2, n3)``
  (component-planar, so each component is one contiguous block and the
  Fourier transforms batch over the leading axis)

All reductions are normalized by the voxel count ``n1*n2*n3``; this is the
inner product under which the shift and extension operators in
:mod:`fracflow.operators` have the adjoints they are documented to have.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NonFiniteFieldError, ShapeMismatchError

__all__ = [
    "GridDims",
    "as_direction",
    "grid_shape",
    "check_same_shape",
    "inner_product",
    "norm",
    "mean_field",
    "pointwise_norm",
]


@dataclass(frozen=True)
class GridDims:
    """Voxel counts per axis and the (cubic) voxel edge length ``h``."""

    n1: int
    n2: int
    n3: int
    h: float = 1.0

    def __post_init__(self):
        for name in ("n1", "n2", "n3"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"voxel spacing h must be positive, got {self.h!r}")

    @property
    def shape(self):
        return (self.n1, self.n2, self.n3)

    @property
    def size(self):
        return self.n1 * self.n2 * self.n3

    @property
    def lengths(self):
        """Physical cell edge lengths ``(L1, L2, L3)``."""
        return (self.n1 * self.h, self.n2 * self.h, self.n3 * self.h)

    @classmethod
    def of(cls, field, h=1.0):
        """Dimensions of a scalar or multi-component field."""
        return cls(*grid_shape(field), h=h)


def grid_shape(field):
    """The trailing three (spatial) axes of a field."""
    shape = np.shape(field)
    if len(shape) < 3:
        raise ShapeMismatchError(f"expected a voxel field with >= 3 axes, got shape {shape}")
    return tuple(shape[-3:])


def check_same_shape(*fields):
    """Raise :class:`ShapeMismatchError` unless all fields have equal shapes."""
    first = np.shape(fields[0])
    for other in fields[1:]:
        if np.shape(other) != first:
            raise ShapeMismatchError(f"field shapes differ: {first} vs {np.shape(other)}")


def as_direction(vector, normalize=True):
    """Validate a mean crack normal and return it as a unit 3-vector.

    Parameters
    ----------
    vector : array_like, shape (3,)
        Candidate direction.
    normalize : bool
        If False, the vector must already have unit length (within 1e-12).
    """
    d = np.asarray(vector, dtype=float).reshape(-1)
    if d.shape != (3,):
        raise ValueError(f"a direction needs exactly 3 components, got {d.shape[0]}")
    if not np.all(np.isfinite(d)):
        raise NonFiniteFieldError("direction has non-finite components")
    length = np.sqrt(d @ d)
    if length == 0.0:
        raise ValueError("direction must be non-zero")
    if normalize:
        return d / length
    if abs(length - 1.0) > 1e-12:
        raise ValueError(f"direction is not a unit vector (norm {length!r})")
    return d


def _voxel_count(a):
    n1, n2, n3 = grid_shape(a)
    return n1 * n2 * n3


def inner_product(a, b, deterministic=True):
    """Normalized inner product ``(1/N) sum_voxels sum_components a*b``.

    With ``deterministic=True`` the sum is numpy's fixed-order pairwise
    reduction of the elementwise product; otherwise a BLAS dot product is
    used, which avoids a temporary but whose summation order depends on
    the BLAS build.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    check_same_shape(a, b)
    if deterministic:
        total = np.add.reduce(np.multiply(a, b).reshape(-1))
    else:
        total = np.vdot(a.reshape(-1), b.reshape(-1))
    return float(total) / _voxel_count(a)


def norm(a, deterministic=True):
    """Normalized L2 norm ``sqrt(<a, a>)``."""
    return float(np.sqrt(inner_product(a, a, deterministic=deterministic)))


def mean_field(a):
    """Componentwise voxel average; shape ``(K,)`` for a K-component field."""
    a = np.asarray(a)
    grid_shape(a)
    if a.ndim == 3:
        return np.asarray(a.mean())
    return a.reshape(a.shape[0], -1).mean(axis=1)


def pointwise_norm(a):
    """Per-voxel Euclidean norm over the components of a vector field."""
    a = np.asarray(a)
    grid_shape(a)
    if a.ndim == 3:
        return np.abs(a)
    return np.sqrt(np.einsum("c...,c...->...", a, a))
