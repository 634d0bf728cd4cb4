"""Matrix-free finite-difference operators of the combinatorial max-flow scheme.

A flow field ``v`` (shape ``(3, n1, n2, n3)``) stores at voxel ``[i,j,k]``
the fluxes through the three faces on the positive side of that voxel.
All index arithmetic is periodic. Along an axis with a single voxel every
shift is the identity and every difference vanishes.

Adjoint relations, with respect to :func:`fracflow.grid.inner_product`:

* ``shift_forward`` is the adjoint (and inverse) of ``shift_back``
* ``-div_minus`` is the adjoint of ``grad_plus``
* ``restrict_Astar`` is the adjoint and left inverse of ``extend_A``
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NegativeResistanceError, ShapeMismatchError
from .grid import GridDims, grid_shape

__all__ = [
    "OperatorContext",
    "div_minus",
    "grad_plus",
    "shift_back",
    "shift_forward",
    "extend_A",
    "restrict_Astar",
    "constraint_violation",
]

_SQRT_HALF = np.sqrt(0.5)


def _vector(v, components=3):
    v = np.asarray(v, dtype=float)
    if v.ndim != 4 or v.shape[0] != components:
        raise ShapeMismatchError(
            f"expected a {components}-component field of shape ({components}, n1, n2, n3), got {v.shape}"
        )
    return v


def _scalar(phi):
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 3:
        raise ShapeMismatchError(f"expected a scalar field of shape (n1, n2, n3), got {phi.shape}")
    return phi


@dataclass(frozen=True)
class OperatorContext:
    """Grid dimensions bound to the operators, for callers that want shape checks.

    The free functions in this module infer dimensions from their inputs;
    the context only adds an explicit check against a known grid.
    """

    dims: GridDims

    def check(self, field):
        if grid_shape(field) != self.dims.shape:
            raise ShapeMismatchError(
                f"field grid {grid_shape(field)} does not match context grid {self.dims.shape}"
            )
        return field

    def div_minus(self, v):
        return div_minus(self.check(v))

    def grad_plus(self, phi):
        return grad_plus(self.check(phi))

    def shift_back(self, v):
        return shift_back(self.check(v))

    def shift_forward(self, v):
        return shift_forward(self.check(v))

    def extend_A(self, v):
        return extend_A(self.check(v))

    def restrict_Astar(self, w):
        return restrict_Astar(self.check(w))


def div_minus(v):
    """Backward divergence: ``sum_c v_c[x] - v_c[x - e_c]``."""
    v = _vector(v)
    out = v.sum(axis=0)
    for c in range(3):
        out -= np.roll(v[c], 1, axis=c)
    return out


def grad_plus(phi):
    """Forward-difference gradient: component ``c`` is ``phi[x + e_c] - phi[x]``."""
    phi = _scalar(phi)
    out = np.empty((3,) + phi.shape)
    for c in range(3):
        np.subtract(np.roll(phi, -1, axis=c), phi, out=out[c])
    return out


def shift_back(v):
    """Component ``c`` of the output at ``x`` is ``v_c[x - e_c]``."""
    v = _vector(v)
    return np.stack([np.roll(v[c], 1, axis=c) for c in range(3)])


def shift_forward(v):
    """Component ``c`` of the output at ``x`` is ``v_c[x + e_c]``."""
    v = _vector(v)
    return np.stack([np.roll(v[c], -1, axis=c) for c in range(3)])


def extend_A(v):
    """Isometric embedding ``v -> [v; S v] / sqrt(2)`` into six components."""
    v = _vector(v)
    out = np.empty((6,) + v.shape[1:])
    for c in range(3):
        np.multiply(v[c], _SQRT_HALF, out=out[c])
        np.multiply(np.roll(v[c], 1, axis=c), _SQRT_HALF, out=out[3 + c])
    return out


def restrict_Astar(w):
    """Adjoint of :func:`extend_A`: ``[w1; w2] -> (w1 + S* w2) / sqrt(2)``."""
    w = _vector(w, components=6)
    out = np.empty((3,) + w.shape[1:])
    for c in range(3):
        np.add(w[c], np.roll(w[3 + c], -1, axis=c), out=out[c])
    out *= _SQRT_HALF
    return out


def constraint_violation(v, gamma):
    """Per-voxel excess ``max(0, |v|^2 + |S v|^2 - 2 gamma^2)`` of the flow bound."""
    v = _vector(v)
    gamma = _scalar(gamma)
    if v.shape[1:] != gamma.shape:
        raise ShapeMismatchError(f"flow grid {v.shape[1:]} does not match gamma grid {gamma.shape}")
    if np.any(gamma < 0):
        raise NegativeResistanceError("crack resistance must be non-negative")
    sv = shift_back(v)
    load = np.einsum("c...,c...->...", v, v) + np.einsum("c...,c...->...", sv, sv)
    return np.maximum(load - 2.0 * gamma**2, 0.0)
