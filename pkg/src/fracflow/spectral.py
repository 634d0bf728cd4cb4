"""Fourier-space projection onto discrete gradient fields.

``Gamma = grad_plus (div_minus grad_plus)^+ div_minus`` is diagonal in
Fourier space. With the forward-difference symbol

    k_j(n) = exp(2 pi i n_j / N_j) - 1

the backward divergence has symbol ``-conj(k)``, the periodic Laplacian
``-|k|^2``, and at every non-zero frequency ``Gamma`` acts as the rank-one
Hermitian projector ``k k^H / |k|^2``. The zero frequency is mapped to 0.
The voxel size cancels, so the symbols do not depend on ``h``.
"""

import os

import numpy as np
import scipy.fft

from .exceptions import NonFiniteFieldError, ShapeMismatchError
from .grid import GridDims, as_direction, grid_shape
from .operators import extend_A, restrict_Astar

__all__ = [
    "SpectralPlan",
    "default_workers",
    "gamma_apply",
    "project_compatible",
    "project_compatible_linear",
    "constant_extension",
]


def default_workers():
    """Thread count for the FFTs: ``$FRACFLOW_THREADS`` or all cores."""
    env = os.environ.get("FRACFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


class SpectralPlan:
    """Precomputed Fourier symbols for one grid.

    Parameters
    ----------
    dims : GridDims or tuple of int
        Grid the plan applies to.
    real : bool
        Use real-to-complex transforms (half spectrum). ``False`` selects
        the full complex reference path.
    workers : int, optional
        Threads handed to :mod:`scipy.fft`; defaults to :func:`default_workers`.
    """

    def __init__(self, dims, real=True, workers=None):
        if not isinstance(dims, GridDims):
            dims = GridDims(*dims)
        self.dims = dims
        self.real = bool(real)
        self.workers = default_workers() if workers is None else int(workers)

        shape = dims.shape
        symbols = []
        for axis, n in enumerate(shape):
            if self.real and axis == 2:
                freq = np.arange(n // 2 + 1)
            else:
                freq = np.arange(n)
            k = np.exp(2j * np.pi * freq / n) - 1.0
            view = [1, 1, 1]
            view[axis] = k.size
            symbols.append(k.reshape(view))
        self.symbols = symbols
        norm2 = sum(np.abs(k) ** 2 for k in symbols)
        with np.errstate(divide="ignore"):
            inv = np.where(norm2 > 0.0, 1.0 / np.where(norm2 > 0.0, norm2, 1.0), 0.0)
        self.inv_norm2 = inv

    @property
    def spectral_shape(self):
        return self.inv_norm2.shape

    def _forward(self, fields):
        if self.real:
            return scipy.fft.rfftn(fields, axes=(1, 2, 3), workers=self.workers)
        return scipy.fft.fftn(fields, axes=(1, 2, 3), workers=self.workers)

    def _inverse(self, spectra):
        if self.real:
            return scipy.fft.irfftn(spectra, s=self.dims.shape, axes=(1, 2, 3), workers=self.workers)
        return scipy.fft.ifftn(spectra, axes=(1, 2, 3), workers=self.workers).real

    def gamma_apply(self, w3):
        """Project a 3-component field onto discrete gradients ``grad_plus(phi)``."""
        w3 = np.asarray(w3, dtype=float)
        if w3.ndim != 4 or w3.shape[0] != 3:
            raise ShapeMismatchError(f"expected a (3, n1, n2, n3) field, got {w3.shape}")
        if grid_shape(w3) != self.dims.shape:
            raise ShapeMismatchError(f"field grid {grid_shape(w3)} does not match plan grid {self.dims.shape}")
        if not np.isfinite(w3.sum()):
            raise NonFiniteFieldError("gamma_apply received non-finite values")
        spec = self._forward(w3)
        k1, k2, k3 = self.symbols
        potential = np.conj(k1) * spec[0]
        potential += np.conj(k2) * spec[1]
        potential += np.conj(k3) * spec[2]
        potential *= self.inv_norm2
        spec[0] = k1 * potential
        spec[1] = k2 * potential
        spec[2] = k3 * potential
        return self._inverse(spec)


def _plan_for(field, plan):
    shape = grid_shape(field)
    if plan is None:
        return SpectralPlan(shape)
    if plan.dims.shape != shape:
        raise ShapeMismatchError(f"field grid {shape} does not match plan grid {plan.dims.shape}")
    return plan


def gamma_apply(w3, plan=None):
    """Functional form of :meth:`SpectralPlan.gamma_apply`."""
    return _plan_for(w3, plan).gamma_apply(w3)


def constant_extension(direction):
    """The six per-voxel values of ``A xi_bar`` for a constant field ``xi_bar``."""
    d = as_direction(direction)
    return np.concatenate([d, d]) * np.sqrt(0.5)


def project_compatible_linear(w, plan=None):
    """Linear part ``(Id - A A* + A Gamma A*) w`` of the compatible-set projector."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 4 or w.shape[0] != 6:
        raise ShapeMismatchError(f"expected a (6, n1, n2, n3) field, got {w.shape}")
    plan = _plan_for(w, plan)
    u = restrict_Astar(w)
    correction = plan.gamma_apply(u)
    correction -= u
    out = extend_A(correction)
    out += w
    return out


def project_compatible(w, direction, plan=None):
    """Orthogonal projection onto fields ``xi`` with ``A* xi = xi_bar + grad_plus(phi)``.

    Returns ``A xi_bar + (Id - A A* + A Gamma A*) w``.
    """
    out = project_compatible_linear(w, plan)
    out += constant_extension(direction)[:, None, None, None]
    return out
