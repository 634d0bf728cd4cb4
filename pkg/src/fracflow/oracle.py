"""Reference values for the effective crack energy.

:func:`pdhg_solve` attacks the same discrete minimum-cut problem as
:func:`fracflow.admm.solve` with a different first-order method. The
compatible set is parameterized explicitly,

    xi = A xi_bar + B(phi, eta),   B(phi, eta) = A grad_plus(phi) + (Id - A A*) eta,

so every primal iterate is feasible and its objective is an upper bound
on the discrete optimum. The saddle-point problem

    min_x max_y  <A xi_bar + B x, y> - indicator_{|y| <= gamma}(y)

is solved with the primal-dual hybrid gradient (Chambolle-Pock)
iteration. Only the finite-difference operators are shared with the
ADMM; no Fourier transforms are involved.

A lower bound comes from the dual iterate, turned into an admissible
flow by a conjugate-gradient Poisson solve and a uniform rescaling.
:func:`planar_cut_bound` evaluates flat cuts, which are feasible
competitors and thus bound the effective energy from above.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .exceptions import NegativeResistanceError
from .grid import as_direction, inner_product
from .operators import div_minus, extend_A, grad_plus, restrict_Astar

__all__ = [
    "PdhgConfig",
    "PdhgResult",
    "pdhg_operator",
    "pdhg_adjoint",
    "operator_norm_estimate",
    "pdhg_solve",
    "planar_cut_bound",
]

_DEFAULT_STEP = 1.0 / (2.0 * np.sqrt(3.0) + 1.0)


@dataclass(frozen=True)
class PdhgConfig:
    """Step sizes and stopping rule of the PDHG oracle.

    ``sigma * tau * ||B||^2 < 1`` is required; ``||B||^2 <= 12`` on any
    grid, so the defaults ``sigma = tau = 1 / (2 sqrt(3) + 1)`` are
    admissible. ``balance`` rescales the pair to ``(sigma / balance,
    tau * balance)``, which keeps the product fixed.

    Every ``check_every`` iterations the primal objective (an upper
    bound) and a certified dual value (a lower bound) are evaluated; the
    run stops once ``best_upper - best_lower <= tol * best_upper``.
    """

    sigma: float = _DEFAULT_STEP
    tau: float = _DEFAULT_STEP
    balance: float = 1.0
    max_iter: int = 100000
    tol: float = 1e-5
    check_every: int = 100
    cg_rtol: float = 1e-10

    def __post_init__(self):
        if self.sigma <= 0 or self.tau <= 0 or self.balance <= 0:
            raise ValueError("step sizes and balance must be positive")
        if self.sigma * self.tau * 12.0 >= 1.0:
            raise ValueError("sigma * tau * 12 must be below 1 for guaranteed convergence")
        if self.check_every < 1 or self.max_iter < 1:
            raise ValueError("need check_every >= 1 and max_iter >= 1")


@dataclass
class PdhgResult:
    """Outcome of :func:`pdhg_solve`.

    ``gamma_eff`` is the smallest primal objective seen and ``lower`` the
    largest certified dual value, so the discrete optimum lies in
    ``[lower, gamma_eff]``.
    """

    gamma_eff: float
    lower: float
    iterations: int
    converged: bool
    upper_history: np.ndarray
    lower_history: np.ndarray

    @property
    def gap(self):
        return (self.gamma_eff - self.lower) / self.gamma_eff if self.gamma_eff > 0 else 0.0

    def __float__(self):
        return float(self.gamma_eff)


def pdhg_operator(phi, eta):
    """``B(phi, eta) = A grad_plus(phi) + (Id - A A*) eta``."""
    out = extend_A(grad_plus(phi) - restrict_Astar(eta))
    out += eta
    return out


def pdhg_adjoint(y):
    """Adjoint of :func:`pdhg_operator`: ``(-div_minus(A* y), (Id - A A*) y)``."""
    u = restrict_Astar(y)
    return -div_minus(u), y - extend_A(u)


def operator_norm_estimate(shape, iterations=200, seed=0):
    """Power iteration for ``||B||`` on a grid of the given shape."""
    rng = np.random.default_rng(seed)
    phi = rng.standard_normal(shape)
    eta = rng.standard_normal((6,) + tuple(shape))
    estimate = 0.0
    for _ in range(iterations):
        size = np.sqrt(inner_product(phi, phi) + inner_product(eta, eta))
        phi, eta = phi / size, eta / size
        phi, eta = pdhg_adjoint(pdhg_operator(phi, eta))
        estimate = np.sqrt(np.sqrt(inner_product(phi, phi) + inner_product(eta, eta)))
    return float(estimate)


def _pointwise_norm(w):
    return np.sqrt(np.einsum("c...,c...->...", w, w))


def _energy(gamma, xi):
    return float(np.add.reduce((gamma * _pointwise_norm(xi)).reshape(-1))) / gamma.size


class _DualBound:
    """Turns a dual iterate into a feasible flow and returns its value.

    ``u = A* y`` is made divergence-free by a conjugate-gradient Poisson
    solve and then scaled down uniformly until ``|A u| <= gamma`` holds
    everywhere. Voxels with ``gamma = 0`` and a non-zero flow force the
    bound to 0.
    """

    def __init__(self, gamma, direction, rtol):
        self.gamma = gamma
        self.direction = direction
        self.rtol = rtol
        shape = gamma.shape
        size = gamma.size

        def matvec(x):
            return -div_minus(grad_plus(x.reshape(shape))).reshape(-1)

        self.laplacian = LinearOperator((size, size), matvec=matvec, dtype=float)
        self.phi = np.zeros(size)

    def __call__(self, y):
        u = restrict_Astar(y)
        rhs = -div_minus(u).reshape(-1)
        self.phi, _ = cg(self.laplacian, rhs, x0=self.phi, rtol=self.rtol, maxiter=10 * rhs.size)
        u -= grad_plus(self.phi.reshape(self.gamma.shape))
        flow = _pointwise_norm(extend_A(u))
        if np.any((flow > 0) & (self.gamma <= 0)):
            return 0.0
        ratio = np.max(np.divide(flow, self.gamma, out=np.zeros_like(flow), where=self.gamma > 0))
        value = float(u.mean(axis=(1, 2, 3)) @ self.direction)
        return value / max(ratio, 1.0)


def pdhg_solve(gamma, direction, cfg=None):
    """Effective crack energy by primal-dual hybrid gradient iterations.

    Returns a :class:`PdhgResult`; ``float(result)`` is the best primal
    objective, an upper bound of the discrete optimum. ``converged`` is
    False if the certified gap did not close within ``max_iter``, which is
    the normal outcome for fields containing ``gamma = 0`` voxels.
    """
    cfg = cfg or PdhgConfig()
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 3:
        raise ValueError(f"gamma must be a scalar field, got shape {gamma.shape}")
    if np.any(gamma < 0):
        raise NegativeResistanceError("crack resistance must be non-negative")
    d = as_direction(direction)
    base = (np.concatenate([d, d]) * np.sqrt(0.5))[:, None, None, None]
    sigma = cfg.sigma / cfg.balance
    tau = cfg.tau * cfg.balance
    bound = _DualBound(gamma, d, cfg.cg_rtol)

    shape = gamma.shape
    phi = np.zeros(shape)
    eta = np.zeros((6,) + shape)
    phi_bar, eta_bar = phi, eta
    y = np.zeros((6,) + shape)

    upper, lower = [], []
    best_upper, best_lower = np.inf, 0.0
    converged = False
    k = 0
    while k < cfg.max_iter:
        y += sigma * (pdhg_operator(phi_bar, eta_bar) + base)
        nrm = _pointwise_norm(y)
        scale = np.ones_like(nrm)
        np.divide(gamma, nrm, out=scale, where=nrm > gamma)
        y *= scale

        g_phi, g_eta = pdhg_adjoint(y)
        phi_new = phi - tau * g_phi
        eta_new = eta - tau * g_eta
        phi_bar = 2.0 * phi_new - phi
        eta_bar = 2.0 * eta_new - eta
        phi, eta = phi_new, eta_new
        k += 1

        if k % cfg.check_every == 0 or k == cfg.max_iter:
            upper.append(_energy(gamma, pdhg_operator(phi, eta) + base))
            lower.append(bound(y))
            best_upper = min(best_upper, upper[-1])
            best_lower = max(best_lower, lower[-1])
            if best_upper - best_lower <= cfg.tol * best_upper:
                converged = True
                break

    return PdhgResult(
        gamma_eff=float(best_upper),
        lower=float(best_lower),
        iterations=k,
        converged=converged,
        upper_history=np.asarray(upper),
        lower_history=np.asarray(lower),
    )


def planar_cut_bound(gamma, axis):
    """Smallest layer-averaged gamma over the voxel layers normal to ``axis``.

    A flat cut through one layer of voxels is an admissible normal field
    for ``xi_bar`` along ``axis``, so this bounds the effective energy
    from above.
    """
    gamma = np.asarray(gamma, dtype=float)
    axis = "xyz".index(axis) if isinstance(axis, str) else int(axis)
    if axis not in (0, 1, 2):
        raise ValueError(f"axis must be 0, 1 or 2 (or x, y, z), got {axis}")
    others = tuple(a for a in range(3) if a != axis)
    return float(gamma.mean(axis=others).min())
