"""Damped ADMM with adaptive penalty for the effective crack energy.

The discrete problem is

    minimize  (1/N) sum_x gamma[x] |xi[x]|   over 6-component fields xi
    subject to  A* xi = xi_bar + grad_plus(phi)  for some scalar phi,

split as ``f(xi) + g(e)`` with ``xi = e``: ``f`` is the indicator of the
compatible set (handled by :func:`fracflow.spectral.project_compatible`)
and ``g`` is the gamma-weighted norm (handled through the projection onto
the pointwise gamma-balls, via Moreau's identity). ``v`` is the
multiplier; at a solution ``v = A u`` where ``u`` is a divergence-free
flow with ``|A u| <= gamma`` whose mean flux along ``xi_bar`` equals the
optimal value.
"""

from dataclasses import dataclass, field, replace
import time

import numpy as np

from . import _kernels
from .exceptions import DivergenceError, NegativeResistanceError, NonFiniteFieldError
from .grid import as_direction, inner_product, mean_field, norm, pointwise_norm
from .operators import constraint_violation, div_minus, restrict_Astar
from .spectral import SpectralPlan, constant_extension, project_compatible_linear

__all__ = [
    "PENALTY_STRATEGIES",
    "SolverConfig",
    "AdmmState",
    "Diagnostics",
    "SolveResult",
    "project_ball",
    "initial_state",
    "admm_iterate",
    "penalty_next",
    "convergence_residual",
    "diagnostics",
    "crack_energy",
    "solve",
]

PENALTY_STRATEGIES = ("constant", "barzilai_borwein", "lorenz_tran_dinh", "residual_balancing")

_PENALTY_ALIASES = {
    "bb": "barzilai_borwein",
    "ltd": "lorenz_tran_dinh",
    "rb": "residual_balancing",
    "residual": "residual_balancing",
    "const": "constant",
}

# denominator guard of the convergence residual
RESIDUAL_GUARD = 1e-30
BACKENDS = ("auto", "numpy", "numba")
# default lower penalty bound, relative to the smallest positive gamma
RHO_FLOOR = 0.05


@dataclass(frozen=True)
class SolverConfig:
    """Settings of the damped ADMM.

    ``rho0``, ``rho_min`` and ``rho_max`` may be left as ``None``; they are
    then derived from the crack-resistance field by :meth:`resolve`:
    ``rho0`` is the smallest positive gamma, ``rho_min`` a twentieth of it
    and ``rho_max`` 1e6 times the mean gamma. The lower bound matters for
    the Barzilai-Borwein rule, which otherwise drives the penalty towards
    zero within a few iterations on high-contrast fields.
    """

    damping: float = 0.25
    tol: float = 1e-4
    max_iter: int = 10000
    penalty: str = "barzilai_borwein"
    rho0: float = None
    rho_min: float = None
    rho_max: float = None
    check_every: int = 1
    deterministic: bool = False
    bb_eps: float = 1e-12
    rb_mu: float = 10.0
    rb_tau: float = 2.0
    real_fft: bool = True
    workers: int = None
    backend: str = "auto"

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError(f"damping must lie in (0, 1), got {self.damping}")
        if not self.tol > 0.0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if int(self.check_every) != self.check_every or self.check_every < 1:
            raise ValueError(f"check_every must be a positive integer, got {self.check_every}")
        name = _PENALTY_ALIASES.get(self.penalty, self.penalty)
        if name not in PENALTY_STRATEGIES:
            raise ValueError(f"unknown penalty strategy {self.penalty!r}; choose from {PENALTY_STRATEGIES}")
        object.__setattr__(self, "penalty", name)
        for key in ("rho0", "rho_min", "rho_max"):
            value = getattr(self, key)
            if value is not None and not (np.isfinite(value) and value > 0):
                raise ValueError(f"{key} must be positive, got {value}")
        if self.rb_tau <= 1.0 or self.rb_mu <= 1.0:
            raise ValueError("residual balancing needs rb_mu > 1 and rb_tau > 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if self.backend == "numba" and not _kernels.HAVE_NUMBA:
            raise ValueError("backend 'numba' requested but numba is not installed")

    @property
    def fused(self):
        """True if iterations run through the fused numba loops."""
        if self.backend == "auto":
            return _kernels.HAVE_NUMBA and not self.deterministic
        return self.backend == "numba"

    def resolve(self, gamma):
        """Return a copy with concrete penalty bounds for this gamma field."""
        gamma = np.asarray(gamma)
        gbar = float(gamma.mean())
        gmin = float(gamma[gamma > 0].min())
        rho_min = self.rho_min
        if rho_min is None:
            rho_min = RHO_FLOOR * gmin
            if self.rho0 is not None:
                rho_min = min(rho_min, self.rho0)
        rho_max = self.rho_max if self.rho_max is not None else 1e6 * gbar
        if self.rho0 is not None:
            rho0 = self.rho0
        else:
            rho0 = min(max(rho_min, gmin), rho_max)
        if not rho_min <= rho0 <= rho_max:
            raise ValueError(f"need rho_min <= rho0 <= rho_max, got {rho_min}, {rho0}, {rho_max}")
        return replace(self, rho0=float(rho0), rho_min=float(rho_min), rho_max=float(rho_max))

    def as_dict(self):
        return {
            "damping": self.damping,
            "tol": self.tol,
            "max_iter": self.max_iter,
            "penalty": self.penalty,
            "rho0": self.rho0,
            "rho_min": self.rho_min,
            "rho_max": self.rho_max,
            "check_every": self.check_every,
            "deterministic": self.deterministic,
            "backend": "numba" if self.fused else "numpy",
        }


@dataclass
class AdmmState:
    """Iterate of the damped ADMM.

    ``xi``, ``e``, ``v`` hold ``xi^k``, ``e^k``, ``v^k``; after a step,
    ``xi_half`` is the undamped projection of that step and ``e_prev``,
    ``v_prev`` are the iterates it started from. ``objective`` is
    ``g(e)`` as evaluated inside the step. ``stats`` carries the sums the
    fused backend accumulates during the step (see :mod:`fracflow._kernels`);
    it is None on the numpy path.
    """

    xi: np.ndarray
    e: np.ndarray
    v: np.ndarray
    rho: float
    iteration: int = 0
    xi_half: np.ndarray = None
    e_prev: np.ndarray = None
    v_prev: np.ndarray = None
    objective: float = None
    stats: np.ndarray = None


@dataclass(frozen=True)
class Diagnostics:
    primal_value: float
    dual_value: float
    duality_gap: float
    divergence_norm: float
    flow_norm: float
    feasibility_violation: float


@dataclass
class SolveResult:
    gamma_eff: float
    iterations: int
    converged: bool
    residual: float
    residual_history: np.ndarray
    penalty_history: np.ndarray
    objective_history: np.ndarray
    xi: np.ndarray
    e: np.ndarray
    v: np.ndarray
    u: np.ndarray
    diagnostics: Diagnostics
    config: SolverConfig
    wall_time: float = 0.0
    history_iterations: np.ndarray = None
    extras: dict = field(default_factory=dict)

    @property
    def duality_gap(self):
        return self.diagnostics.duality_gap

    @property
    def divergence_norm(self):
        return self.diagnostics.divergence_norm

    @property
    def feasibility_violation(self):
        return self.diagnostics.feasibility_violation


def _check_gamma(gamma):
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 3:
        raise ValueError(f"gamma must be a scalar field of shape (n1, n2, n3), got {gamma.shape}")
    if not np.all(np.isfinite(gamma)):
        raise NonFiniteFieldError("gamma contains non-finite values")
    if np.any(gamma < 0):
        raise NegativeResistanceError("crack resistance must be non-negative")
    return gamma


def project_ball(w, gamma):
    """Pointwise projection of a 6-component field onto the balls ``|w| <= gamma``."""
    w = np.asarray(w, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise NegativeResistanceError("crack resistance must be non-negative")
    nrm = pointwise_norm(w)
    scale = np.ones_like(nrm)
    outside = nrm > gamma
    np.divide(gamma, nrm, out=scale, where=outside)
    return w * scale


def initial_state(gamma, direction, cfg):
    """Start from ``e = xi = A xi_bar`` and ``v = gamma A xi_bar``.

    ``v`` is then a subgradient of the gamma-weighted norm at ``e``, as it
    is after every regular step, so the first residual is meaningful. For a
    homogeneous gamma this is already the solution.
    """
    gamma = np.asarray(gamma, dtype=float)
    cfg = cfg if cfg.rho0 is not None else cfg.resolve(gamma)
    a = constant_extension(direction)[:, None, None, None]
    shape = (6,) + gamma.shape
    xi = np.broadcast_to(a, shape).copy()
    e = xi.copy()
    v = gamma * xi
    return AdmmState(xi=xi, e=e, v=v, rho=float(cfg.rho0))


def admm_iterate(state, gamma, direction, cfg, plan=None):
    """One damped ADMM step followed by the penalty update.

    ``cfg`` must carry concrete penalty bounds (see :meth:`SolverConfig.resolve`).
    """
    rho = state.rho
    delta = cfg.damping
    if plan is None:
        plan = SpectralPlan(gamma.shape, real=cfg.real_fft, workers=cfg.workers)
    e, v = state.e, state.v
    if cfg.fused:
        return _fused_iterate(state, gamma, direction, cfg, plan)
    xi_bar_ext = constant_extension(direction)[:, None, None, None]

    # xi^{k+1/2} = A xi_bar - (1/rho) (Id - AA* + A Gamma A*)(v - rho e)
    q = e * (-rho)
    q += v
    if not np.isfinite(q.sum()):
        raise DivergenceError(f"non-finite iterate entering iteration {state.iteration + 1}", state.iteration + 1)
    xi_half = project_compatible_linear(q, plan)
    xi_half *= -1.0 / rho
    xi_half += xi_bar_ext

    xi = xi_half * (2.0 * (1.0 - delta))
    if delta != 0.5:
        xi -= (1.0 - 2.0 * delta) * e

    # e^{k+1} = [z - P_C(z)] / rho with z = v + rho xi^{k+1}
    z = xi * rho
    z += v
    znorm = pointwise_norm(z)
    excess = np.maximum(znorm - gamma, 0.0)
    objective = float(np.add.reduce((gamma * excess).reshape(-1))) / (rho * gamma.size)
    if not np.isfinite(objective):
        raise DivergenceError(f"non-finite iterate at iteration {state.iteration + 1}", state.iteration + 1)
    scale = np.ones_like(znorm)
    outside = znorm > gamma
    np.divide(gamma, znorm, out=scale, where=outside)
    pz = z * scale
    e_new = z - pz
    e_new *= 1.0 / rho
    # v^{k+1} = v^k + rho (xi^{k+1} - e^{k+1})
    v_new = xi - e_new
    v_new *= rho
    v_new += v

    new = AdmmState(
        xi=xi,
        e=e_new,
        v=v_new,
        rho=rho,
        iteration=state.iteration + 1,
        xi_half=xi_half,
        e_prev=e,
        v_prev=v,
        objective=objective,
    )
    new.rho = penalty_next(new, cfg)
    return new


def _fused_iterate(state, gamma, direction, cfg, plan):
    rho = state.rho
    e, v = state.e, state.v
    u, total = _kernels.restrict_q(v, e, rho)
    if not np.isfinite(total):
        raise DivergenceError(f"non-finite iterate entering iteration {state.iteration + 1}", state.iteration + 1)
    gu = plan.gamma_apply(u)
    base = constant_extension(direction)
    xi_half, xi, e_new, v_new, stats = _kernels.fused_tail(v, e, gu, u, gamma, base, rho, cfg.damping)
    objective = stats[_kernels.STAT_OBJECTIVE] / (rho * gamma.size)
    if not np.isfinite(objective) or not np.isfinite(stats[_kernels.STAT_VV]):
        raise DivergenceError(f"non-finite iterate at iteration {state.iteration + 1}", state.iteration + 1)
    new = AdmmState(
        xi=xi,
        e=e_new,
        v=v_new,
        rho=rho,
        iteration=state.iteration + 1,
        xi_half=xi_half,
        e_prev=e,
        v_prev=v,
        objective=float(objective),
        stats=stats,
    )
    new.rho = penalty_next(new, cfg)
    return new


def _stat_products(state):
    """Normalized inner products needed by the penalty rules, from fused sums or fields."""
    st = state.stats
    n = state.e[0].size
    K = _kernels
    return {
        "dede": st[K.STAT_DEDE] / n,
        "dvde": st[K.STAT_DVDE] / n,
        "dvdv": st[K.STAT_DVDV] / n,
        "ee": st[K.STAT_EE] / n,
        "vv": st[K.STAT_VV] / n,
        "primal": st[K.STAT_PRIMAL] / n,
    }


def penalty_next(state, cfg):
    """Penalty for the next step, clamped to ``[rho_min, rho_max]``.

    Degenerate quotients (vanishing increments, non-positive curvature)
    keep the current penalty.
    """
    rho = state.rho
    det = cfg.deterministic
    strategy = cfg.penalty
    fused = state.stats is not None and state.e_prev is not None
    products = _stat_products(state) if fused else None
    if strategy == "barzilai_borwein" and state.e_prev is not None:
        if fused:
            den, num, dvdv, scale = products["dede"], products["dvde"], products["dvdv"], products["ee"]
        else:
            de = state.e - state.e_prev
            dv = state.v - state.v_prev
            den = inner_product(de, de, det)
            num = inner_product(dv, de, det)
            dvdv = inner_product(dv, dv, det)
            scale = inner_product(state.e, state.e, det)
        if den > cfg.bb_eps * scale and num > cfg.bb_eps * np.sqrt(den * dvdv):
            rho = num / den
    elif strategy == "lorenz_tran_dinh":
        if fused:
            e_norm, v_norm = np.sqrt(products["ee"]), np.sqrt(products["vv"])
        else:
            e_norm = norm(state.e, det)
            v_norm = norm(state.v, det)
        if e_norm > 0.0 and v_norm > 0.0:
            rho = v_norm / e_norm
    elif strategy == "residual_balancing" and state.e_prev is not None:
        if fused:
            primal = np.sqrt(products["primal"])
            dual = rho * np.sqrt(products["dede"])
        else:
            primal = norm(state.xi - state.e, det)
            dual = rho * norm(state.e - state.e_prev, det)
        if primal > cfg.rb_mu * dual:
            rho = rho * cfg.rb_tau
        elif dual > cfg.rb_mu * primal:
            rho = rho / cfg.rb_tau
    if not np.isfinite(rho):
        rho = state.rho
    return float(min(max(rho, cfg.rho_min), cfg.rho_max))


def convergence_residual(state, deterministic=True):
    """``||e^k - xi^{k+1/2}|| / max(||mean(v)||, guard)``."""
    if state.xi_half is None:
        return float("inf")
    if state.stats is not None:
        n = state.e[0].size
        diff = float(np.sqrt(state.stats[_kernels.STAT_RESIDUAL] / n))
        mean_v = float(np.linalg.norm(state.stats[_kernels.STAT_VMEAN:_kernels.STAT_VMEAN + 6] / n))
        return diff / max(mean_v, RESIDUAL_GUARD)
    e = state.e_prev if state.e_prev is not None else state.e
    diff = norm(e - state.xi_half, deterministic)
    mean_v = float(np.linalg.norm(mean_field(state.v)))
    return diff / max(mean_v, RESIDUAL_GUARD)


def crack_energy(gamma, xi):
    """``(1/N) sum gamma |xi|`` for a 6-component field."""
    gamma = np.asarray(gamma, dtype=float)
    return float(np.add.reduce((gamma * pointwise_norm(xi)).reshape(-1))) / gamma.size


def diagnostics(state, gamma, direction, deterministic=True):
    """Primal/dual values and feasibility measures of the current multiplier.

    The physical flow is ``u = A* v``; the dual value is its mean flux
    along ``direction`` and the primal value is ``g(e)``.
    """
    gamma = np.asarray(gamma, dtype=float)
    d = as_direction(direction)
    u = restrict_Astar(state.v)
    dual = float(mean_field(u) @ d)
    primal = crack_energy(gamma, state.e)
    div = norm(div_minus(u), deterministic)
    flow = norm(u, deterministic)
    violation = float(constraint_violation(u, gamma).max())
    return Diagnostics(
        primal_value=primal,
        dual_value=dual,
        duality_gap=abs(primal - dual),
        divergence_norm=div,
        flow_norm=flow,
        feasibility_violation=violation,
    )


def solve(gamma, direction, cfg=None, state=None, callback=None):
    """Effective crack energy of a periodic voxel microstructure.

    Parameters
    ----------
    gamma : ndarray, shape (n1, n2, n3)
        Non-negative crack resistance per voxel; at least one entry > 0.
    direction : array_like, shape (3,)
        Mean crack normal; normalized if necessary.
    cfg : SolverConfig, optional
    state : AdmmState, optional
        Warm start; defaults to :func:`initial_state`.
    callback : callable, optional
        Called as ``callback(state, residual)`` at every residual check.

    Returns
    -------
    SolveResult
        ``converged`` is False when ``max_iter`` is exhausted; the result
        is still populated from the last iterate.
    """
    start = time.perf_counter()
    gamma = _check_gamma(gamma)
    if not np.any(gamma > 0):
        raise ValueError("at least one voxel must have positive crack resistance")
    direction = as_direction(direction)
    cfg = (cfg or SolverConfig()).resolve(gamma)
    plan = SpectralPlan(gamma.shape, real=cfg.real_fft, workers=cfg.workers)
    if state is None:
        state = initial_state(gamma, direction, cfg)

    checked, residuals, penalties, objectives = [], [], [], []
    residual = float("inf")
    converged = False
    for k in range(cfg.max_iter):
        used_rho = state.rho
        state = admm_iterate(state, gamma, direction, cfg, plan)
        last = k == cfg.max_iter - 1
        if state.iteration % cfg.check_every == 0 or last:
            residual = convergence_residual(state, cfg.deterministic)
            checked.append(state.iteration)
            residuals.append(residual)
            penalties.append(used_rho)
            objectives.append(state.objective)
            if callback is not None:
                callback(state, residual)
            if residual <= cfg.tol:
                converged = True
                break

    diag = diagnostics(state, gamma, direction, cfg.deterministic)
    return SolveResult(
        gamma_eff=diag.primal_value,
        iterations=state.iteration,
        converged=converged,
        residual=residual,
        residual_history=np.asarray(residuals),
        penalty_history=np.asarray(penalties),
        objective_history=np.asarray(objectives),
        xi=state.xi,
        e=state.e,
        v=state.v,
        u=restrict_Astar(state.v),
        diagnostics=diag,
        config=cfg,
        wall_time=time.perf_counter() - start,
        history_iterations=np.asarray(checked, dtype=int),
    )
