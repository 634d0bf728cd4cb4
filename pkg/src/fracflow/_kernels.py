"""Fused voxel loops for the ADMM step (optional, needs numba).

One iteration then makes two passes over the fields around the Fourier
projection instead of some thirty numpy passes. The loops run in a fixed
sequential order, so results are reproducible, but their sums are not the
pairwise ones of :func:`fracflow.grid.inner_product`; the solver uses the
numpy path whenever ``deterministic`` is requested.
"""

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

HAVE_NUMBA = numba is not None

# layout of the statistics vector returned by fused_tail
STAT_OBJECTIVE = 0    # sum gamma * max(|z| - gamma, 0)
STAT_RESIDUAL = 1     # sum |e - xi_half|^2
STAT_DEDE = 2         # sum |e_new - e|^2
STAT_DVDE = 3         # sum (v_new - v) . (e_new - e)
STAT_DVDV = 4         # sum |v_new - v|^2
STAT_EE = 5           # sum |e_new|^2
STAT_VV = 6           # sum |v_new|^2
STAT_PRIMAL = 7       # sum |xi - e_new|^2
STAT_VMEAN = 8        # 6 entries: sum of each v_new component
STAT_SIZE = 14

_SQRT_HALF = np.sqrt(0.5)


def _restrict_q(v, e, rho):
    """``A* (v - rho e)`` and the sum of its entries (NaN-propagating)."""
    _, n1, n2, n3 = v.shape
    u = np.empty((3, n1, n2, n3))
    s = _SQRT_HALF
    total = 0.0
    for i in range(n1):
        ip = i + 1 if i + 1 < n1 else 0
        for j in range(n2):
            jp = j + 1 if j + 1 < n2 else 0
            for k in range(n3):
                kp = k + 1 if k + 1 < n3 else 0
                a = (v[0, i, j, k] - rho * e[0, i, j, k]) + (v[3, ip, j, k] - rho * e[3, ip, j, k])
                b = (v[1, i, j, k] - rho * e[1, i, j, k]) + (v[4, i, jp, k] - rho * e[4, i, jp, k])
                c = (v[2, i, j, k] - rho * e[2, i, j, k]) + (v[5, i, j, kp] - rho * e[5, i, j, kp])
                u[0, i, j, k] = s * a
                u[1, i, j, k] = s * b
                u[2, i, j, k] = s * c
                total += a + b + c
    return u, total


def _fused_tail(v, e, gu, u, gamma, base, rho, delta):
    """Everything after the Fourier projection, voxel by voxel.

    ``gu - u`` is the correction ``Gamma A* q - A* q``; ``A`` of it is
    formed on the fly from the voxel and its backward neighbours.
    """
    _, n1, n2, n3 = v.shape
    xi_half = np.empty_like(v)
    xi = np.empty_like(v)
    e_new = np.empty_like(v)
    v_new = np.empty_like(v)
    stats = np.zeros(STAT_SIZE)
    s = _SQRT_HALF
    a_coef = 2.0 * (1.0 - delta)
    b_coef = 1.0 - 2.0 * delta
    inv_rho = 1.0 / rho
    ac = np.empty(6)
    zz = np.empty(6)
    for i in range(n1):
        im = i - 1 if i > 0 else n1 - 1
        for j in range(n2):
            jm = j - 1 if j > 0 else n2 - 1
            for k in range(n3):
                km = k - 1 if k > 0 else n3 - 1
                ac[0] = s * (gu[0, i, j, k] - u[0, i, j, k])
                ac[1] = s * (gu[1, i, j, k] - u[1, i, j, k])
                ac[2] = s * (gu[2, i, j, k] - u[2, i, j, k])
                ac[3] = s * (gu[0, im, j, k] - u[0, im, j, k])
                ac[4] = s * (gu[1, i, jm, k] - u[1, i, jm, k])
                ac[5] = s * (gu[2, i, j, km] - u[2, i, j, km])
                znorm2 = 0.0
                for c in range(6):
                    vc = v[c, i, j, k]
                    ec = e[c, i, j, k]
                    lin = (vc - rho * ec) + ac[c]
                    xh = base[c] - lin * inv_rho
                    xc = a_coef * xh - b_coef * ec
                    xi_half[c, i, j, k] = xh
                    xi[c, i, j, k] = xc
                    d = ec - xh
                    stats[STAT_RESIDUAL] += d * d
                    z = vc + rho * xc
                    zz[c] = z
                    znorm2 += z * z
                g = gamma[i, j, k]
                znorm = np.sqrt(znorm2)
                scale = 1.0
                if znorm > g:
                    scale = g / znorm
                    stats[STAT_OBJECTIVE] += g * (znorm - g)
                for c in range(6):
                    z = zz[c]
                    en = (z - scale * z) * inv_rho
                    vn = v[c, i, j, k] + rho * (xi[c, i, j, k] - en)
                    e_new[c, i, j, k] = en
                    v_new[c, i, j, k] = vn
                    de = en - e[c, i, j, k]
                    dv = vn - v[c, i, j, k]
                    pr = xi[c, i, j, k] - en
                    stats[STAT_DEDE] += de * de
                    stats[STAT_DVDE] += dv * de
                    stats[STAT_DVDV] += dv * dv
                    stats[STAT_EE] += en * en
                    stats[STAT_VV] += vn * vn
                    stats[STAT_PRIMAL] += pr * pr
                    stats[STAT_VMEAN + c] += vn
    return xi_half, xi, e_new, v_new, stats


if HAVE_NUMBA:
    restrict_q = numba.njit(cache=True)(_restrict_q)
    fused_tail = numba.njit(cache=True)(_fused_tail)
else:  # pragma: no cover
    restrict_q = _restrict_q
    fused_tail = _fused_tail
