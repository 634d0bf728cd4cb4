"""Seeded voxel microstructures and the phase-to-crack-resistance lookup.

Random generators draw from :func:`numpy.random.default_rng` (PCG64)
seeded with the given integer, consuming numbers in a fixed documented
order, so a (parameters, seed) pair always produces the same map.

Geometry conventions: voxel ``[i, j, k]`` has its center at
``(i + 0.5, j + 0.5, k + 0.5)`` in voxel units and all distances are
periodic (minimum image). An axis with a single voxel is treated as a
flat direction, so ``(n, n, 1)`` grids hold 2D disks and rods.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np

from .exceptions import JammingError, MissingPhaseError, NegativeResistanceError
from .grid import GridDims

__all__ = [
    "PhaseMap",
    "validate_gamma_table",
    "gen_homogeneous",
    "gen_laminate",
    "gen_sphere",
    "gen_sphere_pack",
    "gen_capsules",
    "phases_to_gamma",
]


@dataclass
class PhaseMap:
    """Phase id per voxel plus generator metadata (centers, seed, fractions)."""

    phases: np.ndarray
    h: float = 1.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        phases = np.asarray(self.phases)
        if phases.ndim != 3:
            raise ValueError(f"phase map must be 3-dimensional, got shape {phases.shape}")
        if phases.dtype != np.uint8:
            if np.any(phases < 0) or np.any(phases > 255) or np.any(phases != np.round(phases)):
                raise ValueError("phase ids must be integers in [0, 255]")
            phases = phases.astype(np.uint8)
        self.phases = np.ascontiguousarray(phases)

    @property
    def dims(self):
        return GridDims(*self.phases.shape, h=self.h)

    @property
    def shape(self):
        return self.phases.shape

    def phase_ids(self):
        return [int(p) for p in np.unique(self.phases)]

    def fractions(self):
        """Volume fraction of every phase present, from direct voxel counts."""
        counts = np.bincount(self.phases.reshape(-1), minlength=1)
        total = self.phases.size
        return {int(p): counts[p] / total for p in np.nonzero(counts)[0]}


def _shape(dims):
    if isinstance(dims, GridDims):
        return dims.shape
    if np.isscalar(dims):
        return (int(dims),) * 3
    shape = tuple(int(n) for n in dims)
    GridDims(*shape)
    return shape


def _spacing(dims):
    return dims.h if isinstance(dims, GridDims) else 1.0


def _active_extent(shape):
    active = [n for n in shape if n > 1]
    return min(active) if active else 1


def _periodic_offsets(shape, center):
    """Minimum-image offsets of the voxel centers from ``center``, one array per axis."""
    offsets = []
    for axis, n in enumerate(shape):
        x = np.arange(n) + 0.5 - center[axis]
        x -= n * np.round(x / n)
        view = [1, 1, 1]
        view[axis] = n
        offsets.append(x.reshape(view))
    return offsets


def _ball_mask(shape, center, diameter):
    if diameter <= 0:
        return np.zeros(shape, dtype=bool)
    dx, dy, dz = _periodic_offsets(shape, center)
    return dx * dx + dy * dy + dz * dz <= (0.5 * diameter) ** 2


def _capsule_mask(shape, center, axis_dir, diameter, length):
    dx, dy, dz = _periodic_offsets(shape, center)
    half = 0.5 * (length - diameter)
    t = np.clip(dx * axis_dir[0] + dy * axis_dir[1] + dz * axis_dir[2], -half, half)
    rx = dx - t * axis_dir[0]
    ry = dy - t * axis_dir[1]
    rz = dz - t * axis_dir[2]
    return rx * rx + ry * ry + rz * rz <= (0.5 * diameter) ** 2


def _default_center(shape):
    return np.array([0.5 * n for n in shape])


def _sample_center(rng, shape):
    # flat axes keep the voxel-center coordinate so 2D structures stay 2D
    u = rng.random(3)
    return np.array([u[a] * n if n > 1 else 0.5 for a, n in enumerate(shape)])


def gen_homogeneous(dims, phase=0):
    """Single-phase map."""
    shape = _shape(dims)
    return PhaseMap(np.full(shape, phase, dtype=np.uint8), h=_spacing(dims), info={"kind": "homogeneous"})


def gen_laminate(dims, axis, layers):
    """Periodic layered structure.

    Parameters
    ----------
    dims : GridDims, int or tuple of int
    axis : int or {"x", "y", "z"}
        Stacking direction.
    layers : sequence of (thickness, phase)
        Layers in stacking order; thicknesses must add up to the number of
        voxels along ``axis``. Layers thinner than 2 voxels trigger a
        warning, since the neighbor coupling of the flow bound then raises
        the effective energy above the naive planar value.
    """
    shape = _shape(dims)
    axis = "xyz".index(axis) if isinstance(axis, str) else int(axis)
    layers = [(int(t), int(p)) for t, p in layers]
    total = sum(t for t, _ in layers)
    if total != shape[axis]:
        raise ValueError(f"layer thicknesses add up to {total}, but axis {axis} has {shape[axis]} voxels")
    if any(t < 1 for t, _ in layers):
        raise ValueError("layer thicknesses must be positive")
    if any(t < 2 for t, _ in layers):
        warnings.warn("laminate layers thinner than 2 voxels", stacklevel=2)
    profile = np.concatenate([np.full(t, p, dtype=np.uint8) for t, p in layers])
    view = [1, 1, 1]
    view[axis] = shape[axis]
    phases = np.broadcast_to(profile.reshape(view), shape).copy()
    return PhaseMap(phases, h=_spacing(dims), info={"kind": "laminate", "axis": axis, "layers": layers})


def gen_sphere(dims, diameter, center=None, phases=(0, 1)):
    """Single spherical inclusion; a voxel belongs to it iff its center is within ``diameter/2``.

    ``center`` is in voxel units and defaults to the cell center.
    """
    shape = _shape(dims)
    if diameter > _active_extent(shape):
        raise ValueError(f"diameter {diameter} exceeds the smallest grid extent {_active_extent(shape)}")
    center = _default_center(shape) if center is None else np.asarray(center, dtype=float)
    matrix, inclusion = phases
    mask = _ball_mask(shape, center, diameter)
    out = np.where(mask, inclusion, matrix).astype(np.uint8)
    info = {"kind": "sphere", "center": center.tolist(), "diameter": diameter,
            "inclusion_fraction": float(mask.mean())}
    return PhaseMap(out, h=_spacing(dims), info=info)


def gen_sphere_pack(dims, diameter, count=None, porosity=None, seed=0, max_overlap=0.0,
                    max_attempts=100000, phases=(0, 1)):
    """Monodisperse spheres placed by random sequential adsorption.

    Candidate centers are drawn uniformly; a candidate is rejected if its
    periodic distance to an accepted center is below
    ``(1 - max_overlap) * diameter``. ``max_overlap = 0`` gives
    non-overlapping spheres, which jam near 38% volume fraction in 3D;
    higher porosities need a positive overlap allowance.

    Exactly one of ``count`` (number of spheres) or ``porosity`` (target
    sphere-phase fraction; placement stops at the first sphere reaching
    it) must be given.

    Raises
    ------
    JammingError
        After ``max_attempts`` consecutive rejected candidates.
    """
    if (count is None) == (porosity is None):
        raise ValueError("give exactly one of count or porosity")
    if not 0.0 <= max_overlap < 1.0:
        raise ValueError("max_overlap must lie in [0, 1)")
    shape = _shape(dims)
    if diameter <= 0 or diameter > _active_extent(shape):
        raise ValueError(f"diameter must lie in (0, {_active_extent(shape)}], got {diameter}")
    if porosity is not None and not 0.0 <= porosity < 1.0:
        raise ValueError("porosity must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    matrix, inclusion = phases
    mask = np.zeros(shape, dtype=bool)
    filled = 0
    min_dist2 = ((1.0 - max_overlap) * diameter) ** 2
    extent = np.array(shape, dtype=float)
    centers = np.empty((0, 3))
    failures = 0

    def done():
        if count is not None:
            return len(centers) >= count
        return filled >= porosity * mask.size

    while not done():
        candidate = _sample_center(rng, shape)
        if len(centers):
            delta = centers - candidate
            delta -= extent * np.round(delta / extent)
            if np.min(np.einsum("ij,ij->i", delta, delta)) < min_dist2:
                failures += 1
                if failures >= max_attempts:
                    raise JammingError(
                        f"no admissible position after {max_attempts} attempts "
                        f"({len(centers)} spheres, fraction {filled / mask.size:.4f})"
                    )
                continue
        failures = 0
        centers = np.vstack([centers, candidate])
        mask |= _ball_mask(shape, candidate, diameter)
        filled = int(np.count_nonzero(mask))

    out = np.where(mask, inclusion, matrix).astype(np.uint8)
    info = {
        "kind": "sphere_pack",
        "seed": seed,
        "diameter": diameter,
        "count": len(centers),
        "centers": centers.tolist(),
        "max_overlap": max_overlap,
        "target_porosity": porosity,
        "porosity": filled / mask.size,
    }
    return PhaseMap(out, h=_spacing(dims), info=info)


def gen_capsules(dims, count, diameter, aspect_ratio, axis_weights=(1.0, 1.0, 1.0), seed=0, phases=(0, 1)):
    """Overlapping spherocylinders ("fibers") with seeded random placement.

    Each capsule has total length ``aspect_ratio * diameter``. Its axis is
    the normalized vector ``sqrt(axis_weights) * g`` with ``g`` standard
    normal, so a weight of 0 suppresses that Cartesian component.

    Random numbers are consumed per capsule as: 3 uniforms (center), then
    3 normals (orientation, redrawn while degenerate).
    """
    shape = _shape(dims)
    weights = np.asarray(axis_weights, dtype=float)
    if weights.shape != (3,) or np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError("axis_weights needs three non-negative entries, not all zero")
    length = aspect_ratio * diameter
    if diameter <= 0 or aspect_ratio < 1:
        raise ValueError("need diameter > 0 and aspect_ratio >= 1")
    if length >= _active_extent(shape):
        raise ValueError(f"capsule length {length} must be below the smallest grid extent {_active_extent(shape)}")
    rng = np.random.default_rng(seed)
    scale = np.sqrt(weights)
    matrix, inclusion = phases
    mask = np.zeros(shape, dtype=bool)
    centers, axes = [], []
    for _ in range(int(count)):
        center = _sample_center(rng, shape)
        while True:
            direction = rng.standard_normal(3) * scale
            length_dir = np.sqrt(direction @ direction)
            if length_dir > 1e-12:
                break
        direction /= length_dir
        mask |= _capsule_mask(shape, center, direction, diameter, length)
        centers.append(center.tolist())
        axes.append(direction.tolist())
    out = np.where(mask, inclusion, matrix).astype(np.uint8)
    info = {
        "kind": "capsules",
        "seed": seed,
        "count": int(count),
        "diameter": diameter,
        "aspect_ratio": aspect_ratio,
        "axis_weights": weights.tolist(),
        "centers": centers,
        "axes": axes,
        "fiber_fraction": float(mask.mean()),
    }
    return PhaseMap(out, h=_spacing(dims), info=info)


def validate_gamma_table(table):
    """Normalize a ``{phase id: gamma}`` mapping; values must be >= 0 and not all zero."""
    clean = {}
    for key, value in dict(table).items():
        phase = int(key)
        if not 0 <= phase <= 255:
            raise ValueError(f"phase id {key!r} outside [0, 255]")
        value = float(value)
        if not np.isfinite(value):
            raise ValueError(f"gamma for phase {phase} is not finite")
        if value < 0:
            raise NegativeResistanceError(f"gamma for phase {phase} is negative ({value})")
        clean[phase] = value
    if not clean or not any(v > 0 for v in clean.values()):
        raise ValueError("gamma table needs at least one positive entry")
    return clean


def phases_to_gamma(phase_map, table):
    """Crack-resistance field by per-voxel lookup of the phase ids."""
    phases = phase_map.phases if isinstance(phase_map, PhaseMap) else np.asarray(phase_map, dtype=np.uint8)
    table = validate_gamma_table(table)
    present = np.unique(phases)
    missing = [int(p) for p in present if int(p) not in table]
    if missing:
        raise MissingPhaseError(f"phase ids {missing} have no gamma value")
    lut = np.zeros(256)
    for phase, value in table.items():
        lut[phase] = value
    return lut[phases]
