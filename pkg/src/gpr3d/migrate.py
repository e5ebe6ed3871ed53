"""Pose-aware 3D back-projection migration onto a voxel grid.

Each recorded sample constrains its reflector to a semi-hemisphere of
radius v * t / 2 around the antenna; accumulating every trace's amplitude
over all voxels on its hemisphere focuses energy at the true scatterer
positions. This module implements the adjoint (gather) formulation: for
every voxel, sum the trace amplitudes interpolated at the voxel's two-way
travel time. Antenna positions come from per-trace poses, so arbitrary
survey headings migrate into the same world frame.

Workers split the grid into disjoint x-slabs (GPR_VOLUME_THREADS caps the
count, 0 = auto); every slab accumulates traces in order, so results are
bitwise identical for any worker count.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .detect import envelope as _envelope
from .detect import mask_bscan
from .forward import BScan
from .medium import MediumModel, velocity
from .pose import antenna_world_position


@dataclass(frozen=True)
class GridSpec:
    """Voxel-grid geometry: corner origin, uniform voxel edge, cell counts."""

    origin: tuple[float, float, float]
    voxel_size: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.voxel_size <= 0:
            raise ValueError("voxel_size must be > 0")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"dims must all be >= 1, got {self.dims}")

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.dims[axis]) + 0.5) * self.voxel_size


@dataclass
class VoxelVolume:
    """Migrated amplitude accumulator plus per-voxel hit counts."""

    origin: tuple[float, float, float]
    voxel_size: float
    dims: tuple[int, int, int]
    values: np.ndarray
    hit_count: np.ndarray

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VoxelVolume":
        return cls(
            origin=grid.origin,
            voxel_size=grid.voxel_size,
            dims=grid.dims,
            values=np.zeros(grid.dims),
            hit_count=np.zeros(grid.dims, dtype=np.int64),
        )

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.origin, self.voxel_size, self.dims)

    def voxel_center(self, idx) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(idx) + 0.5) * self.voxel_size

    def peak_position(self) -> np.ndarray:
        """World position of the strongest |amplitude| voxel."""
        idx = np.unravel_index(np.argmax(np.abs(self.values)), self.values.shape)
        return self.voxel_center(idx)


@dataclass(frozen=True)
class MigrationConfig:
    """Medium plus the accumulation knobs of the back-projector."""

    medium: MediumModel
    aperture_half_angle: float = math.radians(60.0)
    weighting: str = "none"
    normalize_by_hits: bool = True
    envelope_first: bool = False
    antenna_offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not 0.0 < self.aperture_half_angle <= math.pi / 2:
            raise ValueError("aperture_half_angle must be in (0, pi/2]")
        if self.weighting not in ("none", "inverse-r", "inverse-r-squared"):
            raise ValueError(f"unknown weighting {self.weighting!r}")


def _migrate_slab(xs, ys, zs, data, antennas, dt, v, cfg, voxel_size):
    """Accumulate all traces into one voxel slab (gather formulation)."""
    X = xs[:, None, None]
    Y = ys[None, :, None]
    Z = zs[None, None, :]
    shape = (xs.size, ys.size, zs.size)
    values = np.zeros(shape)
    hits = np.zeros(shape, dtype=np.int64)
    cos_ap = math.cos(cfg.aperture_half_angle)
    n_samples = data.shape[1]
    below_surface = np.broadcast_to(Z > 0.0, shape)
    dead_traces = 0

    for samples, (ax, ay, az) in zip(data, antennas):
        dxv = X - ax
        dyv = Y - ay
        dzv = Z - az
        r = np.sqrt(dxv * dxv + dyv * dyv + dzv * dzv)
        r_safe = np.maximum(r, 1e-30)
        pos = (2.0 * r / v) / dt
        mask = (
            below_surface
            & (dzv > 0.0)
            & (dzv / r_safe >= cos_ap)
            & (pos <= n_samples - 1)
        )
        if not mask.any():
            dead_traces += 1
            continue
        i0 = np.clip(pos.astype(np.int64), 0, n_samples - 2)
        frac = pos - i0
        amp = samples[i0] * (1.0 - frac) + samples[i0 + 1] * frac
        if cfg.weighting == "inverse-r":
            amp = amp / np.maximum(r, voxel_size)
        elif cfg.weighting == "inverse-r-squared":
            amp = amp / np.maximum(r, voxel_size) ** 2
        values += np.where(mask, amp, 0.0)
        hits += mask
    return values, hits, dead_traces


def _worker_count() -> int:
    raw = os.environ.get("GPR_VOLUME_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"GPR_VOLUME_THREADS must be an integer, got {raw!r}")
    if n <= 0:
        return min(4, os.cpu_count() or 1)
    return n


def migrate_bscan(b: BScan, grid_spec: GridSpec, cfg: MigrationConfig) -> VoxelVolume:
    """Back-project a B-scan onto the voxel grid.

    Every trace needs a pose. Voxels strictly below the surface (z > 0)
    and inside the aperture cone of a trace receive that trace's amplitude
    linearly interpolated at t = 2 r / v ; hit counts record how many
    traces reached each voxel and optionally normalize the output.
    """
    if any(p is None for p in b.poses):
        raise ValueError("migration requires a pose on every trace")
    if cfg.envelope_first:
        b = _envelope(b)
    data = b.data.astype(np.float64)
    antennas = [antenna_world_position(p, cfg.antenna_offset) for p in b.poses]
    v = velocity(cfg.medium)

    xs = grid_spec.axis_centers(0)
    ys = grid_spec.axis_centers(1)
    zs = grid_spec.axis_centers(2)

    n_workers = min(_worker_count(), grid_spec.dims[0])
    slabs = np.array_split(np.arange(grid_spec.dims[0]), n_workers)

    def run(slab_idx):
        return _migrate_slab(
            xs[slab_idx], ys, zs, data, antennas, b.dt, v, cfg, grid_spec.voxel_size
        )

    if n_workers == 1:
        parts = [run(slabs[0])]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(run, slabs))

    volume = VoxelVolume.zeros(grid_spec)
    volume.values = np.concatenate([p[0] for p in parts], axis=0)
    volume.hit_count = np.concatenate([p[1] for p in parts], axis=0)
    dead = sum(p[2] for p in parts)
    if dead == len(parts) * b.n_traces and b.n_traces > 0:
        warnings.warn(
            "no trace's travel-time range covers any grid voxel; volume is zero",
            stacklevel=2,
        )
    if cfg.normalize_by_hits:
        volume.values = volume.values / np.maximum(volume.hit_count, 1)
    return volume


def migrate_with_rois(
    b: BScan, boxes, grid_spec: GridSpec, cfg: MigrationConfig
) -> tuple[VoxelVolume, VoxelVolume]:
    """Migrate the RoI-masked B-scan and its complement separately.

    target volume + noise volume equals the full migration voxelwise
    (back projection is linear in the trace samples).
    """
    target = migrate_bscan(mask_bscan(b, boxes, keep_inside=True), grid_spec, cfg)
    noise = migrate_bscan(mask_bscan(b, boxes, keep_inside=False), grid_spec, cfg)
    return target, noise


def extract_targets(v: VoxelVolume, threshold_fraction: float = 0.5):
    """Connected bright components of the volume as (position, amplitude).

    Components are voxels with |value| >= threshold_fraction * global max
    under 6-connectivity; each yields its |value|-weighted centroid and
    peak amplitude, sorted by descending peak.
    """
    if not 0.0 < threshold_fraction <= 1.0:
        raise ValueError("threshold_fraction must be in (0, 1]")
    mag = np.abs(v.values)
    peak = mag.max()
    if peak == 0.0:
        return []
    labels, n = ndimage.label(mag >= threshold_fraction * peak)
    out = []
    for lab in range(1, n + 1):
        idx = np.argwhere(labels == lab)
        w = mag[tuple(idx.T)]
        centroid = (idx + 0.5) * v.voxel_size + np.asarray(v.origin)
        position = (centroid * w[:, None]).sum(axis=0) / w.sum()
        out.append((position, float(w.max())))
    out.sort(key=lambda t: -t[1])
    return out
