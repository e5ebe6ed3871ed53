"""Synthetic B-scan generation: point-scatterer hyperbola model.

A point target below the surface produces, in a B-scan gathered along a
survey line, the classic reflection hyperbola: arrival time per trace is
the two-way travel time over the 3D antenna-target distance. The analytic
synthesizer evaluates exactly that, with a Ricker source wavelet and 1/r
geometric spreading, and is linear in the target list by construction.

The full-wave FDTD alternative lives in gpr3d.fdtd.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .medium import MediumModel, velocity
from .pose import Pose, Trajectory, antenna_world_position


@dataclass(frozen=True)
class PointTarget:
    """Point scatterer at a world position (z = depth > 0), with a
    dimensionless reflection amplitude."""

    position: tuple[float, float, float]
    reflectivity: float = 1.0

    def __post_init__(self):
        pos = tuple(float(c) for c in self.position)
        object.__setattr__(self, "position", pos)
        if not all(np.isfinite(pos)) or not np.isfinite(self.reflectivity):
            raise ValueError("target position and reflectivity must be finite")
        if pos[2] <= 0:
            raise ValueError(f"target depth must be > 0 (below surface), got {pos[2]}")


@dataclass(frozen=True)
class Scene:
    """Targets plus the propagation medium; optionally a gridded
    permittivity map for FDTD runs."""

    targets: tuple[PointTarget, ...]
    medium: MediumModel
    material_map: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.material_map is not None:
            mm = np.asarray(self.material_map, dtype=float)
            if mm.ndim != 2 or np.any(mm < 1.0):
                raise ValueError("material_map must be a 2D grid of values >= 1")
            object.__setattr__(self, "material_map", mm)


@dataclass(frozen=True)
class AScan:
    """One reflection trace: samples on a uniform time grid, plus the pose
    it was recorded at (None only for pose-free intermediate data)."""

    samples: np.ndarray
    dt: float
    pose: Pose | None = None

    def __post_init__(self):
        s = np.ascontiguousarray(self.samples, dtype=np.float32)
        object.__setattr__(self, "samples", s)
        if s.ndim != 1 or s.size < 1:
            raise ValueError("samples must be a non-empty 1D array")
        if not np.all(np.isfinite(s)):
            raise ValueError("samples must all be finite")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt


@dataclass(eq=False)
class BScan:
    """Ordered stack of A-scans with identical sample count and dt."""

    traces: tuple[AScan, ...]

    def __post_init__(self):
        self.traces = tuple(self.traces)
        if len(self.traces) < 1:
            raise ValueError("BScan needs >= 1 trace")
        n0, dt0 = self.traces[0].n_samples, self.traces[0].dt
        for k, tr in enumerate(self.traces):
            if tr.n_samples != n0 or tr.dt != dt0:
                raise ValueError(f"trace {k} has mismatched n_samples/dt")

    @classmethod
    def from_array(cls, data, dt: float, poses=None) -> "BScan":
        """Build a BScan from a (n_traces, n_samples) array."""
        data = np.asarray(data)
        if data.ndim != 2:
            raise ValueError("data must be 2D (traces x samples)")
        if poses is None:
            poses = [None] * data.shape[0]
        if len(poses) != data.shape[0]:
            raise ValueError("need one pose per trace")
        return cls(tuple(AScan(row, dt, p) for row, p in zip(data, poses)))

    @cached_property
    def data(self) -> np.ndarray:
        """(n_traces, n_samples) float32 view of all traces."""
        return np.stack([tr.samples for tr in self.traces])

    @property
    def n_traces(self) -> int:
        return len(self.traces)

    @property
    def n_samples(self) -> int:
        return self.traces[0].n_samples

    @property
    def dt(self) -> float:
        return self.traces[0].dt

    @property
    def poses(self) -> tuple[Pose | None, ...]:
        return tuple(tr.pose for tr in self.traces)

    def with_data(self, data) -> "BScan":
        """Same poses/dt, new sample values."""
        return BScan.from_array(data, self.dt, list(self.poses))


def ricker_wavelet(t, f_c: float):
    """Ricker (Mexican-hat) pulse: (1 - 2 pi^2 f_c^2 t^2) exp(-pi^2 f_c^2 t^2).

    Peak value 1 at t = 0; even in t. Accepts scalar or array t.
    """
    if f_c <= 0:
        raise ValueError(f"center frequency must be > 0, got {f_c}")
    a = (np.pi * f_c) ** 2 * np.square(t)
    return (1.0 - 2.0 * a) * np.exp(-a)


def synth_hyperbola_bscan(
    scene: Scene,
    trajectory: Trajectory,
    n_samples: int = 512,
    dt: float = 1e-10,
    wavelet_frequency: float = 1.5e9,
    antenna_offset=(0.0, 0.0),
    r_min: float | None = None,
) -> BScan:
    """Analytic point-scatterer B-scan along a trajectory.

    Per pose and per target the arrival time is twtt = 2 r / v over the 3D
    antenna-target range r, and the trace receives
    reflectivity / max(r, r_min) * ricker(t - twtt), summed over targets.
    r_min clamps the geometric-spreading gain (default: one time-sample
    depth, v dt / 2).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if len(trajectory) < 1:
        raise ValueError("empty trajectory")

    v = velocity(scene.medium)
    if r_min is None:
        r_min = v * dt / 2.0
    t_grid = np.arange(n_samples) * dt
    t_max = t_grid[-1]

    targets = np.array([t.position for t in scene.targets]).reshape(-1, 3)
    refl = np.array([t.reflectivity for t in scene.targets])

    data = np.zeros((len(trajectory), n_samples))
    any_visible = targets.size == 0
    for i, pose in enumerate(trajectory):
        a = antenna_world_position(pose, antenna_offset)
        if targets.size:
            r = np.linalg.norm(targets - a, axis=1)
            twtt = 2.0 * r / v
            if np.any(twtt <= t_max):
                any_visible = True
            gain = refl / np.maximum(r, r_min)
            # one row per target, summed; wavelet centered on arrival time
            data[i] = np.sum(
                gain[:, None] * ricker_wavelet(t_grid[None, :] - twtt[:, None], wavelet_frequency),
                axis=0,
            )
    if not any_visible:
        warnings.warn(
            "no target arrival falls inside the recording window for any pose",
            stacklevel=2,
        )
    return BScan.from_array(data, dt, list(trajectory))
