"""2D TM-mode FDTD solver on a staggered Yee grid.

Fields: Ey out of the (x, z) plane at integer cells, Hx staggered in z,
Hz staggered in x. Updates are the standard leapfrog

    mu0 dHx/dt =  dEy/dz
    mu0 dHz/dt = -dEy/dx
    eps dEy/dt =  dHx/dz - dHz/dx - sigma * Ey

with per-cell relative permittivity (>= 1) and optional conductivity.
The absorbing boundary is a graded, impedance-matched conductivity layer
(electric sigma plus the matched magnetic loss), thickness
`pml_thickness` cells, backed by PEC walls: strictly dissipative, so
total field energy can never grow once the source is off.

Grid convention: Ey[i, j] sits at (x, z) = (i * dx, j * dz); z is depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .forward import BScan, Scene, ricker_wavelet
from .medium import SPEED_OF_LIGHT
from .pose import Trajectory

MU_0 = 4.0e-7 * math.pi
#: Derived so that 1/sqrt(mu0 eps0) equals SPEED_OF_LIGHT exactly.
EPS_0 = 1.0 / (MU_0 * SPEED_OF_LIGHT**2)

# Absorbing layer grading: cubic profile aiming at 1e-6 normal-incidence
# return loss.
_PML_ORDER = 3
_PML_R0 = 1e-6


def courant_limit(dx: float, dz: float, c_max: float) -> float:
    """Largest stable time step for the 2D Yee update."""
    return 1.0 / (c_max * math.sqrt(1.0 / dx**2 + 1.0 / dz**2))


@dataclass(frozen=True)
class FdtdConfig:
    """Grid, time stepping and source description for one FDTD run."""

    dx: float
    dz: float
    dt: float
    steps: int
    source_frequency: float
    source_cell: tuple[int, int] = (0, 0)
    source_amplitude: float = 1.0
    pml_thickness: int = 10

    def __post_init__(self):
        if min(self.dx, self.dz, self.dt) <= 0:
            raise ValueError("dx, dz and dt must all be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.source_frequency <= 0:
            raise ValueError("source_frequency must be > 0")
        if self.pml_thickness < 0:
            raise ValueError("pml_thickness must be >= 0")

    def validate_against(self, eps_r: np.ndarray) -> None:
        """Hard Courant check against the fastest cell in the map."""
        c_max = SPEED_OF_LIGHT / math.sqrt(float(np.min(eps_r)))
        limit = courant_limit(self.dx, self.dz, c_max)
        if self.dt > limit:
            raise ValueError(
                f"Courant condition violated: dt={self.dt:.4g} s exceeds the "
                f"stable limit {limit:.4g} s for c_max={c_max:.4g} m/s"
            )


@dataclass
class FdtdResult:
    """Receiver trace plus optional probe recordings and energy history."""

    trace: np.ndarray
    probes: np.ndarray | None = None
    energy: np.ndarray | None = None


def _edge_depth(n: int, pml: int, positions: np.ndarray) -> np.ndarray:
    """Depth into the absorbing layer (in cells, 0 in the interior) for
    fractional grid positions along one axis."""
    inner_lo = float(pml)
    inner_hi = float(n - 1 - pml)
    return np.maximum(0.0, np.maximum(inner_lo - positions, positions - inner_hi))


def _absorber_sigma(eps_r: np.ndarray, pml: int, dx: float, dz: float,
                    xpos: np.ndarray, zpos: np.ndarray) -> np.ndarray:
    """Electric conductivity of the graded absorbing layer, sampled at the
    (xpos, zpos) fractional grid locations with local wave speed."""
    if pml == 0:
        return np.zeros((xpos.size, zpos.size))
    c_loc = SPEED_OF_LIGHT / np.sqrt(_sample_cells(eps_r, xpos, zpos))
    scale = (_PML_ORDER + 1) * math.log(1.0 / _PML_R0) / 2.0 * EPS_0 * c_loc
    nx, nz = eps_r.shape
    gx = (_edge_depth(nx, pml, xpos) / pml) ** _PML_ORDER / (pml * dx)
    gz = (_edge_depth(nz, pml, zpos) / pml) ** _PML_ORDER / (pml * dz)
    return scale * (gx[:, None] + gz[None, :])


def _sample_cells(arr: np.ndarray, xpos: np.ndarray, zpos: np.ndarray) -> np.ndarray:
    """Average a cell-centered array onto (possibly half-offset) positions."""
    out = arr
    if xpos[0] != 0.0:  # half offset in x -> average i, i+1
        out = 0.5 * (out[:-1, :] + out[1:, :])
    if zpos[0] != 0.0:
        out = 0.5 * (out[:, :-1] + out[:, 1:])
    return out


def run_fdtd(
    config: FdtdConfig,
    eps_r,
    sigma=None,
    source_cell: tuple[int, int] | None = None,
    receiver_cell: tuple[int, int] | None = None,
    probe_cells=None,
    record_energy: bool = False,
) -> FdtdResult:
    """Single FDTD run: inject a Ricker pulse, record Ey at the receiver.

    Parameters
    ----------
    config : FdtdConfig
    eps_r : (nx, nz) array of relative permittivity, all >= 1.
    sigma : optional (nx, nz) conductivity map (S/m) added inside the grid.
    source_cell, receiver_cell : (ix, iz); default from config, receiver
        defaults to the source cell (monostatic).
    probe_cells : optional list of (ix, iz) cells recorded every step.
    record_energy : record the discrete field energy at every step.
    """
    eps_r = np.asarray(eps_r, dtype=float)
    if eps_r.ndim != 2:
        raise ValueError("eps_r must be 2D (nx, nz)")
    if np.any(eps_r < 1.0):
        raise ValueError("eps_r values must all be >= 1")
    nx, nz = eps_r.shape
    pml = config.pml_thickness
    if nx <= 2 * pml + 2 or nz <= 2 * pml + 2:
        raise ValueError("grid too small for the configured absorber thickness")
    config.validate_against(eps_r)

    src = tuple(source_cell if source_cell is not None else config.source_cell)
    rcv = tuple(receiver_cell if receiver_cell is not None else src)
    for name, (ix, iz) in (("source", src), ("receiver", rcv)):
        if not (pml < ix < nx - 1 - pml and pml < iz < nz - 1 - pml):
            raise ValueError(
                f"{name} cell {(ix, iz)} outside the non-absorbing interior "
                f"of the {nx}x{nz} grid (layer {pml} cells)"
            )
    probe_cells = [tuple(p) for p in (probe_cells or [])]

    dx, dz, dt = config.dx, config.dz, config.dt
    sig_e = np.zeros((nx, nz)) if sigma is None else np.asarray(sigma, dtype=float).copy()
    if sig_e.shape != (nx, nz) or np.any(sig_e < 0):
        raise ValueError("sigma map must match the grid and be >= 0")

    xi = np.arange(nx, dtype=float)
    zi = np.arange(nz, dtype=float)
    sig_e += _absorber_sigma(eps_r, pml, dx, dz, xi, zi)

    # Matched magnetic loss at the staggered H locations keeps the layer
    # reflectionless at normal incidence: sigma_m / mu = sigma_e / eps.
    def magnetic_sigma(xpos, zpos):
        s = _absorber_sigma(eps_r, pml, dx, dz, xpos, zpos)
        er = _sample_cells(eps_r, xpos, zpos)
        return s * MU_0 / (EPS_0 * er)

    sig_m_hx = magnetic_sigma(xi, zi[:-1] + 0.5)
    sig_m_hz = magnetic_sigma(xi[:-1] + 0.5, zi)

    # Semi-implicit lossy update coefficients.
    eps = EPS_0 * eps_r
    le = sig_e * dt / (2.0 * eps)
    ca = (1.0 - le) / (1.0 + le)
    cb = (dt / eps) / (1.0 + le)
    lh_x = sig_m_hx * dt / (2.0 * MU_0)
    da_x = (1.0 - lh_x) / (1.0 + lh_x)
    db_x = (dt / MU_0) / (1.0 + lh_x)
    lh_z = sig_m_hz * dt / (2.0 * MU_0)
    da_z = (1.0 - lh_z) / (1.0 + lh_z)
    db_z = (dt / MU_0) / (1.0 + lh_z)

    ey = np.zeros((nx, nz))
    hx = np.zeros((nx, nz - 1))
    hz = np.zeros((nx - 1, nz))

    delay = 1.5 / config.source_frequency
    trace = np.zeros(config.steps)
    probes = np.zeros((len(probe_cells), config.steps)) if probe_cells else None
    energy = np.zeros(config.steps) if record_energy else None
    cell_area = dx * dz

    for n in range(config.steps):
        hx_old = hx.copy() if record_energy else None
        hz_old = hz.copy() if record_energy else None

        hx = da_x * hx + db_x * (ey[:, 1:] - ey[:, :-1]) / dz
        hz = da_z * hz - db_z * (ey[1:, :] - ey[:-1, :]) / dx

        if record_energy:
            # Staggered-product energy: exactly conserved by the lossless
            # leapfrog, strictly dissipated by the absorber.
            energy[n] = 0.5 * cell_area * (
                np.sum(eps * ey**2)
                + MU_0 * (np.sum(hx_old * hx) + np.sum(hz_old * hz))
            )

        ey[1:-1, 1:-1] = ca[1:-1, 1:-1] * ey[1:-1, 1:-1] + cb[1:-1, 1:-1] * (
            (hx[1:-1, 1:] - hx[1:-1, :-1]) / dz
            - (hz[1:, 1:-1] - hz[:-1, 1:-1]) / dx
        )
        ey[src] += config.source_amplitude * float(
            ricker_wavelet((n + 1) * dt - delay, config.source_frequency)
        )

        trace[n] = ey[rcv]
        for k, cell in enumerate(probe_cells):
            probes[k, n] = ey[cell]

    return FdtdResult(trace=trace, probes=probes, energy=energy)


def fdtd_simulate(
    config: FdtdConfig,
    material_map,
    trajectory: Trajectory,
    sigma_map=None,
) -> BScan:
    """B-scan from repeated monostatic FDTD runs along a trajectory.

    Each pose gets its own run with the source/receiver at that pose's
    surface cell: ix = round(pose.x / dx), iz from config.source_cell.
    Pose y is ignored (the solver is 2D in x, z).
    """
    eps_r = np.asarray(material_map, dtype=float)
    iz = config.source_cell[1]
    data = np.zeros((len(trajectory), config.steps), dtype=np.float32)
    for k, pose in enumerate(trajectory):
        ix = int(round(pose.x / config.dx))
        result = run_fdtd(config, eps_r, sigma=sigma_map, source_cell=(ix, iz))
        data[k] = result.trace
    return BScan.from_array(data, config.dt, list(trajectory))


def rasterize_material_map(
    scene: Scene,
    nx: int,
    nz: int,
    dx: float,
    dz: float,
    target_radius: float = 0.05,
    target_dielectric: float = 81.0,
) -> np.ndarray:
    """Gridded permittivity map: scene background plus a circular patch of
    `target_dielectric` (radius `target_radius` m) at each target's (x, z).

    Used when a Scene without an explicit material_map is fed to the FDTD
    path; scene.material_map, when present, wins.
    """
    if scene.material_map is not None:
        return scene.material_map
    eps = np.full((nx, nz), scene.medium.dielectric)
    x = np.arange(nx)[:, None] * dx
    z = np.arange(nz)[None, :] * dz
    for tgt in scene.targets:
        tx, _, tz = tgt.position
        mask = (x - tx) ** 2 + (z - tz) ** 2 <= target_radius**2
        eps[mask] = target_dielectric
    return eps
