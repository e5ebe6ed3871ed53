"""Hyperbola detection in B-scans.

Pipeline ops: remove the static background (mean trace), take the
per-trace Hilbert envelope, then pick peaks, cluster them across traces
and least-squares fit the reflection hyperbola

    t(x)^2 = t0^2 + (2 (x - x0) dx / v)^2

per cluster. Each accepted cluster yields a bounding box around the event
plus the fitted apex (x0, t0) and velocity - the same region-of-interest
contract a learned detector would emit, but deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks, hilbert, peak_widths

from .forward import BScan
from .medium import SPEED_OF_LIGHT
from .pose import antenna_world_position


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in (trace index, sample index) coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    score: float = 1.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(
                f"degenerate box ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


@dataclass(frozen=True)
class HyperbolaFit:
    """Fitted apex and velocity of one reflection hyperbola."""

    apex_trace: float
    apex_time: float
    velocity_estimate: float
    residual: float

    def __post_init__(self):
        if self.apex_time <= 0:
            raise ValueError(f"apex_time must be > 0, got {self.apex_time}")
        if not 0.0 < self.velocity_estimate <= SPEED_OF_LIGHT * (1 + 1e-9):
            raise ValueError(
                f"velocity_estimate must be in (0, C], got {self.velocity_estimate}"
            )
        if self.residual < 0:
            raise ValueError("residual must be >= 0")


def remove_background(b: BScan) -> BScan:
    """Subtract the across-trace mean trace (static background removal)."""
    if b.n_traces < 2:
        raise ValueError("background removal needs >= 2 traces")
    data = b.data.astype(np.float64)
    return b.with_data(data - data.mean(axis=0, keepdims=True))


def envelope(b: BScan) -> BScan:
    """Per-trace analytic-signal magnitude (Hilbert envelope), >= 0."""
    data = b.data.astype(np.float64)
    return b.with_data(np.abs(hilbert(data, axis=1)))


def mask_bscan(b: BScan, boxes, keep_inside: bool) -> BScan:
    """Zero samples outside (keep_inside) or inside (complement) the boxes.

    The two outputs partition the input: inside + outside == input exactly.
    """
    n_tr, n_s = b.n_traces, b.n_samples
    inside = np.zeros((n_tr, n_s), dtype=bool)
    ti = np.arange(n_tr, dtype=float)[:, None]
    si = np.arange(n_s, dtype=float)[None, :]
    for box in boxes:
        if box.x_min < 0 or box.y_min < 0 or box.x_max > n_tr - 1 or box.y_max > n_s - 1:
            raise ValueError(
                f"box ({box.x_min}, {box.y_min}, {box.x_max}, {box.y_max}) "
                f"outside B-scan bounds {n_tr}x{n_s}"
            )
        inside |= (ti >= box.x_min) & (ti <= box.x_max) & (si >= box.y_min) & (si <= box.y_max)
    keep = inside if keep_inside else ~inside
    return b.with_data(np.where(keep, b.data, np.float32(0.0)))


def _pick_peaks(data: np.ndarray, floor: float):
    """Per-trace peaks above the amplitude floor.

    Returns an (n, 2) array of (trace, sample) and the median half-height
    peak width in samples (the data-driven wavelet-width estimate).
    """
    found = []
    widths = []
    for i in range(data.shape[0]):
        idx, _ = find_peaks(data[i], height=floor)
        if idx.size:
            widths.extend(peak_widths(data[i], idx, rel_height=0.5)[0])
            found.extend((i, j) for j in idx)
    if not found:
        return np.empty((0, 2)), 2.0
    return np.array(found, dtype=float), float(max(np.median(widths), 2.0))


def _trace_spacing(b: BScan, fallback: float | None) -> float:
    poses = b.poses
    if all(p is not None for p in poses) and len(poses) >= 2:
        pts = np.array([antenna_world_position(p)[:2] for p in poses])
        d = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.median(d) > 0:
            return float(np.median(d))
    if fallback is None:
        raise ValueError("traces carry no poses; pass trace_spacing explicitly")
    return fallback


def _cluster_peaks(peaks: np.ndarray, trace_gap: int, time_gap: float) -> list[np.ndarray]:
    """Group (trace, sample) peaks by adjacency; union-find over pairs
    within trace_gap traces and time_gap samples."""
    n = len(peaks)
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    order = np.lexsort((peaks[:, 1], peaks[:, 0]))
    sorted_peaks = peaks[order]
    for a in range(n):
        ta = sorted_peaks[a, 0]
        for c in range(a + 1, n):
            if sorted_peaks[c, 0] - ta > trace_gap:
                break
            if abs(sorted_peaks[c, 1] - sorted_peaks[a, 1]) <= time_gap:
                ra, rc = find(order[a]), find(order[c])
                if ra != rc:
                    parent[ra] = rc
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [peaks[np.array(idx)] for idx in groups.values()]


def _boxes_iou(a, b) -> float:
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def _merge_overlapping(clusters: list[np.ndarray]) -> list[np.ndarray]:
    """Merge clusters whose raw extents overlap with IoU > 0.5."""
    merged = True
    while merged and len(clusters) > 1:
        merged = False
        exts = [
            (c[:, 0].min(), c[:, 1].min(), c[:, 0].max() + 1.0, c[:, 1].max() + 1.0)
            for c in clusters
        ]
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                if _boxes_iou(exts[i], exts[j]) > 0.5:
                    clusters[i] = np.vstack([clusters[i], clusters[j]])
                    del clusters[j]
                    merged = True
                    break
            if merged:
                break
    return clusters


def _fit_hyperbola(traces, times, spacing, dt):
    """Linear LSQ in the t^2 domain plus one Gauss-Newton polish.

    Returns (x0, t0, v, rms_residual) or None for degenerate clusters.
    """
    u = traces * spacing
    y = times**2
    design = np.column_stack([np.ones_like(u), u, u**2])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    a0, b0, c0 = coef
    if c0 <= 0:
        return None
    u0 = -b0 / (2.0 * c0)
    t0_sq = a0 - c0 * u0**2
    if t0_sq <= 0:
        return None
    t0 = math.sqrt(t0_sq)
    v = 2.0 / math.sqrt(c0)

    def predict(u0_, t0_, v_):
        return np.sqrt(t0_**2 + (2.0 * (u - u0_) / v_) ** 2)

    def rms(u0_, t0_, v_):
        return float(np.sqrt(np.mean((predict(u0_, t0_, v_) - times) ** 2)))

    # One Gauss-Newton step on the un-squared residuals; keep it only if
    # it actually improves the fit.
    pred = predict(u0, t0, v)
    r = pred - times
    du = -4.0 * (u - u0) / (v**2 * pred)
    dtp = t0 / pred
    dv = -4.0 * (u - u0) ** 2 / (v**3 * pred)
    jac = np.column_stack([du, dtp, dv])
    try:
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        cand = (u0 + step[0], t0 + step[1], v + step[2])
        if cand[1] > 0 and 0 < cand[2] and rms(*cand) < rms(u0, t0, v):
            u0, t0, v = cand
    except np.linalg.LinAlgError:
        pass

    v = min(v, SPEED_OF_LIGHT)
    return u0 / spacing, t0, v, rms(u0, t0, v)


def detect_hyperbolas(
    b: BScan,
    threshold_fraction: float = 0.3,
    min_support: int = 5,
    trace_gap: int = 2,
    time_gap: float | None = None,
    trace_spacing: float | None = None,
) -> list[tuple[BoundingBox, HyperbolaFit]]:
    """Find hyperbolic events in a preprocessed (background-removed,
    enveloped) B-scan.

    Per-trace peaks above threshold_fraction * global max are clustered by
    (trace, time) adjacency; clusters with at least min_support distinct
    traces are hyperbola-fitted. Returns (box, fit) pairs sorted by
    descending score = 1 / (1 + residual / t0).
    """
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must be in (0, 1)")
    data = b.data.astype(np.float64)
    peak_floor = threshold_fraction * data.max()
    if peak_floor <= 0:
        return []

    peaks, wavelet_width = _pick_peaks(data, peak_floor)
    if peaks.size == 0:
        return []
    if time_gap is None:
        time_gap = max(3.0, 1.5 * wavelet_width)

    clusters = _cluster_peaks(peaks, trace_gap, time_gap)
    clusters = _merge_overlapping(clusters)
    spacing = _trace_spacing(b, trace_spacing)
    dt = b.dt

    results = []
    for cluster in clusters:
        tr = cluster[:, 0].astype(int)
        sm = cluster[:, 1].astype(int)
        if len(np.unique(tr)) < min_support:
            continue
        # one arrival per trace: the strongest peak, parabolic-refined
        arrivals = {}
        for t_idx, s_idx in zip(tr, sm):
            amp = data[t_idx, s_idx]
            if t_idx not in arrivals or amp > arrivals[t_idx][1]:
                arrivals[t_idx] = (s_idx, amp)
        xs = np.array(sorted(arrivals))
        js = np.array([arrivals[x][0] for x in xs], dtype=float)
        for k, (x, j) in enumerate(zip(xs, js.astype(int))):
            if 0 < j < b.n_samples - 1:
                y0, y1, y2 = data[x, j - 1], data[x, j], data[x, j + 1]
                denom = y0 - 2 * y1 + y2
                if denom < 0:
                    js[k] = j + 0.5 * (y0 - y2) / denom
        fit = _fit_hyperbola(xs.astype(float), js * dt, spacing, dt)
        if fit is None:
            continue
        x0, t0, v, residual = fit

        pad_t = 2.0 * wavelet_width
        box = BoundingBox(
            x_min=float(max(0, tr.min() - 1)),
            y_min=float(max(0, sm.min() - pad_t)),
            x_max=float(min(b.n_traces - 1, tr.max() + 1)),
            y_max=float(min(b.n_samples - 1, sm.max() + pad_t)),
            score=1.0 / (1.0 + residual / t0),
        )
        results.append((box, HyperbolaFit(x0, t0, v, residual)))

    results.sort(key=lambda pair: -pair[0].score)
    return results
