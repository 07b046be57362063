"""Spectra of probe records, charge density and spurious-mode checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TooShort
from .kernel import KernelParams
from .nodes import NodeCloud, support
from .shapes import build_scalar_shapes, build_vector_shapes, divergence_rows

MIN_SAMPLES = 16


@dataclass(frozen=True)
class Peak:
    bin_frequency: float
    magnitude: float
    frequency: float  # refined by a log-parabola through three bins
    level_db: float  # relative to the global maximum of the spectrum


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    frequencies: np.ndarray
    magnitude: np.ndarray
    peaks: list
    bin_width: float
    floor_db: float

    def dominant(self) -> Peak:
        if not self.peaks:
            raise ValueError("spectrum has no peaks above the floor")
        return max(self.peaks, key=lambda p: p.magnitude)

    def peaks_near(self, f, tol):
        return [p for p in self.peaks if abs(p.frequency - f) <= tol]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency", "magnitude"])
            for f, m in zip(self.frequencies, self.magnitude):
                w.writerow([repr(float(f)), repr(float(m))])

    def peaks_to_csv(self, path, reference=None) -> None:
        """Peak table.

        With ``reference`` frequencies, peaks within 5% of the reference span
        also get the nearest reference and the relative error to it.
        """
        ref = None if reference is None else np.asarray(reference, dtype=float)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency", "level_db", "bin_frequency", "reference", "relative_error"])
            for p in self.peaks:
                row = [repr(p.frequency), repr(p.level_db), repr(p.bin_frequency)]
                if ref is not None and ref.size and 0.95 * ref.min() <= p.frequency <= 1.05 * ref.max():
                    r = float(ref[np.argmin(np.abs(ref - p.frequency))])
                    row += [repr(r), repr(relative_error(p.frequency, r))]
                else:
                    row += ["", ""]
                w.writerow(row)


def _as_series(series, dt, probe, component):
    if hasattr(series, "times") and hasattr(series, "E"):
        t = np.asarray(series.times)
        if len(t) < MIN_SAMPLES:
            raise TooShort(f"need at least {MIN_SAMPLES} samples, got {len(t)}")
        steps = np.diff(t)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            raise ValueError("probe record is not uniformly sampled")
        return series.E[:, probe, component], float(steps[0])
    x = np.asarray(series, dtype=float)
    if len(x) < MIN_SAMPLES:
        raise TooShort(f"need at least {MIN_SAMPLES} samples, got {len(x)}")
    if dt is None or not dt > 0:
        raise ValueError("a positive dt is required for raw sample arrays")
    return x, float(dt)


def spectrum(
    series,
    dt: float | None = None,
    window: str = "hann",
    zero_pad_factor: int = 4,
    floor_db: float = -60.0,
    probe: int = 0,
    component: int = 1,
) -> SpectrumResult:
    """Magnitude spectrum of a probe record (or a raw sample array with ``dt``).

    Peaks are local maxima more than ``floor_db`` below the global maximum,
    refined by fitting a parabola to the log-magnitude of the three bins
    around each maximum.
    """
    x, dt = _as_series(series, dt, probe, component)
    if zero_pad_factor < 1:
        raise ValueError("zero_pad_factor must be at least 1")
    if window == "hann":
        x = x * np.hanning(len(x))
    elif window != "none":
        raise ValueError(f"unknown window {window!r}")
    n = zero_pad_factor * len(x)
    mag = np.abs(np.fft.rfft(x, n=n))
    freq = np.fft.rfftfreq(n, dt)
    df = 1.0 / (n * dt)
    peaks = []
    top = mag.max()
    if top > 0:
        i = np.flatnonzero((mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:])) + 1
        level = 20 * np.log10(np.maximum(mag[i], 1e-300) / top)
        for k, lv in zip(i[level > floor_db], level[level > floor_db]):
            a, b, c = np.log(mag[k - 1 : k + 2] + 1e-300 * top)
            den = a - 2 * b + c
            off = 0.5 * (a - c) / den if den != 0 else 0.0
            peaks.append(Peak(float(freq[k]), float(mag[k]), float(freq[k] + off * df), float(lv)))
    return SpectrumResult(freq, mag, peaks, df, floor_db)


def relative_error(measured: float, analytical: float) -> float:
    if not analytical > 0:
        raise ValueError("analytical value must be positive")
    return abs(measured - analytical) / analytical


def spurious_mode_scan(spec: SpectrumResult, f_min: float, f_max: float, floor_db: float = -30.0) -> list:
    """Peaks of ``spec`` in ``[f_min, f_max]`` louder than ``floor_db`` relative to the global maximum."""
    if not f_min < f_max:
        raise ValueError("f_min must be below f_max")
    return [p for p in spec.peaks if f_min <= p.frequency <= f_max and p.level_db > floor_db]


@dataclass(frozen=True, eq=False)
class ChargeField:
    positions: np.ndarray
    rho: np.ndarray
    timestamp: float
    basis_mode: str

    def __len__(self):
        return len(self.rho)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "rho"])
            for (x, y), r in zip(self.positions, self.rho):
                w.writerow([repr(float(x)), repr(float(y)), repr(float(r))])


def charge_density(
    state,
    cloud: NodeCloud,
    kernel: KernelParams,
    radius: float,
    basis_mode: str = "vector",
    grid=None,
    timestamp: float = float("nan"),
    source_radius: float | None = None,
    images: bool = True,
) -> ChargeField:
    """rho = div D sampled on ``grid`` (vector node positions by default).

    D is split into the impressed source part ``state.D_imp`` and the rest.
    The rest goes through the divergence rows of the active basis, which
    vanish identically for the vector basis. The impressed part is a
    nodal spike and is differentiated with compact scalar shapes of radius
    ``source_radius`` (1.5 h by default, the nearest ring of nodes), so
    the source charge stays on the stencil around the injection node.
    """
    pts = cloud.positions_vec if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
    if state.D_now.shape != (cloud.n_vector, 2):
        raise ShapeMismatch("state does not match the cloud's vector node set")
    sup = support(cloud, pts, "vector", radius, images=images)
    if basis_mode == "vector":
        shapes = build_vector_shapes(sup, kernel)
    elif basis_mode == "scalar":
        shapes = build_scalar_shapes(sup, kernel)
    else:
        raise ValueError(f"unknown basis_mode {basis_mode!r}")
    rho = divergence_rows(shapes, cloud.n_vector) @ (state.D_now - state.D_imp).ravel()
    if np.any(state.D_imp):
        r_src = 1.5 * cloud.spacing if source_radius is None else source_radius
        src_shapes = build_scalar_shapes(support(cloud, pts, "vector", r_src, images=images), kernel)
        rho = rho + divergence_rows(src_shapes, cloud.n_vector) @ state.D_imp.ravel()
    return ChargeField(pts, rho, timestamp, basis_mode)


def concentration_ratio(field: ChargeField, center, radius: float):
    """Share of sum |rho| within ``radius`` of ``center``; None when rho vanishes everywhere."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    a = np.abs(field.rho)
    total = a.sum()
    if total == 0:
        return None
    d = np.hypot(*(field.positions - np.asarray(center, dtype=float)).T)
    return float(a[d <= radius * (1 + 1e-12)].sum() / total)


def write_summary(path, items: dict) -> None:
    """``key = value`` text, one line per item, in insertion order."""
    with open(path, "w") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n")
