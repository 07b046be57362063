"""Reference solutions kept deliberately apart from the solver code path.

Nothing here calls into the ADE, shape function or time-march modules:
closed-form empty-cavity modes, a finite-difference TEz eigen-solver for
frequency-dependent permittivity, and a fine RK4 integration of the Drude
auxiliary equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import eigsh

from .constants import C0, EPS0, MU0
from .errors import InvalidMode, NoConvergence


@dataclass(frozen=True)
class ModeIndex:
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0 or (self.m == 0 and self.n == 0):
            raise InvalidMode(f"invalid TEz mode ({self.m}, {self.n})")


def empty_cavity_resonance(a: float, b: float, mode: ModeIndex | tuple) -> float:
    """TEz resonance ``(c0/2) sqrt((m/a)^2 + (n/b)^2)`` of an a x b PEC rectangle."""
    if not (a > 0 and b > 0):
        raise ValueError("cavity dimensions must be positive")
    if not isinstance(mode, ModeIndex):
        mode = ModeIndex(*mode)
    return 0.5 * C0 * np.hypot(mode.m / a, mode.n / b)


def empty_cavity_modes(a: float, b: float, f_max: float) -> list:
    """``(frequency, m, n)`` for every mode up to ``f_max``, ascending."""
    out = []
    for m in range(int(2 * a * f_max / C0) + 1):
        for n in range(int(2 * b * f_max / C0) + 1):
            if m or n:
                f = empty_cavity_resonance(a, b, ModeIndex(m, n))
                if f <= f_max:
                    out.append((f, m, n))
    return sorted(out)


def plasma_profile(region, omega_p: float):
    """Relative permittivity ``1 - (omega_p / omega)^2`` inside ``region`` (x0, x1, y0, y1), 1 elsewhere."""
    x0, x1, y0, y1 = region

    def eps(X, Y, omega):
        inside = (X >= x0) & (X <= x1) & (Y >= y0) & (Y <= y1)
        return np.where(inside, 1.0 - (omega_p / omega) ** 2, 1.0)

    return eps


def uniform_plasma_shift(f: float, omega_p: float) -> float:
    """Cavity resonance after filling with lossless plasma: ``sqrt(f^2 + (omega_p / 2 pi)^2)``."""
    return float(np.sqrt(f**2 + (omega_p / (2 * np.pi)) ** 2))


def _neumann_operator(inv_eps, hx, hy):
    """-div(inv_eps grad) on cell centres with zero normal flux at the walls."""
    ny, nx = inv_eps.shape
    idx = np.arange(nx * ny).reshape(ny, nx)
    rows, cols, vals = [], [], []
    diag = np.zeros((ny, nx))
    # x faces
    kx = 0.5 * (inv_eps[:, 1:] + inv_eps[:, :-1]) / hx**2
    diag[:, 1:] += kx
    diag[:, :-1] += kx
    rows += [idx[:, 1:].ravel(), idx[:, :-1].ravel()]
    cols += [idx[:, :-1].ravel(), idx[:, 1:].ravel()]
    vals += [-kx.ravel(), -kx.ravel()]
    # y faces
    ky = 0.5 * (inv_eps[1:, :] + inv_eps[:-1, :]) / hy**2
    diag[1:, :] += ky
    diag[:-1, :] += ky
    rows += [idx[1:, :].ravel(), idx[:-1, :].ravel()]
    cols += [idx[:-1, :].ravel(), idx[1:, :].ravel()]
    vals += [-ky.ravel(), -ky.ravel()]
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    n = nx * ny
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _modes_near(a, b, eps_profile, grid_n, omega, k):
    """The ``k`` angular eigenfrequencies nearest ``omega``, permittivity frozen at ``omega``."""
    hx, hy = a / grid_n, b / grid_n
    X, Y = np.meshgrid((np.arange(grid_n) + 0.5) * hx, (np.arange(grid_n) + 0.5) * hy)
    eps = np.broadcast_to(np.asarray(eps_profile(X, Y, omega), dtype=float), X.shape)
    if np.any(eps <= 0):
        raise ValueError("permittivity is not positive at this frequency; the band lies below the plasma edge")
    L = _neumann_operator(1.0 / eps, hx, hy)
    vals = eigsh(L, k=k, sigma=(omega / C0) ** 2, which="LM", return_eigenvectors=False)
    return C0 * np.sqrt(np.clip(np.sort(vals), 0.0, None))


def _clusters(ws, rel):
    groups = [[ws[0]]]
    for w in ws[1:]:
        if w - groups[-1][-1] > rel * w:
            groups.append([w])
        else:
            groups[-1].append(w)
    return groups


def loaded_cavity_resonance_fd(
    a: float,
    b: float,
    eps_profile,
    band: tuple,
    grid_n: int = 256,
    tol: float = 1e-4,
    max_iter: int = 50,
    cluster_width: float = 5e-3,
) -> list:
    """Self-consistent TEz resonances (Hz) in ``band`` for a permittivity that depends on frequency.

    ``eps_profile(X, Y, omega)`` returns the relative permittivity on the
    cell-centred grid. The operator ``-div(eps^-1 grad Hz)`` with zero
    normal flux is discretised by second-order differences and solved by
    shift-invert Lanczos with the permittivity frozen at a trial frequency;
    the trial frequency is then moved to the computed mode and the solve
    repeated until the relative change is below ``tol``.

    Modes closer than ``cluster_width`` (relative) are iterated together
    with the permittivity frozen at the cluster mean, which keeps
    near-degenerate modes apart. Degenerate modes appear once per
    multiplicity.
    """
    f_lo, f_hi = band
    if not 0 < f_lo < f_hi:
        raise ValueError("band must satisfy 0 < f_lo < f_hi")
    if grid_n < 64:
        raise ValueError("grid_n must be at least 64")
    w_c = np.pi * (f_lo + f_hi)
    n_vac = sum(1 for f, _, _ in empty_cavity_modes(a, b, 1.1 * f_hi) if f >= 0.9 * f_lo)
    w0 = _modes_near(a, b, eps_profile, grid_n, w_c, n_vac + 6)
    w0 = [w for w in w0 if 0.95 * f_lo <= w / (2 * np.pi) <= 1.05 * f_hi]
    if not w0:
        return []
    out = []
    for group in _clusters(w0, cluster_width):
        cur = np.array(group)
        m = len(cur)
        for _ in range(max_iter):
            ev = _modes_near(a, b, eps_profile, grid_n, cur.mean(), m + 4)
            # the run of m consecutive eigenvalues that best matches the cluster
            starts = range(len(ev) - m + 1)
            s0 = min(starts, key=lambda s: np.abs(ev[s : s + m] - cur).sum())
            new = ev[s0 : s0 + m]
            done = np.all(np.abs(new - cur) <= tol * cur)
            cur = new
            if done:
                break
        else:
            raise NoConvergence(
                f"cluster near {group[0] / (2 * np.pi):.6g} Hz did not settle after {max_iter} iterations",
                last=list(cur / (2 * np.pi)),
            )
        out.extend(float(w / (2 * np.pi)) for w in cur if f_lo <= w / (2 * np.pi) <= f_hi)
    return sorted(out)


def integrate_ade_ode(mat, drive, fine_dt: float, n_samples: int | None = None, branch: str = "electric"):
    """E(t) from D(t) through the time-domain Drude equation, by classical RK4.

    With ``u = eps0 E - D`` the equation becomes
    ``u'' + gamma u' + omega_p^2 u = -omega_p^2 D`` with u = u' = 0 at t = 0.
    ``drive`` is either a callable D(t) or samples of D at ``k * fine_dt``;
    samples are spline-interpolated for the RK4 midpoints. Returns E at
    ``k * fine_dt``. ``branch="magnetic"`` integrates the Hz/Bz analogue
    with mu0 and the magnetic Drude parameters.
    """
    if branch == "electric":
        wp, g, scale = mat.omega_ep, mat.gamma_e, EPS0
    elif branch == "magnetic":
        wp, g, scale = mat.omega_mp, mat.gamma_m, MU0
    else:
        raise ValueError("branch must be 'electric' or 'magnetic'")
    if callable(drive):
        if n_samples is None:
            raise ValueError("n_samples is required with a callable drive")
        D = drive
        t = np.arange(n_samples) * fine_dt
    else:
        samples = np.asarray(drive, dtype=float)
        t = np.arange(len(samples)) * fine_dt
        D = CubicSpline(t, samples) if len(samples) > 1 else (lambda s: samples[0])
    d_t = np.asarray([D(s) for s in t], dtype=float) if callable(drive) else np.asarray(drive, dtype=float)

    def rhs(s, u, v):
        return v, -g * v - wp**2 * u - wp**2 * D(s)

    u = np.zeros(len(t))
    uu = vv = 0.0
    h = fine_dt
    for i in range(1, len(t)):
        s = t[i - 1]
        k1u, k1v = rhs(s, uu, vv)
        k2u, k2v = rhs(s + h / 2, uu + h / 2 * k1u, vv + h / 2 * k1v)
        k3u, k3v = rhs(s + h / 2, uu + h / 2 * k2u, vv + h / 2 * k2v)
        k4u, k4v = rhs(s + h, uu + h * k3u, vv + h * k3v)
        uu = uu + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        vv = vv + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        u[i] = uu
    return (u + d_t) / scale
