"""Drude dispersion and its auxiliary-differential-equation recursions.

Flux-to-field updates use a two-deep recursion

    E^{n+1} = b0 D^{n+1} + b1 D^n + b2 D^{n-1} - a1 E^n - a2 E^{n-1}

(and the same form with c, d for Hz from Bz). The coefficients come from
central differences of the time-domain Drude equation with the
semi-implicit average of the field over three levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import EPS0, MU0
from .errors import PoleAtZero


@dataclass(frozen=True)
class DrudeMaterial:
    """Electric and magnetic Drude parameters in rad/s."""

    omega_ep: float = 0.0
    gamma_e: float = 0.0
    omega_mp: float = 0.0
    gamma_m: float = 0.0

    def __post_init__(self):
        for name in ("omega_ep", "gamma_e", "omega_mp", "gamma_m"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")

    @property
    def is_vacuum(self) -> bool:
        return self.omega_ep == self.gamma_e == self.omega_mp == self.gamma_m == 0.0


VACUUM = DrudeMaterial()


@dataclass(frozen=True)
class AdeCoefficients:
    a1: float
    a2: float
    b0: float
    b1: float
    b2: float
    c1: float
    c2: float
    d0: float
    d1: float
    d2: float
    A: float
    C: float
    M: int = 2

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("a1", "a2", "b0", "b1", "b2", "c1", "c2", "d0", "d1", "d2", "A", "C", "M")}


def _branch(omega_p, gamma, dt, scale):
    den = 4 * scale + 2 * dt * scale * gamma + scale * dt**2 * omega_p**2
    p1 = (2 * scale * dt**2 * omega_p**2 - 8 * scale) / den
    p2 = (4 * scale - 2 * dt * scale * gamma + scale * dt**2 * omega_p**2) / den
    q0 = (4 + 2 * dt * gamma) / den
    q1 = -8 / den
    q2 = (4 - 2 * dt * gamma) / den
    return p1, p2, q0, q1, q2, den


def compute_coefficients(mat: DrudeMaterial, dt: float) -> AdeCoefficients:
    if not dt > 0:
        raise ValueError("dt must be positive")
    a1, a2, b0, b1, b2, A = _branch(mat.omega_ep, mat.gamma_e, dt, EPS0)
    c1, c2, d0, d1, d2, C = _branch(mat.omega_mp, mat.gamma_m, dt, MU0)
    return AdeCoefficients(a1, a2, b0, b1, b2, c1, c2, d0, d1, d2, A, C)


def update_E_from_D(coeffs: AdeCoefficients, D_hist, E_hist):
    """E at the next level from ``D_hist = (D^{n+1}, D^n, D^{n-1})`` and ``E_hist = (E^n, E^{n-1})``."""
    d_new, d_now, d_old = D_hist
    e_now, e_old = E_hist
    return (
        coeffs.b0 * np.asarray(d_new)
        + coeffs.b1 * np.asarray(d_now)
        + coeffs.b2 * np.asarray(d_old)
        - coeffs.a1 * np.asarray(e_now)
        - coeffs.a2 * np.asarray(e_old)
    )


def update_H_from_B(coeffs: AdeCoefficients, B_hist, H_hist):
    """Hz at the next half level; same recursion with the magnetic coefficients."""
    b_new, b_now, b_old = B_hist
    h_now, h_old = H_hist
    return (
        coeffs.d0 * np.asarray(b_new)
        + coeffs.d1 * np.asarray(b_now)
        + coeffs.d2 * np.asarray(b_old)
        - coeffs.c1 * np.asarray(h_now)
        - coeffs.c2 * np.asarray(h_old)
    )


def _relative(omega_p, gamma, omega):
    omega = np.asarray(omega, dtype=float)
    if omega_p > 0 and np.any(omega == 0):
        raise PoleAtZero("Drude response is singular at omega = 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 1.0 - omega_p**2 / (omega**2 - 1j * gamma * omega)
    if omega_p == 0:
        out = np.ones_like(out)
    return out


def eval_drude_permittivity(mat: DrudeMaterial, omega):
    """Relative permittivity ``1 - w_ep^2 / (w^2 - j g_e w)`` (engineering sign convention)."""
    return _relative(mat.omega_ep, mat.gamma_e, omega)


def eval_drude_permeability(mat: DrudeMaterial, omega):
    return _relative(mat.omega_mp, mat.gamma_m, omega)
