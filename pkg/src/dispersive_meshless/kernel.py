"""Gaussian radial kernel and its closed-form partial derivatives.

The kernel is ``psi(r) = exp(-(r / (c * h_ref))**2)``. Because the Gaussian
factorises as ``g(dx) * g(dy)``, every mixed partial is a product of 1D
derivatives, which keeps all orders exact and cheap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelParams:
    """Shape parameter ``c`` and the reference length that sets the kernel width."""

    shape_parameter: float = 3.0
    support_scale: float = 1.0

    def __post_init__(self):
        if not self.shape_parameter > 0:
            raise ValueError("shape_parameter must be positive")
        if not self.support_scale > 0:
            raise ValueError("support_scale must be positive")

    @property
    def width(self) -> float:
        return self.shape_parameter * self.support_scale


def _gauss_1d(u, order):
    # u is the coordinate already divided by the kernel width
    g = np.exp(-u * u)
    if order == 0:
        return g
    if order == 1:
        return -2.0 * u * g
    if order == 2:
        return (4.0 * u * u - 2.0) * g
    if order == 3:
        return (-8.0 * u**3 + 12.0 * u) * g
    raise ValueError(f"unsupported derivative order {order}")


def partial(params: KernelParams, dx, dy, nx: int, ny: int):
    """Return d^(nx+ny) psi / dx^nx dy^ny evaluated at the offsets ``(dx, dy)``."""
    w = params.width
    ux = np.asarray(dx, dtype=float) / w
    uy = np.asarray(dy, dtype=float) / w
    return _gauss_1d(ux, nx) * _gauss_1d(uy, ny) / w ** (nx + ny)


def evaluate(params: KernelParams, dx, dy):
    """Kernel value ``psi`` at the offsets ``(dx, dy)``."""
    return partial(params, dx, dy, 0, 0)


def partials(params: KernelParams, dx, dy, order: int) -> dict[tuple[int, int], np.ndarray]:
    """All mixed partials of total ``order``, keyed by ``(nx, ny)``."""
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    return {(order - k, k): partial(params, dx, dy, order - k, k) for k in range(order + 1)}
