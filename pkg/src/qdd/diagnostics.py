"""Entropy, Fisher information and the radial Hessian decomposition."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .grid import BC, Geometry, Grid, _values, derivative, hessian_parts, integrate

_TINY = 1e-300


def entropy_density(n: np.ndarray) -> np.ndarray:
    """``n (log n - 1) + 1`` with the continuous value 1 at ``n = 0``."""
    n = np.asarray(n, dtype=float)
    safe = np.where(n < _TINY, 1.0, n)
    return np.where(n < _TINY, 1.0, safe * (np.log(safe) - 1.0) + 1.0)


def entropy(grid: Grid, n) -> float:
    """Physical entropy ``int n (log n - 1) + 1 dx``."""
    n = _values(grid, n)
    if np.any(n < 0):
        raise ValueError("entropy needs a nonnegative density")
    return integrate(grid, entropy_density(n))


def fisher_information(grid: Grid, rho) -> float:
    """``4 int |grad rho|^2``, evaluated as the discrete Dirichlet energy.

    Face differences are weighted by the face areas, so the value is the
    quadratic form of the grid Laplacian and needs no positivity floor.
    """
    r = _values(grid, rho)
    if np.any(r < 0):
        raise ValueError("rho must be nonnegative")
    dr = np.diff(r)
    return float(4.0 * np.sum(grid.face_g * dr * dr))


def fisher_information_log_form(grid: Grid, n) -> float:
    """``int n |grad log n|^2`` by nodal quadrature; needs ``n > 0``."""
    n = _values(grid, n)
    dlog = derivative(grid, np.log(n), BC.NONE)
    return integrate(grid, n * dlog * dlog)


def hessian_l2(grid: Grid, rho, bc=BC.NEUMANN) -> float:
    """``||D^2 rho||_2^2`` with the radial principal-value representation."""
    u = _values(grid, rho)
    upp, ur = hessian_parts(grid, u, bc)
    return integrate(grid, upp**2 + (grid.d - 1) * ur**2)


@dataclass
class EntropyReport:
    entropy: float
    fisher: float
    mass: float
    hessian_l2: float
    min_n: float
    max_n: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def entropy_report(grid: Grid, n) -> EntropyReport:
    n = _values(grid, n)
    rho = np.sqrt(n)
    return EntropyReport(
        entropy=entropy(grid, n),
        fisher=fisher_information(grid, rho),
        mass=integrate(grid, n),
        hessian_l2=hessian_l2(grid, rho),
        min_n=float(n.min()),
        max_n=float(n.max()),
    )


@dataclass
class HessianDecomposition:
    xi: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    varrho_sq: np.ndarray
    identity_residual: float


def hessian_decomposition(grid: Grid, rho, xi_floor: float | None = None,
                          tol_identity: float = 1e-10) -> HessianDecomposition:
    """Split ``|D^2 rho / rho|^2`` into trace, mixed and remainder parts.

    ``xi = |rho'|/rho``, ``eta = lap(rho)/(d rho)``, ``mu = rho''/rho - eta``
    (the radial form of ``(eta + mu) xi^2 = D^2 rho : (grad rho)^2 / rho^3``)
    and ``varrho^2 = |D^2 rho/rho|^2 - d eta^2 - d/(d-1) mu^2``. For radial
    fields the remainder vanishes identically; the returned
    ``identity_residual`` is the largest relative defect of the identity
    after clipping ``varrho^2`` at zero.
    """
    if grid.geometry is Geometry.SLAB:
        raise ValueError("the mu/varrho split needs d >= 2; use slab_curvature_check")
    u = _values(grid, rho)
    if not u.min() > 0:
        raise ValueError("rho must be strictly positive")
    d = grid.d
    upp, ur = hessian_parts(grid, u, BC.NEUMANN)
    du = derivative(grid, u, BC.NEUMANN)
    a = upp / u
    b = ur / u
    xi = np.abs(du) / u
    eta = (a + (d - 1) * b) / d
    if xi_floor is None:
        xi_floor = 1e-8 * np.max(np.abs(du)) / u.min()
    # same formula on both sides of the floor: it stays finite as xi -> 0
    mu = a - eta
    hess = a * a + (d - 1) * b * b
    varrho_sq = hess - d * eta**2 - d / (d - 1) * mu**2
    rebuilt = d * eta**2 + d / (d - 1) * mu**2 + np.maximum(varrho_sq, 0.0)
    scale = max(float(np.max(hess)), _TINY)
    residual = float(np.max(np.abs(hess - rebuilt)) / scale)
    return HessianDecomposition(xi=xi, eta=eta, mu=mu, varrho_sq=varrho_sq,
                                identity_residual=residual)


def slab_curvature_check(grid: Grid, rho) -> float:
    """In one dimension ``|rho''/rho|^2 = eta^2``; returns the sup defect."""
    u = _values(grid, rho)
    upp, _ = hessian_parts(grid, u, BC.NEUMANN)
    eta = upp / u
    return float(np.max(np.abs((upp / u) ** 2 - eta**2)))


def dummy_integrand(grid: Grid, rho) -> np.ndarray:
    """Pointwise ``rho^2 ((d+2) eta xi^2 + 2 mu xi^2 - xi^4)``.

    For radial fields this equals ``3 rho'^2 rho''/rho + (d-1) rho'^3/(r rho)
    - rho'^4/rho^2``, the divergence of ``|grad rho|^2 grad rho / rho``.
    """
    u = _values(grid, rho)
    if not u.min() > 0:
        raise ValueError("rho must be strictly positive")
    d = grid.d
    upp, ur = hessian_parts(grid, u, BC.NEUMANN)
    du = derivative(grid, u, BC.NEUMANN)
    xi2 = (du / u) ** 2
    a = upp / u
    b = ur / u if d > 1 else np.zeros_like(u)
    eta = (a + (d - 1) * b) / d
    mu = a - eta
    return u * u * ((d + 2) * eta * xi2 + 2 * mu * xi2 - xi2 * xi2)


def dummy_integral(grid: Grid, rho) -> float:
    """Quadrature of the dummy integrand; tends to zero for zero-flux fields."""
    return integrate(grid, dummy_integrand(grid, rho))


def log_sobolev_ratio(grid: Grid, rho) -> float:
    """``int n log n / (J2/4)`` for ``||rho||_2 = 1`` (``n = rho^2``)."""
    u = _values(grid, rho)
    u = u / np.sqrt(integrate(grid, u * u))
    n = u * u
    lhs = integrate(grid, np.where(n > _TINY, n * np.log(np.maximum(n, _TINY)), 0.0))
    j2 = fisher_information(grid, u)
    if j2 <= 0:
        raise ValueError("constant rho: ratio undefined")
    return lhs / (j2 / 4.0)


@dataclass
class GronwallReport:
    c2: float
    c3: float
    calibration_steps: int
    envelope: np.ndarray
    violations: int
    max_excess: float
    sup_entropy: float

    def to_dict(self) -> dict:
        return {"c2": self.c2, "c3": self.c3, "calibration_steps": self.calibration_steps,
                "violations": self.violations, "max_excess": self.max_excess,
                "sup_entropy": self.sup_entropy}


def gronwall_envelope(times, E, c2: float = 1.0, calibration: float = 0.25,
                      tol: float = 1e-9) -> GronwallReport:
    """Discrete Gronwall envelope for an entropy history.

    The constant ``c3`` is the largest ``(E_k - E_{k-1})/tau_k + c2 E_k`` seen
    over the first ``calibration`` fraction of the steps (clipped at 0). The
    envelope solves the implicit recursion

        e_k (1 + tau_k c2) = e_{k-1} + tau_k c3,   e_0 = E_0,

    which dominates ``E`` on the calibration window by construction; the
    remaining steps are then checked against it with absolute slack ``tol``.

    Parameters
    ----------
    times : array_like
        ``t_0 = 0, t_1, ..., t_K``; the step sizes may vary.
    E : array_like
        Entropy at the same times.
    """
    t = np.asarray(times, dtype=float)
    E = np.asarray(E, dtype=float)
    if t.shape != E.shape or t.size < 2:
        raise ValueError("need matching time and entropy histories of length >= 2")
    tau = np.diff(t)
    if np.any(tau <= 0):
        raise ValueError("times must increase strictly")
    m = max(1, int(math.ceil(calibration * tau.size)))
    rates = np.diff(E) / tau + c2 * E[1:]
    c3 = max(0.0, float(np.max(rates[:m])))
    env = np.empty_like(E)
    env[0] = E[0]
    for k in range(1, E.size):
        env[k] = (env[k - 1] + tau[k - 1] * c3) / (1 + tau[k - 1] * c2)
    excess = E - env
    return GronwallReport(c2=c2, c3=c3, calibration_steps=m, envelope=env,
                          violations=int(np.sum(excess[m + 1:] > tol)),
                          max_excess=float(np.max(excess)), sup_entropy=float(np.max(E)))
