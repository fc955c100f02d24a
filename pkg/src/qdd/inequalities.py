"""Randomised checks of the functional inequalities behind the entropy bound.

All suites draw admissible fields from :func:`sample_test_function`: a
Neumann-compatible cosine series pushed through ``exp`` so that the pinch
``k <= u <= 1/k`` holds by construction. Suites are deterministic given the
master seed, and their aggregates (counts, minima, maxima) do not depend on
sample order.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .diagnostics import fisher_information, log_sobolev_ratio
from .errors import DegenerateRatio, DeltaTooLarge
from .grid import BC, Geometry, Grid, ScalarField, _values, build_grid, derivative, \
    hessian_parts, integrate

GAMMA_TOL = 1e-8


@dataclass(frozen=True)
class SampleSpec:
    seed: int
    k: float = 0.2
    modes: int = 6
    decay: float = 1.0
    margin: float = 1e-3

    def __post_init__(self):
        if not 0 < self.k < 1:
            raise ValueError("pinch k must lie in (0, 1)")
        if self.modes < 0:
            raise ValueError("modes must be nonnegative")
        if not 0 <= self.margin < (1 / self.k - self.k) / 2:
            raise ValueError("margin leaves no admissible range")


def _basis(grid: Grid, i: int):
    """Mode ``i`` and its derivative; both ends have zero slope."""
    x, L = grid.nodes, grid.L
    if grid.geometry is Geometry.SLAB:
        a = i * math.pi / L
        return np.cos(a * x), -a * np.sin(a * x)
    a = i * math.pi / L**2
    return np.cos(a * x * x), -2 * a * x * np.sin(a * x * x)


def _series(grid: Grid, spec: SampleSpec, rng: np.random.Generator,
            amplitudes=None):
    if amplitudes is None:
        z = rng.standard_normal(spec.modes)
        amplitudes = z * np.arange(1, spec.modes + 1, dtype=float) ** (-spec.decay)
    phi = np.zeros(grid.N)
    dphi = np.zeros(grid.N)
    for i, a in enumerate(amplitudes, start=1):
        b, db = _basis(grid, i)
        phi += a * b
        dphi += a * db
    return phi, dphi


def _pinched(phi, dphi, spec: SampleSpec, t: float):
    """``u = exp(s t phi / max|phi|)`` with ``s`` fixed by the pinch."""
    s = -math.log(spec.k + spec.margin)
    scale = float(np.max(np.abs(phi)))
    if scale == 0.0:
        return np.ones_like(phi), np.zeros_like(phi)
    c = s * t / scale
    u = np.exp(c * phi)
    return u, c * dphi * u


def sample_test_function(grid: Grid, spec: SampleSpec, amplitudes=None,
                         strength: float | None = None, with_normal_derivative=False):
    """Admissible field for the pinched inequalities.

    The profile is ``exp(s t phi)`` with ``phi`` a cosine series in ``x``
    (slab) or ``r^2`` (ball), normalised to ``max|phi| = 1``, ``t`` uniform
    in ``[0, 1]`` and ``s = -log(k + margin)``; hence
    ``k + margin <= u <= 1/(k + margin) <= 1/k - margin``. Zero amplitudes
    give the constant 1, the geometric midpoint of ``[k, 1/k]``.

    Parameters
    ----------
    amplitudes : sequence, optional
        Overrides the random mode amplitudes.
    strength : float, optional
        Overrides the random ``t``.
    with_normal_derivative : bool
        Also return the exact outer normal derivative (zero up to rounding).
    """
    rng = np.random.default_rng(spec.seed)
    phi, dphi = _series(grid, spec, rng, amplitudes)
    t = rng.uniform() if strength is None else float(strength)
    u, du = _pinched(phi, dphi, spec, t)
    f = ScalarField(grid, u, BC.NEUMANN)
    if with_normal_derivative:
        return f, float(du[-1])
    return f


def eval_c0_gamma(d: int, delta: float):
    """Largest admissible ``c0`` and the resulting ``gamma = (1 + (d-1) c0)/d``.

    For ``d = 1`` the mixed term integrates to ``(1/3) int u'^4/u^2`` and the
    bound holds with ``c0 = gamma = 1`` whenever ``delta < 1/3``.

    Raises
    ------
    DeltaTooLarge
        If ``c0`` would be nonpositive (``d >= 2``) or ``delta >= 1/3`` (``d = 1``).
    """
    if d not in (1, 2, 3):
        raise ValueError(f"d must be 1, 2 or 3, got {d}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if d == 1:
        if delta >= 1.0 / 3.0:
            raise DeltaTooLarge(f"delta={delta} >= 1/3 in one dimension")
        return 1.0, 1.0
    shrink = 1.0 - (d + 2) * delta / d
    if shrink <= (d - 1) / (d + 2):
        raise DeltaTooLarge(f"delta={delta} leaves no positive c0 for d={d}")
    c0 = 1.0 - (d - 1) / ((d + 2) * shrink)
    assert c0 <= 3.0 / (d + 2) + 1e-15
    return c0, (1.0 + (d - 1) * c0) / d


def _derivs(grid: Grid, u: np.ndarray):
    upp, ur = hessian_parts(grid, u, BC.NEUMANN)
    du = derivative(grid, u, BC.NEUMANN)
    lap = upp + (grid.d - 1) * ur
    hess = upp**2 + (grid.d - 1) * ur**2
    return du, lap, hess


def gamma_functionals(grid: Grid, u, delta: float):
    """``(J, K)`` with ``J = int |D^2u|^2 + lap(u)|grad u|^2/u - delta |grad u|^4/u^2``."""
    u = _values(grid, u)
    du, lap, hess = _derivs(grid, u)
    g2 = du * du
    J = integrate(grid, hess + lap * g2 / u - delta * g2 * g2 / (u * u))
    K = integrate(grid, hess)
    return J, K


@dataclass
class GammaCheck:
    J: float
    K: float
    gamma: float
    margin: float

    @property
    def relative_margin(self) -> float:
        return self.margin / self.K if self.K > 0 else 0.0

    def violated(self, tol: float = GAMMA_TOL) -> bool:
        return self.margin < -tol * self.K


def check_gamma_bound(grid: Grid, u, delta: float) -> GammaCheck:
    """Margin ``J(u) - gamma K(u)`` of the coercivity bound."""
    _, gamma = eval_c0_gamma(grid.d, delta)
    J, K = gamma_functionals(grid, u, delta)
    return GammaCheck(J=J, K=K, gamma=gamma, margin=J - gamma * K)


def n2_required_constant(grid: Grid, u, delta1: float, delta2: float) -> float:
    """``int u^4 - delta1 int u^2 |grad log u|^4 - delta2 int |grad u|^2``."""
    u = _values(grid, u)
    du = derivative(grid, u, BC.NEUMANN)
    g = du / u
    grad_sq = fisher_information(grid, u) / 4.0
    return integrate(grid, u**4 - delta1 * u * u * g**4) - delta2 * grad_sq


def check_n2_inequality(grid: Grid, u, delta1: float, delta2: float,
                        normalize: bool = True) -> float:
    """Constant the fourth-moment bound needs for ``u`` (``||u||_2 = 1`` by default)."""
    u = np.array(_values(grid, u), dtype=float)
    if normalize:
        u /= math.sqrt(integrate(grid, u * u))
    return n2_required_constant(grid, u, delta1, delta2)


def h22_norm(grid: Grid, u: np.ndarray) -> float:
    du, _, hess = _derivs(grid, u)
    return math.sqrt(integrate(grid, u * u + du * du + hess))


def check_gagliardo_instance(grid: Grid, u, instance: str = "sup") -> float:
    """Ratio ``lhs / (||u||_{2,2}^theta ||u||_2^{1-theta})``.

    ``instance="sup"``: ``lhs = ||u||_inf``, ``theta = d/4``.
    ``instance="grad4"``: ``lhs = ||grad u||_4``, ``theta = (4+d)/8``.
    """
    u = np.asarray(_values(grid, u), dtype=float)
    if np.ptp(u) <= 1e-14 * max(1.0, float(np.max(np.abs(u)))):
        raise DegenerateRatio("constant field: interpolation ratio is degenerate")
    d = grid.d
    l2 = math.sqrt(integrate(grid, u * u))
    if instance == "sup":
        theta = d / 4.0
        lhs = float(np.max(np.abs(u)))
    elif instance == "grad4":
        theta = (4.0 + d) / 8.0
        du = derivative(grid, u, BC.NEUMANN)
        lhs = integrate(grid, du**4) ** 0.25
    else:
        raise ValueError(f"unknown instance {instance!r}")
    return lhs / (h22_norm(grid, u) ** theta * l2 ** (1.0 - theta))


def n2_exponent_audit(d: int, alpha: float) -> dict:
    """Exponents of the interpolation chain behind the fourth-moment bound.

    Returns the powers of ``||u||_2``, ``||v||_{1,4}`` and ``||u||_{1,2}``
    and the Young weight ``d(3 - alpha)/8``, which must stay below 1 for the
    absorption step; that is what restricts ``alpha`` to ``(0, 1)`` for
    ``d = 2`` and ``(1/3, 1)`` for ``d = 3``. No numeric constant is claimed.
    """
    lo = {2: 0.0, 3: 1.0 / 3.0}.get(d)
    if lo is None:
        raise ValueError("audit is defined for d = 2, 3")
    young = d * (3 - alpha) / 8
    return {
        "d": d,
        "alpha": alpha,
        "alpha_window": [lo, 1.0],
        "alpha_admissible": lo < alpha < 1,
        "power_u_l2": (16 - (3 - alpha) * d) / 4,
        "power_v_w14": (1 + alpha) * d / 2,
        "power_u_h1": (1 - alpha) * d / 2,
        "young_weight": young,
        "young_ok": young < 1,
    }


@dataclass
class InequalityReport:
    inequality: str
    d: int
    trials: int
    violations: int
    worst_margin: float
    empirical_constant: float
    seed: int
    deltas: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"inequality": self.inequality, "d": self.d}
        out.update({f"delta{k}" if k else "delta": v for k, v in self.deltas.items()})
        out.update(trials=self.trials, violations=self.violations,
                   worst_margin=self.worst_margin,
                   empirical_constant=self.empirical_constant, seed=self.seed)
        out.update(self.extra)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _sample_seeds(master: int, count: int, offset: int = 0):
    ss = np.random.SeedSequence([master, offset])
    return [int(c.generate_state(1)[0]) for c in ss.spawn(count)]


def default_grid(d: int, N: int = 201) -> Grid:
    return build_grid(d, "slab" if d == 1 else "radial", N)


def gamma_suite(d: int, delta: float, trials: int = 200, seed: int = 0, N: int = 201,
                spec_kw: dict | None = None, tol: float = GAMMA_TOL) -> InequalityReport:
    grid = default_grid(d, N)
    kw = spec_kw or {}
    worst = math.inf
    viol = 0
    for s in _sample_seeds(seed, trials):
        u = sample_test_function(grid, SampleSpec(seed=s, **kw))
        chk = check_gamma_bound(grid, u, delta)
        if chk.K > 0:
            worst = min(worst, chk.relative_margin)
        viol += chk.violated(tol)
    return InequalityReport("gamma", d, trials, viol, worst, eval_c0_gamma(d, delta)[1],
                            seed, deltas={"": delta})


def adversarial_gamma_probe(d: int, delta: float, restarts: int = 50, seed: int = 0,
                            N: int = 101, modes: int = 4, k: float = 0.2,
                            budget: int = 10_000):
    """Random-restart coordinate search minimising ``margin / K``.

    Moves each mode amplitude (and the overall strength) by a shrinking
    step and keeps any change that lowers the relative margin. Returns
    ``(min relative margin, evaluations used)``.
    """
    grid = default_grid(d, N)
    spec = SampleSpec(seed=0, k=k, modes=modes)
    rng = np.random.default_rng(seed)
    evals = 0
    per = budget // restarts

    def score(x):
        a, t = x[:-1], float(np.clip(x[-1], 0.0, 1.0))
        u = sample_test_function(grid, spec, amplitudes=a, strength=t)
        chk = check_gamma_bound(grid, u, delta)
        return chk.relative_margin if chk.K > 1e-300 else math.inf

    best = math.inf
    for _ in range(restarts):
        x = np.append(rng.standard_normal(modes), rng.uniform())
        f = score(x)
        used = 1
        step = 0.5
        while used < per and step > 1e-3:
            improved = False
            for j in range(modes + 1):
                for sgn in (1.0, -1.0):
                    if used >= per:
                        break
                    y = x.copy()
                    y[j] += sgn * step
                    if j == modes:
                        y[j] = min(max(y[j], 0.0), 1.0)
                    fy = score(y)
                    used += 1
                    if fy < f:
                        x, f, improved = y, fy, True
                        break
            if not improved:
                step *= 0.5
        evals += used
        best = min(best, f)
    return best, evals


def n2_samples(d: int, count: int, seed: int, delta1: float, delta2: float,
               N: int = 201, offset: int = 0, spec_kw: dict | None = None) -> np.ndarray:
    grid = default_grid(d, N)
    kw = spec_kw or {}
    return np.array([
        check_n2_inequality(grid, sample_test_function(grid, SampleSpec(seed=s, **kw)),
                            delta1, delta2)
        for s in _sample_seeds(seed, count, offset)
    ])


def n2_suite(d: int = 2, delta1: float = 0.1, delta2: float = 0.1, trials: int = 1000,
             holdout: int = 500, seed: int = 0, N: int = 201,
             spec_kw: dict | None = None, rtol: float = 1e-9) -> InequalityReport:
    """Empirical constant, its doubling stability and a held-out check.

    The constant is the sup of the required constant over ``2 * trials``
    samples (the first ``trials`` of which give the stability reference);
    ``holdout`` fresh samples are then counted as violations if they need
    more than the recorded constant (up to ``rtol`` for rounding).
    """
    vals = n2_samples(d, 2 * trials, seed, delta1, delta2, N, spec_kw=spec_kw)
    c_half = float(np.max(vals[:trials]))
    c_full = float(np.max(vals))
    change = abs(c_full - c_half) / abs(c_half)
    held = n2_samples(d, holdout, seed, delta1, delta2, N, offset=1, spec_kw=spec_kw)
    viol = int(np.sum(held > c_full + rtol * abs(c_full)))
    return InequalityReport(
        "n2", d, 2 * trials, viol, float(c_full - np.max(held)), c_full, seed,
        deltas={1: delta1, 2: delta2},
        extra={"constant_at_half": c_half, "relative_change": change,
               "holdout": holdout, "stable": change < 0.1})


def _gns_sup(grid, instance, seeds, kw):
    ratios = []
    for s in seeds:
        u = sample_test_function(grid, SampleSpec(seed=s, **kw))
        try:
            ratios.append(check_gagliardo_instance(grid, u, instance))
        except DegenerateRatio:
            continue
    return (max(ratios) if ratios else math.nan), len(ratios)


def gagliardo_suite(d: int, instance: str = "sup", trials: int = 200, seed: int = 0,
                    N: int = 201, spec_kw: dict | None = None) -> InequalityReport:
    """Sup of the interpolation ratio at ``N`` and at ``2N - 1`` nodes.

    The same samples are evaluated on both grids; the suite is stable when
    the sup moves by less than 10% under refinement.
    """
    kw = spec_kw or {}
    seeds = _sample_seeds(seed, trials)
    sup, used = _gns_sup(default_grid(d, N), instance, seeds, kw)
    sup_fine, _ = _gns_sup(default_grid(d, 2 * N - 1), instance, seeds, kw)
    change = abs(sup_fine - sup) / abs(sup)
    stable = bool(math.isfinite(sup_fine) and change < 0.1)
    return InequalityReport("gns-" + instance, d, trials, 0, math.nan, sup_fine, seed,
                            extra={"evaluated": used, "constant_coarse": sup,
                                   "relative_change": change, "stable": stable})


def log_sobolev_suite(d: int, trials: int = 200, seed: int = 0, N: int = 201,
                      spec_kw: dict | None = None) -> InequalityReport:
    """Empirical ``c_L``: sup of ``int n log n / (J2/4)`` over normalised samples.

    Ratios may be negative (``int n log n < 0`` whenever ``|Omega| > 1`` and
    ``n`` is close to uniform). A violation is a sample that breaks the
    inequality at the recorded constant or whose ratio is not finite. The
    sup over the first half of the samples is reported for information; it
    is dominated by rare high-amplitude draws and is not a pass criterion.
    """
    grid = default_grid(d, N)
    kw = spec_kw or {}
    ratios = []
    for s in _sample_seeds(seed, trials):
        u = sample_test_function(grid, SampleSpec(seed=s, **kw))
        try:
            ratios.append(log_sobolev_ratio(grid, u))
        except ValueError:
            continue
    r = np.array(ratios)
    c_L = float(np.max(r)) if r.size else math.nan
    viol = int(np.sum(~np.isfinite(r)))
    half = float(np.max(r[: max(1, r.size // 2)])) if r.size else math.nan
    return InequalityReport("logsob", d, trials, viol, float(c_L - np.max(r)) if r.size else
                            math.nan, c_L, seed,
                            extra={"evaluated": int(r.size), "constant_at_half": half})


def neumann_family(grid: Grid, amplitude: float = 0.1) -> np.ndarray:
    """``1 + a cos(pi x/L)`` on a slab, ``1 + a cos(pi r^2/L^2)`` on a ball."""
    s = grid.nodes / grid.L
    arg = s if grid.geometry is Geometry.SLAB else s * s
    return 1.0 + amplitude * np.cos(math.pi * arg)


def dummy_refinement(d: int, Ns=(101, 201, 401), amplitude: float = 0.1):
    """``|I(rho)|`` on the Neumann family for each ``N`` and the fitted rate."""
    from .diagnostics import dummy_integral
    errs = []
    for N in Ns:
        grid = default_grid(d, N)
        rho = neumann_family(grid, amplitude)
        rho = rho / math.sqrt(integrate(grid, rho * rho))
        errs.append(abs(dummy_integral(grid, rho)))
    hs = [1.0 / (N - 1) for N in Ns]
    rate = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
    return errs, rate


DUMMY_RATE_MIN = 1.8
IDENTITY_TOL = 1e-10


def dummy_suite(d: int, trials: int = 200, seed: int = 0, N: int = 201) -> InequalityReport:
    """Refinement rate of the dummy integral plus the Hessian identity.

    A violation is either a refinement rate below ``DUMMY_RATE_MIN`` or,
    on radial grids, a sample whose decomposition residual exceeds
    ``IDENTITY_TOL``.
    """
    from .diagnostics import hessian_decomposition
    errs, rate = dummy_refinement(d)
    viol = int(rate < DUMMY_RATE_MIN)
    worst = 0.0
    if d > 1:
        grid = default_grid(d, N)
        for s in _sample_seeds(seed, trials):
            u = sample_test_function(grid, SampleSpec(seed=s))
            res = hessian_decomposition(grid, u.values).identity_residual
            worst = max(worst, res)
            viol += res > IDENTITY_TOL
    return InequalityReport("dummy", d, trials if d > 1 else 0, viol, worst, rate, seed,
                            extra={"errors": errs, "rate": rate,
                                   "identity_residual_max": worst})
