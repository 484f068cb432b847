"""Discrete right-hand sides for the three coagulation models.

All three operators act on cell-averaged densities over a geometric grid
and return a :class:`RateField` carrying d(zeta)/dt per cell plus the rate
at which mass leaves through the upper boundary (the outflux ledger rate).

Design rules shared by the pairwise operators (epsilon family and its
Smoluchowski specialization):

* every integral is a midpoint sum over cells, so birth/death pairings
  stay exactly dual and the linear weak-form identities hold to rounding;
* a collision product at off-grid size p is split between the two
  bracketing cell centers with the unique two-point weights that preserve
  both particle number and particle mass (linear allocation in size);
* products that would land above the last cell center are not allocated;
  their full mass is routed to the outflux rate instead, realizing the
  domain indicator of the truncated weak form without losing mass.

With these rules the semi-discrete system satisfies, exactly in floating
point: d/dt(M1) + outflux_rate = 0, d/dt(M0) <= 0, and the epsilon = 1
operator coincides with the Smoluchowski one cellwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, DomainError
from .kernels import TruncatedKernel
from .sizedomain import NumberDensity, SizeGrid


@dataclass
class RateField:
    """d(zeta)/dt per cell plus the boundary mass-outflux rate."""

    grid: SizeGrid
    dzdt: np.ndarray
    outflux_rate: float


@dataclass(frozen=True)
class EpsParams:
    """Interpolation parameter of the generalized model and the domain cutoff."""

    eps: float
    n: float

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise DomainError("eps must lie in (0, 1]")
        if self.n <= 1.0:
            raise DomainError("n must exceed 1")


def _check_setup(density: NumberDensity, kernel: TruncatedKernel):
    if abs(density.grid.n - kernel.n) > 1e-12 * kernel.n:
        raise ConfigError(
            f"grid n={density.grid.n} does not match kernel truncation n={kernel.n}"
        )


def _deposit_targets(x, p):
    """Bracketing pivot index, linear weight, and overflow mask for births at p.

    Weight w goes to pivot a, (1-w) to pivot a+1, with w*x_a + (1-w)*x_{a+1}
    = p, so number and mass of the deposit are both exact.  Products above
    the last pivot overflow (mass routed to the boundary ledger).
    """
    overflow = p > x[-1]
    a = np.searchsorted(x, p, side="right") - 1
    a = np.clip(a, 0, x.size - 2)
    w = (x[a + 1] - p) / (x[a + 1] - x[a])
    w = np.where(overflow, 0.0, np.clip(w, 0.0, 1.0))
    return a, w, overflow


class PairScheme:
    """Pairwise event quadrature of the generalized (epsilon-family) operator.

    Collisions of an ordered size pair (big x_m, small x_j) happen at event
    rate Lambda(x_m, x_j) zeta_m zeta_j dx_m dx_j / eps (halved on the
    diagonal, which carries the symmetric double integral once).  Each
    event removes the big particle, removes the small one and rebirths it
    with weight (1 - eps), and creates one product at x_m + eps * x_j.
    """

    def __init__(self, grid: SizeGrid, kernel: TruncatedKernel, eps: float):
        if not (0.0 < eps <= 1.0):
            raise DomainError("eps must lie in (0, 1]")
        self.grid = grid
        self.eps = float(eps)
        x = grid.centers
        m_idx, j_idx = np.tril_indices(grid.size)
        self.m_idx = m_idx
        self.j_idx = j_idx
        self.diag = m_idx == j_idx
        self.K = np.asarray(kernel.eval(x[m_idx], x[j_idx]))
        p = x[m_idx] + eps * x[j_idx]
        self.p = p
        self.a, self.w, self.over = _deposit_targets(x, p)
        self.valid = ~self.over

    def rhs(self, values: np.ndarray):
        grid = self.grid
        zd = values * grid.widths
        rate = self.K * zd[self.m_idx] * zd[self.j_idx]
        events = rate / self.eps
        events = np.where(self.diag, 0.5 * events, events)

        outgo_big = np.where(self.diag, (1.0 + self.eps) * events, events)
        outgo_small = np.where(self.diag, 0.0, self.eps * events)
        outgo = np.bincount(self.m_idx, weights=outgo_big, minlength=grid.size)
        outgo += np.bincount(self.j_idx, weights=outgo_small, minlength=grid.size)

        ev = events[self.valid]
        wv = self.w[self.valid]
        av = self.a[self.valid]
        births = np.bincount(av, weights=ev * wv, minlength=grid.size)
        births += np.bincount(av + 1, weights=ev * (1.0 - wv), minlength=grid.size)

        outflux = float(np.sum(events[self.over] * self.p[self.over]))
        return (births - outgo) / grid.widths, outflux


class SmoluchowskiScheme:
    """Classical Smoluchowski quadrature over the full ordered-pair square.

    Births carry the 1/2 symmetry factor of the convolution integral; the
    death term is the plain collision sum.  Kept independent of
    :class:`PairScheme` so the epsilon = 1 equivalence is a genuine
    cross-check of two implementations, not one code path.
    """

    def __init__(self, grid: SizeGrid, kernel: TruncatedKernel):
        self.grid = grid
        x = grid.centers
        self.K = np.asarray(kernel.eval(x[:, None], x[None, :]))
        p = (x[:, None] + x[None, :]).ravel()
        self.p = p
        self.a, self.w, self.over = _deposit_targets(x, p)
        self.valid = ~self.over

    def rhs(self, values: np.ndarray):
        grid = self.grid
        zd = values * grid.widths
        pair = 0.5 * (self.K * np.outer(zd, zd)).ravel()

        ev = pair[self.valid]
        wv = self.w[self.valid]
        av = self.a[self.valid]
        births = np.bincount(av, weights=ev * wv, minlength=grid.size)
        births += np.bincount(av + 1, weights=ev * (1.0 - wv), minlength=grid.size)

        death = zd * (self.K @ zd)
        outflux = float(np.sum(pair[self.over] * self.p[self.over]))
        return (births - death) / grid.widths, outflux


class OhsScheme:
    """Upwind transport plus death for the Oort-Hulst-Safronov model.

    The advective flux at the right edge of cell b is zeta_b times a
    mass-matched velocity: the mass-eaten rate of cell b from partners at
    or below it, normalized by the pivot gap.  This makes the telescoped
    transport mass gain cancel the death mass loss pairwise, so the ledger
    identity d/dt(M1) + outflux_rate = 0 holds exactly; the edge-sampled
    velocity of :func:`ohs_velocity` differs from it at first order.
    """

    def __init__(self, grid: SizeGrid, kernel: TruncatedKernel):
        self.grid = grid
        x = grid.centers
        K = np.asarray(kernel.eval(x[:, None], x[None, :]))
        self.K_lower = np.tril(K)
        self.K_upper = np.triu(K)
        gaps = np.empty(grid.size)
        gaps[:-1] = x[1:] - x[:-1]
        gaps[-1] = grid.n - x[-1]
        self.gap_scale = grid.widths / gaps

    def rhs(self, values: np.ndarray):
        grid = self.grid
        x = grid.centers
        zd = values * grid.widths
        eaten = self.K_lower @ (x * zd)          # mass-eaten rate per unit zd of the eater
        flux = values * eaten * self.gap_scale   # number flux through right edges
        transport = np.empty(grid.size)
        transport[0] = -flux[0]
        transport[1:] = flux[:-1] - flux[1:]
        transport /= grid.widths
        death = values * (self.K_upper @ zd)
        outflux = float(x[-1] * flux[-1] + zd[-1] * eaten[-1])
        return transport - death, outflux


@lru_cache(maxsize=8)
def _pair_scheme(grid, kernel, eps):
    return PairScheme(grid, kernel, eps)


@lru_cache(maxsize=8)
def _sce_scheme(grid, kernel):
    return SmoluchowskiScheme(grid, kernel)


@lru_cache(maxsize=8)
def _ohs_scheme(grid, kernel):
    return OhsScheme(grid, kernel)


def generalized_rhs(density: NumberDensity, kernel: TruncatedKernel,
                    params: EpsParams) -> RateField:
    """Rate of the generalized coagulation operator at parameter eps."""
    _check_setup(density, kernel)
    if abs(params.n - kernel.n) > 1e-12 * kernel.n:
        raise ConfigError("params.n does not match the kernel truncation")
    scheme = _pair_scheme(density.grid, kernel, params.eps)
    dzdt, outflux = scheme.rhs(density.values)
    return RateField(density.grid, dzdt, outflux)


def sce_rhs(density: NumberDensity, kernel: TruncatedKernel) -> RateField:
    """Rate of the classical Smoluchowski operator."""
    _check_setup(density, kernel)
    scheme = _sce_scheme(density.grid, kernel)
    dzdt, outflux = scheme.rhs(density.values)
    return RateField(density.grid, dzdt, outflux)


def ohs_rhs(density: NumberDensity, kernel: TruncatedKernel) -> RateField:
    """Rate of the Oort-Hulst-Safronov operator (transport + death)."""
    _check_setup(density, kernel)
    scheme = _ohs_scheme(density.grid, kernel)
    dzdt, outflux = scheme.rhs(density.values)
    return RateField(density.grid, dzdt, outflux)


def ohs_velocities(density: NumberDensity, kernel: TruncatedKernel) -> np.ndarray:
    """Edge-sampled transport velocities, one per right cell edge.

    v_i = sum over partners with center strictly below x_i of
    x_j Lambda(edge_{i+1}, x_j) zeta_j dx_j; nonnegative by construction.
    """
    _check_setup(density, kernel)
    grid = density.grid
    x = grid.centers
    KE = np.asarray(kernel.eval(grid.edges[1:][:, None], x[None, :]))
    mask = x[None, :] < x[:, None]
    return (KE * mask) @ (x * density.values * grid.widths)


def ohs_velocity(density: NumberDensity, kernel: TruncatedKernel, i: int) -> float:
    """Transport velocity at the right edge of cell i."""
    if not (0 <= i < density.grid.size):
        raise DomainError(f"cell index {i} out of range")
    return float(ohs_velocities(density, kernel)[i])


def weak_action(rhs: RateField, omega) -> float:
    """Instantaneous weak-form pairing  sum_i omega(x_i) Q_i dx_i."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != rhs.grid.centers.shape:
        raise ConfigError("omega must be sampled at the grid cell centers")
    return float(np.sum(omega * rhs.dzdt * rhs.grid.widths))


def make_rhs(model: str, kernel: TruncatedKernel, eps: float | None = None):
    """Bind a model name to a density -> RateField callable."""
    if model == "sce":
        return lambda d: sce_rhs(d, kernel)
    if model == "ohs":
        return lambda d: ohs_rhs(d, kernel)
    if model == "generalized":
        if eps is None:
            raise ConfigError("generalized model requires eps")
        params = EpsParams(eps=eps, n=kernel.n)
        return lambda d: generalized_rhs(d, kernel, params)
    raise ConfigError(f"unknown model {model!r}")
