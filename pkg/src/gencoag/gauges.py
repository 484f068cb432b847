"""Constructive de la Vallee-Poussin convex gauges.

A gauge is a superlinear convex function Psi with Psi(0) = 0 whose
derivative is concave and nondecreasing.  Given the tail of an integrable
quantity, the constructor picks breakpoints r_j at which the tail has
dropped below 4^(-j) of its initial value (pushed up if needed so the
breakpoint gaps never shrink, which keeps Psi' concave), sets
Psi'(r_j) = j + 1, and interpolates Psi' piecewise linearly.  The certified
integral sum_j (j + 2) * tail(r_j) is finite by construction.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError, GaugeConstructionError

#: Tail shrink factor between successive breakpoints.
TAIL_RATIO = 4.0


class ConvexGauge:
    """Piecewise representation: breakpoints r_j, derivative values psi_j.

    Beyond the last breakpoint the derivative continues with its final
    slope, so Psi stays convex and Psi(s)/s -> infinity.
    """

    def __init__(self, breakpoints, psi_prime_values, gamma_bound=None):
        r = np.asarray(breakpoints, dtype=float)
        dp = np.asarray(psi_prime_values, dtype=float)
        if r.size < 2 or r[0] != 0.0 or np.any(np.diff(r) <= 0):
            raise DomainError("breakpoints must start at 0 and strictly increase")
        if dp.shape != r.shape or np.any(np.diff(dp) < 0) or dp[0] < 0:
            raise DomainError("derivative values must be nonnegative and nondecreasing")
        slopes = np.diff(dp) / np.diff(r)
        if np.any(np.diff(slopes) > 1e-12 * max(slopes.max(initial=0.0), 1.0)):
            raise DomainError("derivative must be concave (nonincreasing slopes)")
        self.breakpoints = r
        self.psi_prime_values = dp
        self.slopes = slopes
        # Psi at the breakpoints: exact integral of the piecewise-linear psi'.
        seg = np.diff(r) * 0.5 * (dp[:-1] + dp[1:])
        self.psi_values = np.concatenate([[0.0], np.cumsum(seg)])
        self.gamma_bound = gamma_bound

    def _segment(self, s):
        idx = np.searchsorted(self.breakpoints, s, side="right") - 1
        return np.clip(idx, 0, self.breakpoints.size - 2)

    def psi_prime(self, s):
        s = np.asarray(s, dtype=float)
        i = self._segment(s)
        out = self.psi_prime_values[i] + self.slopes[i] * (s - self.breakpoints[i])
        return out if out.ndim else float(out)

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        i = self._segment(s)
        ds = s - self.breakpoints[i]
        out = self.psi_values[i] + self.psi_prime_values[i] * ds + 0.5 * self.slopes[i] * ds**2
        return out if out.ndim else float(out)

    def phi(self, s):
        """Phi(s) = s Psi'(s) - Psi(s); nonnegative and nondecreasing."""
        s = np.asarray(s, dtype=float)
        out = s * self.psi_prime(s) - self.psi(s)
        return out if out.ndim else float(out)

    def export_rows(self):
        """(breakpoint, Psi, Psi') triples for CSV export."""
        return list(zip(self.breakpoints, self.psi_values, self.psi_prime_values))


def write_gauge_csv(gauge: "ConvexGauge", path):
    """Export a constructed gauge as ``breakpoint,psi,psi_prime`` rows."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["breakpoint", "psi", "psi_prime"])
        for r, p, dp in gauge.export_rows():
            writer.writerow([f"{r:.17g}", f"{p:.17g}", f"{dp:.17g}"])


class SquareGauge:
    """Psi(s) = s^2: convex with affine (hence concave) derivative."""

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        out = s * s
        return out if out.ndim else float(out)

    def psi_prime(self, s):
        s = np.asarray(s, dtype=float)
        out = 2.0 * s
        return out if out.ndim else float(out)

    def phi(self, s):
        return self.psi(s)


class TruncatedGauge:
    """Gauge equal to its base on [0, lam], affine with slope Psi'(lam) beyond."""

    def __init__(self, base, lam):
        if lam < 2.0:
            raise DomainError("gauge truncation point must be >= 2")
        self.base = base
        self.lam = float(lam)
        self._psi_lam = float(base.psi(lam))
        self._slope = float(base.psi_prime(lam))

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(
            s <= self.lam,
            self.base.psi(np.minimum(s, self.lam)),
            self._psi_lam + self._slope * (s - self.lam),
        )
        return out if out.ndim else float(out)

    def psi_prime(self, s):
        s = np.asarray(s, dtype=float)
        out = self.base.psi_prime(np.minimum(s, self.lam))
        return out if out.ndim else float(out)

    def phi(self, s):
        s = np.asarray(s, dtype=float)
        out = s * self.psi_prime(s) - self.psi(s)
        return out if out.ndim else float(out)


def truncate_gauge(gauge, lam: float) -> TruncatedGauge:
    return TruncatedGauge(gauge, lam)


def build_gauge_from_tail(r_samples, tail_values, max_breakpoints: int = 64) -> ConvexGauge:
    """Constructive gauge from sampled tail data.

    Parameters
    ----------
    r_samples, tail_values : arrays
        Nonincreasing tail r -> integral beyond threshold r, sampled on the
        grid.  The tail must decay: its last sample must reach the first
        4^(-1) target, otherwise no superlinear gauge is certifiable from
        the data and a :class:`GaugeConstructionError` is raised.
    """
    r = np.asarray(r_samples, dtype=float)
    tail = np.asarray(tail_values, dtype=float)
    if r.ndim != 1 or r.shape != tail.shape or r.size < 2:
        raise DomainError("need matching 1-d sample arrays")
    if np.any(np.diff(r) <= 0):
        raise DomainError("tail sample points must strictly increase")
    slack = 1e-12 * max(abs(tail[0]), 1.0)
    if np.any(np.diff(tail) > slack):
        raise GaugeConstructionError("tail is not nonincreasing on the grid")
    t0 = float(tail[0])
    if t0 <= 0.0:
        raise GaugeConstructionError("tail has no mass to control")

    breakpoints = [0.0]
    dpsi = [1.0]
    cert = 2.0 * t0  # j = 0 shell: psi' <= 2 below r_1
    prev_r = 0.0
    prev_gap = 0.0
    for j in range(1, max_breakpoints + 1):
        target = t0 * TAIL_RATIO ** (-j)
        idx = int(np.searchsorted(-tail, -target, side="left"))
        if idx >= r.size:
            if j == 1:
                raise GaugeConstructionError(
                    "tail does not decay below tail(0)/4 on the truncated grid"
                )
            break
        r_j = max(float(r[idx]), prev_r + prev_gap)
        if r_j <= prev_r:
            r_j = prev_r + max(prev_gap, 1e-12 * max(prev_r, 1.0))
        breakpoints.append(r_j)
        dpsi.append(float(j + 1))
        cert += (j + 2) * target
        prev_gap = r_j - prev_r
        prev_r = r_j
        if r_j >= r[-1]:
            break
    if len(breakpoints) < 2:
        raise GaugeConstructionError("tail too short to place any breakpoint")
    return ConvexGauge(breakpoints, dpsi, gamma_bound=cert)


def psi1_tail(density):
    """Mass tail r -> sum over cells above r of x zeta dx, sampled at edges."""
    grid = density.grid
    contrib = grid.centers * density.values * grid.widths
    tail = np.concatenate([np.cumsum(contrib[::-1])[::-1], [0.0]])
    return grid.edges, tail


def psi2_tail(density, sigma: float):
    """Value-variable tail of h = mu^(-sigma) zeta: r -> integral of h over {h > r}."""
    grid = density.grid
    h = grid.centers ** (-sigma) * density.values
    order = np.argsort(h)[::-1]
    hs = h[order]
    contrib = hs * grid.widths[order]
    cum = np.cumsum(contrib)
    # thresholds between distinct h levels: tail(r) for r in [hs[i+1], hs[i])
    r_pts = [0.0]
    tail_pts = [float(cum[-1])]
    for i in range(hs.size - 1, 0, -1):
        if hs[i - 1] > hs[i]:
            r_pts.append(float(hs[i]))
            tail_pts.append(float(cum[i - 1]))
    r_pts.append(float(hs[0]))
    tail_pts.append(0.0)
    return np.asarray(r_pts), np.asarray(tail_pts)


def check_inequalities(gauge, samples: int = 10000, seed: int = 0,
                       z_range=(1e-4, 1e4)):
    """Randomized verification of the three convexity inequalities.

    Checks, on log-uniform pairs (z1, z2):
      (a)  Psi(z) <= z Psi'(z) <= 2 Psi(z)
      (b)  z1 Psi'(z2) <= Psi(z1) + Psi(z2)
      (c)  0 <= Psi(z1+z2) - Psi(z1) - Psi(z2)
             <= 2 (z1 Psi(z2) + z2 Psi(z1)) / (z1 + z2)

    Violations beyond 1e-10 of the local scale are reported.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    z1 = np.exp(rng.uniform(np.log(z_range[0]), np.log(z_range[1]), samples))
    z2 = np.exp(rng.uniform(np.log(z_range[0]), np.log(z_range[1]), samples))
    p1, p2 = gauge.psi(z1), gauge.psi(z2)
    d1, d2 = gauge.psi_prime(z1), gauge.psi_prime(z2)
    psum = gauge.psi(z1 + z2)

    def tol(scale):
        return 1e-10 * np.maximum(scale, 1.0)

    checks = {
        "psi_le_s_dpsi": p1 - z1 * d1,
        "s_dpsi_le_2psi": z1 * d1 - 2.0 * p1,
        "cross_young": z1 * d2 - (p1 + p2),
        "superadditive": -(psum - p1 - p2),
        "doubling_upper": (psum - p1 - p2) - 2.0 * (z1 * p2 + z2 * p1) / (z1 + z2),
    }
    worst = {}
    violations = 0
    for name, excess in checks.items():
        scale = np.abs(p1) + np.abs(p2) + np.abs(z1 * d1) + np.abs(z1 * d2)
        bad = excess > tol(scale)
        violations += int(np.count_nonzero(bad))
        worst[name] = float(np.max(excess / np.maximum(scale, 1.0)))
    return {"passed": violations == 0, "violations": violations, "worst_excess": worst}
