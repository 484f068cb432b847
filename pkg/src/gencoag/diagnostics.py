"""Trajectory diagnostics: moments, bound checks, weak-form identities.

Every a-priori estimate the models are supposed to satisfy becomes a
numerical check here: the moment bound Theta, the superlinear-moment bound
Theta_2(T), the uniform-integrability bound Theta_1(T), the test-function
identities relating the three model weak forms, the finite-size mass-flux
identity, tail-flux decay, and time equicontinuity moduli.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .operators import make_rhs, ohs_velocities, weak_action
from .sizedomain import Trajectory, weighted_norm

THETA_SLACK = 1.0e-10


@dataclass
class BoundVerdict:
    """A checked inequality: the bound, the attained extreme, the margin."""

    name: str
    bound: float
    attained: float
    passed: bool
    details: dict = field(default_factory=dict)

    @property
    def margin(self):
        return self.bound - self.attained

    def to_dict(self):
        return {
            "name": self.name,
            "bound": self.bound,
            "attained": self.attained,
            "margin": self.margin,
            "passed": bool(self.passed),
            "details": self.details,
        }


def moment_table(traj: Trajectory, sigma: float, gauge1=None, gauge2=None):
    """Per-snapshot moment series, as a dict of arrays keyed by column name."""
    grid = traj.grid
    x, dx = grid.centers, grid.widths
    cols = {
        "t": traj.times,
        "M_neg2sigma": np.array([weighted_norm(s, "neg_two_sigma", sigma) for s in traj]),
        "M_negsigma": np.array([weighted_norm(s, "neg_sigma", sigma) for s in traj]),
        "M0": np.array([weighted_norm(s, "one") for s in traj]),
        "M1": np.array([weighted_norm(s, "mass") for s in traj]),
    }
    if gauge1 is not None:
        cols["Psi1"] = np.array([float(np.sum(gauge1.psi(x) * s.values * dx)) for s in traj])
    else:
        cols["Psi1"] = np.full(len(traj), np.nan)
    if gauge2 is not None:
        cols["Psi2int"] = np.array(
            [float(np.sum(gauge2.psi(x ** (-sigma) * s.values) * dx)) for s in traj]
        )
    else:
        cols["Psi2int"] = np.full(len(traj), np.nan)
    return cols


def write_moments_csv(cols, path):
    names = ["t", "M_neg2sigma", "M_negsigma", "M0", "M1", "Psi1", "Psi2int"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for k in range(len(cols["t"])):
            writer.writerow([f"{cols[n][k]:.17g}" for n in names])


def theta_bound_check(traj: Trajectory, zeta_in, sigma: float) -> BoundVerdict:
    """sup_t [M_{-2s}(t) + M_1(t)] <= Theta = M_{-2s}(0) + M_1(0).

    The supremum is taken over the evolved snapshots (t > 0) when any
    exist, so the margin measures how far the evolution stays inside the
    bound; a trajectory holding only the initial snapshot reports margin 0.
    """
    theta = weighted_norm(zeta_in, "Y_norm", sigma)
    series = np.array([weighted_norm(s, "Y_norm", sigma) for s in traj])
    evolved = series[1:] if len(series) > 1 else series
    attained = float(evolved.max())
    passed = attained <= theta * (1.0 + THETA_SLACK)
    idx = int(evolved.argmax()) + (1 if len(series) > 1 else 0)
    return BoundVerdict("theta_moment_bound", theta, attained, passed,
                        {"series_max_time": float(traj.times[idx])})


def psi1_moment_check(traj: Trajectory, gauge, k: float, T: float,
                      sigma: float = 0.0) -> BoundVerdict:
    """sup_t int Psi1(mu) zeta dmu <= (Gamma1 + 6 k T Psi1(1) Theta^2) e^(6 T k Theta).

    All constants come from the run itself: Gamma1 is the initial gauge
    moment, Theta the initial weighted norm.
    """
    grid = traj.grid
    x, dx = grid.centers, grid.widths
    series = np.array([float(np.sum(gauge.psi(x) * s.values * dx)) for s in traj])
    gamma1 = float(series[0])
    theta = weighted_norm(traj[0], "Y_norm", sigma)
    psi_at_1 = float(gauge.psi(1.0))
    bound = (gamma1 + 6.0 * k * T * psi_at_1 * theta**2) * np.exp(6.0 * T * k * theta)
    attained = float(series.max())
    passed = attained <= bound * (1.0 + THETA_SLACK)
    return BoundVerdict("psi1_moment_bound", float(bound), attained, passed,
                        {"gamma1": gamma1, "theta": theta, "psi_at_1": psi_at_1})


def uniform_integrability_check(traj: Trajectory, gauge2, k: float, eta: float,
                                T: float, sigma: float) -> BoundVerdict:
    """sup_t int Psi2(mu^(-s) zeta) dmu <= Gamma2 exp(max(k, eta) T Theta).

    Two exponential rates are defensible for this bound, one built from
    the growth constant k and one from the derivative constant eta; both
    are reported and the check uses the larger, which dominates either.
    """
    grid = traj.grid
    x, dx = grid.centers, grid.widths
    w = x ** (-sigma)
    series = np.array([float(np.sum(gauge2.psi(w * s.values) * dx)) for s in traj])
    gamma2 = float(series[0])
    theta = weighted_norm(traj[0], "Y_norm", sigma)
    c = max(k, eta)
    bound = gamma2 * np.exp(c * T * theta)
    attained = float(series.max())
    passed = attained <= bound * (1.0 + THETA_SLACK)
    return BoundVerdict(
        "psi2_uniform_integrability", float(bound), attained, passed,
        {
            "gamma2": gamma2,
            "theta": theta,
            "constant_used": c,
            "bound_with_k": float(gamma2 * np.exp(k * T * theta)),
            "bound_with_eta": float(gamma2 * np.exp(eta * T * theta)),
        },
    )


def moment_monotonicity_check(traj: Trajectory, sigma: float) -> BoundVerdict:
    """M_{-2s} and M_1 must be nonincreasing snapshot to snapshot."""
    m2 = np.array([weighted_norm(s, "neg_two_sigma", sigma) for s in traj])
    m1 = np.array([weighted_norm(s, "mass") for s in traj])
    worst = 0.0
    for series in (m2, m1):
        slack = THETA_SLACK * series[0]
        rises = np.diff(series)
        worst = max(worst, float(rises.max(initial=-np.inf)) - slack)
    passed = worst <= 0.0
    return BoundVerdict("moment_monotonicity", 0.0, worst, passed)


def test_identity(omega, variant: str, nu: float, tau: float, eps: float | None = None) -> float:
    """Evaluate one of the weak-form test-function identities exactly.

    Variants: ``omega_1`` = tau omega'(nu) - omega(tau);
    ``omega_tilde`` = omega(nu+tau) - omega(nu) - omega(tau);
    ``omega_eps``   = (omega(nu + eps tau) - omega(nu))/eps - omega(tau);
    ``omega_2_eps`` = eps * omega_eps (the averaged-probability form).
    """
    if nu <= 0.0 or tau <= 0.0:
        raise DomainError("nu and tau must be positive")
    if variant in ("omega_1", "omega_eps", "omega_2_eps") and not (tau < nu):
        raise DomainError("these variants require tau in (0, nu)")
    if variant == "omega_1":
        return float(tau * omega.derivative(nu) - omega(tau))
    if variant == "omega_tilde":
        return float(omega(nu + tau) - omega(nu) - omega(tau))
    if variant in ("omega_eps", "omega_2_eps"):
        if eps is None:
            raise DomainError(f"{variant} requires eps")
        w_eps = (omega(nu + eps * tau) - omega(nu)) / eps - omega(tau)
        return float(eps * w_eps) if variant == "omega_2_eps" else float(w_eps)
    raise DomainError(f"unknown identity variant {variant!r}")


def weak_form_residual(traj: Trajectory, omega, kernel, model: str,
                       eps: float | None = None) -> np.ndarray:
    """|time-integrated weak action - moment change| per snapshot.

    The right-hand side re-evaluates the model's operator on each snapshot
    and accumulates sum_i omega(x_i) Q_i dx_i by the trapezoidal rule.
    """
    grid = traj.grid
    om = omega(grid.centers) if callable(omega) else np.asarray(omega, dtype=float)
    if om.shape != grid.centers.shape:
        raise ConfigError("omega must be sampled on the grid")
    rhs_op = make_rhs(model, kernel, eps)
    actions = np.array([weak_action(rhs_op(s), om) for s in traj])
    times = traj.times
    lhs = np.array(
        [float(np.sum(om * (s.values - traj[0].values) * grid.widths)) for s in traj]
    )
    rhs_cum = np.concatenate(
        [[0.0], np.cumsum(0.5 * np.diff(times) * (actions[:-1] + actions[1:]))]
    )
    return np.abs(lhs - rhs_cum)


def _snap_to_edge(grid, lam):
    if not (grid.edges[0] < lam <= grid.edges[-1]):
        raise DomainError(f"lambda={lam} outside the domain (1/n, n]")
    m = int(np.argmin(np.abs(grid.edges - lam)))
    return max(1, m)


def mass_flux_identity(traj: Trajectory, lam: float, kernel) -> dict:
    """Residual of the finite-size mass balance at threshold lambda.

    Checks, per snapshot,

        int_0^lam mu zeta(t) - int_0^lam mu zeta_in
          = - int_0^t [ lam * (advective mass flux across lam)
                        + sum over (big > lam, small < lam) pairs of
                          small * Lambda * zeta * zeta ] ds.

    The advective boundary term uses the edge-sampled velocity; it is the
    finite-lambda flux that the limit lambda -> infinity removes.  lambda
    is snapped to the nearest grid edge; lambda = n reduces to the ledger
    closure (empty collision range, boundary term = recorded outflux).
    """
    grid = traj.grid
    x, dx = grid.centers, grid.widths
    times = traj.times
    m = _snap_to_edge(grid, lam)
    lam_edge = float(grid.edges[m])
    mass0 = float(np.sum(x[:m] * traj[0].values[:m] * dx[:m]))
    lhs = np.array(
        [float(np.sum(x[:m] * s.values[:m] * dx[:m])) - mass0 for s in traj]
    )
    if m == grid.size:
        # whole domain: the boundary term is exactly the outflux ledger
        rhs = -np.asarray(traj.outflux)
        resid = np.abs(lhs - rhs)
        return {"lambda": lam_edge, "residual": resid, "lhs": lhs, "rhs": rhs}

    K = np.asarray(kernel.eval(x[m:][:, None], x[:m][None, :]))

    def rate(s):
        zd = s.values * grid.widths
        coll = float(np.sum(K * np.outer(zd[m:], x[:m] * zd[:m])))
        v_edge = float(ohs_velocities(s, kernel)[m - 1])
        flux = lam_edge * s.values[m - 1] * v_edge
        return coll + flux

    rates = np.array([rate(s) for s in traj])
    rhs = -np.concatenate(
        [[0.0], np.cumsum(0.5 * np.diff(times) * (rates[:-1] + rates[1:]))]
    )
    return {"lambda": lam_edge, "residual": np.abs(lhs - rhs), "lhs": lhs, "rhs": rhs}


def tail_flux_decay(traj: Trajectory, lambdas, kernel) -> list[dict]:
    """Time-integrated tail flux past each lambda, split by partner size.

    The split follows the small-partner decomposition: partners below size
    one (``sigma1``) versus partners in (1, lambda) (``sigma2``).  Entries
    decrease as lambda grows and vanish for lambda >= n.
    """
    grid = traj.grid
    x = grid.centers
    times = traj.times
    out = []
    for lam in lambdas:
        if lam >= grid.edges[-1]:
            out.append({"lambda": float(lam), "sigma1": 0.0, "sigma2": 0.0, "total": 0.0})
            continue
        m = _snap_to_edge(grid, lam)
        small1 = x[:m] < 1.0
        K = np.asarray(kernel.eval(x[m:][:, None], x[:m][None, :]))
        s1 = np.zeros(len(traj))
        s2 = np.zeros(len(traj))
        for idx, s in enumerate(traj):
            zd = s.values * grid.widths
            contrib = K * np.outer(zd[m:], x[:m] * zd[:m])
            s1[idx] = float(contrib[:, small1].sum())
            s2[idx] = float(contrib[:, ~small1].sum())

        def integrate(series):
            return float(np.sum(0.5 * np.diff(times) * (series[:-1] + series[1:])))

        i1, i2 = integrate(s1), integrate(s2)
        out.append({"lambda": float(lam), "sigma1": i1, "sigma2": i2, "total": i1 + i2})
    return out


def equicontinuity_modulus(traj: Trajectory, omega, sigma: float, k: float) -> BoundVerdict:
    """Lipschitz modulus of t -> int mu^(-s) omega zeta dmu vs the a-priori rate.

    The bound is k (||omega||_W1inf + ||omega||_inf) Theta^2 with Theta from
    the initial snapshot; the modulus is maximized over all snapshot pairs.
    """
    grid = traj.grid
    x, dx = grid.centers, grid.widths
    w = x ** (-sigma) * omega(x) * dx
    series = np.array([float(np.sum(w * s.values)) for s in traj])
    times = traj.times
    modulus = 0.0
    for i in range(len(times)):
        dt = times[i + 1:] - times[i]
        if dt.size:
            modulus = max(modulus, float(np.max(np.abs(series[i + 1:] - series[i]) / dt)))
    theta = weighted_norm(traj[0], "Y_norm", sigma)
    bound = k * (omega.w1inf_norm + omega.sup_value) * theta**2
    passed = modulus <= bound * (1.0 + THETA_SLACK)
    return BoundVerdict(f"equicontinuity[{omega.name}]", float(bound), modulus, passed,
                        {"theta": theta})


@dataclass
class DiagnosticsReport:
    """All diagnostics of one run, serializable to JSON."""

    model: str
    eps: float | None
    sigma: float
    moments: dict
    verdicts: list
    weak_residuals: dict = field(default_factory=dict)
    flux_identities: list = field(default_factory=list)
    tail_fluxes: list = field(default_factory=list)
    ledger: dict = field(default_factory=dict)

    def all_passed(self):
        return all(v.passed for v in self.verdicts)

    def to_dict(self):
        return {
            "model": self.model,
            "eps": self.eps,
            "sigma": self.sigma,
            "moments": {k: np.asarray(v, dtype=float).tolist() for k, v in self.moments.items()},
            "verdicts": [v.to_dict() for v in self.verdicts],
            "weak_residuals": {
                k: np.asarray(v, dtype=float).tolist() for k, v in self.weak_residuals.items()
            },
            "flux_identities": [
                {
                    "lambda": f["lambda"],
                    "residual": np.asarray(f["residual"], dtype=float).tolist(),
                }
                for f in self.flux_identities
            ],
            "tail_fluxes": self.tail_fluxes,
            "ledger": self.ledger,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
