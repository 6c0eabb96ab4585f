"""Builder-side objective: expected revenue, its derivative, and the best
defection rate.

Expected revenue integrates the bid actually collected against the density of
the highest valuation.  Below the cutoff the builder collects the risky bid
when honoring and max(bid, gamma*v) when defecting (the max is evaluated
pointwise, never assumed); at and above the cutoff the deterrence bid
gamma*v is collected regardless.  The Monte Carlo engine in ``simulate``
implements the game mechanics independently, and the acceptance suite
requires the two to agree.

Quadrature runs to the 1 - 1e-8 quantile of the max-value distribution; the
remaining tail is added analytically with the bid share frozen at the cap,
which is exact for the deterrence branch and a sub-1e-7 relative
approximation otherwise.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import (
    AssumptionViolationError,
    ConsistencyError,
    DegenerateCutoffError,
    ParameterError,
)
from .equilibrium import BidCurve, PiecewiseStrategy, indifference_epsilon, \
    solve_bid_ode, solve_cutoff
from .profiles import TypeProfile
from .values import (
    top_value_density,
    top_value_quantile,
    top_value_sf,
    top_value_tail_mean,
)

DEFAULT_EPSILON_GRID = tuple(round(0.05 * k, 2) for k in range(20)) + (0.99,)

_TAIL_Q = 1.0 - 1e-8


def _check_consistent(epsilon, strategy, profile):
    if abs(strategy.epsilon - epsilon) > 1e-12:
        raise ConsistencyError(
            f"strategy solved for epsilon={strategy.epsilon}, got {epsilon}"
        )
    if abs(strategy.gamma - profile.gamma) > 1e-12:
        raise ConsistencyError(
            f"strategy gamma={strategy.gamma} does not match profile gamma={profile.gamma}"
        )


def _binding_kink(curve: BidCurve, gamma: float):
    """Smallest v where gamma*v crosses the risky bid, if it crosses on-grid."""
    diff = gamma * curve.grid - curve.bids
    s = np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)
    if not s.size:
        return None
    i = int(s[0])
    return float(brentq(lambda v: gamma * v - curve.bid(v),
                        curve.grid[i], curve.grid[i + 1]))


def _frozen_tail(epsilon, gamma, b_cap, cap, profile):
    """Integral of the risky integrand beyond the cap with the bid frozen.

    Exact in f1; only the bid's variation beyond the cap is neglected.
    Returns (value, d/d-epsilon) so the analytic derivative matches the
    finite differences of expected_revenue term by term.
    """
    sf_cap = top_value_sf(cap, profile)
    t1_cap = top_value_tail_mean(cap, profile)
    v_cross = b_cap / gamma if gamma > 0 else math.inf
    if v_cross <= cap:
        # binding throughout the tail
        defect_part = gamma * t1_cap
        sf_cross = sf_cap
    elif math.isinf(v_cross):
        defect_part = b_cap * sf_cap
        sf_cross = 0.0
    else:
        sf_cross = top_value_sf(v_cross, profile)
        defect_part = b_cap * (sf_cap - sf_cross) + gamma * top_value_tail_mean(v_cross, profile)
    value = (1.0 - epsilon) * b_cap * sf_cap + epsilon * defect_part
    slope = defect_part - b_cap * sf_cap
    return value, slope


def expected_revenue(epsilon: float, strategy: PiecewiseStrategy,
                     profile: TypeProfile) -> float:
    """Ex-ante builder revenue for the piecewise strategy at ``epsilon``."""
    _check_consistent(epsilon, strategy, profile)
    profile.require_dispersion()
    gamma = profile.gamma
    curve = strategy.curve
    v_star = strategy.cutoff

    cap = top_value_quantile(_TAIL_Q, profile)
    if math.isfinite(v_star):
        cap = max(cap, min(v_star, curve.v_max))

    def risky_integrand(v):
        if v <= 0.0:
            return 0.0
        b = curve.bid(v)
        pay = (1.0 - epsilon) * b + epsilon * max(b, gamma * v)
        return pay * top_value_density(v, profile)

    hi = min(v_star, cap)
    pts = [p for p in (_binding_kink(curve, gamma), curve.v_min, curve.v_min * 30)
           if p is not None and 0.0 < p < hi]
    scale = max(1.0, gamma * top_value_tail_mean(0.0, profile))
    total, _ = quad(risky_integrand, 0.0, hi, points=sorted(set(pts)) or None,
                    limit=400, epsabs=1e-9 * scale, epsrel=1e-10)

    if math.isfinite(v_star):
        if v_star < cap:
            mid = [p for p in (v_star * 10, v_star * 1e3) if v_star < p < cap]
            safe, _ = quad(lambda v: gamma * v * top_value_density(v, profile),
                           v_star, cap, points=mid or None,
                           limit=400, epsabs=1e-9 * scale, epsrel=1e-10)
            total += safe
        total += gamma * top_value_tail_mean(cap, profile)
    else:
        tail, _ = _frozen_tail(epsilon, gamma, curve.bid(cap), cap, profile)
        total += tail
    return float(total)


def first_price_revenue(curve: BidCurve, profile: TypeProfile) -> float:
    """Honest first-price revenue: the risky bid against the top density."""
    profile.require_dispersion()
    cap = top_value_quantile(_TAIL_Q, profile)
    scale = max(1.0, top_value_tail_mean(0.0, profile))

    def integrand(v):
        return curve.bid(v) * top_value_density(v, profile) if v > 0.0 else 0.0

    val, _ = quad(integrand, 0.0, cap, points=[curve.v_min, curve.v_min * 30],
                  limit=400, epsabs=1e-9 * scale, epsrel=1e-10)
    return float(val + curve.bid(cap) * top_value_sf(cap, profile))


def revenue_derivative(epsilon: float, strategy: PiecewiseStrategy,
                       profile: TypeProfile, *, require_binding: bool = True) -> float:
    """d E[R] / d epsilon.

    The interior term integrates (gamma*v - bid) below the cutoff; the
    boundary term moves the cutoff by implicit differentiation of the
    indifference condition.  When the threat binds nowhere the derivative is
    exactly zero.  A partially binding region below the cutoff violates the
    formula's maintained assumption: with ``require_binding`` (default) that
    raises, otherwise the non-binding part simply contributes nothing (the
    positive part is integrated, which is the exact Leibniz derivative of
    ``expected_revenue``).
    """
    _check_consistent(epsilon, strategy, profile)
    profile.require_dispersion()
    gamma = profile.gamma
    curve = strategy.curve
    v_star = strategy.cutoff

    gap = gamma * curve.grid - curve.bids
    if np.all(gap <= 0.0):
        return 0.0

    below = curve.grid < v_star
    if require_binding and np.any(gap[below] <= 0.0):
        raise AssumptionViolationError(
            "frontrunning threat does not bind on all of [v_min, v*); "
            "the closed-form derivative assumption fails (pass "
            "require_binding=False for the positive-part derivative)"
        )

    cap = top_value_quantile(_TAIL_Q, profile)
    if math.isfinite(v_star):
        cap = max(cap, min(v_star, curve.v_max))

    def integrand(v):
        if v <= 0.0:
            return 0.0
        diff = gamma * v - curve.bid(v)
        return max(diff, 0.0) * top_value_density(v, profile)

    hi = min(v_star, cap)
    pts = [p for p in (_binding_kink(curve, gamma), curve.v_min)
           if p is not None and 0.0 < p < hi]
    scale = max(1.0, gamma * top_value_tail_mean(0.0, profile))
    total, _ = quad(integrand, 0.0, hi, points=sorted(set(pts)) or None,
                    limit=400, epsabs=1e-9 * scale, epsrel=1e-10)

    if not math.isfinite(v_star):
        _, tail_slope = _frozen_tail(epsilon, gamma, curve.bid(cap), cap, profile)
        total += tail_slope
        return float(total)

    # boundary term only when the cutoff actually tracks epsilon
    ebar_star = indifference_epsilon(v_star, curve, gamma)
    if epsilon > 0.0 and abs(ebar_star - epsilon) < 1e-9:
        ebar_grid = indifference_epsilon(curve.grid, curve, gamma)
        slope = float(PchipInterpolator(curve.grid, ebar_grid).derivative()(v_star))
        if abs(slope) < 1e-12:
            raise DegenerateCutoffError(
                f"indifference level is flat at the cutoff (|slope|={abs(slope):.2e})"
            )
        dvstar = 1.0 / slope
        total -= dvstar * v_star * epsilon * (1.0 - gamma) * top_value_density(v_star, profile)
    return float(total)


# ---------------------------------------------------------------------------
# sweep over defection rates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RevenueProfile:
    """Revenue, analytic derivative, and cutoff per defection rate."""

    epsilons: np.ndarray
    revenues: np.ndarray
    derivatives: np.ndarray
    cutoffs: np.ndarray
    regime: str

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        if np.any(np.diff(eps) <= 0):
            raise ParameterError("epsilons must be strictly increasing")
        for name in ("revenues", "derivatives", "cutoffs"):
            if np.asarray(getattr(self, name)).shape != eps.shape:
                raise ParameterError(f"{name} length differs from epsilons")
        if self.regime not in ("high_extractability", "low_extractability", "mixed"):
            raise ParameterError(f"unknown regime {self.regime!r}")
        if self.regime == "low_extractability":
            level = max(abs(float(np.max(self.revenues))), 1e-12)
            if np.any(np.abs(self.derivatives) > 1e-6 * level):
                raise ParameterError(
                    "low-extractability profile must have vanishing derivatives"
                )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epsilon,revenue,derivative,cutoff\n")
        for e, r, d, c in zip(self.epsilons, self.revenues,
                              self.derivatives, self.cutoffs):
            cut = "inf" if math.isinf(c) else f"{c:.12g}"
            buf.write(f"{e:.12g},{r:.12g},{d:.12g},{cut}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "regime": self.regime,
                "epsilons": [float(e) for e in self.epsilons],
                "revenues": [float(r) for r in self.revenues],
                "derivatives": [float(d) for d in self.derivatives],
                "cutoffs": ["inf" if math.isinf(c) else float(c) for c in self.cutoffs],
            },
            indent=1,
        )


@dataclass(frozen=True)
class OptimalEpsilon:
    epsilon_star: float
    regime: str
    profile: RevenueProfile


def classify_regime(curve: BidCurve, gamma: float) -> str:
    """Sign pattern of gamma*v - bid over the working support."""
    gap = gamma * curve.grid - curve.bids
    if np.all(gap > 0.0):
        return "high_extractability"
    if np.all(gap < 0.0):
        return "low_extractability"
    return "mixed"


def revenue_sweep(profile: TypeProfile, grid, curve: BidCurve | None = None) -> RevenueProfile:
    """Revenue, derivative, and cutoff at each grid rate (any grid size >= 1).

    The bid curve is shared across the sweep (it never depends on epsilon);
    only the cutoff is re-solved per grid point.
    """
    eps_grid = np.asarray(grid, dtype=float)
    if eps_grid.ndim != 1 or eps_grid.size < 1:
        raise ParameterError("epsilon grid must be a nonempty 1-d sequence")
    if np.any((eps_grid < 0.0) | (eps_grid >= 1.0)) or np.any(np.diff(eps_grid) <= 0):
        raise ParameterError("epsilon grid must be increasing within [0, 1)")

    curve = curve if curve is not None else solve_bid_ode(profile)
    revenues, derivatives, cutoffs = [], [], []
    for eps in eps_grid:
        cut = solve_cutoff(curve, profile.gamma, float(eps))
        strat = PiecewiseStrategy(curve=curve, cutoff=cut,
                                  gamma=profile.gamma, epsilon=float(eps))
        revenues.append(expected_revenue(float(eps), strat, profile))
        derivatives.append(
            revenue_derivative(float(eps), strat, profile, require_binding=False)
        )
        cutoffs.append(cut)

    return RevenueProfile(
        epsilons=eps_grid,
        revenues=np.array(revenues),
        derivatives=np.array(derivatives),
        cutoffs=np.array(cutoffs),
        regime=classify_regime(curve, profile.gamma),
    )


def optimal_epsilon(profile: TypeProfile, grid=None,
                    curve: BidCurve | None = None) -> OptimalEpsilon:
    """Grid argmax of expected revenue with regime classification.

    A flat profile reports the lowest grid point as the maximizer, since the
    whole grid is then argmax.
    """
    eps_grid = np.asarray(DEFAULT_EPSILON_GRID if grid is None else grid, dtype=float)
    if eps_grid.size < 21:
        raise ParameterError("epsilon grid needs at least 21 points")
    rp = revenue_sweep(profile, eps_grid, curve=curve)
    revenues = rp.revenues
    level = max(abs(float(revenues.max())), 1e-12)
    if revenues.max() - revenues.min() <= 1e-6 * level:
        star = float(eps_grid[0])
    else:
        star = float(eps_grid[int(np.argmax(revenues))])
    return OptimalEpsilon(epsilon_star=star, regime=rp.regime, profile=rp)
