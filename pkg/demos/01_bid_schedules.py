# %% [markdown]
# # Bid schedules and the deterrence cutoff
#
# A block builder runs a sealed first-price auction among n searchers with
# affiliated log-normal values, but may defect after seeing the bids: with
# probability epsilon it replicates a fraction gamma of the winner's
# opportunity and frontruns whenever that beats the winning bid.  Searchers
# either shade competitively (the risky curve) or bid gamma * v, the cheapest
# frontrun-proof bid.
#
# This walkthrough solves the risky curve for plausible per-type parameters
# and locates the switch point between the two branches.

# %%
import numpy as np
from scipy.stats import norm

from mevauction import (
    indifference_epsilon,
    solve_bid_ode,
    solve_strategy,
    truncation_mass,
)
from mevauction.profiles import MevType, TypeProfile

MU, SIGMA = 1.102, 2.524

PROFILES = {
    "sandwich": TypeProfile(MevType.SANDWICH, n=12, rho=0.6, gamma=0.95, mu=MU, sigma=SIGMA),
    "naked_arb": TypeProfile(MevType.NAKED_ARB, n=5, rho=0.3, gamma=0.74, mu=MU, sigma=SIGMA),
    "liquidation": TypeProfile(MevType.LIQUIDATION, n=3, rho=0.2, gamma=0.88, mu=MU, sigma=SIGMA),
    "backrun": TypeProfile(MevType.BACKRUN, n=7, rho=0.4, gamma=0.60, mu=MU, sigma=SIGMA),
}

curves = {name: solve_bid_ode(p) for name, p in PROFILES.items()}

# %% [markdown]
# ## Bid shares along the value distribution
#
# The bid-to-value ratio falls as valuations climb: high-value searchers
# shade more because the conditional rival field does not keep up with their
# own draw.  That is exactly what makes the deterrence branch attractive for
# them once defection risk is priced in.

# %%
quantiles = (0.10, 0.25, 0.50, 0.75, 0.90, 0.99)
header = "type        " + "".join(f"  q{int(100 * q):02d}" for q in quantiles)
print(header)
for name, profile in PROFILES.items():
    curve = curves[name]
    shares = []
    for q in quantiles:
        v = float(np.exp(MU + SIGMA * norm.ppf(q)))
        shares.append(curve.bid(v) / v)
    print(f"{name:<12}" + "".join(f" {s:5.2f}" for s in shares))

# %% [markdown]
# ## Where deterrence takes over
#
# The indifference level ebar(v) compares the deterrence premium with the
# expected loss from being frontrun.  The strategy switches to gamma * v at
# the valuation where ebar crosses the builder's defection rate; a cutoff of
# +inf means deterrence is never worth paying for that type.

# %%
for eps in (0.05, 0.2, 0.5):
    print(f"\ndefection rate eps = {eps}")
    for name, profile in PROFILES.items():
        strat = solve_strategy(profile, eps, curve=curves[name])
        mass = truncation_mass(strat, profile)
        cut = "never" if np.isinf(strat.cutoff) else f"{strat.cutoff:10.4g}"
        print(f"  {name:<12} cutoff {cut:>10}   "
              f"P(value above cutoff) = {mass['marginal_mass_above_cutoff']:.3f}")

# %% [markdown]
# ## The indifference curve itself

# %%
curve = curves["naked_arb"]
for q in quantiles:
    v = float(np.exp(MU + SIGMA * norm.ppf(q)))
    print(f"q{int(100 * q):02d}: v = {v:10.3f}  ebar = "
          f"{indifference_epsilon(v, curve, 0.74):+.3f}")
print("positive ebar marks valuations where the frontrun threat binds;")
print("the builder's eps picks out the crossing as the cutoff")
