"""
Monte Carlo check of the perturbative infidelity
================================================

Telegraph-noise trajectories are pushed through the full exponential
exchange map and the exact overlap fidelity. In the small-noise limit
the average agrees with the quadratic form; at the nominal noise
energy the exponential map adds a small excess.
"""

from fracpulse.montecarlo import discrepancy_curve, estimate_infidelity
from fracpulse.noise import TlfEnsembleModel
from fracpulse.shapes import GateSpec, make_shape

gate, kappa = GateSpec(T=10e-9), 80.0

# %%
# Perturbative regime: R0 scaled down to 1e-10 V^2.
for alpha in (0.5, 1.0, 1.4):
    model = TlfEnsembleModel(1e-10, 1e4, 1e10, alpha)
    est = estimate_infidelity(model, make_shape("beta", alpha=alpha), gate, kappa, n_traj=20000, seed=1)
    print(f"alpha={alpha}: MC {est.mean:.4e} +- {est.stderr:.1e}, analytic {est.analytic:.4e}, ratio {est.ratio:.3f}")

# %%
# Ratio of Monte Carlo to the perturbative value as the noise energy grows.
model = TlfEnsembleModel(1e-6, 1e4, 1e10, 0.5)
for r0, mean, err, analytic, ratio in discrepancy_curve(model, make_shape("square"), gate, kappa,
                                                        [1e-9, 1e-7, 1e-6, 1e-5], n_traj=20000, seed=2):
    print(f"R0={r0:.0e} V^2: MC/analytic = {ratio:.3f} +- {err / analytic:.3f}")
