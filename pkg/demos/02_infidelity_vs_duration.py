"""
Average SWAP infidelity against pulse length and shape
======================================================

The perturbative average infidelity is a quadratic form of the pulse
shape with the noise correlation kernel. Longer pulses are better for
every shape, and the beta-shaped optimum is nearly indistinguishable
from a square pulse.
"""

import numpy as np

from fracpulse.infidelity import average_infidelity
from fracpulse.noise import TlfEnsembleModel
from fracpulse.shapes import DeviceParams, GateSpec, make_shape

device = DeviceParams()


def shapes(alpha):
    return {
        "square": make_shape("square"),
        "gaussian": make_shape("gaussian"),
        "gaussian voltage": make_shape("exp-of-gaussian"),
        "optimal": make_shape("beta", alpha=alpha),
    }


# %%
# Infidelity in dB over two decades of pulse length at alpha = 0.5.
model = TlfEnsembleModel(1e-6, 1e4, 1e10, 0.5)
Ts = np.logspace(-8, -6, 5)
for name, shape in shapes(0.5).items():
    db = [10 * np.log10(average_infidelity(shape, GateSpec(T=T), device, model).infidelity) for T in Ts]
    slope = np.polyfit(np.log10(Ts), db, 1)[0]
    print(f"{name:>16}: {np.array2string(np.array(db), precision=2)} dB, slope {slope:.2f} dB/decade")

# %%
# The gain from pulse shaping shrinks as the noise becomes more correlated.
for alpha in (0.2, 0.5, 1.0, 1.4, 1.8):
    model = TlfEnsembleModel(1e-6, 1e4, 1e10, alpha)
    inf = {k: average_infidelity(s, GateSpec(T=1e-6), device, model).infidelity for k, s in shapes(alpha).items()}
    print(f"alpha={alpha}: gaussian voltage / optimal = {inf['gaussian voltage'] / inf['optimal']:.2f}, "
          f"optimal / square = {inf['optimal'] / inf['square']:.4f}")
