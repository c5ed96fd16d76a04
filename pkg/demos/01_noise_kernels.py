"""
Correlation kernels of a 1/f^alpha fluctuator ensemble
======================================================

A sum of telegraph fluctuators with switching rates spread over six
decades produces 1/f^alpha noise. Here we look at its correlation
function, its spectrum, and the two approximations used for fast
infidelity estimates.
"""

import math
import warnings

import numpy as np

from fracpulse.noise import TlfEnsembleModel, autocor_coarse, autocor_exact, autocor_improved, psd

# %%
# All three spectral exponents share the same total energy R0 = 1 mV^2,
# so every normalized correlation starts at one.
f_min, f_max, r0 = 1e4, 1e10, 1e-6
dt = np.concatenate(([0.0], np.logspace(-12, -3, 10)))
for alpha in (0.5, 1.0, 1.5):
    model = TlfEnsembleModel(r0, f_min, f_max, alpha)
    print(f"alpha={alpha}: R(dt)/R0 =", np.array2string(autocor_exact(model, dt) / r0, precision=3))

# %%
# The spectrum follows P0/f^alpha between the cutoffs and rolls off as
# 1/f^2 above f_max.
model = TlfEnsembleModel(r0, f_min, f_max, 1.0)
f = np.array([1e5, 1e7, 1e9, 1e12])
print("S(f) f / P0 =", np.array2string(psd(model, f) * f / model.p0, precision=3))

# %%
# In normalized time tau = t/T the correlation depends on theta = 2 pi f_min T.
# The coarse kernel keeps the leading small-theta term; the improved one
# adds an exponential fit of the remainder, which matters once theta is
# of order one.
alpha = 1.4
model = TlfEnsembleModel(r0, f_min, f_max, alpha)
T = 0.5 / (2 * math.pi * f_min)
dtau = np.linspace(0.05, 1.0, 6)
exact = autocor_exact(model, dtau * T)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    coarse = autocor_coarse(model, T, dtau, 0.0)
improved = autocor_improved(model, T, dtau, 0.0)
print("dtau      ", np.array2string(dtau, precision=2))
print("coarse/exact  ", np.array2string(coarse / exact, precision=3))
print("improved/exact", np.array2string(improved / exact, precision=4))
