"""
Vorticity runs: Taylor-Green and zero data
==========================================
"""

import numpy as np

from roughflow import Field, StepperConfig, euler_zero_experiment, make_grid, solve_ns_vorticity

# the 2D Taylor-Green vortex only decays: omega(t) = exp(-2 nu t) omega0
g = make_grid(2, 64)
nu = 0.1
omega0 = Field.from_function(g, lambda x, y: 2 * np.sin(x) * np.sin(y))
run = solve_ns_vorticity(omega0, nu, g, StepperConfig(dt=1e-3, save_every=250), 1.0)
for t, f in zip(run.times, run.fields):
    err = np.abs(f.values - np.exp(-2 * nu * t) * omega0.values).max()
    print(f"t = {t:.2f}  max error {err:.2e}")

# Euler from zero stays zero; from roundoff-sized data the L2 norm is conserved
for amp in (0.0, 1e-13):
    rep, _ = euler_zero_experiment(make_grid(2, 64), 0.5, amp, 2.0, dt=1e-3)
    dev = 0.0 if amp == 0 else np.abs(rep.measured / rep.measured[0] - 1).max()
    print(f"amplitude {amp:g}: max ||omega||_2 = {rep.measured.max():.3e}, relative change {dev:.1e}")
