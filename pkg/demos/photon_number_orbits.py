"""
Mean-field photon number under a modulated pump
================================================

The cavity photon number follows a closed orbit once transients decay.
Without modulation the orbit is the flat classic steady state
(fbar/f_th - 1) * gamma / lambda; with modulation it breathes around it.

Run:  python3 demos/photon_number_orbits.py
"""

import numpy as np

from modnopo import derive_params, params_from_ratios
from modnopo import asymptotic_n0, integrate_n0, periodic_steady_state

# Standard operating point: pump three times above threshold, modulated at
# twice the cavity linewidth.
for level in (0.0, 0.4, 1.2):
    p = params_from_ratios(fbar_over_fth=3.0, f1_over_fbar=level)
    d = derive_params(p)
    orbit = periodic_steady_state(p)
    t = np.linspace(0.0, d.period, 9)
    print(f"f1 = {level:>3} * fbar   n0 over one period:")
    print("   ", np.array2string(orbit.interp(t), precision=3))

# The quadrature route gives the same orbit without any time stepping;
# useful as an independent check and for spot evaluations.
p = params_from_ratios(fbar_over_fth=3.0, f1_over_fbar=1.2)
t = np.linspace(0.0, derive_params(p).period, 5)
print("quadrature route:", np.array2string(asymptotic_n0(p, t), precision=3))

# Transient from a small seed: exponential growth, then saturation onto
# the orbit within a few cavity lifetimes.
traj = integrate_n0(p, t_span=(0.0, 8.0), n0_init=1.0, n_points=5)
print("growth from n0=1:", np.array2string(traj.n0, precision=3))
