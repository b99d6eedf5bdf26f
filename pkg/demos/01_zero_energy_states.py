"""Tune a Gaussian well until it carries a zero-energy eigenstate in the
ell = 1 and ell = 2 sectors, then look at what distinguishes them: the first
moment of V psi vanishes only for ell = 2, and the tail decays one power faster.

Run: python3 demos/01_zero_energy_states.py
"""

import numpy as np

from waveop4d import RadialPotential, solve_sector
from waveop4d.zero_energy import decay_fit, ode_residual

well = RadialPotential("gaussian", coupling=-1.0)

for ell in (1, 2):
    st = solve_sector(well, ell)
    print(f"ell={ell}")
    print(f"  coupling c*         {st.coupling:.10f}")
    print(f"  matching mismatch   {abs(st.mismatch):.1e}")
    print(f"  ODE residual        {ode_residual(st):.1e}")
    print(f"  |int V psi|         {abs(st.m0):.1e}")
    print(f"  max |int x V psi|   {np.max(np.abs(st.m1)):.3e}")
    print(f"  tail slope          {decay_fit(st):.4f}   (expect {-(2 + ell)})")
