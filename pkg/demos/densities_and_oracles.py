"""Check the samplers against exact one-level densities and a small-N oracle.

First we histogram the eigenangles of SO(2N) and USp(2N) draws and print the
largest bin z-score against the exact finite-N density.  Then for N = 2 we
compare a Monte Carlo moment with direct integration over the Weyl density.

Run with ``python demos/densities_and_oracles.py`` (about 15 s).
"""

import numpy as np

from nanomoments.densities import compare_to_exact, density_from_angles
from nanomoments.ensembles import EnsembleSpec, Family
from nanomoments.experiments import ExperimentConfig, draw_angles, run_moment
from nanomoments.oracle import weyl_moment

# %%
for fam in (Family.SO_EVEN, Family.USP):
    spec = EnsembleSpec(fam, 16)
    angles = draw_angles(spec, seed=5, count=5000)
    curve = density_from_angles(fam, 16, angles, bins=100)
    z = compare_to_exact(curve)
    print(f"{fam.value:8s} max |z| over 100 bins = {np.max(np.abs(z)):.2f}, within 3: {np.mean(np.abs(z) <= 3):.2f}")

# %%
for fam, k in ((Family.UNITARY, 2.0), (Family.SO_ODD, 2.5), (Family.USP, 4.0)):
    [est] = run_moment(ExperimentConfig(EnsembleSpec(fam, 2), (0.3,), k, samples=50_000, seed=9, workers=4))
    exact = weyl_moment(fam, 2, 0.3, k).value
    print(f"{fam.value:8s} N=2 K={k}: MC {est.mean:.5f} +- {est.stderr:.5f}, oracle {exact:.5f},"
          f" z={(est.mean - exact) / est.stderr:+.2f}")
