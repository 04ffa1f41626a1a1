"""Largest two-particle participation number as the interaction grows.

At U=0 every two-particle eigenstate is a product of two localized orbitals.
Switching on U shifts the doubly occupied (bound) pair states by about
U * I0; whenever they cross into a neighbouring miniband they hybridise with
many other pairs and a few eigenstates spread over a large part of the chain.

A chain of 60 sites runs in about a minute; the same sweep at N=100 shows
the humps more clearly (``tipchain sweep --n 100``).

    python3 demos/participation_sweep.py
"""

import numpy as np

from tipchain import ModelParams
from tipchain.spectral import max_participation_sweep

params = ModelParams(n=60, lam=2.5)
res = max_participation_sweep(params, np.arange(0.0, 12.01, 0.5))

print(" U     max P   energy")
for u, p, e in zip(res.u, res.max_participation, res.energy):
    bar = "#" * int(round(p))
    print(f"{u:4.1f}  {p:6.1f}  {e:+6.2f}  {bar}")
