"""Transforms, X_{s,b} norms and the conjugation duality on a small torus.

Run: python3 demos/norms_and_transforms.py
"""

import numpy as np

from xsblab.estimates import random_ensemble
from xsblab.lattice import LatticeGeometry, conjugate_field, forward_transform, inverse_transform, zero_nyquist
from xsblab.norms import WeightSpec, l2_norm, xsb_norm

g = LatticeGeometry.fit("torus_2d", 8, 2.0)
print("geometry:", g.fingerprint(), "shape", g.shape)

# %% round trip and Plancherel
f = random_ensemble(g, 1.0, 1, seed=0)[0]
u = inverse_transform(f)
back = forward_transform(u)
print("round-trip error:", np.abs(back.coeffs - f.coeffs).max())
print("L2 in frequency :", l2_norm(f))
print("L2 in space-time:", np.sqrt(g.cell_volume * np.sum(np.abs(u.values) ** 2)))

# %% the b index trades time regularity against the dispersion relation
f = zero_nyquist(f)
for s in (-0.5, 0.0, 0.5):
    row = [xsb_norm(f, WeightSpec(s, b)) for b in (-0.5, 0.0, 0.5)]
    print(f"s={s:+.1f}  b=-0.5,0,0.5 ->", " ".join(f"{x:10.4g}" for x in row))

# %% conjugating a field swaps X^+ and X^-
w = WeightSpec(0.25, 0.6, +1)
print("||conj f||_{X+} =", xsb_norm(conjugate_field(f), w))
print("||f||_{X-}      =", xsb_norm(f, w.flipped()))
