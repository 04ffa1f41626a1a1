"""Why U near 4 and near 6.7: overlaps of localized orbitals.

In the basis of noninteracting pair states |mu, nu> the interaction adds
U * I0 to each pair energy and couples pairs through the smaller cross
overlaps. A band of bound pairs with mean overlap I0 is pushed across a
miniband gap of width about 2 once U * I0 ~ 2, which is where extended
two-particle states first appear.

    python3 demos/overlaps_and_resonances.py
"""

from tipchain import ModelParams
from tipchain.fockspace import build_sorted_sp_basis, overlap_statistics, resonance_estimate

basis = build_sorted_sp_basis(ModelParams(n=100, lam=2.5))
stats = overlap_statistics(basis)

print("band  pairs  <I0> bound  <I0> mu=nu  <|I|> neighbours")
for s in stats:
    print(f"{s.miniband}  {s.pairs:5d}  {s.mean_self:10.3f}  {s.mean_self_onsite:10.3f}  {s.mean_cross:10.3f}")

print("\nresonance estimates U* = gap / I0")
for gap, tag in ((2.0, "gap 2"), (None, "measured gap")):
    for r in resonance_estimate(basis, gap=gap, stats=stats):
        print(f"  {tag:12s} {r.lower}->{r.upper}: gap {r.gap:.2f}, I0 {r.mean_overlap:.3f}, U* = {r.u_star:.2f}")
