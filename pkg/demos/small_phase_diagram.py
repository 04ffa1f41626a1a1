"""A coarse (lambda, U) map of where bound pairs conduct.

Each cell propagates a few adjacent-pair packets and keeps the largest final
second moment; cells above N/10 count as metallic. This toy grid runs in a
few minutes. The desk-scale grid is ``tipchain scan --preset desk``.

    python3 demos/small_phase_diagram.py
"""

import numpy as np

from tipchain.scan import ScanSpec, classify_cells, run_scan

spec = ScanSpec(
    lambdas=(1.5, 2.5, 3.5),
    us=(0.0, 2.0, 4.5, 8.0),
    n=80,
    t_final=400.0,
    realizations=4,
    samples=11,
)
diagram = run_scan(spec, progress=lambda done, total: print(f"\r{done}/{total} cells", end=""))
print()
metal = classify_cells(diagram)

print("lambda \\ U " + "".join(f"{u:8.1f}" for u in spec.us))
for lam, row, m in zip(spec.lambdas, diagram.sigma, metal):
    cells = "".join(f"{s:7.1f}{'*' if x else ' '}" for s, x in zip(row, m))
    print(f"{lam:9.2f}  {cells}")
print(f"(* = sigma* >= N/10 = {spec.n / 10:.0f})")
print("spec digest", spec.digest, "| mean sigma*", np.nanmean(diagram.sigma).round(2))
