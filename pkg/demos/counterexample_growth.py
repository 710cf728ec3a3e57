"""Failure families: the quotient grows like n^slope below the threshold.

Run: python3 demos/counterexample_growth.py
"""

from xsblab.counterexamples import families, fit_growth, verify_lower_bound
from xsblab.estimates import Params

p = Params(s=-0.4, b=0.55, bprime=-0.3)
ns = [4, 8, 16, 32]
print(f"{'family':8s} {'target':15s} {'fitted':>8s} {'predicted':>9s} {'resid':>8s}  lower bound")
for fam in families():
    q = Params(s=p.s, b=p.b, bprime=-1.0) if fam.id == "ex53" else p
    rep = fit_growth(fam, q, ns)
    ok = all(verify_lower_bound(fam, n) for n in ns)
    print(f"{fam.id:8s} {fam.target:15s} {rep.fitted_slope:8.3f} {rep.predicted_slope:9.3f}"
          f" {rep.fit_residual:8.1e}  {'holds' if ok else 'FAILS'}")
