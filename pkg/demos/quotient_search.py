"""Randomized search for the worst ratio in a multilinear estimate.

Inside the admissible range the maximized quotient should not move when the
tau lattice is refined; the ratio printed at the end is that check. Outside
the range a fixed lattice still gives a finite, stable number: growth only
shows up along a family of inputs (see counterexample_growth.py).

Run: python3 demos/quotient_search.py
"""

from xsblab.estimates import Params, get_case, maximize_quotient

case = get_case("thm41")
print(case.id, "on", case.domain, "arity", case.arity)

for p in (Params(s=-0.3, b=0.55, bprime=-0.46), Params(s=-0.3, b=0.55, bprime=-0.40)):
    rep = maximize_quotient(case, p, budget=60, seed=0)
    print(f"s={p.s:+.2f} admissible={case.is_admissible(p)}  samples={rep.samples}"
          f"  max quotient={rep.max_quotient:.5g}  refined/coarse={rep.refinement_ratio:.4f}")
