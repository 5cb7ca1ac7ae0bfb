"""
A flat output without a triangular form
=======================================

Five states, two inputs.  The pair (x1, x2) is a flat output, yet one of the
state codistributions Q built from it is not integrable.
"""

from flatcheck.cli import load_system
from flatcheck.fixtures import path
from flatcheck.flatness import check_theorem1, second_component, static_feedback_linearizable

sf = load_system(path("dim5"))
sys_ = sf.sys

# Relative degrees (1, 1), d = 3: the output parametrizes x and u, but
# needs three extra derivative orders to do so.
res = check_theorem1(sys_, sf.candidate)
print(res.index)

# Q at level (1, 1) contains dx3 + u1 dx4.  Its coefficient depends on the
# input, and the wedge condition fails.
for w in res.ladder.level((1, 1)).Q:
    print("  ", dict(w.items()))
print("failing levels:", res.failing)

# The system is not static feedback linearizable either.
print("static feedback linearizable:", static_feedback_linearizable(sys_).linearizable)

# A poor first component is rejected outright: after prolonging, the
# distribution sequence stops being involutive.
sc = second_component(sys_, sys_.parse("x5"))
print("x5 refuted:", sc.refuted, sc.linearization.diagnostic)
