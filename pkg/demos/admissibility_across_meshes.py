"""
Do the boundary operators stay admissible under refinement?
===========================================================

An admissible observation operator has an L^2-in-time output bound that
does not blow up as the mesh is refined.  The trace observation of the heat
rod passes; a gradient taken in the interior does not, and its constant grows
like sqrt(N).
"""

from delaylift import SystemSpec, make_system, probe_control_admissibility, probe_observation_admissibility
from delaylift.systems import heat_triple, schrodinger_triple
from delaylift.verify import heat_exponent_check, regularity_suite

meshes = (32, 64, 128)

for name, family in (
    ("heat trace", [heat_triple(n) for n in meshes]),
    ("schrodinger collocated", [schrodinger_triple(n) for n in meshes]),
    ("heat gradient", [heat_triple(n, observation="gradient") for n in meshes]),
):
    rep = probe_observation_admissibility(family, 2.0)
    print(f"{name:24s} observation {rep.verdict:10s}", [round(v, 4) for v in rep.values])

for name, family in (("heat", [heat_triple(n) for n in meshes]), ("schrodinger", [schrodinger_triple(n) for n in meshes])):
    rep = probe_control_admissibility(family, 1.0)
    print(f"{name:24s} control     {rep.verdict:10s}", [round(v, 4) for v in rep.values])

# regularity: the averaged step response collapses near t=0 and C D_lam decays
for family in ("heat", "schrodinger"):
    res = regularity_suite(make_system(SystemSpec(family)))
    print(res.line())

# small-time growth of the heat input map and input-output map
print(heat_exponent_check(make_system(SystemSpec("heat"))).line())
