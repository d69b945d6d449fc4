"""
Where does a case land on the relaxation ladder?
================================================

Three two-bus cases, each needing a different amount of relaxation
before the OPF becomes feasible.
"""

from gridforge.opf.ladder import progressive_solve
from gridforge.synthetic import two_bus_network

cases = {
    "roomy line": two_bus_network(rate_pu=2.0, r=0.01),
    "tight line": two_bus_network(rate_pu=0.9, r=0.01),
    "short on capacity": two_bus_network(r=0.01, cap_mw=80.0),
}

for name, net in cases.items():
    dc, ac, rep = progressive_solve(net)
    print(f"{name:18s} dc={rep.dc_level} ac={rep.ac_level} served={ac.served_mw:.1f} MW")
    # every attempt along the way is kept in the report
    for a in rep.attempts:
        print("   ", a["formulation"], a["level"], "ac1" if a["ac1"] else "", a["status"])
