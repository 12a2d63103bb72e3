"""Sampling CD_Upsilon(0, d) on small graphs and estimating the least d.

The numeric supremum of (L_d u(y))^2 / Psi_{2,Upsilon}(u)(y) is compared with
the analytic bounds for complete and Ricci-flat graphs.
"""
from hybridcd import cd, graph as G
from hybridcd.cd import CdParams

cases = [
    ("2-point", G.two_point(), cd.analytic_d_complete(2)),
    ("K3", G.complete(3), cd.analytic_d_complete(3)),
    ("K4", G.complete(4), cd.analytic_d_complete(4)),
    ("square", G.square(), cd.analytic_d_ricci_flat(2)),
    ("K33", G.complete_bipartite(3, 3), cd.analytic_d_ricci_flat(3)),
]
for name, g, bound in cases:
    y = g.vertices[0]
    est = cd.cd_upsilon_estimate_min_d(g, y)
    print(f"{name:8s} analytic d = {bound:.8f}   estimate = {est.minimal_d_estimate:.8f}   ({est.status})")

# below the least dimension the sampler finds a witness
g = G.two_point()
rep = cd.cd_upsilon_check_at(g, "y1", CdParams(0.0, 1.1))
print("\nCD(0, 1.1) on the 2-point graph:", rep.status, "witness", rep.witness, "slack", rep.worst_slack)

# tensorisation with R^n
for n in (1, 2, 3):
    print(f"R^{n} x K2: CD_hyb(0, {cd.hybrid_d_for_euclidean(n, g):.6f})")
