"""Searching and re-checking Ricci-flat certificates."""
from hybridcd import graph as G, ricci

for name, g in [("K3", G.complete(3)), ("K4", G.complete(4)), ("square", G.square()), ("C6", G.cycle(6))]:
    results = ricci.certify(g)
    statuses = {str(y): r.status for y, r in results.items()}
    print(name, statuses)

# the infinite lattice Z seen through a finite ball: only the center has a full neighbourhood
ball = G.integer_ball(2)
res = ricci.certify_at(ball, 0)
print("\nZ ball, center:", res.certificate.maps)
print("verified:", ricci.verify_certificate(ball, res.certificate).checks)

try:
    ricci.certify(G.star(3))
except G.GraphError as exc:
    print("\nstar graph:", exc)
