"""Li-Yau and Harnack bounds on closed-form solutions of du/dt = Laplace u + L_d u."""
import numpy as np

from hybridcd import cd, graph as G, heat, inequalities as ineq

g = G.two_point()
d = cd.hybrid_d_for_euclidean(1, g)
print(f"hybrid dimension for R x K2: d = {d:.6f}")

rng = np.random.default_rng(0)
sol = heat.random_mixture(g, 1, rng)
rep = ineq.verify_liyau_global(sol, d)
print(f"Li-Yau with d: passed={rep.passed}, min slack {rep.min_slack:.4e} over {rep.samples} samples")

# heat kernel: the Li-Yau expression is exactly n/(2t) everywhere
kernel = heat.GaussianMixtureSolution(g, 1, [heat.MixtureTerm(1.0, (0.0,), 0.0, (1.0, 1.0))])
print("heat kernel LHS at t=1:", ineq.liyau_lhs(kernel, 1.0, [2.3], "y1"))

# leaving out the graph part of the dimension is caught at small t
sharp = heat.GaussianMixtureSolution(g, 1, [heat.MixtureTerm(1.0, (0.0,), 1e-6, (1.0, 0.0))])
bad = ineq.verify_liyau_global(sharp, 1.0)
print(f"Li-Yau with d = n: passed={bad.passed}, worst point {bad.worst_point}")

h = ineq.verify_harnack_global(sol, d, ineq.PairPlan(pairs=2000))
print(f"Harnack: passed={h.passed}, min relative slack {h.min_slack:.4e}")

cdh = ineq.verify_cd_hyb(sol, 0.0, d)
print(f"CD_hyb(0, d) on time slices: passed={cdh.passed}, min slack {cdh.min_slack:.3e}")

res = ineq.minimal_local_constant(sol, 0.5, 1.0, (0.0,), 0.3)
print(f"smallest local constant C for theta=1/2, rho=1, d=0.3: {res['C']:.6f}")
