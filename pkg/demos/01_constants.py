"""The optimal constants C(r) = inf_w nu_{r,r-1}(w) / w^2.

C(r) enters the dimension bounds 2(m-1)/C(m) of complete graphs and
2D/C(2) of Ricci-flat graphs.
"""
import numpy as np

from hybridcd.upsilon import c_of_r, nu_ratio

for r in np.arange(0, 5.01, 0.5):
    res = c_of_r(r)
    print(f"r = {r:3.1f}   C(r) = {res.value:.10f}   argmin w = {res.argmin:+.5f}")

# the ratio near its minimiser for r = 2
w = np.linspace(-3, 1, 9)
print("\nnu_{2,1}(w)/w^2 on a few points:")
for wi, v in zip(w, nu_ratio(2.0, w)):
    print(f"  w = {wi:+.2f}  ratio = {v:.6f}")
