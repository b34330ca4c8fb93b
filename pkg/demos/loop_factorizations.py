# coding: utf-8

# # Loop-group factorizations
#
# A tour of the factorization layer: build a loop from known factors,
# split it again, and look at what happens on the small cells.

import numpy as np

from lorentz_cmc.iwasawa import NotInBigCell, cell_classify, iwasawa_factor, switch_factor
from lorentz_cmc.loop_algebra import LoopMatrix, make_omega, reality_residual

N = 24
E12 = np.array([[0, 1], [0, 0]])
E21 = np.array([[0, 0], [1, 0]])

# ## A real-form loop times a plus loop
#
# F0 is hyperbolic in lambda with off-diagonal entries of odd degree;
# B0 starts at diag(rho, 1/rho) and has no negative powers.

c, s = np.cosh(0.4), np.sinh(0.4)
F0 = LoopMatrix.from_terms({0: c * np.eye(2), 1: s * np.exp(0.3j) * E12, -1: s * np.exp(-0.3j) * E21}, N)
B0 = (LoopMatrix.constant(np.diag([1.5, 1 / 1.5]), N)
      @ LoopMatrix.from_terms({0: np.eye(2), 1: 0.4j * E12}, N)
      @ LoopMatrix.from_terms({0: np.eye(2), 1: -0.7 * E21}, N))
print("F0 in the real form: residual", reality_residual(F0))

F, B, tag = iwasawa_factor(F0 @ B0)
print("tag:", tag.label)
print("error in F:", np.abs(F.coeffs - F0.coeffs).max(), " error in B:", np.abs(B.B.coeffs - B0.coeffs).max())
print("rho, mu:", B.rho, B.mu)

# ## Small cells
#
# omega_1 and omega_2 are the representatives of the first two small
# cells; neither factors.

for m in (1, 2, 3):
    try:
        iwasawa_factor(make_omega(m, N))
    except NotInBigCell as e:
        print(f"omega_{m}: not in the big cell, tag {e.tag.label}")
    print(f"  cell_classify -> {cell_classify(make_omega(m, N)).label}")

# ## Switching past omega_1
#
# B omega_1 = X B' with X explicit; the sign of |(mu + rho) rho| - 1 picks
# which big cell the product lands in.

sw = switch_factor(B)
lhs = sw.X @ sw.Bprime
rhs = B.B.resized(lhs.trunc_degree) @ make_omega(1, lhs.trunc_degree)
print(f"case {sw.case}, |X B' - B omega_1| = {np.abs(lhs.coeffs - rhs.coeffs).max():.1e}")
