"""
Entropy curves and their coefficients
=====================================

The lifespan-entropy curve of a diagram is summarized by Hermite (HEPC)
and Fourier (FAPC) coefficients, both computed in closed form.
"""
import numpy as np

from tdasleep.curves import (entropy_curve, fapc_coefficients, hepc_coefficients,
                             reconstruct_fapc, reconstruct_hepc, residual)
from tdasleep.diagram import PersistenceDiagram

dgm = PersistenceDiagram([[0, 1], [1, 2]])
curve = entropy_curve(dgm)
print("breakpoints", curve.breakpoints.tolist(), "values", curve.values.round(6).tolist())

hepc = hepc_coefficients(dgm, 15)
print("alpha_0 =", round(hepc.coeffs[0], 6))
x, approx = reconstruct_hepc(hepc, (0.0, 2.0), 5)
print("HEPC reconstruction at", x.tolist(), "->", approx.round(4).tolist())

fapc = fapc_coefficients(dgm, 15)
print("AP domain", fapc.domain, "beta_0 =", round(fapc.complex[0].real, 6))

# more terms tighten the fit of the same curve on its own domain
rng = np.random.default_rng(4)
b = rng.uniform(0, 1, 12)
dgm = PersistenceDiagram(np.column_stack([b, b + rng.exponential(0.3, 12)]))
curve = entropy_curve(dgm)
for n in (5, 15, 30, 60):
    x, s = reconstruct_fapc(fapc_coefficients(dgm, n))
    print(f"FAPC n={n:2d}: residual {residual(curve, x, s):.4f}")

# a single bar has zero entropy everywhere, so all coefficients vanish
one = PersistenceDiagram([[0.2, 0.7]])
print("single bar:", np.any(hepc_coefficients(one).coeffs), np.any(fapc_coefficients(one).coeffs))
