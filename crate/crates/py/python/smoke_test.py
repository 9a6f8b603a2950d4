"""Smoke test for the pyconekit extension."""
import math

import pyconekit as ck

p = ck.ConeParams(0.75, 0.9, c_coef=0.5)
m = ck.ReferenceMetric(p, dim=1, base_scale=0.1)

g = m.metric([0.3 + 0.1j])
assert g[0][0].real > 0 and abs(g[0][0].imag) < 1e-14

c = m.curvature([0.3 + 0.1j])
assert math.isfinite(c["normalized_bisectional"])

fit = m.fit_blowup_rate("component", r_max=0.1, r_min=0.001, count=9)
assert math.isfinite(fit["exponent"])

sym = ck.symbolic_verify()
assert sym["cancellation_exact"]
assert sym["matches_expected"]

h = ck.holder("r2tau", 0.5, alpha=1.0, radial=16, angular=8)
assert abs(h["seminorm"] - 2.0) < 0.2, h

try:
    ck.ConeParams(1.5, 0.9)
except ValueError:
    pass
else:
    raise AssertionError("tau > 1 accepted")

print("pyconekit smoke test ok")
