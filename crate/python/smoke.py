"""Smoke test for the chaoslab Python module.

Build the extension and put it on the path first, e.g.

    cargo build -p chaoslab-py --features extension-module --release
    cp target/release/libchaoslab_py.so python/chaoslab.so
    python3 python/smoke.py
"""

import json
import math

import chaoslab

m = chaoslab.CovarianceModel("berry", 2)
assert abs(m(0.0) - 1.0) < 1e-15
assert m.d == 2

slope = m.moment_slope(8, 64)
assert abs(slope + 1.0) < 0.1, slope

e = chaoslab.CovarianceModel("exponential", 1, alpha=1.0)
for q in (1, 4, 16):
    value, _ = e.moment(q)
    assert abs(value - 2.0 / q) < 1e-10, (q, value)

h2 = chaoslab.HermiteExpansion("hermite:2")
assert h2.rank == 2
ind = chaoslab.HermiteExpansion("indicator:0")
assert ind.rank == 1

cond = chaoslab.CovarianceModel("berry", 3).conditions()
assert cond["delta"] == 1.0 and cond["decay_pass"] and cond["regularity_pass"]

v = chaoslab.variance(e, h2, 8.0, n=2)
# 2 * ∫∫_{[-8,8]^2} e^{-2|x-y|} = 2 * (2*16 - 1 + e^{-32}) / 2
assert abs(v["total"] - (32.0 - 1.0 + math.exp(-32.0))) < 1e-6, v["total"]

cfg = {"model": {"kind": "exponential", "alpha": 1.0, "d": 1}, "phi": "hermite:2",
       "t_list": [8.0], "n_reps": 50, "seed": 3, "h": 0.1}
rep = chaoslab.clt(json.dumps(cfg))
assert rep["results"][0]["n_reps"] == 50
assert rep["results"] == chaoslab.clt(json.dumps(cfg))["results"]

try:
    chaoslab.CovarianceModel("bessel", 2)
except ValueError:
    pass
else:
    raise AssertionError("unknown model accepted")

print("chaoslab", chaoslab.__version__, "smoke ok")
