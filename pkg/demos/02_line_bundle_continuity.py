"""Continuity method on a line bundle over T^2.

For a line bundle the Einstein condition is a scalar Poisson equation, so the
solver output can be compared against a direct spectral solve. The path is
printed slice by slice.
"""

from pathlib import Path

import numpy as np

from gkahler.config import load_config
from gkahler.solver import Problem, continuity_path

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "line_bundle.json")
pr = Problem(cfg.hs, cfg.bundle(), cfg.sp)
res = continuity_path(pr)
print(f"lambda = {pr.lam:.6g}, verdict = {res.verdict}")
print(f"{'epsilon':>10} {'iters':>5} {'sup residual':>13} {'m_eps':>10}")
for r in res.rows:
    print(f"{r['epsilon']:10.4g} {r['iters']:5d} {r['sup_residual']:13.3e} {r['m_eps']:10.3e}")

phi = cfg.log_h[..., 0, 0].real
u = np.log(res.final_metric()[..., 0, 0].real) - phi
# flat curvature needs phi + u constant, so u = -phi up to a constant
print("max |u + phi - mean| =", float(np.abs(u + phi - (u + phi).mean()).max()))
