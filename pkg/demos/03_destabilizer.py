"""An unstable rank-2 bundle: the continuity path blows up.

Two blocks with constant mean-curvature offsets -1/2 and +1/2 cannot be made
Einstein. log f_eps grows like |K0|/eps, and the probe extracts the
destabilizing block projector from the rescaled metrics.
"""

from pathlib import Path

import numpy as np

from gkahler.config import load_config
from gkahler.solver import Problem, continuity_path

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "destabilizer.json")
pr = Problem(cfg.hs, cfg.bundle(), cfg.sp, k_offset=cfg.k_offset)
res = continuity_path(pr)
print("verdict:", res.verdict, " |K0| =", res.khat0_norm)
for r in res.rows:
    print(f"eps {r['epsilon']:8.4g}   m_eps {r['m_eps']:9.4f}   bound |K0|/eps {res.khat0_norm / r['epsilon']:9.4f}")
d = res.destabilizer
print("projector at a grid point:\n", np.round(d["pi"][0, 0], 10))
print(f"mu(S) = {d['mu_S']:.6f}  mu(E) = {d['mu_E']:.6f}  destabilizing: {d['destabilizing']}")
