"""
When influence fades too fast
=============================

If G(x) decays faster than 1/x^2 the pair may never meet again once it is
far apart, and |Y(t)| keeps growing.  We only look at the trend: nothing is
claimed about the rate.
"""

from __future__ import annotations

from sbc_opinion import NoiseSpec, PowerLaw, SeedPolicy, TwoAgentConfig, UniformBounded
from sbc_opinion.experiments import mean_abs_difference

times = [2 ** 8, 2 ** 10, 2 ** 12]
noise = NoiseSpec(UniformBounded(0.5))
for p in (1.5, 2.5):
    cfg = TwoAgentConfig(PowerLaw(1.0, p), noise)
    m = mean_abs_difference(cfg, times, 4000, SeedPolicy(7))
    print(f"p = {p}: mean |Y(t)| at t = {times}:", [round(float(x), 3) for x in m])
