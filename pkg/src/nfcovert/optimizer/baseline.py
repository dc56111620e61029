"""Non-optimised reference schemes used for the near- vs far-field curves."""
from __future__ import annotations

from typing import Optional

import numpy as np

from ..config import SystemConfig
from ..rsma import BeamformingState, allocate_common_rate, rates
from .sca import Instance, mrt_precoders


def baseline_beamformers(realization, cfg: SystemConfig, seed: Optional[int] = None,
                         common_fraction: float = 0.2) -> BeamformingState:
    """Random-phase RIS with MRT precoders at full (covertness-capped) power.

    The far-field baseline is the same routine applied to a realization
    drawn with ``far_field=True``.  Power is ``P_max`` unless the warden
    leakage would exceed its budget, in which case it is scaled down.
    """
    inst = Instance.build(realization, cfg)
    if seed is None:
        seed = realization.seed if realization.seed is not None else 0
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(realization.index, 2)))
    theta = rng.uniform(0, 2 * np.pi, inst.n)
    psi = np.exp(1j * theta)
    power = inst.p_max
    gain = inst.willie_gain(psi)
    if gain > 0:
        power = min(power, inst.leak_cap / gain)
    h = inst.cascaded(psi)
    W = mrt_precoders(h, power, common_fraction)
    if common_fraction == 0:
        W[:, 0] = 0
    state = BeamformingState(W[:, 0], W[:, 1:].T, theta, np.zeros(inst.k))
    rep = rates(state, h, cfg.noise)
    p_c, _ = allocate_common_rate(rep.R_c, rep.R_p, inst.r_min)
    return state.replace(p_c=p_c)
