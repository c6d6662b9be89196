"""Episode metrics: SPL, SoftSPL and distance to success."""
from __future__ import annotations

import math


def _efficiency(oracle_m: float, agent_m: float) -> float:
    denom = max(agent_m, oracle_m)
    return 1.0 if denom <= 0 else oracle_m / denom


def spl(success: bool, oracle_m: float, agent_m: float) -> float:
    """Success weighted by oracle / max(agent, oracle)."""
    if oracle_m < 0 or agent_m < 0:
        raise ValueError("path lengths must be non-negative")
    return _efficiency(oracle_m, agent_m) if success else 0.0


def soft_spl(d_init: float, d_final: float, oracle_m: float, agent_m: float) -> float:
    """Progress (1 - d_T/d_init) times path efficiency, clamped to [0, 1].

    An episode that starts at distance 0 counts as full progress.
    """
    if oracle_m < 0 or agent_m < 0:
        raise ValueError("path lengths must be non-negative")
    if not math.isfinite(d_final):
        return 0.0
    progress = 1.0 if d_init <= 0 else 1.0 - d_final / d_init
    return min(max(progress * _efficiency(oracle_m, agent_m), 0.0), 1.0)


def dts(d_final: float) -> float:
    """Geodesic distance left to the success zone, never negative."""
    return max(d_final, 0.0)
