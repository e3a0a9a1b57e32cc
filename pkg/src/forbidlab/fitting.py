"""Least-squares exponential rate fits Q(h) ~ C h^{-p} exp(-beta/h)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData


@dataclass
class RateFit:
    beta: float
    intercept: float
    r2: float
    max_residual: float
    n: int
    prefactor_power: float = 0.0


def fit_rate(h, q=None, log_q=None, prefactor_power: float = 0.0, min_points: int = 3) -> RateFit:
    """Slope of -log(Q h^p) against 1/h.

    Pass ``log_q`` directly when Q underflows.  ``prefactor_power`` removes a
    known algebraic prefactor h^{-p} before fitting (p=0 is the plain fit).
    """
    h = np.asarray(h, dtype=float)
    if log_q is None:
        q = np.abs(np.asarray(q, dtype=float))
        if np.any(q <= 0):
            raise InsufficientData("nonpositive values cannot be fitted in log scale")
        log_q = np.log(q)
    log_q = np.asarray(log_q, dtype=float)
    ok = np.isfinite(log_q) & np.isfinite(h) & (h > 0)
    h, log_q = h[ok], log_q[ok]
    if h.size < max(min_points, 2) or np.unique(h).size < 2:
        raise InsufficientData(f"need at least {min_points} distinct h values, got {h.size}")
    y = -(log_q + prefactor_power * np.log(h))
    x = 1.0 / h
    A = np.vstack([x, np.ones_like(x)]).T
    (beta, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (beta * x + c)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(res ** 2) / ss if ss > 0 else 1.0
    return RateFit(float(beta), float(c), float(r2), float(np.max(np.abs(res))), int(h.size),
                   float(prefactor_power))
