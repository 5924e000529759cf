"""Trajectory record shared by the iterators, the integrator and the studies."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# termination reasons
CONVERGED_GRAD = "converged_grad"
REACHED_TARGET = "reached_target"
DIVERGED = "diverged"
MAX_ITERS = "max_iters"
SOLVER_ERROR = "solver_error"
COMPLETED = "completed"  # integrator ran to t_end
ESCAPED = "escaped"


@dataclass
class DecayFit:
    """Log-linear fit ``log d_k ~ c + slope * k``.

    ``rate`` is ``exp(slope)``: per-step contraction factor for iterations,
    per-unit-time factor for flows. ``slope`` itself is the exponent.
    """

    slope: float
    rate: float
    r2: float
    samples: int

    @property
    def decaying(self) -> bool:
        return self.slope < 0


@dataclass
class Trajectory:
    stamps: np.ndarray
    states: np.ndarray
    termination: str
    failed_index: Optional[int] = None
    error: Optional[str] = None
    decay_fit: Optional[DecayFit] = None
    steps: int = 0
    info: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __len__(self):
        return len(self.stamps)


def fit_decay(stamps, distances, transient: float = 0.2, floor: float = 1e-12,
              min_samples: int = 10) -> Optional[DecayFit]:
    """OLS fit of ``log(distance)`` against the stamps.

    The first ``transient`` fraction of the samples is dropped, as is every
    sample at or below the roundoff ``floor``. Returns ``None`` when fewer than
    ``min_samples`` usable samples remain.
    """
    t = np.asarray(stamps, dtype=float)
    d = np.asarray(distances, dtype=float)
    start = int(np.floor(transient * len(t)))
    t, d = t[start:], d[start:]
    keep = d > floor
    t, d = t[keep], d[keep]
    if len(t) < min_samples:
        return None
    y = np.log(d)
    A = np.vstack([t, np.ones_like(t)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ np.array([slope, icpt])
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return DecayFit(float(slope), float(np.exp(slope)), r2, int(len(t)))
