"""SCAD derivative and the weight vectors it induces for the weighted-L1 surrogate.

Only the derivative of the folded-concave penalty is ever needed: the solver
minimizes the tangent weighted-L1 surrogate, whose per-coordinate weights are
the derivative evaluated at the current estimate.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScadParams:
    """Penalty level ``lam`` and concavity knee ``a`` (must exceed 2)."""

    lam: float
    a: float = 3.7

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"penalty level must be nonnegative, got {self.lam}")
        if self.a <= 2:
            raise ValueError(f"clipping parameter must exceed 2, got {self.a}")


def scad_derivative(beta_abs, params: ScadParams):
    """Derivative of the SCAD penalty at a nonnegative coefficient magnitude.

    lam on [0, lam]; linearly decaying (a*lam - b) / (a - 1) on (lam, a*lam);
    zero beyond a*lam.  lam == 0 collapses everything to zero.
    """
    b = np.asarray(beta_abs, dtype=float)
    if np.any(b < 0):
        raise ValueError("coefficient magnitude must be nonnegative")
    lam, a = params.lam, params.a
    if lam == 0.0:
        out = np.zeros_like(b)
    else:
        out = np.where(b <= lam, lam,
                       np.clip(a * lam - b, 0.0, None) / (a - 1.0))
    return float(out) if out.ndim == 0 else out


def lla_weights(beta_init, params: ScadParams) -> np.ndarray:
    """Per-coordinate surrogate weights: the SCAD derivative at ``|beta_init|``."""
    return np.atleast_1d(scad_derivative(np.abs(np.asarray(beta_init, dtype=float)), params))


def l1_weights(d: int, lam: float) -> np.ndarray:
    """Constant weight vector giving the plain L1 penalty."""
    if lam < 0:
        raise ValueError(f"penalty level must be nonnegative, got {lam}")
    return np.full(d, float(lam))
