"""Least-squares fits in transformed coordinates."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class Fit:
    slope: float
    intercept: float
    r2: float
    rate: float | None = None
    points: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _line(X: np.ndarray, Y: np.ndarray) -> tuple[float, float, float]:
    if X.size < 3:
        raise ValueError("need at least 3 points")
    if np.ptp(X) <= 1e-12 * max(1.0, float(np.max(np.abs(X)))):
        raise ValueError("degenerate abscissae")
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def fit_model(x, y, model: str = "loglog_line") -> Fit:
    """Fit y against x.

    Models:
        loglog_line: log y = slope·log x + intercept.
        gauss_decay: log y = −rate·x² + intercept (slope = −rate).
        exp_decay: log y = −rate·x + intercept.

    Nonpositive y are dropped for the logarithmic models.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    if model == "loglog_line":
        keep &= x > 0
        s, b, r2 = _line(np.log(x[keep]), np.log(y[keep]))
        return Fit(s, b, r2, None, int(keep.sum()))
    if model == "gauss_decay":
        s, b, r2 = _line(x[keep] ** 2, np.log(y[keep]))
        return Fit(s, b, r2, -s, int(keep.sum()))
    if model == "exp_decay":
        s, b, r2 = _line(x[keep], np.log(y[keep]))
        return Fit(s, b, r2, -s, int(keep.sum()))
    raise ValueError(f"unknown model {model!r}")
