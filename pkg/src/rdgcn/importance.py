"""Distance- and type-importance functions and the merged adjacency.

The distance functions map an integer tree distance ``t`` in ``[0, T]`` to a
weight in ``[0, 1]``. All accept scalars or integer arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError

VARIANTS = ("combined", "linear_cut", "power_only", "exp_only")


@dataclass(frozen=True)
class DistanceFnConfig:
    T: int = 10
    K: float = 0.1
    variant: str = "combined"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"T must be a positive integer, got {self.T}")
        if not self.K > 0:
            raise ValueError(f"K must be positive, got {self.K}")
        if self.variant == "linear_cut" and self.K > self.T:
            raise ValueError(f"linear_cut slope K={self.K} exceeds T={self.T}")


def _domain(t, T):
    arr = np.asarray(t)
    if arr.dtype.kind not in "iuf":
        raise DomainError(f"distance must be numeric, got {arr.dtype}")
    if np.any(arr < 0) or np.any(arr > T):
        raise DomainError(f"distance outside [0, {T}]")
    return arr.astype(np.float64)


def _out(w, t):
    return float(w) if np.ndim(t) == 0 else w


def imp_linear_cut(t, cfg: DistanceFnConfig):
    tt = _domain(t, cfg.T)
    return _out(np.where(tt < cfg.K, 1.0 - tt / cfg.K, 0.0), t)


def imp_power(t, cfg: DistanceFnConfig):
    tt = _domain(t, cfg.T)
    # (0/T)^T is pinned to an exact zero
    ratio_pow = np.where(tt == 0, 0.0, np.power(tt / cfg.T, cfg.T))
    return _out(1.0 - ratio_pow, t)


def imp_exp(t, cfg: DistanceFnConfig):
    tt = _domain(t, cfg.T)
    return _out(np.exp(-cfg.K * tt), t)


def imp_dis(t, cfg: DistanceFnConfig):
    """Distance importance for ``cfg.variant``; ``combined`` is power times exponential."""
    if cfg.variant == "linear_cut":
        return imp_linear_cut(t, cfg)
    if cfg.variant == "power_only":
        return imp_power(t, cfg)
    if cfg.variant == "exp_only":
        return imp_exp(t, cfg)
    w = np.asarray(imp_power(t, cfg)) * np.asarray(imp_exp(t, cfg))
    return _out(w, t)


def distance_adjacency(dist, cfg: DistanceFnConfig) -> np.ndarray:
    w = np.asarray(imp_dis(np.asarray(dist), cfg), dtype=np.float64)
    return w


def type_softmax(H: np.ndarray, q: np.ndarray) -> np.ndarray:
    logits = H @ q
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite type attention logits")
    z = np.exp(logits - logits.max())
    return z / z.sum()


def type_importance(type_ids, topo, H, q) -> np.ndarray:
    p = type_softmax(H, q)
    return np.where(np.asarray(topo) > 0, p[np.asarray(type_ids)], 0.0)


def merge_adjacency(a_dis, a_type) -> np.ndarray:
    a_dis = np.asarray(a_dis, dtype=np.float64)
    a_type = np.asarray(a_type, dtype=np.float64)
    if a_dis.shape != a_type.shape:
        raise ValueError(f"shape mismatch: {a_dis.shape} vs {a_type.shape}")
    return a_dis + a_type


def emit_curve(cfg: DistanceFnConfig, step: int = 1) -> list[tuple[int, float]]:
    return [(t, imp_dis(t, cfg)) for t in range(0, cfg.T + 1, step)]


def write_curve_csv(points, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "weight"])
        for t, w in points:
            writer.writerow([t, repr(float(w))])
