"""Running per-channel z-scoring so kernel distances have a stable scale."""

from __future__ import annotations

import numpy as np


class RunningStandardizer:
    """Welford-style running mean/variance per channel, update then transform.

    The first ``warmup`` frames pass through unchanged while the statistics
    settle; the caller decides what to do with them (the pipeline keeps them
    out of the detector). A variance floor keeps constant channels at z = 0
    instead of dividing by zero.
    """

    def __init__(self, dim: int, warmup: int = 50, var_floor: float = 1e-6) -> None:
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        if warmup < 1:
            raise ValueError(f"warmup must be >= 1, got {warmup}")
        if var_floor <= 0:
            raise ValueError(f"var_floor must be > 0, got {var_floor}")
        self.dim = dim
        self.warmup = warmup
        self.var_floor = var_floor
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    @property
    def warmed_up(self) -> bool:
        return self.count >= self.warmup

    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.full(self.dim, self.var_floor)
        return np.maximum(self._m2 / (self.count - 1), self.var_floor)

    def push(self, values: np.ndarray) -> np.ndarray:
        """Fold one frame into the statistics and return its transform."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {values.shape}")
        self.count += 1
        delta = values - self.mean
        self.mean = self.mean + delta / self.count
        self._m2 = self._m2 + delta * (values - self.mean)
        if self.count <= self.warmup:
            return values.copy()
        return (values - self.mean) / np.sqrt(self.variance())
