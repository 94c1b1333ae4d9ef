"""Observation container for function and first-partial channels."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tables
from .errors import InputError


@dataclass
class Channel:
    """One observation stream.

    Channel 0 observes ``f``; channel ``j >= 1`` observes ``df/dt_j``
    (coordinate ``j - 1`` in 0-based terms).  ``scales`` optionally gives a
    per-row noise standard deviation overriding ``sigma``.
    """

    points: np.ndarray
    responses: np.ndarray
    sigma: float
    scales: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.responses = np.asarray(self.responses, dtype=float).reshape(-1)
        self.sigma = float(self.sigma)
        if self.points.shape[0] != self.responses.size:
            raise InputError(
                f"channel has {self.points.shape[0]} points but {self.responses.size} responses")
        if self.sigma < 0:
            raise InputError(f"noise scale must be >= 0, got {self.sigma}")
        if self.scales is not None:
            self.scales = np.asarray(self.scales, dtype=float).reshape(-1)
            if self.scales.size != self.responses.size:
                raise InputError("per-row scales do not match response count")

    @property
    def n(self) -> int:
        return self.responses.size

    def row_scales(self) -> np.ndarray:
        if self.scales is not None:
            return self.scales
        return np.full(self.n, self.sigma)


@dataclass
class DerivativeDataset:
    channels: list[Channel]
    seed: int | None = None
    truth_hash: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.channels:
            raise InputError("dataset needs at least the function channel")
        d = self.channels[0].points.shape[1]
        for j, ch in enumerate(self.channels):
            if ch.points.shape[1] != d:
                raise InputError(f"channel {j} has dimension {ch.points.shape[1]}, expected {d}")
            if ch.n and (ch.points.min() < 0.0 or ch.points.max() > 1.0):
                raise InputError(f"channel {j} has design points outside [0, 1]^d")
        if self.p > d:
            raise InputError(f"{self.p} derivative channels exceed dimension {d}")

    @property
    def d(self) -> int:
        return self.channels[0].points.shape[1]

    @property
    def p(self) -> int:
        return len(self.channels) - 1

    @property
    def sigmas(self) -> list[float]:
        return [ch.sigma for ch in self.channels]

    def save(self, path) -> None:
        header = {"d": self.d, "p": self.p, "sigmas": self.sigmas,
                  "seed": self.seed, "truth_hash": self.truth_hash}
        header.update(self.meta)
        cols = ["channel"] + [f"t{k + 1}" for k in range(self.d)] + ["response", "scale"]
        rows = []
        for j, ch in enumerate(self.channels):
            sc = ch.row_scales()
            for i in range(ch.n):
                rows.append([j, *ch.points[i].tolist(), float(ch.responses[i]), float(sc[i])])
        tables.write(path, header, cols, rows)

    @classmethod
    def load(cls, path) -> "DerivativeDataset":
        header, cols, rows = tables.read(path)
        for key in ("d", "p", "sigmas"):
            if key not in header:
                raise InputError(f"{path}: header is missing {key!r}")
        d, p = int(header["d"]), int(header["p"])
        expected = ["channel"] + [f"t{k + 1}" for k in range(d)] + ["response", "scale"]
        if cols != expected:
            raise InputError(f"{path}: expected columns {expected}, got {cols}")
        try:
            arr = np.array([[float(v) for v in row] for row in rows]).reshape(-1, d + 3)
        except ValueError as exc:
            raise InputError(f"{path}: non-numeric entry") from exc
        sigmas = [float(s) for s in header["sigmas"]]
        if len(sigmas) != p + 1:
            raise InputError(f"{path}: sigmas has {len(sigmas)} entries for p={p}")
        channels = []
        for j in range(p + 1):
            sel = arr[:, 0] == j
            sc = arr[sel, d + 2]
            scales = None if np.all(sc == sigmas[j]) else sc
            channels.append(Channel(arr[sel, 1 : d + 1], arr[sel, d + 1], sigmas[j], scales))
        meta = {k: v for k, v in header.items() if k not in ("d", "p", "sigmas", "seed", "truth_hash")}
        return cls(channels, header.get("seed"), header.get("truth_hash"), meta)


def as_dataset(points: Sequence, responses: Sequence, sigmas: Sequence[float]) -> DerivativeDataset:
    """Convenience constructor from per-channel lists."""
    if not len(points) == len(responses) == len(sigmas):
        raise InputError("points, responses and sigmas must have one entry per channel")
    return DerivativeDataset([Channel(t, y, s) for t, y, s in zip(points, responses, sigmas)])
