"""In-memory container for kept posterior draws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SampleSet:
    """Thinned cold-chain draws.

    Labels are stored 0-based and canonical with shape ``(S, m, n)``. For
    undirected fits the column fields are ``None`` and the column views alias
    the row draws.
    """

    iteration: np.ndarray
    z1: np.ndarray
    alpha1: np.ndarray
    eta1: np.ndarray
    log_lik: np.ndarray
    z2: np.ndarray | None = None
    alpha2: np.ndarray | None = None
    eta2: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.iteration = np.asarray(self.iteration, dtype=np.int64)
        self.z1 = np.asarray(self.z1, dtype=np.int32)
        self.alpha1 = np.asarray(self.alpha1, dtype=float).reshape(self.z1.shape[0], -1)
        self.eta1 = np.asarray(self.eta1, dtype=float)
        self.log_lik = np.asarray(self.log_lik, dtype=float)
        if self.z2 is not None:
            self.z2 = np.asarray(self.z2, dtype=np.int32)
            self.alpha2 = np.asarray(self.alpha2, dtype=float).reshape(self.z2.shape[0], -1)
            self.eta2 = np.asarray(self.eta2, dtype=float)
        if self.z1.ndim != 3:
            raise ValueError("z1 must have shape (samples, m, n)")

    @property
    def directed(self) -> bool:
        return self.z2 is not None

    @property
    def S(self) -> int:
        return int(self.z1.shape[0])

    @property
    def m(self) -> int:
        return int(self.z1.shape[1])

    @property
    def n(self) -> int:
        return int(self.z1.shape[2])

    def labels(self, sequence="rows") -> np.ndarray:
        if sequence in ("rows", "row", 1):
            return self.z1
        if sequence in ("cols", "col", 2):
            return self.z2 if self.z2 is not None else self.z1
        raise ValueError(f"unknown sequence {sequence!r}")

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        arrays = ("iteration", "z1", "alpha1", "eta1", "log_lik", "z2", "alpha2", "eta2")
        for name in arrays:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return self.metadata == other.metadata

    @classmethod
    def from_records(cls, records, metadata=None, directed=True) -> SampleSet:
        """Stack snapshot dicts (as produced by ``ChainState.snapshot``)."""
        if not records:
            raise ValueError("a sample set needs at least one draw")
        get = lambda key: np.stack([np.asarray(r[key]) for r in records])
        out = dict(
            iteration=[r["iteration"] for r in records],
            z1=get("z1"),
            alpha1=get("alpha1"),
            eta1=[r["eta1"] for r in records],
            log_lik=[r["log_lik"] for r in records],
            metadata=dict(metadata or {}),
        )
        if directed:
            out.update(z2=get("z2"), alpha2=get("alpha2"), eta2=[r["eta2"] for r in records])
        return cls(**out)

    def record(self, s: int) -> dict:
        rec = {
            "iteration": int(self.iteration[s]),
            "z1": self.z1[s],
            "alpha1": self.alpha1[s],
            "eta1": float(self.eta1[s]),
            "log_lik": float(self.log_lik[s]),
        }
        if self.directed:
            rec.update(z2=self.z2[s], alpha2=self.alpha2[s], eta2=float(self.eta2[s]))
        return rec
