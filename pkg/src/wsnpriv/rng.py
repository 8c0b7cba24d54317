"""Deterministic, labelled random streams.

Every piece of randomness in a simulation run comes from a SimRng derived
from one master seed plus a stream label.  Same (seed, label) pair gives the
same sequence; distinct labels give independent streams, so concurrent
trials never share state.
"""

from __future__ import annotations

import hashlib
import random

__all__ = ["SimRng"]


def _derive_seed(master_seed: int, stream_label: str) -> int:
    digest = hashlib.sha256(
        f"{master_seed}\x1f{stream_label}".encode()
    ).digest()
    return int.from_bytes(digest[:16], "big")


class SimRng(random.Random):
    """A random.Random whose state is a pure function of (master_seed, label)."""

    def __new__(cls, master_seed: int = 0, stream_label: str = "root"):
        # random.Random.__new__ rejects extra positional args; bypass it.
        return super().__new__(cls)

    def __init__(self, master_seed: int, stream_label: str = "root"):
        self.master_seed = int(master_seed)
        self.stream_label = stream_label
        super().__init__(_derive_seed(self.master_seed, stream_label))

    def stream(self, label: str | int) -> "SimRng":
        """Derive an independent child stream; does not advance this one."""
        return SimRng(self.master_seed, f"{self.stream_label}/{label}")

    def __repr__(self) -> str:
        return f"SimRng(master_seed={self.master_seed}, stream_label={self.stream_label!r})"
