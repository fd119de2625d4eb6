"""Class labels. Integer codes index the GAT's output columns."""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class Label(IntEnum):
    FAKE = 0
    REAL = 1

    @classmethod
    def parse(cls, value) -> "Label":
        if isinstance(value, Label):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("fake", "fake_news", "false", "misinformed"):
                return cls.FAKE
            if key in ("real", "real_news", "true", "correct"):
                return cls.REAL
            raise ValueError(f"unrecognised label {value!r}")
        return cls(int(value))

    def __str__(self):
        return self.name.lower()


def to_sign(labels) -> np.ndarray:
    """Map Fake/Real codes to -1/+1."""
    return np.where(np.asarray(labels) == Label.REAL, 1.0, -1.0)


def from_sign(signs) -> np.ndarray:
    return np.where(np.asarray(signs) > 0, int(Label.REAL), int(Label.FAKE))
