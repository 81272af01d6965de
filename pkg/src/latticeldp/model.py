"""Jump law of the two-species lattice process.

The process lives on the non-negative quadrant of the integer lattice and
moves by one of five jumps. Up-jumps in each coordinate fire at constant
rates; down-jumps pull each coordinate back at a rate proportional to its
current value, and a joint down-jump of both coordinates fires at a rate
proportional to min(z1, z2). Down-rates vanish on the axes, so the process
never leaves the quadrant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "COORD_LIMIT",
    "JumpVector",
    "LatticeState",
    "RateParams",
    "UP1",
    "UP2",
    "DOWN1",
    "DOWN2",
    "JOINT",
    "JUMPS",
    "jump_intensity",
    "total_rate",
    "jump_probabilities",
]

# Coordinates stay far below 2**53, so double-precision arithmetic on them
# is exact; construction enforces the much tighter 2**32.
COORD_LIMIT = 2**32

_ADMISSIBLE = ((1, 0), (0, 1), (-1, 0), (0, -1), (-1, -1))


@dataclass(frozen=True)
class JumpVector:
    """One of the five admissible jump directions."""

    dz1: int
    dz2: int

    def __post_init__(self) -> None:
        if (self.dz1, self.dz2) not in _ADMISSIBLE:
            raise ValueError(
                f"inadmissible jump ({self.dz1}, {self.dz2}); "
                f"expected one of {_ADMISSIBLE}"
            )

    def __iter__(self):
        return iter((self.dz1, self.dz2))


UP1 = JumpVector(1, 0)
UP2 = JumpVector(0, 1)
DOWN1 = JumpVector(-1, 0)
DOWN2 = JumpVector(0, -1)
JOINT = JumpVector(-1, -1)

#: Canonical jump order. Every intensity/probability vector and the fixed
#: summation order of total_rate follow this order.
JUMPS = (UP1, UP2, DOWN1, DOWN2, JOINT)


@dataclass(frozen=True)
class LatticeState:
    """A point of the non-negative quadrant."""

    z1: int
    z2: int

    def __post_init__(self) -> None:
        if self.z1 < 0 or self.z2 < 0:
            raise ValueError(f"state ({self.z1}, {self.z2}) outside the quadrant")
        if self.z1 >= COORD_LIMIT or self.z2 >= COORD_LIMIT:
            raise ValueError(f"state ({self.z1}, {self.z2}) exceeds {COORD_LIMIT}")

    def __iter__(self):
        return iter((self.z1, self.z2))


@dataclass(frozen=True)
class RateParams:
    """The five base intensities, all strictly positive.

    Derived coefficients: c0 is the total up-rate (state independent),
    c1 and c2 multiply the coordinates in the single-coordinate down-rates,
    c3 multiplies min(z1, z2) in the joint down-rate.
    """

    lam_up1: float
    lam_up2: float
    lam_down1: float
    lam_down2: float
    lam_joint: float

    def __post_init__(self) -> None:
        for name in ("lam_up1", "lam_up2", "lam_down1", "lam_down2", "lam_joint"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")

    @property
    def c0(self) -> float:
        return self.lam_up1 + self.lam_up2

    @property
    def c1(self) -> float:
        return self.lam_down1

    @property
    def c2(self) -> float:
        return self.lam_down2

    @property
    def c3(self) -> float:
        return self.lam_joint

    @classmethod
    def unit(cls) -> "RateParams":
        """All five intensities equal to 1."""
        return cls(1.0, 1.0, 1.0, 1.0, 1.0)

    @classmethod
    def from_dict(cls, d: dict) -> "RateParams":
        """Build from the configuration mapping (keys ``lambda_up1`` etc.)."""
        keys = ("lambda_up1", "lambda_up2", "lambda_down1", "lambda_down2", "lambda_joint")
        missing = [k for k in keys if k not in d]
        if missing:
            raise ValueError(f"missing rate keys: {', '.join(missing)}")
        return cls(*(float(d[k]) for k in keys))

    def to_dict(self) -> dict:
        return {
            "lambda_up1": self.lam_up1,
            "lambda_up2": self.lam_up2,
            "lambda_down1": self.lam_down1,
            "lambda_down2": self.lam_down2,
            "lambda_joint": self.lam_joint,
        }


def jump_intensity(params: RateParams, state, jump) -> float:
    """Intensity of one jump out of ``state``.

    ``state`` and ``jump`` may be the dataclasses above or plain pairs.
    Up-rates are state independent; down-rates are z1*c1, z2*c2 and
    min(z1, z2)*c3 and therefore vanish on the axes.
    """
    z1, z2 = state
    dz = tuple(jump)
    if dz == (1, 0):
        return params.lam_up1
    if dz == (0, 1):
        return params.lam_up2
    if dz == (-1, 0):
        return z1 * params.lam_down1
    if dz == (0, -1):
        return z2 * params.lam_down2
    if dz == (-1, -1):
        return min(z1, z2) * params.lam_joint
    raise ValueError(f"inadmissible jump {dz!r}")


def total_rate(params: RateParams, state) -> float:
    """Total jump rate out of ``state``.

    Left-to-right summation order (up1, up2, down1, down2, joint) is fixed
    so the result is bit-identical to summing the five jump intensities in
    canonical order.
    """
    z1, z2 = state
    return params.c0 + z1 * params.c1 + z2 * params.c2 + min(z1, z2) * params.c3


def jump_probabilities(params: RateParams, state) -> np.ndarray:
    """Probabilities of the five jumps out of ``state``, in JUMPS order."""
    h = total_rate(params, state)
    return np.array([jump_intensity(params, state, y) for y in JUMPS]) / h
