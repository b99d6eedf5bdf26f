"""Radial model potentials ``V(r) = c * profile(r)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

PROFILE_KINDS = ("gaussian", "exponential", "compact-bump", "power")
DECAY_GRID_MAX = 60.0
_HYPOTHESIS_BETA = 6.0


@dataclass(frozen=True)
class RadialPotential:
    """Radial potential profile with a coupling constant.

    ``profile(r) = scale**-2 * base(r / scale)`` where ``base`` is one of

    * ``gaussian``: ``exp(-r^2)``
    * ``exponential``: ``exp(-r)``
    * ``compact-bump``: ``exp(1 - 1/(1 - (r/support)^2))`` for ``r < support``
    * ``power``: ``<r>^-decay`` (diagnostic only)

    The ``scale`` family leaves the zero-energy coupling invariant.
    """

    kind: str = "gaussian"
    coupling: float = -1.0
    scale: float = 1.0
    support: float = 3.0
    decay: float = 4.0
    params: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.kind == "compact-bump" and not self.support > 0:
            raise ValueError("support radius must be positive")

    @property
    def nominal_decay(self) -> float:
        return self.decay if self.kind == "power" else math.inf

    def with_coupling(self, c: float) -> "RadialPotential":
        return replace(self, coupling=float(c))

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        s = r / self.scale
        if self.kind == "gaussian":
            base = np.exp(-s * s)
        elif self.kind == "exponential":
            base = np.exp(-s)
        elif self.kind == "compact-bump":
            q = s / self.support
            base = np.zeros_like(s)
            inside = q < 1.0
            base[inside] = np.exp(1.0 - 1.0 / (1.0 - q[inside] ** 2))
        else:
            base = (1.0 + s * s) ** (-0.5 * self.decay)
        return base / self.scale ** 2

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "coupling": self.coupling,
            "scale": self.scale,
            "support": self.support,
            "decay": self.decay,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RadialPotential":
        allowed = {"kind", "coupling", "scale", "support", "decay"}
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown potential fields: {sorted(unknown)}")
        return cls(**d)


def evaluate_potential(p: RadialPotential, r):
    """``V(r) = c * profile(r)`` for ``r >= 0``."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise ValueError("evaluate_potential: r must be nonnegative")
    val = p.coupling * p.profile(arr)
    return float(val) if np.ndim(r) == 0 else val


class DecayMargin(NamedTuple):
    beta: float
    ok: bool


def decay_margin(p: RadialPotential, r_tail: float = 10.0, r_max: float = 100.0,
                 n: int = 2001) -> DecayMargin:
    """Effective polynomial decay exponent of ``V`` on the tail ``[r_tail, r_max]``.

    Taken as the smallest local slope ``-d log|V| / d log<r>`` over the tail,
    capped at ``DECAY_GRID_MAX``; a profile that vanishes identically on the
    tail gets the cap. ``ok`` is False when the exponent does not exceed 6.
    """
    r = np.linspace(r_tail, r_max, n)
    v = np.abs(p.coupling * p.profile(r))
    jap = np.log(np.sqrt(1.0 + r * r))
    with np.errstate(divide="ignore"):
        logv = np.log(v)
    finite = np.isfinite(logv)
    if finite.sum() < 2:
        beta = DECAY_GRID_MAX
    else:
        # once |V| underflows the profile is effectively compactly supported
        last = np.flatnonzero(finite)
        seg = slice(last[0], last[-1] + 1)
        slopes = -np.diff(logv[seg]) / np.diff(jap[seg])
        beta = float(min(np.min(slopes), DECAY_GRID_MAX)) if slopes.size else DECAY_GRID_MAX
        if last[-1] < n - 1:
            beta = DECAY_GRID_MAX
    return DecayMargin(beta, beta > _HYPOTHESIS_BETA)
