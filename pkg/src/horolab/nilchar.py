"""Heisenberg nilcharacter, orbit embedding, and degree-dropping differences.

The sampling function on the Heisenberg quotient is

    F(x, y, z) = e(y - x * floor(z)),      e(t) = exp(2 pi i t),

which is invariant under right multiplication by integer points: the phase
picks up b - a*floor(z) - a*c, an integer.  Pulled back along the orbit
t -> exp(sqrt(a) t (E12 + E23)) through the identity it equals the
conjugate of e(a t^2/2 - {sqrt(a) t} sqrt(a) t), a bracket-quadratic
sequence whose phase derivative stays bounded by sqrt(a).

Differencing value(t+k) * conj(value(t)) drops the degree by one: a pure
quadratic phase becomes affine after one difference and constant after two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .group_core import elementary, nil_exp
from .homspace import HeisenbergPoint, reduce_heisenberg

__all__ = [
    "e2pi",
    "heis_char_eval",
    "NilCharacter",
    "SampledSequence",
    "orbit_point",
    "orbit_character",
    "bracket_closed_form",
    "differentiate_sequence",
    "degree_probe",
    "sequence_to_csv_rows",
]


def e2pi(t):
    return np.exp(2j * math.pi * np.asarray(t, dtype=float))


def heis_char_eval(p: HeisenbergPoint) -> complex:
    """Unimodular character value e(y - x*floor(z)); reduction is optional."""
    return complex(e2pi(p.y - p.x * math.floor(p.z)))


def orbit_point(alpha: float, t: float, y0: Optional[HeisenbergPoint] = None) -> HeisenbergPoint:
    """Point exp(sqrt(alpha) t (E12+E23)) . y0 of the embedded line orbit."""
    s = math.sqrt(alpha) * t
    flow = nil_exp(s * (elementary(3, 0, 1) + elementary(3, 1, 2)))
    base = np.eye(3) if y0 is None else y0.matrix
    return HeisenbergPoint.from_matrix(flow @ base)


def _orbit_coords(alpha: float, t: np.ndarray, y0: Optional[HeisenbergPoint]):
    s = math.sqrt(alpha) * t
    if y0 is None:
        x0 = y0y = z0 = 0.0
    else:
        x0, y0y, z0 = y0.x, y0.y, y0.z
    x = s + x0
    y = y0y + s * z0 + 0.5 * s * s
    z = z0 + s
    return x, y, z


def _char_values(x, y, z):
    return np.exp(2j * math.pi * (y - x * np.floor(z)))


@dataclass(frozen=True)
class NilCharacter:
    """Character data: a degree, a frequency, and an orbit evaluation rule.

    kind "bracket" is the genuine Heisenberg character above (degree 3 as a
    sequence on the 3-dimensional nilmanifold); "quadratic" is the pure
    phase e(alpha t^2 / 2) obtained from the product construction;
    "linear" is e(alpha t); "trivial" is constantly one.
    """

    kind: str
    alpha: float = 1.0
    y0: Optional[HeisenbergPoint] = None

    _DEGREES = {"trivial": 0, "linear": 1, "quadratic": 2, "bracket": 3}

    def __post_init__(self):
        if self.kind not in self._DEGREES:
            raise ValueError(f"unknown character kind {self.kind!r}")
        if self.kind != "trivial" and self.alpha <= 0:
            raise ValueError("frequency must be positive")

    @property
    def degree(self) -> int:
        return self._DEGREES[self.kind]

    def orbit_values(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "trivial":
            return np.ones(t.shape, dtype=complex)
        if self.kind == "linear":
            return e2pi(self.alpha * t)
        if self.kind == "quadratic":
            return e2pi(0.5 * self.alpha * t * t)
        x, y, z = _orbit_coords(self.alpha, t, self.y0)
        return _char_values(x, y, z)

    def eval_point(self, p: HeisenbergPoint) -> complex:
        if self.kind != "bracket":
            raise ValueError("only the bracket character lives on the quotient")
        return heis_char_eval(p)


def bracket_closed_form(alpha: float, t) -> np.ndarray:
    """conj(e(alpha t^2/2 - {sqrt(alpha) t} sqrt(alpha) t)); equals the orbit values at y0 = e."""
    t = np.asarray(t, dtype=float)
    s = math.sqrt(alpha) * t
    return np.conj(e2pi(0.5 * alpha * t * t - (s - np.floor(s)) * s))


@dataclass
class SampledSequence:
    """Samples of a unimodular sequence along a grid, with its generating rule."""

    t_grid: np.ndarray
    values: np.ndarray
    y0: Optional[HeisenbergPoint] = None
    evaluator: Optional[Callable] = None

    def resample(self, t) -> np.ndarray:
        if self.evaluator is None:
            raise ValueError("sequence carries no evaluation rule; cannot shift off-grid")
        return self.evaluator(np.asarray(t, dtype=float))


def orbit_character(alpha: float, t_grid, y0: Optional[HeisenbergPoint] = None) -> SampledSequence:
    """Character samples along the embedded orbit through y0."""
    char = NilCharacter(kind="bracket", alpha=alpha, y0=y0)
    t_grid = np.asarray(t_grid, dtype=float)
    return SampledSequence(
        t_grid=t_grid,
        values=char.orbit_values(t_grid),
        y0=y0,
        evaluator=char.orbit_values,
    )


def character_sequence(char: NilCharacter, t_grid) -> SampledSequence:
    t_grid = np.asarray(t_grid, dtype=float)
    return SampledSequence(
        t_grid=t_grid, values=char.orbit_values(t_grid), y0=char.y0, evaluator=char.orbit_values
    )


def differentiate_sequence(s: SampledSequence, k: float) -> SampledSequence:
    """Pointwise value(t+k) * conj(value(t)) on the same grid."""
    shifted = s.resample(s.t_grid + k)
    vals = shifted * np.conj(s.values)
    ev = s.evaluator

    def new_eval(t, _ev=ev, _k=k):
        return _ev(t + _k) * np.conj(_ev(t))

    return SampledSequence(t_grid=s.t_grid, values=vals, y0=s.y0, evaluator=new_eval)


def _affine_phase_residual(t: np.ndarray, values: np.ndarray) -> float:
    """Max deviation (radians) of the unwrapped phase from its best affine fit."""
    phase = np.unwrap(np.angle(values))
    coeffs = np.polynomial.polynomial.polyfit(t, phase, 1)
    fit = np.polynomial.polynomial.polyval(t, coeffs)
    return float(np.max(np.abs(phase - fit)))


def degree_probe(s: SampledSequence, max_order: int, seed: int = 0) -> dict:
    """Iterated differencing with seeded random shifts.

    Reports the grid-mean magnitude after each order and the best-affine
    phase residual of the final stage.  For bracket characters the residual
    is informational (the floor function introduces phase jumps).
    """
    if max_order > 3:
        raise ValueError("max_order must be at most 3")
    rng = np.random.default_rng(seed)
    shifts = list(rng.uniform(0.5, 2.0, max_order))
    mean_magnitudes = [float(np.abs(np.mean(s.values)))]
    current = s
    for k in shifts:
        current = differentiate_sequence(current, float(k))
        mean_magnitudes.append(float(np.abs(np.mean(current.values))))
    return {
        "shifts": [float(k) for k in shifts],
        "mean_magnitudes": mean_magnitudes,
        "final_affine_residual": _affine_phase_residual(current.t_grid, current.values),
    }


def sequence_to_csv_rows(s: SampledSequence):
    for t, v in zip(s.t_grid, s.values):
        yield (float(t), float(v.real), float(v.imag))
