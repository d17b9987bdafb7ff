"""Points and test functions on X = SL2(R)/SL2(Z) and Y = N(R)/N(Z).

A coset g.SL2(Z) is pinned down by the hyperbolic coordinate z = g^{-1}.i,
which transforms under a change of representative g -> g.gamma by the
classical integer Moebius action on z.  Reduction therefore runs the
standard translate/invert algorithm on z while tracking the right
multiplier gamma exactly in integer arithmetic.  Any function of the
reduced coordinates built from full coset sums (incomplete Eisenstein
series, optionally twisted by an angular character) is then literally
invariant under the lattice, which is the assertable form of "function on
the quotient".

The Heisenberg quotient is handled in exponential coordinates with the
row-vector multiplication law (x,y,z).(a,b,c) = (x+a, y+b+xc, z+c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "ModularPoint",
    "ReductionError",
    "reduce_modular",
    "flow_point",
    "TestFunction",
    "haar_sample_modular",
    "inj_rad_lower_bound",
    "dist_modular",
    "HeisenbergPoint",
    "reduce_heisenberg",
    "nak_matrix",
    "point_to_json",
    "Y_MIN_FUNDAMENTAL",
]

Y_MIN_FUNDAMENTAL = math.sqrt(3.0) / 2.0

# Every non-identity coset of a point reduced into the fundamental domain
# has imaginary part at most 1/y <= 2/sqrt(3); profiles supported above
# this height are evaluated exactly by a single coset term.
SINGLE_COSET_FLOOR = 2.0 / math.sqrt(3.0)

_FLIP_TOL = 1e-14


class ReductionError(RuntimeError):
    """Reduction did not terminate within the iteration cap."""


def _mobius(m, z):
    return (m[0][0] * z + m[0][1]) / (m[1][0] * z + m[1][1])


def _inv2(g: np.ndarray) -> np.ndarray:
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    return np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]]) / det


def _reduce_scalar(z: complex, max_iter: int = 10_000):
    """Bring z into the fundamental domain, returning the integer left word."""
    a, b, c, d = 1, 0, 0, 1  # tracked matrix M with z_current = M . z_input
    for _ in range(max_iter):
        n = round(z.real)
        if n != 0:
            z = z - n
            a, b = a - n * c, b - n * d
        if abs(z) < 1.0 - _FLIP_TOL:
            z = -1.0 / z
            a, b, c, d = -c, -d, a, b
        else:
            return z, (a, b, c, d)
    raise ReductionError("fundamental-domain reduction exceeded iteration cap")


def reduce_z_theta_many(z: np.ndarray, theta=None, max_iter: int = 10_000):
    """Vectorized reduction of hyperbolic coordinates with angle tracking.

    The angle transforms by the cocycle theta -> theta + arg(z) at each
    inversion step and is untouched by integer translations.
    """
    z = np.array(z, dtype=complex)
    theta = None if theta is None else np.array(theta, dtype=float)
    n = np.round(z.real)
    z -= n
    idx = np.nonzero(np.abs(z) < 1.0 - _FLIP_TOL)[0]
    iteration = 0
    while idx.size:
        iteration += 1
        if iteration > max_iter:
            raise ReductionError("vectorized reduction exceeded iteration cap")
        zs = z[idx]
        if theta is not None:
            theta[idx] += np.angle(zs)
        zs = -1.0 / zs
        zs -= np.round(zs.real)
        z[idx] = zs
        idx = idx[np.abs(zs) < 1.0 - _FLIP_TOL]
    return z, theta


@dataclass(frozen=True)
class ModularPoint:
    """A point of SL2(R)/SL2(Z) with cached reduced data.

    reduced_rep = rep . gamma for the returned integer gamma, and the
    coordinate z = reduced_rep^{-1}.i lies in the standard fundamental
    domain |Re z| <= 1/2, |z| >= 1.
    """

    rep: np.ndarray
    reduced_rep: np.ndarray
    gamma: tuple
    z: complex
    theta: float

    @classmethod
    def from_matrix(cls, g) -> "ModularPoint":
        point, _ = reduce_modular(g)
        return point

    @property
    def iwasawa(self) -> tuple:
        return (self.z.real, self.z.imag, self.theta)

    def gamma_matrix(self) -> np.ndarray:
        return np.array(self.gamma, dtype=float)


def reduce_modular(g) -> tuple:
    """Fundamental-domain reduction of a det-1 matrix; returns (point, gamma)."""
    g = np.asarray(g, dtype=float)
    det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    if abs(det - 1.0) > 1e-9:
        raise ValueError(f"matrix must have determinant 1, got {det!r}")
    ginv = _inv2(g)
    z0 = _mobius(ginv, 1j)
    _, (ma, mb, mc, md) = _reduce_scalar(z0)
    # gamma = M^{-1}: reduced_rep^{-1} . i = M . z0.
    gamma = ((md, -mb), (-mc, ma))
    gmat = np.array(gamma, dtype=float)
    reduced = g @ gmat
    rinv = _inv2(reduced)
    z = _mobius(rinv, 1j)
    theta = math.atan2(rinv[1, 0], rinv[1, 1])
    if not (abs(z.real) <= 0.5 + 1e-9 and abs(z) >= 1.0 - 1e-9):
        raise ReductionError(f"reduced coordinate {z!r} escaped the fundamental domain")
    point = ModularPoint(rep=g, reduced_rep=reduced, gamma=gamma, z=z, theta=theta)
    return point, gamma


def flow_point(x: ModularPoint, h) -> ModularPoint:
    """Left translate the point by a det-1 matrix and re-reduce."""
    h = np.asarray(h, dtype=float)
    return ModularPoint.from_matrix(h @ x.rep)


def nak_matrix(x: float, y: float, theta: float) -> np.ndarray:
    """n_x a_y k_theta with k_theta = [[cos, -sin], [sin, cos]]."""
    if y <= 0:
        raise ValueError("y must be positive")
    n = np.array([[1.0, x], [0.0, 1.0]])
    a = np.array([[math.sqrt(y), 0.0], [0.0, 1.0 / math.sqrt(y)]])
    k = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    return n @ a @ k


def point_to_json(x: ModularPoint) -> dict:
    return {
        "rep": [[float(v) for v in row] for row in x.rep],
        "reduced": [[float(v) for v in row] for row in x.reduced_rep],
        "gamma": [[int(v) for v in row] for row in x.gamma],
        "z": [x.z.real, x.z.imag],
        "theta": x.theta,
    }


# ---------------------------------------------------------------------------
# Test functions: incomplete Eisenstein series with optional angular twist.
# ---------------------------------------------------------------------------


def _simpson(ys: np.ndarray, h: float) -> float:
    return h / 3.0 * (ys[0] + ys[-1] + 4.0 * ys[1:-1:2].sum() + 2.0 * ys[2:-1:2].sum())


@dataclass
class TestFunction:
    """Mean-subtracted incomplete Eisenstein function, optionally twisted.

    The profile is the smooth bump amp * exp(1 - 1/(1-u^2)) on (y_low,
    y_high), whose maximum is exactly amp at the midpoint.  The function on
    the quotient is the coset sum of h(Im(gz)) times the angular factor
    e^{i n (theta + arg(cz+d))}.  y_low must stay above 2/sqrt(3) so that at
    reduced coordinates the sum collapses to a single term, which makes the
    sup norm exact and the grid evaluation cheap.

    fourier_index must be even: odd angular indices cancel identically in
    the coset sum because -I belongs to the lattice.
    """

    y_low: float
    y_high: float
    amplitude: float = 1.0
    fourier_index: int = 0
    subtract_mean: bool = True
    kind: str = field(init=False)
    mean_offset: float = field(init=False)
    sup_norm: float = field(init=False)

    def __post_init__(self):
        if not (SINGLE_COSET_FLOOR <= self.y_low < self.y_high <= 1e3):
            raise ValueError(
                f"profile support must satisfy {SINGLE_COSET_FLOOR:.4f} <= y_low < y_high <= 1e3"
            )
        if self.fourier_index % 2 != 0:
            raise ValueError("fourier_index must be even")
        self.kind = "incomplete_eisenstein" if self.fourier_index == 0 else "angular_twist"
        if self.fourier_index == 0 and self.subtract_mean:
            ys = np.linspace(self.y_low, self.y_high, 4097)
            vals = self.profile(ys) / ys**2
            integral = _simpson(vals, ys[1] - ys[0])
            self.mean_offset = 3.0 / math.pi * integral
        else:
            self.mean_offset = 0.0
        if self.fourier_index == 0:
            self.sup_norm = max(self.amplitude - self.mean_offset, self.mean_offset)
        else:
            self.sup_norm = self.amplitude

    def profile(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        u = (2.0 * y - (self.y_low + self.y_high)) / (self.y_high - self.y_low)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1.0
        ui = u[inside]
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - ui * ui))
        return out

    # -- exact coset-sum evaluation (works at arbitrary, unreduced z) ------

    def value_at_coords(self, z: complex, theta: float = 0.0) -> complex:
        """Full truncated coset sum at hyperbolic coordinates (z, theta).

        Only cosets with Im(gz) >= y_low can contribute; they satisfy
        |cz+d|^2 <= y/y_low, so c^2 <= 1/(y*y_low) and d runs over a short
        window, which makes the truncation exact rather than approximate.
        """
        y = z.imag
        if y <= 0:
            raise ValueError("evaluation point must be in the upper half plane")
        n = self.fourier_index
        total = complex(self.profile(y)) * np.exp(1j * n * theta)
        c_max = int(math.floor(math.sqrt(1.0 / (y * self.y_low))))
        for c in range(1, c_max + 1):
            disc = y / self.y_low - (c * y) ** 2
            if disc < 0:
                continue
            w = math.sqrt(disc)
            d_lo = math.ceil(-c * z.real - w)
            d_hi = math.floor(-c * z.real + w)
            for d in range(d_lo, d_hi + 1):
                if math.gcd(c, abs(d)) != 1:
                    continue
                j = c * z + d
                y_new = y / abs(j) ** 2
                total += complex(self.profile(y_new)) * np.exp(1j * n * (theta + np.angle(j)))
        value = total - self.mean_offset
        return value.real if n == 0 else value

    def value_at_raw(self, rep) -> complex:
        """Evaluate at an arbitrary representative without reduction."""
        rep = np.asarray(rep, dtype=float)
        m = _inv2(rep)
        z = _mobius(m, 1j)
        theta = math.atan2(m[1, 0], m[1, 1])
        return self.value_at_coords(z, theta)

    def value(self, x: ModularPoint) -> complex:
        return self.value_at_coords(x.z, x.theta)

    # -- fast single-term paths for bulk evaluation ------------------------

    def _value_from_reduced(self, z_red: np.ndarray, theta_red) -> np.ndarray:
        vals = self.profile(z_red.imag)
        if self.fourier_index == 0:
            return vals - self.mean_offset
        return vals * np.exp(1j * self.fourier_index * theta_red) - self.mean_offset

    def value_at_orbit(self, x: ModularPoint, t: np.ndarray) -> np.ndarray:
        """f(u_t . x) on an array of times along the horocycle orbit."""
        t = np.asarray(t, dtype=float)
        m = _inv2(x.reduced_rep)
        w = 1j - t
        den = m[1, 0] * w + m[1, 1]
        z0 = (m[0, 0] * w + m[0, 1]) / den
        theta0 = np.angle(den) if self.fourier_index != 0 else None
        z, theta = reduce_z_theta_many(z0, theta0)
        return self._value_from_reduced(z, theta)

    def value_at_matrices(self, reps: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at an (n, 2, 2) stack of representatives."""
        reps = np.asarray(reps, dtype=float)
        det = reps[:, 0, 0] * reps[:, 1, 1] - reps[:, 0, 1] * reps[:, 1, 0]
        a = reps[:, 1, 1] / det
        b = -reps[:, 0, 1] / det
        c = -reps[:, 1, 0] / det
        d = reps[:, 0, 0] / det
        den = c * 1j + d
        z0 = (a * 1j + b) / den
        theta0 = np.angle(den) if self.fourier_index != 0 else None
        z, theta = reduce_z_theta_many(z0, theta0)
        return self._value_from_reduced(z, theta)


def eval_test_function(f: TestFunction, x: ModularPoint):
    """Coset-sum value of the test function at a point of the quotient."""
    return f.value(x)


# ---------------------------------------------------------------------------
# Haar sampling and injectivity radius.
# ---------------------------------------------------------------------------

HAAR_Y_MAX = 1e4
# Probability mass of the cusp region removed by the y-truncation.
HAAR_TRUNCATED_MASS = 3.0 / (math.pi * HAAR_Y_MAX)


def _haar_arrays(n: int, seed: int, y_max: float = HAAR_Y_MAX):
    """Rejection-sample (x, y, theta) under dx dy / y^2 on the fundamental domain."""
    rng = np.random.default_rng(seed)
    y_min = Y_MIN_FUNDAMENTAL
    xs = np.empty(n)
    ys = np.empty(n)
    filled = 0
    while filled < n:
        m = max(1024, 2 * (n - filled))
        x = rng.uniform(-0.5, 0.5, m)
        u = rng.uniform(0.0, 1.0, m)
        y = 1.0 / (1.0 / y_min - u * (1.0 / y_min - 1.0 / y_max))
        keep = x * x + y * y >= 1.0
        x, y = x[keep], y[keep]
        take = min(n - filled, x.size)
        xs[filled : filled + take] = x[:take]
        ys[filled : filled + take] = y[:take]
        filled += take
    thetas = rng.uniform(0.0, 2.0 * math.pi, n)
    sy = np.sqrt(ys)
    # rep = (n_x a_y k_theta)^{-1}, so the point's coordinates are (x, y, theta).
    m = np.empty((n, 2, 2))
    cos, sin = np.cos(thetas), np.sin(thetas)
    m[:, 0, 0] = sy * cos + (xs / sy) * sin
    m[:, 0, 1] = -sy * sin + (xs / sy) * cos
    m[:, 1, 0] = sin / sy
    m[:, 1, 1] = cos / sy
    # invert (det = 1): rep = adjugate.
    reps = np.empty_like(m)
    reps[:, 0, 0] = m[:, 1, 1]
    reps[:, 0, 1] = -m[:, 0, 1]
    reps[:, 1, 0] = -m[:, 1, 0]
    reps[:, 1, 1] = m[:, 0, 0]
    return reps, xs, ys, thetas


def haar_sample_modular(n: int, seed: int):
    """n seed-deterministic Haar points (cusp truncated at y = 1e4)."""
    if n < 1:
        raise ValueError("need n >= 1")
    reps, _, _, _ = _haar_arrays(n, seed)
    return [ModularPoint.from_matrix(reps[i]) for i in range(n)]


INJ_RAD_COEFF = 0.5  # frozen per group instance (SL2 arithmetic quotient)


def inj_rad_lower_bound(x: ModularPoint, eps: float, k: int = 2, coeff: float = INJ_RAD_COEFF) -> float:
    """Lower bound coeff * eps**k for the injectivity radius on X^1_{>= eps}."""
    from . import diophantine

    if not (0 < eps <= 1):
        raise ValueError("eps must lie in (0, 1]")
    if not diophantine.in_x1_geq(x.reduced_rep, eps):
        raise ValueError("point is outside X^1_{>= eps}; bound does not apply")
    return coeff * eps**k


@lru_cache(maxsize=None)
def _integer_ball(radius: int):
    mats = []
    rng = range(-radius, radius + 1)
    for a in rng:
        for b in rng:
            for c in rng:
                for d in rng:
                    if a * d - b * c == 1:
                        mats.append(np.array([[a, b], [c, d]], dtype=float))
    return tuple(mats)


def dist_modular(x: ModularPoint, y: ModularPoint, radius: int = 5) -> float:
    """Heuristic quotient distance: min Frobenius gap over a small integer ball.

    Adequate when the gap is far below the injectivity radius.
    """
    gx, gy = x.reduced_rep, y.reduced_rep
    best = math.inf
    for gamma in _integer_ball(radius):
        best = min(best, float(np.linalg.norm(gx @ gamma - gy)))
    return best


# ---------------------------------------------------------------------------
# Heisenberg quotient.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HeisenbergPoint:
    """Coordinates (x, y, z) for [[1,x,y],[0,1,z],[0,0,1]] modulo N(Z) on the right."""

    x: float
    y: float
    z: float

    @classmethod
    def from_matrix(cls, m) -> "HeisenbergPoint":
        m = np.asarray(m, dtype=float)
        return cls(x=float(m[0, 1]), y=float(m[0, 2]), z=float(m[1, 2]))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[1.0, self.x, self.y], [0.0, 1.0, self.z], [0.0, 0.0, 1.0]])

    def is_canonical(self) -> bool:
        return all(0.0 <= v < 1.0 for v in (self.x, self.y, self.z))


def heis_matrix(a: float, b: float, c: float) -> np.ndarray:
    return np.array([[1.0, a, b], [0.0, 1.0, c], [0.0, 0.0, 1.0]])


def reduce_heisenberg(p: HeisenbergPoint) -> tuple:
    """Canonical representative in [0,1)^3 plus the integer right multiplier.

    Right multiplication acts by (x,y,z).(a,b,c) = (x+a, y+b+xc, z+c); the
    result is re-checked against the literal 3x3 matrix product.
    """
    c = -math.floor(p.z)
    a = -math.floor(p.x)
    y_mid = p.y + p.x * c
    b = -math.floor(y_mid)
    canonical = HeisenbergPoint(x=p.x + a, y=y_mid + b, z=p.z + c)
    product = p.matrix @ heis_matrix(a, b, c)
    if np.max(np.abs(product - canonical.matrix)) > 1e-12 * max(1.0, abs(p.y), abs(p.x * c)):
        raise RuntimeError("group-law identity failed in Heisenberg reduction")
    return canonical, (a, b, c)
