"""Exact arithmetic for nilpotent matrix groups and renormalized Folner balls.

Everything lives inside SL_k(R) for k in {2, 3}.  A diagonal one-parameter
flow a_t = diag(e^{w_1 t}, ..., e^{w_k t}) expands a nilpotent subgroup H
whose Lie algebra is spanned by strictly upper triangular eigenvectors of
ad(log a_1) with positive eigenvalues.  The renormalized balls

    B_R = a_{log R} . B_1 . a_{-log R}

with B_1 the exponential of the unit sup-norm ball in the fixed Lie(H)
basis coordinates, form the averaging family used throughout the package.
Their volume obeys vol(B_R) = R**d_H * vol(B_1) with d_H the sum of the
basis eigenvalues (the growth exponent of the family).

All exponentials and logarithms terminate exactly: matrix powers of
strictly upper triangular k x k matrices vanish at order k, so the series
carry no truncation error beyond float rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .quasirand import lowdisc_unit

__all__ = [
    "nil_exp",
    "nil_log",
    "bch",
    "conj_by_flow",
    "compute_dh",
    "split_by_weights",
    "DiagonalFlow",
    "HoroSubgroup",
    "FolnerBall",
    "LieSplitting",
    "folner_volume",
    "folner_sample",
    "folner_membership",
    "folner_boundary_ratio",
    "sl2_horocycle",
    "heisenberg_sl3",
    "e13_line_sl3",
    "elementary",
]

UNIMODULAR_TOL = 1e-10


def elementary(k: int, i: int, j: int, c: float = 1.0) -> np.ndarray:
    """c * E_ij in dimension k (zero-based indices)."""
    m = np.zeros((k, k))
    m[i, j] = c
    return m


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def check_unimodular(g, tol: float = UNIMODULAR_TOL) -> np.ndarray:
    g = _as_square(g)
    det = np.linalg.det(g)
    if abs(det - 1.0) > tol:
        raise ValueError(f"matrix is not unimodular: det={det!r}")
    return g


def _check_strictly_upper(x) -> np.ndarray:
    x = _as_square(x)
    k = x.shape[0]
    if np.any(x[np.tril_indices(k)] != 0.0):
        raise ValueError("matrix is not strictly upper triangular")
    return x


def nil_exp(x) -> np.ndarray:
    """Terminating exponential I + X + X^2/2! + ... + X^{k-1}/(k-1)!."""
    x = _check_strictly_upper(x)
    k = x.shape[0]
    out = np.eye(k)
    term = np.eye(k)
    for j in range(1, k):
        term = term @ x / j
        out = out + term
    return out


def nil_log(g, tol: float = 1e-9) -> np.ndarray:
    """Terminating Mercator series of g - I; rejects non-unipotent input."""
    g = _as_square(g)
    k = g.shape[0]
    if np.max(np.abs(np.diag(g) - 1.0)) > tol:
        raise ValueError("matrix is not unipotent (diagonal != 1)")
    low = np.tril_indices(k, -1)
    if np.max(np.abs(g[low]), initial=0.0) > tol:
        raise ValueError("matrix is not upper triangular")
    n = g - np.eye(k)
    n[low] = 0.0
    n[np.diag_indices(k)] = 0.0
    out = np.zeros((k, k))
    power = np.eye(k)
    for j in range(1, k):
        power = power @ n
        out = out + ((-1.0) ** (j + 1) / j) * power
    return out


def bch(x, y) -> np.ndarray:
    """log(exp(X) exp(Y)); exact because both series terminate."""
    x = _check_strictly_upper(x)
    y = _check_strictly_upper(y)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch in bch")
    return nil_log(nil_exp(x) @ nil_exp(y))


@dataclass(frozen=True)
class DiagonalFlow:
    """a_t = diag(e^{w_1 t}, ..., e^{w_k t}) with weights summing to zero."""

    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", w)
        if abs(sum(w)) > 1e-12:
            raise ValueError(f"flow weights must sum to 0, got {sum(w)!r}")

    @property
    def dim(self) -> int:
        return len(self.weights)

    def matrix(self, t: float) -> np.ndarray:
        return np.diag(np.exp(np.asarray(self.weights) * t))

    def log_matrix(self) -> np.ndarray:
        return np.diag(self.weights)

    def weight_of(self, i: int, j: int) -> float:
        return self.weights[i] - self.weights[j]


def conj_by_flow(flow: DiagonalFlow, t: float, h) -> np.ndarray:
    """a_t h a_{-t}: entry (i,j) is scaled by e^{(w_i - w_j) t}."""
    h = _as_square(h)
    w = np.asarray(flow.weights)
    scale = np.exp(np.subtract.outer(w, w) * t)
    return scale * h


@dataclass(frozen=True)
class LieSplitting:
    """Decomposition of a matrix into contracted / fixed / expanded parts."""

    minus: np.ndarray
    zero: np.ndarray
    plus: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.minus + self.zero + self.plus


def split_by_weights(flow: DiagonalFlow, x) -> LieSplitting:
    """Route entry (i,j) by the sign of w_i - w_j; exact reconstruction."""
    x = _as_square(x)
    w = np.asarray(flow.weights)
    d = np.subtract.outer(w, w)
    minus = np.where(d < -1e-14, x, 0.0)
    zero = np.where(np.abs(d) <= 1e-14, x, 0.0)
    plus = np.where(d > 1e-14, x, 0.0)
    return LieSplitting(minus=minus, zero=zero, plus=plus)


def _ad_eigenvalue(flow: DiagonalFlow, x: np.ndarray) -> float:
    """Eigenvalue of ad(log a_1) on x; raises if x is not an eigenvector."""
    idx = np.argwhere(np.abs(x) > 0.0)
    if idx.size == 0:
        raise ValueError("zero basis element")
    lams = {flow.weight_of(i, j) for i, j in idx}
    lam = lams.pop()
    if any(abs(other - lam) > 1e-12 for other in lams):
        raise ValueError("basis element mixes distinct ad-eigenvalues")
    return lam


@dataclass(frozen=True)
class HoroSubgroup:
    """Expanded horospherical subgroup: flow plus a Lie(H) eigenbasis.

    Each basis element must be an eigenvector of ad(log a_1) with strictly
    positive eigenvalue; d_H is the sum of those eigenvalues and equals the
    trace of ad(log a_1) restricted to Lie(H).
    """

    flow: DiagonalFlow
    basis: tuple
    eigenvalues: tuple = field(init=False)
    d_h: float = field(init=False)

    def __post_init__(self):
        basis = tuple(np.array(b, dtype=float) for b in self.basis)
        for b in basis:
            _check_strictly_upper(b)
        object.__setattr__(self, "basis", basis)
        lams = tuple(_ad_eigenvalue(self.flow, b) for b in basis)
        if any(l <= 0 for l in lams):
            raise ValueError("basis contains a non-expanded direction")
        object.__setattr__(self, "eigenvalues", lams)
        d_h = float(sum(lams))
        tr = self._ad_trace(basis)
        if abs(tr - d_h) > 1e-12:
            raise ValueError(f"d_H mismatch: sum={d_h!r} trace={tr!r}")
        object.__setattr__(self, "d_h", d_h)

    def _ad_trace(self, basis) -> float:
        w = self.flow.log_matrix()
        bmat = np.stack([b.ravel() for b in basis], axis=1)
        pinv = np.linalg.pinv(bmat)
        tr = 0.0
        for i, b in enumerate(basis):
            ad_b = w @ b - b @ w
            coeffs = pinv @ ad_b.ravel()
            tr += coeffs[i]
        return float(tr)

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def ambient_dim(self) -> int:
        return self.flow.dim

    def _basis_pinv(self) -> np.ndarray:
        return np.linalg.pinv(np.stack([b.ravel() for b in self.basis], axis=1))

    def coordinates(self, x, tol: float = 1e-9):
        """Coordinates of a Lie algebra element in the basis, or None if outside."""
        x = np.asarray(x, dtype=float)
        coeffs = self._basis_pinv() @ x.ravel()
        recon = sum(c * b for c, b in zip(coeffs, self.basis))
        scale = max(1.0, float(np.max(np.abs(x))))
        if np.max(np.abs(recon - x)) > tol * scale:
            return None
        return coeffs

    def element(self, coords) -> np.ndarray:
        x = sum(float(c) * b for c, b in zip(coords, self.basis))
        return nil_exp(x)


def compute_dh(subgroup: HoroSubgroup) -> float:
    """Volume-growth exponent: sum of the ad-eigenvalues of the basis."""
    return subgroup.d_h


@dataclass(frozen=True)
class FolnerBall:
    """B_R = a_{log R} B_1 a_{-log R} with B_1 = exp(unit sup-ball in Lie(H))."""

    subgroup: HoroSubgroup
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("Folner ball radius must be positive")

    @property
    def halfwidths(self) -> np.ndarray:
        """Per-coordinate box half-widths R**lambda_b in Lie coordinates."""
        lams = np.asarray(self.subgroup.eigenvalues)
        return self.radius ** lams


def folner_volume(ball: FolnerBall) -> float:
    """R**d_H * 2**dim(H); Haar is Lebesgue in exponential coordinates."""
    return float(ball.radius ** ball.subgroup.d_h * 2.0 ** ball.subgroup.dim)


def _exp_batch(x: np.ndarray) -> np.ndarray:
    k = x.shape[-1]
    out = np.broadcast_to(np.eye(k), x.shape).copy()
    out += x
    if k >= 3:
        out += 0.5 * np.einsum("...ij,...jk->...ik", x, x)
    return out


def _log_batch(m: np.ndarray) -> np.ndarray:
    k = m.shape[-1]
    n = m - np.eye(k)
    out = n.copy()
    if k >= 3:
        out -= 0.5 * np.einsum("...ij,...jk->...ik", n, n)
    return out


def folner_sample(ball: FolnerBall, n: int, seed: int, start_index: int = 0) -> np.ndarray:
    """n quasi-uniform elements of B_R, stacked as an (n, k, k) array.

    Points are drawn from a seed-deterministic low-discrepancy stream in the
    Lie-coordinate box and exponentiated; sharding by index range reproduces
    the same elements.
    """
    if n < 1:
        raise ValueError("need n >= 1 samples")
    sub = ball.subgroup
    u = lowdisc_unit(sub.dim, n, seed, start_index)
    coords = (2.0 * u - 1.0) * ball.halfwidths[None, :]
    x = np.einsum("nb,bij->nij", coords, np.stack(sub.basis))
    return _exp_batch(x)


def folner_membership(ball: FolnerBall, h, tol: float = 1e-10) -> bool:
    """Whether a_{-log R} h a_{log R} lies in B_1."""
    return bool(folner_membership_many(ball, np.asarray(h, dtype=float)[None], tol)[0])


def folner_membership_many(ball: FolnerBall, hs: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Vectorized membership test for an (n, k, k) stack of group elements."""
    sub = ball.subgroup
    k = sub.ambient_dim
    hs = np.asarray(hs, dtype=float)
    w = np.asarray(sub.flow.weights)
    t = math.log(ball.radius)
    scale = np.exp(np.subtract.outer(w, w) * (-t))
    down = scale[None] * hs

    ok = np.max(np.abs(down.reshape(len(hs), -1)[:, :: k + 1] - 1.0), axis=1) <= 1e-9
    low = np.tril_indices(k, -1)
    ok &= np.max(np.abs(down[:, low[0], low[1]]), axis=1, initial=0.0) <= 1e-9

    x = _log_batch(down)
    bmat = np.stack([b.ravel() for b in sub.basis], axis=1)
    pinv = np.linalg.pinv(bmat)
    coeffs = x.reshape(len(hs), -1) @ pinv.T
    recon = coeffs @ bmat.T
    resid = np.max(np.abs(recon - x.reshape(len(hs), -1)), axis=1)
    ok &= resid <= 1e-9 * np.maximum(1.0, np.max(np.abs(x.reshape(len(hs), -1)), axis=1))
    ok &= np.max(np.abs(coeffs), axis=1) <= 1.0 + tol
    return ok


def folner_boundary_ratio(ball: FolnerBall, b, n_samples: int = 100_000, seed: int = 0) -> float:
    """Monte Carlo estimate of vol(b.B_R symm-diff B_R) / vol(B_R).

    Requires b in H (log(b) in the span of the basis).  Uses the identity
    vol(bB \\ B) = vol(B \\ bB), so the ratio is twice the escaping fraction.
    """
    b = _as_square(b)
    xb = nil_log(b)
    if ball.subgroup.coordinates(xb) is None:
        raise ValueError("element does not belong to the averaging subgroup")
    hs = folner_sample(ball, n_samples, seed)
    bh = np.einsum("ij,njk->nik", b, hs)
    member = folner_membership_many(ball, bh)
    return 2.0 * float(np.mean(~member))


def sl2_horocycle() -> HoroSubgroup:
    """Upper unipotent subgroup of SL2 with a_t = diag(e^{t/2}, e^{-t/2}).

    Normalized so a_{log R} u_s a_{-log R} = u_{R s}: B_R is u_{[-R, R]}.
    """
    flow = DiagonalFlow((0.5, -0.5))
    return HoroSubgroup(flow=flow, basis=(elementary(2, 0, 1),))


def heisenberg_sl3() -> HoroSubgroup:
    """Full upper unipotent (Heisenberg) subgroup of SL3, a_t = diag(e^t, 1, e^{-t})."""
    flow = DiagonalFlow((1.0, 0.0, -1.0))
    basis = (elementary(3, 0, 1), elementary(3, 1, 2), elementary(3, 0, 2))
    return HoroSubgroup(flow=flow, basis=basis)


def e13_line_sl3() -> HoroSubgroup:
    """One-parameter corner subgroup exp(span E13) of SL3, ad-weight 2."""
    flow = DiagonalFlow((1.0, 0.0, -1.0))
    return HoroSubgroup(flow=flow, basis=(elementary(3, 0, 2),))
