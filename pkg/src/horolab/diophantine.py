"""Shortest-wedge-vector profiles, recurrence certificates, and sublevel probes.

alpha_i(x) is the reciprocal of the shortest sup-norm of the i-th exterior
power of the lattice g.Z^k; for k <= 3 every integer wedge is decomposable,
so brute-force enumeration over integer boxes is an exact oracle.  Minima
are certified by operator-norm pruning: once a candidate value m is in
hand, any better vector v satisfies |v_i| <= ||row_i(M^{-1})||_1 * m, so a
finite box provably contains the minimizer.

The recurrence check searches translated balls for witnesses that the
flowed point re-enters a sublevel-compact part of the space; sampling can
certify a witness, never its absence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .group_core import DiagonalFlow, FolnerBall, HoroSubgroup, folner_sample
from .quasirand import lowdisc_box

__all__ = [
    "UncertifiedAlphaError",
    "AlphaProfile",
    "alpha_i",
    "alpha_profile",
    "in_x_geq",
    "in_x1_geq",
    "ThetaBound",
    "DiophSpec",
    "theta_diophantine_check",
    "remez_check",
    "nondivergence_fraction",
    "norm_form",
    "norm_form_min",
    "subgroup_norm_probe",
    "sqrt2_norm_form_matrix",
]

ENUM_CAP = 20_000_000


class UncertifiedAlphaError(RuntimeError):
    """A sublevel-set membership could not be certified at the needed precision."""


def _min_sup_over_box(m: np.ndarray, bounds) -> tuple:
    """Exact min of ||M v||_inf over nonzero integer v with |v_i| <= bounds[i]."""
    k = m.shape[0]
    axes = [np.arange(-b, b + 1, dtype=float) for b in bounds[1:]]
    if axes:
        grids = np.meshgrid(*axes, indexing="ij")
        rest = np.stack([g.ravel() for g in grids], axis=1)
    else:
        rest = np.zeros((1, 0))
    best = math.inf
    best_v = None
    for v0 in range(-bounds[0], bounds[0] + 1):
        vs = np.empty((rest.shape[0], k))
        vs[:, 0] = v0
        if k > 1:
            vs[:, 1:] = rest
        sup = np.max(np.abs(vs @ m.T), axis=1)
        sup[np.all(vs == 0.0, axis=1)] = math.inf
        i = int(np.argmin(sup))
        if sup[i] < best:
            best = float(sup[i])
            best_v = vs[i].astype(int)
    return best, best_v


def _wedge2_matrix(g: np.ndarray) -> np.ndarray:
    # Second exterior power of a 3x3 matrix under the cross-product basis:
    # (g v1) x (g v2) = det(g) g^{-T} (v1 x v2).
    return np.linalg.det(g) * np.linalg.inv(g).T


def _box_volume(bounds) -> int:
    vol = 1
    for b in bounds:
        vol *= 2 * b + 1
    return vol


def _min_sup_auto(m: np.ndarray) -> tuple:
    """Certified shortest sup-norm via operator-norm pruning; (value, vec, certified)."""
    k = m.shape[0]
    m0, v0 = _min_sup_over_box(m, [2] * k)
    l1_rows = np.sum(np.abs(np.linalg.inv(m)), axis=1)
    bounds = [max(1, int(math.ceil(l1 * m0 * (1.0 + 1e-12)))) for l1 in l1_rows]
    if _box_volume(bounds) > ENUM_CAP:
        return m0, v0, False
    best, best_v = _min_sup_over_box(m, bounds)
    if best < m0:
        return best, best_v, True
    return m0, v0, True


def alpha_i(g, i: int, search_bound: int | None = None) -> tuple:
    """1 / (shortest sup-norm in the i-th exterior power); returns (value, certified)."""
    g = np.asarray(g, dtype=float)
    k = g.shape[0]
    if not 1 <= i <= k:
        raise ValueError(f"wedge index {i} out of range for k={k}")
    if i == k:
        return 1.0 / abs(np.linalg.det(g)), True
    m = g if i == 1 else _wedge2_matrix(g)
    if search_bound is not None:
        if search_bound < 1:
            raise ValueError("search_bound must be >= 1")
        best, _ = _min_sup_over_box(m, [search_bound] * k)
        certified = bool(np.max(np.sum(np.abs(np.linalg.inv(m)), axis=1)) * best < search_bound)
        return 1.0 / best, certified
    best, _, certified = _min_sup_auto(m)
    return 1.0 / best, certified


@dataclass(frozen=True)
class AlphaProfile:
    """alpha_1..alpha_k of a lattice, with the certification status of the search."""

    values: tuple
    certified: bool
    search_bound: int | None = None

    @property
    def alpha(self) -> float:
        return max(self.values)

    @property
    def alpha1(self) -> float:
        return self.values[0]

    def to_json(self) -> dict:
        return {
            "values": [float(v) for v in self.values],
            "alpha": float(self.alpha),
            "certified": self.certified,
            "search_bound": self.search_bound,
        }


def alpha_profile(g, search_bound: int | None = None) -> AlphaProfile:
    g = np.asarray(g, dtype=float)
    k = g.shape[0]
    vals = []
    cert = True
    for i in range(1, k + 1):
        v, c = alpha_i(g, i, search_bound)
        vals.append(v)
        cert = cert and c
    return AlphaProfile(values=tuple(vals), certified=cert, search_bound=search_bound)


def in_x_geq(g, eps: float) -> bool:
    """Whether alpha(x) <= 1/eps, using certified minima only."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    prof = alpha_profile(g)
    if not prof.certified:
        raise UncertifiedAlphaError("alpha search not certified; membership inconclusive")
    return prof.alpha <= 1.0 / eps


def in_x1_geq(g, eps: float) -> bool:
    """Whether alpha_1(x) <= 1/eps, using a certified minimum only."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    value, certified = alpha_i(g, 1)
    if not certified:
        raise UncertifiedAlphaError("alpha_1 search not certified; membership inconclusive")
    return value <= 1.0 / eps


# ---------------------------------------------------------------------------
# Recurrence certificates.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThetaBound:
    """Polynomially bounded radius schedule Theta(R) = max(1, p(R))."""

    coeffs: tuple = (1.0,)

    def __call__(self, r: float) -> float:
        p = 0.0
        for c in reversed(self.coeffs):
            p = p * r + c
        return max(1.0, p)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


@dataclass(frozen=True)
class DiophSpec:
    """Recurrence test data: exponent D, radius schedule, flow and subgroup."""

    d_exp: float
    theta: ThetaBound
    subgroup: HoroSubgroup

    def __post_init__(self):
        if self.d_exp <= 0:
            raise ValueError("D must be positive")

    @property
    def flow(self) -> DiagonalFlow:
        return self.subgroup.flow


def theta_diophantine_check(x_rep, spec: DiophSpec, r_grid, n_samples: int = 32, seed: int = 0) -> list:
    """Search B_{Theta(R)} translates of the flowed point for sublevel witnesses.

    For each R the report records a witness h with
    alpha(h . a_{-log R} . x) <= R**D, or the failure to find one among the
    sampled candidates (which never certifies absence).
    """
    x_rep = np.asarray(x_rep, dtype=float)
    reports = []
    for r in r_grid:
        if r < 1:
            raise ValueError("grid radii must be >= 1")
        x_flowed = spec.flow.matrix(-math.log(r)) @ x_rep
        threshold = r**spec.d_exp
        ball = FolnerBall(subgroup=spec.subgroup, radius=spec.theta(r))
        candidates = [np.eye(x_rep.shape[0])]
        if n_samples > 0:
            candidates.extend(folner_sample(ball, n_samples, seed))
        entry = {"R": float(r), "threshold": float(threshold), "witness_found": False}
        for h in candidates:
            prof = alpha_profile(np.asarray(h) @ x_flowed)
            if prof.certified and prof.alpha <= threshold:
                entry.update(
                    witness_found=True,
                    witness_h=[[float(v) for v in row] for row in np.asarray(h)],
                    alpha_values=[float(v) for v in prof.values],
                    certified=True,
                )
                break
        reports.append(entry)
    return reports


# ---------------------------------------------------------------------------
# Sublevel-measure (Remez-type) probes and non-divergence sampling.
# ---------------------------------------------------------------------------


def remez_check(
    fn,
    degree: int,
    low,
    high,
    eps_grid,
    n_samples: int = 4096,
    seed: int = 0,
    n_sup: int = 8192,
) -> dict:
    """Monte Carlo check of the polynomial sublevel bound on a box.

    The sublevel fraction |{|f| <= eps}| / |B| is compared against
    4 * n * (eps / sup|f|)^(1/d) plus three binomial standard errors.
    """
    low = np.atleast_1d(np.asarray(low, dtype=float))
    high = np.atleast_1d(np.asarray(high, dtype=float))
    if degree < 1:
        raise ValueError("degree must be >= 1")
    if np.any(high <= low):
        raise ValueError("degenerate box")
    ndim = low.size
    sup_pts = lowdisc_box(low, high, n_sup, seed ^ 0x5EED)
    corners = np.stack(np.meshgrid(*[(lo, hi) for lo, hi in zip(low, high)], indexing="ij"), axis=-1)
    sup_pts = np.vstack([sup_pts, corners.reshape(-1, ndim), 0.5 * (low + high)[None, :]])
    sup = float(np.max(np.abs(fn(sup_pts))))
    if sup == 0.0:
        raise ValueError("function vanishes identically on the probe grid")
    mc_pts = lowdisc_box(low, high, n_samples, seed)
    vals = np.abs(fn(mc_pts))
    rows = []
    ok = True
    for eps in eps_grid:
        frac = float(np.mean(vals <= eps))
        bound = 4.0 * ndim * (eps / sup) ** (1.0 / degree)
        sigma = math.sqrt(frac * (1.0 - frac) / n_samples) + 1.0 / n_samples
        row_ok = frac <= bound + 3.0 * sigma
        ok = ok and row_ok
        rows.append(
            {"eps": float(eps), "measure": frac, "bound": float(bound), "sigma": sigma, "ok": row_ok}
        )
    return {"sup": sup, "degree": degree, "ndim": int(ndim), "rows": rows, "ok": ok}


def subgroup_norm_probe(subgroup: HoroSubgroup, x0_rep, vec) -> tuple:
    """The map c -> ||exp(sum c_b X_b) . x0 . v||_inf on Lie coordinates.

    Matrix entries of the unipotent exponential are polynomials of degree
    at most k-1 in the coordinates, so the probe is a max of polynomial
    absolute values (degree k-1) and falls under the sublevel bound.
    """
    x0_rep = np.asarray(x0_rep, dtype=float)
    vec = np.asarray(vec, dtype=float)
    target = x0_rep @ vec
    basis = np.stack(subgroup.basis)
    k = subgroup.ambient_dim

    def fn(coords: np.ndarray) -> np.ndarray:
        coords = np.atleast_2d(coords)
        x = np.einsum("nb,bij->nij", coords, basis)
        m = np.broadcast_to(np.eye(k), x.shape).copy()
        m += x
        if k >= 3:
            m += 0.5 * np.einsum("nij,njk->nik", x, x)
        img = m @ target
        return np.max(np.abs(img), axis=1)

    return fn, k - 1


def nondivergence_fraction(
    x_rep,
    subgroup: HoroSubgroup,
    big_r: float,
    r: float,
    d_exp: float,
    eps: float,
    n_samples: int = 200,
    seed: int = 0,
    theta: ThetaBound = ThetaBound(),
    alpha_exp: float = 1.0,
    c_prime: float = 2.0,
) -> dict:
    """Sampled fraction of the ball escaping X^1_{>= r^{-D-eps}}, with its power bound.

    The pairing constant (c_prime, alpha_exp) is a frozen empirical
    calibration; the statement being probed only asserts existence.
    """
    if big_r < theta(r):
        raise ValueError("ball radius must be at least Theta(r)")
    x_rep = np.asarray(x_rep, dtype=float)
    x_flowed = subgroup.flow.matrix(-math.log(r)) @ x_rep
    ball = FolnerBall(subgroup=subgroup, radius=big_r)
    hs = folner_sample(ball, n_samples, seed)
    threshold = r ** (d_exp + eps)
    bad = 0
    for h in hs:
        value, certified = alpha_i(h @ x_flowed, 1)
        if not certified:
            raise UncertifiedAlphaError("alpha_1 search not certified during sampling")
        if value > threshold:
            bad += 1
    fraction = bad / n_samples
    return {
        "R": float(big_r),
        "r": float(r),
        "eps": float(eps),
        "fraction": fraction,
        "bound": float(c_prime * r ** (-alpha_exp * eps)),
        "n_samples": n_samples,
    }


# ---------------------------------------------------------------------------
# Norm-form probes.
# ---------------------------------------------------------------------------


def norm_form(y) -> float:
    """Product of absolute coordinates; invariant under unimodular diagonals."""
    return float(np.prod(np.abs(np.asarray(y, dtype=float))))


def norm_form_min(g, rho: float, cap: int = ENUM_CAP) -> dict:
    """min |Nm(y)| over lattice vectors 0 < ||y||_inf < rho, by exact enumeration."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    g = np.asarray(g, dtype=float)
    l1_rows = np.sum(np.abs(np.linalg.inv(g)), axis=1)
    bounds = [max(0, int(math.ceil(l1 * rho))) for l1 in l1_rows]
    if _box_volume(bounds) > cap:
        raise ValueError("enumeration region too large for the brute-force cap")
    k = g.shape[0]
    axes = [np.arange(-b, b + 1, dtype=float) for b in bounds]
    grids = np.meshgrid(*axes, indexing="ij")
    vs = np.stack([gr.ravel() for gr in grids], axis=1)
    ys = vs @ g.T
    sup = np.max(np.abs(ys), axis=1)
    keep = (sup > 0.0) & (sup < rho)
    if not np.any(keep):
        return {"status": "no_vector", "value": None, "argmin": None, "rho": float(rho)}
    ys = ys[keep]
    nms = np.prod(np.abs(ys), axis=1)
    i = int(np.argmin(nms))
    return {
        "status": "ok",
        "value": float(nms[i]),
        "argmin": [float(v) for v in ys[i]],
        "rho": float(rho),
    }


def sqrt2_norm_form_matrix() -> np.ndarray:
    """Unimodular basis of the sqrt(2) norm-form lattice.

    Image vectors are (m - sqrt(2) n, m + sqrt(2) n) / (2 sqrt(2))^{1/2}, so
    |Nm(y)| = |m^2 - 2 n^2| / (2 sqrt(2)) >= 1/(2 sqrt(2)) for all nonzero
    integer (m, n): an exact positive floor for the norm-form minimum.
    """
    s = math.sqrt(2.0)
    return np.array([[1.0, -s], [1.0, s]]) / math.sqrt(2.0 * s)
