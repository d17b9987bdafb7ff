"""Folner-ball ergodic averages, decay fits, and the differencing inequality.

The scalar workhorse integrates psi(orbit(t)) * f(u_t . x) over [-R, R]
with a node-doubling trapezoid rule that stops once two consecutive
refinements move the answer by less than target_rel_err * (1 + |value|).
The bracket correction keeps the character's phase derivative bounded, so
the oscillation density does not grow with R and the doubling terminates
at moderate node counts.

The differencing inequality asserted by vdc_check keeps the derivation's
exact constants: with A the twisted average, D the double average of the
differenced inner averages over a small ball B, and beta the worst
boundary ratio over B,

    A <= sqrt(D) + 2 ||f||_inf beta

up to quadrature noise only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .group_core import (
    DiagonalFlow,
    FolnerBall,
    HoroSubgroup,
    folner_sample,
    folner_volume,
    sl2_horocycle,
    split_by_weights,
)
from .homspace import ModularPoint, TestFunction, _haar_arrays, inj_rad_lower_bound
from .nilchar import NilCharacter
from .quasirand import lowdisc_box

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "AverageResult",
    "twisted_average",
    "folner_average_info",
    "character_ball_average",
    "DecayReport",
    "decay_fit",
    "decay_scan",
    "VdcReport",
    "vdc_check",
    "MatrixCoefficientEstimate",
    "matrix_coefficient",
    "coefficient_decay_fit",
    "mean_ergodic_check",
    "key_lemma_check",
    "discrete_average",
    "lattice_count",
    "SQRT2_BASE_POINT",
    "named_base_point",
]

_CHUNK = 1 << 19


@dataclass(frozen=True)
class QuadratureSpec:
    """Node-doubling control: stop when two consecutive refinements settle."""

    scheme: str = "uniform_doubling_1d"
    target_rel_err: float = 1e-6
    max_nodes: int = 1 << 22
    seed: int = 0
    n0: int = 2048

    def __post_init__(self):
        if self.scheme not in ("uniform_doubling_1d", "mc_quasirandom_3d"):
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        if self.target_rel_err <= 0 or self.n0 < 2 or self.max_nodes < self.n0:
            raise ValueError("invalid quadrature parameters")


class QuadratureError(RuntimeError):
    def __init__(self, message: str, last_values):
        super().__init__(f"{message}; last refinements {last_values!r}")
        self.last_values = last_values


@dataclass(frozen=True)
class AverageResult:
    value: complex
    n_intervals: int
    last_deltas: tuple
    converged: bool


def _chunked_sum(fn, xs: np.ndarray) -> complex:
    total = 0.0 + 0.0j
    for lo in range(0, xs.size, _CHUNK):
        total += complex(np.sum(fn(xs[lo : lo + _CHUNK])))
    return total


def _trapezoid_doubling(fn, a: float, b: float, spec: QuadratureSpec) -> AverageResult:
    n = spec.n0
    h = (b - a) / n
    xs = np.linspace(a, b, n + 1)
    ends = 0.5 * (complex(np.sum(fn(xs[:1]))) + complex(np.sum(fn(xs[-1:]))))
    total = h * (ends + _chunked_sum(fn, xs[1:-1]))
    value = total / (b - a)
    deltas: list = []
    while n < spec.max_nodes:
        mids = a + h / 2.0 + h * np.arange(n)
        total = 0.5 * total + (h / 2.0) * _chunked_sum(fn, mids)
        n *= 2
        h /= 2.0
        new_value = total / (b - a)
        deltas.append(abs(new_value - value))
        value = new_value
        if len(deltas) >= 2:
            tol = spec.target_rel_err * (1.0 + abs(value))
            if deltas[-1] < tol and deltas[-2] < tol:
                return AverageResult(value, n, tuple(deltas[-2:]), True)
    raise QuadratureError(
        "quadrature failed to settle within the node budget", tuple(deltas[-2:])
    )


def _orbit_integrand(f: TestFunction, psi, x: ModularPoint):
    if psi is None or psi.kind == "trivial":
        return lambda t: f.value_at_orbit(x, t)
    return lambda t: psi.orbit_values(t) * f.value_at_orbit(x, t)


def folner_average_info(f: TestFunction, psi, x: ModularPoint, radius: float, spec: QuadratureSpec) -> AverageResult:
    if radius < 1:
        raise ValueError("averaging radius must be >= 1")
    return _trapezoid_doubling(_orbit_integrand(f, psi, x), -radius, radius, spec)


def twisted_average(f: TestFunction, psi, x: ModularPoint, radius: float, spec: QuadratureSpec | None = None) -> complex:
    """(1/2R) integral of psi(orbit(t)) f(u_t.x) dt over [-R, R]."""
    return folner_average_info(f, psi, x, radius, spec or QuadratureSpec()).value


def character_ball_average(
    psi: NilCharacter,
    subgroup: HoroSubgroup,
    radius: float,
    y0=None,
    spec: QuadratureSpec | None = None,
) -> AverageResult:
    """Quasi-Monte-Carlo average of the character over the 3-parameter ball B_R.

    The sample count doubles along one deterministic low-discrepancy stream
    until two consecutive refinements settle, so reruns are reproducible.
    """
    spec = spec or QuadratureSpec(scheme="mc_quasirandom_3d")
    if psi.kind != "bracket":
        raise ValueError("ball averages are defined for the quotient character")
    ball = FolnerBall(subgroup=subgroup, radius=radius)
    base = np.eye(subgroup.ambient_dim) if y0 is None else y0.matrix
    n = spec.n0
    total = 0.0 + 0.0j
    drawn = 0
    value = None
    deltas: list = []
    while drawn + n <= spec.max_nodes:
        pts = folner_sample(ball, n, spec.seed, start_index=drawn)
        m = pts @ base
        vals = np.exp(2j * math.pi * (m[:, 0, 2] - m[:, 0, 1] * np.floor(m[:, 1, 2])))
        total += complex(np.sum(vals))
        drawn += n
        new_value = total / drawn
        if value is not None:
            deltas.append(abs(new_value - value))
        value = new_value
        if len(deltas) >= 2:
            tol = spec.target_rel_err * (1.0 + abs(value))
            if deltas[-1] < tol and deltas[-2] < tol:
                return AverageResult(value, drawn, tuple(deltas[-2:]), True)
        n = drawn  # double the cumulative count each round
    raise QuadratureError("ball average failed to settle", tuple(deltas[-2:]))


# ---------------------------------------------------------------------------
# Decay grids.
# ---------------------------------------------------------------------------


@dataclass
class DecayReport:
    """Power-law fit of average magnitudes against ball volumes."""

    r_grid: list
    volumes: list
    magnitudes: list
    fitted_eta: float
    stderr: float
    intercept: float
    excluded: list = field(default_factory=list)

    @property
    def significant(self) -> bool:
        return self.fitted_eta > 2.0 * self.stderr

    def to_json(self) -> dict:
        return {
            "R_grid": [float(v) for v in self.r_grid],
            "volumes": [float(v) for v in self.volumes],
            "magnitudes": [float(v) for v in self.magnitudes],
            "fitted_eta": float(self.fitted_eta),
            "stderr": float(self.stderr),
            "intercept": float(self.intercept),
            "excluded": list(self.excluded),
            "significant": self.significant,
        }


def decay_fit(r_grid, volumes, averages) -> DecayReport:
    """Least-squares slope of log|average| against log volume; eta = -slope.

    Exact zeros cannot enter the log fit; they are excluded and flagged.
    """
    r_grid = [float(r) for r in r_grid]
    volumes = [float(v) for v in volumes]
    mags = [abs(a) for a in averages]
    if len(r_grid) < 4:
        raise ValueError("need at least 4 grid points")
    excluded = [i for i, m in enumerate(mags) if m == 0.0]
    keep = [i for i in range(len(mags)) if i not in excluded]
    if len(keep) < 3:
        raise ValueError("too few nonzero magnitudes to fit")
    x = np.log([volumes[i] for i in keep])
    y = np.log([mags[i] for i in keep])
    xbar = x.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * xbar)
    resid = y - (intercept + slope * x)
    dof = max(1, len(keep) - 2)
    stderr = float(math.sqrt(float(np.sum(resid**2)) / dof / sxx))
    return DecayReport(
        r_grid=r_grid,
        volumes=volumes,
        magnitudes=mags,
        fitted_eta=-slope,
        stderr=stderr,
        intercept=intercept,
        excluded=excluded,
    )


def decay_scan(
    f: TestFunction,
    psi,
    x: ModularPoint,
    r_grid,
    spec: QuadratureSpec | None = None,
    subgroup: HoroSubgroup | None = None,
):
    """Averages and ball volumes along a radius grid, plus the fitted report."""
    spec = spec or QuadratureSpec()
    subgroup = subgroup or sl2_horocycle()
    volumes = [folner_volume(FolnerBall(subgroup=subgroup, radius=r)) for r in r_grid]
    averages = [twisted_average(f, psi, x, r, spec) for r in r_grid]
    report = decay_fit(r_grid, volumes, averages)
    return averages, report


# ---------------------------------------------------------------------------
# Differencing inequality.
# ---------------------------------------------------------------------------


@dataclass
class VdcReport:
    a_value: float
    d_value: float
    beta: float
    bound: float
    tol: float
    ok: bool
    n_pairs: int
    r_small: float
    r_big: float

    def to_json(self) -> dict:
        return {
            "A": self.a_value,
            "D": self.d_value,
            "beta": self.beta,
            "bound": self.bound,
            "tol": self.tol,
            "ok": self.ok,
            "n_pairs": self.n_pairs,
            "r": self.r_small,
            "R": self.r_big,
        }


def vdc_check(
    f: TestFunction,
    psi,
    x: ModularPoint,
    r_big: float,
    r_small: float,
    spec: QuadratureSpec | None = None,
    n_pairs: int = 8,
    seed: int = 0,
) -> VdcReport:
    """Check A <= sqrt(D) + 2 ||f||_inf beta at quadrature precision.

    D is the double average over sampled shift pairs (b1, b2) in the small
    ball of the inner average of the differenced product; beta = r/R exactly
    for the interval family.  Constants 1 and 2 come from the derivation and
    are not tunable; only quadrature noise is tolerated.
    """
    if not 0 < r_small < r_big:
        raise ValueError("need 0 < r < R")
    spec = spec or QuadratureSpec(target_rel_err=1e-4, n0=1024)
    base = _orbit_integrand(f, psi, x)
    a_value = abs(_trapezoid_doubling(base, -r_big, r_big, spec).value)
    shifts = lowdisc_box([-r_small, -r_small], [r_small, r_small], n_pairs, seed)
    gammas = []
    for s1, s2 in shifts:
        def diff_fn(t, _s1=s1, _s2=s2):
            return base(t + _s1) * np.conj(base(t + _s2))

        gammas.append(abs(_trapezoid_doubling(diff_fn, -r_big, r_big, spec).value))
    d_value = float(np.mean(gammas))
    beta = r_small / r_big
    bound = math.sqrt(d_value) + 2.0 * f.sup_norm * beta
    tol = 10.0 * spec.target_rel_err * max(1.0, f.sup_norm)
    return VdcReport(
        a_value=a_value,
        d_value=d_value,
        beta=beta,
        bound=bound,
        tol=tol,
        ok=a_value <= bound + tol,
        n_pairs=n_pairs,
        r_small=r_small,
        r_big=r_big,
    )


# ---------------------------------------------------------------------------
# Matrix coefficients.
# ---------------------------------------------------------------------------


@dataclass
class MatrixCoefficientEstimate:
    value: complex
    n_samples: int
    std_err: float
    low_signal: bool

    def to_json(self) -> dict:
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "abs": abs(self.value),
            "n_samples": self.n_samples,
            "std_err": self.std_err,
            "low_signal": self.low_signal,
        }


def _require_mean_subtracted(f: TestFunction):
    if f.fourier_index == 0 and not f.subtract_mean:
        raise ValueError("correlations require mean-subtracted functions")


def matrix_coefficient(f1: TestFunction, f2: TestFunction, g, n: int, seed: int) -> MatrixCoefficientEstimate:
    """Monte Carlo estimate of int f1(g.x) conj(f2(x)) over the quotient."""
    _require_mean_subtracted(f1)
    _require_mean_subtracted(f2)
    g = np.asarray(g, dtype=float)
    reps, _, _, _ = _haar_arrays(n, seed)
    vals2 = np.asarray(f2.value_at_matrices(reps), dtype=complex)
    moved = np.einsum("ij,njk->nik", g, reps)
    vals1 = np.asarray(f1.value_at_matrices(moved), dtype=complex)
    prod = vals1 * np.conj(vals2)
    value = complex(np.mean(prod))
    std_err = float(np.std(prod) / math.sqrt(n))
    return MatrixCoefficientEstimate(
        value=value, n_samples=n, std_err=std_err, low_signal=std_err > abs(value)
    )


def coefficient_decay_fit(
    f: TestFunction,
    flow: DiagonalFlow,
    t_grid,
    n: int = 200_000,
    seed: int = 0,
    direction: str = "diag",
):
    """Empirical correlation-decay exponent s_hat from a log-log fit.

    direction "diag" moves by a_t (log-norm max|w_i| t); "horo" moves by the
    unipotent u_t (log-norm t).  Returns (s_hat, report rows).
    """
    rows = []
    xs = []
    ys = []
    for i, t in enumerate(t_grid):
        if direction == "diag":
            g = flow.matrix(float(t))
            lognorm = max(abs(w) for w in flow.weights) * float(t)
        elif direction == "horo":
            g = np.array([[1.0, float(t)], [0.0, 1.0]])
            lognorm = float(t)
        else:
            raise ValueError("direction must be 'diag' or 'horo'")
        est = matrix_coefficient(f, f, g, n, seed + i)
        rows.append({"t": float(t), "lognorm": lognorm, **est.to_json()})
        if abs(est.value) > 0 and lognorm > 0:
            xs.append(math.log(lognorm))
            ys.append(math.log(abs(est.value)))
    if len(xs) < 2:
        raise ValueError("not enough usable points for the decay fit")
    x = np.asarray(xs)
    y = np.asarray(ys)
    slope = float(np.sum((x - x.mean()) * (y - y.mean())) / np.sum((x - x.mean()) ** 2))
    return -slope, rows


# ---------------------------------------------------------------------------
# Mean-ergodic and nearby-orbit checks.
# ---------------------------------------------------------------------------


def mean_ergodic_check(
    f: TestFunction,
    radius: float,
    delta: float,
    n_points: int = 100,
    seed: int = 0,
    spec: QuadratureSpec | None = None,
    s_hat: float = 0.8,
    c_f: float = 5.0,
) -> dict:
    """Fraction of random base points with |average| above vol^{-delta}.

    Paired with the frozen-calibration bound c_f * vol^{2 delta - 2 s_hat}.
    """
    if not 0 <= delta < s_hat:
        raise ValueError("need 0 <= delta < s_hat")
    spec = spec or QuadratureSpec(target_rel_err=1e-4, n0=512)
    reps, _, _, _ = _haar_arrays(n_points, seed)
    vol = folner_volume(FolnerBall(subgroup=sl2_horocycle(), radius=radius))
    threshold = vol**-delta
    exceed = 0
    for i in range(n_points):
        x = ModularPoint.from_matrix(reps[i])
        if abs(twisted_average(f, None, x, radius, spec)) >= threshold:
            exceed += 1
    fraction = exceed / n_points
    return {
        "R": float(radius),
        "volume": vol,
        "delta": delta,
        "threshold": threshold,
        "fraction": fraction,
        "bound": c_f * vol ** (2.0 * delta - 2.0 * s_hat),
        "n_points": n_points,
    }


def _expm2_traceless(m: np.ndarray) -> np.ndarray:
    if abs(m[0, 0] + m[1, 1]) > 1e-12:
        raise ValueError("perturbation must be traceless")
    mu2 = -(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    eye = np.eye(2)
    if mu2 > 1e-16:
        mu = math.sqrt(mu2)
        return math.cosh(mu) * eye + (math.sinh(mu) / mu) * m
    if mu2 < -1e-16:
        w = math.sqrt(-mu2)
        return math.cos(w) * eye + (math.sin(w) / w) * m
    return eye + m


def key_lemma_check(
    x: ModularPoint,
    perturbation,
    radius: float,
    f: TestFunction,
    spec: QuadratureSpec | None = None,
    c_f: float = 40.0,
    inj_guard: float = 0.1,
) -> dict:
    """Averages at x versus the renormalized-perturbation partner point.

    The partner is y = a_{log R} exp(eps) a_{-log R} . x, whose flowed-down
    distance from the flowed-down x is the perturbation size delta.  The
    check requires delta below a tenth of the injectivity-radius bound at
    the flowed-down point and asserts |avg(x) - avg(y)| <= c_f * delta with
    the frozen calibration constant.
    """
    spec = spec or QuadratureSpec(target_rel_err=1e-6, n0=1024)
    eps_mat = np.asarray(perturbation, dtype=float)
    delta = float(np.max(np.abs(eps_mat)))
    flow = sl2_horocycle().flow
    t = math.log(radius)
    x_down = ModularPoint.from_matrix(flow.matrix(-t) @ x.rep)
    from .diophantine import alpha_i

    a1, certified = alpha_i(x_down.reduced_rep, 1)
    if not certified:
        raise RuntimeError("could not certify the flowed-down point's height")
    inj = inj_rad_lower_bound(x_down, 1.0 / a1)
    if delta >= inj_guard * inj:
        raise ValueError(f"perturbation {delta!r} exceeds the injectivity guard {inj_guard * inj!r}")
    split = split_by_weights(flow, eps_mat)
    pert = flow.matrix(t) @ _expm2_traceless(eps_mat) @ flow.matrix(-t)
    y = ModularPoint.from_matrix(pert @ x.rep)
    avg_x = twisted_average(f, None, x, radius, spec)
    avg_y = twisted_average(f, None, y, radius, spec)
    diff = abs(avg_x - avg_y)
    return {
        "delta": delta,
        "difference": diff,
        "bound": c_f * delta,
        "ok": diff <= c_f * delta,
        "inj_bound": inj,
        "split_norms": {
            "minus": float(np.max(np.abs(split.minus))),
            "zero": float(np.max(np.abs(split.zero))),
            "plus": float(np.max(np.abs(split.plus))),
        },
    }


# ---------------------------------------------------------------------------
# Discrete sums.
# ---------------------------------------------------------------------------


def lattice_count(radius: float) -> int:
    return 2 * math.floor(radius) + 1


def discrete_average(f: TestFunction, psi, x: ModularPoint, radius: float) -> complex:
    """Exact sum over integer times in [-R, R], normalized by the point count."""
    if radius < 2:
        raise ValueError("discrete averages need R >= 2")
    ts = np.arange(-math.floor(radius), math.floor(radius) + 1, dtype=float)
    vals = f.value_at_orbit(x, ts)
    if psi is not None and psi.kind != "trivial":
        vals = psi.orbit_values(ts) * vals
    return complex(np.sum(vals) / ts.size)


# ---------------------------------------------------------------------------
# Named base points.
# ---------------------------------------------------------------------------

SQRT2_BASE_POINT = np.array([[1.0, 0.0], [math.sqrt(2.0), 1.0]])


def named_base_point(name: str) -> ModularPoint:
    """Base points used across experiments.

    "sqrt2" is the badly-approximable default: its flowed-down lattice stays
    in a fixed compact part of the space, so the constant radius schedule
    certifies recurrence for every R.
    """
    mats = {
        "identity": np.eye(2),
        "sqrt2": SQRT2_BASE_POINT,
        "golden": np.array([[1.0, 0.0], [(1.0 + math.sqrt(5.0)) / 2.0, 1.0]]),
    }
    if name not in mats:
        raise ValueError(f"unknown base point {name!r}")
    return ModularPoint.from_matrix(mats[name])
