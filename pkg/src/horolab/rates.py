"""Closed-form decay-exponent calculators with cross-consistency flags.

The twisted-average exponent is

    gamma = (1 / (2 dim_H + 2))**dim_N * (2M / (2M+1))**dim_N
            * min(gamma_equi, s / (d_H (2 d_H + 3 s)))

and the chain gamma_0..gamma_{dim_N} multiplies in one prefactor ratio per
degree.  For the quadratic-character instance (d_H = dim_H = 1, dim_N = 3,
M = 12, s = 1, gamma_equi = 2/5) the direct evaluation gives 6^3 / 5^7.
Two other published numbers for the same instance, 6^3/(5^6 * 7) and
(6^3/5^3) * s/(2+3s), disagree with it and with each other; the report
carries all three and a discrepancy flag instead of asserting one against
another.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = [
    "RateParams",
    "gamma_equi_uniform",
    "gamma_disjointness",
    "gamma_chain",
    "corollary_gamma",
    "default_dioph_exponent",
    "rate_report",
    "COROLLARY_PARAMS",
]


@dataclass(frozen=True)
class RateParams:
    """Inputs to the exponent formulas."""

    gamma_equi: float
    s: float
    d_h: float
    dim_h: int
    dim_n: int
    m_order: int

    def __post_init__(self):
        if min(self.gamma_equi, self.s, self.d_h) <= 0:
            raise ValueError("rates require positive gamma_equi, s, d_H")
        if self.dim_h < 1 or self.dim_n < 0 or self.m_order < 1:
            raise ValueError("invalid dimension or Sobolev order")


def gamma_equi_uniform(s: float, dim_g: int) -> float:
    """Equidistribution exponent 2s / (dim G + 2) for uniform quotients, abelian H."""
    if s <= 0:
        raise ValueError("s must be positive")
    return 2.0 * s / (dim_g + 2.0)


def _min_term(p: RateParams) -> float:
    return min(p.gamma_equi, p.s / (p.d_h * (2.0 * p.d_h + 3.0 * p.s)))


def _step_ratio(p: RateParams) -> float:
    return (1.0 / (2.0 * p.dim_h + 2.0)) * (2.0 * p.m_order / (2.0 * p.m_order + 1.0))


def gamma_disjointness(p: RateParams) -> float:
    """Twisted-average exponent; empty products for dim_N = 0."""
    return _step_ratio(p) ** p.dim_n * _min_term(p)


def gamma_chain(p: RateParams) -> list:
    """Induction sequence gamma_0..gamma_{dim_N}; consecutive ratio is exact."""
    ratio = _step_ratio(p)
    base = _min_term(p)
    return [base * ratio**j for j in range(p.dim_n + 1)]


def corollary_gamma(re_s1: float) -> float:
    """(6^3/5^3) * Re(s1) / (2 + 3 Re(s1)), the quadratic-instance formula."""
    if not 0 < re_s1 <= 1:
        raise ValueError("Re(s1) must lie in (0, 1]")
    return (6.0**3 / 5.0**3) * re_s1 / (2.0 + 3.0 * re_s1)


def default_dioph_exponent(s: float, d_h: float, k: int, dim_g: int) -> float:
    """Default recurrence exponent 2 s d_H / (k dim G)."""
    if min(s, d_h) <= 0 or k < 2 or dim_g < 3:
        raise ValueError("invalid inputs")
    return 2.0 * s * d_h / (k * dim_g)


COROLLARY_PARAMS = RateParams(gamma_equi=0.4, s=1.0, d_h=1.0, dim_h=1, dim_n=3, m_order=12)

# Stated value for the quadratic-character instance at Re(s1) = 1.
PAPER_STATED_GAMMA = 6.0**3 / (5.0**6 * 7.0)


def rate_report(p: RateParams, re_s1: float | None = None) -> dict:
    """All published values for one parameter set, with a discrepancy flag.

    The direct evaluation of the defining formula is treated as normative;
    the flag records that the alternative numbers do not match it.
    """
    gamma_def = gamma_disjointness(p)
    report = {
        "inputs": {
            "gamma_equi": p.gamma_equi,
            "s": p.s,
            "d_H": p.d_h,
            "dim_H": p.dim_h,
            "dim_N": p.dim_n,
            "M": p.m_order,
        },
        "gamma_def_value": gamma_def,
        "gamma_chain": gamma_chain(p),
        "min_term": _min_term(p),
        "step_ratio": _step_ratio(p),
    }
    if re_s1 is not None:
        corollary = corollary_gamma(re_s1)
        report["corollary_formula_value"] = corollary
        report["paper_stated_value"] = PAPER_STATED_GAMMA
        report["discrepancy_flag"] = not (
            abs(corollary - gamma_def) < 1e-12 and abs(PAPER_STATED_GAMMA - gamma_def) < 1e-12
        )
    return report
