"""Experiment orchestration: validated JSON configs in, JSON/CSV artifacts out.

Every command is a pure function of (config, seed): reruns with identical
inputs produce byte-identical artifacts.  Artifacts are written through a
temp-then-rename so partial outputs never land; failures exit nonzero with
a machine-readable error object on stdout (2 for config problems, 3 for
numerical ones).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import averages, diophantine, group_core, homspace, nilchar, rates

CSV_VERSION = "# horolab-csv-v1"

_REQUIRED = object()


class ConfigError(ValueError):
    pass


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def _dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _atomic_write(path: str, data: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _csv_text(columns, rows) -> str:
    lines = [CSV_VERSION, ",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def _validate(cfg: dict, schema: dict) -> dict:
    unknown = set(cfg) - set(schema)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key, (types, default) in schema.items():
        allowed = types if isinstance(types, tuple) else (types,)
        if key in cfg:
            value = cfg[key]
            if not isinstance(value, allowed) or (isinstance(value, bool) and bool not in allowed):
                raise ConfigError(f"config key {key!r} has wrong type {type(value).__name__}")
            out[key] = value
        elif default is _REQUIRED:
            raise ConfigError(f"missing required config key {key!r}")
        else:
            out[key] = default
    return out


_NUM = (int, float)

_FUNC_KEYS = {
    "y_low": (_NUM, 1.3),
    "y_high": (_NUM, 3.0),
    "amplitude": (_NUM, 1.0),
    "fourier_index": (int, 0),
}

_QUAD_KEYS = {
    "target_rel_err": (_NUM, 1e-4),
    "max_nodes": (int, 1 << 22),
    "n0": (int, 2048),
}

_GRID_KEYS = {
    "R_min": (_NUM, 16.0),
    "R_max": (_NUM, 4096.0),
    "ratio": (_NUM, 2.0),
}

_CHAR_KEYS = {
    "character": (str, "trivial"),
    "alpha": (_NUM, (1.0 + math.sqrt(5.0)) / 2.0),
}

SCHEMAS = {
    "avg": {
        "point": ((str, list), "sqrt2"),
        **_FUNC_KEYS,
        **_CHAR_KEYS,
        "R": (_NUM, 256.0),
        **_QUAD_KEYS,
        "seed": (int, 0),
    },
    "decay": {
        "point": ((str, list), "sqrt2"),
        **_FUNC_KEYS,
        **_CHAR_KEYS,
        **_GRID_KEYS,
        **_QUAD_KEYS,
        "seed": (int, 0),
    },
    "vdc": {
        "point": ((str, list), "sqrt2"),
        **_FUNC_KEYS,
        **_CHAR_KEYS,
        "R": (_NUM, 128.0),
        "r": (_NUM, 8.0),
        "n_pairs": (int, 8),
        **_QUAD_KEYS,
        "seed": (int, 0),
    },
    "alpha": {
        "point": ((str, list), "identity"),
        "search_bound": ((int, type(None)), None),
    },
    "dioph": {
        "point": ((str, list), "sqrt2"),
        "D": (_NUM, 0.5),
        "theta_coeffs": (list, [1.0]),
        **_GRID_KEYS,
        "n_samples": (int, 16),
        "seed": (int, 0),
    },
    "coeff": {
        **_FUNC_KEYS,
        "t_grid": (list, [1.0, 2.0, 3.0, 4.0, 6.0, 8.0]),
        "direction": (str, "diag"),
        "n": (int, 100_000),
        "seed": (int, 0),
    },
    "gamma": {
        "s": (_NUM, 1.0),
        "dim_G": (int, 3),
        "gamma_equi": ((_NUM[0], _NUM[1], type(None)), None),
        "d_H": (_NUM, 1.0),
        "dim_H": (int, 1),
        "dim_N": (int, 3),
        "M": (int, 12),
        "re_s1": ((_NUM[0], _NUM[1], type(None)), 1.0),
    },
    "invariance": {
        "alpha": (_NUM, (1.0 + math.sqrt(5.0)) / 2.0),
        "n_cases": (int, 1000),
        "n_grid": (int, 100_000),
        "t_max": (_NUM, 100.0),
        "seed": (int, 0),
    },
    "discrete": {
        "point": ((str, list), "sqrt2"),
        **_FUNC_KEYS,
        **_CHAR_KEYS,
        **_GRID_KEYS,
        "seed": (int, 0),
    },
    "nondiv": {
        "point": ((str, list), "identity"),
        "group": (str, "sl2"),
        "R": (_NUM, 8.0),
        "r_min": (_NUM, 4.0),
        "r_max": (_NUM, 64.0),
        "r_ratio": (_NUM, 2.0),
        "D": (_NUM, 0.5),
        "eps": (_NUM, 0.25),
        "n_samples": (int, 128),
        "seed": (int, 0),
    },
}


def _geometric_grid(lo: float, hi: float, ratio: float) -> list:
    if lo <= 0 or hi < lo or ratio <= 1:
        raise ConfigError("grid needs 0 < R_min <= R_max and ratio > 1")
    grid = []
    r = float(lo)
    while r <= hi * (1.0 + 1e-9):
        grid.append(r)
        r *= ratio
    return grid


def _resolve_point(value) -> homspace.ModularPoint:
    if isinstance(value, str):
        return averages.named_base_point(value)
    return homspace.ModularPoint.from_matrix(np.asarray(value, dtype=float))


def _resolve_matrix(value) -> np.ndarray:
    if isinstance(value, str):
        return averages.named_base_point(value).rep
    return np.asarray(value, dtype=float)


def _build_function(cfg) -> homspace.TestFunction:
    return homspace.TestFunction(
        y_low=float(cfg["y_low"]),
        y_high=float(cfg["y_high"]),
        amplitude=float(cfg["amplitude"]),
        fourier_index=int(cfg["fourier_index"]),
    )


def _build_character(cfg):
    kind = cfg["character"]
    if kind == "trivial":
        return None
    return nilchar.NilCharacter(kind=kind, alpha=float(cfg["alpha"]))


def _build_spec(cfg) -> averages.QuadratureSpec:
    return averages.QuadratureSpec(
        target_rel_err=float(cfg["target_rel_err"]),
        max_nodes=int(cfg["max_nodes"]),
        n0=int(cfg["n0"]),
        seed=int(cfg["seed"]),
    )


def _run_avg(cfg):
    f = _build_function(cfg)
    psi = _build_character(cfg)
    x = _resolve_point(cfg["point"])
    info = averages.folner_average_info(f, psi, x, float(cfg["R"]), _build_spec(cfg))
    report = {
        "command": "avg",
        "config": cfg,
        "value": info.value,
        "abs": abs(info.value),
        "n_intervals": info.n_intervals,
        "converged": info.converged,
    }
    return report, None, None


def _run_decay(cfg):
    f = _build_function(cfg)
    psi = _build_character(cfg)
    x = _resolve_point(cfg["point"])
    grid = _geometric_grid(cfg["R_min"], cfg["R_max"], cfg["ratio"])
    avgs, report = averages.decay_scan(f, psi, x, grid, _build_spec(cfg))
    rows = [
        (r, v, a.real, a.imag, abs(a))
        for r, v, a in zip(grid, report.volumes, avgs)
    ]
    out = {"command": "decay", "config": cfg, "report": report.to_json()}
    return out, ("R", "vol", "re", "im", "abs"), rows


def _run_vdc(cfg):
    f = _build_function(cfg)
    psi = _build_character(cfg)
    x = _resolve_point(cfg["point"])
    rep = averages.vdc_check(
        f,
        psi,
        x,
        float(cfg["R"]),
        float(cfg["r"]),
        _build_spec(cfg),
        n_pairs=int(cfg["n_pairs"]),
        seed=int(cfg["seed"]),
    )
    return {"command": "vdc", "config": cfg, "report": rep.to_json()}, None, None


def _run_alpha(cfg):
    g = _resolve_matrix(cfg["point"])
    prof = diophantine.alpha_profile(g, cfg["search_bound"])
    return {"command": "alpha", "config": cfg, "profile": prof.to_json()}, None, None


def _run_dioph(cfg):
    g = _resolve_matrix(cfg["point"])
    spec = diophantine.DiophSpec(
        d_exp=float(cfg["D"]),
        theta=diophantine.ThetaBound(tuple(float(c) for c in cfg["theta_coeffs"])),
        subgroup=group_core.sl2_horocycle(),
    )
    grid = _geometric_grid(cfg["R_min"], cfg["R_max"], cfg["ratio"])
    reports = diophantine.theta_diophantine_check(
        g, spec, grid, n_samples=int(cfg["n_samples"]), seed=int(cfg["seed"])
    )
    all_found = all(r["witness_found"] for r in reports)
    return (
        {"command": "dioph", "config": cfg, "reports": reports, "all_witnessed": all_found},
        None,
        None,
    )


def _run_coeff(cfg):
    f = _build_function(cfg)
    flow = group_core.sl2_horocycle().flow
    s_hat, rows = averages.coefficient_decay_fit(
        f,
        flow,
        [float(t) for t in cfg["t_grid"]],
        n=int(cfg["n"]),
        seed=int(cfg["seed"]),
        direction=cfg["direction"],
    )
    csv_rows = [(r["t"], r["lognorm"], r["abs"], r["std_err"]) for r in rows]
    report = {"command": "coeff", "config": cfg, "s_hat": s_hat, "rows": rows}
    return report, ("t", "lognorm", "abs", "std_err"), csv_rows


def _run_gamma(cfg):
    gamma_equi = cfg["gamma_equi"]
    if gamma_equi is None:
        gamma_equi = rates.gamma_equi_uniform(float(cfg["s"]), int(cfg["dim_G"]))
    params = rates.RateParams(
        gamma_equi=float(gamma_equi),
        s=float(cfg["s"]),
        d_h=float(cfg["d_H"]),
        dim_h=int(cfg["dim_H"]),
        dim_n=int(cfg["dim_N"]),
        m_order=int(cfg["M"]),
    )
    re_s1 = cfg["re_s1"]
    report = rates.rate_report(params, None if re_s1 is None else float(re_s1))
    report["gamma_equi_used"] = float(gamma_equi)
    report["default_D"] = rates.default_dioph_exponent(
        float(cfg["s"]), float(cfg["d_H"]), 2, int(cfg["dim_G"])
    )
    return {"command": "gamma", "config": cfg, "report": report}, None, None


def _run_invariance(cfg):
    alpha = float(cfg["alpha"])
    rng = np.random.default_rng(int(cfg["seed"]))
    n_cases = int(cfg["n_cases"])
    coords = rng.uniform(-5.0, 5.0, (n_cases, 3))
    gammas = rng.integers(-4, 5, (n_cases, 3))
    max_resid = 0.0
    max_mod = 0.0
    for (px, py, pz), (a, b, c) in zip(coords, gammas):
        p = homspace.HeisenbergPoint(x=px, y=py, z=pz)
        moved = homspace.HeisenbergPoint.from_matrix(
            p.matrix @ homspace.heis_matrix(float(a), float(b), float(c))
        )
        v1 = nilchar.heis_char_eval(p)
        v2 = nilchar.heis_char_eval(moved)
        max_resid = max(max_resid, abs(v1 - v2))
        max_mod = max(max_mod, abs(abs(v1) - 1.0))
    t = np.linspace(-float(cfg["t_max"]), float(cfg["t_max"]), int(cfg["n_grid"]))
    seq = nilchar.orbit_character(alpha, t)
    closed = nilchar.bracket_closed_form(alpha, t)
    report = {
        "command": "invariance",
        "config": cfg,
        "max_invariance_residual": max_resid,
        "max_unimodularity_deviation": max_mod,
        "closed_form_max_error": float(np.max(np.abs(seq.values - closed))),
    }
    return report, None, None


def _run_discrete(cfg):
    f = _build_function(cfg)
    psi = _build_character(cfg)
    x = _resolve_point(cfg["point"])
    grid = _geometric_grid(cfg["R_min"], cfg["R_max"], cfg["ratio"])
    sub = group_core.sl2_horocycle()
    vols, avgs, counts = [], [], []
    for r in grid:
        vols.append(group_core.folner_volume(group_core.FolnerBall(subgroup=sub, radius=r)))
        avgs.append(averages.discrete_average(f, psi, x, r))
        counts.append(averages.lattice_count(r))
    report = averages.decay_fit(grid, vols, avgs)
    rows = [
        (r, v, a.real, a.imag, abs(a))
        for r, v, a in zip(grid, vols, avgs)
    ]
    out = {
        "command": "discrete",
        "config": cfg,
        "report": report.to_json(),
        "counts": counts,
    }
    return out, ("R", "vol", "re", "im", "abs"), rows


def _run_nondiv(cfg):
    g = _resolve_matrix(cfg["point"])
    if cfg["group"] == "sl2":
        sub = group_core.sl2_horocycle()
    elif cfg["group"] == "heisenberg_sl3":
        sub = group_core.heisenberg_sl3()
    else:
        raise ConfigError(f"unknown group {cfg['group']!r}")
    if g.shape[0] != sub.ambient_dim:
        raise ConfigError("point dimension does not match the group")
    grid = _geometric_grid(cfg["r_min"], cfg["r_max"], cfg["r_ratio"])
    rows = [
        diophantine.nondivergence_fraction(
            g,
            sub,
            big_r=max(float(cfg["R"]), 1.0),
            r=r,
            d_exp=float(cfg["D"]),
            eps=float(cfg["eps"]),
            n_samples=int(cfg["n_samples"]),
            seed=int(cfg["seed"]),
        )
        for r in grid
    ]
    return {"command": "nondiv", "config": cfg, "rows": rows}, None, None


_RUNNERS = {
    "avg": _run_avg,
    "decay": _run_decay,
    "vdc": _run_vdc,
    "alpha": _run_alpha,
    "dioph": _run_dioph,
    "coeff": _run_coeff,
    "gamma": _run_gamma,
    "invariance": _run_invariance,
    "discrete": _run_discrete,
    "nondiv": _run_nondiv,
}


def _emit(report: dict, out: str | None, csv_columns, csv_rows):
    text = _dumps(report)
    if out is None:
        sys.stdout.write(text)
        return
    _atomic_write(out, text)
    if csv_columns is not None:
        _atomic_write(f"{out}.csv", _csv_text(csv_columns, csv_rows))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="horolab", description=__doc__)
    parser.add_argument("command", choices=sorted(_RUNNERS))
    parser.add_argument("--config", required=True, help="path to a flat JSON config")
    parser.add_argument("--out", default=None, help="artifact path (JSON; grids add .csv)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)

    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        cfg = _validate(raw, SCHEMAS[args.command])
        if args.seed is not None:
            if "seed" not in SCHEMAS[args.command]:
                raise ConfigError("this command takes no seed")
            cfg["seed"] = args.seed
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        sys.stdout.write(_dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 2

    try:
        report, csv_columns, csv_rows = _RUNNERS[args.command](cfg)
    except ConfigError as exc:
        sys.stdout.write(_dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 2
    except Exception as exc:  # numerical failures: nonzero exit, structured output
        sys.stdout.write(_dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return 3

    _emit(report, args.out, csv_columns, csv_rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
