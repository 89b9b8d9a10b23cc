"""
Named experiments behind the command-line front end.

Each experiment declares its configuration keys with defaults, and a runner
that turns a resolved configuration into a :class:`Table`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import estimation, fisher, schemes, su2, sud
from .errors import ContractViolation, NumericalFailure
from .su2 import FieldParams


@dataclass
class Table:
    columns: list[str]
    rows: list[list[Any]]
    summary: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Key:
    type: type
    default: Any
    help: str = ""
    minimum: float | None = None


@dataclass(frozen=True)
class Experiment:
    name: str
    keys: dict[str, Key]
    run: Callable[[dict], Table]
    help: str = ""


def _informative(J: fisher.FisherMatrix) -> list[bool]:
    top = float(np.max(np.abs(J.m), initial=0.0))
    return [bool(top > 0 and J.m[i, i] > fisher.PINV_CUTOFF * top) for i in range(len(J.labels))]


def run_qfim(cfg: dict) -> Table:
    x = FieldParams(cfg["B"], cfg["theta"], cfg["phi"])
    T = cfg["T"]
    if T < 0:
        raise ContractViolation("T must be non-negative")
    J = su2.qfim_max(x, T)
    Jnum = fisher.qfim_pure(su2.state_model(T), x.as_array())
    inv = J.pinv()
    rows = []
    for name, m in (("qfim", J.m), ("qfim_numerical", Jnum.m), ("inverse", inv)):
        for i, lab in enumerate(su2.FIELD_LABELS):
            rows.append([name, lab, *map(float, m[i])])
    informative = _informative(J)
    summary = {
        "singular": J.singular,
        "cartesian_mse_bound": fisher.crb(J, su2.cartesian_weight(x), 1),
        "max_abs_numerical_deviation": float(np.max(np.abs(Jnum.m - J.m))),
    }
    for lab, ok in zip(su2.FIELD_LABELS, informative):
        summary[f"informative_{lab}"] = ok
    return Table(["matrix", "row", *su2.FIELD_LABELS], rows, summary)


def run_compare_schemes(cfg: dict) -> Table:
    B, N, t = cfg["B"], cfg["N"], cfg["t"]
    c = schemes.compare(B, N, t)
    cols = ["model", "N", "t", "B", "mse_sequential", "mse_parallel", "ratio",
            "ratio_formula", "ratio_limit"]
    rows = [["su2", N, t, B, c.mse_sequential, c.mse_parallel, c.ratio,
             schemes.improvement_ratio(N), 3.0]]
    d = cfg.get("d")
    if d is not None:
        s = sud.scheme_variance_sums(d, N, t)
        rows.append([f"su{d}", N, t, None, s.sequential, s.parallel, s.ratio,
                     sud.improvement_ratio(d, N), float(d + 1)])
    return Table(cols, rows, {"T": N * t})


def _resolve_time(cfg: dict) -> tuple[float, int, float]:
    T, N, t = cfg["T"], cfg["N"], cfg.get("t")
    if t is None:
        t = T / N
    elif abs(N * t - T) > 1e-12 * max(1.0, T):
        raise ContractViolation(f"inconsistent times: N*t = {N * t} but T = {T}")
    return T, N, t


def run_gain_curve(cfg: dict) -> Table:
    T, N, t = _resolve_time(cfg)
    lo, hi, pts = cfg["dev_min"], cfg["dev_max"], cfg["points"]
    if not 0 <= lo <= hi:
        raise ContractViolation("need 0 <= dev_min <= dev_max")
    grid = np.linspace(lo, hi, pts)
    rows = [
        [float(b), schemes.gain_ratio(b, T, N), schemes.gain_ratio(b, T, N, schemes.ASYMPTOTIC)]
        for b in grid
    ]
    summary = {
        "T": T,
        "N": N,
        "t": t,
        "gamma_at_zero": schemes.gain_ratio(0.0, T, N),
        "crossing": schemes.gain_crossing(T, N),
        "crossing_asymptotic": schemes.gain_crossing(T, N, schemes.ASYMPTOTIC),
        "threshold_angle": schemes.threshold_angle(),
    }
    return Table(["deviation", "gamma", "gamma_asymptotic"], rows, summary)


def run_monte_carlo(cfg: dict) -> Table:
    x = FieldParams(cfg["B"], cfg["theta"], cfg["phi"])
    control_keys = ("control_B", "control_theta", "control_phi")
    given = [cfg.get(k) for k in control_keys]
    if all(v is None for v in given):
        estimate = x
    else:
        estimate = FieldParams(*(x.as_array()[i] if v is None else v for i, v in enumerate(given)))
    probe = schemes.SchemeConfig(cfg["N"], cfg["t"])
    control = FieldParams.from_cartesian(
        estimate.vector - estimation.box_offset(probe.T, cfg["offset_bt"])
    )
    scheme = schemes.SchemeConfig(cfg["N"], cfg["t"], schemes.SEQUENTIAL, control)
    r = estimation.monte_carlo_mse(
        x, scheme, cfg["n"], cfg["trials"], estimation.RngSpec(cfg["seed"]),
        estimator=cfg["estimator"],
    )
    if not math.isfinite(r.mse_cartesian_mean):
        raise NumericalFailure("Monte Carlo MSE is not finite")
    cols = ["mse_cartesian_mean", "stderr", "crb_reference", "ratio", "crb_shifted_formula",
            "bias_x1", "bias_x2", "bias_x3"]
    row = [r.mse_cartesian_mean, r.stderr, r.crb_reference, r.ratio, r.crb_shifted_formula,
           *r.bias]
    summary = {
        "shifted_B": r.shifted.B,
        "shifted_theta": r.shifted.theta,
        "shifted_phi": r.shifted.phi,
        "shifted_BT": r.shifted.B * scheme.T,
        "control_x1": control.vector[0],
        "control_x2": control.vector[1],
        "control_x3": control.vector[2],
    }
    return Table(cols, [row], summary)


def _parse_dims(spec: str) -> list[int]:
    try:
        dims = [int(p) for p in str(spec).replace(" ", "").split(",") if p]
    except ValueError:
        raise ContractViolation(f"cannot parse dimension list {spec!r}") from None
    if not dims:
        raise ContractViolation("empty dimension list")
    for d in dims:
        if not 2 <= d <= sud.MAX_DIM:
            raise ContractViolation(f"d={d} outside [2, {sud.MAX_DIM}]")
    return dims


def run_sud_scaling(cfg: dict) -> Table:
    dims = _parse_dims(cfg["d"])
    N, t = cfg["N"], cfg["t"]
    T = N * t
    rows = []
    for d in dims:
        s = sud.scheme_variance_sums(d, N, t)
        Jnum = sud.numerical_qfim_at_origin(d, T)
        dev = float(np.max(np.abs(Jnum.m - sud.qfim_at_origin(d, T).m)))
        rows.append([d, N, t, T, s.sequential, s.parallel, s.ratio, s.independent_order, dev])
    cols = ["d", "N", "t", "T", "sequential", "parallel", "ratio", "independent_order",
            "qfim_deviation"]
    return Table(cols, rows, {"independent_order_is_proportional": True})


PI = math.pi

EXPERIMENTS: dict[str, Experiment] = {
    e.name: e
    for e in [
        Experiment(
            "qfim",
            {
                "B": Key(float, 1.0, "field magnitude"),
                "theta": Key(float, PI / 3, "polar angle"),
                "phi": Key(float, PI / 4, "azimuthal angle"),
                "T": Key(float, 1.0, "evolution time"),
            },
            run_qfim,
            "maximal QFIM, its (pseudo)inverse and the Cartesian MSE bound",
        ),
        Experiment(
            "compare-schemes",
            {
                "B": Key(float, 1.0, "field magnitude"),
                "N": Key(int, 100, "channel uses", 1),
                "t": Key(float, 0.05, "time per use"),
                "d": Key(int, None, "also report SU(d) sums", 2),
            },
            run_compare_schemes,
            "sequential vs parallel summed variances",
        ),
        Experiment(
            "gain-curve",
            {
                "T": Key(float, 5.0, "total time"),
                "N": Key(int, 100, "channel uses", 1),
                "t": Key(float, 0.05, "time per use (defaults to T/N)"),
                "dev_min": Key(float, 0.0, "smallest deviation"),
                "dev_max": Key(float, 0.6, "largest deviation"),
                "points": Key(int, 121, "grid points", 2),
            },
            run_gain_curve,
            "gain ratio gamma against the control deviation",
        ),
        Experiment(
            "monte-carlo",
            {
                "B": Key(float, 1.0, "true field magnitude"),
                "theta": Key(float, PI / 3, "true polar angle"),
                "phi": Key(float, PI / 4, "true azimuthal angle"),
                "control_B": Key(float, None, "control estimate magnitude, truth when unset"),
                "control_theta": Key(float, None, "control estimate polar angle, truth when unset"),
                "control_phi": Key(float, None, "control estimate azimuth, truth when unset"),
                "offset_bt": Key(float, PI / 4, "B~T of the validity-box offset"),
                "N": Key(int, 100, "channel uses", 1),
                "t": Key(float, 0.05, "time per use"),
                "n": Key(int, 100000, "repetitions per trial", 1),
                "trials": Key(int, 2000, "Monte Carlo trials", 1),
                "estimator": Key(str, "exact", "exact | additive"),
            },
            run_monte_carlo,
            "empirical MSE of the Bell-basis MLE against the Cramer-Rao reference",
        ),
        Experiment(
            "sud-scaling",
            {
                "d": Key(str, "2,3,4", "comma-separated dimensions"),
                "N": Key(int, 100, "channel uses", 1),
                "t": Key(float, 0.05, "time per use"),
            },
            run_sud_scaling,
            "SU(d) sums, ratios and numerical origin-QFIM check",
        ),
    ]
}
