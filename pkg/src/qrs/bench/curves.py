"""Analytic data behind the resource and uncertainty-ratio figures.

Every emitter returns a list of :class:`CurvePoint`; :func:`write_curves`
serializes them as ``x,series,y`` CSV sorted by ``(series, x)``.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import bounds
from ..errors import DomainError, ParameterError
from ..verify import required_k

UNBOUNDED = "unbounded"
INAPPLICABLE = "inapplicable"


@dataclass(frozen=True, order=True)
class CurvePoint:
    series: str
    x: float
    y: float | str


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if math.isinf(v):
        return UNBOUNDED
    return format(float(v), ".17g")


def curves_csv(points: list[CurvePoint]) -> str:
    buf = io.StringIO()
    buf.write("x,series,y\n")
    for p in sorted(points, key=lambda p: (p.series, p.x)):
        buf.write(f"{fmt(p.x)},{p.series},{fmt(p.y)}\n")
    return buf.getvalue()


def write_curves(points: list[CurvePoint], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(curves_csv(points))
    return path


def read_curves(path) -> list[tuple[float, str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "x,series,y":
            raise ValueError(f"unexpected header {header!r}")
        for line in fh:
            x, series, y = line.rstrip("\n").split(",")
            rows.append((float(x), series, y))
    return rows


def _increasing(values, name):
    vals = list(values)
    if not vals:
        raise ParameterError(f"{name} grid is empty")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ParameterError(f"{name} grid must be strictly increasing")
    return vals


def log_grid(lo: float, hi: float, per_decade: int = 10, integer: bool = False) -> list:
    n = int(round(math.log10(hi / lo) * per_decade)) + 1
    vals = np.logspace(math.log10(lo), math.log10(hi), n)
    if integer:
        return sorted({int(round(v)) for v in vals})
    return [float(v) for v in vals]


# -- qubit cost --------------------------------------------------------------

DEFAULT_FIG3_SERIES = ((1e-3, 0.0), (1e-5, 0.0), (1e-3, "eps/10"))
DEFAULT_EPSILON_GRID = [round(0.01 * i, 2) for i in range(1, 51)]


def _resolve_Delta(spec, eps: float) -> float:
    if isinstance(spec, str):
        if not spec.startswith("eps/"):
            raise ParameterError(f"Delta spec {spec!r} must be a number or 'eps/<n>'")
        return eps / float(spec[4:])
    return float(spec)


def series_label(delta, Delta_spec) -> str:
    return f"delta={delta:g};Delta={Delta_spec if isinstance(Delta_spec, str) else format(Delta_spec, 'g')}"


def emit_fig3(series=DEFAULT_FIG3_SERIES, epsilon_grid=None) -> list[CurvePoint]:
    """Rows ``(epsilon, series, 8 k)`` for each ``(delta, Delta)`` series."""
    grid = _increasing(epsilon_grid or DEFAULT_EPSILON_GRID, "epsilon")
    out = []
    for delta, Delta_spec in series:
        label = series_label(delta, Delta_spec)
        for eps in grid:
            Delta = _resolve_Delta(Delta_spec, eps)
            if not Delta < eps / 3:
                warnings.warn(f"skipping eps={eps}: Delta={Delta} >= eps/3", RuntimeWarning, stacklevel=2)
                out.append(CurvePoint(label, eps, INAPPLICABLE))
                continue
            out.append(CurvePoint(label, eps, 8 * required_k(eps, delta, Delta)))
    return out


# -- client bound vs M ------------------------------------------------------

DEFAULT_FIG5_EPSILONS = [0.0, 0.001, 0.01, 0.05, 0.1]
DEFAULT_M_GRID = log_grid(1, 1e4, 10, integer=True)


def emit_fig5(epsilon_list=None, M_grid=None, t: float = 1.0) -> list[CurvePoint]:
    """Rows ``(M, eps series, client_upper)`` at fixed ``t``."""
    eps_list = epsilon_list if epsilon_list is not None else DEFAULT_FIG5_EPSILONS
    grid = _increasing(M_grid or DEFAULT_M_GRID, "M")
    out = []
    for eps in eps_list:
        label = f"eps={eps:g}"
        for M in grid:
            out.append(CurvePoint(label, M, bounds.client_upper(bounds.BoundInputs(eps, int(M), t))))
    return out


# -- asymmetry ratios --------------------------------------------------------

DEFAULT_N_GRID = [8 * k for k in log_grid(1e3, 1e10, 4, integer=True)]
DEFAULT_N_SERIES = [8e6, 8e8, 8e10]
DEFAULT_M_SERIES = [10, 100, 1000]


def _ratio(kind: str, eps: float, M: int, t: float, s_tilde: float) -> float:
    b = bounds.BoundInputs(eps, int(M), t, s_tilde)
    if kind == "standard":
        return bounds.asymmetry_ratio(b)
    if kind == "hoeffding":
        return bounds.hoeffding_ratio(b)
    raise ParameterError(f"unknown ratio kind {kind!r}")


def ratio_point(kind: str, N: float, M: int, delta: float, Delta: float, t: float = 1.0,
                s_tilde: float = 2.0) -> float | str:
    """Asymmetry ratio at qubit budget ``N = 8k``; ``inapplicable`` when eps >= 1/2."""
    k = int(round(N / 8))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        eps = bounds.epsilon_from_resources(k, Delta, delta)
    try:
        return _ratio(kind, eps, M, t, s_tilde)
    except DomainError:
        return INAPPLICABLE


def emit_ratio_curves(kind: str, sweep: str, delta: float = 1e-6, Delta: float = 0.0,
                      grid=None, series=None, t: float = 1.0, s_tilde: float = 2.0) -> list[CurvePoint]:
    """Ratio curves swept over ``N`` (series over ``M``) or over ``M`` (series over ``N``)."""
    out = []
    if sweep == "N":
        xs = _increasing(grid or DEFAULT_N_GRID, "N")
        for M in series or DEFAULT_M_SERIES:
            label = f"M={int(M)}"
            out += [CurvePoint(label, N, ratio_point(kind, N, M, delta, Delta, t, s_tilde)) for N in xs]
    elif sweep == "M":
        xs = _increasing(grid or DEFAULT_M_GRID, "M")
        for N in series or DEFAULT_N_SERIES:
            label = f"N={N:g}"
            out += [CurvePoint(label, M, ratio_point(kind, N, M, delta, Delta, t, s_tilde)) for M in xs]
    else:
        raise ParameterError("sweep must be 'N' or 'M'")
    return out


def emit_fig6_fig7(delta: float = 1e-6, Delta: float = 0.0, sweep: str = "N", grid=None, series=None,
                   t: float = 1.0) -> list[CurvePoint]:
    return emit_ratio_curves("standard", sweep, delta, Delta, grid, series, t)


def emit_fig8_fig9(s_tilde: float = 2.0, delta: float = 1e-6, Delta: float = 0.0, sweep: str = "N",
                   grid=None, series=None, t: float = 1.0) -> list[CurvePoint]:
    bounds._check_s_tilde(s_tilde)
    return emit_ratio_curves("hoeffding", sweep, delta, Delta, grid, series, t, s_tilde)


def emit_figure(fig: int, opts: dict | None = None) -> list[CurvePoint]:
    """Dispatch by figure number; ``opts`` holds emitter keyword overrides."""
    opts = dict(opts or {})
    if fig == 3:
        if "series" in opts:
            opts["series"] = [tuple(s) for s in opts["series"]]
        return emit_fig3(**opts)
    if fig == 5:
        return emit_fig5(**opts)
    if fig in (6, 7):
        return emit_fig6_fig7(sweep="N" if fig == 6 else "M", **opts)
    if fig in (8, 9):
        return emit_fig8_fig9(sweep="N" if fig == 8 else "M", **opts)
    raise ParameterError(f"no emitter for figure {fig}")
