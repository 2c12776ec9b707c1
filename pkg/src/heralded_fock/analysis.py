"""Parameter sweeps and figure-level results.

Everything here reduces to scanning the heralding model over (g, eta)
grids: inverting the ML estimate to find which click count heralds a
target photon number, mapping Mandel Q over the plane with infeasible
regions marked, extracting constant-herald-probability contours, and
pulling the loss threshold below which no sub-Poissonian heralded state
is reachable at a required preparation rate.

The per-cell work shares one click table per eta value (the detector
response does not depend on g), so a 200x200 sweep stays in the
tens-of-seconds range.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .closed_form import cond_moments_multimode
from .detector import DetectorConfig, click_table, det_response_band
from .errors import NumericalAccuracyError, ThresholdNotFoundError, UndefinedQError
from .herald import herald_state, mandel_q, ml_estimate, ml_mse, posterior
from .source import SourceConfig

DEFAULT_GRID_STEPS = 200
DEFAULT_G_MAX = 1.5
CONTOUR_LEVELS = (0.01, 0.05, 0.10, 0.20)


@dataclass(frozen=True)
class QMapCell:
    """One (g, eta) cell: heralding feasibility and, when feasible, the
    click count, Mandel Q and herald probability.  ``error`` carries the
    message of a per-cell numerical failure instead of aborting the sweep."""

    feasible: bool
    n_i: int | None = None
    q: float | None = None
    herald_prob: float | None = None
    error: str | None = None


@dataclass(frozen=True)
class QMapGrid:
    """Rectangular (g, eta) sweep for a fixed target ML photon number.

    ``cells[i][j]`` corresponds to ``eta_axis[i]`` and ``g_axis[j]``.
    """

    target: int
    mu: int
    det_stages: int
    g_axis: np.ndarray
    eta_axis: np.ndarray
    cells: list[list[QMapCell]] = field(repr=False)

    def __post_init__(self):
        g = np.asarray(self.g_axis, dtype=float)
        e = np.asarray(self.eta_axis, dtype=float)
        if np.any(np.diff(g) <= 0) or np.any(np.diff(e) <= 0):
            raise ValueError("grid axes must be strictly increasing")
        if len(self.cells) != e.size or any(len(r) != g.size for r in self.cells):
            raise ValueError("cell matrix does not match the axes")
        object.__setattr__(self, "g_axis", g)
        object.__setattr__(self, "eta_axis", e)

    def herald_field(self) -> np.ndarray:
        """Herald probability per cell, 0 where infeasible or errored."""
        out = np.zeros((self.eta_axis.size, self.g_axis.size))
        for i, row in enumerate(self.cells):
            for j, c in enumerate(row):
                if c.feasible and c.herald_prob is not None:
                    out[i, j] = c.herald_prob
        return out


def grid_axis(upper: float, steps: int) -> np.ndarray:
    """`steps` points evenly spaced on (0, upper]; the open end avoids the
    unphysical g=0 / eta=0 corner."""
    if steps < 2 or upper <= 0:
        raise ValueError("need steps >= 2 and a positive upper bound")
    return upper * np.arange(1, steps + 1) / steps


def _sweep_depth(bins: int, eta: float, t_max: float, mean_pairs: float) -> int:
    """Pair-number cutoff covering every posterior mode plus tail room.

    The weight sequence peaks no later than k ~ bins / (1 - (1-eta) t) and
    then decays at least geometrically.
    """
    denom = max(1.0 - (1.0 - eta) * t_max, 1e-3)
    return min(int(3.0 * (bins + mean_pairs) / denom) + 200, 20_000)


def _log_prior(src: SourceConfig, k_max: int) -> np.ndarray:
    """log P_OPA(k) for k = 0..k_max (vectorized negative-binomial)."""
    t = src.thermal_ratio
    mu = src.modes
    k = np.arange(1, k_max + 1)
    steps = np.log(t) + np.log((k + mu - 1) / k)
    lp = np.empty(k_max + 1)
    lp[0] = mu * math.log1p(-t)
    lp[1:] = lp[0] + np.cumsum(steps)
    return lp


def _ml_scan(
    det: DetectorConfig, src: SourceConfig, depth: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(ml_estimate, herald_prob) arrays over n_i = 0..M in one pass."""
    M = det.bins
    if depth is None:
        depth = _sweep_depth(M, det.efficiency, src.thermal_ratio, src.mean_pairs)
    D = click_table(det, depth)
    prior = np.exp(_log_prior(src, depth))
    W = D[:, : M + 1] * prior[:, None]
    ml = W.argmax(axis=0)
    herald = W.sum(axis=0)
    return ml, herald


def invert_ml(det: DetectorConfig, src: SourceConfig, target: int) -> int | None:
    """Click count n_i whose ML estimate equals `target`, or None.

    When several click counts qualify, the one with the largest herald
    probability is returned (the practically relevant herald).
    """
    if target < 0:
        raise ValueError("target must be nonnegative")
    ml, herald = _ml_scan(det, src)
    candidates = np.nonzero((ml == target) & (herald > 0.0))[0]
    if candidates.size == 0:
        return None
    return int(candidates[np.argmax(herald[candidates])])


def _q_map_row(
    eta: float, g_axis: np.ndarray, det_stages: int, mu: int, target: int
) -> list[QMapCell]:
    det = DetectorConfig(det_stages, eta)
    M = det.bins
    t_max = math.tanh(g_axis[-1]) ** 2
    mean_max = mu * math.sinh(g_axis[-1]) ** 2
    depth = _sweep_depth(M, eta, t_max, mean_max)
    D = click_table(det, depth)[:, : M + 1]
    row = []
    for g in g_axis:
        src = SourceConfig(g, mu)
        W = D * np.exp(_log_prior(src, depth))[:, None]
        ml = W.argmax(axis=0)
        herald = W.sum(axis=0)
        candidates = np.nonzero((ml == target) & (herald > 0.0))[0]
        if candidates.size == 0:
            row.append(QMapCell(feasible=False))
            continue
        n_i = int(candidates[np.argmax(herald[candidates])])
        try:
            mean, var = cond_moments_multimode(det, src, n_i)
            q = mandel_q(mean, var)
        except (NumericalAccuracyError, UndefinedQError) as exc:
            row.append(QMapCell(feasible=True, n_i=n_i, error=str(exc)))
            continue
        row.append(
            QMapCell(
                feasible=True,
                n_i=n_i,
                q=q,
                herald_prob=float(min(herald[n_i], 1.0)),
            )
        )
    return row


def q_map(
    det_stages: int,
    mu: int,
    target: int,
    g_axis: np.ndarray | None = None,
    eta_axis: np.ndarray | None = None,
    workers: int = 1,
) -> QMapGrid:
    """Mandel-Q map over a (g, eta) grid at a fixed target ML photon number.

    Cells are independent; rows may be evaluated by several workers, and
    the assembled grid is identical regardless of worker count.
    """
    if g_axis is None:
        g_axis = grid_axis(DEFAULT_G_MAX, DEFAULT_GRID_STEPS)
    if eta_axis is None:
        eta_axis = grid_axis(1.0, DEFAULT_GRID_STEPS)
    g_axis = np.asarray(g_axis, dtype=float)
    eta_axis = np.asarray(eta_axis, dtype=float)
    if g_axis[0] <= 0 or g_axis[-1] > 2.0 or eta_axis[0] <= 0 or eta_axis[-1] > 1.0:
        raise ValueError("axes must lie within g in (0, 2] and eta in (0, 1]")

    def run(eta: float) -> list[QMapCell]:
        return _q_map_row(eta, g_axis, det_stages, mu, target)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(run, eta_axis))
    else:
        cells = [run(eta) for eta in eta_axis]
    return QMapGrid(
        target=target,
        mu=mu,
        det_stages=det_stages,
        g_axis=g_axis,
        eta_axis=eta_axis,
        cells=cells,
    )


def threshold_eta(grid: QMapGrid, rate: float) -> float:
    """Smallest eta at which a sub-Poissonian heralded state (Q < 0) is
    reachable while heralding at least as often as `rate` per pulse.

    Scans each g column upward in eta; the Q = 0 crossing is interpolated
    linearly between adjacent eta grid lines when both straddling cells
    qualify on rate, and the minimum over g columns is returned.
    """
    if not (0.0 < rate < 1.0):
        raise ValueError("rate must lie in (0, 1)")
    best = math.inf
    for j in range(grid.g_axis.size):
        prev = None  # (eta, q) of the previous qualifying cell
        for i, eta in enumerate(grid.eta_axis):
            c = grid.cells[i][j]
            ok = c.feasible and c.q is not None and c.herald_prob >= rate
            if ok and c.q < 0.0:
                if prev is not None and prev[1] >= 0.0:
                    e0, q0 = prev
                    eta_star = e0 + (eta - e0) * q0 / (q0 - c.q)
                else:
                    eta_star = eta
                best = min(best, eta_star)
                break
            prev = (eta, c.q) if ok else None
    if not math.isfinite(best):
        raise ThresholdNotFoundError(
            f"no grid cell heralds at rate >= {rate} with Q < 0"
        )
    return best


def herald_prob_contours(
    grid: QMapGrid, levels: tuple[float, ...] = CONTOUR_LEVELS
) -> dict[float, list[np.ndarray]]:
    """Constant herald-probability polylines in (g, eta) coordinates.

    Marching squares on the herald-probability field (infeasible cells
    count as zero); each polyline is an (n, 2) array of (g, eta) points.
    """
    from skimage import measure

    field_ = grid.herald_field()
    idx_eta = np.arange(grid.eta_axis.size)
    idx_g = np.arange(grid.g_axis.size)
    out: dict[float, list[np.ndarray]] = {}
    for level in levels:
        polylines = []
        for contour in measure.find_contours(field_, level):
            g = np.interp(contour[:, 1], idx_g, grid.g_axis)
            eta = np.interp(contour[:, 0], idx_eta, grid.eta_axis)
            polylines.append(np.column_stack([g, eta]))
        out[level] = polylines
    return out


def uncertainty_ratio(det: DetectorConfig, src: SourceConfig, n_i: int) -> tuple[int, float | None]:
    """(n_s_ml, sqrt(mse)/sqrt(n_s_ml)) for one herald; the ratio compares
    the heralded spread to a Poisson field with the same mean and is None
    when the ML estimate is zero with residual spread."""
    post = posterior(det, src, n_i)
    ml = ml_estimate(post)
    mse = ml_mse(post, ml)
    if ml == 0:
        return ml, 0.0 if mse == 0.0 else None
    return ml, math.sqrt(mse) / math.sqrt(ml)


def figure_data(which: str, **params) -> dict:
    """Numeric tables behind the headline result figures.

    fig2 - TMD response bands; fig3 - heralded vs Poisson PMF;
    fig4 - normalized uncertainty ratios; fig5/fig6 - Q maps with
    herald-probability contours (single-mode / five-mode).
    """
    if which == "fig2":
        stages = params.pop("stages", 5)
        etas = params.pop("etas", (1.0, 0.66, 0.33))
        n_max = params.pop("n_max", 100)
        _reject_unknown(params)
        rows = []
        for eta in etas:
            det = DetectorConfig(stages, eta)
            for N, mean, std in det_response_band(det, n_max):
                rows.append((eta, N, mean, std))
        return {"columns": ["eta", "N", "mean_clicks", "std_clicks"], "rows": rows}

    if which == "fig3":
        stages = params.pop("stages", 5)
        eta = params.pop("eta", 0.66)
        g = params.pop("g", 1.0)
        mu = params.pop("mu", 1)
        n_i = params.pop("n_i", 4)
        _reject_unknown(params)
        det = DetectorConfig(stages, eta)
        src = SourceConfig(g, mu)
        state = herald_state(det, src, n_i)
        lam = float(state.ml_estimate)
        hi = state.posterior.offset + state.posterior.masses.size
        rows = []
        for n in range(hi):
            p_her = (
                float(state.posterior.masses[n - n_i]) if n >= n_i else 0.0
            )
            p_poi = math.exp(-lam + n * math.log(lam) - math.lgamma(n + 1)) if lam > 0 else float(n == 0)
            rows.append((n, p_her, p_poi))
        return {
            "columns": ["n_s", "p_heralded", "p_poisson"],
            "rows": rows,
            "ml_estimate": state.ml_estimate,
        }

    if which == "fig4":
        stages = params.pop("stages", 5)
        etas = params.pop("etas", (0.33, 0.66, 1.0))
        gains = params.pop("gains", (0.75, 1.0))
        mu = params.pop("mu", 1)
        n_i_max = params.pop("n_i_max", 8)
        _reject_unknown(params)
        rows = []
        for g in gains:
            src = SourceConfig(g, mu)
            for eta in etas:
                det = DetectorConfig(stages, eta)
                for n_i in range(n_i_max + 1):
                    ml, ratio = uncertainty_ratio(det, src, n_i)
                    rows.append((eta, g, n_i, ml, ratio))
        return {"columns": ["eta", "g", "n_i", "n_s_ml", "ratio"], "rows": rows}

    if which in ("fig5", "fig6"):
        stages = params.pop("stages", 5)
        target = params.pop("target", 5)
        mu = params.pop("mu", 1 if which == "fig5" else 5)
        steps = params.pop("steps", DEFAULT_GRID_STEPS)
        g_max = params.pop("g_max", DEFAULT_G_MAX)
        workers = params.pop("workers", 1)
        _reject_unknown(params)
        grid = q_map(
            stages,
            mu,
            target,
            g_axis=grid_axis(g_max, steps),
            eta_axis=grid_axis(1.0, steps),
            workers=workers,
        )
        return qmap_to_dict(grid)

    raise ValueError(f"unknown figure id {which!r}; expected fig2..fig6")


def _reject_unknown(params: dict):
    if params:
        raise ValueError(f"unknown figure parameters: {sorted(params)}")


def qmap_to_dict(grid: QMapGrid) -> dict:
    """JSON-ready serialization of a Q map plus herald-probability contours."""
    cells = [
        [
            {
                "feasible": c.feasible,
                "n_i": c.n_i,
                "q": c.q,
                "herald_prob": c.herald_prob,
                **({"error": c.error} if c.error else {}),
            }
            for c in row
        ]
        for row in grid.cells
    ]
    contours = {
        str(level): [poly.tolist() for poly in polys]
        for level, polys in herald_prob_contours(grid).items()
    }
    return {
        "target": grid.target,
        "mu": grid.mu,
        "det_stages": grid.det_stages,
        "g_axis": grid.g_axis.tolist(),
        "eta_axis": grid.eta_axis.tolist(),
        "cells": cells,
        "herald_prob_contours": contours,
    }
