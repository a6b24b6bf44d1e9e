"""Optimal manipulation problem (OMP) with a known follower weight.

Under linear utilities the per-pair problem is an LP whose optimum sits on a
corner: a single-objective cost under C1, or "fill some objectives to their cap,
top up one more" under C2. ``solve_omp`` enumerates those corners directly;
``brute_force_omp`` is a grid search kept independent of that structure for
testing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .game import (
    ACCEPT_SLACK,
    Constraint,
    Game,
    GameView,
    Manipulation,
    UtilityKind,
    best_response,
    utilities,
)

_TIE = 1e-12


@dataclass(frozen=True)
class OmpSolution:
    manipulation: Manipulation
    leader_utility: float
    beneficial: bool
    approximate: bool = False

    def to_dict(self) -> dict:
        return {
            **self.manipulation.to_dict(),
            "leader_utility": self.leader_utility,
            "beneficial": self.beneficial,
            "approximate": self.approximate,
        }


def _features(payoffs: np.ndarray, kind: UtilityKind) -> np.ndarray:
    return np.log(payoffs) if kind is UtilityKind.COBB_DOUGLAS else payoffs


def minimal_cost_given_weight(view: GameView, w, l: int, f: int,
                              kind: UtilityKind = UtilityKind.LINEAR) -> np.ndarray | None:
    """Cheapest cost (for the leader) making ``f`` as good as ``BR_w(l)`` under ``w``.

    Returns ``None`` when no admissible cost exists (C2 box too small, or every
    objective able to close the gap has zero follower weight).
    """
    w = np.asarray(w, dtype=float)
    kind = UtilityKind(kind)
    feats = _features(view.follower_payoffs[l], kind)
    scores = feats @ w
    br = int(np.argmax(scores))
    gap = scores[br] - scores[f]
    dims = view.dims
    if f == br or gap <= 0:
        return np.zeros(dims)

    wl = view.leader_weight
    ub = view.cost_upper_bound(l, f)
    x = view.follower_payoffs[l, f]

    if kind is UtilityKind.COBB_DOUGLAS:
        # single-objective top-up in log space: w_d*log(x_d + c_d) = w_d*log(x_d) + gap
        best, best_loss = None, np.inf
        for d in range(dims):
            if w[d] <= 0:
                continue
            c_d = x[d] * np.expm1(gap / w[d])
            if not np.isfinite(c_d) or c_d > ub[d]:
                continue
            if wl[d] * c_d < best_loss - _TIE:
                best_loss = wl[d] * c_d
                best = np.zeros(dims)
                best[d] = c_d
        return best

    if view.constraint is Constraint.C1:
        best, best_loss = None, np.inf
        for d in range(dims):
            if w[d] <= 0:
                continue
            c_d = gap / w[d]
            if wl[d] * c_d < best_loss - _TIE:
                best_loss = wl[d] * c_d
                best = np.zeros(dims)
                best[d] = c_d
        return best

    # C2: min wl.c  s.t.  w.c = gap, 0 <= c <= ub  -- fractional knapsack by ratio
    if gap > float(w @ ub) + ACCEPT_SLACK:
        return None
    useful = [d for d in range(dims) if w[d] > 0]
    order = sorted(useful, key=lambda d: (wl[d] / w[d], d))
    c = np.zeros(dims)
    remaining = gap
    for d in order:
        if remaining <= 0:
            break
        take = min(ub[d], remaining / w[d])
        c[d] = take
        remaining -= take * w[d]
    if remaining > ACCEPT_SLACK:
        return None
    return c


def _better(u: float, zero: bool, best_u: float, best_zero: bool) -> bool:
    if u > best_u + _TIE:
        return True
    return abs(u - best_u) <= _TIE and zero and not best_zero


def solve_omp(game: Game) -> OmpSolution:
    if game.follower_model.kind is not UtilityKind.LINEAR:
        raise ValueError("solve_omp requires a linear follower utility; use reference_solution")
    view = game.view
    w = game.follower_model.weight
    best: tuple[float, bool, Manipulation] | None = None
    for l in range(game.n_leader):
        for f in range(game.n_follower):
            c = minimal_cost_given_weight(view, w, l, f)
            if c is None:
                continue
            u = view.leader_utility(l, f, c)
            zero = not np.any(c > 0)
            if best is None or _better(u, zero, best[0], best[1]):
                best = (u, zero, Manipulation(l, f, c))
    u, zero, m = best
    return OmpSolution(m, u, beneficial=not zero)


def _accepts(game: Game, l: int, costs: np.ndarray, f: int) -> np.ndarray:
    """IC check for a batch of costs at ``(l, f)`` under the true follower model."""
    u_br = game.follower_utilities(l).max()
    offered = game.follower_payoffs[l, f] + costs
    if game.follower_model.kind is UtilityKind.COBB_DOUGLAS:
        ok = np.all(offered > 0, axis=1)
        out = np.zeros(len(costs), dtype=bool)
        out[ok] = utilities(game.follower_model, offered[ok]) >= u_br - ACCEPT_SLACK
        return out
    return utilities(game.follower_model, offered) >= u_br - ACCEPT_SLACK


def _grid(upper: float, step: float, max_points: int = 400_000) -> np.ndarray:
    n = min(int(np.ceil(upper / step)), max_points)
    return np.arange(n + 1) * step


def _edge_costs(game: Game, l: int, f: int, step: float) -> np.ndarray:
    """Single-objective and C2 box-edge costs on a grid of resolution ``step``."""
    dims = game.dims
    rows = [np.zeros((1, dims))]
    if game.constraint is Constraint.C1:
        # any useful single-objective cost is at most (utility spread)/w_d
        spread = 2.0 * np.abs(game.follower_payoffs).max() + 1.0
        for d in range(dims):
            w_d = game.follower_model.weight[d]
            cap = spread / w_d if w_d > 0 else 0.0
            g = _grid(cap, step)
            block = np.zeros((len(g), dims))
            block[:, d] = g
            rows.append(block)
        return np.vstack(rows)
    ub = np.clip(game.leader_payoffs[l, f], 0.0, None)
    for d in range(dims):
        others = [j for j in range(dims) if j != d]
        g = np.append(np.arange(int(np.floor(ub[d] / step)) + 1) * step, ub[d])
        for r in range(len(others) + 1):
            for full in itertools.combinations(others, r):
                block = np.zeros((len(g), dims))
                block[:, d] = g
                for j in full:
                    block[:, j] = ub[j]
                rows.append(block)
    return np.vstack(rows)


def brute_force_omp(game: Game, grid_step: float = 0.01) -> OmpSolution:
    """Grid search over single-objective / box-edge costs with the true follower model."""
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    best: tuple[float, bool, Manipulation] | None = None
    for l in range(game.n_leader):
        for f in range(game.n_follower):
            costs = _edge_costs(game, l, f, grid_step)
            ok = _accepts(game, l, costs, f)
            if not ok.any():
                continue
            costs = costs[ok]
            u = (game.leader_payoffs[l, f] - costs) @ game.leader_weight
            i = int(np.argmax(u))
            zero = not np.any(costs[i] > 0)
            if best is None or _better(float(u[i]), zero, best[0], best[1]):
                best = (float(u[i]), zero, Manipulation(l, f, costs[i]))
    u, zero, m = best
    return OmpSolution(m, u, beneficial=not zero)


def _box_grid_omp(game: Game, points: int) -> OmpSolution:
    """Full-box grid for non-linear followers; costs capped by single-objective needs."""
    dims = game.dims
    view = game.view
    best: tuple[float, bool, Manipulation] | None = None
    for l in range(game.n_leader):
        for f in range(game.n_follower):
            # any optimum spends at most the single-objective need in each objective
            need = np.array([_single_objective_need(game, l, f, d) for d in range(dims)])
            caps = np.minimum(need, view.cost_upper_bound(l, f))
            caps = np.where(np.isfinite(caps), caps, 0.0)  # objectives that cannot flip f alone
            axes = [np.linspace(0.0, caps[d], points) if caps[d] > 0 else np.zeros(1) for d in range(dims)]
            costs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)
            ok = _accepts(game, l, costs, f)
            if not ok.any():
                continue
            costs = costs[ok]
            u = (game.leader_payoffs[l, f] - costs) @ game.leader_weight
            i = int(np.argmax(u))
            zero = not np.any(costs[i] > 0)
            if best is None or _better(float(u[i]), zero, best[0], best[1]):
                best = (float(u[i]), zero, Manipulation(l, f, costs[i]))
    u, zero, m = best
    return OmpSolution(m, u, beneficial=not zero, approximate=True)


def _single_objective_need(game: Game, l: int, f: int, d: int) -> float:
    """Smallest cost in objective ``d`` alone that the true follower accepts (bisection)."""
    e = np.zeros(game.dims)
    e[d] = 1.0
    if _accepts(game, l, np.zeros((1, game.dims)), f)[0]:
        return 0.0
    hi = 1.0
    while not _accepts(game, l, (hi * e)[None, :], f)[0]:
        hi *= 2.0
        if hi > 1e6:
            return np.inf
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _accepts(game, l, (mid * e)[None, :], f)[0]:
            hi = mid
        else:
            lo = mid
    return hi


def reference_solution(game: Game, points: int = 201) -> OmpSolution:
    """Regret reference: exact OMP for linear followers, a box grid otherwise."""
    if game.follower_model.kind is UtilityKind.LINEAR:
        return solve_omp(game)
    return _box_grid_omp(game, points if game.dims <= 2 else max(11, int(round(points ** (2 / game.dims)))))


def play_safe_cost(game: Game, l: int, f: int) -> np.ndarray:
    """Cost that makes ``f`` dominate ``BR(l)`` in every objective, so any weight accepts."""
    br = best_response(game, l)
    return np.clip(game.follower_payoffs[l, br] - game.follower_payoffs[l, f], 0.0, None)
