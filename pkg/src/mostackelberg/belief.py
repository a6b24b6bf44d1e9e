"""The leader's belief about the follower weight: a polytope in the simplex.

Every observed preference ``x >= y`` becomes a halfspace ``phi(x - y) . w >= 0``
where ``phi`` is the identity (linear follower model) or the componentwise log
(Cobb-Douglas model). For two objectives the region is kept as an interval of
``w_1`` and all probabilities are computed exactly; above that we sample the
polytope with hit-and-run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from .game import GameView, Manipulation, UtilityKind

log = logging.getLogger(__name__)

STRICT_SHRINK = 1e-12
DEGENERATE_WIDTH = 1e-6
ACCEPT_TOL = 1e-12
_ZERO_NORMAL = 1e-15

DEFAULT_SAMPLES = 512
BURN_IN = 100
THINNING = 5


class DegenerateBeliefError(RuntimeError):
    """No interior point could be found even after relaxing the constraints."""


@dataclass(frozen=True)
class Comparison:
    """``z=True``: the follower weakly prefers ``preferred``; ``z=False``: strictly prefers ``other``."""

    preferred: np.ndarray
    other: np.ndarray
    z: bool = True


def features(payoffs, kind: UtilityKind) -> np.ndarray:
    x = np.asarray(payoffs, dtype=float)
    if UtilityKind(kind) is UtilityKind.COBB_DOUGLAS:
        if np.any(x <= 0):
            raise ValueError("Cobb-Douglas belief needs strictly positive payoffs")
        return np.log(x)
    return x


@dataclass(frozen=True)
class FeasibleRegion:
    dims: int
    normals: np.ndarray = None
    strict: np.ndarray = None
    kind: UtilityKind = UtilityKind.LINEAR
    slack: float = 0.0
    _keys: frozenset = field(default=frozenset(), repr=False, compare=False)

    def __post_init__(self):
        normals = np.zeros((0, self.dims)) if self.normals is None else np.asarray(self.normals, float)
        strict = np.zeros(len(normals), bool) if self.strict is None else np.asarray(self.strict, bool)
        normals = normals.reshape(-1, self.dims)
        normals.flags.writeable = False
        strict.flags.writeable = False
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "strict", strict)
        object.__setattr__(self, "kind", UtilityKind(self.kind))

    @classmethod
    def simplex(cls, dims: int, kind=UtilityKind.LINEAR) -> FeasibleRegion:
        return cls(dims, kind=kind)

    @classmethod
    def from_interval(cls, lo: float, hi: float) -> FeasibleRegion:
        """Two-objective region ``lo <= w_1 <= hi``."""
        return cls(2, np.array([[1.0 - lo, -lo], [hi - 1.0, hi]]))

    def __len__(self) -> int:
        return len(self.normals)

    def with_constraints(self, normals, strict) -> FeasibleRegion:
        """Add halfspaces ``n . w >= 0`` (``> 0`` if strict); duplicates and zero normals are dropped."""
        keys = set(self._keys)
        new_n, new_s = [], []
        for n, s in zip(np.asarray(normals, float).reshape(-1, self.dims), strict):
            norm = np.linalg.norm(n)
            if norm < _ZERO_NORMAL:
                continue
            n = n / norm
            key = (tuple(np.round(n, 12)), bool(s))
            if key in keys:
                continue
            keys.add(key)
            new_n.append(n)
            new_s.append(bool(s))
        if not new_n:
            return self
        return FeasibleRegion(
            self.dims,
            np.vstack([self.normals, np.array(new_n)]),
            np.concatenate([self.strict, np.array(new_s, bool)]),
            self.kind,
            self.slack,
            frozenset(keys),
        )

    def with_comparisons(self, comparisons) -> FeasibleRegion:
        normals, strict = [], []
        for cmp in comparisons:
            x = features(cmp.preferred, self.kind)
            y = features(cmp.other, self.kind)
            if cmp.z:
                normals.append(x - y)
                strict.append(False)
            else:
                normals.append(y - x)
                strict.append(True)
        if not normals:
            return self
        return self.with_constraints(np.array(normals), strict)

    def relaxed(self, slack: float) -> FeasibleRegion:
        return FeasibleRegion(self.dims, self.normals, self.strict, self.kind, slack, self._keys)

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w, float)
        if np.any(w < -tol) or abs(w.sum() - 1.0) > tol:
            return False
        return bool(np.all(self.normals @ w >= -self.slack - tol))

    # --- two-objective interval --------------------------------------------

    @cached_property
    def interval(self) -> tuple[float, float]:
        """Raw ``[w_min, w_max]`` of ``w_1`` (may be inverted when empty). D=2 only."""
        if self.dims != 2:
            raise ValueError("interval is only defined for two objectives")
        lo, hi = 0.0, 1.0
        for n, s in zip(self.normals, self.strict):
            slope = n[0] - n[1]
            rhs = -self.slack - n[1]
            if abs(slope) < _ZERO_NORMAL:
                if n[1] < -self.slack:
                    return 1.0, 0.0
                continue
            bound = rhs / slope
            if slope > 0:
                lo = max(lo, bound + STRICT_SHRINK if s else bound)
            else:
                hi = min(hi, bound - STRICT_SHRINK if s else bound)
        return lo, hi

    # --- general polytope ------------------------------------------------

    @cached_property
    def halfspaces(self) -> tuple[np.ndarray, np.ndarray]:
        """``A v <= b`` over ``v = w[:-1]`` (the last weight is ``1 - sum(v)``)."""
        d = self.dims - 1
        a_simplex = np.vstack([-np.eye(d), np.ones((1, d))])
        b_simplex = np.concatenate([np.zeros(d), [1.0]])
        if len(self.normals):
            a_cmp = -(self.normals[:, :-1] - self.normals[:, -1:])
            b_cmp = self.normals[:, -1] + self.slack
            return np.vstack([a_simplex, a_cmp]), np.concatenate([b_simplex, b_cmp])
        return a_simplex, b_simplex

    @cached_property
    def chebyshev(self) -> tuple[np.ndarray, float]:
        """Centre and radius of the largest inscribed ball; radius < 0 means empty."""
        a, b = self.halfspaces
        d = self.dims - 1
        norms = np.linalg.norm(a, axis=1)
        res = linprog(
            c=np.concatenate([np.zeros(d), [-1.0]]),
            A_ub=np.hstack([a, norms[:, None]]),
            b_ub=b,
            bounds=[(None, None)] * d + [(None, 1.0)],
            method="highs",
        )
        if res.status != 0:
            return np.full(d, np.nan), -np.inf
        return res.x[:d], float(res.x[d])

    def is_empty(self) -> bool:
        if self.dims == 1:
            return False
        if self.dims == 2:
            lo, hi = self.interval
            return lo > hi
        return self.chebyshev[1] < 0

    def repaired(self) -> FeasibleRegion:
        """Relax every constraint by a doubling slack until the region is non-empty."""
        return self._repaired

    @cached_property
    def _repaired(self) -> FeasibleRegion:
        if not self.is_empty():
            return self
        eps = max(self.slack, 1e-9)
        for _ in range(64):
            candidate = self.relaxed(eps)
            if not candidate.is_empty():
                log.warning("belief region empty (numerical noise); relaxed constraints by %.3g", eps)
                return candidate
            eps *= 2.0
        raise DegenerateBeliefError("belief region stays empty after relaxation")

    def bounds(self) -> tuple[float, float]:
        """Repaired ``[w_min, w_max]`` for two objectives."""
        lo, hi = self.repaired().interval
        return lo, hi

    def summary(self) -> dict:
        out = {"constraints": len(self), "slack": self.slack, "kind": self.kind.value}
        if self.dims == 2:
            out["interval"] = list(self.bounds())
        return out

    def to_dict(self) -> dict:
        return {
            **self.summary(),
            "normals": self.normals.tolist(),
            "strict": self.strict.tolist(),
        }


def region_from_history(history, model_kind=UtilityKind.LINEAR, dims: int | None = None) -> FeasibleRegion:
    history = list(history)
    if dims is None:
        if not history:
            raise ValueError("dims is required for an empty history")
        dims = len(history[0].preferred)
    return FeasibleRegion.simplex(dims, model_kind).with_comparisons(history)


# --- sampling --------------------------------------------------------------

def _hit_and_run(a: np.ndarray, b: np.ndarray, start: np.ndarray, n: int,
                 rng: np.random.Generator, burn_in: int, thin: int) -> np.ndarray:
    v = start.copy()
    d = len(v)
    out = np.empty((n, d))
    total = burn_in + n * thin
    directions = rng.standard_normal((total, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    uniforms = rng.random(total)
    kept = 0
    for step in range(total):
        u = directions[step]
        au = a @ u
        room = np.maximum(b - a @ v, 0.0)
        pos = au > 1e-14
        neg = au < -1e-14
        t_hi = np.min(room[pos] / au[pos]) if pos.any() else 0.0
        t_lo = np.max(room[neg] / au[neg]) if neg.any() else 0.0
        v = v + (t_lo + uniforms[step] * (t_hi - t_lo)) * u
        if step >= burn_in and (step - burn_in) % thin == thin - 1:
            out[kept] = v
            kept += 1
    return out


def _lift(v: np.ndarray) -> np.ndarray:
    w = np.hstack([v, 1.0 - v.sum(axis=1, keepdims=True)])
    return np.clip(w, 0.0, None) / np.clip(w, 0.0, None).sum(axis=1, keepdims=True)


def sample_region(region: FeasibleRegion, n: int, rng_seed=None,
                  burn_in: int = BURN_IN, thin: int = THINNING) -> np.ndarray:
    """``n`` approximately uniform weights from the region, shape ``(n, dims)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng_seed)
    region = region.repaired()
    if region.dims == 1:
        return np.ones((n, 1))
    if region.dims == 2:
        lo, hi = region.interval
        if hi - lo < DEGENERATE_WIDTH:
            w1 = np.full(n, 0.5 * (lo + hi))
        else:
            w1 = lo + (hi - lo) * rng.random(n)
        return np.column_stack([w1, 1.0 - w1])
    centre, radius = region.chebyshev
    if not np.isfinite(radius) or radius < 0:
        raise DegenerateBeliefError("no interior point in belief region")
    if radius < 1e-9:
        return np.repeat(_lift(centre[None, :]), n, axis=0)
    a, b = region.halfspaces
    return _lift(_hit_and_run(a, b, centre, n, rng, burn_in, thin))


def centroid(region: FeasibleRegion, rng_seed=None, n: int = DEFAULT_SAMPLES, samples=None) -> np.ndarray:
    if region.dims == 2:
        lo, hi = region.bounds()
        mid = 0.5 * (lo + hi)
        return np.array([mid, 1.0 - mid])
    if samples is None:
        samples = sample_region(region, n, rng_seed)
    return np.asarray(samples).mean(axis=0)


# --- probabilities ---------------------------------------------------------

def _clip_interval(lo, hi, a, b):
    return np.maximum(lo, a), np.minimum(hi, b)


def _halfline_bounds(normals: np.ndarray, tol: float):
    """Bounds on ``w_1`` from ``n . (w_1, 1 - w_1) >= -tol`` for a batch of normals."""
    slope = normals[..., 0] - normals[..., 1]
    rhs = -tol - normals[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = rhs / slope
    flat = np.abs(slope) < _ZERO_NORMAL
    lo = np.where(slope > 0, bound, -np.inf)
    hi = np.where(slope < 0, bound, np.inf)
    # flat constraints are all-or-nothing
    dead = flat & (normals[..., 1] < -tol)
    lo = np.where(flat, np.where(dead, np.inf, -np.inf), lo)
    hi = np.where(flat, np.where(dead, -np.inf, np.inf), hi)
    return lo, hi


def _br_cells_2d(feats: np.ndarray, a: float, b: float) -> np.ndarray:
    """Per follower action, the sub-interval of ``[a, b]`` where it is the (lowest-index) argmax."""
    n_f = len(feats)
    cells = np.empty((n_f, 2))
    for r in range(n_f):
        lo, hi = a, b
        for q in range(n_f):
            if q == r:
                continue
            diff = feats[r] - feats[q]
            if np.linalg.norm(diff) < _ZERO_NORMAL:
                if q < r:
                    lo, hi = 1.0, 0.0
                continue
            l_q, h_q = _halfline_bounds(diff[None, :], 0.0)
            lo, hi = max(lo, float(l_q[0])), min(hi, float(h_q[0]))
        cells[r] = lo, hi
    return cells


def _weights_2d(region: FeasibleRegion):
    lo, hi = region.bounds()
    return lo, hi, hi - lo < ACCEPT_TOL


def acceptance_batch(region: FeasibleRegion, view: GameView, l: int, f: int, costs,
                     samples=None, known_br: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Acceptance probability and rejection-conditional fallback utility for many costs at ``(l, f)``.

    The fallback is the expected leader utility of ``(l, BR(l))`` over the part of
    the region that would reject; once ``BR(l)`` is known it is that utility exactly.
    With ``samples=None`` and two objectives everything is computed exactly.
    """
    costs = np.atleast_2d(np.asarray(costs, float))
    kind = region.kind
    offered = features(view.follower_payoffs[l, f] + costs, kind)
    feats = features(view.follower_payoffs[l], kind)
    u_leader = view.leader_payoffs[l] @ view.leader_weight
    others = [known_br] if known_br is not None else [r for r in range(view.n_follower) if r != f]
    others = [r for r in others if r != f]

    if samples is None and region.dims == 2:
        a, b, point = _weights_2d(region)
        lo = np.full(len(costs), -np.inf)
        hi = np.full(len(costs), np.inf)
        for r in others:
            l_r, h_r = _halfline_bounds(offered - feats[r], ACCEPT_TOL)
            lo, hi = np.maximum(lo, l_r), np.minimum(hi, h_r)
        if point:
            mid = 0.5 * (a + b)
            p = ((lo <= mid) & (mid <= hi)).astype(float)
        else:
            acc_lo, acc_hi = _clip_interval(lo, hi, a, b)
            p = np.clip(acc_hi - acc_lo, 0.0, None) / (b - a)
        if known_br is not None:
            return p, np.full(len(costs), u_leader[known_br])
        cells = _br_cells_2d(feats, a, b)
        if point:
            mid = 0.5 * (a + b)
            r_mid = int(np.argmax(feats @ np.array([mid, 1.0 - mid])))
            return p, np.full(len(costs), u_leader[r_mid])
        acc_lo, acc_hi = _clip_interval(lo, hi, a, b)
        cell_len = np.clip(cells[:, 1] - cells[:, 0], 0.0, None)
        inter = np.clip(np.minimum(cells[None, :, 1], acc_hi[:, None])
                        - np.maximum(cells[None, :, 0], acc_lo[:, None]), 0.0, None)
        rejected = np.clip(cell_len[None, :] - inter, 0.0, None)
        mass = rejected.sum(axis=1)
        uncond = float(cell_len @ u_leader / cell_len.sum()) if cell_len.sum() > 0 else float(u_leader.max())
        with np.errstate(invalid="ignore", divide="ignore"):
            fb = np.where(mass > _ZERO_NORMAL, (rejected @ u_leader) / mass, uncond)
        return p, fb

    if samples is None:
        samples = sample_region(region, DEFAULT_SAMPLES, 0)
    samples = np.asarray(samples, float)
    scores = samples @ feats.T
    if known_br is not None:
        best = scores[:, known_br]
        u_fb = np.full(len(samples), u_leader[known_br])
    else:
        best = scores.max(axis=1)
        u_fb = u_leader[np.argmax(scores, axis=1)]
    acc = samples @ offered.T >= best[:, None] - ACCEPT_TOL
    p = acc.mean(axis=0)
    rej = ~acc
    count = rej.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        fb = np.where(count > 0, (u_fb @ rej) / np.maximum(count, 1), u_fb.mean())
    return p, fb


def accept_probability(region: FeasibleRegion, view: GameView, m: Manipulation,
                       samples=None, known_br: int | None = None) -> float:
    p, _ = acceptance_batch(region, view, m.l, m.f, m.cost[None, :], samples, known_br)
    return float(p[0])


def br_probability(region: FeasibleRegion, view: GameView, l: int, samples=None) -> np.ndarray:
    """Probability that each follower action is the best response at ``l``."""
    feats = features(view.follower_payoffs[l], region.kind)
    if samples is None and region.dims == 2:
        a, b, point = _weights_2d(region)
        if point:
            mid = 0.5 * (a + b)
            out = np.zeros(len(feats))
            out[int(np.argmax(feats @ np.array([mid, 1.0 - mid])))] = 1.0
            return out
        cells = _br_cells_2d(feats, a, b)
        length = np.clip(cells[:, 1] - cells[:, 0], 0.0, None)
        return length / length.sum()
    if samples is None:
        samples = sample_region(region, DEFAULT_SAMPLES, 0)
    idx = np.argmax(np.asarray(samples) @ feats.T, axis=1)
    return np.bincount(idx, minlength=len(feats)) / len(idx)


def predicted_br(region: FeasibleRegion, view: GameView, l: int, samples=None) -> int:
    return int(np.argmax(br_probability(region, view, l, samples)))


def informative(region: FeasibleRegion, view: GameView, m: Manipulation,
                samples=None, known_br: int | None = None) -> bool:
    """True iff the offer beats ``BR(l)`` in some objective and loses in another."""
    br = known_br if known_br is not None else predicted_br(region, view, m.l, samples)
    diff = view.follower_payoffs[m.l, m.f] + m.cost - view.follower_payoffs[m.l, br]
    return bool(np.any(diff > ACCEPT_TOL) and np.any(diff < -ACCEPT_TOL))
