"""Leader manipulation policies.

Objectives (all compare a candidate ``(l, f, c)`` accepted with probability ``p``):

* EU        ``u_new*p + u_fallback*(1-p)``
* longEU    ``u_new*(T-t0+1)*p + (u_fallback + u_best*(T-t0))*(1-p)``
* longEU+   ``(u_new - u_best)*p``

``p`` comes from the feasible-region model (PFR) or is fixed to 1/2 for the
minimal cost of a random (RWMC) or central (MWMC) weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .belief import (
    DEFAULT_SAMPLES,
    Comparison,
    FeasibleRegion,
    acceptance_batch,
    br_probability,
    centroid,
    features,
    sample_region,
)
from .game import Constraint, GameView, Manipulation, UtilityKind
from .omp import minimal_cost_given_weight

_VALUE_TIE = 1e-12
STUCK_TOL = 1e-12


class Objective(str, Enum):
    EU = "eu"
    LONG_EU = "longeu"
    LONG_EU_PLUS = "longeuplus"


class AcceptanceModel(str, Enum):
    PFR = "pfr"
    RWMC = "rwmc"
    MWMC = "mwmc"


BASELINES = ("nomanip", "oracle")


@dataclass(frozen=True)
class PolicySpec:
    objective: Objective | None = None
    acceptance: AcceptanceModel | None = None
    belief_kind: UtilityKind = UtilityKind.LINEAR
    baseline: str | None = None

    def __post_init__(self):
        if self.baseline is None:
            if self.objective is None or self.acceptance is None:
                raise ValueError("a learning policy needs an objective and an acceptance model")
            object.__setattr__(self, "objective", Objective(self.objective))
            object.__setattr__(self, "acceptance", AcceptanceModel(self.acceptance))
            object.__setattr__(self, "belief_kind", UtilityKind(self.belief_kind))
            if self.acceptance is not AcceptanceModel.PFR and self.belief_kind is not UtilityKind.LINEAR:
                raise ValueError("RWMC/MWMC require the linear belief model")
        elif self.baseline not in BASELINES:
            raise ValueError(f"unknown baseline {self.baseline!r}")

    @property
    def name(self) -> str:
        if self.baseline:
            return self.baseline
        name = f"{self.objective.value}+{self.acceptance.value}"
        if self.belief_kind is UtilityKind.COBB_DOUGLAS:
            name += "+cd"
        return name

    @property
    def rng_key(self) -> str:
        """Name of the randomness consumer; objectives share it so they see the same draws."""
        if self.baseline:
            return self.baseline
        return self.name.split("+", 1)[1]


def parse_policy(text: str) -> PolicySpec:
    """Parse ``longeu+pfr``, ``eu+mwmc``, ``longeuplus+mwmc``, ``longeu+pfr+cd``, ``nomanip`` ..."""
    text = text.strip().lower()
    if text in BASELINES:
        return PolicySpec(baseline=text)
    parts = text.split("+")
    if len(parts) not in (2, 3):
        raise ValueError(f"unknown policy {text!r}")
    kind = UtilityKind.LINEAR
    if len(parts) == 3:
        aliases = {"cd": UtilityKind.COBB_DOUGLAS, "cobb-douglas": UtilityKind.COBB_DOUGLAS,
                   "linear": UtilityKind.LINEAR}
        if parts[2] not in aliases:
            raise ValueError(f"unknown belief model in policy {text!r}")
        kind = aliases[parts[2]]
    try:
        return PolicySpec(Objective(parts[0]), AcceptanceModel(parts[1]), kind)
    except ValueError as exc:
        raise ValueError(f"unknown policy {text!r}: {exc}") from exc


@dataclass
class PolicyState:
    region: FeasibleRegion
    history: list[Comparison] = field(default_factory=list)
    current_best: Manipulation | None = None
    best_utility: float = -np.inf
    known_brs: dict[int, int] = field(default_factory=dict)
    last_weight: np.ndarray | None = None
    last_explored: bool = True
    stuck: bool = False
    t: int = 0
    n_samples: int = DEFAULT_SAMPLES
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))
    _cache_region: FeasibleRegion | None = field(default=None, repr=False)
    _cache_samples: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def initial(cls, dims: int, kind=UtilityKind.LINEAR, n_samples: int = DEFAULT_SAMPLES,
                rng=None) -> PolicyState:
        return cls(FeasibleRegion.simplex(dims, kind), n_samples=n_samples,
                   rng=np.random.default_rng(rng))

    def samples(self) -> np.ndarray:
        """Weights drawn from the current region; redrawn only when the region changes."""
        if self._cache_region is not self.region:
            self._cache_samples = sample_region(self.region, self.n_samples, self.rng)
            self._cache_region = self.region
        return self._cache_samples

    def exact(self) -> bool:
        return self.region.dims == 2

    def mc_samples(self):
        """Samples for probability estimates, or ``None`` when exact 2D formulas apply."""
        return None if self.exact() else self.samples()

    def offer_incumbent(self, m: Manipulation, u: float) -> bool:
        if self.current_best is None or u > self.best_utility:
            self.current_best, self.best_utility = m, u
            return True
        return False


# --- objective values --------------------------------------------------------

def objective_values(objective: Objective, u_new, p, fallback, u_best, t0: int, T: int):
    u_new, p, fallback = np.asarray(u_new, float), np.asarray(p, float), np.asarray(fallback, float)
    if objective is Objective.EU:
        return u_new * p + fallback * (1.0 - p)
    if objective is Objective.LONG_EU:
        return u_new * (T - t0 + 1) * p + (fallback + u_best * (T - t0)) * (1.0 - p)
    return (u_new - u_best) * p


def predicted_brs(state: PolicyState, view: GameView) -> list[int]:
    out = []
    for l in range(view.n_leader):
        if l in state.known_brs:
            out.append(state.known_brs[l])
        else:
            out.append(int(np.argmax(br_probability(state.region, view, l, state.mc_samples()))))
    return out


def incumbent_utility(state: PolicyState, view: GameView) -> float:
    """``u_best``; before any outcome it is the best predicted unmanipulated utility."""
    if state.current_best is not None:
        return state.best_utility
    brs = predicted_brs(state, view)
    return max(view.leader_utility(l, brs[l]) for l in range(view.n_leader))


def expected_fallback(state: PolicyState, view: GameView, l: int) -> float:
    """Leader utility of ``(l, BR(l))``, averaged over the region while ``BR(l)`` is unknown."""
    if l in state.known_brs:
        return view.leader_utility(l, state.known_brs[l])
    probs = br_probability(state.region, view, l, state.mc_samples())
    return float(probs @ (view.leader_payoffs[l] @ view.leader_weight))


def _fallback(state, view, m):
    _, fb = acceptance_batch(state.region, view, m.l, m.f, m.cost[None, :],
                             state.mc_samples(), state.known_brs.get(m.l))
    return float(fb[0])


def eu_value(state: PolicyState, view: GameView, m: Manipulation, p_accept: float,
             fallback: float | None = None) -> float:
    if fallback is None:
        fallback = _fallback(state, view, m)
    u_new = view.leader_utility(m.l, m.f, m.cost)
    return float(objective_values(Objective.EU, u_new, p_accept, fallback, 0.0, 1, 1))


def longeu_value(state: PolicyState, view: GameView, m: Manipulation, p_accept: float,
                 t0: int, T: int, fallback: float | None = None) -> float:
    if not 1 <= t0 <= T:
        raise ValueError("need 1 <= t0 <= T")
    if fallback is None:
        fallback = _fallback(state, view, m)
    u_new = view.leader_utility(m.l, m.f, m.cost)
    u_best = incumbent_utility(state, view)
    return float(objective_values(Objective.LONG_EU, u_new, p_accept, fallback, u_best, t0, T))


def longeu_plus_value(state: PolicyState, view: GameView, m: Manipulation, p_accept: float) -> float:
    u_new = view.leader_utility(m.l, m.f, m.cost)
    return float((u_new - incumbent_utility(state, view)) * p_accept)


# --- PFR -----------------------------------------------------------------------

def candidate_costs(view: GameView, weights: np.ndarray, l: int, f: int,
                    kind: UtilityKind = UtilityKind.LINEAR, known_br: int | None = None) -> np.ndarray:
    """Minimal-cost candidates at ``(l, f)`` for a batch of hypothetical follower weights.

    C1: one single-objective cost per objective and weight. C2: one greedy box
    fill per objective (that objective spent first, the rest by cost ratio).
    Always includes the zero cost. Rows are unique and sorted.
    """
    dims = view.dims
    zero = np.zeros((1, dims))
    if known_br is not None and f == known_br:
        return zero
    weights = np.atleast_2d(weights)
    feats = features(view.follower_payoffs[l], kind)
    scores = weights @ feats.T
    target = scores[:, known_br] if known_br is not None else scores.max(axis=1)
    gap = target - scores[:, f]
    live = gap > 0
    if not live.any():
        return zero
    w, gap = weights[live], gap[live]
    ub = view.cost_upper_bound(l, f)
    blocks = [zero]

    if kind is UtilityKind.COBB_DOUGLAS:
        x = view.follower_payoffs[l, f]
        for d in range(dims):
            ok = w[:, d] > 0
            with np.errstate(over="ignore"):
                c_d = x[d] * np.expm1(gap[ok] / w[ok, d])
            c_d = c_d[np.isfinite(c_d) & (c_d <= ub[d])]
            block = np.zeros((len(c_d), dims))
            block[:, d] = c_d
            blocks.append(block)
    elif view.constraint is Constraint.C1:
        for d in range(dims):
            ok = w[:, d] > 0
            block = np.zeros((int(ok.sum()), dims))
            block[:, d] = gap[ok] / w[ok, d]
            blocks.append(block)
    else:
        wl = view.leader_weight
        with np.errstate(divide="ignore"):
            ratio = np.where(w > 0, wl[None, :] / w, np.inf)
        for d in range(dims):
            r = ratio.copy()
            r[:, d] = -np.inf
            order = np.argsort(r, axis=1, kind="stable")
            c = np.zeros_like(w)
            remaining = gap.copy()
            rows = np.arange(len(w))
            for k in range(dims):
                idx = order[:, k]
                w_k = w[rows, idx]
                with np.errstate(divide="ignore", invalid="ignore"):
                    need = np.where(w_k > 0, remaining / w_k, 0.0)
                take = np.clip(np.minimum(ub[idx], need), 0.0, None)
                c[rows, idx] = take
                remaining = remaining - take * w_k
            blocks.append(c[remaining <= 1e-9])
    out = np.vstack(blocks)
    return np.unique(out, axis=0)


def pfr_candidates(state: PolicyState, view: GameView, samples=None) -> list[Manipulation]:
    if samples is None:
        samples = state.samples()
    out = []
    for l in range(view.n_leader):
        for f in range(view.n_follower):
            costs = candidate_costs(view, samples, l, f, state.region.kind, state.known_brs.get(l))
            out.extend(Manipulation(l, f, c) for c in costs)
    if state.current_best is not None and not any(state.current_best.same_as(m) for m in out):
        out.append(state.current_best)
    return out


def _argmax_tiebreak(values, cost_sums, ls, fs, incumbent=None) -> int:
    """Highest value; ties go to the incumbent, then smaller total cost, then lower ``l``, ``f``."""
    values = np.asarray(values)
    top = values.max()
    tied = np.flatnonzero(values >= top - _VALUE_TIE * max(1.0, abs(top)))
    not_inc = np.ones(len(values), bool) if incumbent is None else ~np.asarray(incumbent, bool)
    order = np.lexsort((np.asarray(fs)[tied], np.asarray(ls)[tied], np.asarray(cost_sums)[tied], not_inc[tied]))
    return int(tied[order[0]])


def decide_pfr(state: PolicyState, view: GameView, t0: int, T: int, objective: Objective) -> Manipulation:
    """Maximise the objective over the candidate set, with acceptance from the region model."""
    objective = Objective(objective)
    samples = state.samples()
    mc = state.mc_samples()
    u_best = incumbent_utility(state, view)
    values, sums, ls, fs, costs, incs = [], [], [], [], [], []
    inc = state.current_best
    for l in range(view.n_leader):
        known = state.known_brs.get(l)
        for f in range(view.n_follower):
            c = candidate_costs(view, samples, l, f, state.region.kind, known)
            is_inc = np.zeros(len(c), bool)
            if inc is not None and inc.l == l and inc.f == f:
                hit = np.all(c == inc.cost, axis=1)
                if hit.any():
                    is_inc = hit
                else:
                    c = np.vstack([c, inc.cost])
                    is_inc = np.append(is_inc, True)
            p, fb = acceptance_batch(state.region, view, l, f, c, mc, known)
            p = np.where(is_inc, 1.0, p)  # the incumbent is known to be accepted
            u_new = (view.leader_payoffs[l, f] - c) @ view.leader_weight
            values.append(objective_values(objective, u_new, p, fb, u_best, t0, T))
            sums.append(c.sum(axis=1))
            ls.append(np.full(len(c), l))
            fs.append(np.full(len(c), f))
            costs.append(c)
            incs.append(is_inc)
    values, sums = np.concatenate(values), np.concatenate(sums)
    ls, fs, costs = np.concatenate(ls), np.concatenate(fs), np.vstack(costs)
    i = _argmax_tiebreak(values, sums, ls, fs, np.concatenate(incs))
    return Manipulation(ls[i], fs[i], costs[i])


# --- RWMC / MWMC -------------------------------------------------------------

def _random_weight(state: PolicyState) -> np.ndarray:
    return sample_region(state.region, 1, state.rng)[0]


def decide_rwmc(state: PolicyState, view: GameView, t0: int, T: int, objective: Objective,
                use_centroid: bool, rng=None) -> Manipulation:
    """Minimal costs of one weight, each assumed accepted with probability 1/2, against the incumbent."""
    objective = Objective(objective)
    if rng is not None:
        state.rng = np.random.default_rng(rng)
    kind = state.region.kind
    if use_centroid:
        w_mid = centroid(state.region, samples=None if state.exact() else state.samples())
        if (state.last_weight is not None and not state.last_explored
                and np.allclose(w_mid, state.last_weight, rtol=0.0, atol=STUCK_TOL)):
            state.stuck = True
        state.last_weight = w_mid
        w_hat = _random_weight(state) if state.stuck else w_mid
    else:
        w_hat = _random_weight(state)

    u_best = incumbent_utility(state, view)
    p = 0.5
    best = None
    for l in range(view.n_leader):
        fallback = expected_fallback(state, view, l)
        br_hat = int(np.argmax(features(view.follower_payoffs[l], kind) @ w_hat))
        for f in range(view.n_follower):
            c = minimal_cost_given_weight(view, w_hat, l, f, kind)
            if c is None:
                continue
            u_new = view.leader_utility(l, f, c)
            v = float(objective_values(objective, u_new, p, fallback, u_best, t0, T))
            key = (v, -float(c.sum()), -l, -f)
            if best is None or key[0] > best[0][0] + _VALUE_TIE or (
                    abs(key[0] - best[0][0]) <= _VALUE_TIE and key[1:] > best[0][1:]):
                best = (key, Manipulation(l, f, c), f != br_hat and bool(np.any(c > 0)))

    if state.current_best is not None:
        u_inc = state.best_utility
        inc_value = {Objective.EU: u_inc, Objective.LONG_EU: u_inc * (T - t0 + 1),
                     Objective.LONG_EU_PLUS: 0.0}[objective]
        if best is None or best[0][0] < inc_value:
            state.last_explored = False
            return state.current_best
    _, m, manipulates = best
    state.last_explored = manipulates
    if manipulates:
        state.stuck = False
    return m


# --- closed form, baseline ----------------------------------------------------

@dataclass(frozen=True)
class TwoDRowGeometry:
    """Single-row 2D geometry of one ``(l, f)`` pair: ``alpha = dy - dx`` and per-objective cost bounds."""

    alpha: float
    c_min: tuple[float, float]
    c_max: tuple[float, float]


def closed_form_2d_cost(geom: TwoDRowGeometry, d: int) -> float:
    """Stationary point of ``(c_max - c)(c - c_min)/(a + c)`` with ``a = alpha`` (d=0) or ``-alpha`` (d=1)."""
    if d not in (0, 1):
        raise ValueError("objective index must be 0 or 1")
    a = geom.alpha if d == 0 else -geom.alpha
    lo, hi = geom.c_min[d], geom.c_max[d]
    radicand = (a + lo) * (a + hi)
    if radicand < 0:
        raise ValueError(f"invalid geometry bounds: radicand {radicand} < 0")
    return -a + float(np.sqrt(radicand))


def row_geometry(view: GameView, region: FeasibleRegion, l: int, f: int, br: int,
                 u_best: float) -> TwoDRowGeometry:
    """Geometry of ``(l, f)`` against ``BR(l) = br`` under the current interval and incumbent."""
    x = view.follower_payoffs[l, br]
    y = view.follower_payoffs[l, f]
    alpha = (y[0] - y[1]) - (x[0] - x[1])
    w_lo, w_hi = region.bounds()
    c_min = (
        max(0.0, (x[1] - y[1]) / w_hi - alpha) if w_hi > 0 else np.inf,
        max(0.0, (x[0] - y[0]) / (1.0 - w_lo) + alpha) if w_lo < 1 else np.inf,
    )
    u_free = view.leader_utility(l, f)
    wl = view.leader_weight
    c_max = tuple((u_free - u_best) / wl[d] if wl[d] > 0 else np.inf for d in range(2))
    return TwoDRowGeometry(float(alpha), c_min, c_max)


def no_manipulation_baseline(state: PolicyState, view: GameView) -> Manipulation:
    missing = [l for l in range(view.n_leader) if l not in state.known_brs]
    if missing:
        raise ValueError(f"baseline needs known best responses, missing {missing}")
    utils = [view.leader_utility(l, state.known_brs[l]) for l in range(view.n_leader)]
    l = int(np.argmax(utils))
    return Manipulation(l, state.known_brs[l], np.zeros(view.dims))


def decide(spec: PolicySpec, state: PolicyState, view: GameView, t0: int, T: int) -> Manipulation:
    if spec.baseline == "nomanip":
        return no_manipulation_baseline(state, view)
    if spec.baseline is not None:
        raise ValueError(f"{spec.baseline} is driven by the harness")
    if spec.acceptance is AcceptanceModel.PFR:
        return decide_pfr(state, view, t0, T, spec.objective)
    return decide_rwmc(state, view, t0, T, spec.objective,
                       use_centroid=spec.acceptance is AcceptanceModel.MWMC)
