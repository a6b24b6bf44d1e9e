"""Single-episode simulation: decide, respond, learn, and account regret."""

from __future__ import annotations

import csv
import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .belief import DEFAULT_SAMPLES, Comparison
from .game import Game, GameView, Manipulation, best_response, follower_respond
from .omp import OmpSolution, reference_solution
from .policies import PolicySpec, PolicyState, decide, parse_policy


@dataclass(frozen=True)
class RoundRecord:
    t: int
    manipulation: Manipulation
    follower_action: int
    accepted: bool
    leader_utility: float
    instant_regret: float
    cum_regret: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            **self.manipulation.to_dict(),
            "follower_action": self.follower_action,
            "accepted": self.accepted,
            "utility": self.leader_utility,
            "regret": self.instant_regret,
            "cum_regret": self.cum_regret,
        }


@dataclass
class Trace:
    game_id: str
    policy: str
    seed: int
    reference: OmpSolution
    records: list[RoundRecord] = field(default_factory=list)
    final_region: dict = field(default_factory=dict)
    best_utilities: list[float] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.records)

    def header(self) -> dict:
        return {
            "type": "header",
            "game_id": self.game_id,
            "policy": self.policy,
            "seed": self.seed,
            "T": self.horizon,
            "reference": self.reference.to_dict(),
            "final_region": self.final_region,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header())]
        lines += [json.dumps(r.to_dict()) for r in self.records]
        return "\n".join(lines) + "\n"

    def csv_rows(self) -> list[list]:
        rows = []
        for r in self.records:
            rows.append([self.seed, self.game_id, self.policy, r.t, r.manipulation.l, r.manipulation.f,
                         *[repr(float(c)) for c in r.manipulation.cost], int(r.accepted),
                         repr(r.leader_utility), repr(r.instant_regret), repr(r.cum_regret)])
        return rows


def csv_header(dims: int) -> list[str]:
    return ["seed", "game_id", "policy", "t", "l", "f", *[f"cost_{d}" for d in range(dims)],
            "accepted", "utility", "regret", "cum_regret"]


def write_traces_csv(traces, path) -> None:
    traces = list(traces)
    if not traces:
        return
    dims = len(traces[0].records[0].manipulation.cost)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(dims))
        for tr in traces:
            writer.writerows(tr.csv_rows())


def cumulative_regret(trace: Trace) -> float:
    return float(sum(r.instant_regret for r in trace.records))


def episode_rng(seed: int, game_id: str, policy: str) -> np.random.Generator:
    """Per-episode generator keyed on (seed, game, policy) so every cell is reproducible on its own."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(game_id.encode()), zlib.crc32(policy.encode())]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def seed_known_brs(state: PolicyState, game: Game) -> None:
    """Reveal every best response to the leader, as if each action had been probed once."""
    view = game.view
    for l in range(game.n_leader):
        br = best_response(game, l)
        state.known_brs[l] = br
        comps = [Comparison(view.follower_payoffs[l, br], view.follower_payoffs[l, r])
                 for r in range(game.n_follower) if r != br]
        state.history.extend(comps)
        state.region = state.region.with_comparisons(comps)
        state.offer_incumbent(Manipulation(l, br, np.zeros(game.dims)), view.leader_utility(l, br))


def observe_outcome(state: PolicyState, view: GameView, m: Manipulation, action: int) -> float:
    """Fold one observed response into the state; returns the realised leader utility."""
    l, f = m.l, m.f
    xf = view.follower_payoffs[l]
    offered = xf[f] + m.cost
    if action == f:
        comps = [Comparison(offered, xf[r]) for r in range(view.n_follower) if r != f]
        if m.is_zero:
            state.known_brs.setdefault(l, f)
        realised = m
        u = view.leader_utility(l, f, m.cost)
    else:
        comps = [Comparison(xf[action], xf[r]) for r in range(view.n_follower) if r != action]
        comps.append(Comparison(offered, xf[action], z=False))
        state.known_brs.setdefault(l, action)
        realised = Manipulation(l, action, np.zeros(view.dims))
        u = view.leader_utility(l, action)
    state.history.extend(comps)
    state.region = state.region.with_comparisons(comps)
    state.offer_incumbent(realised, u)
    state.t += 1
    return u


def run_episode(game: Game, spec: PolicySpec | str, T: int | None = None, seed: int = 0,
                n_samples: int = DEFAULT_SAMPLES, preseed_brs: bool = False,
                reference: OmpSolution | None = None, state: PolicyState | None = None) -> Trace:
    if isinstance(spec, str):
        spec = parse_policy(spec)
    T = game.horizon if T is None else int(T)
    if T < 1:
        raise ValueError("T must be >= 1")
    view = game.view
    if reference is None:
        reference = reference_solution(game)
    if state is None:
        rng = episode_rng(seed, game.name, spec.rng_key)
        state = PolicyState.initial(game.dims, spec.belief_kind, n_samples, rng)
        if preseed_brs or spec.baseline == "nomanip":
            seed_known_brs(state, game)

    trace = Trace(game.name, spec.name, seed, reference)
    u_star = reference.leader_utility
    cum = 0.0
    for t in range(1, T + 1):
        if spec.baseline == "oracle":
            m = reference.manipulation
        else:
            m = decide(spec, state, view, t, T)
        view.check(m)
        action = follower_respond(game, m)
        u = observe_outcome(state, view, m, action)
        regret = u_star - u
        cum += regret
        trace.records.append(RoundRecord(t, m, action, action == m.f, u, regret, cum))
        trace.best_utilities.append(state.best_utility)
    trace.final_region = state.region.summary()
    return trace
