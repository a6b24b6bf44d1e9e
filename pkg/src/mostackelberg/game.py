"""Game model for repeated two-player multi-objective Stackelberg games.

Actions are 0-indexed everywhere. Payoff tensors have shape
``(n_leader_actions, n_follower_actions, n_objectives)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

WEIGHT_TOL = 1e-9
ACCEPT_SLACK = 1e-9


class UtilityKind(str, Enum):
    LINEAR = "linear"
    COBB_DOUGLAS = "cobb-douglas"


class Constraint(str, Enum):
    C1 = "c1"  # c >= 0
    C2 = "c2"  # 0 <= c <= X^L(l, f)


class GameFormatError(ValueError):
    pass


def as_weight(w) -> np.ndarray:
    """Validate a simplex weight and return it as a read-only float array."""
    arr = np.array(w, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"weight must be a non-empty vector, got shape {arr.shape}")
    if np.any(arr < -WEIGHT_TOL):
        raise ValueError(f"weight has negative components: {arr}")
    if abs(arr.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weight must sum to 1, got {arr.sum()!r}")
    arr = np.clip(arr, 0.0, None)
    arr.flags.writeable = False
    return arr


def _as_payoffs(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    if arr.ndim != 3:
        raise ValueError(f"payoff tensor must be [leader][follower][objective], got shape {arr.shape}")
    if 0 in arr.shape:
        raise ValueError("payoff tensor must have at least one action per player and one objective")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class UtilityModel:
    kind: UtilityKind
    weight: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", UtilityKind(self.kind))
        object.__setattr__(self, "weight", as_weight(self.weight))


def utility(model: UtilityModel, payoff) -> float:
    x = np.asarray(payoff, dtype=float)
    if model.kind is UtilityKind.LINEAR:
        return float(model.weight @ x)
    if np.any(x <= 0):
        raise ValueError(f"Cobb-Douglas utility needs strictly positive payoffs, got {x}")
    return float(np.prod(x ** model.weight))


def utilities(model: UtilityModel, payoffs: np.ndarray) -> np.ndarray:
    """Vectorised :func:`utility` over the last axis."""
    x = np.asarray(payoffs, dtype=float)
    if model.kind is UtilityKind.LINEAR:
        return x @ model.weight
    if np.any(x <= 0):
        raise ValueError("Cobb-Douglas utility needs strictly positive payoffs")
    return np.exp(np.log(x) @ model.weight)


@dataclass(frozen=True)
class Manipulation:
    """A leader decision: play ``l``, offer ``cost`` for the follower to play ``f``."""

    l: int
    f: int
    cost: np.ndarray

    def __post_init__(self):
        c = np.array(self.cost, dtype=float)
        c.flags.writeable = False
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "l", int(self.l))
        object.__setattr__(self, "f", int(self.f))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.cost > 0)

    def same_as(self, other: Manipulation | None, tol: float = 0.0) -> bool:
        if other is None:
            return False
        return (self.l == other.l and self.f == other.f
                and bool(np.all(np.abs(self.cost - other.cost) <= tol)))

    def to_dict(self) -> dict:
        return {"l": self.l, "f": self.f, "cost": [float(v) for v in self.cost]}


@dataclass(frozen=True)
class GameView:
    """Everything the leader is allowed to see: no follower utility model."""

    leader_payoffs: np.ndarray
    follower_payoffs: np.ndarray
    leader_weight: np.ndarray
    constraint: Constraint

    @property
    def n_leader(self) -> int:
        return self.leader_payoffs.shape[0]

    @property
    def n_follower(self) -> int:
        return self.leader_payoffs.shape[1]

    @property
    def dims(self) -> int:
        return self.leader_payoffs.shape[2]

    def leader_utility(self, l: int, f: int, cost=None) -> float:
        x = self.leader_payoffs[l, f]
        if cost is not None:
            x = x - cost
        return float(self.leader_weight @ x)

    def cost_upper_bound(self, l: int, f: int) -> np.ndarray:
        """Per-objective cost cap for ``(l, f)``; ``inf`` under C1."""
        if self.constraint is Constraint.C1:
            return np.full(self.dims, np.inf)
        return np.clip(self.leader_payoffs[l, f], 0.0, None)

    def check(self, m: Manipulation) -> None:
        if not (0 <= m.l < self.n_leader and 0 <= m.f < self.n_follower):
            raise ValueError(f"action pair out of range: {(m.l, m.f)}")
        if m.cost.shape != (self.dims,):
            raise ValueError(f"cost must have {self.dims} components, got {m.cost.shape}")
        if np.any(m.cost < 0):
            raise ValueError(f"negative manipulation cost: {m.cost}")
        if np.any(m.cost > self.cost_upper_bound(m.l, m.f) + 1e-9):
            raise ValueError(f"cost {m.cost} violates C2 bound at {(m.l, m.f)}")


@dataclass(frozen=True)
class Game:
    leader_payoffs: np.ndarray
    follower_payoffs: np.ndarray
    leader_weight: np.ndarray
    follower_model: UtilityModel
    constraint: Constraint = Constraint.C1
    horizon: int = 40
    name: str = "game"
    _view: GameView = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xl = _as_payoffs(self.leader_payoffs)
        xf = _as_payoffs(self.follower_payoffs)
        if xl.shape != xf.shape:
            raise ValueError(f"payoff tensors disagree in shape: {xl.shape} vs {xf.shape}")
        wl = as_weight(self.leader_weight)
        if wl.size != xl.shape[2] or self.follower_model.weight.size != xl.shape[2]:
            raise ValueError("weight dimension does not match payoff dimension")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.follower_model.kind is UtilityKind.COBB_DOUGLAS and np.any(xf <= 0):
            raise ValueError("Cobb-Douglas follower needs strictly positive follower payoffs")
        object.__setattr__(self, "leader_payoffs", xl)
        object.__setattr__(self, "follower_payoffs", xf)
        object.__setattr__(self, "leader_weight", wl)
        object.__setattr__(self, "constraint", Constraint(self.constraint))
        object.__setattr__(self, "_view", GameView(xl, xf, wl, Constraint(self.constraint)))

    @property
    def view(self) -> GameView:
        return self._view

    @property
    def dims(self) -> int:
        return self.leader_payoffs.shape[2]

    @property
    def n_leader(self) -> int:
        return self.leader_payoffs.shape[0]

    @property
    def n_follower(self) -> int:
        return self.leader_payoffs.shape[1]

    def with_constraint(self, constraint) -> Game:
        return Game(self.leader_payoffs, self.follower_payoffs, self.leader_weight,
                    self.follower_model, Constraint(constraint), self.horizon, self.name)

    def follower_utilities(self, l: int) -> np.ndarray:
        return utilities(self.follower_model, self.follower_payoffs[l])


def best_response(game: Game, l: int) -> int:
    # np.argmax returns the first maximiser: ties go to the lowest index
    return int(np.argmax(game.follower_utilities(l)))


def follower_respond(game: Game, m: Manipulation) -> int:
    br = best_response(game, m.l)
    if m.f == br:
        return br
    offered = game.follower_payoffs[m.l, m.f] + m.cost
    if game.follower_model.kind is UtilityKind.COBB_DOUGLAS and np.any(offered <= 0):
        return br
    u_offer = utility(game.follower_model, offered)
    u_br = utility(game.follower_model, game.follower_payoffs[m.l, br])
    return m.f if u_offer >= u_br - ACCEPT_SLACK else br


# --- JSON game files -------------------------------------------------------

def game_to_dict(game: Game) -> dict:
    return {
        "name": game.name,
        "dims": game.dims,
        "leader_actions": game.n_leader,
        "follower_actions": game.n_follower,
        "leader_payoffs": game.leader_payoffs.tolist(),
        "follower_payoffs": game.follower_payoffs.tolist(),
        "leader_weight": game.leader_weight.tolist(),
        "follower_weight": game.follower_model.weight.tolist(),
        "follower_utility": game.follower_model.kind.value,
        "constraint": game.constraint.value,
        "horizon": game.horizon,
    }


def game_from_dict(data: dict) -> Game:
    required = ("dims", "leader_actions", "follower_actions", "leader_payoffs",
                "follower_payoffs", "leader_weight", "follower_weight")
    missing = [k for k in required if k not in data]
    if missing:
        raise GameFormatError(f"game file is missing fields: {', '.join(missing)}")
    try:
        game = Game(
            leader_payoffs=data["leader_payoffs"],
            follower_payoffs=data["follower_payoffs"],
            leader_weight=data["leader_weight"],
            follower_model=UtilityModel(data.get("follower_utility", "linear"), data["follower_weight"]),
            constraint=data.get("constraint", "c1"),
            horizon=int(data.get("horizon", 40)),
            name=str(data.get("name", "game")),
        )
    except ValueError as exc:
        raise GameFormatError(str(exc)) from exc
    shape = (data["leader_actions"], data["follower_actions"], data["dims"])
    if game.leader_payoffs.shape != tuple(shape):
        raise GameFormatError(f"declared shape {shape} does not match payoffs {game.leader_payoffs.shape}")
    return game


def load_game(path) -> Game:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise GameFormatError(f"{path}: {exc}") from exc
    try:
        return game_from_dict(data)
    except GameFormatError as exc:
        raise GameFormatError(f"{path}: {exc}") from exc


def save_game(game: Game, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game), indent=2) + "\n")
