"""Game generators, benchmark games and the replication runner."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .game import Constraint, Game, UtilityKind, UtilityModel, game_from_dict, load_game
from .omp import reference_solution
from .policies import parse_policy
from .simulate import cumulative_regret, run_episode

CD_SHIFT = 0.01
FIXED_GAMES = {"high-risk": "high_risk.json", "play-safe": "play_safe.json"}
GENERATORS = ("uniform", "high-risk", "play-safe", "file")


def random_simplex_weight(rng: np.random.Generator, dims: int) -> np.ndarray:
    # normalised exponentials = Dirichlet(1, ..., 1) = uniform on the simplex
    e = rng.exponential(size=dims)
    return e / e.sum()


def generate_uniform_game(dims: int, n_leader: int, n_follower: int, constraint="c1",
                          utility_kind="linear", seed=0, name: str | None = None) -> Game:
    if dims < 2 or n_leader < 1 or n_follower < 1:
        raise ValueError("need dims >= 2 and at least one action per player")
    kind = UtilityKind(utility_kind)
    rng = np.random.default_rng(seed)
    shape = (n_leader, n_follower, dims)
    xl = rng.random(shape)
    xf = rng.random(shape)
    wl = random_simplex_weight(rng, dims)
    wf = random_simplex_weight(rng, dims)
    if kind is UtilityKind.COBB_DOUGLAS:
        xl, xf = xl + CD_SHIFT, xf + CD_SHIFT
    if name is None:
        name = f"uniform-d{dims}-{n_leader}x{n_follower}-{seed}"
    return Game(xl, xf, wl, UtilityModel(kind, wf), Constraint(constraint), name=name)


def fixed_game(name: str, constraint=None) -> Game:
    key = name.lower().replace("_", "-")
    if key not in FIXED_GAMES:
        raise ValueError(f"unknown fixed game {name!r}; choose from {', '.join(FIXED_GAMES)}")
    text = resources.files("mostackelberg.games").joinpath(FIXED_GAMES[key]).read_text()
    game = game_from_dict(json.loads(text))
    return game if constraint is None else game.with_constraint(constraint)


@dataclass
class ExperimentConfig:
    generator: str = "uniform"
    dims: int = 2
    n_leader: int = 2
    n_follower: int = 2
    constraint: str = "c2"
    utility: str = "linear"
    policies: list[str] = field(default_factory=lambda: ["longeu+pfr"])
    horizons: list[int] = field(default_factory=lambda: [40])
    replications: int = 100
    seed: int = 0
    samples: int = 512
    workers: int = 1
    output: str | None = None
    traces: str | None = None
    game_path: str | None = None
    preseed_brs: bool = False
    beneficial_only: bool = False

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"generator: expected one of {GENERATORS}, got {self.generator!r}")
        if self.generator == "file" and not self.game_path:
            raise ValueError("game_path: required when generator is 'file'")
        if self.replications < 1:
            raise ValueError("replications: must be >= 1")
        if not self.horizons or any(int(t) < 1 for t in self.horizons):
            raise ValueError("horizons: every horizon must be >= 1")
        if not self.policies:
            raise ValueError("policies: at least one policy is required")
        for p in self.policies:
            try:
                parse_policy(p)
            except ValueError as exc:
                raise ValueError(f"policies: {exc}") from exc
        Constraint(self.constraint)
        UtilityKind(self.utility)
        if self.workers < 1 or self.samples < 1:
            raise ValueError("workers/samples: must be >= 1")
        self.horizons = [int(t) for t in self.horizons]

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class SummaryRow:
    policy: str
    T: int
    mean_cr: float
    se_cr: float
    reps: int
    beneficial_frac: float


@dataclass
class ExperimentResult:
    rows: list[SummaryRow]
    final_cr: dict[tuple[str, int], np.ndarray]
    beneficial: np.ndarray
    traces: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["policy", "T", "mean_cr", "se_cr", "reps", "beneficial_frac"])
        for r in self.rows:
            writer.writerow([r.policy, r.T, repr(r.mean_cr), repr(r.se_cr), r.reps, repr(r.beneficial_frac)])
        return buf.getvalue()


def replication_seed(base_seed: int, index: int, attempt: int = 0) -> int:
    return int(np.random.SeedSequence([int(base_seed), int(index), int(attempt)]).generate_state(1)[0])


def make_game(cfg: ExperimentConfig, index: int) -> Game:
    if cfg.generator == "uniform":
        attempt = 0
        while True:
            seed = replication_seed(cfg.seed, index, attempt)
            game = generate_uniform_game(cfg.dims, cfg.n_leader, cfg.n_follower,
                                         cfg.constraint, cfg.utility, seed)
            if not cfg.beneficial_only or reference_solution(game).beneficial:
                return game
            attempt += 1
    if cfg.generator == "file":
        return load_game(cfg.game_path).with_constraint(cfg.constraint)
    return fixed_game(cfg.generator, cfg.constraint)


def _replicate(args) -> tuple[bool, dict, list]:
    cfg, index = args
    game = make_game(cfg, index)
    ref = reference_solution(game)
    seed = replication_seed(cfg.seed, index)
    finals, traces = {}, []
    for policy in cfg.policies:
        spec = parse_policy(policy)
        for T in cfg.horizons:
            trace = run_episode(game, spec, T, seed, cfg.samples, cfg.preseed_brs, ref)
            finals[(spec.name, T)] = cumulative_regret(trace)
            if cfg.traces:
                traces.append(trace)
    return ref.beneficial, finals, traces


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    jobs = [(cfg, i) for i in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers))))
    else:
        results = [_replicate(job) for job in jobs]

    # results are in replication order regardless of worker count
    beneficial = np.array([r[0] for r in results], dtype=bool)
    rows, finals = [], {}
    for policy in cfg.policies:
        name = parse_policy(policy).name
        for T in cfg.horizons:
            values = np.array([r[1][(name, T)] for r in results])
            finals[(name, T)] = values
            n = len(values)
            se = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            rows.append(SummaryRow(name, T, float(values.mean()), se, n, float(beneficial.mean())))
    traces = [t for r in results for t in r[2]]
    result = ExperimentResult(rows, finals, beneficial, traces)
    if cfg.output:
        write_text(cfg.output, result.to_csv())
    if cfg.traces:
        write_text(cfg.traces, "".join(t.to_jsonl() for t in traces))
    return result


def write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def config_dict(cfg: ExperimentConfig) -> dict:
    return asdict(cfg)
