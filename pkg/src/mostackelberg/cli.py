"""Command-line entry point: ``mostackelberg {generate,solve,run,experiment,inspect}``."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .belief import sample_region
from .experiments import FIXED_GAMES, ExperimentConfig, fixed_game, generate_uniform_game, run_experiment
from .game import GameFormatError, best_response, game_to_dict, load_game, save_game
from .omp import play_safe_cost, reference_solution
from .policies import PolicyState, parse_policy
from .simulate import cumulative_regret, episode_rng, run_episode, seed_known_brs


class CliError(Exception):
    pass


def _add_game_flags(p: argparse.ArgumentParser, constraint_default=None) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--fixed", choices=sorted(FIXED_GAMES), default=None,
                     help="built-in benchmark game (default: high-risk when --game is absent)")
    src.add_argument("--game", default=None, help="path to a game JSON file")
    p.add_argument("--constraint", choices=["c1", "c2"], default=constraint_default,
                   help="cost constraint override (default: the game's own)")


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")


def _load(args):
    try:
        if args.game:
            game = load_game(args.game)
        else:
            game = fixed_game(args.fixed or "high-risk")
    except (OSError, GameFormatError, ValueError) as exc:
        raise CliError(str(exc)) from exc
    return game.with_constraint(args.constraint) if args.constraint else game


def _policy(text):
    try:
        return parse_policy(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mostackelberg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random uniform game as JSON")
    g.add_argument("--dims", type=_positive, default=2, help="number of objectives (default: 2)")
    g.add_argument("--leader-actions", type=_positive, default=2, help="default: 2")
    g.add_argument("--follower-actions", type=_positive, default=2, help="default: 2")
    g.add_argument("--constraint", choices=["c1", "c2"], default="c1", help="default: c1")
    g.add_argument("--utility", choices=["linear", "cobb-douglas"], default="linear", help="default: linear")
    g.add_argument("--T", type=_positive, default=40, help="horizon stored in the file (default: 40)")
    _add_seed(g)
    g.add_argument("--out", default=None, help="output path (default: stdout)")

    s = sub.add_parser("solve", help="solve the optimal manipulation problem with the true weight")
    _add_game_flags(s)

    r = sub.add_parser("run", help="simulate one episode and print its cumulative regret")
    _add_game_flags(r)
    r.add_argument("--policy", type=_policy, default=_policy("longeu+pfr"), help="default: longeu+pfr")
    r.add_argument("--T", type=_positive, default=None, help="horizon (default: the game's)")
    _add_seed(r)
    r.add_argument("--samples", type=_positive, default=512, help="belief samples (default: 512)")
    r.add_argument("--out", default=None, help="JSON-lines trace path (default: no trace)")

    e = sub.add_parser("experiment", help="replicate policies over games and summarise regret")
    e.add_argument("--config", default=None, help="JSON config; inline flags override its fields")
    e.add_argument("--fixed", choices=sorted(FIXED_GAMES), default=None, help="use a benchmark game")
    e.add_argument("--game", default=None, help="use a game file")
    e.add_argument("--dims", type=_positive, default=None, help="uniform generator dimension (default: 2)")
    e.add_argument("--policy", action="append", default=None,
                   help="policy, repeatable (default: longeu+pfr)")
    e.add_argument("--constraint", choices=["c1", "c2"], default=None, help="default: c2")
    e.add_argument("--utility", choices=["linear", "cobb-douglas"], default=None, help="default: linear")
    e.add_argument("--T", type=_positive, action="append", default=None, help="horizon, repeatable (default: 40)")
    e.add_argument("--reps", type=_positive, default=None, help="replications (default: 100)")
    e.add_argument("--seed", type=int, default=None, help="master seed (default: 0)")
    e.add_argument("--samples", type=_positive, default=None, help="belief samples (default: 512)")
    e.add_argument("--workers", type=_positive, default=None, help="worker processes (default: 1)")
    e.add_argument("--out", default=None, help="summary CSV path (default: summary.csv)")

    i = sub.add_parser("inspect", help="show best responses, OMP and, with --policy, the learned region")
    _add_game_flags(i)
    i.add_argument("--policy", type=_policy, default=None, help="run this policy first (default: none)")
    i.add_argument("--T", type=_positive, default=None, help="horizon for --policy (default: the game's)")
    _add_seed(i)
    i.add_argument("--samples", type=_positive, default=16, help="region samples to print (default: 16)")
    return parser


def cmd_generate(args) -> None:
    game = generate_uniform_game(args.dims, args.leader_actions, args.follower_actions,
                                 args.constraint, args.utility, args.seed)
    game = type(game)(game.leader_payoffs, game.follower_payoffs, game.leader_weight,
                      game.follower_model, game.constraint, args.T, game.name)
    if args.out:
        save_game(game, args.out)
    else:
        print(json.dumps(game_to_dict(game)))


def cmd_solve(args) -> None:
    game = _load(args)
    print(json.dumps(reference_solution(game).to_dict()))


def cmd_run(args) -> None:
    game = _load(args)
    trace = run_episode(game, args.policy, args.T, args.seed, args.samples)
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(trace.to_jsonl())
        except OSError as exc:
            raise CliError(f"cannot write {args.out}: {exc}") from exc
    print(json.dumps({"game": game.name, "policy": trace.policy, "T": trace.horizon,
                      "seed": args.seed, "cumulative_regret": cumulative_regret(trace)}))


def cmd_experiment(args) -> None:
    try:
        data = {}
        if args.config:
            data = json.loads(open(args.config).read())
            if not isinstance(data, dict):
                raise ValueError("config must be a JSON object")
        overrides = {
            "dims": args.dims, "constraint": args.constraint, "utility": args.utility,
            "policies": args.policy, "horizons": args.T, "replications": args.reps,
            "seed": args.seed, "samples": args.samples, "workers": args.workers, "output": args.out,
        }
        if args.fixed:
            overrides["generator"] = args.fixed
        if args.game:
            overrides.update(generator="file", game_path=args.game)
        data.update({k: v for k, v in overrides.items() if v is not None})
        data.setdefault("output", "summary.csv")
        cfg = ExperimentConfig.from_dict(data)
    except (OSError, ValueError, TypeError) as exc:
        raise CliError(f"invalid config: {exc}") from exc
    result = run_experiment(cfg)
    for row in result.rows:
        print(f"{row.policy} T={row.T} mean_cr={row.mean_cr:.6g} se={row.se_cr:.3g} "
              f"reps={row.reps} beneficial={row.beneficial_frac:.3f}")


def cmd_inspect(args) -> None:
    game = _load(args)
    info = {
        "game": game.name,
        "best_responses": [best_response(game, l) for l in range(game.n_leader)],
        "omp": reference_solution(game).to_dict(),
        "play_safe_costs": {f"{l},{f}": play_safe_cost(game, l, f).tolist()
                            for l in range(game.n_leader) for f in range(game.n_follower)},
    }
    if args.policy is not None:
        spec = args.policy
        rng = episode_rng(args.seed, game.name, spec.rng_key)
        state = PolicyState.initial(game.dims, spec.belief_kind, rng=rng)
        if spec.baseline == "nomanip":
            seed_known_brs(state, game)
        trace = run_episode(game, spec, args.T, args.seed, state=state)
        region = state.region.repaired()
        info["policy"] = spec.name
        info["cumulative_regret"] = cumulative_regret(trace)
        info["region"] = region.to_dict()
        info["samples"] = np.round(sample_region(region, args.samples, args.seed), 12).tolist()
    print(json.dumps(info, indent=2))


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "run": cmd_run,
            "experiment": cmd_experiment, "inspect": cmd_inspect}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
