"""Command-line entry point: validate a JSON config, run one experiment, write its artifacts."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any

import jsonschema
import numpy as np

from . import analysis, equilibrium, stopping
from .belief import BeliefError, DirichletPrior, FiniteSupportPrior
from .game import Game, GameError

SCHEMA_VERSION = 1
COMMANDS = ("solve", "stopping", "boundaries", "dynamics", "sweep-costs", "reachability",
            "rationalizability", "check", "misspec", "analogy")
OUT_ENV = "SEQSAMPLE_OUT"

logger = logging.getLogger("seqsample")

_number_array = {"type": "array"}
_prior_schema = {
    "oneOf": [
        {"type": "object", "required": ["type", "alpha"], "additionalProperties": False,
         "properties": {"type": {"const": "dirichlet"},
                        "alpha": {"type": "array", "minItems": 1,
                                  "items": {"type": "number", "exclusiveMinimum": 0}}}},
        {"type": "object", "required": ["type", "atoms", "weights"], "additionalProperties": False,
         "properties": {"type": {"const": "finite"},
                        "atoms": {"type": "array", "minItems": 1,
                                  "items": {"type": "array", "items": {"type": ["number", "string"]}}},
                        "weights": {"type": "array", "items": {"type": ["number", "string"]}}}},
    ]
}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["game"],
    "additionalProperties": False,
    "properties": {
        "game": {
            "type": "object",
            "required": ["players", "actions", "payoffs"],
            "additionalProperties": False,
            "properties": {
                "players": {"type": "array", "minItems": 2, "items": {"type": "string"}},
                "actions": {"type": "object", "additionalProperties": {
                    "type": "array", "minItems": 1, "items": {"type": "string"}}},
                "payoffs": {"type": "object", "additionalProperties": _number_array},
            },
        },
        "priors": {"type": "object", "additionalProperties": _prior_schema},
        "costs": {"oneOf": [{"type": "number", "exclusiveMinimum": 0},
                            {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}}]},
        "stopping_rule": {"enum": ["optimal", "myopic"]},
        "partitions": {"type": "object", "additionalProperties": {
            "type": "array", "items": {"type": "integer", "minimum": 0}}},
        "params": {"type": "object"},
    },
}


class ConfigError(ValueError):
    def __init__(self, message: str, path: str):
        super().__init__(message)
        self.path = path


@dataclass
class RunConfig:
    game: Game
    priors: dict
    costs: dict
    stopping_rule: str
    partitions: dict
    params: dict
    raw: dict = field(repr=False, default_factory=dict)

    def extended(self, cost: float | None = None) -> equilibrium.ExtendedGame:
        g = self.game
        priors = []
        for i, p in enumerate(g.players):
            prior = self.priors[p]
            if not isinstance(prior, DirichletPrior):
                raise ConfigError("equilibrium commands need Dirichlet priors", f"/priors/{p}")
            priors.append(prior)
        costs = [cost if cost is not None else self.costs[p] for p in g.players]
        parts = tuple(self.partitions.get(p) for p in g.players)
        try:
            return equilibrium.ExtendedGame(g, tuple(priors), tuple(costs), self.stopping_rule,
                                            parts if any(x is not None for x in parts) else None)
        except equilibrium.EquilibriumError as exc:
            raise ConfigError(str(exc), "/priors") from None

    def canonical(self) -> dict:
        out = {"game": self.game.to_json(),
               "priors": {p: pr.to_json() for p, pr in self.priors.items()},
               "costs": {p: c for p, c in self.costs.items()},
               "stopping_rule": self.stopping_rule}
        if self.partitions:
            out["partitions"] = {p: list(v) for p, v in self.partitions.items()}
        out["params"] = self.params
        return out


def _pointer(parts) -> str:
    return "/" + "/".join(str(p) for p in parts) if parts else "/"


def parse_config(raw: Any) -> RunConfig:
    """Validate and normalise a config document; raises ConfigError with a JSON pointer."""
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message, _pointer(exc.absolute_path)) from None
    try:
        game = Game.from_json(raw["game"])
    except GameError as exc:
        raise ConfigError(str(exc), "/game" + exc.path) from None
    priors = {}
    for i, p in enumerate(game.players):
        size = len(game.opponent_profiles(i))
        part = raw.get("partitions", {}).get(p)
        if part is not None:
            if len(part) != size:
                raise ConfigError(f"partition needs {size} entries", f"/partitions/{p}")
            size = max(part) + 1
        spec = raw.get("priors", {}).get(p)
        try:
            if spec is None:
                prior = DirichletPrior.uniform(size)
            elif spec["type"] == "dirichlet":
                prior = DirichletPrior(spec["alpha"])
            else:
                prior = FiniteSupportPrior.exact(spec["atoms"], spec["weights"])
        except (BeliefError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(str(exc), f"/priors/{p}") from None
        if prior.size != size:
            raise ConfigError(f"prior has {prior.size} symbols, expected {size}", f"/priors/{p}")
        priors[p] = prior
    unknown = set(raw.get("priors", {})) - set(game.players)
    if unknown:
        raise ConfigError(f"unknown player {sorted(unknown)[0]!r}", f"/priors/{sorted(unknown)[0]}")
    cost_spec = raw.get("costs", 0.05)
    if isinstance(cost_spec, dict):
        missing = [p for p in game.players if p not in cost_spec]
        if missing:
            raise ConfigError("missing cost", f"/costs/{missing[0]}")
        costs = {p: float(cost_spec[p]) for p in game.players}
    else:
        costs = {p: float(cost_spec) for p in game.players}
    parts = {p: [int(z) for z in v] for p, v in raw.get("partitions", {}).items()}
    for p in parts:
        if p not in game.players:
            raise ConfigError(f"unknown player {p!r}", f"/partitions/{p}")
    return RunConfig(game, priors, costs, raw.get("stopping_rule", "optimal"), parts,
                     dict(raw.get("params", {})), raw)


# serialisation -------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, allow_nan=False) + "\n"


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def dumps_csv(header: list[str], rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(x) for x in row])
    return buf.getvalue()


class Outputs:
    """Collects artifacts in memory; ``commit`` writes each one via a temp file and rename."""

    def __init__(self):
        self.files: dict[str, str] = {}

    def json(self, name: str, obj):
        self.files[name] = dumps_json(obj)

    def csv(self, name: str, header, rows):
        self.files[name] = dumps_csv(header, rows)

    def commit(self, out_dir: str) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for name in sorted(self.files):
            target = os.path.join(out_dir, name)
            fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=out_dir)
            try:
                with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                    fh.write(self.files[name])
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
            written.append(name)
        return written


# commands ------------------------------------------------------------------

def _player(cfg: RunConfig, key: str = "player") -> list[int]:
    name = cfg.params.get(key)
    if name is None:
        return list(range(cfg.game.n_players))
    try:
        return [cfg.game.player_index(name)]
    except GameError:
        raise ConfigError(f"unknown player {name!r}", f"/params/{key}") from None


def _profile_param(cfg: RunConfig, key: str, default=None):
    spec = cfg.params.get(key)
    if spec is None:
        return default
    try:
        return [np.asarray(spec[p], dtype=float) for p in cfg.game.players]
    except (KeyError, TypeError, ValueError):
        raise ConfigError("expected one mix per player", f"/params/{key}") from None


def _grid(cfg: RunConfig, key: str = "cost_grid") -> list[float]:
    grid = cfg.params.get(key)
    if not isinstance(grid, list) or not grid or not all(isinstance(c, (int, float)) and c > 0 for c in grid):
        raise ConfigError("expected a non-empty list of positive costs", f"/params/{key}")
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("cost grid must be strictly decreasing", f"/params/{key}")
    return [float(c) for c in grid]


def _action_time_rows(dist: stopping.ActionTimeDistribution):
    return [list(r) for r in dist.rows()]


def cmd_solve(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    ext = cfg.extended()
    result = equilibrium.sse_solve(ext, method=cfg.params.get("method", "auto"), tol=opts.tol,
                                   max_iter=int(cfg.params.get("max_iter", 10000)),
                                   warm_start=_profile_param(cfg, "warm_start"))
    doc = result.to_json(cfg.game)
    doc["action_time"] = {p: result.action_time[i].table for i, p in enumerate(cfg.game.players)}
    out.json("equilibrium.json", doc)
    for i, p in enumerate(cfg.game.players):
        out.csv(f"action_time_{p}.csv", ["action", "t", "prob"], _action_time_rows(result.action_time[i]))
    summary = {"status": result.status, "residual": result.residual,
               "sigma": {p: result.sigma[i] for i, p in enumerate(cfg.game.players)}}
    return (0 if result.converged else 1), summary


def cmd_stopping(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    ext = cfg.extended()
    summary = {}
    sigma = _profile_param(cfg, "sigma")
    for i in _player(cfg):
        p = cfg.game.players[i]
        pol = ext.policies[i]
        out.json(f"policy_{p}.json", {"player": p, "horizon": pol.horizon, "kind": pol.kind,
                                      "diagnostics": pol.diagnostics, "nodes": pol.export_rows()})
        tail = stopping.stop_time_tail_under_prior(pol)
        out.csv(f"tail_{p}.csv", ["T", "prob"], [[t, x] for t, x in enumerate(tail)])
        if sigma is not None:
            dist = stopping.joint_action_time(pol, ext.observation(i, sigma))
            out.csv(f"action_time_{p}.csv", ["action", "t", "prob"], _action_time_rows(dist))
        summary[p] = {"horizon": pol.horizon, "root_stop": pol.diagnostics["root_stop"]}
    return 0, summary


def cmd_boundaries(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    ext = cfg.extended()
    summary = {}
    for i in _player(cfg):
        p = cfg.game.players[i]
        try:
            b = stopping.boundaries(ext.problems[i], resolution=float(cfg.params.get("resolution", 1e-10)))
        except stopping.StoppingError as exc:
            raise ConfigError(str(exc), f"/params/player") from None
        out.csv(f"boundaries_{p}.csv", ["t", "lower", "upper"], [list(r) for r in b.rows()])
        out.json(f"boundaries_{p}.json", {"indifference": b.indifference, "horizon": b.horizon,
                                          "lower": b.lower, "upper": b.upper,
                                          "lower_lattice": b.lower_lattice, "upper_lattice": b.upper_lattice})
        summary[p] = {"horizon": b.horizon, "indifference": b.indifference}
    return 0, summary


def cmd_dynamics(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    ext = cfg.extended()
    start = _profile_param(cfg, "sigma0", [np.full(s, 1.0 / s) for s in cfg.game.shape])
    trace = equilibrium.dynamics_run(ext, start, cfg.params.get("variant", "cesaro"),
                                     int(cfg.params.get("steps", 1000)), float(cfg.params.get("beta", 0.9)),
                                     int(cfg.params.get("population", 100)), opts.seed)
    out.csv("trace.csv", trace.header(cfg.game), trace.rows(cfg.game))
    summary = {"variant": trace.variant, "steps": len(trace.residuals) - 1,
               "final_residual": trace.residuals[-1], "seed": trace.seed,
               "final_sigma": {p: trace.sigmas[-1][i] for i, p in enumerate(cfg.game.players)}}
    out.json("dynamics.json", dict(summary, params=trace.params))
    return 0, summary


def _sweep_header(game: Game) -> list[str]:
    return (["cost"] + [f"{p}:{a}" for i, p in enumerate(game.players) for a in game.actions[i]]
            + ["residual", "status", "distance"])


def cmd_sweep(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    grid = _grid(cfg)
    ext = cfg.extended(grid[0])
    warm = bool(cfg.params.get("warm", opts.threads <= 1))
    path = equilibrium.cost_sweep(ext, grid, warm=warm, threads=opts.threads, tol=opts.tol)
    out.csv("sweep.csv", _sweep_header(cfg.game), [pt.row(cfg.game) for pt in path])
    rows = [{"cost": pt.cost, "distance": pt.distance, **pt.result.to_json(cfg.game)} for pt in path]
    out.json("sweep.json", {"rows": rows})
    failed = [pt.cost for pt in path if not pt.result.converged]
    return (1 if failed else 0), {"points": len(path), "not_converged": failed,
                                  "final_distance": path[-1].distance}


def cmd_reachability(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    grid = _grid(cfg)
    target = cfg.params.get("target")
    if not isinstance(target, dict):
        raise ConfigError("expected an action per player", "/params/target")
    try:
        tgt = [cfg.game.action_index(i, target[p]) for i, p in enumerate(cfg.game.players)]
    except (KeyError, GameError) as exc:
        raise ConfigError(str(exc), "/params/target") from None
    center = _profile_param(cfg, "prior_center", [np.full(s, 1.0 / s) for s in cfg.game.shape])
    rep = equilibrium.reachability_experiment(cfg.game, tgt, center, grid,
                                              cfg.params.get("concentration"),
                                              float(cfg.params.get("tol", 0.05)), cfg.stopping_rule)
    path = rep.pop("path")
    out.csv("reachability.csv", _sweep_header(cfg.game), [pt.row(cfg.game) for pt in path])
    out.json("reachability.json", rep)
    failed = [pt.cost for pt in path if not pt.result.converged]
    return (1 if failed else 0), {"reached": rep["reached"], "final_distance": rep["final_distance"]}


def cmd_rationalizability(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    grid = _grid(cfg)
    rep = equilibrium.rationalizability_sweep(cfg.extended(grid[0]), grid,
                                              float(cfg.params.get("support_eps", 1e-6)), opts.tol)
    out.json("rationalizability.json", rep)
    out.csv("rationalizability.csv", ["cost", "certified_k", "status"],
            [[r["cost"], r["certified_k"], r["status"]] for r in rep["rows"]])
    failed = [r["cost"] for r in rep["rows"] if r["status"] != equilibrium.CONVERGED]
    return (1 if failed else 0), {"solvability_depth": rep["solvability_depth"],
                                  "certified": [r["certified_k"] for r in rep["rows"]]}


def cmd_misspec(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    players = _player(cfg)
    if "true_sigma" not in cfg.params:
        raise ConfigError("missing true distribution of observed profiles", "/params/true_sigma")
    i = players[0]
    p = cfg.game.players[i]
    rep = analysis.misspec_detector(cfg.game, i, cfg.priors[p], cfg.costs[p], cfg.params["true_sigma"],
                                    int(cfg.params.get("probe_depth", 20)))
    out.json("misspec.json", rep.to_json())
    return 0, {"never_stop": rep.never_stop, "exact": rep.exact}


def cmd_analogy(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    grid = _grid(cfg)
    parts = [cfg.partitions.get(p) for p in cfg.game.players]
    priors = [cfg.priors[p] for p in cfg.game.players]
    rep = analysis.analogy_limit(cfg.game, parts, grid, priors, float(cfg.params.get("tol", 0.05)))
    path = rep.pop("path")
    out.csv("analogy.csv", _sweep_header(cfg.game), [pt.row(cfg.game) for pt in path])
    out.json("analogy.json", rep)
    code = 0 if rep["verdict"] == "pass" else 1
    return code, {"verdict": rep["verdict"], "final_violation": rep["final_violation"]}


CHECK_SUITES = ("tail-bound", "never-indifferent", "boundaries", "statics", "myopic")


def cmd_check(cfg: RunConfig, out: Outputs, opts) -> tuple[int, dict]:
    suite = cfg.params.get("suite", "all")
    names = CHECK_SUITES if suite == "all" else (suite,)
    if any(n not in CHECK_SUITES for n in names):
        raise ConfigError(f"unknown suite {suite!r}", "/params/suite")
    ext = cfg.extended()
    verdicts = {}
    for name in names:
        for i in _player(cfg):
            p = cfg.game.players[i]
            verdicts[f"{name}:{p}"] = _run_check(name, ext, i, cfg)
    out.json("check.json", verdicts)
    failed = [k for k, v in verdicts.items() if v["verdict"] == "fail"]
    return (1 if failed else 0), {"failed": failed, "checked": len(verdicts)}


def _run_check(name: str, ext: equilibrium.ExtendedGame, i: int, cfg: RunConfig) -> dict:
    problem = ext.problems[i]
    policy = ext.policies[i]
    binary = problem.is_binary
    if name == "tail-bound":
        tail = stopping.stop_time_tail_under_prior(policy)
        bound = 2 * np.abs(problem.payoffs).max() / problem.cost
        excess = max([tail[t] - bound / t for t in range(1, len(tail))], default=0.0)
        return {"verdict": "pass" if excess <= 0 else "fail", "worst_excess": excess}
    if name == "never-indifferent":
        bad = stopping.never_indifferent_violations(policy)
        return {"verdict": "pass" if not bad else "fail", "violations": len(bad)}
    if not binary or (name in ("boundaries", "statics") and problem.indifference_point() is None):
        return {"verdict": "skipped", "reason": "needs a 2x2 problem with an interior indifference point"}
    if name == "boundaries":
        b = stopping.boundaries(problem)
        worst = max(float(np.max(np.diff(b.upper), initial=0.0)), float(np.max(-np.diff(b.lower), initial=0.0)))
        meets = b.upper[-1] == b.indifference and b.lower[-1] == b.indifference
        return {"verdict": "pass" if worst <= 0 and meets else "fail", "worst_violation": worst}
    if name == "statics":
        rep = analysis.comparative_statics_sigma(problem)
        return {"verdict": rep.verdict, "worst_violation": rep.worst_violation}
    myopic = stopping.myopic_policy(problem, horizon=policy.horizon)
    ok = stopping.contains_stop_region(myopic, policy)
    return {"verdict": "pass" if ok else "fail"}


HANDLERS = {
    "solve": cmd_solve, "stopping": cmd_stopping, "boundaries": cmd_boundaries, "dynamics": cmd_dynamics,
    "sweep-costs": cmd_sweep, "reachability": cmd_reachability, "rationalizability": cmd_rationalizability,
    "check": cmd_check, "misspec": cmd_misspec, "analogy": cmd_analogy,
}


@dataclass
class Options:
    seed: int = 0
    threads: int = 1
    tol: float = 1e-8


def run(command: str, raw_config: Any, out_dir: str, options: Options | None = None) -> tuple[int, dict, list[str]]:
    """Execute one command. Returns (exit code, summary, written file names)."""
    opts = options or Options()
    summary = {"schema_version": SCHEMA_VERSION, "command": command}
    if command not in HANDLERS:
        summary.update(status="schema_error", error=f"unknown command {command!r}", path="/")
        return 2, summary, []
    try:
        cfg = parse_config(raw_config)
        out = Outputs()
        code, details = HANDLERS[command](cfg, out, opts)
    except ConfigError as exc:
        summary.update(status="schema_error", error=str(exc), path=exc.path)
        return 2, summary, []
    out.json("config.json", cfg.canonical())
    files = out.commit(out_dir)
    summary.update(status="ok" if code == 0 else "failed", exit_code=code, files=files, result=details)
    return code, summary, files


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqsample", description="Sequential sampling equilibrium toolkit.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./out)")
    parser.add_argument("--seed", type=int, default=0, help="seed for the finite-population dynamics")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for independent sweep points")
    parser.add_argument("--tol", type=float, default=1e-8, help="fixed-point tolerance")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out_dir = args.out or os.environ.get(OUT_ENV) or "out"
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        summary = {"schema_version": SCHEMA_VERSION, "command": args.command, "status": "schema_error",
                   "error": str(exc), "path": "/"}
        print(json.dumps(summary, sort_keys=True))
        return 2
    code, summary, _ = run(args.command, raw, out_dir, Options(args.seed, args.threads, args.tol))
    print(json.dumps(_plain(summary), sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
