"""Command-line harness: gen, two-agent, network, loss-sweep, verify.

Every command resolves its configuration (flags over config file over
defaults), seeds all randomness from a single --seed through named
substreams, writes its outputs, and drops a plain-text key=value manifest
alongside them so any run can be reproduced bit-for-bit.
"""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from . import __version__
from .agent import LearnConfig
from .netsim import SimConfig, SimTrace, run_experiment
from .synthetic import SyntheticSpec, generate, read_dataset, write_dataset
from .verify import SUITES, run_suite

DEFAULTS: Dict[str, object] = {
    "seed": 0,
    "out": "out",
    "threads": 1,
    "vocab_size": 50,
    "bank_size": 10,
    "agents": 2,
    "loss_rate": 0.0,
    "fusion_period": 10,
    "topology": "line",
    "d": 6,
    "sigma_s": 1.0,
    "sigma_n": 0.1,
    "batches": 100,
    "block_size": 20,
    "n_test": 400,
    "learning_rate": 1e-2,
    "grad_samples": 2,
    "hyperlearning": 1,
    "checkpoints": -1,  # -1 = every fusion_period batches
    "loss_grid": "0,0.2,0.4,0.6",
    "sweep_seeds": 5,
}


def read_config_file(path) -> Dict[str, str]:
    """Plain key=value file; blank lines and #-comments ignored."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


def resolve_config(args: argparse.Namespace) -> Dict[str, object]:
    """Flags override config file entries, which override built-in defaults."""
    resolved = dict(DEFAULTS)
    if getattr(args, "config", None):
        for key, val in read_config_file(args.config).items():
            if key not in resolved:
                raise ValueError(f"unknown config key {key!r}")
            resolved[key] = type(resolved[key])(val) if not isinstance(resolved[key], str) else val
    for key in resolved:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    if not (0.0 <= float(resolved["loss_rate"]) < 1.0):
        raise ValueError("loss_rate must lie in [0, 1)")
    return resolved


def write_manifest(
    path: Path, command: str, config: Dict[str, object], outputs, started, finished
) -> None:
    lines = [
        f"command={command}",
        f"version={__version__}",
        f"started={started}",
        f"finished={finished}",
    ]
    for key in sorted(config):
        lines.append(f"{key}={config[key]}")
    for i, out in enumerate(outputs):
        lines.append(f"output_{i}={out}")
    path.write_text("\n".join(lines) + "\n")


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _learn_config(cfg: Dict[str, object]) -> LearnConfig:
    return LearnConfig(
        learning_rate=float(cfg["learning_rate"]),
        grad_samples=int(cfg["grad_samples"]),
        hyperlearning_enabled=bool(int(cfg["hyperlearning"])),
    )


def _synthetic_spec(cfg: Dict[str, object]) -> SyntheticSpec:
    return SyntheticSpec(
        d=int(cfg["d"]),
        sigma_s=float(cfg["sigma_s"]),
        sigma_n=float(cfg["sigma_n"]),
        n_blocks=int(cfg["batches"]),
        block_size=int(cfg["block_size"]),
        n_test=int(cfg["n_test"]),
        seed=int(cfg["seed"]),
    )


def _load_or_generate(cfg: Dict[str, object], out: Path):
    """Use dataset files under out/ when present, else generate in memory."""
    paths = [out / "stream1.csv", out / "stream2.csv", out / "test1.csv", out / "test2.csv"]
    if all(p.exists() for p in paths):
        s1 = read_dataset(paths[0])
        s2 = read_dataset(paths[1])
        tests = []
        for p in paths[2:]:
            blocks = read_dataset(p)
            X = np.vstack([b[0] for b in blocks])
            y = np.concatenate([b[1] for b in blocks])
            tests.append((X, y))
        return s1, s2, tests
    return generate(_synthetic_spec(cfg))


def cmd_gen(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    started = _now()
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    s1, s2, tests = generate(_synthetic_spec(cfg))
    outputs = []
    for name, blocks in (("stream1.csv", s1), ("stream2.csv", s2)):
        write_dataset(blocks, out / name)
        outputs.append(out / name)
    for i, (X, y) in enumerate(tests, start=1):
        write_dataset([(X, y)], out / f"test{i}.csv")
        outputs.append(out / f"test{i}.csv")
    write_manifest(out / "manifest.txt", "gen", cfg, outputs, started, _now())
    print(f"wrote {len(outputs)} dataset files to {out}")
    return 0


def _sim_config(cfg: Dict[str, object], n_agents: int, mode: str = "decentralized") -> SimConfig:
    return SimConfig(
        n_agents=n_agents,
        topology_kind=str(cfg["topology"]),
        loss_rate=float(cfg["loss_rate"]),
        fusion_period=int(cfg["fusion_period"]),
        seed=int(cfg["seed"]),
        vocab_size=int(cfg["vocab_size"]),
        bank_size=int(cfg["bank_size"]),
        d=int(cfg["d"]),
        sigma_n=float(cfg["sigma_n"]),
        sigma_s=float(cfg["sigma_s"]),
        learn_config=_learn_config(cfg),
        mode=mode,
    )


def cmd_two_agent(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    started = _now()
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    s1, s2, tests = _load_or_generate(cfg, out)
    sim = _sim_config(cfg, n_agents=2)
    if int(cfg["checkpoints"]) == 0:
        trace = SimTrace()
    else:
        trace = run_experiment(sim, [s1, s2], tests)
    metrics = out / "two_agent_metrics.csv"
    trace.to_csv(metrics)
    write_manifest(out / "two_agent_manifest.txt", "two-agent", cfg, [metrics], started, _now())
    print(f"wrote {metrics}")
    return 0


def cmd_network(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    started = _now()
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    s1, s2, tests = _load_or_generate(cfg, out)
    sim = _sim_config(cfg, n_agents=int(cfg["agents"]))
    trace = run_experiment(sim, [s1, s2], tests)
    metrics = out / "network_metrics.csv"
    trace.to_csv(metrics)
    write_manifest(out / "network_manifest.txt", "network", cfg, [metrics], started, _now())
    print(f"wrote {metrics}")
    return 0


def cmd_loss_sweep(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    started = _now()
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    grid = [float(v) for v in str(cfg["loss_grid"]).split(",")]
    if any(not (0.0 <= g < 1.0) for g in grid):
        raise ValueError("loss grid rates must lie in [0, 1)")
    n_seeds = int(cfg["sweep_seeds"])
    rows = []
    for rate in grid:
        for system in ("decentralized", "centralized"):
            rmses = []
            for s in range(n_seeds):
                run_cfg = dict(cfg)
                run_cfg["seed"] = int(cfg["seed"]) + 1000 * s
                run_cfg["loss_rate"] = rate
                s1, s2, tests = generate(_synthetic_spec(run_cfg))
                sim = _sim_config(run_cfg, n_agents=int(cfg["agents"]), mode=system)
                trace = run_experiment(sim, [s1, s2], tests)
                last = trace.checkpoints()[-1]
                rmses.append(float(np.mean([r.rmse_post for r in trace.at(last)])))
            rows.append((rate, system, float(np.mean(rmses))))
    metrics = out / "loss_sweep_metrics.csv"
    with open(metrics, "w") as fh:
        fh.write("loss_rate,system,rmse_post\n")
        for rate, system, rmse in rows:
            fh.write(f"{rate},{system},{rmse:.17g}\n")
    write_manifest(out / "loss_sweep_manifest.txt", "loss-sweep", cfg, [metrics], started, _now())
    print(f"wrote {metrics}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        report = run_suite(args.suite)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    status = "PASS" if report["passed"] else "FAIL"
    print(f"[{status}] {report['suite']}")
    for key, val in report.items():
        if key in ("suite", "passed"):
            continue
        print(f"  {key}: {val}")
    if getattr(args, "out", None):
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{args.suite}.json").write_text(json.dumps(report, indent=2))
    return 0 if report["passed"] else 1


def _add_shared_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=str)
    p.add_argument("--config", type=str)
    p.add_argument("--threads", type=int, help="1 forces fully serial execution")
    p.add_argument("--vocab-size", dest="vocab_size", type=int)
    p.add_argument("--bank-size", dest="bank_size", type=int)
    p.add_argument("--agents", type=int)
    p.add_argument("--loss-rate", dest="loss_rate", type=float)
    p.add_argument("--fusion-period", dest="fusion_period", type=int)
    p.add_argument("--topology", choices=["line", "star", "random-tree", "custom"])
    p.add_argument("--d", type=int)
    p.add_argument("--batches", type=int)
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--n-test", dest="n_test", type=int)
    p.add_argument("--sigma-s", dest="sigma_s", type=float)
    p.add_argument("--sigma-n", dest="sigma_n", type=float)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--grad-samples", dest="grad_samples", type=int)
    p.add_argument("--hyperlearning", type=int, choices=[0, 1])
    p.add_argument("--checkpoints", type=int)
    p.add_argument("--loss-grid", dest="loss_grid", type=str)
    p.add_argument("--sweep-seeds", dest="sweep_seeds", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coolgp", description="Collective online GP learning harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("gen", cmd_gen),
        ("two-agent", cmd_two_agent),
        ("network", cmd_network),
        ("loss-sweep", cmd_loss_sweep),
    ):
        p = sub.add_parser(name)
        _add_shared_flags(p)
        p.set_defaults(func=fn)
    pv = sub.add_parser("verify")
    pv.add_argument("suite", choices=sorted(SUITES))
    pv.add_argument("--out", type=str)
    pv.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
