"""Command line entry points: dataset tooling, training, evaluation, the
SER sweep, and the live session server.

Every RunConfig field is exposed as a --flag; --config loads a YAML file
first and explicit flags override it. Outputs are plain CSV files with
stable schemas (see sweep_csv/curve_csv) so downstream plotting stays
decoupled.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from pathlib import Path

from .harness import (
    DEFAULT_SWEEP_SERS,
    RunConfig,
    curve_csv,
    default_setup,
    dqn_act,
    evaluate,
    rule_act,
    ser_sweep,
    sweep_csv,
    train_dqn,
)
from .policy import load_checkpoint, save_checkpoint
from .vision import generate_dataset, load_dataset, save_dataset

# Bands enforced by `sweep --check`, mirroring the published operating
# points: near-perfect task completion at low noise, a wide DQN-over-rule
# margin at high noise, and a monotone rule degradation.
CHECK_LOW_SERS = (0.0, 0.1)
CHECK_LOW_SUCCESS = 0.97
CHECK_LOW_GOALS = 2.95
CHECK_TURN_RANGE = (5.7, 9.0)
CHECK_RULE_HIGH_MAX = 0.30
CHECK_DQN_HIGH_MIN = 0.80
CHECK_GAP_MIN = 0.40
CHECK_TREND_SLACK = 0.05


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One option per RunConfig field, typed from the dataclass."""
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", metavar="YAML", help="config file; flags override it")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            group.add_argument(flag, dest=f.name, default=None, action=argparse.BooleanOptionalAction)
        elif f.type == "int":
            group.add_argument(flag, dest=f.name, default=None, type=int)
        elif f.type == "float":
            group.add_argument(flag, dest=f.name, default=None, type=float)
        else:
            group.add_argument(flag, dest=f.name, default=None)


def config_from_args(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        f.name: getattr(args, f.name)
        for f in fields(RunConfig)
        if getattr(args, f.name, None) is not None
    }
    config = replace(config, **overrides)
    config.validate()
    return config


def _policy_act(args, config: RunConfig, ontology):
    import numpy as np

    if args.policy == "rule":
        return rule_act(ontology, config.tau)
    if not args.checkpoint:
        raise SystemExit("--policy dqn needs --checkpoint")
    policy = load_checkpoint(args.checkpoint, ontology)
    return dqn_act(policy, ontology, 0.0, np.random.default_rng([config.seed, 3]))


# -- subcommands --------------------------------------------------------------


def cmd_dataset(args) -> int:
    config = config_from_args(args)
    if args.dataset_cmd == "generate":
        dataset = generate_dataset(config.dataset_seed)
        save_dataset(dataset, args.root)
        print(f"wrote {len(dataset.scenes)} scenes to {args.root} "
              f"(train {len(dataset.train)}, test {len(dataset.test)})")
        return 0
    dataset = load_dataset(args.root) if Path(args.root).exists() else generate_dataset(config.dataset_seed)
    if args.scene:
        if args.scene not in dataset:
            raise ValueError(f"unknown scene {args.scene!r}; ids run {dataset.scenes[0].scene_id}"
                             f"..{dataset.scenes[-1].scene_id}")
        scene = dataset.scene(args.scene)
        print(f"{scene.scene_id}: {scene.width}x{scene.height} background={scene.background}")
        for obj in scene.objects:
            print(f"  {obj.name:<10} {obj.shape:<8} bbox={obj.bbox} color={obj.color}")
        return 0
    names: dict[str, int] = {}
    for scene in dataset.scenes:
        for obj in scene.objects:
            names[obj.name] = names.get(obj.name, 0) + 1
    print(f"{len(dataset.scenes)} scenes (train {len(dataset.train)}, test {len(dataset.test)})")
    print("object vocabulary:", ", ".join(f"{k}={v}" for k, v in sorted(names.items())))
    return 0


def cmd_train(args) -> int:
    config = config_from_args(args)
    ontology, dataset = default_setup(config)

    def progress(done, row):
        _, eps, ma_s, ma_r = row
        print(f"  dialogue {done:>6}  eps={eps:.3f}  success_ma={ma_s:.3f}  reward_ma={ma_r:+.2f}")

    print(f"training DQN at ser={config.ser} for {config.train_dialogues} dialogues")
    policy, curve = train_dqn(ontology, dataset, config, progress=progress)
    out = Path(args.out or f"checkpoints/dqn_ser{config.ser:.1f}.ckpt")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(str(out), policy, ontology, config.ser, config.seed)
    curve_path = Path(args.curve or f"{out}.curve.csv")
    curve_path.write_text(curve_csv(curve), encoding="utf-8")
    print(f"checkpoint: {out} (best success_ma={policy.meta.get('best_ma', 0.0):.3f} "
          f"at dialogue {policy.meta.get('best_at', 0)})")
    print(f"curve: {curve_path}")
    return 0


def cmd_eval(args) -> int:
    config = config_from_args(args)
    ontology, dataset = default_setup(config)
    act = _policy_act(args, config, ontology)
    summary = evaluate(ontology, dataset, act, config)
    print(f"policy={args.policy} ser={config.ser:.2f} n={summary.n} "
          f"turn={summary.mean_turns:.2f} reward={summary.mean_reward:.2f} "
          f"goal={summary.mean_goals:.2f} success={summary.success_rate:.3f}")
    return 0


def acceptance_violations(rows: list[dict]) -> list[str]:
    """Threshold checks over sweep rows; empty list means all bands hold."""
    cell = {(r["policy"], round(r["ser"], 2)): r for r in rows}
    bad: list[str] = []

    def need(policy: str, ser: float) -> dict | None:
        row = cell.get((policy, round(ser, 2)))
        if row is None:
            bad.append(f"missing sweep cell {policy}@{ser:.1f}")
        return row

    for ser in CHECK_LOW_SERS:
        for policy in ("rule", "dqn"):
            row = need(policy, ser)
            if row is None:
                continue
            if row["success"] < CHECK_LOW_SUCCESS:
                bad.append(f"{policy}@{ser:.1f} success {row['success']:.3f} < {CHECK_LOW_SUCCESS}")
            if row["goal"] < CHECK_LOW_GOALS:
                bad.append(f"{policy}@{ser:.1f} goal {row['goal']:.3f} < {CHECK_LOW_GOALS}")
            lo, hi = CHECK_TURN_RANGE
            if not lo <= row["turn"] <= hi:
                bad.append(f"{policy}@{ser:.1f} turn {row['turn']:.2f} outside [{lo}, {hi}]")

    rule_high = need("rule", 0.5)
    dqn_high = need("dqn", 0.5)
    if rule_high and rule_high["success"] > CHECK_RULE_HIGH_MAX:
        bad.append(f"rule@0.5 success {rule_high['success']:.3f} > {CHECK_RULE_HIGH_MAX}")
    if dqn_high:
        if dqn_high["success"] < CHECK_DQN_HIGH_MIN:
            bad.append(f"dqn@0.5 success {dqn_high['success']:.3f} < {CHECK_DQN_HIGH_MIN}")
        if dqn_high["reward"] <= 0.0:
            bad.append(f"dqn@0.5 reward {dqn_high['reward']:.2f} not positive")
    if rule_high and dqn_high:
        gap = dqn_high["success"] - rule_high["success"]
        if gap < CHECK_GAP_MIN:
            bad.append(f"dqn-rule gap at 0.5 is {gap:.3f} < {CHECK_GAP_MIN}")
    for ser in (0.3, 0.4):
        rule_row, dqn_row = need("rule", ser), need("dqn", ser)
        if rule_row and dqn_row and dqn_row["success"] < rule_row["success"]:
            bad.append(f"dqn@{ser:.1f} success {dqn_row['success']:.3f} "
                       f"below rule {rule_row['success']:.3f}")

    rule_rows = sorted((r for r in rows if r["policy"] == "rule"), key=lambda r: r["ser"])
    for prev, curr in zip(rule_rows, rule_rows[1:]):
        if curr["success"] > prev["success"] + CHECK_TREND_SLACK:
            bad.append(f"rule success rises {prev['success']:.3f} -> {curr['success']:.3f} "
                       f"at ser {curr['ser']:.1f}")
    return bad


def cmd_sweep(args) -> int:
    config = config_from_args(args)
    ontology, dataset = default_setup(config)
    sers = tuple(float(s) for s in args.sers.split(",")) if args.sers else DEFAULT_SWEEP_SERS

    def progress(row):
        print(f"  {row['policy']:<5} ser={row['ser']:.2f} turn={row['turn']:.2f} "
              f"reward={row['reward']:+.2f} goal={row['goal']:.2f} success={row['success']:.3f}")

    rows = ser_sweep(ontology, dataset, config, sers=sers, progress=progress,
                     cache_dir=args.cache_dir)
    text = sweep_csv(rows)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    print(f"sweep: {out} ({len(rows)} rows)")
    if args.plot:
        try:
            import matplotlib
        except ImportError:
            print("plot skipped: matplotlib is not installed")
        else:
            _plot_sweep(rows, args.plot)
            print(f"plot: {args.plot}")
    if args.check:
        violations = acceptance_violations(rows)
        for line in violations:
            print(f"CHECK FAIL: {line}")
        if violations:
            return 1
        print("CHECK OK: all bands hold")
    return 0


def _plot_sweep(rows: list[dict], path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for policy, marker in (("rule", "o"), ("dqn", "s")):
        pts = sorted((r for r in rows if r["policy"] == policy), key=lambda r: r["ser"])
        ax.plot([r["ser"] for r in pts], [r["success"] for r in pts], marker=marker, label=policy)
    ax.set_xlabel("semantic error rate")
    ax.set_ylabel("success rate")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = config_from_args(args)
    static = args.static
    if static is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static = str(bundled) if bundled.is_dir() else None
    app = create_app(config, static_dir=static)
    print(f"serving on http://{args.host}:{args.port}"
          + (f" (static UI from {static})" if static else " (no static UI)"))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convedit")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_dataset = sub.add_parser("dataset", help="generate or inspect the scene dataset")
    dsub = p_dataset.add_subparsers(dest="dataset_cmd", required=True)
    for name, help_text in (("generate", "write scenes to disk"), ("inspect", "summarize scenes")):
        p = dsub.add_parser(name, help=help_text)
        p.add_argument("--root", default="data/scenes", help="dataset directory")
        if name == "inspect":
            p.add_argument("--scene", help="dump one scene's objects")
        add_config_flags(p)
        p.set_defaults(func=cmd_dataset)

    p_train = sub.add_parser("train", help="train one DQN at --ser")
    p_train.add_argument("--out", help="checkpoint path (default checkpoints/dqn_ser<ser>.ckpt)")
    p_train.add_argument("--curve", help="learning-curve CSV path (default <out>.curve.csv)")
    add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a policy on the test split")
    p_eval.add_argument("--policy", choices=("rule", "dqn"), default="rule")
    p_eval.add_argument("--checkpoint", help="DQN checkpoint (required for --policy dqn)")
    add_config_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="rule and per-SER DQN across SER levels")
    p_sweep.add_argument("--out", default="sweep.csv", help="results CSV path")
    p_sweep.add_argument("--sers", help="comma-separated SER list (default 0.0..0.5)")
    p_sweep.add_argument("--cache-dir", help="reuse/train checkpoints here keyed by config")
    p_sweep.add_argument("--plot", help="write a success-vs-SER plot image here")
    p_sweep.add_argument("--check", action="store_true",
                         help="exit nonzero if any acceptance band is violated")
    add_config_flags(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_serve = sub.add_parser("serve", help="run the live session HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--static", help="directory of UI assets to serve at /")
    add_config_flags(p_serve)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
