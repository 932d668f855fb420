"""``cosearch`` command line: train, eval-links, gen-world, search-bench, instruct, replay."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .corpus import CorpusError
from .experiment import (EPISODE_FIELDS, SUMMARY_FIELDS, format_table, load_inputs, run_bench, summarize,
                         write_csv)
from .gat import load_checkpoint, save_checkpoint
from .planning.pipeline import FIXTURE_NAMES, load_fixture, run_instruction
from .planning.planner import format_plan
from .report import plot_loss, plot_summary, render_world
from .search import POLICIES
from .train import split_pairs, train, training_accuracy, validation_accuracy, write_loss_csv
from .world import RobotState, generate_world, load_world, save_world, step

USAGE_ERROR = 2


class UsageError(Exception):
    pass


def _config(args, **extra):
    overrides = {}
    if getattr(args, "out", None):
        overrides["out"] = args.out
    if getattr(args, "checkpoint", None):
        overrides["checkpoint"] = args.checkpoint
    if getattr(args, "limit", None) is not None:
        overrides["limit"] = args.limit
    if getattr(args, "policy", None):
        names = [p for item in args.policy for p in item.split(",") if p]
        bad = [p for p in names if p not in POLICIES]
        if bad:
            raise UsageError(f"unknown policy {bad[0]!r}; expected one of {', '.join(POLICIES)}")
        overrides["policies"] = names
    overrides.update(extra)
    cfg = load_config(args.config, overrides=overrides)
    return cfg.validate()


def _model(cfg, ontology=None):
    if not cfg.checkpoint.exists():
        raise FileNotFoundError(f"checkpoint not found: {cfg.checkpoint} (run 'cosearch train' first)")
    model = load_checkpoint(cfg.checkpoint)
    if ontology is not None:
        missing = [n for n in ontology if n not in set(model.vocab)]
        if missing:
            raise ConfigError(f"checkpoint {cfg.checkpoint} was trained on a different ontology; "
                              f"{len(missing)} categories missing, e.g. {missing[0]!r}")
    return model


def cmd_train(args):
    extra = {"train": {"seed": args.seed}} if args.seed is not None else {}
    cfg = _config(args, **extra)
    ontology, _, graph = load_inputs(cfg)
    model, split = train(graph, cfg.train, cfg.model)
    cfg.out.mkdir(parents=True, exist_ok=True)
    cfg.checkpoint.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, cfg.checkpoint)
    write_loss_csv(model, cfg.out / "loss.csv")
    plot_loss(model.history, cfg.out / "loss.png")
    print(f"graph: {len(graph.nodes)} categories, {graph.num_edges()} edges")
    print(f"train link accuracy: {training_accuracy(model, split):.4f}")
    print(f"validation link accuracy: {validation_accuracy(model, split):.4f}")
    print(f"checkpoint: {cfg.checkpoint}")
    return 0


def cmd_eval_links(args):
    cfg = _config(args)
    ontology, _, graph = load_inputs(cfg)
    model = _model(cfg)
    tc = cfg.train
    split = split_pairs(graph, tc.train_fraction, tc.seed)
    rows = [{"split": "train", "pairs": len(split.train_pos) + len(split.train_neg),
             "accuracy": training_accuracy(model, split)},
            {"split": "validation", "pairs": len(split.val_pairs), "accuracy": validation_accuracy(model, split)}]
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, ["split", "pairs", "accuracy"], cfg.out / "link_accuracy.csv")
    for r in rows:
        print(f"{r['split']:<11} pairs={r['pairs']:<6} accuracy={r['accuracy']:.4f}")
    return 0


def cmd_gen_world(args):
    cfg = _config(args)
    ontology, _, graph = load_inputs(cfg)
    w = cfg.world
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    world = generate_world(seed, ontology, graph, n_stationary=w["n_stationary"], n_movable=w["n_movable"],
                           width=w["width"], height=w["height"], target=args.target,
                           receptacle_prob=w["receptacle_prob"], partitions=w["partitions"])
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / f"world_{seed}.json"
    save_world(world, path)
    render_world(world, cfg.out / f"world_{seed}.svg", title=f"seed {seed}, target {world.target}")
    print(f"world: {path} ({world.width}x{world.height}, target {world.target})")
    return 0


def cmd_search_bench(args):
    extra = {"world": {"seeds": [args.seed]}} if args.seed is not None else {}
    if args.jobs is not None:
        extra["jobs"] = args.jobs
    cfg = _config(args, **extra)
    ontology, _, graph = load_inputs(cfg)
    model = _model(cfg, ontology) if "gnn" in cfg.policies else None
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows, _ = run_bench(cfg, model, ontology, graph, cfg.out)
    summary = summarize(rows)
    write_csv(rows, EPISODE_FIELDS, cfg.out / "episodes.csv")
    write_csv(summary, SUMMARY_FIELDS, cfg.out / "summary.csv")
    plot_summary(summary, cfg.out / "sr_spl.png")
    print(format_table(summary))
    return 0


def cmd_instruct(args):
    cfg = _config(args)
    ontology, _, _ = load_inputs(cfg)
    if args.fixture:
        world, default_text = load_fixture(args.fixture)
    elif args.world:
        world, default_text = load_world(args.world), None
    else:
        raise UsageError("instruct needs --fixture NAME or --world PATH")
    text = args.instruction or default_text
    if not text:
        raise UsageError("no instruction given")
    model = _model(cfg)
    rep = run_instruction(text, world, model, ontology, limit=cfg.limit, detector=cfg.detector)
    cfg.out.mkdir(parents=True, exist_ok=True)
    print(f"instruction: {text}")
    if rep.goal is not None:
        print(f"goal: action={rep.goal.action} subject={rep.goal.subject} object={rep.goal.object}")
    if rep.plan is not None:
        (cfg.out / "plan.txt").write_text(format_plan(rep.plan), encoding="utf-8")
        print("plan: " + (" -> ".join(str(s) for s in rep.plan) or "(empty)"))
    if rep.outcome is not None:
        with open(cfg.out / "instruct_steps.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "step", "stage", "ok", "actions", "message"])
            for s in rep.outcome.steps:
                w.writerow([s.index, s.step, s.stage, int(s.ok), s.actions, s.message])
                print(f"  [{s.index}] {s.step:<28} {'ok' if s.ok else 'FAILED':<7} actions={s.actions}"
                      + (f"  {s.message}" if s.message else ""))
        render_world(world, cfg.out / "instruct.svg", cells=rep.outcome.path, title=text)
        print(f"Nav={'success' if rep.nav else 'failure'} Exe={'success' if rep.exe else 'failure'} "
              f"actions={rep.outcome.actions}")
    if rep.error is not None:
        print(f"stage={rep.stage} error: {rep.error}")
        return 1
    return 0


def cmd_replay(args):
    """Re-simulate a trace's actions and check every recorded pose."""
    cfg = _config(args)
    world = load_world(args.world)
    lines = Path(args.trace).read_text(encoding="utf-8").splitlines()
    head, records = json.loads(lines[0]), [json.loads(x) for x in lines[1:]]
    world = world.with_target(head["target"])
    robot = world.start
    for rec in records:
        if rec["action"] is not None:
            robot, blocked = step(world, robot, rec["action"])
            if blocked != rec["blocked"]:
                raise ValueError(f"t={rec['t']}: blocked flag differs from the recorded trace")
        if list(robot.cell) != rec["cell"] or robot.heading != rec["heading"]:
            raise ValueError(f"t={rec['t']}: replayed pose {robot} differs from recorded {rec['cell']}")
    cfg.out.mkdir(parents=True, exist_ok=True)
    dets = [(r["t"], (d[1], d[2])) for r in records for d in r["detections"] if d[0] == head["target"]]
    out = cfg.out / (Path(args.trace).stem + ".svg")
    render_world(world, out, cells=[tuple(r["cell"]) for r in records], detections=dets,
                 title=f"{head['policy']} -> {head['target']}: {'success' if head['success'] else 'failure'}")
    print(f"replayed {len(records) - 1} actions; final pose {RobotState(tuple(records[-1]['cell']), records[-1]['heading'])}")
    print(f"render: {out}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--out", help="output directory")
    common.add_argument("--checkpoint", help="model checkpoint (default: <out>/model.ckpt)")
    common.add_argument("--seed", type=int, help="seed override")
    common.add_argument("--limit", type=int, help="step limit per episode")
    common.add_argument("--policy", action="append", help="policy (repeatable or comma separated)")
    parser = argparse.ArgumentParser(prog="cosearch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train the link predictor").set_defaults(fn=cmd_train)
    sub.add_parser("eval-links", parents=[common], help="link accuracy of a checkpoint").set_defaults(fn=cmd_eval_links)
    p = sub.add_parser("gen-world", parents=[common], help="generate and save one household")
    p.add_argument("--target")
    p.set_defaults(fn=cmd_gen_world)
    p = sub.add_parser("search-bench", parents=[common], help="run the search benchmark")
    p.add_argument("--jobs", type=int)
    p.set_defaults(fn=cmd_search_bench)
    p = sub.add_parser("instruct", parents=[common], help="follow one instruction")
    p.add_argument("instruction", nargs="?")
    p.add_argument("--fixture", choices=FIXTURE_NAMES)
    p.add_argument("--world")
    p.set_defaults(fn=cmd_instruct)
    p = sub.add_parser("replay", parents=[common], help="verify and render an episode trace")
    p.add_argument("--world", required=True)
    p.add_argument("--trace", required=True)
    p.set_defaults(fn=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, ConfigError, FileNotFoundError) as e:
        print(f"cosearch {args.command}: {e}", file=sys.stderr)
        return USAGE_ERROR
    except (CorpusError, ValueError, KeyError, RuntimeError) as e:
        print(f"cosearch {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
