"""Batch search benchmark: worlds x targets x policies, merged in episode order."""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import bundled
from .corpus import build_graph, load_corpus, load_ontology
from .search import run_policy
from .world import generate_world, save_world

EPISODE_FIELDS = ["episode", "seed", "policy", "target", "success", "p", "l", "spl_term", "candidates_tried"]
SUMMARY_FIELDS = ["policy", "episodes", "successes", "sr", "spl"]


def load_inputs(cfg):
    """(ontology, triples, graph) from the configured or bundled files."""
    onto_src = cfg.ontology_path or bundled("ontology.tsv")
    corpus_src = cfg.corpus_path or bundled("corpus.tsv")
    ontology = load_ontology(onto_src)
    triples = load_corpus(corpus_src, ontology)
    return ontology, triples, build_graph(triples, ontology)


def _cell(job):
    seed, target, policies, model, ontology, graph, wcfg, limit, detector = job
    world = generate_world(seed, ontology, graph, n_stationary=wcfg["n_stationary"],
                           n_movable=wcfg["n_movable"], width=wcfg["width"], height=wcfg["height"],
                           target=target, receptacle_prob=wcfg["receptacle_prob"],
                           partitions=wcfg["partitions"])
    return world, [run_policy(world, p, model, limit, detector) for p in policies]


def run_bench(cfg, model, ontology, graph, out=None):
    """One episode per (seed, target, policy); returns (rows, results).

    Worlds are generated per (seed, target) so all policies face the same
    household.  With ``jobs > 1`` cells run in worker processes; output
    order never depends on scheduling.
    """
    wcfg = cfg.world
    jobs = [(seed, target, cfg.policies, model, ontology, graph, wcfg, cfg.limit, cfg.detector)
            for seed in cfg.seeds for target in wcfg["targets"]]
    n_jobs = int(cfg.raw["jobs"])
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            cells = list(pool.map(_cell, jobs))
    else:
        cells = [_cell(j) for j in jobs]
    rows, results = [], []
    for (seed, target, *_), (world, res) in zip(jobs, cells):
        for r in res:
            i = len(rows)
            rows.append({"episode": i, "seed": seed, "policy": r.policy, "target": target,
                         "success": int(r.success), "p": r.p, "l": "" if r.l is None else r.l,
                         "spl_term": repr(float(r.spl_term)), "candidates_tried": ";".join(r.candidates)})
            results.append(r)
            if out is not None and cfg.raw["traces"]:
                tdir = Path(out) / "traces"
                tdir.mkdir(parents=True, exist_ok=True)
                (tdir / f"episode_{i:04d}.jsonl").write_text("\n".join(r.trace_lines()) + "\n", encoding="utf-8")
                wpath = Path(out) / "worlds" / f"world_{seed}_{target}.json"
                if not wpath.exists():
                    wpath.parent.mkdir(parents=True, exist_ok=True)
                    save_world(world, wpath)
    return rows, results


def summarize(rows):
    """Per-policy SR and SPL, policies in first-appearance order."""
    order = list(dict.fromkeys(r["policy"] for r in rows))
    out = []
    for p in order:
        mine = [r for r in rows if r["policy"] == p]
        terms = [float(r["spl_term"]) for r in mine]
        succ = sum(int(r["success"]) for r in mine)
        row = {"policy": p, "episodes": len(mine), "successes": succ, "sr": succ / len(mine),
               "spl": sum(terms) / len(terms)}
        out.append(row)
    return out


def write_csv(rows, fields, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def format_table(summary):
    lines = [f"{'Policy':<16}{'SR':>9}{'SPL':>9}{'Episodes':>10}"]
    for r in summary:
        lines.append(f"{r['policy']:<16}{100 * r['sr']:>8.2f}%{r['spl']:>9.4f}{r['episodes']:>10}")
    return "\n".join(lines)
