"""Campaign reports (JSON plus CSV plot data) and the on-disk corpus layout."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SeedFormatError
from .fuzz import Seed, seed_id
from .pipeline import PipelineResult
from .seedfile import format_seed, read_seed

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CAMPAIGN_JSON = "campaign.json"
TIMELINE_CSV = "coverage_timeline.csv"
WALLTIME_CSV = "coverage_walltime.csv"
TARGETS_CSV = "targets.csv"


def _pct(x: float) -> float:
    return round(float(x), 6)


def campaign_document(res: PipelineResult) -> dict:
    """Everything the reports need, as plain JSON-ready data."""
    nl = res.netlist
    camp = res.campaign
    name = lambda n: nl.net_name(n)  # noqa: E731
    bins_of: dict[int, list[str]] = {}
    for i, b in enumerate(res.patterns):
        for n in b.members_0:
            bins_of.setdefault(n, []).append(f"0@{i}")
        for n in b.members_1:
            bins_of.setdefault(n, []).append(f"1@{i}")

    rows = []
    cov = camp.coverage if camp is not None else None
    for n in res.targets:
        first0 = first1 = None
        if cov is not None:
            i = cov.index[n]
            first0, first1 = cov.first0[i], cov.first1[i]
        cost = res.selection.costs.get(n)
        rows.append({"net": name(n), "cost": None if cost is None else _pct(cost),
                     "bins": " ".join(bins_of.get(n, [])), "first0": first0, "first1": first1})

    doc = {
        "schema_version": SCHEMA_VERSION,
        "design": {"name": nl.name, **nl.stats()},
        "config": res.config.to_dict(),
        "selection": {"strategy": res.selection.strategy, "selected": len(res.selection),
                      "after_conflicts": len(res.targets)},
        "merge": {"n0": len(set(res.members_0)), "n1": len(set(res.members_1)),
                  "nc": len(res.conflicts), "conflicts": [name(n) for n in res.conflicts],
                  "untestable": [name(n) for n in (res.p_all.untestable if res.p_all else
                                                   res.submodule.untestable if res.submodule else [])],
                  "bins": res.bin_stats()},
        "seeds": [{"cycles": s.cycles, "activation_cycles": list(s.activation_cycles)} for s in res.seeds],
        "targets": rows,
        "timings": {k: round(v, 6) for k, v in res.timings.items()},
    }
    if camp is None:
        doc["campaign"] = None
        return doc
    doc["campaign"] = {
        "mode": camp.config.mode,
        "termination_reason": camp.termination_reason,
        "goal": camp.config.coverage_goal,
        "goal_reached": camp.goal_reached,
        "final_coverage_pct": _pct(camp.final_coverage),
        "covered": camp.coverage.covered(),
        "iterations": camp.iterations,
        "sim_cycles": camp.sim_cycles,
        "cycles_to_goal": camp.cycles_to(),
        "cycles_to_goal_seed": camp.cycles_to_goal,
        "wall_s": round(camp.wall_s, 6),
        "last_admitted": camp.last_admitted,
        "archive": [{"id": s.id, "parent": s.parent, "gained": _pct(s.gained), "stage": s.stage,
                     "cycles": s.cycles} for s in camp.archive],
        "pool": [s.id for s in camp.pool],
        "timeline": [{"wall_ms": p.wall_ms, "iterations": p.iterations, "sim_cycles": p.sim_cycles,
                      "coverage_pct": _pct(p.coverage_pct)} for p in camp.timeline],
    }
    return doc


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def render_tables(doc: dict) -> dict[str, str]:
    """CSV texts derived from a campaign document alone."""
    camp = doc.get("campaign") or {}
    tl = camp.get("timeline", [])
    # the iteration/cycle series is deterministic; wall time goes in its own file
    timeline = [["iterations", "sim_cycles", "coverage_pct"]]
    timeline += [[p["iterations"], p["sim_cycles"], _num(float(p["coverage_pct"]))] for p in tl]
    wall = [["wall_ms", "iterations", "coverage_pct"]]
    wall += [[_num(float(p["wall_ms"])), p["iterations"], _num(float(p["coverage_pct"]))] for p in tl]
    targets = [["net", "cost", "bins", "first0", "first1"]]
    targets += [[r["net"], _num(r["cost"]), r["bins"], _num(r["first0"]), _num(r["first1"])]
                for r in doc.get("targets", [])]
    return {TIMELINE_CSV: _csv(timeline), WALLTIME_CSV: _csv(wall), TARGETS_CSV: _csv(targets)}


def summary_text(doc: dict) -> str:
    d = doc["design"]
    m = doc["merge"]
    lines = [f"design {d['name']}: {d['pis']} PIs, {d['pos']} POs, {d['gates']} gates, {d['nets']} nets",
             f"targets: {doc['selection']['selected']} selected ({doc['selection']['strategy']}), "
             f"{doc['selection']['after_conflicts']} after conflicts",
             f"merge: |N0|={m['n0']} |N1|={m['n1']} |NC|={m['nc']} bins={len(m['bins'])}"]
    camp = doc.get("campaign")
    if camp:
        lines.append(f"campaign ({camp['mode']}): {camp['termination_reason']}, "
                     f"coverage {camp['final_coverage_pct']:.2f}% (goal {camp['goal']:g}%), "
                     f"{camp['iterations']} iterations, {camp['sim_cycles']} cycles, "
                     f"{camp['wall_s']:.2f} s")
        if camp["cycles_to_goal"] is not None:
            lines.append(f"goal reached after {camp['cycles_to_goal']} simulated cycles")
    return "\n".join(lines) + "\n"


def write_tables(doc: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for fname, text in render_tables(doc).items():
        p = out / fname
        p.write_text(text)
        paths.append(p)
    return paths


def write_report(res: PipelineResult, out_dir: str | Path, corpus: bool = True) -> list[Path]:
    """campaign.json, the CSV tables and (optionally) the corpus directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = campaign_document(res)
    p = out / CAMPAIGN_JSON
    p.write_text(json.dumps(doc, indent=2) + "\n")
    paths = [p] + write_tables(doc, out)
    if corpus and res.campaign is not None:
        save_corpus(out / "corpus", res.campaign.pool, res.campaign.archive)
    return paths


def load_document(path: str | Path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / CAMPAIGN_JSON
    doc = json.loads(path.read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported campaign.json schema {doc.get('schema_version')!r}")
    return doc


# --------------------------------------------------------------------------
# corpus directory


@dataclass
class LoadedCorpus:
    queue: list[Seed] = field(default_factory=list)
    archive: list[Seed] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (path, reason)


def save_corpus(directory: str | Path, queue, archive) -> None:
    d = Path(directory)
    for sub, seeds in (("queue", queue), ("archive", archive)):
        (d / sub).mkdir(parents=True, exist_ok=True)
        for s in seeds:
            (d / sub / f"{s.id}.seed").write_text(format_seed(s.vectors))


def load_corpus(directory: str | Path, width: int | None = None, order: dict | None = None) -> LoadedCorpus:
    """Read ``queue/`` and ``archive/`` seeds, skipping anything malformed.

    ``order`` may map ``"archive"``/``"queue"`` to id lists (as recorded in
    campaign.json) to restore admission order; otherwise files load by name.
    """
    d = Path(directory)
    out = LoadedCorpus()
    for sub in ("queue", "archive"):
        folder = d / sub
        if not folder.is_dir():
            continue
        seeds = {}
        for p in sorted(folder.iterdir()):
            if p.suffix != ".seed" or not p.is_file():
                log.warning("ignoring unknown corpus file %s", p)
                out.skipped.append((str(p), "unknown file"))
                continue
            try:
                vec = read_seed(p, width)
            except SeedFormatError as e:
                log.warning("skipping seed %s: %s", p, e)
                out.skipped.append((str(p), str(e)))
                continue
            if seed_id(vec) != p.stem:
                log.warning("skipping seed %s: contents do not match its id", p)
                out.skipped.append((str(p), "id mismatch"))
                continue
            seeds[p.stem] = Seed(vec, id=p.stem)
        ids = list(seeds)
        if order and order.get(sub):
            rank: dict[str, int] = {}
            for i, sid in enumerate(order[sub]):
                rank.setdefault(sid, i)
            ids.sort(key=lambda sid: (rank.get(sid, len(rank)), sid))
        getattr(out, sub).extend(seeds[i] for i in ids)
    return out


def corpus_order(doc: dict) -> dict[str, list[str]]:
    camp = doc.get("campaign") or {}
    return {"archive": [a["id"] for a in camp.get("archive", [])], "queue": list(camp.get("pool", []))}
