"""Artifact writers: scheme, timeline, stage table, GA history, DOT skeleton.

Every writer produces byte-stable output for identical inputs; files are
written through a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

from .grid_model import GridModel
from .simulate import RestorationScheme, Timeline, stage_table

__all__ = [
    "TIMELINE_HEADER",
    "timeline_rows",
    "write_atomic",
    "write_scheme",
    "read_scheme",
    "write_timeline",
    "write_stages",
    "write_history",
    "write_profile",
    "skeleton_dot",
    "write_manifest",
]

TIMELINE_HEADER = ("t_min", "sum_p_mw", "p_d_mw", "s_sc_mva", "m_f_mw_per_hz", "scr", "restored_load_mw")


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _mw(x) -> str:
    return "" if x is None else f"{x:.2f}"


def _pu(x) -> str:
    return "" if x is None else f"{x:.3f}"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def write_scheme(path, scheme: RestorationScheme) -> Path:
    return write_atomic(path, _json(scheme.to_dict()))


def read_scheme(path) -> RestorationScheme:
    with open(path, encoding="utf-8") as fh:
        return RestorationScheme.from_dict(json.load(fh))


def timeline_rows(timeline: Timeline) -> list[dict]:
    """One record per time step; SCR is empty while the HVDC carries no power."""
    rows = []
    for s in timeline.steps:
        p_d = s.hvdc.p_d
        rows.append(
            {
                "t_min": s.t,
                "sum_p_mw": s.sum_p,
                "p_d_mw": p_d,
                "s_sc_mva": s.strength.scc,
                "m_f_mw_per_hz": s.strength.frc,
                "scr": s.strength.scc / p_d if p_d > 0 else None,
                "restored_load_mw": s.restored_load,
            }
        )
    return rows


def write_timeline(path, timeline: Timeline, fmt: str = "csv") -> Path:
    rows = timeline_rows(timeline)
    if fmt == "json":
        doc = [
            {k: (None if v is None else round(v, 3 if k == "scr" else 2)) for k, v in r.items()} for r in rows
        ]
        return write_atomic(path, _json(doc))
    table = [
        [
            _mw(r["t_min"]),
            _mw(r["sum_p_mw"]),
            _mw(r["p_d_mw"]),
            _mw(r["s_sc_mva"]),
            _mw(r["m_f_mw_per_hz"]),
            _pu(r["scr"]),
            _mw(r["restored_load_mw"]),
        ]
        for r in rows
    ]
    return write_atomic(path, _csv(TIMELINE_HEADER, table))


def write_stages(path, model: GridModel, timeline: Timeline, fmt: str = "csv") -> Path:
    rows = stage_table(model, timeline)
    if fmt == "json":
        return write_atomic(path, _json(rows))
    table = [
        [
            r["stage"],
            "" if r["source"] is None else r["source"],
            _mw(r["start_time"]),
            _mw(r["connect_time"]),
            "-".join(str(b) for b in r["path"]),
            _mw(r["p_d"]),
        ]
        for r in rows
    ]
    return write_atomic(path, _csv(("stage", "source", "start_time_min", "connect_time_min", "path", "p_d_mw"), table))


def write_history(path, history, fmt: str = "csv") -> Path:
    if fmt == "json":
        doc = [
            {"generation": h.generation, "subpop": h.subpop, "best_f": h.best_f, "mean_f": h.mean_f,
             "feasible_count": h.feasible_count, "global_best_f": h.global_best_f}
            for h in history
        ]
        return write_atomic(path, _json(doc))
    table = [
        [h.generation, h.subpop, _mw(h.best_f), _mw(h.mean_f), h.feasible_count, _mw(h.global_best_f)] for h in history
    ]
    return write_atomic(path, _csv(("generation", "subpop", "best_f", "mean_f", "feasible_count", "global_best_f"), table))


def write_profile(path, timeline: Timeline) -> Path:
    """DC power ceiling step function as ``time_min, p_d_up_mw``."""
    table = [[_mw(t), _mw(c)] for t, c in timeline.profile().steps]
    return write_atomic(path, _csv(("time_min", "p_d_up_mw"), table))


def skeleton_dot(model: GridModel, timeline: Timeline) -> str:
    """Graphviz description of the restored skeleton network.

    Tree branches are solid, loop-closing branches dashed, generator nodes
    drawn as boxes and the HVDC node double-circled.
    """
    loops = set(timeline.loop_branches)
    nodes = set()
    for b in timeline.scheme.order:
        nodes.update(model.branch(b).endpoints)
    gen_nodes = {g.node for g in model.generators}
    hv = model.hvdc.node if model.hvdc is not None else None
    lines = ["graph skeleton {", "  node [shape=circle];"]
    for n in sorted(nodes):
        if n == hv:
            attr = ' [shape=doublecircle, label="%d HVDC"]' % n
        elif n in gen_nodes:
            attr = " [shape=box]"
        else:
            attr = ""
        lines.append(f"  {n}{attr};")
    for k, b in enumerate(timeline.scheme.order, start=1):
        i, j = model.branch(b).endpoints
        style = "dashed" if b in loops else "solid"
        lines.append(f'  {i} -- {j} [label="{b} ({k})", style={style}];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_manifest(path, manifest: dict) -> Path:
    return write_atomic(path, _json(manifest))
