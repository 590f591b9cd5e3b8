"""CSV serialization of point sets, matchings, traces, flowers and tables.

Every writer has a matching reader; floats are written with 17 significant
digits so that values survive the round trip bit for bit.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .flower import PHI, PSI, Flower
from .geometry import Box, PointSet
from .matching import NONE, Matching
from .queue import QueueTrace
from .rigidity import Ball, RigidityRecord
from .stats import BinnedCurve, EccdfTable, GrTable, SkTable, VarianceTable

_SIDE_NAME = {PHI: "phi", PSI: "psi"}
_SIDE_CODE = {v: k for k, v in _SIDE_NAME.items()}


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _row(values) -> str:
    return ",".join(fmt(v) for v in values)


def _meta_lines(meta: dict) -> list[str]:
    return [f"# {k}={json.dumps(v, sort_keys=True, separators=(',', ':'))}"
            for k, v in meta.items()]


def _parse_meta(lines) -> dict:
    out = {}
    for line in lines:
        key, _, value = line[1:].strip().partition("=")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _sections(text: str):
    """Split into ``(meta_lines, column_line, rows)`` blocks; a block starts at
    a ``#`` line that follows data rows."""
    blocks, meta, cols, rows = [], [], None, []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if rows or cols is not None:
                blocks.append((meta, cols, rows))
                meta, cols, rows = [], None, []
            meta.append(line)
        elif cols is None and not _is_numeric_row(line):
            cols = line.split(",")
        else:
            rows.append(line.split(","))
    blocks.append((meta, cols, rows))
    return blocks


def _is_numeric_row(line: str) -> bool:
    try:
        [float(v) for v in line.split(",")]
        return True
    except ValueError:
        return False


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as f:
        f.write(text)
    return path


# ---------------------------------------------------------------- point sets

def pointset_to_csv(ps: PointSet, meta: dict | None = None) -> str:
    seed = "" if ps.seed is None else int(ps.seed)
    lines = [f"# d={ps.dim} L={fmt(ps.box.side)} label={ps.label} seed={seed}"]
    if not ps.box.periodic:
        lines.append("# periodic=false")
    lines += _meta_lines(meta or {})
    lines += [_row(p) for p in ps.coords]
    return "\n".join(lines) + "\n"


def pointset_from_csv(text: str) -> PointSet:
    lines = [(n, ln.strip()) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines or not lines[0][1].startswith("#"):
        raise ValueError("line 1: missing '# d=<d> L=<L> label=<label> seed=<seed>' header")
    head_no, head = lines[0]
    try:
        fields = dict(tok.split("=", 1) for tok in head[1:].split())
        d, L, label = int(fields["d"]), float(fields["L"]), fields["label"]
    except KeyError as exc:
        raise ValueError(f"line {head_no}: header lacks {exc.args[0]!r}") from None
    except ValueError:
        raise ValueError(f"line {head_no}: malformed header {head!r}") from None
    seed = int(fields["seed"]) if fields.get("seed") else None
    periodic = True
    data = []
    for n, line in lines[1:]:
        if line.startswith("#"):
            if line.replace(" ", "") == "#periodic=false":
                periodic = False
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError:
            raise ValueError(f"line {n}: not a numeric row: {line!r}") from None
        if len(row) != d:
            raise ValueError(f"line {n}: expected {d} coordinates, got {len(row)}")
        data.append(row)
    coords = np.array(data, dtype=float).reshape(-1, d)
    return PointSet(Box(d, L, periodic), coords, label, seed)


# ---------------------------------------------------------------- matchings

def matching_to_csv(m: Matching, meta: dict | None = None) -> str:
    lines = _meta_lines({"n_phi": len(m.phi), "n_psi": len(m.psi), **(meta or {})})
    lines.append("phi_index,psi_index,distance,round")
    dist = np.full(len(m.phi), math.inf)
    matched = m.matched_phi
    dist[matched] = m.distances
    for i in range(len(m.phi)):
        lines.append(_row((i, int(m.partner_of_phi[i]), dist[i], int(m.round_matched[i]))))
    lines.append("# unmatched_psi")
    lines.append("psi_index")
    lines += [str(j) for j in np.flatnonzero(m.partner_of_psi == NONE)]
    return "\n".join(lines) + "\n"


def matching_from_csv(text: str, phi: PointSet, psi: PointSet) -> Matching:
    blocks = _sections(text)
    meta = _parse_meta(blocks[0][0])
    if meta.get("n_phi", len(phi)) != len(phi) or meta.get("n_psi", len(psi)) != len(psi):
        raise ValueError("matching file does not fit the given point sets")
    rows = blocks[0][2]
    partner_phi = np.full(len(phi), NONE, dtype=np.int64)
    rounds = np.full(len(phi), NONE, dtype=np.int64)
    for r in rows:
        i, j, _, rd = int(r[0]), int(r[1]), r[2], int(r[3])
        partner_phi[i] = j
        rounds[i] = rd
    partner_psi = np.full(len(psi), NONE, dtype=np.int64)
    ok = partner_phi >= 0
    partner_psi[partner_phi[ok]] = np.flatnonzero(ok)
    return Matching(phi, psi, partner_phi, partner_psi, rounds)


def matching_distances_from_csv(text: str) -> np.ndarray:
    """Partner distances of the matched rows, without the point sets."""
    rows = _sections(text)[0][2]
    return np.array([float(r[2]) for r in rows if int(r[1]) >= 0])


# ---------------------------------------------------------------- rigidity

_RIGIDITY_COLS = "seed,center,radius,z1,z2,z3,recovered,truth,inconclusive"


def rigidity_to_csv(records, seeds, meta: dict | None = None) -> str:
    lines = _meta_lines(meta or {}) + [_RIGIDITY_COLS]
    for s, r in zip(seeds, records):
        center = " ".join(fmt(c) for c in r.ball.center)
        lines.append(f"{int(s)},{center},{fmt(r.ball.radius)},{r.z1},{r.z2},{r.z3},"
                     f"{r.recovered},{r.truth},{int(r.inconclusive)}")
    return "\n".join(lines) + "\n"


def rigidity_from_csv(text: str):
    """``(seeds, records)``; the inconclusive reason is not stored."""
    rows = _sections(text)[0][2]
    seeds, records = [], []
    for r in rows:
        center = tuple(float(v) for v in r[1].split())
        seeds.append(int(r[0]))
        records.append(RigidityRecord(Ball(center, float(r[2])), int(r[3]), int(r[4]),
                                      int(r[5]), int(r[7]), bool(int(r[8]))))
    return seeds, records


# ---------------------------------------------------------------- queue traces

def queue_trace_to_csv(trace: QueueTrace, meta: dict | None = None) -> str:
    lines = _meta_lines({"warmup": trace.warmup, **(meta or {})})
    lines.append("t,L")
    lines += [_row((t, n)) for t, n in zip(trace.times, trace.L)]
    lines += ["# outputs", "x"] + [fmt(x) for x in trace.outputs]
    lines += ["# waiting", "y"] + [fmt(y) for y in trace.waiting]
    return "\n".join(lines) + "\n"


def queue_trace_from_csv(text: str) -> QueueTrace:
    blocks = _sections(text)
    meta = _parse_meta(blocks[0][0])
    tl = np.array(blocks[0][2], dtype=float).reshape(-1, 2)
    named = {b[0][0][1:].strip(): b[2] for b in blocks[1:]}
    outputs = np.array([float(r[0]) for r in named.get("outputs", [])])
    waiting = np.array([float(r[0]) for r in named.get("waiting", [])])
    return QueueTrace(tl[:, 0].astype(np.int64), tl[:, 1].astype(np.int64), outputs, waiting,
                      float(meta.get("warmup", 0.0)))


# ---------------------------------------------------------------- flowers

def _node(key) -> str:
    return f"{_SIDE_NAME[key[0]]}:{int(key[1])}"


def _parse_node(s: str):
    if s in ("", "none"):
        return None
    side, idx = s.split(":")
    return (_SIDE_CODE[side], int(idx))


def flower_to_csv(f: Flower, meta: dict | None = None) -> str:
    keys = sorted(f.radii)
    head = {
        "anchor": _node(f.anchor),
        "anchor_coords": [float(v) for v in np.atleast_1d(f.anchor_coords)],
        "partner": _node(f.partner) if f.partner is not None else "none",
        "bounding_radius": "inf" if f.whole_domain else float(f.bounding_radius),
        "whole_domain": bool(f.whole_domain),
        "nodes": [_node(k) for k in keys],
        "box": None if f.box is None else [f.box.dim, float(f.box.side), f.box.periodic],
        **(meta or {}),
    }
    d = len(np.atleast_1d(f.anchor_coords))
    lines = _meta_lines(head)
    lines.append(",".join([f"cx_{i + 1}" for i in range(d)] + ["radius"]))
    lines += [_row([*np.atleast_1d(f.centers[k]), f.radii[k]]) for k in keys]
    return "\n".join(lines) + "\n"


def flower_from_csv(text: str) -> Flower:
    meta_lines, _, rows = _sections(text)[0]
    meta = _parse_meta(meta_lines)
    keys = [_parse_node(s) for s in meta.get("nodes", [])]
    if len(keys) != len(rows):
        raise ValueError("flower file: node list and ball rows differ in length")
    centers, radii = {}, {}
    for k, r in zip(keys, rows):
        vals = [float(v) for v in r]
        centers[k] = np.array(vals[:-1])
        radii[k] = vals[-1]
    box = Box(int(meta["box"][0]), float(meta["box"][1]), bool(meta["box"][2])) \
        if meta.get("box") else None
    return Flower(_parse_node(meta["anchor"]), np.array(meta["anchor_coords"], float),
                  _parse_node(meta["partner"]), radii, centers,
                  bool(meta.get("whole_domain", False)), box)


# ---------------------------------------------------------------- stat tables

def eccdf_to_csv(t: EccdfTable, meta: dict | None = None) -> str:
    lines = _meta_lines({"n": t.n, **t.meta, **(meta or {})}) + ["r,tail"]
    lines += [_row(v) for v in zip(t.r, t.tail)]
    return "\n".join(lines) + "\n"


def eccdf_from_csv(text: str) -> EccdfTable:
    meta_lines, _, rows = _sections(text)[0]
    meta = _parse_meta(meta_lines)
    a = np.array(rows, dtype=float).reshape(-1, 2)
    n = int(meta.pop("n"))
    return EccdfTable(a[:, 0], a[:, 1], n, meta)


def _binned_lines(b: BinnedCurve) -> list[str]:
    lines = ["# binned", "k_center,mean,se,count,k_mean"]
    lines += [_row((c, m, s, int(n), x)) for c, m, s, n, x in
              zip(b.center, b.mean, b.se, b.count, b.x_mean)]
    return lines


def _binned_from_rows(rows) -> BinnedCurve:
    a = np.array(rows, dtype=float).reshape(-1, 5)
    return BinnedCurve(a[:, 0], a[:, 1], a[:, 2], a[:, 3].astype(np.int64), a[:, 4])


def sk_to_csv(t: SkTable, meta: dict | None = None) -> str:
    d = t.modes.shape[1]
    lines = _meta_lines({"L": float(t.L), "d": d, "n_points": t.n_points,
                         **t.meta, **(meta or {})})
    lines.append(",".join([f"m_{i + 1}" for i in range(d)] + ["k", "S", "bragg"]))
    for m, k, s, b in zip(t.modes, t.knorm, t.S, t.bragg):
        lines.append(_row([*m, k, s, int(b)]))
    if t.bins is not None:
        lines += _binned_lines(t.bins)
    return "\n".join(lines) + "\n"


def sk_from_csv(text: str) -> SkTable:
    blocks = _sections(text)
    meta = _parse_meta(blocks[0][0])
    d = int(meta.pop("d"))
    L = float(meta.pop("L"))
    n_points = int(meta.pop("n_points"))
    a = np.array(blocks[0][2], dtype=float).reshape(-1, d + 3)
    bins = _binned_from_rows(blocks[1][2]) if len(blocks) > 1 else None
    return SkTable(L, a[:, :d].astype(np.int64), a[:, d + 1], a[:, d + 2].astype(bool),
                   n_points, bins, meta)


def binned_to_csv(b: BinnedCurve, meta: dict | None = None) -> str:
    return "\n".join(_meta_lines(meta or {}) + _binned_lines(b)[1:]) + "\n"


def binned_from_csv(text: str) -> BinnedCurve:
    return _binned_from_rows(_sections(text)[0][2])


def variance_to_csv(t: VarianceTable, meta: dict | None = None) -> str:
    lines = _meta_lines({"n_windows": t.n_windows, **t.meta, **(meta or {})})
    lines.append("R,mean,variance,se")
    lines += [_row(v) for v in zip(t.radii, t.mean, t.variance, t.se)]
    return "\n".join(lines) + "\n"


def variance_from_csv(text: str) -> VarianceTable:
    meta_lines, _, rows = _sections(text)[0]
    meta = _parse_meta(meta_lines)
    a = np.array(rows, dtype=float).reshape(-1, 4)
    n = int(meta.pop("n_windows"))
    return VarianceTable(a[:, 0], a[:, 1], a[:, 2], a[:, 3], n, meta)


def gr_to_csv(t: GrTable, meta: dict | None = None) -> str:
    lines = _meta_lines({"n_samples": t.n_samples, **t.meta, **(meta or {})})
    lines.append("r_lo,r_hi,g,se,pairs,expected")
    lines += [_row(v) for v in zip(t.edges[:-1], t.edges[1:], t.g, t.se,
                                    t.pair_counts, t.expected)]
    return "\n".join(lines) + "\n"


def gr_from_csv(text: str) -> GrTable:
    meta_lines, _, rows = _sections(text)[0]
    meta = _parse_meta(meta_lines)
    a = np.array(rows, dtype=float).reshape(-1, 6)
    edges = np.r_[a[:, 0], a[-1, 1]] if len(a) else np.zeros(1)
    n = int(meta.pop("n_samples", 1))
    return GrTable(edges, a[:, 2], a[:, 3], a[:, 4], a[:, 5], n, meta)


def read_table(text: str):
    """Dispatch on the column line of a table file."""
    blocks = _sections(text)
    cols = tuple(blocks[0][1] or ())
    if cols == ("r", "tail"):
        return eccdf_from_csv(text)
    if cols[-3:] == ("k", "S", "bragg"):
        return sk_from_csv(text)
    if cols and cols[0] == "k_center":
        return binned_from_csv(text)
    if cols == ("R", "mean", "variance", "se"):
        return variance_from_csv(text)
    if cols[:3] == ("r_lo", "r_hi", "g"):
        return gr_from_csv(text)
    raise ValueError(f"unrecognised table columns {cols}")


def read_pointset(path) -> PointSet:
    return pointset_from_csv(Path(path).read_text())

