"""File formats: count tables, categorical networks, covariates, samples and summaries.

Label files and sample files use 1-based cluster labels; in-memory arrays are
0-based.
"""

from __future__ import annotations

import csv
import io as _io
import json
import os
from pathlib import Path

import numpy as np

from .core import Covariates, DataError, NetworkSequence
from .samples import SampleSet
from .summaries import PosteriorSummary

SAMPLE_FORMAT = "depsbm-samples"
SAMPLE_VERSION = "1"
DEFAULT_THRESHOLDS = (0, 10, 100)


def _fmt(v) -> str:
    return repr(float(v))


def _sorted_index(values):
    """Numeric index labels sort numerically, anything else keeps first-appearance order."""
    uniq = list(dict.fromkeys(values))
    try:
        return sorted(uniq, key=lambda s: float(s))
    except ValueError:
        return uniq


def _read_rows(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not a text file ({exc.reason})") from None
    rows = [(k + 1, r) for k, r in enumerate(rows) if r and not (len(r) == 1 and not r[0].strip())]
    if not rows:
        raise DataError(f"{path}: empty file")
    return rows


def _int_cell(path, lineno, value, what):
    try:
        return int(value)
    except ValueError:
        raise DataError(f"{path}:{lineno}: {what} {value!r} is not an integer") from None


def discretize_counts(counts, thresholds=DEFAULT_THRESHOLDS) -> np.ndarray:
    """Map non-negative counts to ordinal categories ``1..len(thresholds)+1``.

    Thresholds are inclusive upper bounds: with the default ``(0, 10, 100)``
    a count of 10 falls in category 2 and 11 in category 3.
    """
    thresholds = np.asarray(thresholds)
    if thresholds.ndim != 1 or thresholds.size < 1 or np.any(np.diff(thresholds) <= 0):
        raise DataError("thresholds must be a non-empty strictly ascending list")
    counts = np.asarray(counts)
    if np.any(counts < 0):
        raise DataError("counts must be non-negative")
    return np.searchsorted(thresholds, counts, side="left").astype(np.int32) + 1


def discretize(records, thresholds=DEFAULT_THRESHOLDS, nodes=None, index_labels=None,
               directed=True, include_diagonal=True) -> NetworkSequence:
    """Build a categorical network sequence from ``(index, source, target, count)`` records.

    Missing pairs are category 1. Node and index identifiers are strings;
    ``nodes`` / ``index_labels`` fix their order (otherwise first appearance,
    with numeric index labels sorted numerically).
    """
    records = list(records)
    if nodes is None:
        nodes = list(dict.fromkeys([str(r[1]) for r in records] + [str(r[2]) for r in records]))
    if index_labels is None:
        index_labels = _sorted_index([str(r[0]) for r in records]) or ["1"]
    nodes = [str(v) for v in nodes]
    index_labels = [str(v) for v in index_labels]
    if len(nodes) < 2:
        raise DataError("need at least two nodes")
    node_pos = {v: k for k, v in enumerate(nodes)}
    idx_pos = {v: k for k, v in enumerate(index_labels)}
    counts = np.zeros((len(index_labels), len(nodes), len(nodes)), dtype=np.int64)
    seen = set()
    for k, (x, i, j, c) in enumerate(records):
        key = (str(x), str(i), str(j))
        where = f"record {k + 1}"
        if key in seen:
            raise DataError(f"{where}: duplicate entry for index {x}, pair ({i}, {j})")
        seen.add(key)
        for lab, table, what in ((key[0], idx_pos, "index"), (key[1], node_pos, "node"), (key[2], node_pos, "node")):
            if lab not in table:
                raise DataError(f"{where}: unknown {what} {lab!r}")
        c = int(c)
        if c < 0:
            raise DataError(f"{where}: negative count {c}")
        counts[idx_pos[key[0]], node_pos[key[1]], node_pos[key[2]]] = c
    if not directed:
        # a pair may be listed in either orientation or both (then consistently)
        tr = counts.transpose(0, 2, 1)
        clash = np.argwhere((counts != tr) & (counts > 0) & (tr > 0))
        if clash.size:
            x, i, j = clash[0]
            raise DataError(f"conflicting counts for pair ({nodes[i]}, {nodes[j]}) at index {index_labels[x]}")
        counts = np.maximum(counts, tr)
        counts[:, np.arange(len(nodes)), np.arange(len(nodes))] = 0
    y = discretize_counts(counts, thresholds)
    return NetworkSequence(y, len(thresholds) + 1, directed, include_diagonal and directed,
                           node_names=nodes, index_labels=index_labels)


def read_counts(path, layout="long"):
    """Read raw counts; returns ``(records, nodes or None, index_labels or None)``.

    ``long``: header ``index,source,target,count``. ``wide``: header
    ``index,node,<target names...>`` with one row per (index, source).
    """
    rows = _read_rows(path)
    lineno, header = rows[0]
    header = [h.strip() for h in header]
    records = []
    if layout == "long":
        if header[:4] != ["index", "source", "target", "count"] or len(header) != 4:
            raise DataError(f"{path}:{lineno}: expected header 'index,source,target,count'")
        for lineno, r in rows[1:]:
            if len(r) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields, got {len(r)}")
            records.append((r[0].strip(), r[1].strip(), r[2].strip(), _int_cell(path, lineno, r[3], "count")))
        return records, None, None
    if layout == "wide":
        if len(header) < 3 or header[:2] != ["index", "node"]:
            raise DataError(f"{path}:{lineno}: expected header 'index,node,<node names>'")
        targets = header[2:]
        for lineno, r in rows[1:]:
            if len(r) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
            for t, v in zip(targets, r[2:]):
                records.append((r[0].strip(), r[1].strip(), t, _int_cell(path, lineno, v, "count")))
        return records, targets, None
    raise DataError(f"unknown layout {layout!r}")


def write_network(net: NetworkSequence, path):
    """Wide categorical layout: ``index,node,<node names>`` with categories 1..C."""
    names = net.names
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "node"] + names)
    for x, lab in enumerate(net.labels):
        for i, name in enumerate(names):
            w.writerow([lab, name] + [int(v) for v in net.y[x, i]])
    _atomic_write(path, buf.getvalue())


def read_network(path, categories: int = 4, directed: bool = True, include_diagonal: bool = True) -> NetworkSequence:
    rows = _read_rows(path)
    lineno, header = rows[0]
    header = [h.strip() for h in header]
    if len(header) < 4 or header[:2] != ["index", "node"]:
        raise DataError(f"{path}:{lineno}: expected header 'index,node,<node names>'")
    names = header[2:]
    if len(set(names)) != len(names):
        raise DataError(f"{path}:{lineno}: duplicate node names in header")
    n = len(names)
    pos = {v: k for k, v in enumerate(names)}
    blocks = {}
    for lineno, r in rows[1:]:
        if len(r) != n + 2:
            raise DataError(f"{path}:{lineno}: expected {n + 2} fields, got {len(r)}")
        lab, node = r[0].strip(), r[1].strip()
        if node not in pos:
            raise DataError(f"{path}:{lineno}: node {node!r} is not in the header")
        mat = blocks.setdefault(lab, np.zeros((n, n), dtype=np.int32))
        seen = blocks.setdefault(("seen", lab), set())
        if node in seen:
            raise DataError(f"{path}:{lineno}: duplicate row for node {node!r} at index {lab!r}")
        seen.add(node)
        vals = [_int_cell(path, lineno, v, "category") for v in r[2:]]
        bad = [v for v in vals if not 1 <= v <= categories]
        if bad:
            raise DataError(f"{path}:{lineno}: category {bad[0]} outside 1..{categories}")
        mat[pos[node]] = vals
    labels = [k for k in blocks if not isinstance(k, tuple)]
    for lab in labels:
        if len(blocks[("seen", lab)]) != n:
            missing = [v for v in names if v not in blocks[("seen", lab)]]
            raise DataError(f"{path}: index {lab!r} has no row for node {missing[0]!r}")
    y = np.stack([blocks[lab] for lab in labels])
    try:
        return NetworkSequence(y, categories, directed, include_diagonal and directed,
                               node_names=names, index_labels=labels)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def load_covariates(path, nodes) -> Covariates:
    """Read ``node,category`` records; categories are coded by first appearance."""
    rows = _read_rows(path)
    lineno, header = rows[0]
    if [h.strip() for h in header] != ["node", "category"]:
        raise DataError(f"{path}:{lineno}: expected header 'node,category'")
    nodes = [str(v) for v in nodes]
    pos = {v: k for k, v in enumerate(nodes)}
    codes = {}
    w = np.full(len(nodes), -1, dtype=np.int64)
    for lineno, r in rows[1:]:
        if len(r) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 fields, got {len(r)}")
        node, cat = r[0].strip(), r[1].strip()
        if node not in pos:
            raise DataError(f"{path}:{lineno}: node {node!r} does not appear in the network")
        if w[pos[node]] >= 0:
            raise DataError(f"{path}:{lineno}: duplicate node {node!r}")
        w[pos[node]] = codes.setdefault(cat, len(codes))
    missing = [nodes[k] for k in np.flatnonzero(w < 0)]
    if missing:
        raise DataError(f"{path}: no category for node {missing[0]!r}")
    return Covariates(w, len(codes), category_names=list(codes))


def write_labels(z, path, nodes=None, index_labels=None):
    """``node,<index labels...>`` with 1-based cluster labels."""
    z = np.asarray(z)
    m, n = z.shape
    nodes = [str(k + 1) for k in range(n)] if nodes is None else list(nodes)
    index_labels = [str(x + 1) for x in range(m)] if index_labels is None else list(index_labels)
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["node"] + index_labels)
    for i in range(n):
        w.writerow([nodes[i]] + [int(v) + 1 for v in z[:, i]])
    _atomic_write(path, buf.getvalue())


def read_labels(path):
    """Returns ``(z 0-based (m, n), nodes, index_labels)``."""
    rows = _read_rows(path)
    lineno, header = rows[0]
    if not header or header[0].strip() != "node" or len(header) < 2:
        raise DataError(f"{path}:{lineno}: expected header 'node,<index labels>'")
    index_labels = [h.strip() for h in header[1:]]
    nodes, cols = [], []
    for lineno, r in rows[1:]:
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        vals = [_int_cell(path, lineno, v, "label") for v in r[1:]]
        if min(vals) < 1:
            raise DataError(f"{path}:{lineno}: labels must be >= 1")
        nodes.append(r[0].strip())
        cols.append(vals)
    if not cols:
        raise DataError(f"{path}: no label rows")
    return np.asarray(cols, dtype=np.int32).T - 1, nodes, index_labels


def write_matrix(mat, path, names):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + list(names))
    for name, row in zip(names, np.asarray(mat)):
        w.writerow([name] + [_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def read_matrix(path):
    rows = _read_rows(path)
    _, header = rows[0]
    names = header[1:]
    vals = []
    for lineno, r in rows[1:]:
        if len(r) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        try:
            vals.append([float(v) for v in r[1:]])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-numeric entry") from None
    return np.array(vals), names


def _atomic_write(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


# -- sample files ---------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class SampleWriter:
    """Streams draws as newline-delimited JSON: header, one line per draw, footer."""

    def __init__(self, path, directed: bool = True):
        self.path = Path(path)
        self.directed = directed
        self.fh = open(self.path, "w")
        self.count = 0

    def _line(self, obj):
        self.fh.write(json.dumps(_jsonable(obj), sort_keys=True, allow_nan=False) + "\n")

    def write_header(self, metadata):
        self.directed = bool(metadata.get("directed", self.directed))
        self._line({"format": SAMPLE_FORMAT, "version": SAMPLE_VERSION, "directed": self.directed,
                    "metadata": metadata})

    def write_record(self, rec):
        out = {
            "iteration": int(rec["iteration"]),
            "z1": (np.asarray(rec["z1"]) + 1).tolist(),
            "alpha1": [float(v) for v in rec["alpha1"]],
            "eta1": float(rec["eta1"]),
            "log_lik": float(rec["log_lik"]),
        }
        if self.directed:
            out.update(
                z2=(np.asarray(rec["z2"]) + 1).tolist(),
                alpha2=[float(v) for v in rec["alpha2"]],
                eta2=float(rec["eta2"]),
            )
        self._line(out)
        self.count += 1

    def close(self, count=None, extra=None):
        self._line({"end": True, "count": self.count, "metadata": extra or {}})
        self.fh.close()


def write_samples(samples: SampleSet, path):
    extra_keys = ("swap_acceptance", "ladder_final", "ladder_trajectory")
    meta = {k: v for k, v in samples.metadata.items() if k not in extra_keys}
    extra = {k: samples.metadata[k] for k in extra_keys if k in samples.metadata}
    w = SampleWriter(path, samples.directed)
    w.write_header(meta)
    for s in range(samples.S):
        w.write_record(samples.record(s))
    w.close(samples.S, extra)


def read_samples(path) -> SampleSet:
    try:
        fh = open(path)
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    with fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataError(f"{path}: empty sample file")

    def parse(k):
        try:
            return json.loads(lines[k])
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{k + 1}: malformed record ({exc.msg})") from None

    head = parse(0)
    if head.get("format") != SAMPLE_FORMAT:
        raise DataError(f"{path}:1: not a sample file")
    if head.get("version") != SAMPLE_VERSION:
        raise DataError(f"{path}:1: unsupported format version {head.get('version')!r} (expected {SAMPLE_VERSION!r})")
    directed = bool(head["directed"])
    foot = parse(len(lines) - 1) if len(lines) > 1 else {}
    if not foot.get("end"):
        raise DataError(f"{path}: truncated file (missing footer after line {len(lines)})")
    records = []
    need = ("iteration", "z1", "alpha1", "eta1", "log_lik") + (("z2", "alpha2", "eta2") if directed else ())
    for k in range(1, len(lines) - 1):
        rec = parse(k)
        missing = [f for f in need if f not in rec]
        if missing:
            raise DataError(f"{path}:{k + 1}: missing field {missing[0]!r}")
        rec["z1"] = np.asarray(rec["z1"], dtype=np.int32) - 1
        if directed:
            rec["z2"] = np.asarray(rec["z2"], dtype=np.int32) - 1
        records.append(rec)
    if foot.get("count") != len(records):
        raise DataError(f"{path}: footer announces {foot.get('count')} draws but {len(records)} were read")
    meta = dict(head.get("metadata", {}))
    meta.update(foot.get("metadata", {}))
    return SampleSet.from_records(records, meta, directed)


# -- summaries --------------------------------------------------------------------


def write_summary(summary: PosteriorSummary, out_dir, nodes, index_labels):
    """Write CSV tables for a posterior summary into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sides = [("rows", summary.psm1, summary.zhat1, summary.vi_bound1, summary.mcs1)]
    if summary.directed:
        sides.append(("cols", summary.psm2, summary.zhat2, summary.vi_bound2, summary.mcs2))
    for side, psm, zhat, bound, _ in sides:
        for x, lab in enumerate(index_labels):
            write_matrix(psm[x], out / f"psm_{side}_{x + 1}.csv", nodes)
        write_labels(zhat, out / f"zhat_{side}.csv", nodes, index_labels)
        _atomic_write(
            out / f"vi_bound_{side}.csv",
            "index,vi_bound\n" + "".join(f"{lab},{_fmt(b)}\n" for lab, b in zip(index_labels, bound)),
        )
    lines = ["index,row_group,col_group,category,theta"]
    for x, lab in enumerate(index_labels):
        t = summary.theta_hat[x]
        for h in range(t.shape[0]):
            for k in range(t.shape[1]):
                for c in range(t.shape[2]):
                    lines.append(f"{lab},{h + 1},{k + 1},{c + 1},{_fmt(t[h, k, c])}")
    _atomic_write(out / "theta.csv", "\n".join(lines) + "\n")
    if summary.mcs1:
        lines = ["sequence,index,group,score"]
        for side, _, _, _, scores in sides:
            for x, lab in enumerate(index_labels):
                for g, v in enumerate(scores[x]):
                    lines.append(f"{side},{lab},{g + 1},{_fmt(v)}")
        _atomic_write(out / "mcs.csv", "\n".join(lines) + "\n")
    if summary.meet:
        idx = summary.meet["indices"]
        lines = ["node," + ",".join(f"meet_{s}" for s, *_ in sides)]
        for i, name in enumerate(nodes):
            lines.append(name + "," + ",".join(str(int(summary.meet[s][i]) + 1) for s, *_ in sides))
        _atomic_write(out / "meet.csv", "\n".join(lines) + "\n")
        _atomic_write(out / "meet_indices.txt", ",".join(index_labels[x] for x in idx) + "\n")
    _atomic_write(out / "summary.json", json.dumps(_jsonable(summary.metadata), sort_keys=True, indent=1) + "\n")


def read_summary(out_dir) -> tuple[PosteriorSummary, list, list]:
    """Inverse of ``write_summary``; returns ``(summary, nodes, index_labels)``."""
    out = Path(out_dir)
    z1, nodes, index_labels = read_labels(out / "zhat_rows.csv")
    directed = (out / "zhat_cols.csv").exists()
    m = len(index_labels)

    def side(name):
        psm = np.stack([read_matrix(out / f"psm_{name}_{x + 1}.csv")[0] for x in range(m)])
        rows = _read_rows(out / f"vi_bound_{name}.csv")[1:]
        bound = np.array([float(r[1]) for _, r in rows])
        return psm, bound

    psm1, b1 = side("rows")
    psm2 = b2 = z2 = None
    if directed:
        psm2, b2 = side("cols")
        z2 = read_labels(out / "zhat_cols.csv")[0]
    pos = {lab: x for x, lab in enumerate(index_labels)}
    raw_theta = {}
    for lineno, r in _read_rows(out / "theta.csv")[1:]:
        raw_theta.setdefault(pos[r[0]], []).append((int(r[1]) - 1, int(r[2]) - 1, int(r[3]) - 1, float(r[4])))
    theta = []
    for x in range(m):
        ent = raw_theta[x]
        shape = tuple(max(e[d] for e in ent) + 1 for d in range(3))
        t = np.zeros(shape)
        for h, k, c, v in ent:
            t[h, k, c] = v
        theta.append(t)
    mcs1, mcs2 = [], None
    if (out / "mcs.csv").exists():
        groups = {}
        for _, r in _read_rows(out / "mcs.csv")[1:]:
            groups.setdefault((r[0], pos[r[1]]), []).append(float(r[3]))
        mcs1 = [np.array(groups[("rows", x)]) for x in range(m)]
        if directed:
            mcs2 = [np.array(groups[("cols", x)]) for x in range(m)]
    meet = {}
    if (out / "meet.csv").exists():
        rows = _read_rows(out / "meet.csv")
        cols = [h.replace("meet_", "") for h in rows[0][1][1:]]
        for c, name in enumerate(cols):
            meet[name] = np.array([int(r[c + 1]) - 1 for _, r in rows[1:]])
        labs = (out / "meet_indices.txt").read_text().strip().split(",")
        meet["indices"] = [pos[v] for v in labs]
    metadata = json.loads((out / "summary.json").read_text())
    summary = PosteriorSummary(psm1, z1, b1, theta, mcs1, psm2, z2, b2, mcs2, meet, metadata)
    return summary, nodes, index_labels
