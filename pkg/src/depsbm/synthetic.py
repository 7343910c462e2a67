"""Planted dependent block-model sequences and replicated recovery studies."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import DataError, NetworkSequence, canonicalize
from .gibbs import SamplerOptions
from .summaries import clustering_metrics, minvi_estimate
from .tempering import RunConfig, run

DEFAULT_THETA = (
    (0.85, 0.05, 0.05, 0.05),
    (0.05, 0.05, 0.85, 0.05),
    (0.05, 0.05, 0.05, 0.85),
    (0.10, 0.40, 0.40, 0.10),
)


def _ints(text):
    return [int(v) for v in str(text).replace(",", " ").split()]


@dataclass
class ScenarioSpec:
    """Cluster schedule, mover counts and block-probability menu of a planted sequence.

    ``row_clusters[x]`` is the number of row clusters at index ``x`` and
    ``row_movers[x]`` the number of nodes re-assigned between ``x`` and
    ``x + 1``; the column fields are ignored for undirected scenarios.
    """

    n: int
    m: int
    row_clusters: list
    row_movers: list
    col_clusters: list | None = None
    col_movers: list | None = None
    theta: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_THETA))
    directed: bool = True
    include_diagonal: bool = True
    distinct_profiles: bool = True
    assignment_seed: int | None = None
    name: str = "custom"

    def __post_init__(self):
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        self.row_clusters = [int(v) for v in self.row_clusters]
        self.row_movers = [int(v) for v in self.row_movers]
        if self.col_clusters is None or not self.directed:
            self.col_clusters = list(self.row_clusters)
            self.col_movers = list(self.row_movers)
        self.col_clusters = [int(v) for v in self.col_clusters]
        self.col_movers = [int(v) for v in (self.col_movers or [])]
        self.validate()

    @property
    def C(self) -> int:
        return int(self.theta.shape[1])

    def validate(self):
        if self.n < 2 or self.m < 1:
            raise DataError("scenario needs n >= 2 and m >= 1")
        if self.C < 2:
            raise DataError("block probabilities need at least two categories")
        if np.any(self.theta < 0) or not np.allclose(self.theta.sum(axis=1), 1.0):
            raise DataError("every block-probability row must be a probability vector")
        for label, clusters, movers in (
            ("row", self.row_clusters, self.row_movers),
            ("col", self.col_clusters, self.col_movers),
        ):
            if len(clusters) != self.m:
                raise DataError(f"{label}_clusters needs {self.m} entries, got {len(clusters)}")
            if len(movers) != max(self.m - 1, 0):
                raise DataError(f"{label}_movers needs {self.m - 1} entries, got {len(movers)}")
            if min(clusters) < 1 or max(clusters) > self.n:
                raise DataError(f"{label} schedule is infeasible: cluster counts must lie in 1..{self.n}")
            for x, mv in enumerate(movers):
                if mv < 0 or mv > self.n:
                    raise DataError(f"{label}_movers[{x}] must lie in 0..{self.n}")
                births = clusters[x + 1] - clusters[x]
                if births > mv:
                    raise DataError(
                        f"{label} schedule is infeasible at transition {x + 1}: "
                        f"{births} new clusters need at least as many movers (got {mv})"
                    )

    def to_text(self) -> str:
        fmt = lambda v: ",".join(str(int(t)) for t in v)
        lines = [
            f"name = {self.name}",
            f"n = {self.n}",
            f"m = {self.m}",
            f"mode = {'directed' if self.directed else 'undirected'}",
            f"include_diagonal = {int(self.include_diagonal)}",
            f"row_clusters = {fmt(self.row_clusters)}",
            f"row_movers = {fmt(self.row_movers)}",
        ]
        if self.directed:
            lines += [f"col_clusters = {fmt(self.col_clusters)}", f"col_movers = {fmt(self.col_movers)}"]
        lines.append("theta = " + "; ".join(" ".join(repr(float(p)) for p in row) for row in self.theta))
        lines.append(f"distinct_profiles = {int(self.distinct_profiles)}")
        if self.assignment_seed is not None:
            lines.append(f"assignment_seed = {self.assignment_seed}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> ScenarioSpec:
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in raw:
                raise DataError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = (lineno, value)
        known = {"name", "n", "m", "mode", "include_diagonal", "row_clusters", "row_movers",
                 "col_clusters", "col_movers", "theta", "distinct_profiles", "assignment_seed"}
        for key, (lineno, _) in raw.items():
            if key not in known:
                raise DataError(f"line {lineno}: unknown key {key!r}")
        for req in ("n", "m", "row_clusters", "row_movers"):
            if req not in raw:
                raise DataError(f"missing required key {req!r}")
        get = lambda k, d=None: raw[k][1] if k in raw else d
        try:
            mode = get("mode", "directed")
            if mode not in ("directed", "undirected"):
                raise DataError(f"line {raw['mode'][0]}: mode must be 'directed' or 'undirected'")
            kw = dict(
                name=get("name", "custom"),
                n=int(get("n")),
                m=int(get("m")),
                directed=mode == "directed",
                include_diagonal=bool(int(get("include_diagonal", "1"))),
                row_clusters=_ints(get("row_clusters")),
                row_movers=_ints(get("row_movers")),
                distinct_profiles=bool(int(get("distinct_profiles", "1"))),
            )
            if "col_clusters" in raw:
                kw["col_clusters"] = _ints(get("col_clusters"))
                kw["col_movers"] = _ints(get("col_movers", ""))
            if "theta" in raw:
                kw["theta"] = [[float(p) for p in row.split()] for row in get("theta").split(";") if row.strip()]
            if "assignment_seed" in raw:
                kw["assignment_seed"] = int(get("assignment_seed"))
        except ValueError as exc:
            raise DataError(f"malformed scenario value: {exc}") from None
        return cls(**kw)


def scenario(number: int, n: int | None = None, m: int | None = None) -> ScenarioSpec:
    """Shipped defaults: 1 is directed with separate row/column sequences, 2 undirected.

    Overriding ``n`` or ``m`` switches to a flat schedule of four clusters
    with ten percent movers per transition.
    """
    if number not in (1, 2):
        raise DataError(f"unknown scenario {number}; choose 1 or 2")
    directed = number == 1
    if n is None and m is None:
        rows = [2, 3, 3, 4, 4, 5, 5, 6, 6, 6]
        cols = [3, 3, 4, 4, 4, 5, 5, 5, 6, 6]
        return ScenarioSpec(
            n=100, m=10, row_clusters=rows, row_movers=[10] * 9, col_clusters=cols,
            col_movers=[10] * 9, directed=directed, assignment_seed=2024 + number,
            name=f"scenario{number}",
        )
    n = 100 if n is None else n
    m = 10 if m is None else m
    k = min(4, n)
    movers = [max(0, n // 10)] * (m - 1)
    return ScenarioSpec(
        n=n, m=m, row_clusters=[k] * m, row_movers=movers, col_clusters=[k] * m,
        col_movers=list(movers), directed=directed, name=f"scenario{number}",
    )


def _planted_sequence(n, clusters, movers, rng, max_tries=1000):
    m = len(clusters)
    z = np.zeros((m, n), dtype=np.int64)
    H0 = clusters[0]
    z[0] = rng.permutation(np.arange(n) % H0)
    for x in range(1, m):
        H_prev, H_new = clusters[x - 1], clusters[x]
        for _ in range(max_tries):
            zx = z[x - 1].copy()
            if H_new < H_prev:
                dying = zx >= H_new
                zx[dying] = rng.integers(0, H_new, size=int(dying.sum()))
            movers_idx = rng.choice(n, size=movers[x - 1], replace=False)
            births = max(0, H_new - H_prev)
            for j, i in enumerate(movers_idx):
                if j < births:
                    zx[i] = H_prev + j
                elif H_new > 1:
                    dest = rng.integers(0, H_new - 1)
                    zx[i] = dest if dest < zx[i] else dest + 1
            if np.unique(zx).size == H_new:
                z[x] = zx
                break
        else:
            raise DataError(f"could not realise {H_new} non-empty clusters at index {x + 1}")
    return z


def _assign_blocks(H, K, n_rows, rng, symmetric, distinct, max_tries=10000):
    for _ in range(max_tries):
        a = rng.integers(0, n_rows, size=(H, K))
        if symmetric:
            a = np.tril(a) + np.tril(a, -1).T
        if not distinct:
            return a
        rows_ok = H < 2 or np.unique(a, axis=0).shape[0] == H
        cols_ok = K < 2 or np.unique(a, axis=1).shape[1] == K
        if rows_ok and cols_ok:
            return a
    raise DataError("could not find block assignments with distinct cluster profiles")


def generate_scenario(spec: ScenarioSpec, rng=None):
    """Draw a planted sequence; returns ``(net, z1, z2, assignment)``.

    ``assignment[x][h, k]`` is the row of ``spec.theta`` used by block ``(h, k)``.
    Labels are canonical and 0-based.
    """
    rng = np.random.default_rng(rng)
    n, m = spec.n, spec.m
    z1 = _planted_sequence(n, spec.row_clusters, spec.row_movers, rng)
    z2 = _planted_sequence(n, spec.col_clusters, spec.col_movers, rng) if spec.directed else z1
    z1 = np.stack([canonicalize(r) for r in z1])
    z2 = np.stack([canonicalize(r) for r in z2]) if spec.directed else z1
    arng = rng if spec.assignment_seed is None else np.random.default_rng(spec.assignment_seed)
    assignment = []
    y = np.empty((m, n, n), dtype=np.int32)
    cum = np.cumsum(spec.theta, axis=1)
    cum[:, -1] = 1.0
    for x in range(m):
        H, K = int(z1[x].max()) + 1, int(z2[x].max()) + 1
        a = _assign_blocks(H, K, spec.theta.shape[0], arng, not spec.directed, spec.distinct_profiles)
        assignment.append(a)
        rows = a[z1[x][:, None], z2[x][None, :]]
        u = rng.random((n, n))
        cat = (u[..., None] > cum[rows]).sum(axis=-1) + 1
        if not spec.directed:
            cat = np.triu(cat, 1)
            cat = cat + cat.T
            np.fill_diagonal(cat, 1)
        y[x] = cat
    net = NetworkSequence(y, spec.C, spec.directed, spec.include_diagonal and spec.directed)
    return net, z1.astype(np.int32), z2.astype(np.int32), assignment


@dataclass
class StudyResult:
    """Per-replicate metrics and their summaries across replicates."""

    rows: list
    summary: list

    def to_csv(self) -> str:
        lines = ["sequence,index,metric,median,q1,q3,min,max,replicates"]
        for r in self.summary:
            lines.append(
                f"{r['sequence']},{r['index']},{r['metric']},{r['median']!r},{r['q1']!r},{r['q3']!r},"
                f"{r['min']!r},{r['max']!r},{r['replicates']}"
            )
        return "\n".join(lines) + "\n"


def _one_replicate(args):
    spec, rep, seed, config, options = args
    data_seed, fit_seed = np.random.SeedSequence([seed, rep]).generate_state(2)
    net, z1, z2, _ = generate_scenario(spec, int(data_seed))
    cfg = replace(config, seed=int(fit_seed), progress=0)
    samples = run(net, None, None, cfg, None, options)
    out = []
    sides = (("rows", z1), ("cols", z2)) if spec.directed else (("rows", z1),)
    for side, truth in sides:
        draws = samples.labels(side)
        for x in range(spec.m):
            est, _ = minvi_estimate(draws[:, x, :])
            scores = clustering_metrics(truth[x], est)
            for metric, val in zip(("rand", "ari", "nmi"), scores):
                out.append({"replicate": rep, "sequence": side, "index": x + 1, "metric": metric, "value": val})
    return out


def replicate_study(spec: ScenarioSpec, R: int, config: RunConfig | None = None,
                    options: SamplerOptions | None = None, seed: int = 0, workers: int = 1) -> StudyResult:
    """Generate, fit and score ``R`` replicates; summarise each (sequence, index, metric)."""
    if R < 1:
        raise ValueError("need at least one replicate")
    config = config or RunConfig()
    options = options or SamplerOptions(supervised=False)
    jobs = [(spec, rep, seed, config, options) for rep in range(R)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_replicate, jobs))
    else:
        results = [_one_replicate(j) for j in jobs]
    rows = [r for res in results for r in res]
    summary = []
    keys = sorted({(r["sequence"], r["index"], r["metric"]) for r in rows})
    for side, x, metric in keys:
        vals = np.array([r["value"] for r in rows if (r["sequence"], r["index"], r["metric"]) == (side, x, metric)])
        q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
        summary.append({
            "sequence": side, "index": x, "metric": metric, "median": float(med), "q1": float(q1),
            "q3": float(q3), "min": float(vals.min()), "max": float(vals.max()), "replicates": int(vals.size),
        })
    return StudyResult(rows, summary)
