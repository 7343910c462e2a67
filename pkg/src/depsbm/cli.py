"""Command-line entry point: simulate, ingest, fit, summarize, eval, plot.

Every long flag can also be given in a ``--config`` file as ``key = value``
(dashes become underscores); flags given on the command line win.
Exit codes: 2 usage or configuration error, 3 data error, 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import DataError, Hyperparameters
from .gibbs import SamplerOptions
from .io import (
    SampleWriter,
    discretize,
    load_covariates,
    read_counts,
    read_labels,
    read_network,
    read_samples,
    write_labels,
    write_network,
    write_summary,
)
from .plot import adjacency_svg
from .summaries import clustering_metrics, summarize
from .synthetic import ScenarioSpec, generate_scenario, scenario
from .tempering import Ladder, RunConfig, run

EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 2, 3, 4


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in str(text).replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# defaults live here rather than in argparse so that config files can be merged underneath flags
DEFAULTS = {
    "fit": dict(
        covariates=None, out="samples.ndjson", mode="directed", categories=4, exclude_diagonal=False,
        unsupervised=False, burn_in=10000, iterations=40000, thin=10, chains=4, threads=1, progress=0,
        a_theta=None, a_w=None, a_alpha=1.0, b_alpha=1.0, a_eta=0.002, b_eta=0.001, eta_step=0.5,
        target_acc=0.234, adapt_rate=0.6, swap_period=1, ladder_ratio=0.6, manifest=None, backend=None,
    ),
    "simulate": dict(scenario=1, spec=None, n=None, m=None, seed=0, out_dir="."),
    "ingest": dict(layout="long", thresholds=[0.0, 10.0, 100.0], mode="directed", out="network.csv"),
    "summarize": dict(out_dir="summary", meet=None, max_clusters=None, a_theta=None),
    "eval": dict(out=None),
    "plot": dict(rows=None, cols=None, index="1", out="network.svg", cell=6, categories=4),
}
REQUIRED = {
    "fit": ("network", "seed"),
    "ingest": ("counts",),
    "summarize": ("samples", "network"),
    "eval": ("truth", "est"),
    "plot": ("network",),
}


def _add(p, flag, help, **kw):
    dest = flag.lstrip("-").replace("-", "_")
    cmd = p.prog.split()[-1]
    default = DEFAULTS.get(cmd, {}).get(dest)
    if default is not None and kw.get("action") != "store_const":
        help = f"{help} (default: {default if not isinstance(default, list) else ','.join(map(str, default))})"
    if kw.get("action") == "store_true":
        kw = dict(kw, action="store_const", const=True)
    p.add_argument(flag, default=None, help=help, **kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="depsbm", description="Dependent stochastic block models for network sequences.")
    ap.add_argument("--version", action="version", version=f"depsbm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a planted network sequence")
    _add(p, "--scenario", "built-in scenario (1 directed, 2 undirected)", type=int, choices=(1, 2))
    _add(p, "--spec", "scenario file with key = value lines (overrides --scenario)")
    _add(p, "--n", "number of nodes (flat four-cluster schedule)", type=int)
    _add(p, "--m", "sequence length (flat four-cluster schedule)", type=int)
    _add(p, "--seed", "random seed", type=int)
    _add(p, "--out-dir", "output directory")
    _add(p, "--config", "config file")

    p = sub.add_parser("ingest", help="discretise raw counts into a categorical network")
    _add(p, "--counts", "count table (CSV)")
    _add(p, "--layout", "count table layout", choices=("long", "wide"))
    _add(p, "--thresholds", "ascending inclusive upper bounds", type=_floats)
    _add(p, "--mode", "network mode", choices=("directed", "undirected"))
    _add(p, "--out", "network CSV to write")
    _add(p, "--config", "config file")

    p = sub.add_parser("fit", help="run the tempered Gibbs sampler")
    _add(p, "--network", "categorical network CSV (index,node,<nodes>)")
    _add(p, "--covariates", "node,category CSV; omit for the unsupervised prior")
    _add(p, "--seed", "random seed (required)", type=int)
    _add(p, "--out", "sample file to write")
    _add(p, "--config", "config file")
    _add(p, "--mode", "network mode", choices=("directed", "undirected"))
    _add(p, "--categories", "number of ordinal categories", type=int)
    _add(p, "--exclude-diagonal", "drop self-pairs in directed mode", action="store_true")
    _add(p, "--unsupervised", "ignore covariates in the partition prior", action="store_true")
    _add(p, "--burn-in", "discarded sweeps", type=int)
    _add(p, "--iterations", "sweeps after burn-in", type=int)
    _add(p, "--thin", "keep every k-th sweep", type=int)
    _add(p, "--chains", "number of tempered chains", type=int)
    _add(p, "--threads", "worker threads for chain sweeps", type=int)
    _add(p, "--progress", "report progress every k sweeps on stderr (0: off)", type=int)
    _add(p, "--a-theta", "Dirichlet parameters of block probabilities (default: all ones)", type=_floats)
    _add(p, "--a-w", "cohesion parameters, one per macro-category (default: all ones)", type=_floats)
    _add(p, "--a-alpha", "Beta prior, first shape", type=float)
    _add(p, "--b-alpha", "Beta prior, second shape", type=float)
    _add(p, "--a-eta", "Gamma prior shape", type=float)
    _add(p, "--b-eta", "Gamma prior rate", type=float)
    _add(p, "--eta-step", "random-walk scale on log concentration", type=float)
    _add(p, "--target-acc", "target swap acceptance", type=float)
    _add(p, "--adapt-rate", "ladder adaptation gain exponent", type=float)
    _add(p, "--swap-period", "sweeps between swap rounds", type=int)
    _add(p, "--ladder-ratio", "initial geometric ladder ratio", type=float)
    _add(p, "--manifest", "run manifest JSON (default: <out>.manifest.json)")
    _add(p, "--backend", "kernel backend", choices=("python", "cython"))

    p = sub.add_parser("summarize", help="posterior summaries from a sample file")
    _add(p, "--samples", "sample file")
    _add(p, "--network", "network CSV used for the fit")
    _add(p, "--out-dir", "output directory")
    _add(p, "--meet", "comma-separated indices for meet partitions")
    _add(p, "--max-clusters", "largest tree cut considered for point estimates", type=int)
    _add(p, "--a-theta", "Dirichlet parameters (default: taken from the sample file)", type=_floats)
    _add(p, "--config", "config file")

    p = sub.add_parser("eval", help="RI, ARI and NMI of estimated against true labels")
    _add(p, "--truth", "true labels CSV")
    _add(p, "--est", "estimated labels CSV")
    _add(p, "--out", "metrics CSV (default: standard output)")
    _add(p, "--config", "config file")

    p = sub.add_parser("plot", help="SVG heatmap of one index, nodes grouped by cluster")
    _add(p, "--network", "network CSV")
    _add(p, "--rows", "row labels CSV")
    _add(p, "--cols", "column labels CSV (default: row labels)")
    _add(p, "--index", "index label or 1-based position")
    _add(p, "--out", "SVG file to write")
    _add(p, "--cell", "pixels per cell", type=int)
    _add(p, "--categories", "number of ordinal categories", type=int)
    _add(p, "--config", "config file")
    return ap


def read_config(path) -> dict:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = (lineno, value)
    return out


def resolve(parser, args) -> dict:
    """Merge defaults < config file < command-line flags."""
    cmd = args.command
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[cmd]
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    merged = dict(DEFAULTS.get(cmd, {}))
    if args.config:
        for key, (lineno, raw) in read_config(args.config).items():
            if key not in actions:
                raise UsageError(f"{args.config}:{lineno}: unknown option {key!r} for {cmd}")
            act = actions[key]
            try:
                if act.const is True:
                    val = _bool(raw)
                elif act.type is not None:
                    val = act.type(raw)
                else:
                    val = raw
            except (argparse.ArgumentTypeError, ValueError):
                raise UsageError(f"{args.config}:{lineno}: invalid value {raw!r} for {key}") from None
            if act.choices is not None and val not in act.choices:
                raise UsageError(f"{args.config}:{lineno}: {key} must be one of {list(act.choices)}")
            merged[key] = val
    for key in actions:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    for key in REQUIRED.get(cmd, ()):
        if merged.get(key) is None:
            raise UsageError(f"{cmd}: --{key.replace('_', '-')} is required")
    return merged


# -- commands -------------------------------------------------------------------


def cmd_simulate(o):
    if o["spec"]:
        try:
            spec = ScenarioSpec.from_text(Path(o["spec"]).read_text())
        except OSError as exc:
            raise DataError(f"cannot read scenario file {o['spec']}: {exc.strerror}") from None
    else:
        spec = scenario(o["scenario"], o["n"], o["m"])
    net, z1, z2, _ = generate_scenario(spec, o["seed"])
    out = Path(o["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_network(net, out / "network.csv")
    write_labels(z1, out / "truth_rows.csv", net.names, net.labels)
    if spec.directed:
        write_labels(z2, out / "truth_cols.csv", net.names, net.labels)
    (out / "scenario.txt").write_text(spec.to_text())
    print(f"wrote {spec.m} x {spec.n} x {spec.n} {'directed' if spec.directed else 'undirected'} sequence to {out}")


def cmd_ingest(o):
    records, nodes, _ = read_counts(o["counts"], o["layout"])
    net = discretize(records, o["thresholds"], nodes=nodes, directed=o["mode"] == "directed")
    write_network(net, o["out"])
    print(f"wrote {net.m} indices over {net.n} nodes with {net.n_categories} categories to {o['out']}")


def _runtime_versions():
    import scipy

    from . import kernels

    return {
        "depsbm": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "backend": kernels.BACKEND,
    }


def cmd_fit(o):
    directed = o["mode"] == "directed"
    net = read_network(o["network"], o["categories"], directed, not o["exclude_diagonal"])
    cov = load_covariates(o["covariates"], net.names) if o["covariates"] else None
    try:
        a_theta = np.array(o["a_theta"]) if o["a_theta"] else np.ones(net.n_categories)
        hyper = Hyperparameters(
            a_theta=a_theta, a_w=None if o["a_w"] is None else np.array(o["a_w"]), a_alpha=o["a_alpha"],
            b_alpha=o["b_alpha"], a_eta=o["a_eta"], b_eta=o["b_eta"],
        )
        if cov is not None:
            hyper.cohesion(cov.L)
        if a_theta.size != net.n_categories:
            raise ValueError(f"--a-theta needs {net.n_categories} values")
        config = RunConfig(
            burn_in=o["burn_in"], kept_iterations=o["iterations"], thin=o["thin"], seed=o["seed"],
            chains=o["chains"], threads=o["threads"], progress=o["progress"],
        )
        ladder = Ladder.geometric(o["chains"], o["ladder_ratio"], target_acc=o["target_acc"],
                                  adapt_rate=o["adapt_rate"], swap_period=o["swap_period"])
        options = SamplerOptions(supervised=not o["unsupervised"], eta_step=o["eta_step"], backend=o["backend"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    sink = SampleWriter(o["out"], directed)
    samples = run(net, cov, hyper, config, ladder, options, sink=sink)
    manifest = {
        "command": "fit",
        "options": {k: v for k, v in sorted(o.items())},
        "seed": o["seed"],
        "chain_seeds": [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(o["seed"]).spawn(o["chains"] + 1)],
        "samples": samples.S,
        "versions": _runtime_versions(),
        "a_theta": a_theta.tolist(),
        "supervised": samples.metadata["supervised"],
    }
    mpath = o["manifest"] or f"{o['out']}.manifest.json"
    Path(mpath).write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    print(f"wrote {samples.S} samples to {o['out']}")


def _index_positions(spec, labels):
    out = []
    for tok in str(spec).replace(" ", "").split(","):
        if not tok:
            continue
        if tok in labels:
            out.append(labels.index(tok))
            continue
        try:
            k = int(tok)
        except ValueError:
            raise UsageError(f"unknown index {tok!r}") from None
        if not 1 <= k <= len(labels):
            raise UsageError(f"index {k} outside 1..{len(labels)}")
        out.append(k - 1)
    return out


def cmd_summarize(o):
    samples = read_samples(o["samples"])
    meta = samples.metadata
    net = read_network(o["network"], int(meta.get("categories", 4)), samples.directed,
                       bool(meta.get("include_diagonal", True)))
    if samples.n != net.n or samples.m != net.m:
        raise DataError("sample file does not match the network dimensions")
    a_theta = o["a_theta"] if o["a_theta"] else meta.get("hyper", {}).get("a_theta")
    meet = _index_positions(o["meet"], net.labels) if o["meet"] else None
    summary = summarize(samples, net, a_theta, meet, o["max_clusters"])
    write_summary(summary, o["out_dir"], net.names, net.labels)
    print(f"wrote summaries of {samples.S} samples to {o['out_dir']}")


def cmd_eval(o):
    zt, nt, lt = read_labels(o["truth"])
    ze, ne, le = read_labels(o["est"])
    if zt.shape != ze.shape:
        raise DataError(f"label files differ in shape: {zt.shape} vs {ze.shape}")
    if nt != ne:
        raise DataError("label files list different nodes")
    lines = ["index,rand,ari,nmi"]
    for x, lab in enumerate(lt):
        s = clustering_metrics(zt[x], ze[x])
        lines.append(f"{lab},{s.rand!r},{s.adjusted_rand!r},{s.nmi!r}")
    text = "\n".join(lines) + "\n"
    if o["out"]:
        Path(o["out"]).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_plot(o):
    net = read_network(o["network"], o["categories"], True)
    x = _index_positions(o["index"], net.labels)[0]
    zr = read_labels(o["rows"])[0][x] if o["rows"] else None
    zc = read_labels(o["cols"])[0][x] if o["cols"] else None
    Path(o["out"]).write_text(adjacency_svg(net, x, zr, zc, cell=o["cell"]))
    print(f"wrote {o['out']}")


COMMANDS = {
    "simulate": cmd_simulate,
    "ingest": cmd_ingest,
    "fit": cmd_fit,
    "summarize": cmd_summarize,
    "eval": cmd_eval,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve(parser, args)
        COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"depsbm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"depsbm {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"depsbm {args.command}: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
