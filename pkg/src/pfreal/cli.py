"""Command-line interface: ``pfreal {solve,distribution,regions,kac,bounds,verify}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from pfreal import __version__
from pfreal.baseline import kac_expected, random_poly_distribution
from pfreal.distribution import DEFAULT_ALPHA, run_distribution, sample_sphere, trial_rng
from pfreal.monodromy import DEDUP_TOL
from pfreal.network import (
    ModelError, Network, cycle_graph, network_count_bounds, parse_topology, solution_count_bounds,
)
from pfreal.regions import RegionSpec, render_image, sample_region
from pfreal.solver import (
    REAL_TOL, StartSet, build_start_set, check_tree_trivial, max_real_construction,
    solve_all, verify_infinite_family,
)
from pfreal.tracker import DEFAULT_OPTIONS

OUTPUT_ENV = "PFREAL_OUTPUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_INCOMPLETE, EXIT_FAILURE = 0, 1, 2, 3, 4

log = logging.getLogger("pfreal")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = __version__
    tolerances: dict = field(default_factory=dict)
    start_set: str | None = None
    created: str = ""  # the only field that changes between identical runs

    def write(self, out_dir: Path) -> Path:
        self.created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n")
        return path


def _tolerances() -> dict:
    return {"track": asdict(DEFAULT_OPTIONS), "dedup": DEDUP_TOL, "real": REAL_TOL}


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUTPUT_ENV) or "pfreal-out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _network(args) -> Network:
    try:
        net = parse_topology(args.topology)
        if getattr(args, "injections", None):
            net = Network(net.n, net.edges, tuple(_floats(args.injections)))
        return net
    except ModelError as exc:
        raise UsageError(str(exc)) from exc


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc


def _start_set(net: Network, args, bipartite: bool = True) -> StartSet:
    path = getattr(args, "start_set", None)
    if path and Path(path).exists():
        start = StartSet.from_json(Path(path).read_text())
        if start.network != net:
            raise UsageError(f"start set in {path} belongs to a different network")
        return start
    start = build_start_set(net, seed=args.seed, bipartite=bipartite)
    if not start.complete:
        raise RuntimeError("monodromy did not reach the expected solution count")
    if path:
        Path(path).write_text(start.to_json())
    return start


def _manifest(args, start: StartSet | None = None) -> RunManifest:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    return RunManifest(args.command, cfg, args.seed, tolerances=_tolerances(),
                       start_set=start.digest if start is not None else None)


# --- subcommands -------------------------------------------------------------

def cmd_solve(args) -> int:
    net = _network(args)
    seed = _seed(args)
    sources = sum(x is not None and x is not False for x in (args.b, args.b_file, args.random or None))
    if sources != 1:
        raise UsageError("give exactly one of --b, --b-file, --random")
    if args.random:
        b = sample_sphere(net.n_edges, trial_rng(seed, 0))
    elif args.b_file:
        b = np.array(_floats(Path(args.b_file).read_text().replace("\n", ",")))
    else:
        b = np.array(_floats(args.b))
    if b.shape != (net.n_edges,):
        raise UsageError(f"{net} has {net.n_edges} edges but {b.size} susceptances were given")
    if not np.any(b):
        raise UsageError("susceptances must not all be zero")
    start = _start_set(net, args)
    sol = solve_all(net, b, start, trial_rng(seed, 1))
    out = _out_dir(args)
    (out / "solution.json").write_text(sol.to_json() + "\n")
    _manifest(args, start).write(out)
    print(f"{sol.n_real} real ({sol.n_real_nontrivial} nontrivial); "
          f"{sol.n_nontrivial} nontrivial complex of {sol.expected_nontrivial} expected")
    if sol.degenerate:
        print("degenerate parameter point (positive-dimensional solution set)")
        return EXIT_DEGENERATE
    if not sol.complete:
        print(f"incomplete: completeness {sol.completeness:.3f}")
        return EXIT_INCOMPLETE
    return EXIT_OK


def cmd_distribution(args) -> int:
    net = _network(args)
    seed = _seed(args)
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    start = _start_set(net, args, bipartite=not args.no_bipartite)
    out = _out_dir(args)
    if isinstance(args.resume, str):
        log_path = Path(args.resume)
    else:
        log_path = Path(args.log) if args.log else out / "trials.jsonl"
    dist = run_distribution(net, start, args.trials, seed, workers=args.workers,
                            log_path=log_path, resume=args.resume is not None, alpha=args.alpha)
    (out / "histogram.csv").write_text(dist.to_csv())
    (out / "summary.json").write_text(json.dumps(dist.summary(), indent=2, sort_keys=True) + "\n")
    _manifest(args, start).write(out)
    print(dist.to_csv(), end="")
    print(f"mean {dist.mean:.4f}  DKW epsilon {dist.epsilon:.4f} (alpha={dist.alpha})  "
          f"excluded {dist.excluded}")
    return EXIT_OK


def _parse_fixed(items) -> dict:
    fixed = {}
    for item in items or ():
        try:
            edge, val = item.split("=")
            k, m = (int(v) for v in edge.split("-"))
            fixed[(k, m)] = float(val)
        except ValueError as exc:
            raise UsageError(f"--fix expects k-m=value, got {item!r}") from exc
    return fixed


def cmd_regions(args) -> int:
    net = _network(args)
    seed = _seed(args)
    try:
        spec = RegionSpec(net, _parse_fixed(args.fix), args.width, args.height)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    start = _start_set(net, args)
    grid = sample_region(spec, start, seed=seed, workers=args.workers)
    out = _out_dir(args)
    (out / "regions.ppm").write_bytes(render_image(grid))
    grid.write_csv(out / "regions.csv")
    (out / "regions.json").write_text(json.dumps(grid.metadata, indent=2, sort_keys=True) + "\n")
    _manifest(args, start).write(out)
    print(f"counts seen {grid.metadata['counts_seen']}; "
          f"{grid.metadata['degenerate_cells']} degenerate cells")
    if "warning" in grid.metadata:
        print(f"warning: {grid.metadata['warning']}", file=sys.stderr)
    return EXIT_OK


def cmd_kac(args) -> int:
    seed = _seed(args)
    rows = ["topology,degree,network_mean,kac_expected,monte_carlo_mean"]
    degrees = list(args.degree or [])
    compare = {}
    if args.compare:
        for topo in args.compare:
            net = parse_topology(topo)
            bounds = network_count_bounds(net)
            if bounds is None:
                raise UsageError(f"no known solution count for {topo}")
            start = _start_set(net, args)
            dist = run_distribution(net, start, args.network_trials, seed, workers=args.workers)
            compare[bounds[1]] = (topo, dist.mean)
            degrees.append(bounds[1])
    if not degrees:
        raise UsageError("give --degree and/or --compare")
    for N in degrees:
        if N < 1:
            raise UsageError("degrees must be >= 1")
        topo, net_mean = compare.get(N, ("", None))
        mc = random_poly_distribution(N, args.trials, seed).mean if args.trials else None
        rows.append(",".join([topo, str(N), "" if net_mean is None else f"{net_mean:.4f}",
                              f"{kac_expected(N):.4f}", "" if mc is None else f"{mc:.4f}"]))
    text = "\n".join(rows) + "\n"
    out = _out_dir(args)
    (out / "kac.csv").write_text(text)
    _manifest(args).write(out)
    print(text, end="")
    return EXIT_OK


def cmd_bounds(args) -> int:
    net = _network(args)
    bounds = solution_count_bounds(net.family, net.n) if net.family in ("cycle", "complete") else None
    if bounds is None:
        print(f"{net}: no closed-form count for this topology")
        return EXIT_OK
    total, nontrivial = bounds
    print(f"total {total}, nontrivial {nontrivial}, trivial {2 ** (net.n - 1)}")
    return EXIT_OK


def cmd_verify(args) -> int:
    net = _network(args)
    seed = _seed(args)
    ok, detail = False, ""
    if args.theorem == "max-real":
        family = "cycle" if net.n >= 3 and net == cycle_graph(net.n) else net.family or ""
        b, expected = max_real_construction(family, net.n)
        start = _start_set(net, args, bipartite=False)
        sol = solve_all(net, b, start, trial_rng(seed, 0))
        ok = sol.complete and sol.n_real == expected
        detail = f"{sol.n_real} real of {expected} expected"
    elif args.theorem == "infinite-family":
        b = np.ones(net.n_edges)
        start = _start_set(net, args)
        sol = solve_all(net, b, start, trial_rng(seed, 0))
        fam = verify_infinite_family(net, b, rng=trial_rng(seed, 1))
        ok = sol.degenerate and fam
        detail = f"degenerate={sol.degenerate}, family residuals below 1e-10: {fam}"
    elif args.theorem == "trees":
        ok = check_tree_trivial(net, trials=args.trials, rng=trial_rng(seed, 0))
        detail = f"no nontrivial real solutions in {args.trials} trials: {ok}"
    print(f"{'PASS' if ok else 'FAIL'}: {args.theorem} on {args.topology}: {detail}")
    return EXIT_OK if ok else EXIT_FAILURE



# --- parser ------------------------------------------------------------------

def _common(p, topology=True):
    if topology:
        p.add_argument("--topology", required=True,
                       help="cycle:N, complete:N or tree:a-b,c-d,... (node 0 is the slack)")
    p.add_argument("--seed", type=int, default=None,
                   help="base seed for all randomness (drawn from entropy and printed if absent)")
    p.add_argument("--out-dir", default=None,
                   help=f"output directory (default ${OUTPUT_ENV} or ./pfreal-out)")
    p.add_argument("--start-set", default=None,
                   help="JSON file to load the monodromy start set from, or to save it to")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pfreal", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pfreal {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    workers = os.cpu_count() or 1

    p = sub.add_parser("solve", help="all solutions at one susceptance vector")
    _common(p)
    p.add_argument("--b", default=None, help="comma-separated susceptances in sorted edge order")
    p.add_argument("--b-file", default=None, help="file with susceptances (commas or newlines)")
    p.add_argument("--random", action="store_true", help="draw susceptances uniformly on the sphere")
    p.add_argument("--injections", default=None,
                   help="comma-separated power injections for nodes 1..n-1 (default zero)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("distribution", help="Monte Carlo distribution of nontrivial real counts")
    _common(p)
    p.add_argument("--trials", type=int, default=10_000, help="number of sphere samples")
    p.add_argument("--workers", type=int, default=workers, help="worker processes")
    p.add_argument("--log", default=None, help="JSONL trial log (default <out-dir>/trials.jsonl)")
    p.add_argument("--resume", nargs="?", const=True, default=None, metavar="LOG",
                   help="reuse trials already in LOG (or in the --log file) and run the rest")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="DKW confidence level")
    p.add_argument("--no-bipartite", action="store_true",
                   help="ignore the bipartite symmetry (more paths, same counts)")
    p.set_defaults(func=cmd_distribution)

    p = sub.add_parser("regions", help="solution-count map over a 2-sphere of susceptances")
    _common(p)
    p.add_argument("--fix", action="append", default=[],
                   help="hold an edge fixed, e.g. 0-1=0.1 (repeatable); exactly 3 edges stay free")
    p.add_argument("--width", type=int, default=400, help="longitude cells")
    p.add_argument("--height", type=int, default=200, help="latitude cells")
    p.add_argument("--workers", type=int, default=workers, help="worker processes")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("kac", help="random-polynomial baseline and network comparison")
    _common(p, topology=False)
    p.add_argument("--degree", type=int, action="append", help="polynomial degree (repeatable)")
    p.add_argument("--trials", type=int, default=0,
                   help="Monte Carlo polynomials per degree (0 skips the simulation)")
    p.add_argument("--compare", action="append",
                   help="topology whose mean real count is compared at N = nontrivial count")
    p.add_argument("--network-trials", type=int, default=2000, help="trials per compared network")
    p.add_argument("--workers", type=int, default=workers, help="worker processes")
    p.set_defaults(func=cmd_kac)

    p = sub.add_parser("bounds", help="generic solution counts for a topology")
    p.add_argument("--topology", required=True, help="cycle:N or complete:N")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="check a structural result numerically")
    _common(p)
    p.add_argument("--theorem", required=True, choices=["max-real", "infinite-family", "trees"],
                   help="max-real: cycle maximum; infinite-family: all-ones degeneracy; "
                        "trees: no nontrivial real solutions")
    p.add_argument("--trials", type=int, default=100, help="random trials for the tree check")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ModelError) as exc:
        print(f"pfreal {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"pfreal {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
