"""Command line entry point ``steklov-lab``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .continuum import fem_steklov
from .discretize import DiscretizationParams, SampledDomain, build_discretization
from .errors import LabError
from .graphs import load_graph, make_graph
from .lab import EXPERIMENTS, ExperimentConfig, expander_graph, parse_config, run_experiment
from .mesh import attach_collar
from .steklov import steklov_spectrum
from .surfaces import (
    build_connected_boundary_surface,
    build_flat_surface,
    build_lattice_domain,
    complex_to_mesh,
    flat_cylinder,
    rectangle,
    single_square,
)


def _complex_from_spec(spec, seed):
    name, _, arg = spec.partition(":")
    if name == "lattice":
        return build_lattice_domain(int(arg))
    if name == "flat":
        return build_flat_surface(expander_graph(int(arg), seed))
    if name == "carved":
        return build_connected_boundary_surface(expander_graph(int(arg), seed))
    if name == "rectangle":
        w, _, h = arg.partition("x")
        return rectangle(int(w), int(h or 1))
    if name == "square":
        return single_square()
    if name == "cylinder":
        return flat_cylinder()
    raise LabError(f"unknown domain spec {spec!r}")


def _load_domain(spec, args):
    """A sampled-domain file, or a builder spec such as ``lattice:2`` or ``rectangle:10x1``."""
    path = Path(spec)
    if path.exists():
        return SampledDomain.from_text(path.read_text())
    c = _complex_from_spec(spec, args.seed)
    mesh = attach_collar(complex_to_mesh(c, args.m), 1.0, args.m)
    return SampledDomain.from_mesh(mesh)


def _emit(data, fmt, out, name):
    if fmt == "json":
        text = json.dumps(data, indent=1) + "\n"
    else:
        # list-valued entries become columns; scalars go into leading comment lines
        cols = [k for k, v in data.items() if isinstance(v, list)]
        lines = [f"# {k}: {json.dumps(v)}" for k, v in data.items() if not isinstance(v, list)]
        lines.append(",".join(cols))
        for i in range(max((len(data[k]) for k in cols), default=0)):
            lines.append(",".join(str(data[k][i]) if i < len(data[k]) else "" for k in cols))
        text = "\n".join(lines) + "\n"
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / f"{name}.{fmt}").write_text(text)
    sys.stdout.write(text)


def cmd_spectrum(args):
    if args.graph.endswith(".json") or Path(args.graph).exists():
        g = load_graph(args.graph)
    else:
        family, _, rest = args.graph.partition(":")
        params = dict(kv.split("=") for kv in rest.split(",") if kv)
        params = {k: int(v) for k, v in params.items()}
        params.setdefault("seed", args.seed)
        g = make_graph(family, **params)
    spec = steklov_spectrum(g)
    data = json.loads(spec.to_json())
    _emit(data, args.format, args.out, "spectrum")


def cmd_discretize(args):
    domain = _load_domain(args.domain, args)
    if args.save_domain:
        Path(args.save_domain).write_text(domain.to_text())
    disc = build_discretization(domain, DiscretizationParams(args.eps, args.r0))
    data = dict(disc.report)
    data["locations"] = [int(v) for v in disc.locations]
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "graph.json").write_text(disc.graph.to_json())
    _emit(data, args.format, args.out, "discretization")


def cmd_fem(args):
    mesh = complex_to_mesh(_complex_from_spec(args.domain, args.seed), args.m)
    if args.collar:
        mesh = attach_collar(mesh, 1.0, args.m)
    res = fem_steklov(mesh, args.count, consistent_mass=args.consistent_mass)
    _emit(res.to_dict(), args.format, args.out, "fem")


def cmd_experiment(args):
    overrides = {"seed": args.seed, "out": args.out}
    if args.config:
        text = Path(args.config).read_text()
        if "experiment" not in text:
            text += f"\nexperiment = {args.name}\n"
        cfg = parse_config(text, **overrides)
        if cfg.experiment != args.name:
            raise LabError(f"config is for {cfg.experiment!r}, not {args.name!r}")
    else:
        cfg = ExperimentConfig(args.name, **{k: v for k, v in overrides.items() if v is not None})
    rows, text, manifest = run_experiment(cfg, fmt=args.format)
    sys.stdout.write(text)
    failed = manifest["failed_rows"]
    if failed:
        sys.stderr.write(f"{failed} row(s) failed; see the status column\n")
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="steklov-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(fmt="json"):
        # a fresh parent per subcommand: argparse shares parent actions, defaults included
        parent = argparse.ArgumentParser(add_help=False)
        parent.add_argument("--seed", type=int, default=None)
        parent.add_argument("--out", default=None)
        parent.add_argument("--format", choices=("csv", "json"), default=fmt)
        return [parent]

    s = sub.add_parser("spectrum", parents=common(), help="Steklov spectrum of a graph JSON file")
    s.add_argument("graph", help="graph JSON file, or family:key=val,... (e.g. lattice:l=3)")
    s.set_defaults(func=cmd_spectrum)

    d = sub.add_parser("discretize", parents=common(), help="eps-discretization of a sampled domain")
    d.add_argument("domain", help="sampled-domain file or builder spec (lattice:2, rectangle:10x1, ...)")
    d.add_argument("--eps", type=float, required=True)
    d.add_argument("--r0", type=float, default=1.05)
    d.add_argument("--m", type=int, default=8)
    d.add_argument("--save-domain", default=None, help="also write the sampled domain to this file")
    d.set_defaults(func=cmd_discretize)

    f = sub.add_parser("fem", parents=common(), help="FEM Steklov eigenvalues of a built surface")
    f.add_argument("domain")
    f.add_argument("--count", type=int, default=6)
    f.add_argument("--m", type=int, default=8)
    f.add_argument("--consistent-mass", action="store_true")
    f.add_argument("--collar", action="store_true", help="attach a unit product collar first")
    f.set_defaults(func=cmd_fem)

    e = sub.add_parser("experiment", parents=common("csv"), help="run an experiment table")
    e.add_argument("name", choices=EXPERIMENTS)
    e.add_argument("--config", default=None)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is None and args.command != "experiment":
        args.seed = 7
    try:
        code = args.func(args)
    except LabError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
