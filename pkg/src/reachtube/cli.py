"""Command-line front end: run models, dump reachtubes, benchmark table.

Exit codes: 0 success, 1 usage, 2 model/config parse error, 3 numerical
failure (blow-up or uncertifiable step; the tube prefix is still written).
``LRTNG_LOG={error|info|debug}`` selects stderr verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from typing import Optional, Sequence, TextIO

from .benchmarks import (
    BenchmarkSpec,
    LtcWeights,
    NeuralWeights,
    builtin_benchmarks,
    ltc_cartpole_text,
    neural_cartpole_text,
)
from .model import InitialSet, ParseError, parse_init, parse_model
from .reachtube import ReachsetStep, RunConfig, RunSummary, run

log = logging.getLogger("reachtube")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage problems, not argparse's 2
        raise _UsageError(message)


# -- output schema -------------------------------------------------------------


def csv_header(n: int) -> list[str]:
    cols = ["t"]
    cols += [f"x{j + 1}" for j in range(n)]
    cols += ["delta", "delta_M0", "sigma", "sigma_M0"]
    cols += [f"A{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    for j in range(n):
        cols += [f"X{j + 1}_lo", f"X{j + 1}_hi"]
    cols += ["vol_ell", "vol_ball", "vol_box"]
    return cols


def record_row(rec: ReachsetStep) -> list[float]:
    n = len(rec.center)
    row = [rec.t]
    row += list(rec.center)
    row += [rec.delta, rec.delta_M0, rec.sigma, rec.sigma_M0]
    row += [float(v) for r in rec.frame.A.tolist() for v in r]
    for j in range(n):
        a = rec.enclosure[j]
        row += [a.lo, a.hi]
    row += [rec.vol_ellipsoid, rec.vol_ball, rec.vol_box]
    return row


def write_csv(out: TextIO, summary: RunSummary, n: int) -> None:
    out.write(",".join(csv_header(n)) + "\n")
    for rec in summary.steps:
        out.write(",".join(repr(v) for v in record_row(rec)) + "\n")


def record_obj(rec: ReachsetStep) -> dict:
    n = len(rec.center)
    return {
        "t": rec.t,
        "center": list(rec.center),
        "delta": rec.delta,
        "delta_M0": rec.delta_M0,
        "sigma": rec.sigma,
        "sigma_M0": rec.sigma_M0,
        "A": [list(map(float, r)) for r in rec.frame.A.tolist()],
        "X_lo": [rec.enclosure[j].lo for j in range(n)],
        "X_hi": [rec.enclosure[j].hi for j in range(n)],
        "vol_ell": rec.vol_ellipsoid,
        "vol_ball": rec.vol_ball,
        "vol_box": rec.vol_box,
    }


def write_json(out: TextIO, summary: RunSummary, n: int, model: str) -> None:
    doc = {
        "records": [record_obj(r) for r in summary.steps],
        "summary": {
            "model": model,
            "dim": n,
            "average_volume": summary.average_volume,
            "steps": summary.total_steps,
            "completed": summary.completed,
            "failure_time": summary.failure_time,
            "message": summary.message,
            "floored_dimensions": list(summary.floored_dimensions),
        },
    }
    json.dump(doc, out)
    out.write("\n")


# -- subcommands ---------------------------------------------------------------


def _build_cli() -> _Parser:
    p = _Parser(prog="reachtube", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="construct a reachtube for one model")
    pr.add_argument("--model", required=True, help="model file (x<k>' = expr lines)")
    pr.add_argument("--init", help="initial-set file (center/radius/dt/T/order)")
    pr.add_argument("--center", help="comma-separated centre, e.g. 1,1")
    pr.add_argument("--radius", help="scalar or comma-separated radii")
    pr.add_argument("--dt", type=float, help="time step")
    pr.add_argument("--horizon", type=float, help="time horizon T")
    pr.add_argument("--order", type=int, choices=(1, 2, 4), help="RK order (1, 2 or 4)")
    pr.add_argument("--time-var", type=int, metavar="K", help="1-based index of the time variable x<K>")
    pr.add_argument("--out", help="write the tube to this file (default: stdout)")
    pr.add_argument("--format", choices=("csv", "json"), default="csv")
    pr.add_argument("--every", type=int, default=1, metavar="N", help="emit every N-th step")
    pr.add_argument("--blowup-threshold", type=float, help="box-volume blow-up cap")
    pr.add_argument("--no-intersect", action="store_true", help="ellipsoid-hull-only reachsets (diagnostic)")

    pb = sub.add_parser("bench", help="run the built-in benchmark suite")
    pb.add_argument("--only", nargs="*", metavar="NAME", help="labels or names to run (default: non-neural suite)")
    pb.add_argument("--order", type=int, choices=(1, 2, 4), default=1)
    pb.add_argument("--out", metavar="DIR", help="write per-model tubes into DIR")
    pb.add_argument("--weights", nargs="*", default=[], metavar="NAME=FILE", help="weight files for neural models")
    pb.add_argument("--dt", type=float, help="override every model's time step")
    pb.add_argument("--horizon", type=float, help="override every model's horizon")
    pb.add_argument("--every", type=int, default=1)

    pl = sub.add_parser("list-models", help="list built-in models")
    pl.add_argument("--format", choices=("table", "json"), default="table")
    return p


def cmd_run(ns) -> int:
    try:
        with open(ns.model, "r", encoding="utf-8") as fh:
            sys_ = parse_model(fh.read(), name=os.path.basename(ns.model))
    except OSError as exc:
        print(f"error: cannot read model: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ParseError as exc:
        print(f"error: {ns.model}: {exc}", file=sys.stderr)
        return EXIT_PARSE

    init = None
    dt = ns.dt
    horizon = ns.horizon
    order = ns.order
    if ns.init:
        try:
            with open(ns.init, "r", encoding="utf-8") as fh:
                cfgfile = parse_init(fh.read())
        except OSError as exc:
            print(f"error: cannot read init file: {exc}", file=sys.stderr)
            return EXIT_PARSE
        except ParseError as exc:
            print(f"error: {ns.init}: {exc}", file=sys.stderr)
            return EXIT_PARSE
        init = cfgfile.initial
        dt = dt if dt is not None else cfgfile.dt
        horizon = horizon if horizon is not None else cfgfile.horizon
        order = order if order is not None else cfgfile.order
    if ns.center is not None or ns.radius is not None:
        if ns.center is None or ns.radius is None:
            raise _UsageError("--center and --radius must be given together")
        try:
            center = [float(v) for v in ns.center.split(",")]
            radii = [float(v) for v in ns.radius.split(",")]
        except ValueError as exc:
            print(f"error: bad --center/--radius: {exc}", file=sys.stderr)
            return EXIT_PARSE
        if len(radii) == 1:
            radii = radii * len(center)
        try:
            init = InitialSet.of(center, radii)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
    if init is None:
        raise _UsageError("provide --init FILE or --center/--radius")
    if dt is None or horizon is None:
        raise _UsageError("--dt and --horizon are required (flag or init file)")
    order = 1 if order is None else order

    try:
        cfg = RunConfig(
            dt=dt,
            horizon=horizon,
            initial=init,
            order=order,
            time_index=None if ns.time_var is None else ns.time_var - 1,
            blowup_threshold=ns.blowup_threshold,
            output_every=ns.every,
            intersect_ball=not ns.no_intersect,
        )
    except ValueError as exc:
        raise _UsageError(str(exc))

    if init.floored:
        log.info(
            "initial radius floored to 1e-9 in dimensions %s",
            [j + 1 for j in init.floored],
        )
    summary = run(sys_, cfg)

    if ns.out:
        with open(ns.out, "w", encoding="utf-8") as fh:
            _write(fh, summary, sys_.dim, ns.format, sys_.name)
    else:
        _write(sys.stdout, summary, sys_.dim, ns.format, sys_.name)
    if summary.message:
        print(f"failure: {summary.message}", file=sys.stderr)
    print(
        f"AV={summary.average_volume!r} steps={summary.total_steps} "
        f"completed={str(summary.completed).lower()}"
    )
    return EXIT_OK if summary.completed else EXIT_NUMERIC


def _write(fh, summary, dim, fmt, name):
    if fmt == "csv":
        write_csv(fh, summary, dim)
    else:
        write_json(fh, summary, dim, name)


def _parse_weight_file(path: str) -> dict[str, list[list[float]]]:
    blocks: dict[str, list[list[float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        tokens: list[str] = []
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    i = 0
    while i < len(tokens):
        name = tokens[i]
        rows, cols = int(tokens[i + 1]), int(tokens[i + 2])
        i += 3
        vals = [float(v) for v in tokens[i : i + rows * cols]]
        if len(vals) != rows * cols:
            raise ParseError(f"weight block {name!r} truncated", 0, 0)
        i += rows * cols
        blocks[name] = [vals[r * cols : (r + 1) * cols] for r in range(rows)]
    return blocks


def _vec(block: list[list[float]]) -> tuple[float, ...]:
    flat = [v for row in block for v in row]
    return tuple(flat)


def _neural_spec_with_weights(spec: BenchmarkSpec, path: str) -> BenchmarkSpec:
    blocks = _parse_weight_file(path)
    if spec.label == "C-N":
        wts = NeuralWeights(
            W=tuple(tuple(r) for r in blocks["W"]),
            V=tuple(tuple(r) for r in blocks["V"]),
            b=_vec(blocks["b"]),
            U=_vec(blocks["U"]),
            c=_vec(blocks["c"])[0],
        )
        text = neural_cartpole_text(wts)
    else:
        wts = LtcWeights(
            c=_vec(blocks["c"]),
            gleak=_vec(blocks["gleak"]),
            vleak=_vec(blocks["vleak"]),
            w=tuple(tuple(r) for r in blocks["w"]),
            E=tuple(tuple(r) for r in blocks["E"]),
            sigma=tuple(tuple(r) for r in blocks["sigma"]),
            mu=tuple(tuple(r) for r in blocks["mu"]),
            a=_vec(blocks["a"]),
            bout=_vec(blocks["bout"])[0],
        )
        text = ltc_cartpole_text(wts)
    return BenchmarkSpec(
        label=spec.label,
        name=spec.name,
        dim=spec.dim,
        model_text=text,
        center=spec.center,
        radii=spec.radii,
        dt=spec.dt,
        horizon=spec.horizon,
        time_index=spec.time_index,
        neural=True,
    )


def cmd_bench(ns) -> int:
    weights = {}
    for item in ns.weights:
        name, _, path = item.partition("=")
        if not path:
            raise _UsageError(f"--weights expects NAME=FILE, got {item!r}")
        weights[name.upper()] = path

    all_specs = builtin_benchmarks()
    if ns.only:
        wanted = [w.lower() for w in ns.only]
        specs = [
            s for s in all_specs if s.label.lower() in wanted or s.name.lower() in wanted
        ]
        if not specs:
            raise _UsageError(f"no benchmark matches {ns.only}")
    else:
        specs = [s for s in all_specs if not s.neural or s.label.upper() in weights]

    if ns.out:
        os.makedirs(ns.out, exist_ok=True)

    header = f"{'model':<16}{'dt':>10}{'T':>8}{'r':>10}{'order':>6}{'AV':>14}{'time[s]':>10}  status"
    lines = [header, "-" * len(header)]
    failures = 0
    attempted = 0
    for spec in specs:
        if spec.neural:
            if spec.label.upper() not in weights:
                lines.append(f"{spec.name:<16}{'skipped (no weights)':>58}")
                continue
            try:
                spec = _neural_spec_with_weights(spec, weights[spec.label.upper()])
            except (OSError, KeyError, ParseError) as exc:
                print(f"error: weights for {spec.label}: {exc}", file=sys.stderr)
                return EXIT_PARSE
        attempted += 1
        sys_ = spec.system()
        dt = ns.dt if ns.dt else spec.dt
        horizon = ns.horizon if ns.horizon else spec.horizon
        init = spec.initial_set()
        vol0 = 1.0
        for j, r in enumerate(init.radii):
            if j != spec.time_index:
                vol0 *= 2.0 * r
        cfg = RunConfig(
            dt=dt,
            horizon=horizon,
            initial=init,
            order=ns.order,
            time_index=spec.time_index,
            blowup_threshold=spec.blowup_factor * vol0,
            output_every=ns.every,
        )
        t0 = time.perf_counter()
        summary = run(sys_, cfg)
        wall = time.perf_counter() - t0
        status = "completed" if summary.completed else f"Fail @ t={summary.failure_time:.4g}"
        if not summary.completed:
            failures += 1
        r0 = spec.radii[0] if spec.radii else 0.0
        lines.append(
            f"{spec.name:<16}{dt:>10.4g}{horizon:>8.4g}{r0:>10.4g}{ns.order:>6d}"
            f"{summary.average_volume:>14.4g}{wall:>10.2f}  {status}"
        )
        if ns.out:
            path = os.path.join(ns.out, f"{spec.name}.csv")
            with open(path, "w", encoding="utf-8") as fh:
                write_csv(fh, summary, sys_.dim)
    print("\n".join(lines))
    return EXIT_NUMERIC if attempted and failures == attempted else EXIT_OK


def cmd_list_models(ns) -> int:
    specs = builtin_benchmarks()
    if ns.format == "json":
        doc = [
            {
                "label": s.label,
                "name": s.name,
                "dim": s.dim,
                "dt": s.dt,
                "horizon": s.horizon,
                "radii": list(s.radii),
                "center": list(s.center),
                "time_index": s.time_index,
                "neural": s.neural,
            }
            for s in specs
        ]
        json.dump(doc, sys.stdout)
        print()
        return EXIT_OK
    print(f"{'label':<6}{'name':<18}{'dim':>4}{'dt':>10}{'T':>8}{'r':>10}  notes")
    for s in specs:
        notes = []
        if s.time_index is not None:
            notes.append(f"time var x{s.time_index + 1}")
        if s.neural:
            notes.append("needs --weights")
        r0 = s.radii[0] if s.radii else 0.0
        print(
            f"{s.label:<6}{s.name:<18}{s.dim:>4}{s.dt:>10.4g}{s.horizon:>8.4g}"
            f"{r0:>10.4g}  {', '.join(notes)}"
        )
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    level = os.environ.get("LRTNG_LOG", "error").lower()
    logging.basicConfig(
        stream=sys.stderr,
        level={"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
            level, logging.ERROR
        ),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = _build_cli()
    try:
        ns = parser.parse_args(argv)
        if ns.command == "run":
            return cmd_run(ns)
        if ns.command == "bench":
            return cmd_bench(ns)
        return cmd_list_models(ns)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        print("allowed orders: 1, 2, 4" if "order" in str(exc) else "see --help", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
