"""Command line front end.

Eight subcommands drive the pipelines from JSON configuration files and
write diff-able artifacts: residual reports (JSON), field tables (CSV), and
a run_metadata.json per run (the only file carrying a timestamp).  The
``report`` subcommand aggregates any number of report files into one summary
and renders overview figures next to it.

Exit codes: 0 all requested suites passed, 1 a suite failed (or a runtime
contract was violated), 2 configuration problem (diagnostics carry a JSON
pointer), 3 a field denominator crossed zero (diagnostics list the nodes).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import (all_fundamental_reps, cartan_matrix, rep_from_json,
                      rep_to_json, verify_chevalley)
from .config import RunConfig, config_hash, load_config
from .errors import ConfigurationError, ContractError, SingularityError
from .identities import identity_sweep
from .lattice import (LatticeConfig, build_kernel, compute_p, compute_tau,
                      gtoda_residual, toda_residual, utoda_k1_residual,
                      utoda_residual)
from .mappings import (KIND_FIELDS, MappingState, ds_invariance_check,
                       iterate, trimmed)
from .numerics import Grid2D, ResidualReport
from .reporting import (atomic_write_text, csv_header, FIELD_HEADER,
                        FIELD_HEADER_T, print_report_lines, read_field_csv,
                        read_field_csv_t, report_document, write_field_csv,
                        write_field_csv_t, write_report, write_report_array,
                        write_run_metadata)

LATTICE_TASKS = ("residual", "fields", "unimodular", "map-fields")
SOLITON_TASKS = ("chain", "side-condition", "frozen-toda", "k1", "ds", "fields")


def _outdir(args, cfg: RunConfig | None, default: str) -> Path:
    out = args.out or (cfg.out if cfg else None) or default
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _tol_for(args, cfg: RunConfig | None, default: float) -> float:
    if getattr(args, "tol", None) is not None:
        return args.tol
    if cfg is not None and cfg.tol is not None:
        return cfg.tol
    return default


def _tasks(cfg: RunConfig, allowed: tuple, default: tuple) -> tuple:
    if cfg.tasks is None:
        return default
    for i, t in enumerate(cfg.tasks):
        if t not in allowed:
            raise ConfigurationError(
                f"unknown task {t!r} (allowed: {', '.join(allowed)})",
                pointer=f"/tasks/{i}")
    return cfg.tasks


def _finish(outdir: Path, subcommand: str, cfg_hash: str, seed: int,
            reports: list[ResidualReport], flags: dict,
            extra: dict | None = None) -> int:
    doc = report_document(subcommand, cfg_hash, reports, extra=extra)
    write_report(outdir / f"{subcommand.replace('-', '_')}_report.json", doc)
    write_run_metadata(outdir, subcommand, cfg_hash, seed, flags)
    print_report_lines(reports)
    print(f"artifacts in {outdir}")
    return 0 if doc["pass"] else 1


# ---------------------------------------------------------------------------
# verify-algebra / verify-identities
# ---------------------------------------------------------------------------


def _cmd_verify_algebra(args) -> int:
    outdir = _outdir(args, None, "runs/verify-algebra")
    h = config_hash({"series": args.series, "max_rank": args.max_rank})

    def unit(n: int) -> list[ResidualReport]:
        per = []
        for rep in all_fundamental_reps(n):
            dump = rep_to_json(rep)
            path = outdir / f"rep_A{n}_j{rep.j}.json"
            atomic_write_text(path, json.dumps(dump, sort_keys=True) + "\n")
            back = rep_from_json(json.loads(path.read_text(encoding="utf-8")))
            for mats, orig in ((back.H, rep.H), (back.E, rep.E), (back.F, rep.F)):
                for got, want in zip(mats, orig):
                    if not np.array_equal(np.asarray(got, dtype=np.int64),
                                          np.asarray(want, dtype=np.int64)):
                        raise ContractError(
                            f"representation dump round trip drifted at A{n} j={rep.j}")
            r = verify_chevalley(back)
            if args.tol is not None:
                r.tol = args.tol
            per.append(r)
        return per

    ranks = range(1, args.max_rank + 1)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            chunks = list(pool.map(unit, ranks))
    else:
        chunks = [unit(n) for n in ranks]
    reports = [r for chunk in chunks for r in chunk]
    return _finish(outdir, "verify-algebra", h, 0, reports,
                   {"series": args.series, "max_rank": args.max_rank})


def _cmd_verify_identities(args) -> int:
    outdir = _outdir(args, None, "runs/verify-identities")
    seed = args.seed if args.seed is not None else 0
    h = config_hash({"series": args.series, "max_rank": args.max_rank,
                     "samples": args.samples, "seed": seed})
    tol = args.tol if args.tol is not None else 1e-9
    reports = identity_sweep(args.max_rank, args.samples, seed,
                             tol=tol, jobs=args.jobs)
    write_report_array(outdir / "identities_report.json", reports)
    write_report(outdir / "verify_identities_report.json",
                 report_document("verify-identities", h, reports))
    write_run_metadata(outdir, "verify-identities", h, seed,
                       {"series": args.series, "max_rank": args.max_rank,
                        "samples": args.samples})
    print_report_lines(reports)
    print(f"artifacts in {outdir}")
    return 0 if all(r.passed for r in reports) else 1


# ---------------------------------------------------------------------------
# lattice pipelines (toda / utoda / gtoda)
# ---------------------------------------------------------------------------


def _lattice_run(args, which: str) -> int:
    cfg = load_config(args.config)
    alg = cfg.require("algebra")
    grid = cfg.require("grid")
    seed = args.seed if args.seed is not None else cfg.seed
    tasks = _tasks(cfg, LATTICE_TASKS, ("residual", "fields"))
    outdir = _outdir(args, cfg, f"runs/{which}")
    h = cfg.sha256()

    if which == "toda":
        if (cfg.m1 or 1) != 1 or (cfg.m2 or 1) != 1:
            raise ConfigurationError(
                "the toda pipeline is the depth-(1,1) system; deeper flows "
                "belong to the utoda subcommand", pointer="/m1")
        lc = cfg.lattice_config(1, 1)
    elif which == "utoda":
        m1 = cfg.require("m1")
        m2 = cfg.require("m2")
        lc = cfg.lattice_config(m1, m2)
    else:
        s = cfg.require("s")
        sbar = cfg.require("sbar")
        if cfg.coefficients:
            raise ConfigurationError(
                "the gtoda kernel takes its grade-2 blocks from s/sbar and "
                "unit grade-1 blocks; coefficients are not configurable here",
                pointer="/coefficients")
        if alg.n < 2:
            raise ConfigurationError("patterns need rank >= 2", pointer="/algebra/n")
        lc = LatticeConfig.build(
            alg.n, 2, 2,
            phi={(2, j + 1): float(v) for j, v in enumerate(s)},
            phibar={(2, j + 1): float(v) for j, v in enumerate(sbar)})

    K = build_kernel(lc, grid)
    tau = compute_tau(K)
    p = compute_p(tau, lc)
    n = alg.n

    units: list[tuple[str, object]] = []
    if "residual" in tasks:
        if which == "toda":
            tol = _tol_for(args, cfg, 1e-6)
            units.append(("residual", lambda: [toda_residual(tau, tol)]))
        elif which == "utoda":
            tol = _tol_for(args, cfg, 1e-6)
            units.append(("residual", lambda: utoda_residual(tau, p, tol)))
        else:
            tol = _tol_for(args, cfg, 1e-5)
            p1 = {i: p.p(1, i) for i in range(1, n + 1)}
            pbar1 = {i: p.pbar(1, i) for i in range(1, n + 1)}
            units.append(("residual", lambda: gtoda_residual(
                cartan_matrix("A", n), tau, p1, pbar1, cfg.s, cfg.sbar, tol)))
    if "unimodular" in tasks:
        units.append(("unimodular",
                      lambda: [K.unimodularity_report(samples=64, seed=seed)]))

    if args.jobs > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = [(name, pool.submit(fn)) for name, fn in units]
            chunks = [(name, fut.result()) for name, fut in futures]
    else:
        chunks = [(name, fn()) for name, fn in units]
    reports = [r for _, chunk in chunks for r in chunk]

    if "fields" in tasks:
        write_field_csv(outdir / "tau_fields.csv",
                        {i: tau.tau(i) for i in range(1, n + 1)}, grid)
        write_field_csv(outdir / "theta_fields.csv",
                        {i: tau.theta(i) for i in range(1, n + 1)}, grid)
        for r in range(1, lc.m1 + 1):
            write_field_csv(outdir / f"p{r}_fields.csv",
                            {i: p.p(r, i) for i in range(1, n + 1)}, grid)
        for r in range(1, lc.m2 + 1):
            write_field_csv(outdir / f"pbar{r}_fields.csv",
                            {i: p.pbar(r, i) for i in range(1, n + 1)}, grid)

    if "map-fields" in tasks:
        site = max(2, (n + 1) // 2)
        if which != "utoda" or site >= n + 1:
            raise ConfigurationError(
                "map-fields needs the utoda pipeline on rank >= 2",
                pointer="/tasks")
        if (lc.m1, lc.m2) == (1, 1):
            write_field_csv(outdir / "map_utoda11_fields.csv",
                            {1: tau.theta(site), 2: tau.theta(site - 1)}, grid)
        elif (lc.m1, lc.m2) == (2, 1):
            write_field_csv(outdir / "map_utoda12_fields.csv",
                            {1: tau.theta(site), 2: tau.theta(site - 1),
                             3: p.p(1, site), 4: p.p(1, site - 1)}, grid)
        else:
            raise ConfigurationError(
                f"no mapping consumes depth ({lc.m1},{lc.m2}) chain data; "
                "map-fields applies at (1,1) and (2,1)", pointer="/tasks")

    extra = {"seed": seed, "singular_nodes": len(tau.singular_nodes)}
    return _finish(outdir, which, h, seed, reports,
                   {"config": str(args.config), "tasks": list(tasks)}, extra)


def _cmd_toda(args) -> int:
    return _lattice_run(args, "toda")


def _cmd_utoda(args) -> int:
    return _lattice_run(args, "utoda")


def _cmd_gtoda(args) -> int:
    return _lattice_run(args, "gtoda")


# ---------------------------------------------------------------------------
# map
# ---------------------------------------------------------------------------


def _cmd_map(args) -> int:
    names = KIND_FIELDS[args.kind]
    fields, grid = read_field_csv(args.infile)
    want = set(range(1, len(names) + 1))
    if set(fields) != want:
        raise ConfigurationError(
            f"kind {args.kind!r} wants field slots {sorted(want)} in the site "
            f"column, table has {sorted(fields)}")
    state = MappingState(kind=args.kind,
                         fields={names[k]: fields[k + 1] for k in range(len(names))},
                         grid=grid)
    state = iterate(state, args.iterations)
    state = trimmed(state)
    write_field_csv(args.out, {k + 1: state.fields[names[k]]
                               for k in range(len(names))}, state.grid)
    print(f"applied {args.kind} x{args.iterations}; wrote {args.out} "
          f"({state.grid.Nx}x{state.grid.Ny} interior nodes)")
    return 0


# ---------------------------------------------------------------------------
# soliton
# ---------------------------------------------------------------------------


def _cmd_soliton(args) -> int:
    from .solitons import (ds_soliton, linear_eq_residual,
                           nilpotent_chain_residual, time_dependent_tau)

    cfg = load_config(args.config)
    tf = cfg.require("time_flow")
    frame = tf.frame.build()
    rank = cfg.algebra.n if cfg.algebra is not None else frame.m
    if rank != frame.m:
        raise ConfigurationError(
            f"rank {rank} does not match the frame's {frame.m} modes",
            pointer="/algebra/n")
    tasks = _tasks(cfg, SOLITON_TASKS, SOLITON_TASKS)
    outdir = _outdir(args, cfg, "runs/soliton")
    h = cfg.sha256()
    seed = args.seed if args.seed is not None else cfg.seed

    if cfg.grid is not None:
        xs, ys = cfg.grid.xs, cfg.grid.ys
    else:
        xs = ys = np.linspace(-0.3, 0.3, 61)
    ts = np.linspace(tf.span[0], tf.span[1], tf.steps + 1)

    reports: list[ResidualReport] = []
    tau = None
    if {"side-condition", "frozen-toda", "k1", "fields"} & set(tasks):
        tau = time_dependent_tau(frame, rank=rank, xs=xs, ys=ys, ts=ts)

    if "chain" in tasks:
        reports.append(linear_eq_residual(frame))
        reports.append(nilpotent_chain_residual(
            frame, tol=args.tol if args.tol is not None else cfg.tol))
    if "side-condition" in tasks:
        dev = tau.side_condition_deviation()
        reports.append(ResidualReport(
            name=f"side-condition-k{frame.k}", max_abs=dev, rms=dev,
            tol=_tol_for(args, cfg, 1e-9),
            meta={"statement": "order-k extraction equals one"}))
    if "frozen-toda" in tasks:
        reports.append(tau.frozen_toda_residual(
            it=len(ts) // 2, tol=_tol_for(args, cfg, 1e-6)))
    if "k1" in tasks:
        taus, pbars = tau.k1_slices(iy=len(ys) // 2)
        ht = float(ts[1] - ts[0])
        hx = float(xs[1] - xs[0])
        k1 = utoda_k1_residual(taus, pbars, k=frame.k, hx=hx, ht=ht,
                               tol=_tol_for(args, cfg, 1e-5))
        for r in k1:
            # same lattice system as a depth-(k,1) flow run, but checked on
            # (x, slow-time) slices; keep the report names distinguishable
            r.name += "-slowtime"
        reports.extend(k1)
    if "ds" in tasks:
        if tf.sites is not None:
            u_site, v_site = tf.sites
        else:
            center = (rank + 1) // 2
            u_site, v_site = center - 1, center + 1
        d = ds_soliton(u_site, v_site, frame=frame, xs=xs, ys=ys, ts=ts)
        reports.append(ds_invariance_check(
            d.u, d.v, d.ts, d.hx, d.hy,
            tol=_tol_for(args, cfg, 1e-4),
            mapped_tol=10 * _tol_for(args, cfg, 1e-4)))
        mid = len(ts) // 2
        write_field_csv(outdir / "map_dt_fields.csv",
                        {1: d.u[:, :, mid], 2: d.v[:, :, mid]},
                        Grid2D(x0=float(xs[0]), y0=float(ys[0]),
                               hx=float(xs[1] - xs[0]), hy=float(ys[1] - ys[0]),
                               Nx=len(xs), Ny=len(ys)))
    if "fields" in tasks:
        write_field_csv_t(outdir / "soliton_tau_fields.csv",
                          {i: tau.tau(i) for i in range(1, rank + 1)},
                          xs, ys, ts)

    extra = {"seed": seed, "frame": {"k": frame.k, "modes": list(frame.modes),
                                     "amps": list(frame.amps)}}
    return _finish(outdir, "soliton", h, seed, reports,
                   {"config": str(args.config), "tasks": list(tasks)}, extra)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _cmd_report(args) -> int:
    from .plots import render_field_heatmaps, render_summary_bars

    indir = Path(args.indir)
    if not indir.is_dir():
        raise ConfigurationError(f"{indir} is not a directory")
    outdir = _outdir(args, None, str(indir))

    sources = []
    flat: list[dict] = []
    for path in sorted(indir.glob("*_report.json")):
        data = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(data, list):
            entry = {"file": path.name, "reports": data}
        else:
            entry = {"file": path.name,
                     "subcommand": data.get("subcommand"),
                     "config_sha256": data.get("config_sha256"),
                     "reports": data.get("reports", [])}
        sources.append(entry)
        flat.extend(entry["reports"])
    if not flat:
        raise ConfigurationError(f"no *_report.json with reports under {indir}")

    # identities arrays and full documents may both be present; dedupe on
    # (name, max_abs) so a report counted twice cannot mask a failure
    seen = set()
    unique = []
    for r in flat:
        key = (r["name"], r["max_abs"])
        if key not in seen:
            seen.add(key)
            unique.append(r)

    summary = {
        "version": __version__,
        "pass": all(r["pass"] for r in unique),
        "suites": len(unique),
        "sources": sources,
    }
    write_report(outdir / "summary.json", summary)

    figures = [render_summary_bars(unique, outdir / "summary_residuals.png")]
    for csv_path in sorted(indir.glob("*_fields.csv")):
        head = csv_header(csv_path)
        stem = csv_path.stem
        if head == FIELD_HEADER:
            fields, grid = read_field_csv(csv_path)
            figures.append(render_field_heatmaps(
                fields, grid, outdir / f"{stem}.png", title=stem))
        elif head == FIELD_HEADER_T:
            fields, axx, axy, axt = read_field_csv_t(csv_path)
            mid = len(axt) // 2
            grid = Grid2D(x0=float(axx[0]), y0=float(axy[0]),
                          hx=float(axx[1] - axx[0]), hy=float(axy[1] - axy[0]),
                          Nx=len(axx), Ny=len(axy))
            figures.append(render_field_heatmaps(
                {s: a[:, :, mid] for s, a in fields.items()}, grid,
                outdir / f"{stem}.png",
                title=f"{stem} (tbar = {axt[mid]:g})"))

    for r in unique:
        status = "PASS" if r["pass"] else "FAIL"
        print(f"{status} {r['name']}: max |r| = {r['max_abs']:.3e} "
              f"(tol {r['tol']:.1e})")
    for fig in figures:
        print(f"figure {fig}")
    print(f"summary in {outdir / 'summary.json'}")
    return 0 if summary["pass"] else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="utoda",
        description="Toda-type lattice hierarchies: build flows, verify "
                    "residual systems, apply integrable mappings, dress "
                    "solitons, and aggregate reports.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, config=False):
        if config:
            p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (default runs/<subcommand>)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured RNG seed")
        p.add_argument("--tol", type=float, default=None,
                       help="override per-suite tolerance defaults")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker threads for independent units")

    p = sub.add_parser("verify-algebra",
                       help="exact Chevalley/highest-weight relations, with "
                            "representation dumps and round-trip checks")
    p.add_argument("--series", default="A", choices=["A"])
    p.add_argument("--max-rank", type=int, default=6)
    common(p)
    p.set_defaults(func=_cmd_verify_algebra)

    p = sub.add_parser("verify-identities",
                       help="determinant identities on seeded random group "
                            "elements (emits a JSON array of reports)")
    p.add_argument("--series", default="A", choices=["A"])
    p.add_argument("--max-rank", type=int, default=4)
    p.add_argument("--samples", type=int, default=100)
    common(p)
    p.set_defaults(func=_cmd_verify_identities)

    for name, fn, blurb in (
            ("toda", _cmd_toda, "depth-(1,1) lattice residuals from a flow config"),
            ("utoda", _cmd_utoda, "depth-(m1,m2) lattice residuals from a flow config"),
            ("gtoda", _cmd_gtoda, "pattern-coupled depth-(2,2) lattice residuals")):
        p = sub.add_parser(name, help=blurb)
        common(p, config=True)
        p.set_defaults(func=fn)

    p = sub.add_parser("map", help="apply an integrable mapping to a field table")
    p.add_argument("--kind", required=True, choices=sorted(KIND_FIELDS))
    p.add_argument("--in", dest="infile", required=True,
                   help="input field table (site column = field slot)")
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--out", required=True, help="output field table")
    p.set_defaults(func=_cmd_map)

    p = sub.add_parser("soliton",
                       help="Wronskian-dressed kernels: chain identities, "
                            "frozen-lattice and slow-time residuals")
    common(p, config=True)
    p.set_defaults(func=_cmd_soliton)

    p = sub.add_parser("report",
                       help="aggregate report JSONs into summary.json and "
                            "render overview figures")
    p.add_argument("--in", dest="indir", required=True,
                   help="directory holding *_report.json (and field CSVs)")
    p.add_argument("--out", help="where to write the summary (default: --in)")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SingularityError as exc:
        print(f"singularity: {exc}", file=sys.stderr)
        return 3
    except ContractError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
