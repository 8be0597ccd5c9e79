"""Command line entry point: ``fockdyn run | check-qiso | gram | witness | preset``."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from fockdyn.config import DEFAULT_TOLERANCES, load_config
from fockdyn.errors import BudgetExceeded, ConfigError, SliceError

EXIT_OK, EXIT_GATE, EXIT_CONFIG = 0, 1, 2


def _parse_tolerances(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--tolerance expects KEY=VAL, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip()
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance {k!r}; known: {', '.join(sorted(DEFAULT_TOLERANCES))}")
        try:
            out[k] = float(v)
        except ValueError:
            raise ConfigError(f"tolerance {k} needs a number, got {v!r}") from None
    return out


def _emit(obj, fmt: str, out_dir, stem: str):
    """Print ``obj`` (a list of flat records or a dict) and optionally write it."""
    if fmt == "csv":
        rows = obj if isinstance(obj, list) else [obj]
        keys = sorted({k for r in rows for k in r})
        lines = [",".join(keys)] + [",".join(_csv_cell(r.get(k, "")) for k in keys) for r in rows]
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    sys.stdout.write(text)
    if out_dir:
        p = Path(out_dir)
        p.mkdir(parents=True, exist_ok=True)
        (p / f"{stem}.{fmt}").write_text(text, encoding="utf-8")


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    s = str(v)
    return f'"{s}"' if "," in s else s


def _jsonable(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    return _run_cfg(cfg, args)


def cmd_preset(args) -> int:
    from fockdyn.scenarios import preset

    cfg = preset(args.name)
    if args.write_config:
        Path(args.write_config).write_text(cfg.to_ini(), encoding="utf-8")
        return EXIT_OK
    return _run_cfg(cfg, args)


def _run_cfg(cfg, args) -> int:
    from fockdyn.scenarios import run_scenario

    if args.seed is not None:
        cfg.seed = args.seed
    cfg.tolerances.update(_parse_tolerances(args.tolerance))
    formats = [args.format] if args.format else None
    code, summary = run_scenario(cfg, out_dir=args.out, formats=formats, plots=False if args.no_plots else None)
    for g in summary["gates"]:
        print(f"{'PASS' if g['passed'] else 'FAIL'} {g['name']}: value={g['value']} {g['relation']} {g['threshold']}")
    ft = summary["factor_type"]
    print(f"factor type ({ft['status']}): {ft['type']}; {ft['creation_algebra_note']}")
    for note in summary["report"]["notes"]:
        print(f"note: {note}")
    skipped = summary["extras"].get("qiso", {}).get("skipped")
    if skipped:
        print(f"qiso skipped: {skipped}")
    for f in summary["files"]:
        print(f"wrote {f}")
    return code


def cmd_check_qiso(args) -> int:
    from fockdyn.qiso import build_iso, random_unitary, residual_report

    tol = dict(DEFAULT_TOLERANCES)
    tol.update(_parse_tolerances(args.tolerance))
    bundle = build_iso(args.q, args.letters, args.cutoff)
    rng = np.random.default_rng(args.seed or 0)
    rows = residual_report(bundle, random_unitary(args.letters, rng))
    _emit(rows, args.format or "json", args.out, "qiso")
    worst = max(r["value"] for r in rows if r["residual_name"] != "r_fixedpoint_literal")
    return EXIT_OK if worst <= tol["qiso"] else EXIT_GATE


def cmd_gram(args) -> int:
    from fockdyn.qfock import qgram

    q = Fraction(args.q) if args.exact else float(Fraction(args.q))
    G = qgram(args.n, q, d=args.d, exact=args.exact)
    fmt = args.format or "json"
    if fmt == "csv":
        text = "\n".join(",".join(str(x) for x in row) for row in G) + "\n"
        sys.stdout.write(text)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "gram.csv").write_text(text, encoding="utf-8")
    else:
        obj = {"n": args.n, "d": args.d, "q": str(args.q), "exact": args.exact, "gram": [[str(x) if args.exact else float(x) for x in row] for row in G]}
        _emit(obj, "json", args.out, "gram")
    return EXIT_OK


def cmd_witness(args) -> int:
    from fockdyn import classical as cl
    from fockdyn.dynamics import non_mixing_witness_chacon, non_wm_witness
    from fockdyn.onebody import DeformationGroup, build_onebody
    from fockdyn.scenarios import preset

    name = args.scenario
    if name == "rotation":
        space = build_onebody(cl.rotation_koopman("golden"), DeformationGroup.trivial())
        f = space.basis(cl.Fourier(1))
        ks, bound, info = non_wm_witness(space, f, 0.05, 10_000, [100, 1000, 10_000])
        obj = {
            "scenario": name,
            "kind": "phase_aligned",
            "first_indices": ks.indices[:20],
            "count": len(ks),
            "lower_bound": bound,
            **{k: v for k, v in info.items()},
        }
    elif name == "chacon":
        ks, vals = non_mixing_witness_chacon(4, 1, 0)
        obj = {"scenario": name, "kind": "tower_heights", "heights": ks.indices, "overlaps": [str(v) for v in vals]}
    elif name == "catmap":
        sysm = cl.catmap_koopman([[2, 1], [1, 1]])
        pairs = [(cl.Torus(1, 0), cl.Torus(1, -1)), (cl.Torus(1, 0), cl.Torus(2, -3)), (cl.Torus(1, 0), cl.Torus(0, 1)), (cl.Torus(1, 1), cl.Torus(1, 0)), (cl.Torus(2, -1), cl.Torus(1, 2))]
        obj = {
            "scenario": name,
            "kind": "escape_bounds",
            "bounds": {f"{cl.mode_label(v)}->{cl.mode_label(w)}": sysm.escape_bound(v, w) for v, w in pairs},
        }
    else:
        preset(name)  # raises ConfigError on unknown names
        raise ConfigError(f"no witness construction for scenario {name!r}")
    _emit(obj, args.format or "json", args.out, f"{name}_witness")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fockdyn", description="Second-quantized dynamics diagnostics on truncated q-Fock spaces.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--seed", type=int)
    common.add_argument("--tolerance", action="append", metavar="KEY=VAL")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="run a scenario config")
    r.add_argument("config")
    r.add_argument("--no-plots", action="store_true")
    r.set_defaults(func=cmd_run)

    pr = sub.add_parser("preset", parents=[common], help="run a built-in scenario")
    pr.add_argument("name", choices=["rotation", "catmap", "qshift", "shift", "chacon"])
    pr.add_argument("--no-plots", action="store_true")
    pr.add_argument("--write-config", metavar="PATH", help="write the preset as a config file and exit")
    pr.set_defaults(func=cmd_preset)

    c = sub.add_parser("check-qiso", parents=[common], help="residuals of the q-Fock isomorphism pipeline")
    c.add_argument("--q", type=float, required=True)
    c.add_argument("--letters", type=int, default=2)
    c.add_argument("--cutoff", type=int, default=5)
    c.set_defaults(func=cmd_check_qiso)

    g = sub.add_parser("gram", parents=[common], help="q-Gram matrix of degree-n words")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--q", required=True, help="rational like 1/3 or a decimal")
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--exact", action="store_true")
    g.set_defaults(func=cmd_gram)

    w = sub.add_parser("witness", parents=[common], help="print a non-weak-mixing / non-mixing witness")
    w.add_argument("--scenario", required=True)
    w.set_defaults(func=cmd_witness)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"error: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, SliceError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
