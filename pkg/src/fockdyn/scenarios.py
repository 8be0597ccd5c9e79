"""End-to-end scenarios: config -> classical system -> one-body space -> diagnostics -> artifacts."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from fractions import Fraction
from pathlib import Path

import numpy as np

from fockdyn import classical as cl
from fockdyn.config import (
    DEFAULT_TOLERANCES,
    ScenarioConfig,
    StateSpec,
    WitnessSpec,
    parse_vector_terms,
    parse_witness,
    parse_words,
)
from fockdyn.dynamics import (
    DiagnosticReport,
    VectorState,
    WickPolynomial,
    alpha_residual,
    diagnostic_run,
    invariant_observable,
    non_wm_witness,
)
from fockdyn.errors import BudgetExceeded, ConfigError
from fockdyn.onebody import DeformationGroup, DeformedVector, OneBodySpace, _as_number, rotation_pair
from fockdyn.qiso import Q_ISO_BOUND, build_iso, random_unitary, residual_report

EXIT_OK, EXIT_GATE, EXIT_CONFIG = 0, 1, 2


# ---------------------------------------------------------------------------
# factor types


def factor_type(group: DeformationGroup) -> dict:
    """Type of the von Neumann algebra expected for the deformation group (looked up, not computed)."""
    if group.kind == "trivial":
        label, note = "II_1", ""
    elif group.kind == "powers":
        label, note = f"III_{group.lam}", f"truncated to exponents |n| <= {group.max_exponent}"
    elif group.kind == "rationals":
        label, note = "III_1", f"positive rationals truncated to {len(group.values)} elements"
    else:
        raise ConfigError(f"no factor type recorded for group kind {group.kind!r}")
    return {
        "group": group.kind,
        "type": label,
        "note": note,
        "creation_algebra_note": "the algebra generated by creators and annihilators is a type I_infinity factor",
        "status": "expected from the known classification, not computed",
    }


# ---------------------------------------------------------------------------
# building blocks from config


def build_classical(params: dict) -> cl.KoopmanSystem:
    kind = params.get("kind")
    try:
        if kind == "rotation":
            return cl.rotation_koopman(params.get("theta", "golden"))
        if kind == "catmap":
            vals = [int(x) for x in params.get("matrix", "2 1 1 1").replace(",", " ").split()]
            if len(vals) != 4:
                raise ConfigError("cat map matrix needs four integers")
            return cl.catmap_koopman([vals[:2], vals[2:]])
        if kind == "shift":
            return cl.shift_koopman(int(params.get("alphabet", 2)))
        if kind == "chacon":
            return cl.chacon_koopman(int(params.get("stage", 6)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown scenario kind {kind!r}")


def build_group(params: dict) -> DeformationGroup:
    kind = params.get("kind", "trivial")
    try:
        if kind == "trivial":
            return DeformationGroup.trivial()
        if kind == "powers":
            return DeformationGroup.powers(Fraction(params.get("lambda", "1/2")), int(params.get("max_exponent", 1)))
        if kind == "rationals":
            if "values" in params:
                return DeformationGroup.rationals([Fraction(v) for v in params["values"].split(",")])
            primes = [int(p) for p in params.get("primes", "2, 3").split(",")]
            return DeformationGroup.rationals_generated(primes, int(params.get("max_exponent", 1)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown group kind {kind!r}")


def build_vector(text: str) -> DeformedVector:
    coeffs = {}
    for coef, mode, lam, sign in parse_vector_terms(text):
        key = (mode, _as_number(lam), sign)
        coeffs[key] = coeffs.get(key, 0) + coef
    return DeformedVector(coeffs)


def build_witness(expr: str) -> WickPolynomial:
    P = WickPolynomial.scalar(1)
    for op, vec in parse_witness(expr):
        v = build_vector(vec)
        P = P * {"a+": WickPolynomial.creator, "a": WickPolynomial.annihilator, "s": WickPolynomial.field}[op](v)
    return P


def build_states(space, specs, q: float) -> list:
    states = [("vacuum", VectorState.vacuum(space, q))]
    for s in specs:
        letters = [build_vector(v) for v in s.letters]
        states.append((s.name, VectorState.from_words(space, letters, s.cutoff, q, parse_words(s.words), s.name)))
    return states


def build_space(cfg: ScenarioConfig) -> OneBodySpace:
    space = OneBodySpace(build_classical(cfg.classical), build_group(cfg.group))
    for w in cfg.witnesses:
        for v in build_witness(w.expr).vectors():
            space.check_vector(v)
    return space


# ---------------------------------------------------------------------------
# presets


def preset(name: str) -> ScenarioConfig:
    if name == "rotation":
        return ScenarioConfig(
            name="rotation",
            classical={"kind": "rotation", "theta": "golden"},
            group={"kind": "trivial"},
            q=0.0,
            schedule=[100, 1000, 10000],
            witnesses=[
                WitnessSpec("null", "a+(F(1)) a(F(2))"),
                WitnessSpec("number", "a+(F(1)) a(F(1))"),
                WitnessSpec("fields", "s(F(1)) s(F(2))"),
            ],
            states=[StateSpec("xi", ["F(1)", "F(2)"], 2, "():1 | 0:0.6 | 1:0.6")],
            gates=["ue_decay", "uwm_bounded_away", "fixed_point"],
        )
    if name == "catmap":
        return ScenarioConfig(
            name="catmap",
            classical={"kind": "catmap", "matrix": "2 1 1 1"},
            group={"kind": "powers", "lambda": "1/2", "max_exponent": "1"},
            q=0.2,
            schedule=[10, 100, 1000],
            witnesses=[
                WitnessSpec("fields", "s(T(1,0)@1/2+) s(T(0,1)@1/2+)"),
                WitnessSpec("hopping", "a+(T(1,0)@2-) a(T(1,1)@2-)"),
            ],
            states=[StateSpec("xi", ["T(1,0)@1/2+", "T(0,1)@1/2+", "T(1,1)@2-"], 2, "():1 | 0:0.5 | 1:0.5 | 2:0.5 | 0 1:0.3")],
            gates=["um_decay"],
            qiso={"enabled": "auto", "letters": "2", "cutoff": "4"},
        )
    if name in ("qshift", "shift"):
        q = 0.9 if name == "qshift" else 0.0
        return ScenarioConfig(
            name=name,
            classical={"kind": "shift", "alphabet": "2"},
            group={"kind": "trivial"},
            q=q,
            schedule=[10, 100, 1000],
            witnesses=[
                WitnessSpec("fields", "s(S(0,1)) s(S(1,1))"),
                WitnessSpec("number", "a+(S(0,1)) a(S(0,1))"),
            ],
            states=[StateSpec("xi", ["S(0,1)", "S(1,1)"], 2, "():1 | 0:0.5 | 0 1:0.5")],
            gates=["um_decay"],
        )
    if name == "chacon":
        return ScenarioConfig(
            name="chacon",
            classical={"kind": "chacon", "stage": "5", "set": "1,0"},
            group={"kind": "trivial"},
            q=0.0,
            schedule=[250, 1000, 4000],
            witnesses=[WitnessSpec("number", "a+(I(1,0)) a(I(1,0))")],
            states=[StateSpec("xi", ["I(1,0)"], 2, "():1 | 0:1")],
            gates=["chacon_cesaro_decreasing", "chacon_tower_correlation"],
        )
    raise ConfigError(f"unknown preset {name!r}")


PRESETS = ("rotation", "catmap", "qshift", "shift", "chacon")


# ---------------------------------------------------------------------------
# scenario extras


def chacon_extras(system: cl.ChaconSystem, cfg: ScenarioConfig, n_samples: int = 100_000) -> dict:
    stage, level = (int(x) for x in cfg.classical.get("set", "1,0").split(","))
    A = cl.level_vector([(stage, level)])
    mu = cl.level_width(stage)
    Nmax = max(cfg.schedule)
    corr = np.abs(system.correlation_sweep(range(1, Nmax + 1), A, A))
    cs = np.cumsum(corr)
    cesaro = [float(cs[N - 1] / N) for N in cfg.schedule]
    towers = []
    for n in range(1, 5):
        h = cl.tower_height(n)
        raw = cl.chacon_raw_overlap(h, A, A)
        sampled = cl.chacon_sampled_overlap(h, [(stage, level)], [(stage, level)], n_points=n_samples)
        towers.append(
            {
                "stage": n,
                "height": h,
                "overlap": str(raw),
                "overlap_float": float(raw),
                "centered": float(raw - mu * mu),
                "sampled": sampled,
            }
        )
    return {"set": [stage, level], "measure": str(mu), "cesaro_abs_correlation": cesaro, "tower": towers}


def rotation_extras(space: OneBodySpace, cfg: ScenarioConfig) -> dict:
    m = int(cfg.classical.get("witness_mode", 1))
    f = space.basis(cl.Fourier(m))
    eps = float(cfg.classical.get("eps", 0.05))
    ks, bound, info = non_wm_witness(space, f, eps, max(cfg.schedule), cfg.schedule)
    x, y, theta = rotation_pair(space, m)
    W, _ = invariant_observable(space, x, y, cfg.q, 4)
    return {
        "phase_aligned": {
            "mode": m,
            "eps": eps,
            "count": len(ks),
            "density": info["density"],
            "lower_bound": bound,
            "prefix_norms": info["prefix_norms"],
            "f_norm": space.norm(f),
        },
        "fixed_point_residual": alpha_residual(W),
    }


def catmap_extras(space: OneBodySpace, witnesses) -> dict:
    system = space.classical
    modes = sorted({k[0] for _, P in witnesses for v in P.vectors() for k in v.keys()}, key=cl.mode_key)
    bounds = {}
    for v in modes:
        for w in modes:
            bounds[f"{cl.mode_label(v)}->{cl.mode_label(w)}"] = system.escape_bound(v, w)
    heights = [cl.tower_height(n) for n in range(1, 5)]
    contrast = {}
    if modes:
        v = cl.SparseModeVector({modes[0]: 1})
        contrast = {str(h): str(system.correlation(h, v, v)) for h in heights}
    return {"escape_bounds": bounds, "tower_height_correlations": contrast}


def qiso_extras(cfg: ScenarioConfig) -> dict:
    enabled = str(cfg.qiso.get("enabled", "auto")).lower()
    if enabled in ("false", "no", "off", "0"):
        return {"skipped": "disabled in config"}
    if not abs(cfg.q) < Q_ISO_BOUND:
        return {"skipped": f"|q| = {abs(cfg.q)} is not below sqrt(2) - 1 = {Q_ISO_BOUND:.6f}; isomorphism checks not applicable"}
    d = int(cfg.qiso.get("letters", 2))
    D = int(cfg.qiso.get("cutoff", 4))
    rng = np.random.default_rng(cfg.seed)
    rows = residual_report(build_iso(cfg.q, d, D), random_unitary(d, rng))
    return {"residuals": rows}


# ---------------------------------------------------------------------------
# gates


def evaluate_gates(cfg: ScenarioConfig, report: DiagnosticReport, extras: dict) -> list:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(cfg.tolerances)
    gates = list(cfg.gates)
    if "residuals" in extras.get("qiso", {}) and "qiso" not in gates:
        gates.append("qiso")
    out = []

    def last(stat):
        keys = {(r["witness_id"], r["state_id"]) for r in report.rows if r["statistic"] == stat}
        return [report.series(stat, w, s)[-1] for w, s in sorted(keys)]

    for g in gates:
        if g == "ue_decay":
            vals = last("UE")
            value = max(vals) if vals else float("nan")
            out.append(_gate(g, bool(vals) and value <= tol["decay"], value, tol["decay"], "<="))
        elif g == "um_decay":
            vals = last("UM")
            value = max(vals) if vals else float("nan")
            out.append(_gate(g, bool(vals) and value <= tol["decay"], value, tol["decay"], "<="))
        elif g == "uwm_bounded_away":
            pa = extras["rotation"]["phase_aligned"]
            value = min(pa["prefix_norms"])
            thr = 0.9 * pa["f_norm"]
            out.append(_gate(g, value >= thr, value, thr, ">="))
        elif g == "fixed_point":
            value = extras["rotation"]["fixed_point_residual"]
            out.append(_gate(g, value <= tol["identity"], value, tol["identity"], "<="))
        elif g == "chacon_cesaro_decreasing":
            c = extras["chacon"]["cesaro_abs_correlation"]
            ok = all(b < a for a, b in zip(c, c[1:]))
            out.append(_gate(g, ok, c[-1], None, "strictly decreasing"))
        elif g == "chacon_tower_correlation":
            t = extras["chacon"]["tower"]
            value = min(min(r["overlap_float"], r["centered"]) for r in t)
            agree = max(abs(r["overlap_float"] - r["sampled"]) for r in t)
            out.append(_gate(g, value > tol["tower"] and agree <= 1e-3, value, tol["tower"], ">"))
        elif g == "qiso":
            rows = extras["qiso"]["residuals"]
            value = max(r["value"] for r in rows if r["residual_name"] != "r_fixedpoint_literal")
            out.append(_gate(g, value <= tol["qiso"], value, tol["qiso"], "<="))
        else:
            raise ConfigError(f"unknown gate {g!r}")
    return out


def _gate(name, passed, value, threshold, relation):
    return {"name": name, "passed": bool(passed), "value": _clean(value), "threshold": threshold, "relation": relation}


def _clean(x):
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if math.isnan(x) else x
    return x


# ---------------------------------------------------------------------------
# artifacts


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def emit_plotdata(report: DiagnosticReport, path, scenario: str) -> list:
    """One ``N,value`` CSV per (statistic, witness): the maximum over states."""
    if not report.schedule:
        raise ValueError("empty schedule")
    if not report.rows:
        raise ValueError("report has no rows")
    path = Path(path)
    groups = {}
    for r in report.rows:
        groups.setdefault((r["statistic"], r["witness_id"]), {}).setdefault(r["N"], []).append(r["value"])
    path.mkdir(parents=True, exist_ok=True)
    files = []
    for (stat, wid), byN in sorted(groups.items()):
        fn = path / f"{scenario}_{stat}_{wid}.csv"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "value"])
        for N in sorted(byN):
            w.writerow([N, repr(max(byN[N]))])
        fn.write_text(buf.getvalue(), encoding="utf-8")
        files.append(str(fn))
    return files


def run_scenario(cfg: ScenarioConfig, out_dir=None, formats=None, plots=None) -> tuple:
    """Run a scenario and write its artifacts; returns ``(exit code, summary dict)``."""
    cfg.validate()
    out = Path(out_dir or cfg.out)
    formats = formats or cfg.formats
    plots = cfg.plots if plots is None else plots
    space = build_space(cfg)
    witnesses = [(w.name, build_witness(w.expr)) for w in cfg.witnesses]
    states = build_states(space, cfg.states, cfg.q)
    D = cfg.cutoff or None
    report = diagnostic_run(
        space, witnesses, states, cfg.schedule, q=cfg.q, D=D, decay_tol=cfg.tolerances.get("decay", 1e-2)
    )
    report.metadata.update({"scenario": cfg.name, "space": space.to_dict(), "seed": cfg.seed})
    kind = cfg.classical["kind"]
    extras = {}
    if kind == "rotation":
        extras["rotation"] = rotation_extras(space, cfg)
    elif kind == "chacon":
        extras["chacon"] = chacon_extras(space.classical, cfg)
        report.notes.append("the Chacon map stands in for a weakly mixing, non-mixing system")
    elif kind == "catmap":
        extras["catmap"] = catmap_extras(space, witnesses)
    extras["qiso"] = qiso_extras(cfg)
    gates = evaluate_gates(cfg, report, extras)
    summary = {
        "schema_version": report.to_dict()["schema_version"],
        "scenario": cfg.name,
        "config": cfg.to_dict(),
        "report": report.to_dict(),
        "extras": extras,
        "factor_type": factor_type(space.group),
        "gates": gates,
        "passed": all(g["passed"] for g in gates),
    }
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if "json" in formats:
        fn = out / f"{cfg.name}_report.json"
        fn.write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
        files.append(str(fn))
    if "csv" in formats:
        fn = out / f"{cfg.name}_report.csv"
        fn.write_text(report.to_csv(), encoding="utf-8")
        files.append(str(fn))
        if kind == "chacon":
            fn = out / f"{cfg.name}_stage.csv"
            fn.write_text(cl.chacon_stage(min(space.classical.stage, 8)).to_csv(), encoding="utf-8")
            files.append(str(fn))
    files += emit_plotdata(report, out / "plotdata", cfg.name)
    if plots:
        from fockdyn.plotting import plot_report

        files += plot_report(report, out / "plots", cfg.name)
    summary["files"] = files
    return (EXIT_OK if summary["passed"] else EXIT_GATE), summary
