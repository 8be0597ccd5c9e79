"""Scenario configuration: INI files with dotted sections, plus the small vector/witness DSL.

Example::

    [scenario]
    name = rotation
    version = 1
    seed = 0

    [classical]
    kind = rotation
    theta = golden

    [group]
    kind = trivial

    [fock]
    q = 0
    cutoff = 4

    [diagnostics]
    schedule = 100, 1000, 10000

    [witness.null]
    expr = a+(F(1)) a(F(2))

    [state.xi]
    letters = F(1); F(2)
    cutoff = 2
    words = ():1 | 0:0.5 | 1 0:0.5

Vectors are sums of ``[coef*]MODE[@lambda(+|-)]`` with modes ``F(m)``,
``T(m,n)``, ``I(stage,level)``, ``S(position,symbol)``.  Words in ``words``
list letter indices separated by spaces; ``()`` is the vacuum.
"""

from __future__ import annotations

import configparser
import io
import re
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from fockdyn.classical import Fourier, Interval, ShiftCell, Torus
from fockdyn.errors import ConfigError

CONFIG_VERSION = 1

DEFAULT_TOLERANCES = {"identity": 1e-10, "qiso": 1e-6, "decay": 1e-2, "tower": 0.05}

KINDS = ("rotation", "catmap", "shift", "chacon")


# ---------------------------------------------------------------------------
# DSL


_MODE_RE = re.compile(r"^(F|T|I|S)\(([^()]*)\)$")


def parse_mode(text: str):
    m = _MODE_RE.match(text.strip())
    if not m:
        raise ConfigError(f"cannot parse mode {text!r}")
    tag, args = m.group(1), [int(a) for a in m.group(2).split(",") if a.strip()]
    try:
        if tag == "F":
            return Fourier(*args)
        if tag == "T":
            return Torus(*args)
        if tag == "I":
            return Interval(*args)
        return ShiftCell(*args)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad mode {text!r}: {exc}") from None


def parse_number(text: str):
    t = text.strip().replace(" ", "")
    if not t:
        raise ConfigError("empty number")
    try:
        if "j" in t:
            return complex(t.strip("()"))
        if "/" in t:
            return Fraction(t)
        if any(c in t for c in ".eE"):
            return float(t)
        return int(t)
    except ValueError:
        raise ConfigError(f"cannot parse number {text!r}") from None


def _split_top(text: str, sep: str) -> list:
    """Split on ``sep`` outside parentheses."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return [s for s in (p.strip() for p in out) if s]


def parse_vector_terms(text: str) -> list:
    """``[(coef, mode, lambda, sign), ...]`` from ``1*F(1)@1/2+ + 0.5*F(2)``."""
    terms = []
    for raw in _split_top(text, "+"):
        raw = raw.strip()
        lam, sign = Fraction(1), 1
        at = raw.rfind("@")
        if at > raw.rfind(")"):
            tag = raw[at + 1 :].strip()
            raw = raw[:at]
            if tag.endswith("-"):
                sign, tag = -1, tag[:-1]
            elif tag.endswith("+"):
                tag = tag[:-1]
            lam = parse_number(tag)
        star = raw.rfind("*")
        coef = parse_number(raw[:star]) if star >= 0 else 1
        body = raw[star + 1 :].strip()
        if body.startswith("-"):
            coef, body = -coef, body[1:]
        mode = parse_mode(body)
        terms.append((coef, mode, lam, sign))
    if not terms:
        raise ConfigError(f"empty vector {text!r}")
    return terms


_OP_RE = re.compile(r"(a\+|a|s)\(")


def parse_witness(text: str) -> list:
    """``[(op, vector text), ...]`` with op in ``a+``, ``a``, ``s``."""
    ops, i, t = [], 0, text.strip()
    while i < len(t):
        if t[i].isspace():
            i += 1
            continue
        m = _OP_RE.match(t, i)
        if not m:
            raise ConfigError(f"cannot parse witness {text!r} at {t[i:]!r}")
        depth, j = 1, m.end()
        while j < len(t) and depth:
            depth += {"(": 1, ")": -1}.get(t[j], 0)
            j += 1
        if depth:
            raise ConfigError(f"unbalanced parentheses in {text!r}")
        ops.append((m.group(1), t[m.end() : j - 1]))
        i = j
    if not ops:
        raise ConfigError("empty witness")
    return ops


def parse_words(text: str) -> dict:
    out = {}
    for part in _split_top(text, "|"):
        if ":" not in part:
            raise ConfigError(f"state word needs 'word:coef', got {part!r}")
        w, c = part.rsplit(":", 1)
        w = w.strip()
        word = () if w in ("()", "") else tuple(int(x) for x in w.split())
        out[word] = parse_number(c)
    return out


# ---------------------------------------------------------------------------
# config


@dataclass
class StateSpec:
    name: str
    letters: list
    cutoff: int = 2
    words: str = "():1"


@dataclass
class WitnessSpec:
    name: str
    expr: str


@dataclass
class ScenarioConfig:
    name: str
    classical: dict
    group: dict = field(default_factory=lambda: {"kind": "trivial"})
    q: float = 0.0
    cutoff: int = 0
    schedule: list = field(default_factory=lambda: [100, 1000])
    witnesses: list = field(default_factory=list)
    states: list = field(default_factory=list)
    seed: int = 0
    formats: list = field(default_factory=lambda: ["json", "csv"])
    plots: bool = True
    out: str = "out"
    gates: list = field(default_factory=list)
    qiso: dict = field(default_factory=lambda: {"enabled": "auto", "letters": 2, "cutoff": 4})
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    version: int = CONFIG_VERSION

    def __post_init__(self):
        # INI values are strings; normalizing here makes parse(serialize(c)) == c
        self.classical = {k: str(v) for k, v in self.classical.items()}
        self.group = {k: str(v) for k, v in self.group.items()}
        self.qiso = {k: str(v) for k, v in self.qiso.items()}
        self.tolerances = {k: float(v) for k, v in self.tolerances.items()}
        self.schedule = [int(N) for N in self.schedule]

    def validate(self):
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        if self.classical.get("kind") not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.classical.get('kind')!r}")
        if not -1 < self.q < 1:
            raise ConfigError("|q| must be < 1")
        if not self.schedule:
            raise ConfigError("schedule must not be empty")
        if any(b <= a for a, b in zip(self.schedule, self.schedule[1:])) or self.schedule[0] < 1:
            raise ConfigError("schedule must be strictly increasing positive integers")
        for f in self.formats:
            if f not in ("json", "csv"):
                raise ConfigError(f"unknown output format {f!r}")
        names = [w.name for w in self.witnesses] + [s.name for s in self.states]
        if len(set(names)) != len(names):
            raise ConfigError("witness and state names must be unique")
        for w in self.witnesses:
            for _, vec in parse_witness(w.expr):
                parse_vector_terms(vec)
        for s in self.states:
            for v in s.letters:
                parse_vector_terms(v)
            parse_words(s.words)
        return self

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["scenario"] = {"name": self.name, "version": str(self.version), "seed": str(self.seed)}
        cp["classical"] = {k: str(v) for k, v in self.classical.items()}
        cp["group"] = {k: str(v) for k, v in self.group.items()}
        cp["fock"] = {"q": repr(self.q), "cutoff": str(self.cutoff)}
        cp["diagnostics"] = {"schedule": ", ".join(map(str, self.schedule)), "gates": ", ".join(self.gates)}
        for w in self.witnesses:
            cp[f"witness.{w.name}"] = {"expr": w.expr}
        for s in self.states:
            cp[f"state.{s.name}"] = {"letters": "; ".join(s.letters), "cutoff": str(s.cutoff), "words": s.words}
        cp["qiso"] = {k: str(v) for k, v in self.qiso.items()}
        cp["tolerances"] = {k: repr(float(v)) for k, v in sorted(self.tolerances.items())}
        cp["output"] = {"dir": self.out, "formats": ", ".join(self.formats), "plots": str(self.plots).lower()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return asdict(self)


def _get(cp, sec, key, default=None):
    if cp.has_section(sec) and cp.has_option(sec, key):
        return cp.get(sec, key).strip()
    return default


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in re.split(r"[,\s]+", text.strip()) if x]
    except ValueError:
        raise ConfigError(f"expected a list of integers, got {text!r}") from None


def parse_config(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if not cp.has_section("scenario") or not cp.has_section("classical"):
        raise ConfigError("config needs [scenario] and [classical] sections")
    try:
        tol = dict(DEFAULT_TOLERANCES)
        if cp.has_section("tolerances"):
            tol.update({k: float(v) for k, v in cp.items("tolerances")})
        cfg = ScenarioConfig(
            name=_get(cp, "scenario", "name", "scenario"),
            version=int(_get(cp, "scenario", "version", str(CONFIG_VERSION))),
            seed=int(_get(cp, "scenario", "seed", "0")),
            classical=dict(cp.items("classical")),
            group=dict(cp.items("group")) if cp.has_section("group") else {"kind": "trivial"},
            q=float(Fraction(_get(cp, "fock", "q", "0"))),
            cutoff=int(_get(cp, "fock", "cutoff", "0")),
            schedule=_int_list(_get(cp, "diagnostics", "schedule", "100, 1000")),
            gates=[g.strip() for g in _get(cp, "diagnostics", "gates", "").split(",") if g.strip()],
            witnesses=[
                WitnessSpec(sec.split(".", 1)[1], cp.get(sec, "expr").strip())
                for sec in cp.sections()
                if sec.startswith("witness.")
            ],
            states=[
                StateSpec(
                    sec.split(".", 1)[1],
                    [v.strip() for v in cp.get(sec, "letters").split(";") if v.strip()],
                    int(_get(cp, sec, "cutoff", "2")),
                    _get(cp, sec, "words", "():1"),
                )
                for sec in cp.sections()
                if sec.startswith("state.")
            ],
            qiso=dict(cp.items("qiso")) if cp.has_section("qiso") else {"enabled": "auto", "letters": 2, "cutoff": 4},
            tolerances=tol,
            out=_get(cp, "output", "dir", "out"),
            formats=[f.strip() for f in _get(cp, "output", "formats", "json, csv").split(",") if f.strip()],
            plots=_get(cp, "output", "plots", "true").lower() in ("1", "true", "yes", "on"),
        )
    except (ValueError, KeyError, configparser.Error) as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return cfg.validate()


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
