from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockdyn.classical import Fourier, Interval, ShiftCell, Torus
from fockdyn.config import (
    ScenarioConfig,
    StateSpec,
    WitnessSpec,
    load_config,
    parse_config,
    parse_mode,
    parse_number,
    parse_vector_terms,
    parse_witness,
    parse_words,
)
from fockdyn.errors import ConfigError
from fockdyn.scenarios import PRESETS, preset


def test_parse_modes_and_numbers():
    assert parse_mode("F(-3)") == Fourier(-3)
    assert parse_mode(" T(1, 2) ") == Torus(1, 2)
    assert parse_mode("I(1,0)") == Interval(1, 0)
    assert parse_mode("S(0,1)") == ShiftCell(0, 1)
    for bad in ("X(1)", "F(0)", "F(1", "T(1)"):
        with pytest.raises(ConfigError):
            parse_mode(bad)
    assert parse_number("1/3") == Fraction(1, 3)
    assert parse_number("-0.5j") == -0.5j
    assert parse_number("(1+2j)") == 1 + 2j
    assert parse_number("7") == 7
    with pytest.raises(ConfigError):
        parse_number("abc")


def test_parse_vector_terms():
    terms = parse_vector_terms("0.5*F(1) + -0.5j*F(-1)@1/2- + -T(1,0) + (1+2j)*I(1,0)@2")
    assert terms == [
        (0.5, Fourier(1), 1, 1),
        (-0.5j, Fourier(-1), Fraction(1, 2), -1),
        (-1, Torus(1, 0), 1, 1),
        (1 + 2j, Interval(1, 0), 2, 1),
    ]
    with pytest.raises(ConfigError):
        parse_vector_terms("")


def test_parse_witness_and_words():
    assert parse_witness("a+(F(1)) a(F(2)@1/2+) s(F(1) + F(2))") == [
        ("a+", "F(1)"),
        ("a", "F(2)@1/2+"),
        ("s", "F(1) + F(2)"),
    ]
    with pytest.raises(ConfigError):
        parse_witness("b(F(1))")
    with pytest.raises(ConfigError):
        parse_witness("a(F(1)")
    assert parse_words("():1 | 0:0.5 | 1 0:0.3j") == {(): 1, (0,): 0.5, (1, 0): 0.3j}


MINIMAL = """
[scenario]
name = mini

[classical]
kind = shift
alphabet = 2

[diagnostics]
schedule = 5, 50

[witness.w]
expr = s(S(0,1)) s(S(1,1))
"""


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(MINIMAL)
    assert cfg.q == 0.0 and cfg.group == {"kind": "trivial"}
    assert cfg.tolerances["identity"] == 1e-10 and cfg.tolerances["decay"] == 1e-2
    p = tmp_path / "mini.ini"
    p.write_text(MINIMAL)
    assert load_config(p) == cfg


@pytest.mark.parametrize(
    "patch,match",
    [
        (("schedule = 5, 50", "schedule = 50, 5"), "increasing"),
        (("schedule = 5, 50", "schedule ="), "schedule"),
        (("kind = shift", "kind = baker"), "kind"),
        (("[diagnostics]", "[fock]\nq = 1.5\n[diagnostics]"), "q"),
        (("expr = s(S(0,1)) s(S(1,1))", "expr = s(S(0,1)"), "parenthes"),
        (("name = mini", "name = mini\nversion = 7"), "version"),
    ],
)
def test_config_errors(patch, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(MINIMAL.replace(*patch))


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.ini")


@pytest.mark.parametrize("name", PRESETS)
def test_preset_round_trip(name):
    cfg = preset(name)
    assert parse_config(cfg.to_ini()) == cfg


@given(
    st.lists(st.integers(1, 10**5), min_size=1, max_size=5, unique=True).map(sorted),
    st.sampled_from([0.0, 0.2, -0.5, 0.9]),
    st.integers(0, 2**31),
    st.floats(1e-14, 1.0),
)
@settings(max_examples=40)
def test_round_trip_property(schedule, q, seed, tol):
    cfg = ScenarioConfig(
        name="rt",
        classical={"kind": "rotation", "theta": "1/7"},
        group={"kind": "powers", "lambda": "1/3", "max_exponent": 2},
        q=q,
        schedule=schedule,
        seed=seed,
        witnesses=[WitnessSpec("w", "a+(F(1)) a(F(2)@3-)")],
        states=[StateSpec("xi", ["F(1)", "F(2)@3-"], 2, "():1 | 1 0:0.5")],
        tolerances={"identity": tol, "qiso": 1e-6, "decay": 1e-2, "tower": 0.05},
    )
    again = parse_config(cfg.to_ini())
    assert again == cfg
    assert again.to_ini() == cfg.to_ini()
