from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertrack.cli import Scenario, main, parse_scenario, parse_scenarios, print_scenario, validate
from hypertrack.errors import ParseError, ValidationError

MINIMAL = """
[shock]
system = burgers
u_left = [1.0]
u_right = [0.0]
epsilon = 0.1
"""


def test_minimal_scenario_gets_defaults() -> None:
    sc = parse_scenario(MINIMAL)
    assert sc.name == "shock" and sc.system == "burgers"
    assert sc.epsilon == [0.1] and sc.delta is None and sc.t_end == 1.0
    assert sc.initial == "riemann" and sc.check == "off"
    assert sc.outputs == ["fronts", "snapshots", "ledger", "functionals"]


def test_comments_bare_words_and_several_sections() -> None:
    text = """
    # two runs
    [a]
    system = p_system   # bare word
    initial = random
    outputs = [fronts, ledger]
    [b]
    system = "cubic"
    """
    a, b = parse_scenarios(text)
    assert (a.name, a.system, a.outputs) == ("a", "p_system", ["fronts", "ledger"])
    assert (b.name, b.system) == ("b", "cubic")


def test_delta_must_be_small() -> None:
    with pytest.raises(ValidationError) as info:
        parse_scenario(MINIMAL + "delta = 0.01\n")
    assert any("delta" in p for p in info.value.problems)


def test_epsilon_must_descend() -> None:
    with pytest.raises(ValidationError):
        validate(Scenario(epsilon=[0.1, 0.2]))


@pytest.mark.parametrize("bad", [dict(system="euler"), dict(t_end=0.0), dict(check="loud"),
                                 dict(outputs=["movies"]), dict(x_range=[1.0, 0.0]),
                                 dict(initial="breakpoints", xs=[0.0], states=[[1.0]])])
def test_validation_rejects(bad: dict) -> None:
    with pytest.raises(ValidationError):
        validate(Scenario(**bad))


def test_unknown_key_reports_position() -> None:
    with pytest.raises(ParseError) as info:
        parse_scenario("[x]\nsystem = burgers\n  colour = 3\n")
    assert (info.value.line, info.value.column) == (3, 3)


@pytest.mark.parametrize("text", ["[x]\nsystem burgers\n", "[x\nsystem = burgers\n", "[x]\nt_end = 1 +\n",
                                  "[x]\nt_end = 1\nt_end = 2\n", "# nothing\n", "[x]\njumps = 1.5\n"])
def test_parse_errors(text: str) -> None:
    with pytest.raises(ParseError):
        parse_scenario(text)


_words = st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True)
_floats = st.floats(-10.0, 10.0, allow_nan=False)


@st.composite
def scenarios(draw) -> Scenario:
    eps = sorted(draw(st.lists(st.floats(0.01, 1.0), min_size=1, max_size=3, unique=True)), reverse=True)
    n = draw(st.sampled_from([1, 2]))
    state = st.lists(_floats, min_size=n, max_size=n)
    xs = sorted(draw(st.lists(_floats, max_size=3)))
    a = draw(_floats)
    return Scenario(
        name=draw(_words), system=draw(st.sampled_from(["burgers", "cubic", "p_system", "shallow_water"])),
        params=draw(st.lists(_floats, max_size=2)), pressure=draw(st.sampled_from(["power", "cubic"])),
        initial=draw(st.sampled_from(["riemann", "breakpoints", "random", "sine"])),
        u_left=draw(state), u_right=draw(state), x0=draw(_floats), xs=xs,
        states=[draw(state) for _ in range(len(xs) + 1)], jumps=draw(st.integers(0, 50)),
        amplitude=draw(_floats), x_range=[a, a + draw(st.floats(0.1, 5.0))], epsilon=eps,
        delta=draw(st.none() | st.floats(1e-9, min(eps) ** 2 / 10.0)), t_end=draw(st.floats(0.01, 10.0)),
        outputs=draw(st.lists(st.sampled_from(["fronts", "snapshots", "ledger", "functionals", "generations"]),
                              min_size=1, max_size=5, unique=True)),
        seed=draw(st.integers(0, 2 ** 31)), check=draw(st.sampled_from(["off", "invariants", "full"])),
        snapshots=draw(st.integers(1, 20)), points=draw(st.integers(2, 1000)))


@settings(max_examples=60, deadline=None)
@given(sc=scenarios())
def test_print_parse_round_trip(sc: Scenario) -> None:
    sc = validate(sc)
    assert parse_scenario(print_scenario(sc)) == sc


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "s.scn"
    path.write_text(MINIMAL + "t_end = 2.0\n")
    return path


def test_run_writes_outputs(tmp_path, scenario_file, capsys) -> None:
    out = tmp_path / "out"
    assert main(["run", str(scenario_file), "--out", str(out)]) == 0
    target = out / "shock" / "eps_0.1"
    for name in ("fronts.csv", "ledger.csv", "functionals.csv", "snapshots.csv", "summary.json"):
        assert (target / name).exists()
    summary = json.loads((target / "summary.json").read_text())
    assert summary["interactions"] == 0 and summary["status"] == "completed"
    with open(target / "fronts.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1


def test_run_is_reproducible(tmp_path) -> None:
    path = tmp_path / "r.scn"
    path.write_text("[rnd]\nsystem = p_system\ninitial = random\njumps = 6\namplitude = 0.02\nseed = 4\n"
                    "epsilon = 0.1\nt_end = 0.5\n")
    for d in ("a", "b"):
        assert main(["run", str(path), "--out", str(tmp_path / d)]) == 0
    for name in ("fronts.csv", "ledger.csv", "functionals.csv", "snapshots.csv"):
        first = (tmp_path / "a" / "rnd" / "eps_0.1" / name).read_bytes()
        assert first == (tmp_path / "b" / "rnd" / "eps_0.1" / name).read_bytes()


def test_overrides_and_bad_override(tmp_path, scenario_file) -> None:
    out = tmp_path / "o"
    assert main(["run", str(scenario_file), "--out", str(out), "--epsilon", "0.2,0.05"]) == 0
    assert (out / "shock" / "eps_0.2").is_dir() and (out / "shock" / "eps_0.05").is_dir()
    assert main(["run", str(scenario_file), "--out", str(out), "--delta", "1.0"]) == 3


def test_exit_codes(tmp_path, capsys) -> None:
    assert main(["explode"]) == 2
    assert main(["run", str(tmp_path / "missing.scn")]) == 5
    bad = tmp_path / "bad.scn"
    bad.write_text("[x]\nwhat = 1\n")
    assert main(["run", str(bad)]) == 3
    assert "line 2" in capsys.readouterr().err


def test_riemann_and_wavecurve_commands(tmp_path) -> None:
    assert main(["riemann", "--system", "burgers", "--u-left", "1", "--u-right", "0", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "riemann_summary.json").read_text())
    assert summary and (tmp_path / "riemann_profile.csv").exists()
    assert main(["wavecurve", "--system", "cubic", "--u-left", "1", "--m-target", "-2", "--out", str(tmp_path)]) == 0
    with open(tmp_path / "wavecurve.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {r["piece_kind"] for r in rows} == {"shock", "rarefaction"}


def test_module_entry_point() -> None:
    proc = subprocess.run([sys.executable, "-m", "hypertrack", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "accept" in proc.stdout
