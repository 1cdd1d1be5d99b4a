"""Config parsing: defaults, overrides, line-numbered failures, bed sources."""

from __future__ import annotations

import math

import pytest

from vitalwatch.config import BedSource, ConfigError, Settings, load_settings, parse_settings
from vitalwatch.engine import VerdictKind


def test_empty_text_gives_documented_defaults():
    s = parse_settings("")
    assert s.password == "PW123"
    assert s.nu1 == 0.07 and s.nu2 == 0.16
    assert s.ell == 20 and s.sigma == 1.0 and s.lam == 0.98
    assert s.prune_period == 100 and s.usage_floor == 1e-4 and s.max_size == 50
    assert s.warmup == 50 and s.train_steps == 50 and s.warn_threshold == 5
    assert s.poll_interval == 12.0 and math.isinf(s.speedup)
    assert s.window_w == 5 and s.counted_kinds == ("red1", "red2")
    assert s.grid == ((0.03, 0.08), (0.07, 0.16), (0.11, 0.24))
    assert s.schema_names == ("hr", "spo2", "nbp_sys", "nbp_dia")
    assert s.beds == []


def test_comments_blanks_and_overrides():
    s = parse_settings(
        """
        # detector
        nu1 = 0.03
        nu2 = 0.08


        lambda = 0.9
        ell = 10
        password = WARD7
        """
    )
    assert s.nu1 == 0.03 and s.nu2 == 0.08
    assert s.lam == 0.9 and s.ell == 10
    assert s.password == "WARD7"
    cfg = s.threshold_config()
    assert cfg.nu1 == 0.03 and cfg.lam == 0.9


def test_schema_keys_round_trip():
    s = parse_settings(
        "schema.names = hr, spo2, rr, temp, etco2\n"
        "schema.use = 0, 1, 4\n"
        "schema.zero_ok = 2\n"
    )
    schema = s.schema()
    assert schema.names == ("hr", "spo2", "rr", "temp", "etco2")
    assert schema.dim == 3
    assert schema.zero_ok == frozenset({2})


def test_grid_and_sweeps():
    s = parse_settings(
        "grid = 0.03:0.08, 0.07:0.16\n"
        "grid_sigma = 1.0, 2.5\n"
        "grid_ell = 10, 20\n"
    )
    configs = s.tuning_grid()
    assert len(configs) == 2 * 2 * 2
    assert {(c.nu1, c.nu2) for c in configs} == {(0.03, 0.08), (0.07, 0.16)}
    assert {c.sigma for c in configs} == {1.0, 2.5}
    assert {c.ell for c in configs} == {10, 20}


def test_counted_kinds_parse_to_policy():
    s = parse_settings("counted_kinds = red1, red2, orange\nwindow_w = 3\n")
    policy = s.match_policy()
    assert policy.window_w == 3
    assert policy.counted_kinds == frozenset(
        {VerdictKind.RED1, VerdictKind.RED2, VerdictKind.ORANGE}
    )


def test_bed_sources():
    s = parse_settings(
        "bed.bed1.source = replay:data/run1.csv\n"
        "bed.bed2.source = socket:0.0.0.0:9650\n"
        "bed.icu3.source = synthetic:42\n"
    )
    assert s.beds == [
        BedSource("bed1", "replay", "data/run1.csv"),
        BedSource("bed2", "socket", "0.0.0.0:9650"),
        BedSource("icu3", "synthetic", "42"),
    ]


@pytest.mark.parametrize(
    "text,fragment,line",
    [
        ("nu1 == 0.03\n", "expected a number", 1),
        ("bogus_key = 1\n", "unknown setting", 1),
        ("nu1 = 0.07\nell = 2.5\n", "expected an integer", 2),
        ("\n\nno_equals_here\n", "key = value", 3),
        ("grid = 0.03-0.08\n", "nu1:nu2", 1),
        ("bed.b1.speed = 2\n", "unknown bed key", 1),
        ("bed.b1.source = ftp:host\n", "source kind", 1),
        ("bed.b1.source = replay:\n", "target", 1),
        ("bed.b1.source = replay:a\nbed.b1.source = replay:b\n", "twice", 2),
        ("password = a,b\n", "comma-free", 1),
        ("counted_kinds = red1, purple\n", "unknown alarm kind", None),
        ("nu1 = 0.5\nnu2 = 0.2\n", "nu1 < nu2", None),
        ("speedup = 0\n", "speedup", None),
        ("warmup = 0\n", "warmup", None),
    ],
)
def test_errors_carry_line_numbers(text, fragment, line):
    with pytest.raises(ConfigError) as excinfo:
        parse_settings(text)
    assert fragment in str(excinfo.value)
    if line is not None:
        assert f"line {line}:" in str(excinfo.value)


def test_six_beds_rejected():
    text = "".join(f"bed.b{i}.source = synthetic:{i}\n" for i in range(6))
    with pytest.raises(ConfigError, match="at most 5"):
        parse_settings(text)


def test_load_settings_from_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("nu1 = 0.05\nnu2 = 0.12\n", encoding="utf-8")
    s = load_settings(path)
    assert (s.nu1, s.nu2) == (0.05, 0.12)
    assert load_settings(None) == Settings()
    with pytest.raises(ConfigError, match="cannot read"):
        load_settings(tmp_path / "missing.conf")
