import pytest
from hypothesis import given
from hypothesis import strategies as st

from hypermatch.config import (ConfigError, ExperimentConfig, config_from_text, load_config,
                               load_preset, parse_seeds, preset_names)


def test_defaults_are_valid():
    assert ExperimentConfig().validate().d == 2


@pytest.mark.parametrize("text,seeds", [
    ("0", [0]), ("0-4", [0, 1, 2, 3, 4]), ("1,5,9", [1, 5, 9]), ("0-2,7", [0, 1, 2, 7]),
    (" 3 4 ", [3, 4]),
])
def test_parse_seeds(text, seeds):
    assert parse_seeds(text) == seeds


@given(st.integers(0, 1000), st.integers(0, 50))
def test_seed_ranges_are_inclusive(a, n):
    assert parse_seeds(f"{a}-{a + n}") == list(range(a, a + n + 1))


def test_values_are_converted():
    cfg = config_from_text("[experiment]\nd = 1\nL = 10\nseeds = 0-2\nradii = 1, 2.5\n"
                           "max_per_bin = none\ndeterministic = off\n")
    assert (cfg.d, cfg.L, cfg.seeds, cfg.radii) == (1, 10.0, [0, 1, 2], [1.0, 2.5])
    assert cfg.max_per_bin is None and cfg.deterministic is False


def test_overrides_win_and_none_is_ignored():
    cfg = config_from_text("[experiment]\nalpha = 3\n", overrides={"alpha": 5.0, "L": None})
    assert cfg.alpha == 5.0 and cfg.L == ExperimentConfig().L


@pytest.mark.parametrize("text,line,fragment", [
    ("[experiment]\nd = 2\nL = -1\n", 3, "L: box side"),
    ("[experiment]\n\n# note\nd = 4\n", 4, "d: dimension"),
    ("[experiment]\nd = 2\nwidth = 3\n", 3, "unknown key 'width'"),
    ("[experiment]\nalpha = many\n", 2, "alpha:"),
    ("[experiment]\nd = 2\nthis line is wrong\n", 3, "cannot parse"),
    ("[experiment]\nprocess = file\n", None, "input"),
    ("[experiment]\nseeds = -1\n", 2, "seeds"),
])
def test_errors_point_at_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as err:
        config_from_text(text, "cfg.ini")
    assert fragment in str(err.value)
    assert err.value.line == line
    if line is not None:
        assert str(err.value).startswith(f"cfg.ini:{line}: ")


def test_missing_section():
    with pytest.raises(ConfigError, match="missing"):
        config_from_text("[other]\nd = 1\n")


def test_load_from_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[experiment]\nd = 3\nL = 6 ; inline comment\n")
    cfg = load_config(path)
    assert cfg.d == 3 and cfg.L == 6.0


def test_every_preset_loads():
    names = preset_names()
    assert {"fig4-3d", "fig5-1d", "fig5-2d", "fig7"} <= set(names)
    for name in names:
        for scale in ("desk", "smoke"):
            assert load_preset(name, scale).seeds


def test_unknown_preset():
    with pytest.raises(ConfigError, match="available"):
        load_preset("fig99")
