"""Tests for the configuration system."""

import textwrap

import pytest

from convexflow.config import (
    KEYS,
    Settings,
    load_flow_config,
    load_settings,
    parse_config,
    render_config,
    with_overrides,
)
from convexflow.errors import InvalidConfig
from convexflow.models import FlowConfig


class TestDefaults:
    """Config defaults should match expected values."""

    def test_default_flow_config(self):
        cfg = FlowConfig()
        assert cfg.n == 1
        assert cfg.k == 1
        assert cfg.alpha == 1.0
        assert cfg.mu == "power"
        assert cfg.constraint == "volume"
        assert cfg.shape == "ellipsoid:2,1"
        assert cfg.resolution == 256
        assert cfg.cfl == 0.2
        assert cfg.projection is True
        assert cfg.tol_conv == 1e-4
        assert cfg.snapshot_every == 50
        assert cfg.strict_monitors is False
        assert cfg.seed == 0

    def test_surface_defaults(self):
        cfg = FlowConfig(n=2)
        assert cfg.resolution == 24
        assert cfg.shape == "ellipsoid:1.5,1.2,1.0"

    def test_default_settings(self):
        settings = Settings()
        assert settings.log.level == "INFO"
        assert settings.log.file == "convexflow.log"
        assert settings.log.max_bytes == 10_485_760
        assert settings.log.backup_count == 5
        assert settings.output.ledger_file == "runs.jsonl"
        assert settings.output.write_snapshot is True
        assert settings.verify.resolution_1 == 64
        assert settings.quiet is False


class TestParseConfig:
    """Flat key = value parsing."""

    def test_minimal(self):
        cfg = parse_config("n=1\nk=1\nalpha=1\nconstraint=volume\nresolution=256")
        assert cfg == FlowConfig(n=1, k=1, alpha=1.0, constraint="volume", resolution=256)
        assert cfg.cfl == 0.2
        assert cfg.projection is True

    def test_comments_and_blank_lines(self):
        cfg = parse_config(textwrap.dedent("""\
            # curve shortening with area preserved
            n = 1

            alpha = 2   # squared curvature
            shape = ellipse
        """))
        assert cfg.alpha == 2.0
        assert cfg.shape == "ellipse"

    @pytest.mark.parametrize("raw,expected", [("on", True), ("off", False), ("yes", True), ("0", False)])
    def test_booleans(self, raw, expected):
        assert parse_config(f"projection = {raw}").projection is expected

    def test_k_above_n(self):
        with pytest.raises(InvalidConfig) as exc_info:
            parse_config("n=2\nk=3")
        assert exc_info.value.key == "k"
        assert exc_info.value.line == 2

    def test_negative_alpha(self):
        with pytest.raises(InvalidConfig) as exc_info:
            parse_config("alpha=-1")
        assert exc_info.value.key == "alpha"
        assert exc_info.value.line == 1
        assert str(exc_info.value).startswith("line 1: alpha: ")

    @pytest.mark.parametrize(
        "text,key,line",
        [
            ("n = 1\nbogus = 3", "bogus", 2),
            ("n = 1\nn = 2", "n", 2),
            ("resolution = many", "resolution", 1),
            ("projection = maybe", "projection", 1),
            ("tol_conv =", "tol_conv", 1),
            ("\nresolution = 8", "resolution", 2),
            ("mu = sqrt", "mu", 1),
            ("constraint = mixed", "constraint", 1),
            ("k = 1\nshape = blob:1", "shape", 2),
            ("alpha = 2\nmu = z+z^3", "alpha", 1),
            ("mu = exp(z)-1\nalpha = 0.5", "alpha", 2),
        ],
    )
    def test_errors_name_line_and_key(self, text, key, line):
        with pytest.raises(InvalidConfig) as exc_info:
            parse_config(text)
        assert exc_info.value.key == key
        assert exc_info.value.line == line

    def test_missing_separator(self):
        with pytest.raises(InvalidConfig, match="expected key = value"):
            parse_config("n 1")

    def test_shape_dimension_checked(self):
        with pytest.raises(InvalidConfig):
            parse_config("n = 2\nshape = ellipse")


class TestRender:
    @pytest.mark.parametrize(
        "cfg",
        [
            FlowConfig(),
            FlowConfig(n=2, k=2, alpha=0.5, constraint="quermass", projection=False),
            FlowConfig(mu="z+z^3", constraint="mixed:0.25", tol_conv=1e-7, t_max=12.5, seed=9),
            FlowConfig(constraint="external-factor:1.05", shape="perturbed:1,3,0.05", strict_monitors=True),
        ],
    )
    def test_round_trip(self, cfg):
        assert parse_config(render_config(cfg)) == cfg

    def test_every_key_rendered(self):
        text = render_config(FlowConfig())
        assert [line.split(" = ")[0] for line in text.splitlines()] == list(KEYS)


class TestOverrides:
    def test_replaces_values(self):
        cfg = with_overrides(FlowConfig(), {"alpha": "2", "out_dir": "elsewhere"})
        assert cfg.alpha == 2.0
        assert cfg.out_dir == "elsewhere"
        assert cfg.shape == "ellipsoid:2,1"

    def test_dimension_change_resets_defaults(self):
        cfg = with_overrides(FlowConfig(), {"n": "2"})
        assert cfg.resolution == 24
        assert cfg.shape == "ellipsoid:1.5,1.2,1.0"

    def test_invalid_override(self):
        with pytest.raises(InvalidConfig):
            with_overrides(FlowConfig(), {"k": "2"})


class TestLoadFiles:
    def test_load_flow_config(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("n = 1\nalpha = 0.5\n")
        assert load_flow_config(path).alpha == 0.5

    def test_missing_flow_config(self, tmp_path):
        with pytest.raises(InvalidConfig, match="cannot read config"):
            load_flow_config(tmp_path / "missing.cfg")

    def test_load_settings_toml(self, tmp_path):
        toml_file = tmp_path / "convexflow.toml"
        toml_file.write_text(textwrap.dedent("""\
            quiet = true

            [log]
            level = "DEBUG"

            [output]
            write_snapshot = false
            ledger_file = "ledger.jsonl"

            [verify]
            resolution_1 = 128
            unknown_key = "ignored"
        """))
        settings = load_settings(toml_file)
        assert settings.quiet is True
        assert settings.log.level == "DEBUG"
        assert settings.output.write_snapshot is False
        assert settings.output.ledger_file == "ledger.jsonl"
        assert settings.verify.resolution_1 == 128
        assert settings.verify.t_max == 2.0  # default preserved

    def test_load_nonexistent_toml(self, tmp_path):
        """Loading a nonexistent file returns defaults."""
        assert load_settings(tmp_path / "missing.toml").log.level == "INFO"

    def test_load_none_path(self):
        assert load_settings(None).verify.seed == 0

    def test_wrong_types_ignored(self, tmp_path):
        toml_file = tmp_path / "bad.toml"
        toml_file.write_text(textwrap.dedent("""\
            [verify]
            resolution_1 = "many"

            [output]
            write_snapshot = "yes"
        """))
        settings = load_settings(toml_file)
        assert settings.verify.resolution_1 == 64
        assert settings.output.write_snapshot is True
