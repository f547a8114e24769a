"""Tests for TOML run configs: parsing, validation, round-trip identity."""
import pytest

from gkflow.config import (RunConfig, ShapeSpec, default_config, dumps_config,
                           parse_config)
from gkflow.errors import ConfigError


class TestRoundTrip:
    def test_default_is_identity(self):
        cfg = default_config()
        assert parse_config(dumps_config(cfg)) == cfg

    def test_dump_is_stable(self):
        cfg = default_config()
        text = dumps_config(cfg)
        assert dumps_config(parse_config(text)) == text

    def test_nondefault_round_trip(self):
        text = """
[run]
n = 4
kappa = 0.25
t_max = 0.5
seed = 11
surgery = true
out_dir = "elsewhere"

[shape]
kind = "dumbbell"
bulb_r = 1.5
neck_r = 0.3
separation = 7.0
waist_len = 3.0
points = 700

[step]
cfl = 0.15

[surgery_params]
g_star = 2.0
delta_grid = [0.0, 0.5]

[tolerances]
alpha = 0.2
"""
        cfg = parse_config(text)
        assert cfg.n == 4 and cfg.kappa == 0.25 and cfg.surgery
        assert cfg.shape.kind == "dumbbell"
        assert cfg.shape.params["separation"] == 7.0
        assert cfg.step.cfl == 0.15
        assert cfg.surgery_params.delta_grid == (0.0, 0.5)
        assert cfg.tolerances.alpha == 0.2
        assert parse_config(dumps_config(cfg)) == cfg


class TestValidation:
    def test_unknown_run_key(self):
        with pytest.raises(ConfigError):
            parse_config("[run]\nbogus = 1\n")

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            parse_config("[nonsense]\nx = 1\n")

    def test_unknown_shape_key(self):
        with pytest.raises(ConfigError):
            parse_config('[shape]\nkind = "sphere"\nneck_r = 1.0\n')

    def test_unknown_shape_kind(self):
        with pytest.raises(ConfigError):
            parse_config('[shape]\nkind = "torus"\n')

    def test_unknown_step_key(self):
        with pytest.raises(ConfigError):
            parse_config("[step]\nwarp = 9\n")

    def test_bad_toml(self):
        with pytest.raises(ConfigError):
            parse_config("not toml ][")

    def test_cfl_zero_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[step]\ncfl = 0.0\n")

    def test_negative_g_star_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("[surgery_params]\ng_star = -1.0\n")

    def test_type_mismatch(self):
        with pytest.raises(ConfigError):
            parse_config('[run]\nt_max = "soon"\n')

    def test_int_coerces_to_float(self):
        cfg = parse_config("[run]\nt_max = 2\n")
        assert cfg.t_max == 2.0 and isinstance(cfg.t_max, float)

    def test_bool_not_accepted_as_number(self):
        with pytest.raises(ConfigError):
            parse_config("[run]\nt_max = true\n")


class TestShapes:
    def test_build_sphere(self):
        cfg = parse_config('[shape]\nkind = "sphere"\nr = 2.0\npoints = 128\n')
        c = cfg.build_initial()
        assert c.N == 128
        assert c.closure == "caps"

    def test_build_cylinder_periodic(self):
        cfg = parse_config('[shape]\nkind = "cylinder"\nr = 1.0\n')
        assert cfg.build_initial().closure == "periodic"

    def test_defaults_fill_missing_fields(self):
        cfg = parse_config('[shape]\nkind = "dumbbell"\nneck_r = 0.2\n')
        assert cfg.shape.params["bulb_r"] == 1.0
        assert cfg.shape.params["neck_r"] == 0.2
