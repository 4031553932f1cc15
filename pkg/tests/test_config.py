"""
Tests for run configuration parsing and validation.
"""

from dataclasses import replace

import numpy as np
import pytest

from spde_limits.config import (
    AUTO,
    InitialData,
    RunConfig,
    StudyConfig,
    load_config,
    parse_c_zero,
    parse_schedule,
)
from spde_limits.errors import ConfigurationError
from spde_limits.models import Model, SigmaKind, SigmaSchedule
from spde_limits.solver import Scheme

LOG_SCHEDULE = {"kind": "log_inverse", "amplitude": 0.5}


def simulate_block(**overrides):
    block = {
        "model": "ch_ac_homotopy",
        "eps": 0.1,
        "sigma_schedule": LOG_SCHEDULE,
        "c_zero": 0.0,
    }
    block.update(overrides)
    return block


@pytest.mark.unit
class TestLoadConfig:
    """Test reading config files."""

    def test_defaults(self, write_config):
        config = load_config(write_config({}))
        assert (config.n, config.T, config.dt) == (64, 0.5, 1e-3)
        assert config.scheme is Scheme.IMEX
        assert config.simulate is None

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="cannot read"):
            load_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigurationError, match="not valid JSON"):
            load_config(path)

    def test_unknown_top_level_key(self, write_config):
        with pytest.raises(ConfigurationError, match="unknown keys"):
            load_config(write_config({"n": 16, "grid": 16}))

    def test_round_trip_through_to_dict(self, write_config):
        data = {
            "n": 16,
            "T": 0.1,
            "dt": 0.01,
            "master_seed": 3,
            "workers": 2,
            "simulate": simulate_block(snapshots=[0.05, 0.1]),
            "renorm": {
                "model": "ac_bilaplacian",
                "eps_grid": [0.1, 0.05],
                "sigma_schedule": LOG_SCHEDULE,
            },
        }
        config = load_config(write_config(data))
        again = RunConfig.from_dict(config.to_dict())
        assert again.to_dict() == config.to_dict()
        assert config.simulate.snapshots == (0.05, 0.1)
        assert config.renorm.cutoffs == (1, 2, 4, 8)


@pytest.mark.unit
class TestValidation:
    """Test rejection of invalid parameters."""

    @pytest.mark.parametrize(
        "data",
        [
            {"n": 13},
            {"n": True},
            {"T": 1.0, "dt": 0.3},
            {"dt": -1e-3},
            {"workers": 0},
            {"scheme": "rk4"},
        ],
    )
    def test_top_level(self, data):
        with pytest.raises(ConfigurationError):
            RunConfig.from_dict(data)

    def test_eps_out_of_range(self):
        with pytest.raises(ConfigurationError, match="simulate.eps"):
            RunConfig.from_dict({"simulate": simulate_block(eps=0.75)})

    def test_auto_c_zero_rejected_for_divergent_schedule(self):
        block = simulate_block(
            sigma_schedule={"kind": "constant", "amplitude": 1.0}, c_zero="auto"
        )
        with pytest.raises(ConfigurationError, match="diverges"):
            RunConfig.from_dict({"simulate": block})

    def test_snapshot_must_be_stored_time(self):
        data = {"T": 0.1, "dt": 0.01, "simulate": simulate_block(snapshots=[0.015])}
        with pytest.raises(ConfigurationError, match="not a stored time"):
            RunConfig.from_dict(data)

    def test_snapshot_outside_horizon(self):
        data = {"T": 0.1, "dt": 0.01, "simulate": simulate_block(snapshots=[0.2])}
        with pytest.raises(ConfigurationError, match="outside"):
            RunConfig.from_dict(data)

    def test_save_every_must_divide_steps(self):
        data = {"T": 0.1, "dt": 0.01, "simulate": simulate_block(save_every=3)}
        with pytest.raises(ConfigurationError, match="does not divide"):
            RunConfig.from_dict(data)

    def test_unknown_dump_field(self):
        with pytest.raises(ConfigurationError, match="dump_fields"):
            RunConfig.from_dict({"simulate": simulate_block(dump_fields=["w"])})

    def test_study_modes(self):
        base = {"model": "ch_ac_homotopy", "eps_grid": [0.1], "samples": 2}
        with pytest.raises(ConfigurationError, match="study.mode"):
            RunConfig.from_dict({"study": {**base, "mode": "bogus"}})
        with pytest.raises(ConfigurationError, match="schedules"):
            RunConfig.from_dict({"study": {**base, "mode": "regimes"}})
        with pytest.raises(ConfigurationError, match="sigma_schedule"):
            RunConfig.from_dict({"study": {**base, "mode": "theorem"}})

    def test_renorm_block_ranges(self):
        base = {
            "model": "ch_ac_homotopy",
            "eps_grid": [0.1],
            "sigma_schedule": LOG_SCHEDULE,
        }
        for bad in ({"rel_tol": 0.0}, {"cutoffs": [0, 2]}, {"delta": [-1.0]}):
            with pytest.raises(ConfigurationError):
                RunConfig.from_dict({"renorm": {**base, **bad}})

    def test_missing_block(self):
        with pytest.raises(ConfigurationError, match="no 'study' block"):
            RunConfig().block("study")


@pytest.mark.unit
class TestParsers:
    """Test leaf parsers."""

    def test_c_zero(self):
        assert parse_c_zero("auto") == AUTO
        assert parse_c_zero(0.25) == 0.25
        with pytest.raises(ConfigurationError):
            parse_c_zero(-0.1)
        with pytest.raises(ConfigurationError):
            parse_c_zero("zero")

    def test_schedule(self):
        schedule = parse_schedule({"kind": "power", "amplitude": 2.0, "exponent": 1})
        assert schedule == SigmaSchedule(SigmaKind.POWER, 2.0, 1.0)
        with pytest.raises(ConfigurationError, match="kind"):
            parse_schedule({"kind": "cosh", "amplitude": 1.0})
        with pytest.raises(ConfigurationError, match="amplitude"):
            parse_schedule({"kind": "constant"})


@pytest.mark.unit
class TestInitialData:
    """Test initial-condition descriptors."""

    def test_default_cosines(self, grid16):
        field = InitialData().build(grid16)
        assert field.mode(1, 0) == pytest.approx(0.1, abs=1e-14)
        assert field.mode(0, 2) == pytest.approx(0.05, abs=1e-14)

    def test_constant_is_exact(self, grid8):
        field = InitialData(kind="constant", value=0.3).build(grid8)
        rest = field.coeffs.copy()
        rest[0, 0] = 0
        assert field.mode(0, 0) == 0.3
        assert not np.any(rest)

    def test_invalid_descriptors(self):
        with pytest.raises(ConfigurationError):
            InitialData(kind="gaussian")
        with pytest.raises(ConfigurationError):
            InitialData(kind="file")
        with pytest.raises(ConfigurationError):
            InitialData.from_dict({"kind": "constant", "level": 1.0})


@pytest.mark.unit
class TestStudyConfig:
    """Test the resolved study configuration."""

    def test_from_run_config(self):
        config = RunConfig.from_dict(
            {
                "n": 16,
                "T": 0.1,
                "dt": 0.01,
                "master_seed": 9,
                "study": {
                    "model": "ac_bilaplacian",
                    "eps_grid": [0.2, 0.1],
                    "samples": 3,
                    "sigma_schedule": LOG_SCHEDULE,
                    "c_zero": 0.0,
                },
            }
        )
        study = config.study_config()
        assert isinstance(study, StudyConfig)
        assert study.model is Model.AC_BILAPLACIAN
        assert (study.n, study.steps, study.master_seed) == (16, 10, 9)
        spec = study.spec(0.1, c_zero=0.0)
        assert spec.sigma == pytest.approx(study.schedule(0.1))

    def test_small_study_fixture_is_valid(self, small_study):
        assert small_study.steps == 10
        assert small_study.c_zero == 0.0

    def test_rejects_bad_values(self, small_study):
        with pytest.raises(ConfigurationError):
            replace(small_study, samples=0)
        with pytest.raises(ConfigurationError):
            replace(small_study, gamma=0.0)
        with pytest.raises(ConfigurationError):
            replace(small_study, save_every=3)
        with pytest.raises(ConfigurationError):
            replace(small_study, eps_grid=())
