"""
Tests for studies/config.py, studies/sequences.py - 실험 설정, 덮어쓰기, 수열 구성, 결함 주입
"""
import os
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from pydantic import ValidationError

from studies.config import ExperimentConfig, apply_overrides, dump_config, load_config
from studies.sequences import build_sequence, build_target, inject_fault

CONFIGS = Path(__file__).resolve().parents[2] / "configs"


def _cfg(**kw):
    base = {
        "name": "unit",
        "sequence": {"levels": 3, "base_cells": 16, "coarse_cells": 8, "T": 0.1, "n_times": 3,
                     "refine_times": False},
    }
    base.update(kw)
    return ExperimentConfig.model_validate(base)


class TestLoadConfig:
    """YAML -> ExperimentConfig"""

    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_shipped_configs_validate(self, path):
        cfg = load_config(path)
        assert cfg.name == path.stem

    def test_round_trip(self, tmp_path):
        cfg = load_config(CONFIGS / "viscous_riemann.yaml")
        back = load_config(dump_config(cfg, tmp_path / "sub" / "config.yaml"))
        assert back == cfg

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path) == ExperimentConfig()

    def test_invalid_value_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("generator: {kind: oscillatory, lam: 1.5}\n")
        with pytest.raises(ValidationError):
            load_config(path)

    def test_unknown_generator_rejected(self):
        with pytest.raises(ValidationError):
            _cfg(generator={"kind": "spectral"})


class TestOverrides:
    """CLI > 환경 변수 > 파일"""

    def test_environment_overrides_file(self):
        with patch.dict(os.environ, {"EULERDEFECT_SEED": "7", "EULERDEFECT_OUT": "/tmp/env-out"}):
            cfg = apply_overrides(_cfg())
        assert cfg.battery.seed == 7
        assert cfg.output.directory == "/tmp/env-out"

    def test_cli_overrides_environment(self):
        with patch.dict(os.environ, {"EULERDEFECT_SEED": "7"}):
            cfg = apply_overrides(_cfg(), seed=3, levels=4, expect="defect")
        assert cfg.battery.seed == 3
        assert cfg.sequence.levels == 4
        assert cfg.expect == "defect"

    def test_invalid_override_rejected(self):
        with pytest.raises(ValidationError):
            apply_overrides(_cfg(), levels=0)


class TestBuildSequence:
    """생성기 분기와 목표장"""

    def test_constant(self):
        seq = build_sequence(_cfg())
        assert [f.grid.cells for f in seq] == [16, 32, 64]

    def test_generator_failure_wrapped(self):
        with pytest.raises(RuntimeError, match="generator oscillatory failed"):
            build_sequence(_cfg(generator={"kind": "oscillatory"}))

    def test_weak_limit_has_no_target(self):
        cfg = _cfg()
        assert build_target(cfg, build_sequence(cfg)) is None

    def test_finest_target(self):
        cfg = _cfg(target="finest")
        seq = build_sequence(cfg)
        target = build_target(cfg, seq)
        assert all(t is seq[-1] for t in target)

    def test_exact_target_needs_riemann_data(self):
        cfg = _cfg(target="exact")
        with pytest.raises(ValueError, match="riemann initial data"):
            build_target(cfg, build_sequence(cfg))


class TestFaults:
    """결함 주입"""

    def test_entropy_dip_on_last_level(self):
        cfg = _cfg(sequence={"system": "full", "levels": 3, "base_cells": 16, "coarse_cells": 8, "T": 0.1,
                             "n_times": 3, "refine_times": False, "s_ref": 0.5},
                   fault={"kind": "entropy_dip", "magnitude": 0.5})
        seq = build_sequence(cfg)
        assert seq[-1].S.min() == pytest.approx(0.0)
        assert seq[-1].meta["fault"] == "entropy_dip"
        assert np.all(seq[0].S == 0.5)

    def test_entropy_dip_needs_full_system(self):
        with pytest.raises(ValueError, match="entropy dip"):
            build_sequence(_cfg(fault={"kind": "entropy_dip"}))

    def test_fault_level_range(self):
        cfg = _cfg(fault={"kind": "energy_blowup", "level": 5})
        with pytest.raises(ValueError, match="fault level 5"):
            inject_fault(cfg, build_sequence(_cfg()))

    def test_energy_blowup_adds_momentum(self):
        seq = build_sequence(_cfg(fault={"kind": "energy_blowup", "magnitude": 0.5}))
        assert np.all(seq[-1].m[0] == 0.0)
        assert np.all(seq[-1].m[-1] > 0.0)

    def test_frozen_copies_level_one(self):
        seq = build_sequence(_cfg(fault={"kind": "frozen"}))
        assert [f.grid.cells for f in seq] == [16, 32, 64]
        assert all(f.meta["fault"] == "frozen" for f in seq)
