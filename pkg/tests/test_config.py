import numpy as np
import pytest

from beammix.config import (
    ConfigError,
    config_to_text,
    default_config,
    load_config,
    parse_config,
)


class TestParsing:
    def test_defaults_round_trip_through_text(self):
        cfg = default_config()
        assert parse_config(config_to_text(cfg)) == cfg

    def test_empty_text_gives_defaults(self):
        assert parse_config("") == default_config()

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config(
            """
            # a comment
            data.n_total = 123   # trailing comment

            eval.pnr_db = 15
            """
        )
        assert cfg.n_total == 123
        assert cfg.pnr_db == 15.0

    def test_scene_family_declaration(self):
        cfg = parse_config(
            "scene.urban.azimuth_center_rad = 0.4\n"
            "scene.urban.n_paths = 3\n"
            "scene.rural.azimuth_center_rad = -0.9\n"
            "train.families = urban,rural\n"
            "train.proportions = 0.5,0.5\n"
        )
        assert set(cfg.scenes) == {"urban", "rural"}
        assert cfg.scenes["urban"].n_paths == 3
        assert cfg.scenes["rural"].azimuth_center_rad == -0.9

    def test_hidden_widths_follow_antenna_count(self):
        cfg = parse_config("array.n_antennas = 16\n")
        assert cfg.net.hidden_widths[-1] == 32

    def test_grid_step_expands_to_grid(self):
        cfg = parse_config("sweep.grid_step = 0.25\n")
        np.testing.assert_allclose(cfg.q_grid, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            parse_config("train.wheels = 4\n")

    def test_unknown_scene_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown scene field"):
            parse_config("scene.a.color = blue\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config("just some words\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("data.n_total = 1\ndata.n_total = 2\n")

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "cfg.txt"
        path.write_text("seeds = 9,10\n")
        assert load_config(path).seeds == (9, 10)


class TestValidation:
    def test_empty_snr_grid_rejected(self):
        with pytest.raises(ConfigError, match="snr_grid_db"):
            default_config(snr_grid_db=())

    def test_q_grid_range_enforced(self):
        with pytest.raises(ConfigError, match="q grid"):
            default_config(q_grid=(0.0, 1.5))

    def test_at_least_one_seed(self):
        with pytest.raises(ConfigError, match="seed"):
            default_config(seeds=())

    def test_unknown_train_family_rejected(self):
        with pytest.raises(ConfigError, match="not a configured scene"):
            default_config(train_families=("family_A", "nope"))

    def test_proportions_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="sum to 1"):
            default_config(train_proportions=(0.9, 0.2))

    def test_hessian_samples_bounded_by_pool_size(self):
        with pytest.raises(ConfigError, match="hessian_samples"):
            default_config(hessian_samples=1300, n_total=1000, n_eval=200)
