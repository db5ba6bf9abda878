"""Flat key-value config format: parsing, serialization, round trips."""

import math

import pytest

from switchtaylor import format_config, load_config, parse_config, save_config
from switchtaylor.errors import ConfigError

SAMPLE = """
# strong order study
model = linear2
t_end = 1.0
scheme = [euler, milstein, taylor15]
levels = [16, 32, 64]
reference = 4096
paths = 10000
seed = 42
output = out/run1
"""


class TestParse:
    def test_sample_types_and_values(self):
        cfg = parse_config(SAMPLE)
        assert cfg["model"] == "linear2"
        assert cfg["t_end"] == 1.0 and isinstance(cfg["t_end"], float)
        assert cfg["scheme"] == ["euler", "milstein", "taylor15"]
        assert cfg["levels"] == [16, 32, 64]
        assert all(isinstance(v, int) for v in cfg["levels"])
        assert cfg["reference"] == 4096
        assert cfg["seed"] == 42
        assert cfg["output"] == "out/run1"

    def test_matrix_values(self):
        cfg = parse_config("generator = [[-1.0, 1.0], [1.0, -1.0]]\n")
        assert cfg["generator"] == [[-1.0, 1.0], [1.0, -1.0]]

    def test_comments_and_blank_lines_ignored(self):
        cfg = parse_config("\n# note\n  \nseed = 7\n")
        assert cfg == {"seed": 7}

    def test_empty_text_gives_empty_mapping(self):
        assert parse_config("") == {}

    def test_nested_empty_array(self):
        assert parse_config("levels = []\n") == {"levels": []}

    def test_scientific_notation_and_signs(self):
        cfg = parse_config("a = -2.5e-3\nb = +17\n")
        assert cfg["a"] == -2.5e-3
        assert cfg["b"] == 17 and isinstance(cfg["b"], int)

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("just some words\n")

    def test_bad_key_rejected(self):
        with pytest.raises(ConfigError, match="invalid config key"):
            parse_config("3bad = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config("seed = 1\nseed = 2\n")

    def test_unbalanced_brackets_rejected(self):
        with pytest.raises(ConfigError, match="levels"):
            parse_config("levels = [1, 2\n")
        with pytest.raises(ConfigError, match="levels"):
            parse_config("levels = 1, 2]\n")

    def test_empty_value_rejected(self):
        with pytest.raises(ConfigError, match="seed"):
            parse_config("seed = \n")


class TestRoundTrip:
    def test_parse_format_parse_is_identity(self):
        first = parse_config(SAMPLE)
        second = parse_config(format_config(first))
        assert first == second
        for key in first:
            assert type(first[key]) is type(second[key])

    def test_floats_survive_exactly(self):
        values = {"a": 0.1, "b": 1.0 / 3.0, "c": 1e-17, "d": -math.pi, "e": 2.0 ** -52}
        back = parse_config(format_config(values))
        for key, value in values.items():
            assert back[key] == value

    def test_matrices_survive(self):
        cfg = {"generator": [[-2.0, 1.5, 0.5], [0.5, -1.0, 0.5], [1.0, 2.0, -3.0]]}
        assert parse_config(format_config(cfg)) == cfg

    def test_numeric_looking_string_refused_on_format(self):
        with pytest.raises(ConfigError, match="name"):
            format_config({"name": "1.5"})

    def test_string_with_spaces_refused_on_format(self):
        with pytest.raises(ConfigError, match="output"):
            format_config({"output": "my dir"})

    def test_booleans_refused_on_format(self):
        with pytest.raises(ConfigError, match="flag"):
            format_config({"flag": True})


class TestFiles:
    def test_save_and_load(self, tmp_path):
        path = tmp_path / "run.cfg"
        cfg = {"model": "linear2", "seed": 5, "levels": [8, 16]}
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_missing_file_reports_config_key(self, tmp_path):
        with pytest.raises(ConfigError, match="config"):
            load_config(tmp_path / "absent.cfg")
