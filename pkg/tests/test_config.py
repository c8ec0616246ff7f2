"""
設定モジュールのテスト
"""

import logging

import pytest

from config import Config, setup_logging


class TestConfigLoad:
    """設定ファイルによる上書きのテスト"""

    def test_defaults_without_file(self):
        config = Config.load(None)
        assert config.COOLING == 0.98
        assert config.BLOCK_SIZE == 4
        assert config.validate()

    def test_override_types(self, tmp_path):
        path = tmp_path / "labsched.env"
        path.write_text(
            "COOLING=0.9\nBLOCK_SIZE=8\nINV_INCLUSIVE=true\nLABSCHED_THETA=5\nINITIAL_TEMPERATURE=\n",
            encoding="utf-8",
        )
        config = Config.load(str(path))
        assert config.COOLING == 0.9
        assert config.BLOCK_SIZE == 8
        assert config.INV_INCLUSIVE is True
        assert config.THETA == 5
        assert config.INITIAL_TEMPERATURE is None

    def test_override_does_not_leak_to_class(self, tmp_path):
        path = tmp_path / "labsched.env"
        path.write_text("REFSET_SIZE=4\n", encoding="utf-8")
        Config.load(str(path))
        assert Config().REFSET_SIZE == Config.REFSET_SIZE

    def test_unknown_key_raises_error(self, tmp_path):
        path = tmp_path / "labsched.env"
        path.write_text("SPEED=fast\n", encoding="utf-8")
        with pytest.raises(ValueError, match="unknown config key"):
            Config.load(str(path))

    def test_bad_value_raises_error(self, tmp_path):
        path = tmp_path / "labsched.env"
        path.write_text("BLOCK_SIZE=four\n", encoding="utf-8")
        with pytest.raises(ValueError, match="BLOCK_SIZE must be int"):
            Config.load(str(path))

    def test_bad_boolean_raises_error(self, tmp_path):
        path = tmp_path / "labsched.env"
        path.write_text("INV_INCLUSIVE=maybe\n", encoding="utf-8")
        with pytest.raises(ValueError, match="INV_INCLUSIVE must be bool"):
            Config.load(str(path))

    def test_missing_file_raises_error(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            Config.load(str(tmp_path / "none.env"))


class TestConfigValidate:
    """設定値の検証のテスト"""

    @pytest.mark.parametrize("key,value", [
        ("COOLING", 0.0),
        ("COOLING", 1.5),
        ("THETA", 0),
        ("EVAL_BUDGET", 0),
        ("REFSET_SIZE", 1),
        ("BLOCK_SIZE", 0),
        ("TIE_POLICY", "coin-flip"),
        ("BLOCK_MODE", "shuffle"),
        ("LON_MODE", "loose"),
        ("PLATEAU_TOLERANCE", 0.0),
        ("MAX_WORKERS", 0),
    ])
    def test_invalid_values(self, key, value):
        config = Config()
        setattr(config, key, value)
        assert not config.validate()

    def test_fixed_temperature_cooling_is_valid(self):
        config = Config()
        config.COOLING = 1.0
        assert config.validate()


class TestLogLevel:
    """ログレベル変換のテスト"""

    def test_known_level(self):
        config = Config()
        config.LOG_LEVEL = "debug"
        assert config.get_log_level() == logging.DEBUG

    def test_unknown_level_defaults_to_info(self):
        config = Config()
        config.LOG_LEVEL = "VERBOSE"
        assert config.get_log_level() == logging.INFO

    def test_level_from_config_file(self, tmp_path):
        """設定ファイルの LOG_LEVEL がロギングに反映されること"""
        path = tmp_path / "labsched.env"
        path.write_text("LOG_LEVEL=DEBUG\n", encoding="utf-8")
        config = Config.load(str(path))
        assert config.get_log_level() == logging.DEBUG

        root = logging.getLogger()
        previous = root.level
        try:
            setup_logging(config=config)
            assert root.level == logging.DEBUG
            setup_logging("WARNING", config)
            assert root.level == logging.WARNING
        finally:
            root.setLevel(previous)
