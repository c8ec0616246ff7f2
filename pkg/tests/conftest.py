"""
labsched テスト用のpytest設定とフィクスチャ
"""

import pytest
from hypothesis import settings

from modules.instance_model import (
    example6_instance,
    generate_instance,
    load_example6_assignment,
    realistic_profile,
    toy_profile,
)

# Hypothesisプロファイルを登録
settings.register_profile("ci", max_examples=100, deadline=None)
settings.register_profile("dev", max_examples=20, deadline=None)

# デフォルトでdevプロファイルを読み込む（CIでは--hypothesis-profile=ciで上書き）
settings.load_profile("dev")


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="実規模の長時間テストも実行する")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 実規模の長時間テスト（--runslowで実行）")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="--runslow を指定した場合のみ実行")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def example6():
    """6検体・2ラインの例題インスタンス"""
    return example6_instance()


@pytest.fixture(scope="session")
def example6_assignment():
    """例題の決定変数"""
    return load_example6_assignment()


@pytest.fixture(scope="session")
def toy_instances():
    """2検体（生化学1・免疫1）の小規模インスタンス5件"""
    return [generate_instance(toy_profile(), 1, 1, idx, seed=11) for idx in range(1, 6)]


@pytest.fixture(scope="session")
def small_instance():
    """10検体の実規模プロファイルインスタンス"""
    return generate_instance(realistic_profile(), 4, 6, 1, seed=7)


@pytest.fixture(scope="session")
def medium_instance():
    """40検体の実規模プロファイルインスタンス"""
    return generate_instance(realistic_profile(), 20, 20, 1, seed=3)
