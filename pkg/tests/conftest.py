import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tagrisk.synth import SynthConfig, make_corpus


@pytest.fixture(scope="session")
def corpus():
    return make_corpus(SynthConfig())


@pytest.fixture(scope="session")
def shipped_config() -> Path:
    return Path(resources.files("tagrisk") / "data" / "fixture" / "config.ini")


@pytest.fixture(scope="session")
def default_resources():
    from tagrisk.tagfilter import default_resources

    return default_resources()
