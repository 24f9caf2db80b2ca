import os
import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("ci", settings(max_examples=500, deadline=None))
settings.register_profile("dev", settings(max_examples=100, deadline=None))
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))

from profci import pilot  # noqa: E402

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def hidden_repo(tmp_path_factory):
    root = tmp_path_factory.mktemp("hidden")
    manifest_path = pilot.build_hidden_repo(root)
    return manifest_path


@pytest.fixture
def workspace(tmp_path):
    def make(solved=0, heading_fixed=True):
        return pilot.build_workspace(tmp_path / "ws", solved, heading_fixed)

    return make


@pytest.fixture(scope="session")
def pilot_manifest(hidden_repo):
    from profci.model import parse_manifest

    return parse_manifest(hidden_repo.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def subs(hidden_repo):
    return {"python": sys.executable, "hidden_dir": str(hidden_repo.parent)}


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} ({detail})")
