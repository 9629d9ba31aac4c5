import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import synth  # noqa: E402
from mecoref.ingest import write_run_bundle  # noqa: E402


def write_corpus(root: Path, n: int, no_grounding_every: int = 7) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    for i in range(n):
        vid = f"vid{i:03d}"
        b = synth.noisy_bundle(i, vid, with_grounding=i % no_grounding_every != 0)
        write_run_bundle(b, root / vid)
    return root


@pytest.fixture(scope="session")
def corpus100(tmp_path_factory):
    return write_corpus(tmp_path_factory.mktemp("corpus100"), 100)


@pytest.fixture(scope="session")
def corpus5(tmp_path_factory):
    return write_corpus(tmp_path_factory.mktemp("corpus5"), 5, no_grounding_every=3)


@pytest.fixture
def perfect_dir(tmp_path):
    d = tmp_path / "perfect"
    write_run_bundle(synth.perfect_bundle(0), d)
    return d


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for ln in sorted(lines, key=lambda ln: int(ln.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(ln)
