import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import synth  # noqa: E402


@pytest.fixture(scope="session")
def synthetic_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("synthetic")
    data, ids = d / "diabetic_data.csv", d / "IDS_mapping.csv"
    synth.write_dataset(data, 1200, seed=3)
    synth.write_ids_mapping(ids)
    return data, ids


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
