import numpy as np
import pytest

from spmt import PmtParams, figure3_spec, render_scene, segment_pmt
from spmt.scenegen import FIGURE3_QUERY

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def params128():
    return PmtParams.for_shape((128, 128))


@pytest.fixture(scope="session")
def figure3(params128):
    """Default test scene, its sheet and the reference signature."""
    spec = figure3_spec()
    frame, manifest = render_scene(spec)
    sheet = segment_pmt(frame, spec.grid, params128)
    ref = sheet.signatures[FIGURE3_QUERY[0] * spec.grid.cols + FIGURE3_QUERY[1]]
    return {"spec": spec, "frame": frame, "manifest": manifest, "sheet": sheet, "ref": ref}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
