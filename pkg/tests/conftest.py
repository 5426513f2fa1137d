import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def synthetic_bundle(tmp_path_factory):
    from tdasleep.synthetic import write_synthetic_bundle

    root = tmp_path_factory.mktemp("bundle")
    write_synthetic_bundle(root, n_subjects=3, minutes=20.0, seed=0)
    return root


@pytest.fixture(scope="session")
def small_bundle(tmp_path_factory):
    from tdasleep.synthetic import write_synthetic_bundle

    root = tmp_path_factory.mktemp("small")
    write_synthetic_bundle(root, n_subjects=2, minutes=6.0, seed=5)
    return root


@pytest.fixture(scope="session")
def extracted(synthetic_bundle, tmp_path_factory):
    """One full extract run over the 3-subject bundle, with cache and diagram dumps."""
    from tdasleep.config import PipelineConfig
    from tdasleep.pipeline import extract

    work = tmp_path_factory.mktemp("run")
    config = PipelineConfig(data_dir=str(synthetic_bundle), output_dir=str(work / "out"),
                            cache_dir=str(work / "cache"), diagram_dir=str(work / "dgms"))
    manifest = extract(config)
    return config, manifest, work


# ---------------------------------------------------------------- acceptance summary

_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title, budget = mark.args
    elapsed = getattr(item, "criterion_elapsed", rep.duration)
    _CRITERIA[number] = (title, rep.passed, elapsed, budget)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, elapsed, budget = _CRITERIA[number]
        limit = f"budget {budget:g} s" if budget else "no time budget"
        terminalreporter.write_line(
            f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.1f} s, {limit})")
