from dataclasses import replace
from pathlib import Path

import pytest

from covop.harness.cli import main
from covop.harness.config import load_config
from covop.harness.results import read_aggregates

ROOT = Path(__file__).resolve().parents[1]
DESK_CONFIG = ROOT / "configs" / "fig2_d1.toml"


def _run_cli(config_path, out, threads):
    code = main(["run", str(config_path), "--out", str(out), "--threads", str(threads)])
    assert code == 0
    return out


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """The committed desk-scale config, single thread."""
    return _run_cli(DESK_CONFIG, tmp_path_factory.mktemp("desk_t1"), 1)


@pytest.fixture(scope="session")
def desk_run_threads8(tmp_path_factory):
    return _run_cli(DESK_CONFIG, tmp_path_factory.mktemp("desk_t8"), 8)


@pytest.fixture(scope="session")
def desk_aggregates(desk_run):
    return read_aggregates(desk_run / "aggregates.csv")


@pytest.fixture(scope="session")
def desk_alpha02_aggregates(tmp_path_factory):
    from covop.harness.cli import run_to_directory

    cfg = replace(load_config(DESK_CONFIG), alphas=(0.2,), output_dir=str(tmp_path_factory.mktemp("desk_a02")))
    out, failed = run_to_directory(cfg)
    assert failed == 0
    return read_aggregates(out / "aggregates.csv")


@pytest.fixture(scope="session")
def desk_unweighted_aggregates(tmp_path_factory):
    from covop.harness.cli import run_to_directory

    cfg = replace(
        load_config(DESK_CONFIG),
        alphas=(0.0,),
        trials=30,
        output_dir=str(tmp_path_factory.mktemp("desk_unweighted")),
    )
    out, failed = run_to_directory(cfg)
    assert failed == 0
    return read_aggregates(out / "aggregates.csv")


def table(aggregates, family, estimator, policy):
    """``{lambda: mean_rel_error}`` for one series."""
    return {
        r.lambda_: r.mean_rel_error
        for r in aggregates
        if r.kernel_family == family and r.estimator == estimator and r.radius_policy == policy
    }


_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one line per acceptance criterion; printed in the terminal summary."""

    def record(criterion: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[criterion] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")

    def order(key):
        num = "".join(ch for ch in key.split()[0] if ch.isdigit())
        return (int(num or 0), key)

    for key in sorted(_ACCEPTANCE, key=order):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
