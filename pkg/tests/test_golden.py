import json
import math
import time

import pytest

from junctionlab.golden import EXPECTED, golden_report, report_json


@pytest.fixture(scope="module")
def report():
    return {c.name: c for c in golden_report()}


@pytest.mark.parametrize("name", ["alpha_overlap", "alpha_quadrature", "gamma_overlap", "gamma_quadrature",
                                  "beta_overlap", "beta_quadrature", "level_shift", "datta_projection_structure",
                                  "symmetric_orthogonality"])
def test_constant_is_reproduced(report, name):
    assert report[name].passed, report[name]


def test_printed_constants_are_the_closed_forms():
    assert EXPECTED["alpha"] == pytest.approx(2 / 3, abs=1e-15)
    assert EXPECTED["gamma"] == pytest.approx(-4 / 15, abs=1e-15)
    assert EXPECTED["beta"] == pytest.approx(2 / 5, abs=1e-15)


def test_open_mode_currents_by_hand(report):
    # phi_12 = (2/pi) sin x sin 2y; integrate its normal derivative against sin 2(t - offset) by hand
    c = report["current_12"].computed
    assert abs(c[0]) < 1e-15
    assert c[1] == pytest.approx(32 * math.sqrt(2) / (3 * math.pi**2), abs=1e-12)
    assert c[2] == pytest.approx(-2.0 / math.pi, abs=1e-12)


@pytest.mark.parametrize("name", ["current_12", "current_21"])
def test_printed_current_vector(report, name):
    assert report[name].passed, f"{name}: computed {report[name].computed}, printed {report[name].expected}"


def test_perturbed_constant_fails_by_name():
    checks = golden_report(expected={"gamma": EXPECTED["gamma"] + 1e-6})
    failed = {c.name for c in checks if not c.passed}
    assert {"gamma_overlap", "gamma_quadrature"} <= failed
    assert "alpha_overlap" not in failed


def test_report_is_deterministic():
    a, b = report_json(golden_report()), report_json(golden_report())
    assert a == b
    payload = json.loads(a)
    assert [c["name"] for c in payload["checks"]][:2] == ["alpha_overlap", "alpha_quadrature"]


def test_report_is_fast():
    start = time.perf_counter()
    golden_report()
    assert time.perf_counter() - start < 1.0
