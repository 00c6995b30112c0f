import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rot_x(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def oracle_project(point, vfov, pitch, roll, width, height, cam_h):
    """Homogeneous projection K [R | t] [p; 1] built from scratch."""
    f = height / (2 * np.tan(vfov / 2))
    K = np.array([[f, 0, width / 2], [0, f, height / 2], [0, 0, 1.0]])
    R = rot_z(roll) @ rot_x(pitch) @ np.diag([1.0, -1.0, -1.0])
    t = -R @ np.array([0.0, cam_h, 0.0])
    P = K @ np.hstack([R, t[:, None]])
    uvw = P @ np.append(point, 1.0)
    return uvw[:2] / uvw[2]


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid or rep.when != "call" and outcome == "passed":
                continue
            name = nodeid.split("::test_criterion_")[1]
            number, _, label = name.partition("_")
            lines.append((int(number), f"criterion {number} ({label.replace('_', ' ')}): "
                          f"{'PASS' if outcome == 'passed' else 'FAIL'} [{rep.duration:.2f} s]"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(set(lines)):
            terminalreporter.write_line(line)
