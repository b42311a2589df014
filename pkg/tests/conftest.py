"""Shared pytest wiring: acceptance-criteria summary lines.

Each test in test_acceptance.py covers one numbered criterion; the terminal
summary prints an explicit PASS/FAIL line per criterion so the gate can be
read off the end of the test log.
"""

import re

_ACCEPTANCE_RESULTS = {}

_CRITERIA = {
    1: "adjoint pointwise sensitivities match central finite differences on "
       "the rectifier (all parameters, 10 instants, 1e-2 relative)",
    2: "analytic RC check: dv/dR(1) = -0.36788 +/- 1e-3 and dv/dC == dv/dR "
       "to 1e-9 relative",
    3: "parareal exactness/convergence: stitched == sequential within 10x tol,"
       " <= 3 iterations at stride 100 on both fixtures, hand-worked N=2 "
       "example to 1e-5",
    4: "benchmark arithmetic: (51.08, 2.16) -> speedup 23.648, efficiency "
       "0.4927; reference efficiency column 0.5 +/- 0.02",
    5: "scaling: per-subinterval fine time halves per doubling of N "
       "(+/- 30%), coarse sweep <= 5% of one fine subinterval",
    6: "B6 bridge: U-high switch-capacitance sensitivity tracks the QoI "
       "(|rho| >= 0.5); normalized columns sum to 1 +/- 1e-12",
    7: "spectral: on-bin sine peaks at its frequency, Parseval within 5%, "
       "PSD nonnegative",
    8: "complexity: M analyzed instants -> exactly M adjoint solves",
}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or report.when != "call":
        return
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if m:
        num = int(m.group(1))
        prev = _ACCEPTANCE_RESULTS.get(num, True)
        _ACCEPTANCE_RESULTS[num] = prev and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        if num not in _ACCEPTANCE_RESULTS:
            continue
        verdict = "PASS" if _ACCEPTANCE_RESULTS[num] else "FAIL"
        terminalreporter.write_line(
            f"criterion {num}: {verdict} - {_CRITERIA[num]}")
