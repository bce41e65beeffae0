from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from gwpenal.offspring import OffspringDistribution

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def Q(*probs, **kw) -> OffspringDistribution:
    return OffspringDistribution.of([Fraction(p) for p in probs], **kw)


SCHROEDER = Q("1/4", "1/4", "1/2")
CRITICAL = Q("1/2", 0, "1/2")
AMIN1 = Q(0, "1/2", "1/2")
BOETTCHER = Q(0, 0, "1/2", "1/2")
SUBCRITICAL = Q("1/2", "1/4", "1/4")
ALL = {"schroeder": SCHROEDER, "critical": CRITICAL, "amin1": AMIN1,
       "boettcher": BOETTCHER, "subcritical": SUBCRITICAL}


@pytest.fixture(params=sorted(ALL))
def any_q(request):
    return ALL[request.param]


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
