"""The acceptance suite: one function per criterion, shared by the tests and ``verify-all``.

Each function returns a :class:`CriterionResult` made of named checks; the
criterion passes when every check passes.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

from . import martingales as mg
from . import penalization as pen
from .combinatorics import check_somme_Hk, coefficient_identity
from .limits import critical_moment_polynomial, expected_hilbert, laplace_transform
from .offspring import OffspringDistribution, characterize, conjugate, generation_law, load_distribution
from .spinelaw import SpineLaw, compare_shapes, spine_statistics, verify_measure_equality

FIXTURES = ("schroeder", "critical", "amin1", "boettcher", "subcritical")


def fixture(name: str) -> OffspringDistribution:
    text = resources.files("gwpenal").joinpath("fixtures", f"{name}.json").read_text()
    return load_distribution(text)


def Q(*probs) -> OffspringDistribution:
    return OffspringDistribution.of([Fraction(p) for p in probs])


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def add(self, name: str, passed, detail: str = "") -> bool:
        self.checks.append(Check(name, bool(passed), detail))
        return bool(passed)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        text = f"criterion {self.number:2d} {verdict}: {self.title}"
        bad = self.failures()
        if bad:
            text += " | failing: " + "; ".join(f"{c.name} ({c.detail})" for c in bad)
        return text

    def to_json(self) -> dict:
        return {
            "criterion": self.number,
            "title": self.title,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in self.checks],
        }


def _timed(number: int, title: str):
    def wrap(fn):
        def run(*args, **kwargs) -> CriterionResult:
            result = CriterionResult(number, title)
            start = time.perf_counter()
            fn(result, *args, **kwargs)
            result.seconds = time.perf_counter() - start
            return result

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        run.number = number
        return run

    return wrap


@_timed(1, "martingale property of every applicable family")
def criterion_1(res: CriterionResult, n_max: int = 4):
    for name in FIXTURES:
        q = fixture(name)
        for M in mg.applicable_specs(q, p_values=(0, 1, 2, 3)):
            rep = mg.verify_martingale(M, n_max=n_max, tol=1e-9)
            kind = "exact" if rep.exact else f"rel gap {rep.max_rel_gap:.1e}"
            res.add(f"{name}/{M.label()}", rep.passed, kind if rep.passed else str(rep.violations[:1]))


@_timed(2, "spine law equals M P shape by shape")
def criterion_2(res: CriterionResult):
    q = Q("1/4", "1/4", "1/2")
    for p in (1, 2):
        for a in (0, 1.0):
            rep = verify_measure_equality(SpineLaw(q, p, a), 2, 2)
            tag = f"p={p},a={a}"
            if a == 0:
                res.add(f"{tag} zero gap", rep.exact and rep.max_gap == 0, f"gap {rep.max_gap}")
            else:
                res.add(f"{tag} gap <= 1e-8", rep.max_gap <= 1e-8, f"gap {float(rep.max_gap):.1e}")
            for side, total in (("Q", rep.sum_Q), ("MP", rep.sum_MP)):
                res.add(f"{tag} sum {side} = 1", abs(float(total) - 1) <= 1e-12, f"{float(total)!r}")


def _per_step_rate(table, m_lo: int, m_hi: int) -> float:
    errs = {m: float(e) for m, _, e in table}
    return (errs[m_hi] / errs[m_lo]) ** (1 / (m_hi - m_lo))


@_timed(3, "penalization ratios converge at the predicted rates")
def criterion_3(res: CriterionResult):
    q = Q("1/4", "1/4", "1/2")
    gamma = characterize(q).gamma
    prob = pen.PenalizationProblem(q, pen.poly_geometric(1, Fraction(1, 2)), pen.z_equals(2), 1)
    lim = pen.limit_ratio(prob)
    m60 = dict((m, e) for m, _, e in lim.table)[60]
    res.add("s=1/2 limit 2/3", lim.limit == Fraction(2, 3), str(lim.limit))
    res.add("s=1/2 error at m=60 <= 1e-6", m60 <= 1e-6, f"{float(m60):.1e}")
    res.add("s=1/2 errors decreasing", pen._decreasing(lim.errors()), str(lim.errors()[-5:]))
    # with s equal to kappa the ratio is constant, so the rate is read off s = 3/10
    qf = OffspringDistribution.of([0.25, 0.25, 0.5])
    witness = pen.PenalizationProblem(qf, pen.poly_geometric(1, 0.3), pen.z_equals(2), 1)
    wl = pen.limit_ratio(witness, m_schedule=tuple(range(30, 61)))
    rate = _per_step_rate(wl.table, 30, 60)
    res.add("decay rate within 20% of gamma", abs(rate / float(gamma) - 1) <= 0.2,
            f"rate {rate:.4f} vs gamma {float(gamma)}")
    res.add("decay witness converges to 2/3", abs(float(wl.limit) - 2 / 3) < 1e-15 and wl.converged,
            f"error {wl.errors()[-1]:.1e}")

    q1 = Q(0, "1/2", "1/2")
    l1 = pen.limit_ratio(pen.PenalizationProblem(q1, pen.poly_geometric(1, Fraction(1, 2)), pen.z_equals(1), 1))
    res.add("a_min=1 limit 1", l1.limit == 1 and l1.errors()[-1] <= 1e-6, f"error {l1.errors()[-1]:.1e}")

    q2 = Q(0, 0, "1/2", "1/2")
    l2 = pen.limit_ratio(pen.PenalizationProblem(q2, pen.poly_geometric(1, 0.5), pen.z_equals(2), 1))
    slopes = l2.log_slopes()
    res.add("a_min=2 converged by m=8", l2.limit == 1 and l2.log_errors[-1] < math.log(1e-6),
            f"log error {l2.log_errors[-1]:.1f}")
    res.add("a_min=2 log-log slope >= 1.5", bool(slopes) and min(slopes) >= 1.5,
            "slopes " + ", ".join(f"{s:.2f}" for s in slopes))

    qc = Q("1/2", 0, "1/2")
    lc = pen.limit_ratio(pen.PenalizationProblem(qc, pen.poly_geometric(1, 1), pen.z_equals(2), 2))
    best = min(e for m, _, e in lc.table if m <= 200)
    res.add("critical limit 1/2", lc.limit == Fraction(1, 2), str(lc.limit))
    res.add("critical error <= 1e-4 by m=200", best <= 1e-4, f"{float(best):.1e}")


@_timed(4, "Laplace p=1, a=0 ratios are m-independent")
def criterion_4(res: CriterionResult):
    # the sub-critical Laplace weight lives on the conjugate law, so its oracle does too
    cases = (("schroeder", Q("1/4", "1/4", "1/2"), False, pen.z_in((1, 2)), 2),
             ("subcritical", Q("1/2", "1/4", "1/4"), True, pen.z_equals(1), 2))
    for name, q, conj, event, n in cases:
        ref = conjugate(q) if conj else q
        law = generation_law(ref, n)
        oracle = sum(z * w for z, w in enumerate(law) if event.contains(z)) / ref.mean**n
        prob = pen.PenalizationProblem(q, pen.poly_laplace(1, 0), event, n)
        values = [pen.ratio(prob, m) for m in (0, 1, 2, 5, 10)]
        res.add(f"{name} ratio exact and constant", all(v == oracle for v in values),
                f"oracle {oracle}, got {sorted(set(map(str, values)))}")


@_timed(5, "composition identities")
def criterion_5(res: CriterionResult):
    failures, count = [], 0
    for w in range(1, 6):
        for k in range(2, 5):
            for t in itertools.product(range(7), repeat=k):
                count += 1
                if not check_somme_Hk(w, t):
                    failures.append((w, t))
    res.add("sum of H_k over the grid", not failures, f"{count} cases, failures {failures[:3]}")
    q = Q("1/4", "1/4", "1/2")
    for a in (0, 1.0):
        bad, total = [], 0
        for n in (1, 2):
            table = mg.a_table(q, 4, n, a)
            for p in range(1, 5):
                for i in range(1, p + 1):
                    for part in itertools.product(range(1, p + 1), repeat=i):
                        total += 1
                        rep = coefficient_identity(table, p, part, tol=1e-9)
                        if not rep:
                            bad.append((n, p, part, rep.lhs, rep.rhs))
        res.add(f"coefficient identity a={a}", not bad, f"{total} cases, failures {bad[:2]}")


@_timed(6, "Schroeder equation and the large-a limit of phi")
def criterion_6(res: CriterionResult):
    for name in ("schroeder", "amin1"):
        L = laplace_transform(fixture(name))
        worst = max(L.schroeder_residual(0.1 * i) for i in range(31))
        res.add(f"{name} residual <= 1e-7", worst <= 1e-7, f"max {worst:.1e}")
    q = fixture("schroeder")
    L = laplace_transform(q)
    kappa = float(characterize(q).kappa)
    gap = abs(L.phi(50.0) - kappa)
    res.add("|phi(50) - kappa| <= 1e-6", gap <= 1e-6, f"gap {gap:.3e}")


@_timed(7, "uniqueness system F C = M")
def criterion_7(res: CriterionResult):
    q = Q("1/4", "1/4", "1/2")
    for p in range(1, 5):
        u = mg.uniqueness_solve(q, p)
        res.add(f"p={p} det F != 0", u.det_F != 0, str(u.det_F))
        res.add(f"p={p} C triangular", u.triangular)
        res.add(f"p={p} matches constructive coefficients", u.matches)
        res.add(f"p={p} P_1(x) = x", u.polynomial(1) == [1], str(u.polynomial(1)))


@_timed(8, "spine sampler agrees with the exact shape law")
def criterion_8(res: CriterionResult, n_samples: int = 100_000, seed: int = 0, budget: float = 60.0):
    q = Q("1/4", "1/4", "1/2")
    start = time.perf_counter()
    for p in (0, 1, 2):
        law = SpineLaw(q, p, 0)
        stats = spine_statistics(law, 6, n_samples, seed)
        res.add(f"p={p} type mass = p in every generation", stats.mass_conserved())
        checks = compare_shapes(stats, law, min_prob=1e-3)
        bad = [c for c in checks if not c.passed]
        worst = max(abs(c.z_score) for c in checks)
        res.add(f"p={p} shapes within 3 sigma", checks and not bad,
                f"{len(checks)} shapes, max |z| {worst:.2f}")
    elapsed = time.perf_counter() - start
    res.add("runtime <= 60 s", elapsed <= budget, f"{elapsed:.1f} s")


@_timed(9, "conjugation bridge")
def criterion_9(res: CriterionResult):
    q = Q("1/2", "1/4", "1/4")
    qbar = conjugate(q)
    res.add("conjugate", qbar.probs == Q("1/4", "1/4", "1/2").probs, str(qbar))
    res.add("involution", conjugate(qbar).probs == q.probs)
    dens = pen.density_check(q, 2)
    res.add("density identity on height-2 trees", dens.passed and dens.exact,
            f"{dens.trees_checked} trees, gap {dens.max_gap}")
    n = 1
    law = generation_law(q, n)
    for k in (1, 2):
        oracle = k * law[k] / q.mean**n
        for s in (0, Fraction(1, 2), Fraction(3, 2)):
            prob = pen.PenalizationProblem(q, pen.poly_geometric(1, s), pen.z_equals(k), n)
            _, err, _ = pen.ratio_error(prob, 60, oracle)
            res.add(f"Z_1={k}, s={s} limit E[Z_n/mu^n; Z_1={k}]", err <= 1e-6, f"error {float(err):.1e}")


@_timed(10, "critical moment polynomial")
def criterion_10(res: CriterionResult):
    q = Q("1/2", 0, "1/2")
    poly = critical_moment_polynomial(q, 2)
    res.add("degree 1", poly.degree == 1, str(poly.coeffs))
    for n in (3, 4, 5):
        value = expected_hilbert(generation_law(q, n), 2)
        res.add(f"n={n}", poly(n) == value, f"{poly(n)} vs {value}")


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10)


def run_all(numbers=None) -> list:
    return [c() for c in CRITERIA if numbers is None or c.number in numbers]
