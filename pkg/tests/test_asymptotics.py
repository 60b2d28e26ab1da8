import math

import numpy as np
import pytest

from colombeau_lab.asymptotics import (
    DEFAULT_GRID, EpsGrid, TabulatedNet, Valuation, check_moderate, check_negligible,
    fit_order, symbolic_valuation,
)
from colombeau_lab.eps_dsl import evaluate_many, parse

CORPUS = [
    "(pow eps -3)", "(exp (neg (/ 1 eps)))", "(sin (/ 1 eps))", "(* eps eps)", "1",
    "(+ eps (pow eps 2))", "(- eps eps)", "(atan (/ 1 eps))", "(* (pow eps -2) (cos (/ 1 eps)))",
    "(smoothstep (- 2 (/ 1 eps)))", "(/ 1 (+ 1 eps))", "(* (pow eps 5) (sin (/ 1 eps)))",
]


def test_grid_validation():
    with pytest.raises(ValueError):
        EpsGrid(ratio=1.5)
    with pytest.raises(ValueError):
        EpsGrid(k_min=5, k_max=5)
    with pytest.raises(ValueError):
        EpsGrid(ratio=0.1, k_max=400)
    g = DEFAULT_GRID
    assert g.eps[0] == 0.5 ** 4 and g.eps[-1] == 0.5 ** 40


def test_valuation_interval_is_ordered():
    with pytest.raises(ValueError):
        Valuation(2.0, 1.0)


@pytest.mark.parametrize("src,lo,hi", [
    ("(pow eps -3)", -3, -3),
    ("(exp (neg (/ 1 eps)))", math.inf, math.inf),
    ("(sin (/ 1 eps))", 0, math.inf),
])
def test_symbolic_valuation_examples(src, lo, hi):
    v = symbolic_valuation(parse(src))
    assert (v.lo, v.hi) == (lo, hi)


def test_sin_valuation_is_exactly_zero_along_peaks():
    # |sin(1/eps)| = 1 at eps = 1/(pi/2 + 2 pi k), so the lower end 0 is attained
    eps = 1 / (np.pi / 2 + 2 * np.pi * np.arange(1, 50))
    assert np.allclose(np.abs(np.sin(1 / eps)), 1.0, atol=1e-12)


def test_spatial_variable_rejected():
    with pytest.raises(ValueError):
        symbolic_valuation(parse("(* x1 eps)"))


def test_fit_order_examples():
    slope, resid = fit_order(parse("(* eps eps)"))
    assert slope == pytest.approx(2.0, abs=1e-9)
    slope, resid = fit_order(parse("(* (pow eps -3) (+ 2 (sin (/ 1 eps))))"))
    assert -3.2 <= slope <= -2.8
    assert fit_order(parse("1"))[0] == pytest.approx(0.0, abs=1e-12)


def test_fit_order_needs_samples():
    with pytest.raises(ValueError):
        fit_order(TabulatedNet(np.array([0.1, 0.01]), np.array([1.0, 2.0])))


def test_check_examples():
    assert check_negligible(parse("(exp (neg (/ 1 eps)))")).proven
    mod = check_moderate(parse("(exp (/ 1 eps))"))
    assert mod.refuted and mod.to_dict()["witnesses"]
    s = parse("(sin (/ 1 eps))")
    assert check_moderate(s).proven
    neg = check_negligible(s)
    assert neg.refuted and neg.to_dict()["witnesses"]


def test_verdict_json_shape():
    d = check_moderate(parse("(pow eps -2)")).to_dict()
    assert {"status", "slope", "residual", "witnesses", "rule_trace"} <= set(d)


def test_verdict_is_not_truthy():
    with pytest.raises(TypeError):
        bool(check_moderate(parse("eps")))


@pytest.mark.parametrize("src", CORPUS)
def test_negligible_implies_moderate(src):
    e = parse(src)
    if check_negligible(e).proven:
        assert check_moderate(e).proven


@pytest.mark.parametrize("src", CORPUS)
def test_valuation_soundness_on_grid(src):
    e = parse(src)
    v = symbolic_valuation(e)
    if not math.isfinite(v.lo):
        return
    eps = DEFAULT_GRID.eps
    vals = np.abs(evaluate_many(e, eps))
    bound = eps ** (v.lo - 0.1)
    c = max(1.0, float(np.max(vals[:4] / bound[:4])))
    assert np.all(vals <= 10 * c * bound)


@pytest.mark.parametrize("src", CORPUS)
def test_verdicts_are_deterministic(src):
    e = parse(src)
    assert check_moderate(e).to_dict() == check_moderate(e).to_dict()
    assert check_negligible(e).to_dict() == check_negligible(e).to_dict()


def test_tabulated_net_consistency():
    eps = DEFAULT_GRID.eps
    v = check_negligible(TabulatedNet(eps, eps ** 20))
    assert v.consistent
