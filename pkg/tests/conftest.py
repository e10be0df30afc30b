"""Shared fixtures and generators for the test suite.

Random structures are drawn from seeded generators so every run sees the
same cases; magnitude screens keep sampled values in a range where the
documented floating-point tolerances are meaningful.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from lpvembed import builtin_example, validate_nlfr
from lpvembed.expr import Expression, FuncFactor, GuardedQuotient, Term

FUNC_NAMES = ("sin", "cos", "tanh", "exp", "sinh", "cosh")
BOUNDED_FUNCS = ("sin", "cos", "tanh")


@pytest.fixture(scope="session")
def msd_raw():
    return builtin_example("msd2dof")


@pytest.fixture(scope="session")
def msd_model(msd_raw):
    return validate_nlfr(msd_raw)


# --- random expressions -------------------------------------------------------


def random_term(rng, n_vars, bound=150.0):
    """One random term whose magnitude stays below `bound` on |z| <= 3."""
    for _ in range(80):
        coeff = float(rng.uniform(-2.0, 2.0))
        exps = tuple(int(v) for v in rng.integers(0, 3, n_vars))
        if sum(exps) > 4:
            continue
        factors = []
        for _ in range(int(rng.integers(0, 3))):
            name = FUNC_NAMES[int(rng.integers(0, len(FUNC_NAMES)))]
            if name in BOUNDED_FUNCS:
                w = rng.uniform(-2.0, 2.0, n_vars)
                b = float(rng.uniform(-1.0, 1.0))
            else:
                w = rng.uniform(-0.3, 0.3, n_vars)
                b = float(rng.uniform(-0.5, 0.5))
            w = w * (rng.random(n_vars) < 0.6)
            factors.append(FuncFactor(name, tuple(float(x) for x in w), b))
        est = abs(coeff) * 3.0 ** sum(exps)
        for f in factors:
            if f.name not in BOUNDED_FUNCS:
                est *= math.exp(3.0 * sum(abs(x) for x in f.weights) + abs(f.bias))
        if est <= bound:
            return Term(coeff, exps, tuple(factors))
    return Term(float(rng.uniform(-2.0, 2.0)), (0,) * n_vars, ())


def random_expression(rng, n_vars, max_terms=6, bound=150.0):
    k = int(rng.integers(1, max_terms + 1))
    return Expression.from_terms(
        [random_term(rng, n_vars, bound) for _ in range(k)], n_vars
    )


def random_expression_vector(rng, n_w, n_z, max_terms=5, bound=100.0):
    return tuple(random_expression(rng, n_z, max_terms, bound) for _ in range(n_w))


def central_difference(e, z, i, h):
    zp = list(z)
    zm = list(z)
    zp[i - 1] += h
    zm[i - 1] -= h
    return (e.evaluate(zp) - e.evaluate(zm)) / (2.0 * h)


# --- random toy models ---------------------------------------------------------


def random_nlfr_raw(rng, n_x=None, n_u=None, n_y=None, n_w=None, n_z=None,
                    f_rows=None, feedback_scale=0.3):
    """Raw model-file content of a random stable toy."""
    n_x = n_x or int(rng.integers(1, 5))
    n_u = n_u or int(rng.integers(1, 3))
    n_y = n_y or int(rng.integers(1, 3))
    n_w = n_w or int(rng.integers(1, 3))
    n_z = n_z or int(rng.integers(1, 3))
    A = rng.uniform(-1.0, 1.0, (n_x, n_x))
    shift = float(np.max(np.linalg.eigvals(A).real)) + float(rng.uniform(0.5, 1.5))
    A = A - shift * np.eye(n_x)
    raw = {
        "dims": {"n_x": n_x, "n_u": n_u, "n_y": n_y, "n_w": n_w, "n_z": n_z},
        "A": A.tolist(),
        "Bw": (feedback_scale * rng.uniform(-1.0, 1.0, (n_x, n_w))).tolist(),
        "Bu": rng.uniform(-1.0, 1.0, (n_x, n_u)).tolist(),
        "Cz": rng.uniform(-1.0, 1.0, (n_z, n_x)).tolist(),
        "Cy": rng.uniform(-1.0, 1.0, (n_y, n_x)).tolist(),
        "Dzu": (0.2 * rng.uniform(-1.0, 1.0, (n_z, n_u))).tolist(),
        "Dyw": (0.2 * rng.uniform(-1.0, 1.0, (n_y, n_w))).tolist(),
        "Dyu": (0.2 * rng.uniform(-1.0, 1.0, (n_y, n_u))).tolist(),
        "f": f_rows if f_rows is not None else
             [str(gentle_nonlinearity(rng, n_z)) for _ in range(n_w)],
    }
    return raw


def gentle_nonlinearity(rng, n_z):
    """Small polynomial-plus-sine nonlinearity that keeps toys well-behaved."""
    terms = []
    for _ in range(int(rng.integers(1, 4))):
        kind = int(rng.integers(0, 3))
        coeff = float(rng.uniform(-0.15, 0.15))
        if kind == 0:
            j = int(rng.integers(0, n_z))
            exps = tuple(2 if k == j else 0 for k in range(n_z))
            terms.append(Term(coeff, exps, ()))
        elif kind == 1:
            j = int(rng.integers(0, n_z))
            exps = tuple(1 if k == j else 0 for k in range(n_z))
            w = rng.uniform(-1.5, 1.5, n_z) * (rng.random(n_z) < 0.7)
            fac = FuncFactor("sin", tuple(float(v) for v in w), 0.0)
            terms.append(Term(coeff, exps, (fac,)))
        else:
            j1 = int(rng.integers(0, n_z))
            j2 = int(rng.integers(0, n_z))
            exps = [0] * n_z
            exps[j1] += 1
            exps[j2] += 1
            terms.append(Term(coeff, tuple(exps), ()))
    return Expression.from_terms(terms, n_z)


# --- guard continuity sweep ----------------------------------------------------


def guard_sweep_results(q: GuardedQuotient, rng, n_contexts=10, n_grid=401):
    """Sweep z_i through the guard band in several random contexts.

    Returns (max consecutive jump, allowed bound) per context.  The bound is
    C * tau_eff with C the estimated second derivative of the numerator,
    widened by the resolution of the measurement itself: the grid places
    the seam only to within one cell, and near the guard the quotient value
    carries irreducible floating-point cancellation noise.  That noise is
    measured in place, as the max consecutive fluctuation of quotient-branch
    pairs away from the seam, where the true entry varies by at most
    C * step per cell (orders of magnitude below any genuine discontinuity).
    """
    n = q.numerator.n_vars
    i = q.divisor_index
    out = []
    for _ in range(n_contexts):
        base = rng.uniform(-2.0, 2.0, n)
        base[i - 1] = 0.0
        tau_eff = q.tau * (1.0 + float(np.max(np.abs(base))))
        grid = np.linspace(-10.0 * tau_eff, 10.0 * tau_eff, n_grid)
        step = grid[1] - grid[0]
        Z = np.tile(base, (n_grid, 1))
        Z[:, i - 1] = grid
        v = q.evaluate_batch(Z)
        jumps = np.abs(np.diff(v))
        jump = float(np.max(jumps))
        crossing = np.diff((np.abs(grid) > tau_eff).astype(int)) != 0
        noise = float(np.max(jumps[~crossing])) if np.any(~crossing) else 0.0
        h = 1e-3
        Zp = Z.copy()
        Zp[:, i - 1] += h
        Zm = Z.copy()
        Zm[:, i - 1] -= h
        curv = np.abs(
            q.derivative.evaluate_batch(Zp) - q.derivative.evaluate_batch(Zm)
        ) / (2.0 * h)
        bound = (
            float(np.max(curv)) * (tau_eff + step)
            + 4.0 * noise
            + 1e-13 * (1.0 + float(np.max(np.abs(v))))
        )
        out.append((jump, bound))
    return out


def assert_guard_continuous(q, rng, n_contexts=10):
    for jump, bound in guard_sweep_results(q, rng, n_contexts):
        assert jump <= bound, f"guard jump {jump:.3e} exceeds bound {bound:.3e}"


# --- equality helpers ------------------------------------------------------------


def assert_expr_close(a: Expression, b: Expression, rtol=1e-14):
    """Structural equality up to tiny coefficient rounding."""
    assert a.n_vars == b.n_vars
    assert len(a.terms) == len(b.terms), f"{a} vs {b}"
    for ta, tb in zip(a.terms, b.terms):
        assert ta.exponents == tb.exponents, f"{a} vs {b}"
        assert ta.factors == tb.factors, f"{a} vs {b}"
        assert ta.coeff == pytest.approx(tb.coeff, rel=rtol, abs=1e-300), f"{a} vs {b}"
