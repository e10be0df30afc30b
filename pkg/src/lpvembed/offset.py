"""Propagation of a constant nonlinearity offset to input/output corrections.

When the static nonlinearity carries a constant part c = f(0) != 0, the
core model (with the offset stripped) is driven in shifted coordinates.
The input shift d is chosen so that its steady-state effect on the
nonlinearity input z cancels the offset's:

    G2_0 d + G4_0 c = 0,

where G2_0 is the DC gain from u to z and G4_0 the DC gain from w to z.
The corrected signals are then

    u_corrected = u - d
    y           = y_corrected + y0,   y0 = G3_0 c + G1_0 d,

which makes the offset-free model exactly equivalent to the original (the
state trajectories differ by the constant shift A^-1 (Bw c + Bu d)).  A
solution d exists whenever G4_0 c lies in the column space of G2_0; the
minimum-norm least-squares solution is the deterministic canonical pick.

DC gains require A to be invertible; the stability check on A is advisory
unless an offset actually has to be propagated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ColumnSpaceViolation,
    EigenvalueFailure,
    HurwitzWarning,
    SingularA,
)
from .model import NlfrModel

__all__ = [
    "DcGains",
    "OffsetSolution",
    "dc_gains",
    "check_hurwitz",
    "solve_offsets",
    "correct_inputs",
    "correct_outputs",
    "restore_outputs",
]

#: Condition number above which A is treated as numerically singular.
_COND_LIMIT = 1e12

#: Relative consistency tolerance for the column-space membership test.
OFFSET_RTOL = 1e-9

#: Margin on eigenvalue real parts for the strict Hurwitz test.
HURWITZ_MARGIN = -1e-9


@dataclass(frozen=True, eq=False)
class DcGains:
    """Steady-state gains of the four LTI channel pairings.

    G1_0: u -> y,  G2_0: u -> z,  G3_0: w -> y,  G4_0: w -> z,
    each equal to D - C A^-1 B for its channel pairing.
    """

    G1_0: np.ndarray
    G2_0: np.ndarray
    G3_0: np.ndarray
    G4_0: np.ndarray


@dataclass(frozen=True, eq=False)
class OffsetSolution:
    """Input shift d, output correction y0, and the consistency residual."""

    d: np.ndarray
    y0: np.ndarray
    residual: float


def dc_gains(model: NlfrModel) -> DcGains:
    """DC gains via one linear solve per input block; requires invertible A."""
    A = model.A
    sign, _ = np.linalg.slogdet(A)
    if sign == 0.0:
        raise SingularA("A is singular: the model has a pole at s = 0")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularA(
            f"A is numerically singular (condition estimate {cond:.3e})"
        )
    ai_bu = np.linalg.solve(A, model.Bu)
    ai_bw = np.linalg.solve(A, model.Bw)
    g1 = model.Dyu - model.Cy @ ai_bu
    g2 = model.Dzu - model.Cz @ ai_bu
    g3 = model.Dyw - model.Cy @ ai_bw
    g4 = -model.Cz @ ai_bw  # Dzw is structurally zero
    for g in (g1, g2, g3, g4):
        g.setflags(write=False)
    return DcGains(G1_0=g1, G2_0=g2, G3_0=g3, G4_0=g4)


def check_hurwitz(A: np.ndarray, margin: float = HURWITZ_MARGIN):
    """(is_hurwitz, max eigenvalue real part) with a strict numeric margin."""
    try:
        eig = np.linalg.eigvals(np.asarray(A, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise EigenvalueFailure(f"eigenvalue computation failed: {exc}") from exc
    max_re = float(np.max(eig.real))
    return max_re < margin, max_re


def solve_offsets(
    gains: DcGains, c, rel_tol: float = OFFSET_RTOL
) -> OffsetSolution:
    """Solve for the input/output corrections induced by the offset c.

    c = 0 takes the exact skip path (zero corrections, zero residual).
    Otherwise d is the minimum-norm least-squares solution of
    G2_0 d = -G4_0 c; the solution is rejected when the residual shows
    G4_0 c to be outside the column space of G2_0.
    """
    c = np.asarray(c, dtype=float)
    n_u = gains.G2_0.shape[1]
    n_y = gains.G1_0.shape[0]
    if not np.any(c != 0.0):
        d = np.zeros(n_u)
        y0 = np.zeros(n_y)
        d.setflags(write=False)
        y0.setflags(write=False)
        return OffsetSolution(d=d, y0=y0, residual=0.0)
    target = -gains.G4_0 @ c
    d, *_ = np.linalg.lstsq(gains.G2_0, target, rcond=None)
    unreachable = gains.G2_0 @ d - target
    residual = float(np.linalg.norm(unreachable))
    if residual > rel_tol * (1.0 + float(np.linalg.norm(target))):
        raise ColumnSpaceViolation(
            f"offset target is outside the column space of the u->z DC gain "
            f"(residual {residual:.3e}, unreachable component {unreachable})",
            residual=residual,
            unreachable=unreachable,
        )
    y0 = gains.G3_0 @ c + gains.G1_0 @ d
    d.setflags(write=False)
    y0.setflags(write=False)
    return OffsetSolution(d=d, y0=y0, residual=residual)


def solve_offsets_for(model: NlfrModel, c, warn: bool = True) -> OffsetSolution:
    """Full offset pipeline for a model: skip path, gains, stability advisory.

    The stability requirement only backs the steady-state interpretation;
    the correction algebra stays well-defined for any invertible A, so a
    non-Hurwitz A produces a warning rather than a failure.
    """
    c = np.asarray(c, dtype=float)
    if not np.any(c != 0.0):
        d = np.zeros(model.Bu.shape[1])
        y0 = np.zeros(model.Cy.shape[0])
        d.setflags(write=False)
        y0.setflags(write=False)
        return OffsetSolution(d=d, y0=y0, residual=0.0)
    gains = dc_gains(model)
    if warn:
        ok, max_re = check_hurwitz(model.A)
        if not ok:
            warnings.warn(
                f"A is not Hurwitz (max eigenvalue real part {max_re:.3e}); "
                "offset corrections are propagated anyway but their "
                "steady-state interpretation is not guaranteed",
                HurwitzWarning,
                stacklevel=2,
            )
    return solve_offsets(gains, c)


def correct_inputs(u, sol: OffsetSolution) -> np.ndarray:
    """Samplewise u - d (rows are samples)."""
    return np.asarray(u, dtype=float) - sol.d


def correct_outputs(y, sol: OffsetSolution) -> np.ndarray:
    """Samplewise y - y0: raw outputs into corrected coordinates."""
    return np.asarray(y, dtype=float) - sol.y0


def restore_outputs(y_corrected, sol: OffsetSolution) -> np.ndarray:
    """Samplewise y_corrected + y0: back to the raw output coordinates."""
    return np.asarray(y_corrected, dtype=float) + sol.y0
