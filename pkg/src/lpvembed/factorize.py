"""Ordered factorization of a static nonlinearity into a scheduling map.

Given a vector nonlinearity f with f = f_tilde + c and f_tilde(0) = 0, the
ordered scheme writes each row as

    f_tilde(z) = sum_i  entry_i(z_1, ..., z_i) * z_i

by taking successive restriction differences along a chosen variable
ordering and dividing each difference by its variable.  The division is
exact whenever every term of the difference carries the variable; otherwise
the entry is a :class:`~lpvembed.expr.GuardedQuotient`, whose derivative
branch keeps the entry finite and continuous through z_i = 0.  Entries with
a structurally empty numerator are stored as ``None`` (zero) and later
pruned from the LPV basis.

The resulting grid is indexed by the original variable numbering; only the
construction follows the ordering.  Different orderings give different but
equally valid scheduling maps; the defining property, checked by
:func:`check_reconstruction`, is

    evaluate(entries, z) @ z + c == f(z)      (to floating-point accuracy).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidOrdering, ModelFormatError, NonzeroAtOrigin
from .expr import DEFAULT_GUARD_TAU, Expression, GuardedQuotient, parse

__all__ = [
    "SchedulingMap",
    "ReconstructionReport",
    "extract_offset",
    "factorize",
    "check_reconstruction",
    "schedule_to_raw",
    "schedule_from_raw",
]

#: Relative tolerance of the reconstruction identity; pure evaluation noise.
RECONSTRUCTION_RTOL = 1e-12


def extract_offset(f: Sequence[Expression]):
    """Split f into (f_tilde, c) with c = f(0) and f_tilde(0) = 0 exactly.

    c is computed by evaluation; subtracting it as a constant term makes the
    remainder vanish at the origin bit-exactly.
    """
    rows = tuple(f)
    if not rows:
        raise ValueError("empty nonlinearity")
    n_z = rows[0].n_vars
    origin = (0.0,) * n_z
    c = np.array([row.evaluate(origin) for row in rows])
    f_tilde = tuple(
        row - Expression.constant(cv, n_z) if cv != 0.0 else row
        for row, cv in zip(rows, c)
    )
    c.setflags(write=False)
    return f_tilde, c


def _validate_ordering(ordering, n_z: int) -> tuple[int, ...]:
    ordering = tuple(int(i) for i in ordering)
    if sorted(ordering) != list(range(1, n_z + 1)):
        raise InvalidOrdering(
            f"{ordering} is not a permutation of 1..{n_z}"
        )
    return ordering


def _check_removable(numerator: Expression, i: int):
    """Numerically verify the numerator vanishes on the plane z_i = 0."""
    rng = np.random.default_rng(20240915)
    probes = rng.uniform(-1.0, 1.0, size=(8, numerator.n_vars))
    probes[:, i - 1] = 0.0
    vals = numerator.evaluate_batch(probes)
    scale_probe = probes.copy()
    scale_probe[:, i - 1] = 1.0
    scale = np.max(np.abs(numerator.evaluate_batch(scale_probe)))
    if np.max(np.abs(vals)) > 1e-9 * (1.0 + scale):
        raise ModelFormatError(
            f"quotient numerator does not vanish on z{i} = 0: "
            f"max |N| = {np.max(np.abs(vals)):.3e}"
        )


@dataclass(frozen=True, eq=False)
class SchedulingMap:
    """n_w x n_z grid of scheduling entries plus the constant offset.

    ``entries[r][i]`` is indexed 0-based internally; ``None`` marks a
    structurally zero entry.  ``ordering`` records the 1-based variable
    order used during construction.  ``c`` is the constant offset removed
    from the nonlinearity (f = entries . z + c).
    """

    entries: tuple[tuple[object, ...], ...]
    ordering: tuple[int, ...]
    c: np.ndarray

    @property
    def n_w(self) -> int:
        return len(self.entries)

    @property
    def n_z(self) -> int:
        return len(self.entries[0])

    def entry(self, r: int, i: int):
        """Entry at output row r, variable column i (both 1-based)."""
        return self.entries[r - 1][i - 1]

    def channels(self) -> tuple[tuple[int, int], ...]:
        """(r, i) pairs of nonzero entries, row-major, 1-based."""
        return tuple(
            (r + 1, i + 1)
            for r, row in enumerate(self.entries)
            for i, e in enumerate(row)
            if e is not None
        )

    def evaluate(self, z: Sequence[float]) -> np.ndarray:
        """The scheduling matrix p = entries(z), shape (n_w, n_z)."""
        out = np.zeros((self.n_w, self.n_z))
        for r, row in enumerate(self.entries):
            for i, e in enumerate(row):
                if e is not None:
                    out[r, i] = e.evaluate(z)
        return out

    def evaluate_batch(self, points) -> np.ndarray:
        Z = np.asarray(points, dtype=float)
        out = np.zeros((Z.shape[0], self.n_w, self.n_z))
        for r, row in enumerate(self.entries):
            for i, e in enumerate(row):
                if e is not None:
                    out[:, r, i] = e.evaluate_batch(Z)
        return out


def factorize(
    f_tilde: Sequence[Expression],
    ordering: Sequence[int] | None = None,
    c: np.ndarray | None = None,
    tau: float = DEFAULT_GUARD_TAU,
) -> SchedulingMap:
    """Factorize a vanishing-at-zero nonlinearity along a variable ordering.

    For each output row and each position k in the ordering, the numerator
    is the difference between the row restricted to the first k ordered
    variables and to the first k-1; the entry is the exact quotient by the
    k-th ordered variable when possible, else a guarded quotient with the
    symbolic partial derivative as its z_i = 0 branch.

    Raises :class:`NonzeroAtOrigin` when some row has |f_tilde(0)| > 1e-14
    (run :func:`extract_offset` first).
    """
    rows = tuple(f_tilde)
    if not rows:
        raise ValueError("empty nonlinearity")
    n_z = rows[0].n_vars
    for row in rows:
        if row.n_vars != n_z:
            raise ModelFormatError("nonlinearity rows have differing arity")
    if ordering is None:
        ordering = range(1, n_z + 1)
    ordering = _validate_ordering(ordering, n_z)
    if c is None:
        c_arr = np.zeros(len(rows))
    else:
        c_arr = np.array(c, dtype=float)
        if c_arr.shape != (len(rows),):
            raise ModelFormatError(
                f"offset vector has shape {c_arr.shape}, expected ({len(rows)},)"
            )
    c_arr.setflags(write=False)

    origin = (0.0,) * n_z
    for r, row in enumerate(rows):
        v = row.evaluate(origin)
        if abs(v) > 1e-14:
            raise NonzeroAtOrigin(
                f"row {r + 1} evaluates to {v:.3e} at z = 0; "
                "extract the constant offset first"
            )

    # Position k of the ordering handles original variable ordering[k-1];
    # inv maps an original index back to its position.
    inv = [0] * n_z
    for k, m in enumerate(ordering):
        inv[m - 1] = k + 1
    inv = tuple(inv)

    grid = []
    for row in rows:
        g = row.permute(ordering)
        row_entries: list = [None] * n_z
        prev = g.restrict(0)
        for k in range(1, n_z + 1):
            cur = g.restrict(k)
            num_zeta = cur - prev
            prev = cur
            if not num_zeta.terms:
                continue
            i_orig = ordering[k - 1]
            num = num_zeta.permute(inv)
            exact = num.try_exact_divide(i_orig)
            if exact is not None:
                row_entries[i_orig - 1] = exact
            else:
                _check_removable(num, i_orig)
                row_entries[i_orig - 1] = GuardedQuotient(
                    num, i_orig, num.partial(i_orig), tau
                )
        grid.append(tuple(row_entries))
    return SchedulingMap(tuple(grid), ordering, c_arr)


@dataclass(frozen=True)
class ReconstructionReport:
    """Outcome of sampling the reconstruction identity entries.z + c = f."""

    max_abs_error: float
    max_rel_error: float
    row_max_rel_error: tuple[float, ...]
    worst_sample: int
    rel_tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.rel_tol

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        rows = ", ".join(f"{v:.3e}" for v in self.row_max_rel_error)
        return (
            f"reconstruction {status}: max abs {self.max_abs_error:.3e}, "
            f"max rel {self.max_rel_error:.3e} (tol {self.rel_tol:.1e}), "
            f"per-row rel [{rows}], worst sample #{self.worst_sample}"
        )


def check_reconstruction(
    m: SchedulingMap,
    f: Sequence[Expression],
    samples,
    rel_tol: float = RECONSTRUCTION_RTOL,
) -> ReconstructionReport:
    """Sample |entries(z) @ z + c - f(z)| / (1 + |f(z)|) over the points."""
    Z = np.asarray(samples, dtype=float)
    P = m.evaluate_batch(Z)
    recon = np.einsum("nwz,nz->nw", P, Z) + m.c
    F = np.column_stack([row.evaluate_batch(Z) for row in f])
    abs_err = np.abs(recon - F)
    rel_err = abs_err / (1.0 + np.abs(F))
    worst = int(np.argmax(np.max(rel_err, axis=1)))
    return ReconstructionReport(
        max_abs_error=float(np.max(abs_err)),
        max_rel_error=float(np.max(rel_err)),
        row_max_rel_error=tuple(float(v) for v in np.max(rel_err, axis=0)),
        worst_sample=worst,
        rel_tol=rel_tol,
    )


# --- model-file (de)serialization --------------------------------------------


def schedule_to_raw(m: SchedulingMap) -> dict:
    """Schedule as plain JSON-ready data: printed expressions + guard metadata."""
    entries = []
    for row in m.entries:
        out_row = []
        for i, e in enumerate(row):
            if e is None:
                out_row.append({"type": "zero"})
            elif isinstance(e, GuardedQuotient):
                out_row.append(
                    {
                        "type": "quotient",
                        "numerator": str(e.numerator),
                        "derivative": str(e.derivative),
                        "divisor": e.divisor_index,
                        "tau": e.tau,
                    }
                )
            else:
                out_row.append({"type": "exact", "expr": str(e)})
        entries.append(out_row)
    return {
        "ordering": list(m.ordering),
        "c": [float(v) for v in m.c],
        "entries": entries,
    }


def schedule_from_raw(raw: dict, n_w: int, n_z: int) -> SchedulingMap:
    """Rebuild a SchedulingMap from file data, re-validating its structure.

    Quotient entries must carry a numerator that vanishes on z_i = 0 and a
    derivative that matches the recomputed symbolic partial exactly.
    """
    try:
        ordering = _validate_ordering(raw["ordering"], n_z)
        c = np.array([float(v) for v in raw["c"]], dtype=float)
        rows_raw = raw["entries"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"malformed schedule block: {exc}") from exc
    if c.shape != (n_w,) or not np.all(np.isfinite(c)):
        raise ModelFormatError("schedule offset c has wrong length or bad values")
    if len(rows_raw) != n_w or any(len(r) != n_z for r in rows_raw):
        raise ModelFormatError(
            f"schedule grid is not {n_w} x {n_z}"
        )
    c.setflags(write=False)
    grid = []
    for r, row_raw in enumerate(rows_raw):
        row: list = []
        for i, cell in enumerate(row_raw, start=1):
            kind = cell.get("type")
            if kind == "zero":
                row.append(None)
            elif kind == "exact":
                row.append(parse(cell["expr"], n_z))
            elif kind == "quotient":
                num = parse(cell["numerator"], n_z)
                der = parse(cell["derivative"], n_z)
                divisor = int(cell["divisor"])
                tau = float(cell["tau"])
                if divisor != i:
                    raise ModelFormatError(
                        f"schedule entry ({r + 1},{i}) divides by z{divisor}"
                    )
                if not (tau > 0.0 and np.isfinite(tau)):
                    raise ModelFormatError(
                        f"schedule entry ({r + 1},{i}) has invalid tau {tau}"
                    )
                if der != num.partial(divisor):
                    raise ModelFormatError(
                        f"schedule entry ({r + 1},{i}) derivative does not "
                        "match the numerator's partial derivative"
                    )
                _check_removable(num, divisor)
                row.append(GuardedQuotient(num, divisor, der, tau))
            else:
                raise ModelFormatError(
                    f"schedule entry ({r + 1},{i}) has unknown type {kind!r}"
                )
        grid.append(tuple(row))
    return SchedulingMap(tuple(grid), ordering, c)
