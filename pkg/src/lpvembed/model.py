"""Model containers, dimension validation, and the JSON model-file format.

A nonlinear-LFR model is an LTI core in feedback with a static nonlinearity:

    xdot = A x + Bw w + Bu u
    z    = Cz x + Dzu u          (no w -> z feedthrough: Dzw = 0)
    y    = Cy x + Dyw w + Dyu u
    w    = f(z)

An LPV model keeps the nominal matrices plus one basis quadruple per
retained scheduling channel (r, i):

    Ak = Bw E_ri Cz,  Bk = Bw E_ri Dzu,  Ck = Dyw E_ri Cz,  Dk = Dyw E_ri Dzu

where E_ri has a single 1 at row r, column i, together with the scheduling
map and the constant input/output corrections (d, y0).

Both live on disk as a single self-describing JSON document with named
matrices stored as row-major arrays of arrays.  Matrices round-trip
bit-exactly (floats are written with shortest-repr precision); numeric
tolerances belong to analysis operations, never to the format layer.
Indices in the file (variable numbers, channel rows/columns, orderings)
are 1-based to match the expression variables z1, z2, ...
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    DimensionMismatch,
    ExpressionArityMismatch,
    ModelFormatError,
    NonFiniteEntry,
    NonzeroDzw,
)
from .expr import Expression, parse
from .factorize import SchedulingMap, schedule_from_raw, schedule_to_raw

__all__ = [
    "Dims",
    "NlfrModel",
    "BasisChannel",
    "LpvModel",
    "dims",
    "validate_nlfr",
    "serialize_nlfr",
    "validate_lpv",
    "serialize_lpv",
    "load_model",
    "load_nlfr",
    "load_lpv",
    "save_model",
]

_DIM_KEYS = ("n_x", "n_u", "n_y", "n_w", "n_z")

_MATRIX_SHAPES = {
    "A": ("n_x", "n_x"),
    "Bw": ("n_x", "n_w"),
    "Bu": ("n_x", "n_u"),
    "Cz": ("n_z", "n_x"),
    "Cy": ("n_y", "n_x"),
    "Dzu": ("n_z", "n_u"),
    "Dyw": ("n_y", "n_w"),
    "Dyu": ("n_y", "n_u"),
    "Dzw": ("n_z", "n_w"),
}


@dataclass(frozen=True)
class Dims:
    """Signal dimensions; n_p is the retained scheduling channel count."""

    n_x: int
    n_u: int
    n_y: int
    n_w: int
    n_z: int
    n_p: int = 0

    def __post_init__(self):
        for name in _DIM_KEYS:
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise DimensionMismatch(f"dimension {name} must be >= 1, got {v}")
        if not isinstance(self.n_p, int) or self.n_p < 0:
            raise DimensionMismatch(f"dimension n_p must be >= 0, got {self.n_p}")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _as_matrix(name: str, raw, rows: int, cols: int) -> np.ndarray:
    try:
        m = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"matrix {name} is not numeric: {exc}") from exc
    if m.shape != (rows, cols):
        raise DimensionMismatch(
            f"matrix {name} has shape {m.shape}, expected ({rows}, {cols})"
        )
    if not np.all(np.isfinite(m)):
        raise NonFiniteEntry(f"matrix {name} contains non-finite entries")
    return _freeze(m)


def _as_vector(name: str, raw, length: int) -> np.ndarray:
    try:
        v = np.array(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"vector {name} is not numeric: {exc}") from exc
    if v.shape != (length,):
        raise DimensionMismatch(
            f"vector {name} has shape {v.shape}, expected ({length},)"
        )
    if not np.all(np.isfinite(v)):
        raise NonFiniteEntry(f"vector {name} contains non-finite entries")
    return _freeze(v)


def _read_dims(raw: Mapping) -> dict:
    if "dims" not in raw:
        raise ModelFormatError("model file is missing the 'dims' block")
    d = raw["dims"]
    out = {}
    for key in _DIM_KEYS:
        if key not in d:
            raise ModelFormatError(f"dims block is missing {key}")
        v = d[key]
        if not isinstance(v, int) or v < 1:
            raise DimensionMismatch(f"dimension {key} must be >= 1, got {v}")
        out[key] = v
    return out


def _shape(dd: Mapping, name: str) -> tuple[int, int]:
    r, c = _MATRIX_SHAPES[name]
    return dd[r], dd[c]


@dataclass(frozen=True, eq=False)
class NlfrModel:
    """Validated nonlinear-LFR model; immutable after construction."""

    A: np.ndarray
    Bw: np.ndarray
    Bu: np.ndarray
    Cz: np.ndarray
    Cy: np.ndarray
    Dzu: np.ndarray
    Dyw: np.ndarray
    Dyu: np.ndarray
    f: tuple[Expression, ...]

    @property
    def dims(self) -> Dims:
        return Dims(
            n_x=self.A.shape[0],
            n_u=self.Bu.shape[1],
            n_y=self.Cy.shape[0],
            n_w=self.Bw.shape[1],
            n_z=self.Cz.shape[0],
            n_p=0,
        )


@dataclass(frozen=True, eq=False)
class BasisChannel:
    """Basis quadruple of one scheduling channel (r, i), 1-based indices."""

    r: int
    i: int
    Ak: np.ndarray
    Bk: np.ndarray
    Ck: np.ndarray
    Dk: np.ndarray


@dataclass(frozen=True, eq=False)
class LpvModel:
    """Affine LPV model: nominal LTI part + scheduling basis + offsets.

    The structural matrices Bw, Cz, Dzu, Dyw are retained so the scheduling
    input z = Cz x + Dzu u_corrected can be formed during self-scheduled
    simulation and so every basis quadruple stays verifiable by
    recomputation.
    """

    A: np.ndarray
    Bw: np.ndarray
    Bu: np.ndarray
    Cz: np.ndarray
    Cy: np.ndarray
    Dzu: np.ndarray
    Dyw: np.ndarray
    Dyu: np.ndarray
    basis: tuple[BasisChannel, ...]
    schedule: SchedulingMap
    d: np.ndarray
    y0: np.ndarray

    @property
    def n_p(self) -> int:
        return len(self.basis)

    @property
    def channels(self) -> tuple[tuple[int, int], ...]:
        """(r, i) of each retained channel, in basis order (row-major)."""
        return tuple((b.r, b.i) for b in self.basis)

    @property
    def dims(self) -> Dims:
        return Dims(
            n_x=self.A.shape[0],
            n_u=self.Bu.shape[1],
            n_y=self.Cy.shape[0],
            n_w=self.Bw.shape[1],
            n_z=self.Cz.shape[0],
            n_p=len(self.basis),
        )


def dims(model) -> Dims:
    """Dimension record of a validated model (n_p = 0 for NLFR models)."""
    return model.dims


# --- NLFR validation ---------------------------------------------------------


def validate_nlfr(raw: Mapping) -> NlfrModel:
    """Validate parsed model-file content and build an NlfrModel.

    Checks dimension consistency of every matrix (naming the offender),
    rejects any nonzero Dzw, rejects non-finite entries, and parses the
    nonlinearity rows, enforcing their count and arity.
    """
    dd = _read_dims(raw)
    mats = {}
    for name in ("A", "Bw", "Bu", "Cz", "Cy", "Dzu", "Dyw", "Dyu"):
        if name not in raw:
            raise ModelFormatError(f"model file is missing matrix {name}")
        mats[name] = _as_matrix(name, raw[name], *_shape(dd, name))
    if "Dzw" in raw:
        dzw = _as_matrix("Dzw", raw["Dzw"], *_shape(dd, "Dzw"))
        if np.any(dzw != 0.0):
            raise NonzeroDzw(
                "Dzw has nonzero entries; the nonlinearity must be explicit "
                "(no w -> z feedthrough)"
            )
    if "f" not in raw:
        raise ModelFormatError("model file is missing the nonlinearity 'f'")
    f_raw = raw["f"]
    if not isinstance(f_raw, (list, tuple)) or len(f_raw) != dd["n_w"]:
        raise ExpressionArityMismatch(
            f"nonlinearity must have n_w = {dd['n_w']} rows, "
            f"got {len(f_raw) if isinstance(f_raw, (list, tuple)) else type(f_raw).__name__}"
        )
    f = tuple(parse(text, dd["n_z"]) for text in f_raw)
    return NlfrModel(f=f, **mats)


def serialize_nlfr(model: NlfrModel) -> dict:
    d = model.dims
    return {
        "dims": {k: getattr(d, k) for k in _DIM_KEYS},
        "A": model.A.tolist(),
        "Bw": model.Bw.tolist(),
        "Bu": model.Bu.tolist(),
        "Cz": model.Cz.tolist(),
        "Cy": model.Cy.tolist(),
        "Dzu": model.Dzu.tolist(),
        "Dyw": model.Dyw.tolist(),
        "Dyu": model.Dyu.tolist(),
        "f": [str(row) for row in model.f],
    }


# --- LPV validation -----------------------------------------------------------


def _basis_quadruple(model_mats: Mapping, r: int, i: int):
    bw = model_mats["Bw"][:, r - 1]
    cz = model_mats["Cz"][i - 1, :]
    dzu = model_mats["Dzu"][i - 1, :]
    dyw = model_mats["Dyw"][:, r - 1]
    return (
        np.outer(bw, cz),
        np.outer(bw, dzu),
        np.outer(dyw, cz),
        np.outer(dyw, dzu),
    )


def validate_lpv(raw: Mapping) -> LpvModel:
    """Validate parsed LPV file content and build an LpvModel.

    Every basis quadruple is recomputed from (Bw, Cz, Dzu, Dyw) and its
    (r, i) index and must match the stored matrices exactly; the basis list
    must enumerate the nonzero schedule entries row-major.
    """
    dd = _read_dims(raw)
    mats = {}
    for name in ("A", "Bw", "Bu", "Cz", "Cy", "Dzu", "Dyw", "Dyu"):
        if name not in raw:
            raise ModelFormatError(f"model file is missing matrix {name}")
        mats[name] = _as_matrix(name, raw[name], *_shape(dd, name))
    if "Dzw" in raw:
        dzw = _as_matrix("Dzw", raw["Dzw"], *_shape(dd, "Dzw"))
        if np.any(dzw != 0.0):
            raise NonzeroDzw("Dzw has nonzero entries")
    for key in ("schedule", "basis", "d", "y0"):
        if key not in raw:
            raise ModelFormatError(f"LPV model file is missing {key!r}")

    schedule = schedule_from_raw(raw["schedule"], dd["n_w"], dd["n_z"])
    d = _as_vector("d", raw["d"], dd["n_u"])
    y0 = _as_vector("y0", raw["y0"], dd["n_y"])

    basis_raw = raw["basis"]
    if len(basis_raw) > dd["n_w"] * dd["n_z"]:
        raise DimensionMismatch(
            f"basis has {len(basis_raw)} channels, more than "
            f"n_w * n_z = {dd['n_w'] * dd['n_z']}"
        )
    n_p = raw["dims"].get("n_p")
    if n_p is not None and n_p != len(basis_raw):
        raise DimensionMismatch(
            f"dims.n_p = {n_p} disagrees with {len(basis_raw)} basis channels"
        )
    basis = []
    for k, b in enumerate(basis_raw):
        try:
            r, i = int(b["r"]), int(b["i"])
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"basis channel {k} malformed: {exc}") from exc
        if not (1 <= r <= dd["n_w"] and 1 <= i <= dd["n_z"]):
            raise ModelFormatError(
                f"basis channel {k} index ({r},{i}) out of range"
            )
        quads = {}
        for name, rows, cols in (
            ("Ak", dd["n_x"], dd["n_x"]),
            ("Bk", dd["n_x"], dd["n_u"]),
            ("Ck", dd["n_y"], dd["n_x"]),
            ("Dk", dd["n_y"], dd["n_u"]),
        ):
            quads[name] = _as_matrix(f"basis[{k}].{name}", b[name], rows, cols)
        expect = _basis_quadruple(mats, r, i)
        for name, exp in zip(("Ak", "Bk", "Ck", "Dk"), expect):
            if not np.array_equal(quads[name], exp):
                raise ModelFormatError(
                    f"basis channel {k} matrix {name} does not reconstruct "
                    f"from (Bw, Cz, Dzu, Dyw) at ({r},{i})"
                )
        basis.append(BasisChannel(r=r, i=i, **{k: _freeze(v) for k, v in quads.items()}))
    stored = tuple((b.r, b.i) for b in basis)
    if stored != schedule.channels():
        raise ModelFormatError(
            f"basis channels {stored} do not match the nonzero schedule "
            f"entries {schedule.channels()} in row-major order"
        )
    return LpvModel(basis=tuple(basis), schedule=schedule, d=d, y0=y0, **mats)


def serialize_lpv(model: LpvModel) -> dict:
    """LPV model as JSON-ready file content; exact round-trip guaranteed."""
    d = model.dims
    out = {
        "dims": {**{k: getattr(d, k) for k in _DIM_KEYS}, "n_p": d.n_p},
        "A": model.A.tolist(),
        "Bw": model.Bw.tolist(),
        "Bu": model.Bu.tolist(),
        "Cz": model.Cz.tolist(),
        "Cy": model.Cy.tolist(),
        "Dzu": model.Dzu.tolist(),
        "Dyw": model.Dyw.tolist(),
        "Dyu": model.Dyu.tolist(),
        "basis": [
            {
                "r": b.r,
                "i": b.i,
                "Ak": b.Ak.tolist(),
                "Bk": b.Bk.tolist(),
                "Ck": b.Ck.tolist(),
                "Dk": b.Dk.tolist(),
            }
            for b in model.basis
        ],
        "schedule": schedule_to_raw(model.schedule),
        "d": model.d.tolist(),
        "y0": model.y0.tolist(),
    }
    return out


# --- file I/O -------------------------------------------------------------


def _dump(content: dict) -> str:
    return json.dumps(content, indent=2) + "\n"


def save_model(model, path) -> None:
    if isinstance(model, LpvModel):
        content = serialize_lpv(model)
    else:
        content = serialize_nlfr(model)
    with open(path, "w") as fh:
        fh.write(_dump(content))


def _load_raw(path) -> dict:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ModelFormatError(f"{path}: model file must be a JSON object")
    return raw


def load_nlfr(path) -> NlfrModel:
    raw = _load_raw(path)
    if "basis" in raw:
        raise ModelFormatError(f"{path}: expected a nonlinear model, found an LPV model")
    return validate_nlfr(raw)


def load_lpv(path) -> LpvModel:
    raw = _load_raw(path)
    if "basis" not in raw:
        raise ModelFormatError(f"{path}: expected an LPV model, found a nonlinear model")
    return validate_lpv(raw)


def load_model(path):
    """Load either model kind, detected by the presence of a basis block."""
    raw = _load_raw(path)
    if "basis" in raw:
        return validate_lpv(raw)
    return validate_nlfr(raw)
