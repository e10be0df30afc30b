"""Built-in example models.

``msd2dof``: a two-mass spring-damper chain with unit masses, a hardening
cubic spring and position-dependent nonlinear damping on the first mass.
States are (q1, q2, q1dot, q2dot), inputs the two forces, outputs the two
positions.  The linear spring/damper terms live in A; the remaining
nonlinearity

    f(z) = 0.1 sin(10 z1) z2 + 0.2 z2^2 + 10 z1^3,   z = (q1, q1dot)

feeds back through Bw into the first mass's acceleration with f(0) = 0, so
no offset correction is involved.
"""

from __future__ import annotations

import math

from .errors import UnknownExample

__all__ = ["EXAMPLES", "builtin_example"]


def _msd2dof() -> dict:
    k1 = math.pi**2
    k2 = (1.2 * math.pi) ** 2
    c1 = 0.1
    c2 = 0.01
    return {
        "dims": {"n_x": 4, "n_u": 2, "n_y": 2, "n_w": 1, "n_z": 2},
        "A": [
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [-k1 - k2, k2, -c1 - c2, c2],
            [k2, -k2, c2, -c2],
        ],
        "Bw": [[0.0], [0.0], [-1.0], [0.0]],
        "Bu": [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        "Cz": [[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
        "Cy": [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
        "Dzu": [[0.0, 0.0], [0.0, 0.0]],
        "Dyw": [[0.0], [0.0]],
        "Dyu": [[0.0, 0.0], [0.0, 0.0]],
        "f": ["0.1*sin(10*z1)*z2 + 0.2*z2^2 + 10*z1^3"],
    }


EXAMPLES = {"msd2dof": _msd2dof}


def builtin_example(name: str) -> dict:
    """Raw model-file content of a built-in example."""
    try:
        builder = EXAMPLES[name]
    except KeyError:
        raise UnknownExample(
            f"unknown example {name!r}; available: {', '.join(sorted(EXAMPLES))}"
        ) from None
    return builder()
