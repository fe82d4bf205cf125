"""Test-label samplers for the 3-elementary-perturbation design.

Training uses the four labels {0, e1, e2, e3}. Test labels are drawn from
explicit in-distribution (ID) and out-of-distribution (OOD) regions, built so
that the implied latent shifts land inside the unit square for ID and inside
[0,2]^2 minus the open unit square for OOD (under the canonical shift matrix
whose columns are (1,0), (0,1), (1,1)).

Single labels have one active coordinate: ID in [0,1], OOD in [1,2]. Double
regions are unions of branch sets; the exact piecewise formulas live in
``_sample_double_id`` / ``_sample_double_ood`` and their membership twins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numeric.rng import RngState

N_ELEMENTARY = 3
_TOL = 1e-12

# Double-perturbation settings used by the fixed test suite. OOD has four
# printed branch sets; the ID region has three, so its four suite settings
# cycle through them with the full-square branch drawn twice.
_SUITE_DOUBLE_BRANCHES = {"id": (0, 1, 2, 0), "ood": (0, 1, 2, 3)}


@dataclass(frozen=True)
class TestCase:
    case_id: str
    label: np.ndarray
    kind: str  # "id" | "ood"
    split: str  # "validation" | "test"
    arity: str  # "single" | "double"


def _check_kind(kind: str):
    if kind not in ("id", "ood"):
        raise ValueError(f"kind must be 'id' or 'ood', got {kind!r}")


def _sample_single(rng: RngState, kind: str, coord: int) -> np.ndarray:
    lo, hi = (0.0, 1.0) if kind == "id" else (1.0, 2.0)
    label = np.zeros(N_ELEMENTARY)
    label[coord] = rng.uniform(lo, hi)
    return label


def _sample_double_id(rng: RngState, branch: int) -> np.ndarray:
    if branch == 0:  # [a, b, 0], both free in [0, 1]
        return np.array([rng.uniform(0, 1), rng.uniform(0, 1), 0.0])
    if branch == 1:  # [a, 0, c]: c in [0, 1], a in [0, 1 - c]
        c = rng.uniform(0, 1)
        return np.array([rng.uniform(0, 1 - c), 0.0, c])
    # [0, b, c]: c in [0, 1], b in [0, 1 - c]
    c = rng.uniform(0, 1)
    return np.array([0.0, rng.uniform(0, 1 - c), c])


def _sample_double_ood(rng: RngState, branch: int) -> np.ndarray:
    if branch == 0:  # [a, b, 0]: a in [0, 2]; b in [0,2] past a=1, else [1,2]
        a = rng.uniform(0, 2)
        b0 = rng.uniform(0, 1)
        return np.array([a, 2 * b0 if a >= 1 else b0 + 1, 0.0])
    if branch == 1:  # mirror of branch 0 in (a, b)
        b = rng.uniform(0, 2)
        a0 = rng.uniform(0, 1)
        return np.array([2 * a0 if b >= 1 else a0 + 1, b, 0.0])
    if branch == 2:  # [a, 0, c]: c in [0, 2], a in an interval that clears the ID box
        c = rng.uniform(0, 2)
        a0 = rng.uniform(0, 1)
        return np.array([a0 * (2 - max(1.0, c)) + max(1.0 - c, 0.0), 0.0, c])
    # [0, b, c]: mirror of branch 2
    c = rng.uniform(0, 2)
    b0 = rng.uniform(0, 1)
    return np.array([0.0, b0 * (2 - max(1.0, c)) + max(1.0 - c, 0.0), c])


def sample_test_label(rng: RngState, kind: str, arity: str) -> np.ndarray:
    """One label from the requested region; the branch is chosen uniformly."""
    _check_kind(kind)
    if arity == "single":
        return _sample_single(rng, kind, int(rng.integers(0, N_ELEMENTARY)))
    if arity != "double":
        raise ValueError(f"arity must be 'single' or 'double', got {arity!r}")
    if kind == "id":
        return _sample_double_id(rng, int(rng.integers(0, 3)))
    return _sample_double_ood(rng, int(rng.integers(0, 4)))


# --------------------------------------------------------------------------
# region membership (mirrors the samplers; used by the soundness checks)


def _in01(v, lo=0.0, hi=1.0):
    return lo - _TOL <= v <= hi + _TOL


def label_in_region(label, kind: str, arity: str) -> bool:
    _check_kind(kind)
    a = np.asarray(label, dtype=float).reshape(-1)
    if a.size != N_ELEMENTARY:
        return False
    nz = np.nonzero(np.abs(a) > _TOL)[0]
    if arity == "single":
        if nz.size > 1:
            return False
        if nz.size == 0:
            return kind == "id"  # the zero label sits on the ID region's boundary
        v = a[nz[0]]
        return _in01(v) if kind == "id" else _in01(v, 1.0, 2.0)
    if arity != "double":
        raise ValueError(f"arity must be 'single' or 'double', got {arity!r}")
    x, y, z = a
    if kind == "id":
        return (
            (abs(z) <= _TOL and _in01(x) and _in01(y))
            or (abs(y) <= _TOL and _in01(z) and _in01(x, 0.0, 1.0 - z))
            or (abs(x) <= _TOL and _in01(z) and _in01(y, 0.0, 1.0 - z))
        )
    branch1 = abs(z) <= _TOL and _in01(x, 0, 2) and (
        _in01(y, 0, 2) if x >= 1 - _TOL else _in01(y, 1, 2)
    )
    branch2 = abs(z) <= _TOL and _in01(y, 0, 2) and (
        _in01(x, 0, 2) if y >= 1 - _TOL else _in01(x, 1, 2)
    )
    lo = max(1.0 - z, 0.0)
    width = 2.0 - max(1.0, z)
    branch3 = abs(y) <= _TOL and _in01(z, 0, 2) and _in01(x, lo, lo + width)
    branch4 = abs(x) <= _TOL and _in01(z, 0, 2) and _in01(y, lo, lo + width)
    return branch1 or branch2 or branch3 or branch4


def shift_in_region(shift, kind: str) -> bool:
    """Membership of an implied latent shift: ID inside the unit square, OOD
    inside [0,2]^2 but not strictly inside the unit square."""
    s = np.asarray(shift, dtype=float).reshape(-1)
    if kind == "id":
        return bool(np.all(s >= -_TOL) and np.all(s <= 1 + _TOL))
    inside_big = np.all(s >= -_TOL) and np.all(s <= 2 + _TOL)
    strictly_inside_unit = np.all(s > _TOL) and np.all(s < 1 - _TOL)
    return bool(inside_big and not strictly_inside_unit)


# --------------------------------------------------------------------------
# the fixed evaluation suite


def make_test_suite(rng: RngState):
    """28 deterministic test cases: per kind, two draws from each of the three
    single settings and four double settings. The first ID draw of every
    setting is the validation split, the second the test split; OOD cases are
    all test."""
    cases = []
    for kind in ("id", "ood"):
        settings = [("single", k) for k in range(N_ELEMENTARY)]
        settings += [("double", b) for b in _SUITE_DOUBLE_BRANCHES[kind]]
        for si, (arity, branch) in enumerate(settings):
            for draw in range(2):
                if arity == "single":
                    label = _sample_single(rng, kind, branch)
                elif kind == "id":
                    label = _sample_double_id(rng, branch)
                else:
                    label = _sample_double_ood(rng, branch)
                split = "validation" if kind == "id" and draw == 0 else "test"
                cases.append(
                    TestCase(
                        case_id=f"{kind}-{si}-{draw}",
                        label=label,
                        kind=kind,
                        split=split,
                        arity=arity,
                    )
                )
    return cases
