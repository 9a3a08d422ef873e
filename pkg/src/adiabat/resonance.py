"""Gap functions and the resonance tensor.

For an eigenspace family with energies ``E_k(s)`` the gap functions are
``Delta_kl(s) = E_k(s) - E_l(s)``.  The boolean tensor ``g[k, l, k', l']``
records which pairs of gap functions coincide for *all* ``s`` in [0, 1];
only those pairs stay coupled in the adiabatic approximation.  Pairs whose
gap functions merely cross at isolated points are classified separately and
the crossing locations are refined by bisection.
"""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import TangentialCrossing

__all__ = [
    "CrossingCase",
    "ResonanceTensor",
    "gap_function",
    "compute_resonance_tensor",
]


class CrossingCase(enum.Enum):
    CASE_I = "case_i"      # gap functions coincide everywhere or never meet
    CASE_II = "case_ii"    # transversal crossings at isolated points


@dataclass
class ResonanceTensor:
    """0/1 coincidence tensor over eigenspace index pairs.

    ``crossing_points`` holds ``((k, l), (kp, lp), s_star)`` for isolated
    transversal crossings; ``flagged`` records pairs whose gap functions
    coincide on a sub-interval of positive measure without coinciding
    systematically (outside both supported cases, reported with ``g = 0``).
    """

    nspaces: int
    g: np.ndarray                       # bool, shape (K, K, K, K)
    crossing_points: list = field(default_factory=list)
    flagged: list = field(default_factory=list)

    def case_of(self, pair_a, pair_b):
        key = frozenset((tuple(pair_a), tuple(pair_b)))
        for (p, q, _s) in self.crossing_points:
            if frozenset((p, q)) == key:
                return CrossingCase.CASE_II
        return CrossingCase.CASE_I

    def g_matrix(self):
        """The induced real symmetric matrix ``G[(k,kp), (l,lp)] = g[k,l,kp,lp]``."""
        k = self.nspaces
        m = np.zeros((k * k, k * k))
        for a in range(k):
            for b in range(k):
                for c in range(k):
                    for e in range(k):
                        m[a * k + c, b * k + e] = float(self.g[a, b, c, e])
        return m

    def validate_identities(self):
        """Exhaustive check of the symmetry and delta identities."""
        k = self.nspaces
        g = self.g
        for a in range(k):
            for b in range(k):
                for c in range(k):
                    for e in range(k):
                        assert g[a, b, c, e] == g[c, e, a, b]
                        assert g[a, b, c, e] == g[b, a, e, c]
        delta = np.eye(k, dtype=bool)
        for a in range(k):
            for b in range(k):
                for c in range(k):
                    assert g[a, b, c, b] == delta[a, c]
                    assert g[a, b, a, c] == delta[b, c]
                    assert g[a, a, b, c] == delta[b, c]
                    assert g[a, b, c, c] == delta[a, b]

    def to_csv(self, path):
        """Audit dump, one row per tensor entry (0-based indices)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "l", "kp", "lp", "g"])
            k = self.nspaces
            for a in range(k):
                for b in range(k):
                    for c in range(k):
                        for e in range(k):
                            writer.writerow([a, b, c, e, int(self.g[a, b, c, e])])


def gap_function(decomp_at, k, l):
    """The gap map ``s -> E_k(s) - E_l(s)``; antisymmetric in (k, l) exactly."""
    def delta(s):
        e = decomp_at(s).energies
        return float(e[k] - e[l])
    return delta


def _bisect_root(h, lo, hi, tol=1e-6):
    flo = h(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol:
            return mid
        fmid = h(mid)
        if fmid == 0.0:
            return mid
        if (flo < 0) == (fmid < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def compute_resonance_tensor(decomp_at, grid, coincide_tol=1e-9, slope_tol=1e-6):
    """Classify every pair of gap functions over ``grid``.

    ``g[k, l, kp, lp]`` is 1 iff ``max_s |Delta_kl(s) - Delta_kplp(s)|``
    over the grid is at most ``coincide_tol``.  Sign changes of the
    difference are refined by bisection to 1e-6 and recorded as isolated
    crossings; a crossing whose local slope falls below ``slope_tol``
    raises :class:`TangentialCrossing` because the transversality premise
    behind the classification fails there.
    """
    grid = np.asarray(grid, dtype=float)
    if len(grid) < 33:
        raise ValueError("resonance classification needs at least 33 grid samples")
    sample0 = decomp_at(grid[0])
    k = sample0.nspaces

    energies = np.stack([decomp_at(s).energies for s in grid])   # (n, K)
    g = np.zeros((k, k, k, k), dtype=bool)
    crossings = []
    flagged = []

    pairs = [(a, b) for a in range(k) for b in range(k)]
    deltas = {p: energies[:, p[0]] - energies[:, p[1]] for p in pairs}

    seen = set()
    for pa in pairs:
        for pb in pairs:
            if (pa, pb) in seen:
                continue
            seen.add((pa, pb))
            seen.add((pb, pa))
            diff = deltas[pa] - deltas[pb]
            if np.abs(diff).max() <= coincide_tol:
                g[pa[0], pa[1], pb[0], pb[1]] = True
                g[pb[0], pb[1], pa[0], pa[1]] = True
                continue
            if pa == pb:
                continue
            near = np.abs(diff) <= coincide_tol
            # runs of near-zero samples: coincidence on a sub-interval,
            # neither systematic nor an isolated crossing
            if _longest_run(near) >= 2:
                flagged.append((pa, pb))
                continue
            h = lambda s, pa=pa, pb=pb: (
                _gap_value(decomp_at, s, pa) - _gap_value(decomp_at, s, pb)
            )
            signs = np.where(near, 0, np.sign(diff)).astype(int)
            for i, sign in enumerate(signs):
                if sign != 0:
                    continue
                # isolated touch at a grid sample; a tangential touch fails
                # the slope check, a transversal one is a valid crossing
                _check_slope(h, grid[i], slope_tol, pa, pb)
                crossings.append((pa, pb, float(grid[i])))
            for i in range(len(grid) - 1):
                if signs[i] != 0 and signs[i + 1] != 0 and signs[i] != signs[i + 1]:
                    s_star = _bisect_root(h, grid[i], grid[i + 1])
                    _check_slope(h, s_star, slope_tol, pa, pb)
                    crossings.append((pa, pb, float(s_star)))
    return ResonanceTensor(nspaces=k, g=g, crossing_points=crossings, flagged=flagged)


def _gap_value(decomp_at, s, pair):
    e = decomp_at(s).energies
    return float(e[pair[0]] - e[pair[1]])


def _check_slope(h, s, slope_tol, pa, pb):
    step = 1e-6
    lo = max(s - step, 0.0)
    hi = min(s + step, 1.0)
    slope = (h(hi) - h(lo)) / (hi - lo)
    if abs(slope) < slope_tol:
        raise TangentialCrossing(
            f"gap functions {pa} and {pb} touch at s={s:.6f} with slope "
            f"{slope:.3e} below {slope_tol:.1e}"
        )


def _longest_run(mask):
    best = cur = 0
    for v in mask:
        cur = cur + 1 if v else 0
        best = max(best, cur)
    return best
