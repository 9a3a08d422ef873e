"""Time-dependent Hamiltonian families and their spectral structure.

A :class:`HamiltonianFamily` wraps a map ``s in [0, 1] -> H(s)`` whose
eigenspace dimensions do not change along the parameter.  This module
provides the instantaneous spectral decomposition with stable eigenspace
labels, finite-difference projector derivatives, the Hermitian geometric
term ``Q(s) = i sum_k dP_k/ds P_k``, and transport frames ``U(s)`` with
``U(s) P_k(s) U(s)^dagger = P_k(0)`` together with their generator
``Z = i dU/ds U^dagger``.

Labels: a single decomposition labels eigenspaces by ascending energy at
the requested ``s``.  Cross-parameter label consistency is the job of
:func:`decompose_on_grid` (overlap propagation) or of an analytic spectrum
supplied by the model.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    AmbiguousClustering,
    DegeneracyChange,
    FrameDiscontinuity,
    NotHermitian,
)
from .linalg import dag, frobenius, hermitian_eigendecompose

__all__ = [
    "HamiltonianFamily",
    "SpectralDecomposition",
    "TransportFrame",
    "decompose_at",
    "decompose_on_grid",
    "projector_derivative",
    "geometric_term",
    "build_transport_frame",
]

_HERMITICITY_TOL = 1e-12


@dataclass
class SpectralDecomposition:
    """Clustered eigenstructure ``H = sum_k E_k P_k`` at one parameter value."""

    energies: np.ndarray          # (K,) real, one value per eigenspace
    projectors: list              # K projectors, each (d, d)
    ranks: tuple

    @property
    def nspaces(self):
        return len(self.ranks)

    @property
    def dim(self):
        return self.projectors[0].shape[0]

    def validate(self, tol=1e-10, degeneracy_tol=1e-8):
        """Check projector algebra, completeness, distinctness and rank sum."""
        d = self.dim
        total = np.zeros((d, d), dtype=complex)
        for k, p in enumerate(self.projectors):
            total += p
            for l, q in enumerate(self.projectors):
                expected = p if k == l else 0.0
                if frobenius(p @ q - expected) > tol:
                    raise AssertionError(f"projector algebra violated for pair ({k}, {l})")
        if frobenius(total - np.eye(d)) > tol:
            raise AssertionError("projectors do not resolve the identity")
        if sum(self.ranks) != d:
            raise AssertionError("ranks do not sum to the dimension")
        e = np.sort(self.energies)
        if len(e) > 1 and np.min(np.diff(e)) <= degeneracy_tol:
            raise AssertionError("eigenspace energies are not pairwise distinct")


@dataclass
class HamiltonianFamily:
    """A family ``s -> H(s)`` with fixed eigenspace structure.

    ``analytic_spectrum`` / ``analytic_basis`` let a model supply closed-form
    eigenstructure; ``breakpoints`` are parameter values where ``H`` is
    continuous but not smooth (piecewise-defined schedules), which the
    finite-difference helpers must not straddle.
    """

    dim: int
    evaluate: Callable[[float], np.ndarray]
    analytic_spectrum: Optional[Callable[[float], SpectralDecomposition]] = None
    analytic_basis: Optional[Callable[[float], np.ndarray]] = None
    n_eigenspaces: Optional[int] = None
    breakpoints: tuple = ()
    degeneracy_tol: float = 1e-8

    def hamiltonian(self, s):
        h = np.asarray(self.evaluate(s), dtype=complex)
        defect = frobenius(h - dag(h))
        if defect > _HERMITICITY_TOL:
            raise NotHermitian(f"H({s}) deviates from Hermitian by {defect:.3e}")
        return h

    def spectrum(self, s):
        """Instantaneous decomposition, analytic when the model provides one."""
        if self.analytic_spectrum is not None:
            return self.analytic_spectrum(s)
        return decompose_at(self, s, self.degeneracy_tol)


def _cluster_eigenvalues(w, degeneracy_tol):
    """Group ascending eigenvalues into eigenspace clusters.

    Adjacent gaps below ``0.1 * degeneracy_tol`` merge, gaps of at least
    ``degeneracy_tol`` split; anything in between is ambiguous.
    """
    boundaries = [0]
    for i in range(len(w) - 1):
        gap = w[i + 1] - w[i]
        if gap >= degeneracy_tol:
            boundaries.append(i + 1)
        elif gap > 0.1 * degeneracy_tol:
            raise AmbiguousClustering(
                f"eigenvalue gap {gap:.3e} falls inside "
                f"({0.1 * degeneracy_tol:.1e}, {degeneracy_tol:.1e})"
            )
    boundaries.append(len(w))
    clusters = [range(boundaries[i], boundaries[i + 1]) for i in range(len(boundaries) - 1)]
    for idx in clusters:
        if w[idx[-1]] - w[idx[0]] >= degeneracy_tol:
            raise AmbiguousClustering(
                f"cluster spread {w[idx[-1]] - w[idx[0]]:.3e} reaches the clustering tolerance"
            )
    return clusters


def _eigencolumns(family, s, degeneracy_tol):
    """Cluster-grouped orthonormal eigencolumns at ``s`` (ascending energy)."""
    h = family.hamiltonian(s)
    w, v = hermitian_eigendecompose(h, _HERMITICITY_TOL * 10)
    clusters = _cluster_eigenvalues(w, degeneracy_tol)
    energies = np.array([w[list(idx)].mean() for idx in clusters])
    columns = [v[:, list(idx)] for idx in clusters]
    return energies, columns


def decompose_at(family, s, degeneracy_tol=1e-8):
    """Numerically diagonalize ``H(s)`` and cluster into eigenspaces.

    Eigenspace labels are assigned by ascending energy at ``s``.  Raises
    :class:`DegeneracyChange` if the family declares a different eigenspace
    count, :class:`AmbiguousClustering` when the gap structure cannot be
    resolved at the given tolerance.
    """
    energies, columns = _eigencolumns(family, s, degeneracy_tol)
    projectors = [c @ dag(c) for c in columns]
    ranks = tuple(c.shape[1] for c in columns)
    if family.n_eigenspaces is not None and len(ranks) != family.n_eigenspaces:
        raise DegeneracyChange(
            f"found {len(ranks)} eigenspaces at s={s}, expected {family.n_eigenspaces}"
        )
    return SpectralDecomposition(energies=energies, projectors=projectors, ranks=ranks)


def _match_order(decomp, reference):
    """Permutation aligning ``decomp`` labels to ``reference`` by maximal
    projector overlap (greedy over the largest entries; K <= 4 here)."""
    k = reference.nspaces
    if decomp.nspaces != k:
        raise DegeneracyChange(
            f"eigenspace count changed from {k} to {decomp.nspaces}"
        )
    overlap = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            overlap[i, j] = np.trace(reference.projectors[i] @ decomp.projectors[j]).real
    order = np.full(k, -1, dtype=int)
    taken = set()
    for i, j in zip(*np.unravel_index(np.argsort(-overlap, axis=None), overlap.shape)):
        if order[i] < 0 and j not in taken:
            order[i] = j
            taken.add(j)
    if any(reference.ranks[i] != decomp.ranks[order[i]] for i in range(k)):
        raise DegeneracyChange("eigenspace ranks changed between samples")
    return order


def _relabel(decomp, reference):
    """Permute ``decomp`` labels to maximize overlap with ``reference``."""
    order = _match_order(decomp, reference)
    return SpectralDecomposition(
        energies=decomp.energies[order],
        projectors=[decomp.projectors[j] for j in order],
        ranks=tuple(decomp.ranks[j] for j in order),
    )


def decompose_on_grid(family, grid, degeneracy_tol=1e-8):
    """Decompose along ``grid`` with labels propagated by maximal overlap."""
    out = []
    previous = None
    for s in grid:
        d = decompose_at(family, s, degeneracy_tol)
        if previous is not None:
            d = _relabel(d, previous)
        out.append(d)
        previous = d
    return out


# ---------------------------------------------------------------------------
# finite-difference derivatives
# ---------------------------------------------------------------------------

def _stencil_kind(family, s, h):
    """Decide the stencil shape: central unless it would leave [0, 1] or
    straddle a kink of the schedule."""
    lo, hi = s - h, s + h
    crosses = any(lo < b < hi or abs(b - s) < 1e-15 for b in family.breakpoints)
    if not crosses and lo >= 0.0 and hi <= 1.0:
        return "central"
    forward_ok = s + 2 * h <= 1.0 and not any(
        s < b < s + 2 * h for b in family.breakpoints
    )
    return "forward" if forward_ok else "backward"


def _stencil_points(kind, s, h):
    if kind == "central":
        return (s - h, s + h), (-0.5 / h, 0.5 / h)
    if kind == "forward":
        return (s, s + h, s + 2 * h), (-1.5 / h, 2.0 / h, -0.5 / h)
    return (s - 2 * h, s - h, s), (0.5 / h, -2.0 / h, 1.5 / h)


def _projector_derivative_once(family, s, h, kind):
    base = family.spectrum(s)
    points, weights = _stencil_points(kind, s, h)
    derivs = [np.zeros((family.dim, family.dim), dtype=complex) for _ in base.ranks]
    for point, weight in zip(points, weights):
        d = base if point == s else _relabel(family.spectrum(point), base)
        for k, p in enumerate(d.projectors):
            derivs[k] += weight * p
    return base, derivs


def _projector_derivatives(family, s, h, richardson):
    # the stencil shape is fixed at step h so a Richardson pair shares the
    # same truncation-error structure
    kind = _stencil_kind(family, s, h)
    base, derivs = _projector_derivative_once(family, s, h, kind)
    if richardson:
        _, fine = _projector_derivative_once(family, s, h / 2, kind)
        derivs = [(4.0 * f - c) / 3.0 for f, c in zip(fine, derivs)]
    return base, derivs


def projector_derivative(family, s, h=1e-4, richardson=False):
    """Finite-difference eigenprojector derivatives with label-consistent
    stencils.

    Central differences (O(h^2)) away from endpoints and schedule kinks,
    second-order one-sided otherwise.  ``richardson=True`` combines steps
    ``h`` and ``h/2`` of the same stencil shape for two extra orders.
    """
    _, derivs = _projector_derivatives(family, s, h, richardson)
    return derivs


def geometric_term(family, s, h=1e-4, richardson=False):
    """The coherent correction ``Q(s) = i sum_k dP_k/ds P_k``.

    Hermitian up to the finite-difference truncation error; the residual is
    a useful self-check and is asserted (not enforced) by the test suite.
    """
    base, derivs = _projector_derivatives(family, s, h, richardson)
    q = np.zeros((family.dim, family.dim), dtype=complex)
    for pd, p in zip(derivs, base.projectors):
        q += 1j * (pd @ p)
    return q


# ---------------------------------------------------------------------------
# transport frames
# ---------------------------------------------------------------------------

@dataclass
class TransportFrame:
    """Grid-sampled unitaries ``U(s)`` mapping instantaneous projectors to
    their initial values, with ``Z = i dU/ds U^dagger`` from grid differences.

    ``basis0`` holds the eigencolumns at ``grid[0]`` that generated the
    frame, grouped per eigenspace as recorded in ``block_slices``; rotated
    component representations are expressed in these columns.
    """

    grid: np.ndarray
    U: np.ndarray                 # (n, d, d)
    Z: np.ndarray                 # (n, d, d)
    basis0: np.ndarray            # (d, d) columns
    block_slices: tuple           # per-eigenspace column ranges in basis0
    energies0: np.ndarray

    @property
    def dim(self):
        return self.U.shape[1]

    def index_of(self, s, tol=1e-9):
        i = int(np.argmin(np.abs(self.grid - s)))
        if abs(self.grid[i] - s) > tol:
            raise KeyError(f"s={s} is not a frame grid point")
        return i

    def u_at(self, s):
        return self.U[self.index_of(s)]

    def z_at(self, s):
        return self.Z[self.index_of(s)]

    def max_jump(self):
        return float(max(np.linalg.norm(self.U[i + 1] - self.U[i])
                         for i in range(len(self.grid) - 1)))

    def transport_defect(self, family, stride=None):
        """Worst deviation of ``U P_k(s) U^dagger`` from ``P_k(0)`` over the
        grid (labels chained sample to sample)."""
        if stride is None:
            stride = max(1, len(self.grid) // 32)
        prev = family.spectrum(self.grid[0])
        p0 = prev.projectors
        worst = 0.0
        for i in range(0, len(self.grid), stride):
            d = _relabel(family.spectrum(self.grid[i]), prev)
            u = self.U[i]
            for k, p in enumerate(d.projectors):
                worst = max(worst, frobenius(u @ p @ dag(u) - p0[k]))
            prev = d
        return worst


def _polar_unitary(m):
    """Unitary factor of the polar decomposition of a small square matrix."""
    w, v = hermitian_eigendecompose(dag(m) @ m, 1e-9)
    if w.min() < 1e-12:
        raise FrameDiscontinuity(
            "overlap between consecutive eigenbases is singular; the basis "
            "cannot be continued smoothly"
        )
    inv_sqrt = (v / np.sqrt(w)) @ dag(v)
    return m @ inv_sqrt


def _continued_columns(family, grid, degeneracy_tol):
    """Numerically gauge-continued eigencolumns along the grid."""
    energies0, cols = _eigencolumns(family, grid[0], degeneracy_tol)
    ref = SpectralDecomposition(
        energies=energies0,
        projectors=[c @ dag(c) for c in cols],
        ranks=tuple(c.shape[1] for c in cols),
    )
    frames = [cols]
    prev_cols = cols
    prev = ref
    for s in grid[1:]:
        energies, raw = _eigencolumns(family, s, degeneracy_tol)
        d = SpectralDecomposition(
            energies=energies,
            projectors=[c @ dag(c) for c in raw],
            ranks=tuple(c.shape[1] for c in raw),
        )
        order = _match_order(d, prev)
        raw = [raw[j] for j in order]
        aligned = []
        for x_prev, x_cur in zip(prev_cols, raw):
            # rotate the degenerate block onto the previous sample
            aligned.append(x_cur @ _polar_unitary(dag(x_cur) @ x_prev))
        frames.append(aligned)
        prev_cols = aligned
        prev = SpectralDecomposition(
            energies=d.energies[order],
            projectors=[d.projectors[j] for j in order],
            ranks=tuple(d.ranks[j] for j in order),
        )
    return energies0, frames


def _grouped_analytic_columns(family, grid, basis, degeneracy_tol):
    """Evaluate an analytic basis on the grid, grouping columns by the
    eigenspace labels of the initial decomposition."""
    s0 = grid[0]
    h0 = family.hamiltonian(s0)
    c0 = np.asarray(basis(s0), dtype=complex)
    col_energy = np.real(np.einsum("ik,ik->k", np.conj(c0), h0 @ c0))
    energies0, _ = _eigencolumns(family, s0, degeneracy_tol)
    groups = []
    for e in energies0:
        groups.append([j for j in range(family.dim)
                       if abs(col_energy[j] - e) < max(degeneracy_tol, 1e-6)])
    if sorted(j for g in groups for j in g) != list(range(family.dim)):
        raise ValueError("analytic basis columns do not match the eigenspace structure")
    frames = []
    for s in grid:
        c = np.asarray(basis(s), dtype=complex)
        frames.append([c[:, g] for g in groups])
    return energies0, frames


def build_transport_frame(family, grid, basis=None, frame_jump_tol=0.5,
                          degeneracy_tol=None):
    """Construct a transport frame ``U(s) = sum_k |chi_k(0)><chi_k(s)|``.

    ``basis`` is an optional callable returning the model's analytic
    instantaneous eigenbasis as matrix columns; without it, a numerically
    phase/gauge-continued eigenbasis is built (successive samples aligned
    cluster-by-cluster via polar decomposition of the overlap).

    Raises :class:`FrameDiscontinuity` when consecutive unitaries jump by
    more than ``frame_jump_tol`` in Frobenius norm, which signals a gauge
    singularity on the sampled path.
    """
    grid = np.asarray(grid, dtype=float)
    if degeneracy_tol is None:
        degeneracy_tol = family.degeneracy_tol
    if basis is None:
        energies0, frames = _continued_columns(family, grid, degeneracy_tol)
    else:
        energies0, frames = _grouped_analytic_columns(family, grid, basis, degeneracy_tol)

    c_list = [np.hstack(cols) for cols in frames]
    c0 = c_list[0]
    n = len(grid)
    u = np.empty((n, family.dim, family.dim), dtype=complex)
    for i, c in enumerate(c_list):
        u[i] = c0 @ dag(c)
    for i in range(n - 1):
        jump = np.linalg.norm(u[i + 1] - u[i])
        if jump > frame_jump_tol:
            raise FrameDiscontinuity(
                f"frame jump {jump:.3e} between s={grid[i]:.6g} and "
                f"s={grid[i + 1]:.6g} exceeds {frame_jump_tol}"
            )

    du = np.gradient(u, grid, axis=0, edge_order=2)
    # near a schedule kink the symmetric stencil mixes two smooth pieces;
    # redo those samples one-sided (the kink samples themselves keep the
    # forward value)
    if family.breakpoints and n >= 3:
        spacing = np.diff(grid)
        for i in range(n):
            lo = grid[i - 1] if i > 0 else grid[0]
            hi = grid[i + 1] if i < n - 1 else grid[-1]
            bad = [b for b in family.breakpoints if lo < b < hi or abs(b - grid[i]) < 1e-15]
            if not bad:
                continue
            b = bad[0]
            if grid[i] <= b and i >= 2:
                h = spacing[i - 1]
                du[i] = (3 * u[i] - 4 * u[i - 1] + u[i - 2]) / (2 * h)
            elif i + 2 < n:
                h = spacing[i]
                du[i] = (-3 * u[i] + 4 * u[i + 1] - u[i + 2]) / (2 * h)
    z = np.einsum("nij,nkj->nik", 1j * du, np.conj(u))
    # i dU/ds U^dagger is exactly Hermitian; drop the finite-difference
    # anti-Hermitian residue so downstream generators preserve Hermiticity
    z = 0.5 * (z + np.conj(np.transpose(z, (0, 2, 1))))

    ranks = tuple(c.shape[1] for c in frames[0])
    offsets = np.cumsum((0,) + ranks)
    block_slices = tuple(slice(offsets[i], offsets[i + 1]) for i in range(len(ranks)))
    return TransportFrame(grid=grid, U=u, Z=z, basis0=c0,
                          block_slices=block_slices, energies0=energies0)
