"""Evolution generators as superoperator matrices.

Builds the exact generator ``-iT[H(s), .] + Gamma T D_s`` and its adiabatic
approximation with the projector-filtered dissipator, the rotated-frame
block form of the approximate equation, the factorization of the filtered
dissipator back into Lindblad form, and Choi-matrix complete-positivity
certification for propagators.

All superoperators use the column-stacking convention of :mod:`.linalg`.
The rotated-frame machinery expresses operators in the component
coordinates of the transport frame's initial eigenbasis (``frame.basis0``),
where eigenspace blocks are contiguous index ranges; this keeps the block
structure of the approximate equation exact in floating point.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BlockNotClosed, DimensionMismatch, NegativeGSpectrum
from .linalg import (
    dag,
    frobenius,
    hermitian_eigendecompose,
    sandwich_superop,
    unvec,
    vec,
)
from .spectral import geometric_term

__all__ = [
    "LindbladDissipator",
    "hamiltonian_superop",
    "trace_preservation_defect",
    "exact_generator",
    "approximate_generator",
    "filtered_dissipator_superop",
    "ExactGenerator",
    "ApproximateGenerator",
    "rotated_block_generator",
    "block_component_indices",
    "frame_components",
    "frame_unpack",
    "LindbladFactorization",
    "lindblad_factorize",
    "choi_matrix",
    "cp_check",
]


# ---------------------------------------------------------------------------
# dissipators
# ---------------------------------------------------------------------------

@dataclass
class LindbladDissipator:
    """Time-dependent Lindblad dissipator ``D_s``.

    ``D_s(rho) = -i[F(s), rho] + sum_n V_n rho V_n^dag
                 - (1/2) {V_n^dag V_n, rho}``

    ``hamiltonian_part`` may be None for a purely dissipative process.
    """

    dim: int
    hamiltonian_part: Optional[Callable[[float], np.ndarray]] = None
    jump_operators: Sequence[Callable[[float], np.ndarray]] = ()

    @classmethod
    def constant(cls, jumps, f=None):
        """Dissipator with s-independent operators."""
        jumps = [np.asarray(v, dtype=complex) for v in jumps]
        dim = jumps[0].shape[0] if jumps else np.asarray(f).shape[0]
        fham = None if f is None else (lambda s, f=np.asarray(f, dtype=complex): f)
        return cls(dim=dim,
                   hamiltonian_part=fham,
                   jump_operators=[(lambda s, v=v: v) for v in jumps])

    @classmethod
    def double_commutator(cls, a):
        """The pure-decoherence process ``rho -> -[A, [A, rho]]`` in Lindblad
        form: no Hamiltonian part, single jump ``sqrt(2) A``."""
        a = np.asarray(a, dtype=complex)
        return cls.constant([np.sqrt(2.0) * a])

    def f_at(self, s):
        if self.hamiltonian_part is None:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return np.asarray(self.hamiltonian_part(s), dtype=complex)

    def jumps_at(self, s):
        return [np.asarray(v(s), dtype=complex) for v in self.jump_operators]

    def superoperator(self, s):
        d = self.dim
        eye = np.eye(d, dtype=complex)
        out = hamiltonian_superop(self.f_at(s))
        for v in self.jumps_at(s):
            vdv = dag(v) @ v
            out += sandwich_superop(v, dag(v))
            out -= 0.5 * sandwich_superop(vdv, eye)
            out -= 0.5 * sandwich_superop(eye, vdv)
        return out

    def apply(self, s, rho):
        return unvec(self.superoperator(s) @ vec(rho), self.dim)


def hamiltonian_superop(h):
    """Superoperator of ``rho -> -i[h, rho]``."""
    h = np.asarray(h, dtype=complex)
    eye = np.eye(h.shape[0], dtype=complex)
    return -1j * (sandwich_superop(h, eye) - sandwich_superop(eye, h))


def trace_preservation_defect(superop):
    """``max |vec(I)^dag L|``; zero for trace-preserving generators."""
    d = int(round(np.sqrt(superop.shape[0])))
    row = vec(np.eye(d, dtype=complex)).conj() @ superop
    return float(np.abs(row).max())


# ---------------------------------------------------------------------------
# exact and approximate generators (lab frame)
# ---------------------------------------------------------------------------

def exact_generator(family, dissipator, T, gamma, s):
    """``-iT[H(s), .] + Gamma T D_s`` as a (d^2, d^2) matrix."""
    if family.dim != dissipator.dim:
        raise DimensionMismatch(
            f"Hamiltonian dim {family.dim} != dissipator dim {dissipator.dim}"
        )
    g = T * hamiltonian_superop(family.hamiltonian(s))
    if gamma != 0.0:
        g = g + gamma * T * dissipator.superoperator(s)
    return g


def filtered_dissipator_superop(dissipator, tensor, decomp, s):
    """Projector-filtered dissipator
    ``sum_{klk'l'} g_klk'l' P_k D_s(P_k' . P_l') P_l`` as a superoperator."""
    d = dissipator.dim
    dsup = dissipator.superoperator(s)
    projs = decomp.projectors
    k = decomp.nspaces
    right = {}
    for kp in range(k):
        for lp in range(k):
            if tensor.g[:, :, kp, lp].any():
                right[(kp, lp)] = dsup @ sandwich_superop(projs[kp], projs[lp])
    out = np.zeros((d * d, d * d), dtype=complex)
    for a in range(k):
        for b in range(k):
            inner = None
            for (kp, lp), mat in right.items():
                if tensor.g[a, b, kp, lp]:
                    inner = mat if inner is None else inner + mat
            if inner is not None:
                out += sandwich_superop(projs[a], projs[b]) @ inner
    return out


def approximate_generator(family, dissipator, tensor, T, gamma, s, q_of_s=None):
    """Adiabatic approximation of the exact generator.

    ``-i[T H(s) + Q(s), .] + Gamma T sum g_klk'l' P_k D_s(P_k' . P_l') P_l``

    ``q_of_s`` supplies the geometric term; by default it is computed by
    finite differences of the eigenprojectors.  The resonance tensor must
    have been built from the same family (same eigenspace labels).
    """
    if family.dim != dissipator.dim:
        raise DimensionMismatch(
            f"Hamiltonian dim {family.dim} != dissipator dim {dissipator.dim}"
        )
    q = geometric_term(family, s) if q_of_s is None else q_of_s(s)
    g = hamiltonian_superop(T * family.hamiltonian(s) + q)
    if gamma != 0.0:
        decomp = family.spectrum(s)
        g = g + gamma * T * filtered_dissipator_superop(dissipator, tensor, decomp, s)
    return g


@dataclass
class ExactGenerator:
    """Callable ``s -> exact generator matrix``."""

    family: object
    dissipator: LindbladDissipator
    T: float
    gamma: float

    def __call__(self, s):
        return exact_generator(self.family, self.dissipator, self.T, self.gamma, s)


@dataclass
class ApproximateGenerator:
    """Callable ``s -> approximate generator matrix`` (lab frame)."""

    family: object
    dissipator: LindbladDissipator
    tensor: object
    T: float
    gamma: float
    q_of_s: Optional[Callable[[float], np.ndarray]] = None

    def __call__(self, s):
        return approximate_generator(self.family, self.dissipator, self.tensor,
                                     self.T, self.gamma, s, self.q_of_s)


# ---------------------------------------------------------------------------
# rotated-frame block form
# ---------------------------------------------------------------------------

def _component_labels(frame):
    labels = np.empty(frame.dim, dtype=int)
    for k, sl in enumerate(frame.block_slices):
        labels[sl] = k
    return labels


def _normalize_block_set(frame, block_set):
    k = len(frame.block_slices)
    if block_set == "all":
        return tuple((a, b) for a in range(k) for b in range(k))
    if block_set == "diagonal":
        return tuple((a, a) for a in range(k))
    return tuple((int(a), int(b)) for a, b in block_set)


def block_component_indices(frame, block_set):
    """Vectorization indices carrying the selected ``(k, l)`` blocks, in
    column-stacking order, for states expressed in ``frame.basis0``."""
    labels = _component_labels(frame)
    blocks = set(_normalize_block_set(frame, block_set))
    d = frame.dim
    return [p for p in range(d * d) if (labels[p % d], labels[p // d]) in blocks]


def frame_components(frame, rho_lab, s):
    """Vectorized components ``<chi_k(0)| U rho U^dag |chi_l(0)>`` of a lab
    state; these are the instantaneous-eigenbasis matrix elements of rho."""
    w = dag(frame.basis0) @ frame.u_at(s)
    return vec(w @ rho_lab @ dag(w))


def frame_unpack(frame, component_vec, s):
    """Inverse of :func:`frame_components`."""
    w = dag(frame.basis0) @ frame.u_at(s)
    return dag(w) @ unvec(component_vec, frame.dim) @ w


def rotated_block_generator(family, dissipator, tensor, frame, T, gamma, s,
                            block_set="all"):
    """Approximate-equation generator in the rotated frame, restricted to a
    closed set of blocks.

    Acts on the component vector of :func:`frame_components`.  Implements,
    per block ``(k, l)`` of the selected set,

        d/ds rho^(kl) = -iT Delta_kl rho^(kl) - i Z_k rho^(kl)
                        + i rho^(kl) Z_l
                        + Gamma T sum_{k'l'} g_klk'l' P_k(0) D~_s(rho^(k'l')) P_l(0)

    with ``Z_l`` the block-diagonal parts of the frame generator and
    ``D~_s`` the dissipator conjugated into the rotated frame.  Couplings
    forbidden by the tensor are structurally zero in the returned matrix.

    Raises :class:`BlockNotClosed` if the tensor couples a selected block to
    an omitted one.
    """
    blocks = _normalize_block_set(frame, block_set)
    bset = set(blocks)
    k = len(frame.block_slices)
    for (a, b) in blocks:
        for kp in range(k):
            for lp in range(k):
                if tensor.g[a, b, kp, lp] and (kp, lp) not in bset:
                    raise BlockNotClosed(
                        f"block ({a},{b}) couples to omitted block ({kp},{lp})"
                    )

    d = frame.dim
    labels = _component_labels(frame)
    eye = np.eye(d, dtype=complex)

    energies = family.spectrum(s).energies
    e_ext = energies[labels]
    row = np.tile(np.arange(d), d)          # vec index p = col*d + row
    col = np.repeat(np.arange(d), d)
    delta_diag = e_ext[row] - e_ext[col]

    zhat = dag(frame.basis0) @ frame.z_at(s) @ frame.basis0
    zbd = np.zeros_like(zhat)
    for sl in frame.block_slices:
        zbd[sl, sl] = zhat[sl, sl]

    gen = np.diag(-1j * T * delta_diag).astype(complex)
    gen += -1j * (sandwich_superop(zbd, eye) - sandwich_superop(eye, zbd))

    if gamma != 0.0:
        w = dag(frame.basis0) @ frame.u_at(s)
        dhat = (sandwich_superop(w, dag(w)) @ dissipator.superoperator(s)
                @ sandwich_superop(dag(w), w))
        mask = tensor.g[labels[row][:, None], labels[col][:, None],
                        labels[row][None, :], labels[col][None, :]]
        gen += gamma * T * np.where(mask, dhat, 0.0)

    keep = np.array([(labels[p % d], labels[p // d]) in bset for p in range(d * d)])
    gen[~keep, :] = 0.0
    gen[:, ~keep] = 0.0
    return gen


# ---------------------------------------------------------------------------
# Lindblad re-factorization of the filtered dissipator
# ---------------------------------------------------------------------------

@dataclass
class LindbladFactorization:
    """Lindblad form of the projector-filtered dissipator at one ``s``.

    ``superoperator()`` rebuilds the dissipator from the factorized pieces;
    agreement with :func:`filtered_dissipator_superop` certifies that the
    approximate equation generates completely positive dynamics.
    """

    effective_hamiltonian: np.ndarray
    lindblad_ops: list
    g_eigenvalues: np.ndarray
    g_vectors: np.ndarray

    def superoperator(self):
        d = self.effective_hamiltonian.shape[0]
        eye = np.eye(d, dtype=complex)
        out = hamiltonian_superop(self.effective_hamiltonian)
        for m in self.lindblad_ops:
            mdm = dag(m) @ m
            out += sandwich_superop(m, dag(m))
            out -= 0.5 * sandwich_superop(mdm, eye)
            out -= 0.5 * sandwich_superop(eye, mdm)
        return out

    def reconstruction_error(self, dissipator, tensor, decomp, s):
        target = filtered_dissipator_superop(dissipator, tensor, decomp, s)
        return frobenius(self.superoperator() - target)


def lindblad_factorize(dissipator, tensor, decomp, s, eigenvalue_cutoff=1e-12):
    """Factorize the filtered dissipator back into Lindblad form.

    Diagonalizes the symmetric coupling matrix ``G[(k,k'), (l,l')] =
    g_klk'l'`` as ``G = sum_m lambda_m c^m (c^m)^dag`` and builds jump
    operators ``M_n^m = sqrt(lambda_m) sum_kk' c^m_kk' P_k V_n P_k'``; the
    Hamiltonian part filters to ``sum_k P_k F P_k``.

    Raises :class:`NegativeGSpectrum` if any ``lambda_m < -1e-10``: the
    complete-positivity argument fails for such a tensor.
    """
    gmat = tensor.g_matrix()
    lam, cvecs = hermitian_eigendecompose(gmat.astype(complex), 1e-12)
    if lam.min() < -1e-10:
        raise NegativeGSpectrum(
            f"coupling matrix has eigenvalue {lam.min():.3e} < -1e-10"
        )
    lam = np.clip(lam, 0.0, None)

    projs = decomp.projectors
    k = decomp.nspaces
    f_eff = np.zeros((dissipator.dim, dissipator.dim), dtype=complex)
    fmat = dissipator.f_at(s)
    for p in projs:
        f_eff += p @ fmat @ p

    ops = []
    for v in dissipator.jumps_at(s):
        sandwiches = [[projs[a] @ v @ projs[b] for b in range(k)] for a in range(k)]
        for m in range(len(lam)):
            if lam[m] <= eigenvalue_cutoff:
                continue
            op = np.zeros_like(v)
            for a in range(k):
                for b in range(k):
                    op += cvecs[a * k + b, m] * sandwiches[a][b]
            ops.append(np.sqrt(lam[m]) * op)
    return LindbladFactorization(
        effective_hamiltonian=f_eff,
        lindblad_ops=ops,
        g_eigenvalues=lam,
        g_vectors=cvecs,
    )


# ---------------------------------------------------------------------------
# complete positivity via Choi matrices
# ---------------------------------------------------------------------------

def choi_matrix(channel):
    """Choi matrix of a channel given as a superoperator matrix.

    Block ``(i, j)`` of the result is the channel applied to the matrix
    unit ``|i><j|``; the trace equals the Hilbert dimension for
    trace-preserving channels.
    """
    d = int(round(np.sqrt(channel.shape[0])))
    out = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[i, j] = 1.0
            out[i * d:(i + 1) * d, j * d:(j + 1) * d] = unvec(channel @ vec(unit), d)
    return out


def cp_check(channel, tol=1e-8):
    """Minimum Choi eigenvalue and the complete-positivity verdict."""
    j = choi_matrix(channel)
    j = 0.5 * (j + dag(j))
    w, _ = hermitian_eigendecompose(j, 1e-9)
    min_eig = float(w.min())
    return min_eig, min_eig >= -tol
