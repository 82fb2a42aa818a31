"""Structured linear operators and the truncated-PSD rank projection.

Everything here works on plain numpy arrays:

* ``hankel_lift`` / ``hankel_adjoint``     -- x in C^(2n-1)  <->  n x n Hankel matrix
* ``toeplitz_lift`` / ``toeplitz_adjoint`` -- t in C^n       <->  n x n Hermitian Toeplitz matrix
* ``assemble_block``                       -- the 2n x 2n block matrix [[Tconj(t), Hconj(x)], [Hx, Tt]]
* ``psd_rank_project``                     -- Frobenius-nearest PSD matrix of rank <= K

The adjoints satisfy H^H(Hx) = d_H * x and T^H(Tt) = d_T * t with the diagonal
weights returned by ``weight_diagonals``; these identities are what make the
closed-form solver updates cheap.

All functions are pure; none keeps state.
"""

import numpy as np
import scipy.linalg

__all__ = [
    "weight_diagonals",
    "hankel_lift",
    "hankel_adjoint",
    "toeplitz_lift",
    "toeplitz_adjoint",
    "assemble_block",
    "psd_rank_project",
]


def weight_diagonals(n):
    """Anti-diagonal / subdiagonal multiplicity weights for size-n lifts.

    Returns
    -------
    d_h : (2n-1,) float array, [1, 2, ..., n, ..., 2, 1]
        Number of entries on each anti-diagonal of an n x n matrix.
    d_t : (n,) float array, [n, n-1, ..., 1]
        Number of entries on each subdiagonal (diagonal included).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    a = np.arange(1, 2 * n)
    d_h = np.minimum(a, 2 * n - a).astype(float)
    d_t = np.arange(n, 0, -1).astype(float)
    return d_h, d_t


def hankel_lift(x):
    """Map a vector of odd length 2n-1 to the n x n Hankel matrix H[i, j] = x[i + j].

    The result equals its plain transpose (complex-symmetric, not Hermitian).
    """
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    if x.shape[0] % 2 == 0 or x.shape[0] < 1:
        raise ValueError(f"length must be odd and >= 1, got {x.shape[0]}")
    n = (x.shape[0] + 1) // 2
    idx = np.arange(n)
    return x[idx[:, None] + idx[None, :]]


def hankel_adjoint(c):
    """Adjoint of ``hankel_lift``: anti-diagonal sums, out[a] = sum_{i+j=a} C[i, j]."""
    c = np.asarray(c)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {c.shape}")
    n = c.shape[0]
    flipped = c[:, ::-1]
    return np.array([np.trace(flipped, offset=n - 1 - a) for a in range(2 * n - 1)])


def toeplitz_lift(t):
    """Map t in C^n to the Hermitian Toeplitz matrix with T[i, j] = t[i - j] for i >= j.

    The upper triangle is the conjugate of the lower one; t[0] must be (numerically)
    real for the result to be Hermitian.
    """
    t = np.asarray(t)
    if t.ndim != 1 or t.shape[0] < 1:
        raise ValueError(f"expected a nonempty vector, got shape {t.shape}")
    t0 = complex(t[0])
    if abs(t0.imag) > 1e-12 * max(1.0, abs(t0)):
        raise ValueError(f"t[0] must be real (diagonal of a Hermitian matrix), got {t0}")
    return scipy.linalg.toeplitz(t, np.conj(t))


def toeplitz_adjoint(c):
    """Adjoint of ``toeplitz_lift``: subdiagonal sums, out[a] = sum_{i-j=a} C[i, j]."""
    c = np.asarray(c)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {c.shape}")
    n = c.shape[0]
    return np.array([np.trace(c, offset=-a) for a in range(n)])


def assemble_block(x, t):
    """Assemble the 2n x 2n Hermitian block matrix [[T conj(t), H conj(x)], [H x, T t]].

    ``x`` has length 2n-1 and ``t`` length n.  Hermitian holds exactly by
    construction because Hankel matrices equal their transpose, so the
    conjugate of ``hankel_lift(x)`` is its conjugate transpose.
    """
    x = np.asarray(x)
    t = np.asarray(t)
    if x.ndim != 1 or t.ndim != 1 or x.shape[0] != 2 * t.shape[0] - 1:
        raise ValueError(
            f"incompatible lengths: len(x)={x.shape} must equal 2*len(t)-1 with len(t)={t.shape}"
        )
    h = hankel_lift(x)
    tt = toeplitz_lift(t)
    return np.block([[tt.conj(), h.conj()], [h, tt]])


def psd_rank_project(w, k, herm_tol=1e-8):
    """Frobenius-nearest PSD matrix of rank at most ``k``.

    Eigendecomposes the (symmetrized) Hermitian input and keeps the largest
    min(k, #positive) eigenvalues, zeroing the rest.  Eigenvalues count as
    positive above 1e-12 times the largest one.

    Parameters
    ----------
    w : square Hermitian matrix (symmetrized internally; inputs asymmetric
        beyond ``herm_tol`` relative are rejected).
    k : int, target rank bound, 1 <= k <= dim.

    Returns
    -------
    PSD Hermitian matrix of the same shape with rank <= k.
    """
    w = np.asarray(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    dim = w.shape[0]
    if not 1 <= k <= dim:
        raise ValueError(f"rank bound k={k} out of range [1, {dim}]")
    scale = np.linalg.norm(w)
    if np.linalg.norm(w - w.conj().T) > herm_tol * max(1.0, scale):
        raise ValueError("input is not Hermitian within tolerance")
    ws = (w + w.conj().T) / 2.0
    vals, vecs = np.linalg.eigh(ws)  # ascending
    lam_max = vals[-1]
    if lam_max <= 0.0:
        return np.zeros_like(ws)
    keep = min(k, int(np.count_nonzero(vals > 1e-12 * lam_max)))
    if keep == 0:
        return np.zeros_like(ws)
    vals_k = vals[-keep:]
    vecs_k = vecs[:, -keep:]
    out = (vecs_k * vals_k) @ vecs_k.conj().T
    return (out + out.conj().T) / 2.0
