"""Pull DOAs, moduli, and phases out of a recovered Toeplitz parameter.

The Toeplitz matrix built from the solver output is (numerically) PSD with
rank K, so it factors as A_n(theta) diag(b) A_n(theta)^H over a Vandermonde
steering matrix.  The angles come out of the shift invariance of the top-K
eigenvector basis (ESPRIT with a plain least-squares solve), the moduli from a
real least-squares fit of the factorization, and the phases from a
pseudoinverse applied to the recovered snapshot matrix.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import steering_matrix
from .structured import toeplitz_lift

__all__ = [
    "EstimationResult",
    "NegativeModulusWarning",
    "DegeneratePhaseWarning",
    "vandermonde_decompose",
    "recover_phases",
    "estimate_parameters",
    "matched_differences",
    "match_rmse",
    "resolved",
]


class NegativeModulusWarning(UserWarning):
    """A least-squares modulus came out negative and was clamped to zero."""


class DegeneratePhaseWarning(UserWarning):
    """A source coefficient was too small to carry a phase; entry set to 1."""


@dataclass(frozen=True)
class EstimationResult:
    """Estimated source parameters plus the decomposition mismatch."""

    theta_hat: np.ndarray   # (K,) radians, sorted ascending
    b_hat: np.ndarray       # (K,) nonnegative
    phi_hat: np.ndarray     # (K, L) unit-modulus complex
    fit_residual: float

    def __post_init__(self):
        theta = np.asarray(self.theta_hat, dtype=float)
        if np.any(np.diff(theta) < 0):
            raise ValueError("theta_hat must be sorted ascending")
        phi = np.asarray(self.phi_hat)
        if phi.size and not np.all(np.abs(np.abs(phi) - 1.0) < 1e-9):
            raise ValueError("phi_hat entries must be unit modulus")


def _angles_from_unit_roots(z):
    """Map unit-circle roots e^{i pi sin(theta)} back to angles in [-pi/2, pi/2)."""
    s = np.angle(z) / np.pi
    s[s >= 1.0] = -1.0  # e^{i pi} belongs to sin(theta) = -1
    s = np.clip(s, -1.0, 1.0)
    return np.arcsin(s)


def vandermonde_decompose(t, k):
    """Recover (theta, b) with T(t) ~= A_n(theta) diag(b) A_n(theta)^H.

    Uses the shift invariance of the top-k eigenvector basis of the lifted
    Toeplitz matrix; exact for exact rank-k PSD inputs.  Returns angles sorted
    ascending with the moduli permuted to match.  Negative least-squares
    moduli are clamped to zero with a NegativeModulusWarning.
    """
    t = np.asarray(t, dtype=complex)
    n = t.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    big_t = toeplitz_lift(t)
    _, vecs = np.linalg.eigh(big_t)
    basis = vecs[:, -k:]
    shift, *_ = np.linalg.lstsq(basis[:-1], basis[1:], rcond=None)
    theta = _angles_from_unit_roots(np.linalg.eigvals(shift))
    order = np.argsort(theta)
    theta = theta[order]

    a = steering_matrix(theta, n)
    design = np.empty((2 * n * n, k))
    for j in range(k):
        outer = np.outer(a[:, j], a[:, j].conj())
        design[: n * n, j] = outer.real.ravel()
        design[n * n :, j] = outer.imag.ravel()
    target = np.concatenate([big_t.real.ravel(), big_t.imag.ravel()])
    b, *_ = np.linalg.lstsq(design, target, rcond=None)
    if np.any(b < 0):
        warnings.warn("negative modulus estimate clamped to zero", NegativeModulusWarning)
        b = np.maximum(b, 0.0)
    return theta, b


def recover_phases(x, theta, b):
    """Unit-modulus phase matrix from the recovered snapshots.

    Solves A(theta) S = X in least squares and normalizes each entry of S to
    the unit circle.  Entries with magnitude below 1e-12 carry no usable phase
    and are set to 1 (with a DegeneratePhaseWarning).
    """
    x = np.asarray(x, dtype=complex)
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise ValueError("moduli must be positive to retrieve phases")
    a = steering_matrix(theta, x.shape[0])
    s = np.linalg.pinv(a) @ x
    degenerate = np.abs(s) < 1e-12
    if np.any(degenerate):
        warnings.warn(
            f"{int(degenerate.sum())} phase entries degenerate; set to 1",
            DegeneratePhaseWarning,
        )
    return np.where(degenerate, 1.0 + 0.0j, np.exp(1j * np.angle(s)))


def estimate_parameters(x, t, k):
    """Full retrieval: angles and moduli from t, phases from x, plus the fit residual."""
    theta, b = vandermonde_decompose(t, k)
    b_safe = np.where(b > 0, b, 1e-12)
    phi = recover_phases(x, theta, b_safe)
    a = steering_matrix(theta, x.shape[0])
    fit = float(np.linalg.norm(x - a @ (b[:, None] * phi)))
    return EstimationResult(theta_hat=theta, b_hat=b, phi_hat=phi, fit_residual=fit)


def matched_differences(theta_hat, theta_true):
    """Signed errors after optimal assignment, aligned to the order of theta_true.

    The assignment minimizes the total absolute angle difference.
    """
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    theta_true = np.atleast_1d(np.asarray(theta_true, dtype=float))
    if theta_hat.shape != theta_true.shape:
        raise ValueError(f"length mismatch: {theta_hat.shape} vs {theta_true.shape}")
    cost = np.abs(theta_hat[:, None] - theta_true[None, :])
    rows, cols = linear_sum_assignment(cost)
    out = np.empty_like(theta_true)
    out[cols] = theta_hat[rows] - theta_true[cols]
    return out


def match_rmse(theta_hat, theta_true):
    """Permutation-matched root mean square DOA error, in degrees."""
    d = matched_differences(theta_hat, theta_true)
    return float(np.degrees(np.sqrt(np.mean(d**2))))


def resolved(theta_hat, theta_true):
    """Success rule: every matched error is below half the gap to the nearest true neighbor.

    ``theta_true`` must be sorted ascending.  With a single source there is no
    neighbor, so the estimate only has to land within 90 degrees.
    """
    theta_true = np.atleast_1d(np.asarray(theta_true, dtype=float))
    if np.any(np.diff(theta_true) < 0):
        raise ValueError("theta_true must be sorted ascending")
    err = np.abs(matched_differences(theta_hat, theta_true))
    k = theta_true.shape[0]
    if k == 1:
        return bool(err[0] < np.pi / 2)
    gaps = np.diff(theta_true)
    for i in range(k):
        limit = gaps[0] if i == 0 else gaps[-1] if i == k - 1 else min(gaps[i - 1], gaps[i])
        if not err[i] < limit / 2.0:
            return False
    return True
