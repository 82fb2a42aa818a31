"""Reference estimator for comparisons: Root-MUSIC on the sample covariance.

Root-MUSIC needs a contiguous run of sensors (the covariance of a general
sparse array has no usable Toeplitz/Vandermonde structure here) and can locate
at most M-1 sources from M sensors; both limits surface as ValueError so the
Monte Carlo harness can count the trial as failed.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["CovarianceEstimate", "sample_covariance", "root_music"]


@dataclass(frozen=True)
class CovarianceEstimate:
    """Sample covariance over the observed sensors."""

    r: np.ndarray
    snapshots_used: int

    def __post_init__(self):
        r = np.asarray(self.r, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError(f"covariance must be square, got {r.shape}")
        if np.linalg.norm(r - r.conj().T) > 1e-10 * max(1.0, np.linalg.norm(r)):
            raise ValueError("covariance must be Hermitian")
        object.__setattr__(self, "r", r)


def sample_covariance(y, omega=None):
    """R = Y_obs Y_obs^H / L over the observed rows.

    With ``omega`` given, ``y`` is the full masked matrix and the listed rows
    are extracted; they must form a contiguous run (a uniform subarray),
    otherwise Root-MUSIC does not apply and a ValueError is raised.
    """
    y = np.asarray(y, dtype=complex)
    if y.ndim != 2 or y.shape[1] < 1:
        raise ValueError(f"need an M x L snapshot matrix, got {y.shape}")
    if omega is not None:
        omega = np.asarray(tuple(omega), dtype=int)
        if omega.size > 1 and np.any(np.diff(omega) != 1):
            raise ValueError("observed sensors are not contiguous; Root-MUSIC unsupported")
        y = y[omega]
    l = y.shape[1]
    return CovarianceEstimate(r=y @ y.conj().T / l, snapshots_used=l)


def root_music(cov, k):
    """Estimate k DOAs by rooting the noise-subspace polynomial.

    Returns angles in radians, sorted ascending, all inside [-pi/2, pi/2).
    Raises ValueError when k >= M (not enough sensors to leave a noise
    subspace).
    """
    r = cov.r
    m = r.shape[0]
    if k >= m:
        raise ValueError(f"root_music cannot locate {k} sources with {m} sensors")
    _, vecs = np.linalg.eigh(r)
    noise = vecs[:, : m - k]
    c = noise @ noise.conj().T
    # p(z) = sum_d trace(C, d) z^(d + m - 1); np.roots wants highest degree first.
    coeffs = np.array([np.trace(c, offset=d) for d in range(m - 1, -m, -1)])
    roots = np.roots(coeffs)
    # Conjugate-reciprocal pairs straddle the unit circle: the lower-modulus
    # half picks one root per pair, then keep the k closest to the circle.
    inside = roots[np.argsort(np.abs(roots))][: m - 1]
    chosen = inside[np.argsort(np.abs(1.0 - np.abs(inside)))][:k]
    s = np.angle(chosen) / np.pi
    s[s >= 1.0] = -1.0
    return np.sort(np.arcsin(np.clip(s, -1.0, 1.0)))
