"""Ground-truth synthesis for constant-modulus DOA scenarios.

Steering vectors use half-wavelength sensor spacing, so sensor m responds to a
source at angle theta with exp(1j * pi * m * sin(theta)) (m = 0, 1, ...).
Sources have fixed modulus b_k across snapshots and per-snapshot phases
phi[k, l]; the noiseless observation is A(theta) @ diag(b) @ exp(1j*phi).

Sensor/row indices are 0-based throughout the Python API.  Scenario files (the
on-disk key-value format handled at the bottom of this module) use the
conventional 1-based sensor numbering and degrees for angles.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .structured import hankel_lift, toeplitz_lift  # noqa: F401  (re-exported for tests)

__all__ = [
    "ArrayGeometry",
    "SourceEnsemble",
    "Observation",
    "steering_vector",
    "steering_matrix",
    "synthesize",
    "apply_mask",
    "add_noise",
    "toeplitz_truth",
    "random_ensemble",
    "Scenario",
    "load_scenario",
    "save_scenario",
    "make_observation",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """Virtual uniform aperture of odd size plus the set of live sensors.

    ``omega`` holds 0-based row indices of the sensors that actually observe;
    rows outside it are structurally zero.
    """

    n_virtual: int
    omega: tuple

    def __post_init__(self):
        if self.n_virtual < 1 or self.n_virtual % 2 == 0:
            raise ValueError(f"n_virtual must be odd and positive, got {self.n_virtual}")
        om = tuple(int(q) for q in self.omega)
        if len(om) == 0:
            raise ValueError("omega must be nonempty")
        if any(om[i] >= om[i + 1] for i in range(len(om) - 1)):
            raise ValueError("omega must be strictly increasing")
        if om[0] < 0 or om[-1] >= self.n_virtual:
            raise ValueError(f"omega indices must lie in [0, {self.n_virtual})")
        object.__setattr__(self, "omega", om)

    @property
    def n_half(self):
        """Half dimension n' = (N' + 1) / 2 of the structured lifts."""
        return (self.n_virtual + 1) // 2

    @property
    def is_full(self):
        return len(self.omega) == self.n_virtual

    @classmethod
    def full(cls, n_virtual):
        return cls(n_virtual, tuple(range(n_virtual)))


@dataclass(frozen=True)
class SourceEnsemble:
    """Ground-truth parameters of K constant-modulus sources over L snapshots."""

    theta: np.ndarray  # (K,) radians in [-pi/2, pi/2), pairwise distinct
    b: np.ndarray      # (K,) positive moduli
    phi: np.ndarray    # (K, L) phases in radians

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        if theta.ndim != 1 or b.shape != theta.shape:
            raise ValueError("theta and b must be vectors of equal length")
        if phi.shape[0] != theta.shape[0]:
            raise ValueError(f"phi must have K={theta.shape[0]} rows, got {phi.shape}")
        if len(np.unique(theta)) != len(theta):
            raise ValueError("source angles must be pairwise distinct")
        if np.any(b <= 0):
            raise ValueError("all moduli must be positive")
        if np.any(theta < -np.pi / 2) or np.any(theta >= np.pi / 2):
            raise ValueError("angles must lie in [-pi/2, pi/2)")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "phi", phi)

    @property
    def k(self):
        return self.theta.shape[0]

    @property
    def l(self):
        return self.phi.shape[1]

    def signal(self):
        """The K x L constant-modulus source matrix diag(b) @ exp(1j*phi)."""
        return self.b[:, None] * np.exp(1j * self.phi)


@dataclass(frozen=True)
class Observation:
    """Snapshot matrix on the virtual aperture, zero outside observed rows."""

    y: np.ndarray
    geometry: ArrayGeometry
    snr_db: float | None = None  # None means noiseless

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex)
        if y.ndim != 2 or y.shape[0] != self.geometry.n_virtual:
            raise ValueError(f"y must be ({self.geometry.n_virtual}, L), got {y.shape}")
        hidden = np.setdiff1d(np.arange(self.geometry.n_virtual), self.geometry.omega)
        if hidden.size and np.any(y[hidden] != 0):
            raise ValueError("rows outside omega must be exactly zero")
        object.__setattr__(self, "y", y)

    @property
    def l(self):
        return self.y.shape[1]


def steering_vector(theta, n):
    """Unit-modulus array response [1, e^{i pi sin(theta)}, ..., e^{i pi (n-1) sin(theta)}]."""
    if not -np.pi / 2 <= theta < np.pi / 2:
        raise ValueError(f"theta={theta} outside [-pi/2, pi/2)")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return np.exp(1j * np.pi * np.arange(n) * np.sin(theta))


def steering_matrix(theta, n):
    """n x K matrix whose columns are steering vectors."""
    theta = np.atleast_1d(theta)
    return np.column_stack([steering_vector(th, n) for th in theta])


def synthesize(src, n, l):
    """Noiseless N x L observation A(theta) @ diag(b) @ exp(1j*phi)."""
    if l != src.l:
        raise ValueError(f"requested L={l} but ensemble has {src.l} snapshot phases")
    return steering_matrix(src.theta, n) @ src.signal()


def apply_mask(x, omega):
    """Keep rows listed in omega (0-based), zero all others."""
    x = np.asarray(x)
    omega = np.asarray(tuple(omega), dtype=int)
    if omega.size and (omega.min() < 0 or omega.max() >= x.shape[0]):
        raise IndexError(f"omega indices out of range for {x.shape[0]} rows")
    out = np.zeros_like(x)
    out[omega] = x[omega]
    return out


def add_noise(x, snr_db, omega, rng):
    """Add circular complex Gaussian noise on the observed rows at an exact SNR.

    The noise realization is rescaled so that
    10*log10(||X_omega||_F^2 / ||E_omega||_F^2) equals ``snr_db`` exactly.
    ``snr_db=inf`` returns the signal unchanged.  ``rng`` is an integer seed or
    a ``numpy.random.Generator``.
    """
    x = np.asarray(x, dtype=complex)
    if np.isinf(snr_db):
        return x.copy()
    omega = np.asarray(tuple(omega), dtype=int)
    sig = np.linalg.norm(x[omega])
    if sig == 0.0:
        raise ZeroDivisionError("cannot fix an SNR against an all-zero signal")
    rng = np.random.default_rng(rng)
    e = (rng.standard_normal((omega.size, x.shape[1]))
         + 1j * rng.standard_normal((omega.size, x.shape[1]))) / np.sqrt(2.0)
    e *= sig * 10.0 ** (-snr_db / 20.0) / np.linalg.norm(e)
    out = x.copy()
    out[omega] += e
    return out


def toeplitz_truth(src, n):
    """First column t of the rank-K PSD Toeplitz matrix A_n(theta) diag(b) A_n(theta)^H.

    Used as the oracle the solver's recovered t is compared against:
    t[a] = sum_k b_k * exp(1j * pi * a * sin(theta_k)), with t[0] real.
    """
    t = steering_matrix(src.theta, n) @ src.b.astype(complex)
    t[0] = t[0].real
    return t


def random_ensemble(rng, k, l, n_virtual, min_sep=None, b_range=(0.5, 2.0)):
    """Draw a well-conditioned random ensemble for tests and Monte Carlo suites.

    Angles are drawn uniformly with a minimum pairwise separation in the
    sin-domain (default 2/n_virtual) so steering matrices stay well
    conditioned; moduli are uniform on ``b_range`` and phases uniform on
    [0, 2*pi).
    """
    rng = np.random.default_rng(rng)
    if min_sep is None:
        min_sep = 2.0 / n_virtual
    while True:
        sines = rng.uniform(-1.0, 1.0, size=k)
        if k == 1 or np.min(np.diff(np.sort(sines))) >= min_sep:
            break
    theta = np.arcsin(sines)
    b = rng.uniform(b_range[0], b_range[1], size=k)
    phi = rng.uniform(0.0, 2.0 * np.pi, size=(k, l))
    return SourceEnsemble(theta=theta, b=b, phi=phi)


# ---------------------------------------------------------------------------
# Scenario files
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """One synthetic measurement setup, as described by a scenario file.

    ``n_sensors`` is the physical aperture; if it is even the scenario is
    embedded in a virtual aperture of size n_sensors + 1 with the extra sensor
    treated as missing.  ``omega`` uses 0-based indices here (files store them
    1-based).  ``phi`` is optional: when present those phases are used as-is,
    otherwise fresh phases are drawn per realization.
    """

    n_sensors: int
    k: int
    theta_deg: np.ndarray
    b: np.ndarray
    l: int
    seed: int = 0
    snr_db: float | None = None
    omega: tuple | None = None
    phi: np.ndarray | None = None

    def __post_init__(self):
        self.theta_deg = np.atleast_1d(np.asarray(self.theta_deg, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if self.theta_deg.shape[0] != self.k or self.b.shape[0] != self.k:
            raise ValueError("theta_deg and b must list exactly k values")
        if self.phi is not None:
            self.phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
            if self.phi.shape != (self.k, self.l):
                raise ValueError(f"phi must be (k, l)=({self.k}, {self.l}), got {self.phi.shape}")

    @property
    def geometry(self):
        n_virtual = self.n_sensors if self.n_sensors % 2 == 1 else self.n_sensors + 1
        omega = self.omega if self.omega is not None else tuple(range(self.n_sensors))
        return ArrayGeometry(n_virtual=n_virtual, omega=omega)

    def ensemble(self, rng=None):
        """Instantiate the source ensemble, drawing phases if not pinned."""
        if self.phi is not None:
            phi = self.phi
        else:
            rng = np.random.default_rng(self.seed if rng is None else rng)
            phi = rng.uniform(0.0, 2.0 * np.pi, size=(self.k, self.l))
        return SourceEnsemble(theta=np.deg2rad(self.theta_deg), b=self.b, phi=phi)


def make_observation(scenario, rng=None, ensemble=None):
    """Synthesize, mask, and (optionally) add noise for one scenario realization.

    A single ``rng`` drives both phase and noise draws, so a fixed seed yields
    a reproducible observation.
    """
    rng = np.random.default_rng(scenario.seed if rng is None else rng)
    geom = scenario.geometry
    if ensemble is None:
        ensemble = scenario.ensemble(rng)
    x = synthesize(ensemble, geom.n_virtual, scenario.l)
    x = apply_mask(x, geom.omega)
    if scenario.snr_db is None or np.isinf(scenario.snr_db):
        return Observation(y=x, geometry=geom, snr_db=None), ensemble
    y = add_noise(x, scenario.snr_db, geom.omega, rng)
    return Observation(y=y, geometry=geom, snr_db=scenario.snr_db), ensemble


def _parse_floats(text):
    return np.array([float(tok) for tok in text.replace(",", " ").split()])


def _format_floats(values):
    return ",".join(repr(float(v)) for v in np.atleast_1d(values))


def load_scenario(path):
    """Read a key-value scenario file (1-based omega, angles in degrees)."""
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed scenario line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            fields[key.strip().lower()] = value.strip()
    try:
        n_sensors = int(fields["n"])
        k = int(fields["k"])
        l = int(fields["l"])
        theta_deg = _parse_floats(fields["theta_deg"])
        b = _parse_floats(fields["b"])
    except KeyError as exc:
        raise ValueError(f"scenario file missing required key: {exc}") from exc
    seed = int(fields.get("seed", "0"))
    snr_db = None
    if "snr_db" in fields and fields["snr_db"].lower() not in ("", "none", "inf"):
        snr_db = float(fields["snr_db"])
    omega = None
    if "omega" in fields:
        omega = tuple(int(v) - 1 for v in _parse_floats(fields["omega"]).astype(int))
    phi = None
    if "phi" in fields:
        phi = np.vstack([_parse_floats(row) for row in fields["phi"].split(";")])
    return Scenario(n_sensors=n_sensors, k=k, theta_deg=theta_deg, b=b, l=l,
                    seed=seed, snr_db=snr_db, omega=omega, phi=phi)


def save_scenario(scenario, path):
    """Write a scenario back out in the key-value file format."""
    lines = [
        f"n = {scenario.n_sensors}",
        f"k = {scenario.k}",
        f"l = {scenario.l}",
        f"theta_deg = {_format_floats(scenario.theta_deg)}",
        f"b = {_format_floats(scenario.b)}",
        f"seed = {scenario.seed}",
    ]
    if scenario.snr_db is not None and not np.isinf(scenario.snr_db):
        lines.append(f"snr_db = {repr(float(scenario.snr_db))}")
    if scenario.omega is not None:
        lines.append("omega = " + ",".join(str(q + 1) for q in scenario.omega))
    if scenario.phi is not None:
        lines.append("phi = " + "; ".join(_format_floats(row) for row in scenario.phi))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
