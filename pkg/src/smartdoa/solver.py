"""ADMM solver for the rank-constrained Hankel-Toeplitz recovery problems.

Two problem modes share one iteration:

* ``"feasibility"`` -- noiseless: the observed rows of X are pinned to the
  data and only the hidden rows and t are free.
* ``"least_squares"`` -- noisy: minimize ||Y - X||_F^2 on the observed rows.

Each iteration projects the per-snapshot block matrices onto the PSD
rank-<=K set, then updates t and X in closed form through the operator
adjoints, then takes the dual step.  The loop runs either as pure numpy
(reference path, built from the ops below) or through the numba kernel in
``_kernels``; see ``_accel``.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from ._accel import numba_enabled
from .model import ArrayGeometry, Observation
from .structured import (
    assemble_block,
    hankel_adjoint,
    psd_rank_project,
    toeplitz_adjoint,
    weight_diagonals,
)

__all__ = [
    "ProblemSpec",
    "AdaptConfig",
    "SolverConfig",
    "SolverState",
    "SolveReport",
    "build_problem",
    "q_update",
    "t_update",
    "x_update",
    "lambda_update",
    "residuals",
    "rho_adapt",
    "solve",
    "load_solver_config",
    "write_diagnostics",
]

MODES = ("feasibility", "least_squares")


@dataclass(frozen=True)
class ProblemSpec:
    """One recovery problem on the (possibly padded) virtual aperture."""

    mode: str
    geometry: ArrayGeometry
    k: int
    y_masked: np.ndarray  # (N', L), zero off omega

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        y = np.asarray(self.y_masked, dtype=complex)
        if y.shape[0] != self.geometry.n_virtual:
            raise ValueError("y_masked rows must match the virtual aperture")
        object.__setattr__(self, "y_masked", y)

    @property
    def l(self):
        return self.y_masked.shape[1]

    def observed_mask(self):
        mask = np.zeros(self.geometry.n_virtual, dtype=bool)
        mask[list(self.geometry.omega)] = True
        return mask


@dataclass(frozen=True)
class AdaptConfig:
    """Residual-balancing penalty adaptation constants."""

    mu: float = 10.0
    tau_inc: float = 2.0
    tau_dec: float = 2.0


@dataclass
class SolverConfig:
    rho0: float = 1.0
    adapt: AdaptConfig | None = None
    eps_abs: float = 1e-8
    eps_rel: float = 1e-8
    max_iter: int = 3000
    # Rank-continuation warm start: with relax_step > 0 the projection budget
    # starts at the full block size and steps down by one every relax_step
    # iterations until it reaches k.  Cold-started feasibility runs with more
    # sources than sensors stall in a spurious limit cycle without this;
    # it is harmless (slightly slower) when the cold start already converges.
    relax_step: int = 0

    def __post_init__(self):
        if self.rho0 <= 0 or self.max_iter < 1 or self.eps_abs <= 0 or self.eps_rel <= 0:
            raise ValueError("rho0 and tolerances must be positive, max_iter >= 1")
        if self.relax_step < 0:
            raise ValueError("relax_step must be >= 0")

    @classmethod
    def noiseless(cls, max_iter=10_000, relax_step=500):
        """Fixed penalty, no adaptation; the feasibility-mode default."""
        return cls(rho0=1.0, adapt=None, max_iter=max_iter, relax_step=relax_step)

    @classmethod
    def noisy(cls, n_virtual, l, max_iter=3000):
        """Adaptive penalty started at 1/sqrt(N + L); the least-squares default."""
        return cls(rho0=1.0 / np.sqrt(n_virtual + l), adapt=AdaptConfig(), max_iter=max_iter)

    @classmethod
    def default_for(cls, spec, max_iter=None):
        if spec.mode == "feasibility":
            return cls.noiseless() if max_iter is None else cls.noiseless(max_iter)
        if max_iter is None:
            return cls.noisy(spec.geometry.n_virtual, spec.l)
        return cls.noisy(spec.geometry.n_virtual, spec.l, max_iter)


@dataclass
class SolverState:
    """Mutable ADMM iterates; owned by a single solve."""

    x: np.ndarray        # (N', L)
    t: np.ndarray        # (n',)
    q: np.ndarray        # (L, 2n', 2n')
    lam: np.ndarray      # (L, 2n', 2n')
    rho: float
    iter: int = 0
    primal_hist: list = field(default_factory=list)
    dual_hist: list = field(default_factory=list)
    rho_hist: list = field(default_factory=list)

    @classmethod
    def zeros(cls, n_virtual, l, rho0):
        n = (n_virtual + 1) // 2
        return cls(
            x=np.zeros((n_virtual, l), dtype=complex),
            t=np.zeros(n, dtype=complex),
            q=np.zeros((l, 2 * n, 2 * n), dtype=complex),
            lam=np.zeros((l, 2 * n, 2 * n), dtype=complex),
            rho=float(rho0),
        )

    def blocks(self):
        """Current block matrices M(X[:, l], t), stacked over snapshots."""
        return np.stack([assemble_block(self.x[:, l], self.t) for l in range(self.x.shape[1])])


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    final_primal: float
    final_dual: float
    x_hat: np.ndarray
    t_hat: np.ndarray
    primal_hist: np.ndarray
    dual_hist: np.ndarray
    rho_hist: np.ndarray
    runtime_s: float = 0.0


def build_problem(obs, k, mode=None):
    """Choose the virtual aperture, pad the data, and pick the problem mode.

    The aperture grows to the smallest odd N' >= max(N, 2K+1) so that the
    half-size lifts remain low rank even when K exceeds the physical sensor
    count; the observed-row set is unchanged by padding.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    geom = obs.geometry
    n_prime = max(geom.n_virtual, 2 * k + 1)
    if n_prime % 2 == 0:
        n_prime += 1
    y = obs.y
    if n_prime > geom.n_virtual:
        y = np.vstack([y, np.zeros((n_prime - geom.n_virtual, y.shape[1]), dtype=complex)])
    if mode is None:
        mode = "feasibility" if obs.snr_db is None else "least_squares"
    return ProblemSpec(mode=mode, geometry=ArrayGeometry(n_prime, geom.omega), k=k, y_masked=y)


def _hermitize(m):
    return (m + np.conj(np.swapaxes(m, -1, -2))) / 2.0


def _scaled_duals(state):
    """W^l = Q^l + Lambda^l / rho, the matrices the closed-form updates fit."""
    return state.q + state.lam / state.rho


def q_update(state, k):
    """Project M^l - Lambda^l/rho onto the PSD rank-<=k set, per snapshot."""
    blocks = state.blocks()
    return np.stack([
        psd_rank_project(_hermitize(blocks[l] - state.lam[l] / state.rho), k)
        for l in range(blocks.shape[0])
    ])


def t_update(state):
    """Closed-form Toeplitz parameter: average the matched blocks of W over snapshots."""
    w = _scaled_duals(state)
    n = state.t.shape[0]
    n_snap = w.shape[0]
    _, d_t = weight_diagonals(n)
    acc = np.zeros(n, dtype=complex)
    for l in range(n_snap):
        acc += toeplitz_adjoint(np.conj(w[l, :n, :n]) + w[l, n:, n:])
    t = acc / (2.0 * n_snap * d_t)
    t[0] = t[0].real
    return t


def x_update(state, spec):
    """Closed-form X update; the branch depends on the problem mode."""
    w = _scaled_duals(state)
    n = state.t.shape[0]
    n_full = spec.geometry.n_virtual
    d_h, _ = weight_diagonals(n)
    h = np.column_stack([hankel_adjoint(w[l, n:, :n]) for l in range(w.shape[0])])
    observed = spec.observed_mask()
    if spec.mode == "feasibility":
        x = h / d_h[:, None]
        x[observed] = spec.y_masked[observed]
        return x
    denom = observed.astype(float) + state.rho * d_h
    return (spec.y_masked + state.rho * h) / denom[:, None]


def lambda_update(state, blocks=None):
    """Dual ascent Lambda^l += rho (Q^l - M^l), symmetrized against rounding drift."""
    if blocks is None:
        blocks = state.blocks()
    return _hermitize(state.lam + state.rho * (state.q - blocks))


def residuals(state, prev_blocks, blocks=None):
    """Primal and dual residuals: sum_l ||Q-M||_F and sum_l ||rho (M - M_prev)||_F."""
    if blocks is None:
        blocks = state.blocks()
    primal = sum(np.linalg.norm(state.q[l] - blocks[l]) for l in range(blocks.shape[0]))
    dual = sum(state.rho * np.linalg.norm(blocks[l] - prev_blocks[l])
               for l in range(blocks.shape[0]))
    return float(primal), float(dual)


def rho_adapt(state, primal, dual, adapt):
    """Residual balancing: returns (new_rho, new_lam).

    The scaled dual Lambda/rho is held fixed across penalty changes, so
    Lambda is rescaled by the same factor as rho.
    """
    rho, lam = state.rho, state.lam
    if adapt is None:
        return rho, lam
    if primal > adapt.mu * dual:
        return rho * adapt.tau_inc, lam * adapt.tau_inc
    if dual > adapt.mu * primal:
        return rho / adapt.tau_dec, lam / adapt.tau_dec
    return rho, lam


def _stop_thresholds(state, blocks, cfg):
    n_snap, two_n = blocks.shape[0], blocks.shape[1]
    base = np.sqrt(n_snap) * two_n * cfg.eps_abs
    q_norm = sum(np.linalg.norm(state.q[l]) for l in range(n_snap))
    m_norm = sum(np.linalg.norm(blocks[l]) for l in range(n_snap))
    lam_norm = sum(np.linalg.norm(state.lam[l]) for l in range(n_snap))
    return base + cfg.eps_rel * max(q_norm, m_norm), base + cfg.eps_rel * lam_norm


def _solve_numpy(spec, cfg):
    state = SolverState.zeros(spec.geometry.n_virtual, spec.l, cfg.rho0)
    two_n = 2 * state.t.shape[0]
    relax_total = (two_n - spec.k) * cfg.relax_step
    prev_blocks = state.blocks()
    converged = False
    primal = dual = np.inf
    for it in range(cfg.max_iter):
        k_budget = spec.k
        if cfg.relax_step > 0 and it < relax_total:
            k_budget = two_n - it // cfg.relax_step
        state.q = q_update(state, k_budget)
        state.t = t_update(state)
        state.x = x_update(state, spec)
        blocks = state.blocks()
        state.lam = lambda_update(state, blocks)
        primal, dual = residuals(state, prev_blocks, blocks)
        state.primal_hist.append(primal)
        state.dual_hist.append(dual)
        state.rho_hist.append(state.rho)
        state.iter += 1
        eps_pri, eps_dual = _stop_thresholds(state, blocks, cfg)
        if it >= relax_total and primal <= eps_pri and dual <= eps_dual:
            converged = True
            break
        state.rho, state.lam = rho_adapt(state, primal, dual, cfg.adapt)
        prev_blocks = blocks
    return state, converged, primal, dual


def _solve_numba(spec, cfg):
    from . import _kernels

    adapt = cfg.adapt if cfg.adapt is not None else AdaptConfig()
    (x, t, q, lam, rho, n_iter, primal_hist, dual_hist, rho_hist, converged) = _kernels.admm_loop(
        np.ascontiguousarray(spec.y_masked, dtype=np.complex128),
        spec.observed_mask(),
        spec.k,
        spec.mode == "feasibility",
        float(cfg.rho0),
        cfg.adapt is not None,
        float(adapt.mu),
        float(adapt.tau_inc),
        float(adapt.tau_dec),
        float(cfg.eps_abs),
        float(cfg.eps_rel),
        int(cfg.max_iter),
        int(cfg.relax_step),
    )
    state = SolverState(x=x, t=t, q=q, lam=lam, rho=rho, iter=int(n_iter),
                        primal_hist=list(primal_hist), dual_hist=list(dual_hist),
                        rho_hist=list(rho_hist))
    primal = primal_hist[-1] if n_iter else np.inf
    dual = dual_hist[-1] if n_iter else np.inf
    return state, bool(converged), float(primal), float(dual)


def solve(spec, cfg=None, accelerate=None, diag_csv=None):
    """Run ADMM from the all-zero start; never raises on non-convergence.

    Parameters
    ----------
    spec : ProblemSpec
    cfg : SolverConfig, defaults to the mode-appropriate preset.
    accelerate : bool or None; None defers to the SMARTDOA_NUMBA env flag.
    diag_csv : optional path receiving one "iter,rho,primal,dual" row per iteration.
    """
    if cfg is None:
        cfg = SolverConfig.default_for(spec)
    if accelerate is None:
        accelerate = numba_enabled()
    start = time.perf_counter()
    if accelerate:
        state, converged, primal, dual = _solve_numba(spec, cfg)
    else:
        state, converged, primal, dual = _solve_numpy(spec, cfg)
    runtime = time.perf_counter() - start
    report = SolveReport(
        converged=converged,
        iterations=state.iter,
        final_primal=primal,
        final_dual=dual,
        x_hat=state.x,
        t_hat=state.t,
        primal_hist=np.asarray(state.primal_hist),
        dual_hist=np.asarray(state.dual_hist),
        rho_hist=np.asarray(state.rho_hist),
        runtime_s=runtime,
    )
    if diag_csv is not None:
        write_diagnostics(report, diag_csv)
    return report


def write_diagnostics(report, path):
    """Per-iteration diagnostic dump: iter, rho, primal, dual."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iter,rho,primal,dual\n")
        for i in range(report.iterations):
            fh.write(f"{i + 1},{report.rho_hist[i]!r},{report.primal_hist[i]!r},"
                     f"{report.dual_hist[i]!r}\n")


def load_solver_config(path):
    """Read a key-value solver config file mirroring SolverConfig."""
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed solver config line: {raw.rstrip()}")
            key, value = line.split("=", 1)
            fields[key.strip().lower()] = value.strip()
    adapt = None
    if fields.get("adapt", "off").lower() in ("on", "true", "1", "yes"):
        adapt = AdaptConfig(
            mu=float(fields.get("mu", 10.0)),
            tau_inc=float(fields.get("tau_inc", 2.0)),
            tau_dec=float(fields.get("tau_dec", 2.0)),
        )
    return SolverConfig(
        rho0=float(fields.get("rho0", 1.0)),
        adapt=adapt,
        eps_abs=float(fields.get("eps_abs", 1e-8)),
        eps_rel=float(fields.get("eps_rel", 1e-8)),
        max_iter=int(fields.get("max_iter", 3000)),
    )
