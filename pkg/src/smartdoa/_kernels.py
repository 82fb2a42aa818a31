"""Numba kernels for the ADMM inner loop.

Everything here mirrors the numpy implementations in ``solver``/``structured``
with explicit loops over the small dense matrices (2n' is a few tens at most).
Only complex128 is supported.  Import of this module requires numba; callers
go through ``_accel.numba_enabled()`` first.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _psd_project(w, k):
    """Truncated eigendecomposition keeping the largest min(k, #positive) eigenvalues."""
    dim = w.shape[0]
    vals, vecs = np.linalg.eigh(w)  # ascending
    out = np.zeros((dim, dim), dtype=np.complex128)
    lam_max = vals[dim - 1]
    if lam_max <= 0.0:
        return out
    tau = 1e-12 * lam_max
    keep = 0
    idx = dim - 1
    while idx >= 0 and keep < k and vals[idx] > tau:
        keep += 1
        idx -= 1
    for m in range(dim - keep, dim):
        lam = vals[m]
        for a in range(dim):
            va = lam * vecs[a, m]
            for b in range(dim):
                out[a, b] += va * np.conj(vecs[b, m])
    return out


@njit(cache=True)
def _assemble_into(block, x_col, t, n):
    """Fill a 2n x 2n buffer with [[T conj(t), H conj(x)], [H x, T t]]."""
    for i in range(n):
        for j in range(n):
            if i >= j:
                tij = t[i - j]
            else:
                tij = np.conj(t[j - i])
            block[n + i, n + j] = tij
            block[i, j] = np.conj(tij)
            h = x_col[i + j]
            block[n + i, j] = h
            block[i, n + j] = np.conj(h)


@njit(cache=True)
def admm_loop(y, observed, k, feasibility, rho0, adapt_enabled, mu, tau_inc,
              tau_dec, eps_abs, eps_rel, max_iter, relax_step):
    """Run the full ADMM iteration to convergence or ``max_iter``.

    Parameters mirror the solver configuration; ``y`` is the (N', L) padded
    observation (zero off the observed rows) and ``observed`` the boolean row
    mask.  With ``relax_step > 0`` the rank budget starts at the full block
    size and steps down by one every ``relax_step`` iterations until it
    reaches k (a continuation warm start); convergence is only declared at
    the target budget.  Returns the final iterates plus per-iteration
    histories:
    (x, t, q, lam, rho, n_iter, primal_hist, dual_hist, rho_hist, converged).
    """
    n_full, n_snap = y.shape
    n = (n_full + 1) // 2
    two_n = 2 * n

    d_h = np.empty(n_full)
    for a in range(n_full):
        d_h[a] = min(a + 1, n_full - a)
    d_t = np.empty(n)
    for a in range(n):
        d_t[a] = n - a

    x = np.zeros((n_full, n_snap), dtype=np.complex128)
    t = np.zeros(n, dtype=np.complex128)
    q = np.zeros((n_snap, two_n, two_n), dtype=np.complex128)
    lam = np.zeros((n_snap, two_n, two_n), dtype=np.complex128)
    blocks = np.zeros((n_snap, two_n, two_n), dtype=np.complex128)
    prev_blocks = np.zeros((n_snap, two_n, two_n), dtype=np.complex128)
    work = np.zeros((two_n, two_n), dtype=np.complex128)
    hadj = np.zeros((n_full, n_snap), dtype=np.complex128)
    t_acc = np.zeros(n, dtype=np.complex128)

    primal_hist = np.zeros(max_iter)
    dual_hist = np.zeros(max_iter)
    rho_hist = np.zeros(max_iter)

    rho = rho0
    converged = False
    n_iter = 0

    relax_total = (two_n - k) * relax_step
    for it in range(max_iter):
        k_budget = k
        if relax_step > 0 and it < relax_total:
            k_budget = two_n - it // relax_step
        # Q step: rank-limited PSD projection of M - lam/rho, per snapshot.
        for l in range(n_snap):
            for a in range(two_n):
                for b in range(two_n):
                    work[a, b] = blocks[l, a, b] - lam[l, a, b] / rho
            for a in range(two_n):
                for b in range(a, two_n):
                    v = 0.5 * (work[a, b] + np.conj(work[b, a]))
                    work[a, b] = v
                    work[b, a] = np.conj(v)
            q[l] = _psd_project(work, k_budget)

        # Accumulate, over W = Q + lam/rho: the Toeplitz adjoint of
        # conj(W1) + W3 (for t) and the Hankel adjoint of W2 (for x).
        for a in range(n):
            t_acc[a] = 0.0
        for l in range(n_snap):
            for a in range(two_n):
                for b in range(two_n):
                    work[a, b] = q[l, a, b] + lam[l, a, b] / rho
            for a in range(n):
                s = 0.0 + 0.0j
                for j in range(n - a):
                    s += np.conj(work[j + a, j]) + work[n + j + a, n + j]
                t_acc[a] += s
            for a in range(n_full):
                s = 0.0 + 0.0j
                lo = max(0, a - n + 1)
                hi = min(a, n - 1)
                for i in range(lo, hi + 1):
                    s += work[n + i, a - i]
                hadj[a, l] = s

        # t step: closed-form structured least squares.
        for a in range(n):
            t[a] = t_acc[a] / (2.0 * n_snap * d_t[a])
        t[0] = complex(t[0].real, 0.0)

        # X step.
        if feasibility:
            for l in range(n_snap):
                for row in range(n_full):
                    if observed[row]:
                        x[row, l] = y[row, l]
                    else:
                        x[row, l] = hadj[row, l] / d_h[row]
        else:
            for l in range(n_snap):
                for row in range(n_full):
                    mask = 1.0 if observed[row] else 0.0
                    x[row, l] = (y[row, l] + rho * hadj[row, l]) / (mask + rho * d_h[row])

        # Refresh the block matrices and take the dual step.
        primal = 0.0
        dual = 0.0
        q_norm = 0.0
        m_norm = 0.0
        lam_norm = 0.0
        for l in range(n_snap):
            prev_blocks[l] = blocks[l]
            _assemble_into(blocks[l], x[:, l], t, n)
            pr = 0.0
            du = 0.0
            qn = 0.0
            mn = 0.0
            ln = 0.0
            for a in range(two_n):
                for b in range(two_n):
                    r = q[l, a, b] - blocks[l, a, b]
                    lam[l, a, b] += rho * r
                    pr += r.real * r.real + r.imag * r.imag
                    d = blocks[l, a, b] - prev_blocks[l, a, b]
                    du += d.real * d.real + d.imag * d.imag
                    qv = q[l, a, b]
                    qn += qv.real * qv.real + qv.imag * qv.imag
                    mv = blocks[l, a, b]
                    mn += mv.real * mv.real + mv.imag * mv.imag
            for a in range(two_n):
                for b in range(a, two_n):
                    v = 0.5 * (lam[l, a, b] + np.conj(lam[l, b, a]))
                    lam[l, a, b] = v
                    lam[l, b, a] = np.conj(v)
            for a in range(two_n):
                for b in range(two_n):
                    lv = lam[l, a, b]
                    ln += lv.real * lv.real + lv.imag * lv.imag
            primal += np.sqrt(pr)
            dual += rho * np.sqrt(du)
            q_norm += np.sqrt(qn)
            m_norm += np.sqrt(mn)
            lam_norm += np.sqrt(ln)

        primal_hist[n_iter] = primal
        dual_hist[n_iter] = dual
        rho_hist[n_iter] = rho
        n_iter += 1

        base = np.sqrt(n_snap) * two_n * eps_abs
        if (it >= relax_total and primal <= base + eps_rel * max(q_norm, m_norm)
                and dual <= base + eps_rel * lam_norm):
            converged = True
            break

        if adapt_enabled:
            if primal > mu * dual:
                rho *= tau_inc
                for l in range(n_snap):
                    for a in range(two_n):
                        for b in range(two_n):
                            lam[l, a, b] *= tau_inc
            elif dual > mu * primal:
                rho /= tau_dec
                for l in range(n_snap):
                    for a in range(two_n):
                        for b in range(two_n):
                            lam[l, a, b] /= tau_dec

    return (x, t, q, lam, rho, n_iter, primal_hist[:n_iter], dual_hist[:n_iter],
            rho_hist[:n_iter], converged)
