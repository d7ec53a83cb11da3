"""Compiled inner loops.

One outer iteration of the alternating solver and the logistic-regression
gradient descent, written for numba.  The line search makes the same
accept/reject decisions as :func:`snmf.factorization.pgd_step`;
``tests/test_kernels.py`` checks the two against each other.

Inside the kernels ``w`` is an (r, 1) column and ``b`` a (1, 1) array so that
all four blocks share one code path.

The reconstruction term is quadratic in U and in V, so a trial step D on
either block changes it by exactly ``<D, G_f> + 0.5 <D^T D, V V^T>`` (or the
V analogue), where G_f is the reconstruction gradient.  Trial steps are
screened with this O(n r^2) expression and only a step that passes is
evaluated exactly, which keeps large problems cheap without changing which
step is accepted.
"""

import numpy as np
from numba import njit

BLOCK_U, BLOCK_V, BLOCK_W, BLOCK_B = 0, 1, 2, 3

# relative slack on the screening test; exact evaluation has the final word
SCREEN_SLACK = 1e-10


@njit(cache=True)
def _softplus(z):
    return max(z, 0.0) + np.log1p(np.exp(-abs(z)))


@njit(cache=True)
def _sigmoid(z):
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def _lf(X, U, V):
    P = np.dot(U, V)
    n, m = X.shape
    acc = 0.0
    for i in range(n):
        for j in range(m):
            d = X[i, j] - P[i, j]
            acc += d * d
    return 0.5 * acc


@njit(cache=True)
def _llr(U, y, w, b, alpha):
    if alpha == 0.0:
        return 0.0
    n, r = U.shape
    acc = 0.0
    for i in range(n):
        s = b[0, 0]
        for k in range(r):
            s += U[i, k] * w[k, 0]
        acc += _softplus(-y[i] * s)
    return alpha * acc


@njit(cache=True)
def _lreg(U, w, b, beta, gamma):
    ww = 0.0
    for k in range(w.shape[0]):
        ww += w[k, 0] * w[k, 0]
    uu = 0.0
    if gamma != 0.0:
        for i in range(U.shape[0]):
            for k in range(U.shape[1]):
                uu += U[i, k] * U[i, k]
    return 0.5 * beta * (ww + b[0, 0] * b[0, 0]) + 0.5 * gamma * uu


@njit(cache=True)
def terms(X, y, U, V, w, b, alpha, beta, gamma):
    lf = _lf(X, U, V)
    llr = _llr(U, y, w, b, alpha)
    lr = _lreg(U, w, b, beta, gamma)
    return lf + llr + lr, lf, llr, lr


@njit(cache=True)
def _margin_weights(y, U, w, b):
    n, r = U.shape
    out = np.empty(n)
    for i in range(n):
        s = b[0, 0]
        for k in range(r):
            s += U[i, k] * w[k, 0]
        out[i] = y[i] * _sigmoid(-y[i] * s)
    return out


@njit(cache=True)
def _recon_gradient(which, X, U, V):
    """Reconstruction gradient of block U or V and the Gram matrix of the other factor."""
    if which == BLOCK_U:
        gram = np.dot(V, V.T)
        return np.dot(U, gram) - np.dot(X, V.T), gram
    gram = np.dot(U.T, U)
    return np.dot(gram, V) - np.dot(U.T, X), gram


@njit(cache=True)
def _gradient(which, X, y, U, V, w, b, alpha, beta, gamma, Gf):
    """Gradient of the total objective; ``Gf`` is the reconstruction part for U and V."""
    n, r = U.shape
    if which == BLOCK_U:
        G = Gf.copy()
        if gamma != 0.0:
            for i in range(n):
                for k in range(r):
                    G[i, k] += gamma * U[i, k]
        if alpha != 0.0:
            mw = _margin_weights(y, U, w, b)
            for i in range(n):
                for k in range(r):
                    G[i, k] -= alpha * mw[i] * w[k, 0]
        return G
    if which == BLOCK_V:
        return Gf.copy()
    mw = _margin_weights(y, U, w, b)
    if which == BLOCK_W:
        G = np.empty((r, 1))
        for k in range(r):
            acc = 0.0
            for i in range(n):
                acc += U[i, k] * mw[i]
            G[k, 0] = beta * w[k, 0] - alpha * acc
        return G
    G = np.empty((1, 1))
    G[0, 0] = beta * b[0, 0] - alpha * np.sum(mw)
    return G


@njit(cache=True)
def _lf_change(which, D, Gf, gram):
    """Linear and quadratic parts of the reconstruction change for a step D on U or V."""
    lin = 0.0
    for i in range(D.shape[0]):
        for k in range(D.shape[1]):
            lin += D[i, k] * Gf[i, k]
    quad = 0.0
    if which == BLOCK_U:
        # sum_i D_i gram D_i^T
        r = D.shape[1]
        for i in range(D.shape[0]):
            for k in range(r):
                dk = D[i, k]
                if dk == 0.0:
                    continue
                acc = 0.0
                for l in range(r):
                    acc += gram[k, l] * D[i, l]
                quad += dk * acc
    else:
        # <gram, D D^T>
        DDt = np.dot(D, D.T)
        for k in range(gram.shape[0]):
            for l in range(gram.shape[1]):
                quad += gram[k, l] * DDt[k, l]
    return lin, 0.5 * quad


@njit(cache=True)
def _terms_with(which, T, X, y, U, V, w, b, alpha, beta, gamma, lf, llr, lr):
    """Objective components with block ``which`` replaced by ``T``.

    Only the components the block touches are recomputed; the total is
    summed in the same order as :func:`terms`, so it is bit-identical to a
    full evaluation.
    """
    if which == BLOCK_U:
        lf = _lf(X, T, V)
        llr = _llr(T, y, w, b, alpha)
        lr = _lreg(T, w, b, beta, gamma)
    elif which == BLOCK_V:
        lf = _lf(X, U, T)
    elif which == BLOCK_W:
        llr = _llr(U, y, T, b, alpha)
        lr = _lreg(U, T, b, beta, gamma)
    else:
        llr = _llr(U, y, w, T, alpha)
        lr = _lreg(U, w, T, beta, gamma)
    return lf + llr + lr, lf, llr, lr


@njit(cache=True)
def _screen(which, T, D, Gf, gram, y, w, b, alpha, beta, gamma, lf, llr, lr):
    """Cheap estimate of the total at T (blocks U, V) and its rounding allowance."""
    lin, quad = _lf_change(which, D, Gf, gram)
    if which == BLOCK_U:
        llr = _llr(T, y, w, b, alpha)
        lr = _lreg(T, w, b, beta, gamma)
    total = (lf + lin + quad) + llr + lr
    slack = SCREEN_SLACK * (abs(lf) + abs(lin) + quad + abs(llr) + abs(lr))
    return total, slack


@njit(cache=True)
def _armijo(which, x, G, eta, X, y, U, V, w, b, alpha, beta, gamma,
            current, ratio, coeff, max_backtracks, Gf, gram):
    """Armijo search along -G for block ``which``.

    ``current`` holds (total, lf, llr, lr) at the current iterate.  Returns
    (new value, new components, accepted step, stalled).
    """
    if not np.any(G != 0.0):
        return x, current, 0.0, False
    f0, lf, llr, lr = current
    quadratic = which <= BLOCK_V
    T = np.empty_like(x)
    D = np.empty_like(x)
    for _ in range(max_backtracks + 1):
        finite = True
        dec = 0.0
        for i in range(x.shape[0]):
            for k in range(x.shape[1]):
                t = x[i, k] - eta * G[i, k]
                if quadratic and t < 0.0:
                    t = 0.0
                if not np.isfinite(t):
                    finite = False
                T[i, k] = t
                D[i, k] = t - x[i, k]
                dec += G[i, k] * D[i, k]
        if finite:
            promising = True
            if quadratic:
                est, slack = _screen(which, T, D, Gf, gram, y, w, b, alpha, beta, gamma,
                                     lf, llr, lr)
                promising = est <= f0 + slack and est <= f0 + coeff * dec + slack
            if promising:
                trial = _terms_with(which, T, X, y, U, V, w, b, alpha, beta, gamma, lf, llr, lr)
                f1 = trial[0]
                if f1 <= f0 and f1 <= f0 + coeff * dec:
                    return T, trial, eta, False
        eta *= ratio
    return x, current, 0.0, True


@njit(cache=True)
def outer_iteration(X, y, U, V, w, b, alpha, beta, gamma, n_blocks, current,
                    steps, stalls, initial_step, ratio, coeff, max_backtracks,
                    warm_factor, max_step):
    """Update blocks U, V[, w, b] once each.

    ``current`` is the (total, lf, llr, lr) tuple at entry; the tuple at exit
    is returned with the new iterates.  ``steps`` and ``stalls`` are updated
    in place.
    """
    empty = np.empty((0, 0))
    for which in range(n_blocks):
        if which <= BLOCK_V:
            Gf, gram = _recon_gradient(which, X, U, V)
        else:
            Gf, gram = empty, empty
        G = _gradient(which, X, y, U, V, w, b, alpha, beta, gamma, Gf)
        if which == BLOCK_U:
            x = U
        elif which == BLOCK_V:
            x = V
        elif which == BLOCK_W:
            x = w
        else:
            x = b
        new, current, eta, stalled = _armijo(which, x, G, steps[which], X, y, U, V, w, b,
                                             alpha, beta, gamma, current, ratio, coeff,
                                             max_backtracks, Gf, gram)
        if stalled:
            stalls[which] += 1
            steps[which] = initial_step
        elif eta > 0:
            steps[which] = min(eta * warm_factor, max_step)
        if which == BLOCK_U:
            U = new
        elif which == BLOCK_V:
            V = new
        elif which == BLOCK_W:
            w = new
        else:
            b = new
    return U, V, w, b, current


TINY = np.finfo(np.float64).tiny


@njit(cache=True)
def run(X, y, U, V, w, b, alpha, beta, gamma, n_blocks, trace, steps, stalls,
        rel_tol, initial_step, ratio, coeff, max_backtracks, warm_factor, max_step):
    """Iterate :func:`outer_iteration` until the relative objective change
    drops below ``rel_tol`` or ``trace`` (one row per record) is full.

    Row 0 of ``trace`` receives the initial (total, lf, llr, lr).  Returns
    (U, V, w, b, iterations, converged).
    """
    current = terms(X, y, U, V, w, b, alpha, beta, gamma)
    for c in range(4):
        trace[0, c] = current[c]
    t = 0
    converged = False
    while t < trace.shape[0] - 1:
        t += 1
        f_prev = current[0]
        U, V, w, b, current = outer_iteration(
            X, y, U, V, w, b, alpha, beta, gamma, n_blocks, current, steps, stalls,
            initial_step, ratio, coeff, max_backtracks, warm_factor, max_step)
        for c in range(4):
            trace[t, c] = current[c]
        if abs(f_prev - current[0]) / max(abs(f_prev), TINY) < rel_tol:
            converged = True
            break
    return U, V, w, b, t, converged


@njit(cache=True)
def _lr_objective(U, y, theta, beta):
    r = U.shape[1]
    s = U @ theta[:r]
    acc = 0.0
    for i in range(s.shape[0]):
        acc += _softplus(-y[i] * (s[i] + theta[r]))
    return acc + 0.5 * beta * np.dot(theta, theta)


@njit(cache=True)
def _lr_gradient(U, y, theta, beta):
    r = U.shape[1]
    s = U @ theta[:r]
    mw = np.empty(s.shape[0])
    for i in range(s.shape[0]):
        mw[i] = y[i] * _sigmoid(-y[i] * (s[i] + theta[r]))
    g = np.empty(r + 1)
    g[:r] = beta * theta[:r] - U.T @ mw
    g[r] = beta * theta[r] - np.sum(mw)
    return g


@njit(cache=True)
def logreg_descent(U, y, beta, tol, max_iter, initial_step, ratio, coeff,
                   max_backtracks, max_step):
    """Gradient descent with Armijo backtracking from a Barzilai-Borwein trial step.

    Returns (theta, loss, gradient norm, iterations).
    """
    r = U.shape[1]
    theta = np.zeros(r + 1)
    f = _lr_objective(U, y, theta, beta)
    g = _lr_gradient(U, y, theta, beta)
    trial = initial_step
    it = 0
    while it < max_iter:
        gnorm = np.sqrt(np.dot(g, g))
        if gnorm <= tol * (1.0 + f):
            break
        eta = trial
        accepted = False
        for _ in range(max_backtracks + 1):
            cand = theta - eta * g
            f1 = _lr_objective(U, y, cand, beta)
            if np.isfinite(f1) and f1 <= f and f1 <= f - coeff * eta * gnorm * gnorm:
                accepted = True
                break
            eta *= ratio
        if not accepted:
            break
        g1 = _lr_gradient(U, y, cand, beta)
        s = cand - theta
        dy = g1 - g
        sy = np.dot(s, dy)
        trial = min(np.dot(s, s) / sy, max_step) if sy > 0 else initial_step
        theta, f, g = cand, f1, g1
        it += 1
    return theta, f, np.sqrt(np.dot(g, g)), it
