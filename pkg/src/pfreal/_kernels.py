"""Compiled numerical kernels: system evaluation, dense LU, Newton, path tracking.

Everything here works on plain arrays so it can be jitted; the public
wrappers live in ``network``, ``linalg`` and ``tracker``.
"""

import numpy as np
from numba import njit

SUCCESS, DIVERGED, MAX_STEPS, SINGULAR_END = 0, 1, 2, 3

PARAMETER, TOTAL_DEGREE = 0, 1

_jit = njit(cache=True, fastmath=False)


# --- system ---------------------------------------------------------------

@_jit
def flows(z, b, edges, n):
    nm1 = n - 1
    out = np.zeros(nm1, dtype=np.complex128)
    for e in range(edges.shape[0]):
        k = edges[e, 0]
        m = edges[e, 1]
        xk = 1.0 + 0j if k == 0 else z[k - 1]
        yk = 0j if k == 0 else z[nm1 + k - 1]
        xm = z[m - 1]
        ym = z[nm1 + m - 1]
        term = b[e] * (xk * ym - xm * yk)
        if k > 0:
            out[k - 1] += term
        out[m - 1] -= term
    return out


@_jit
def eval_system(z, b, edges, n, P):
    nm1 = n - 1
    out = np.empty(2 * nm1, dtype=np.complex128)
    for k in range(nm1):
        out[k] = z[k] * z[k] + z[nm1 + k] * z[nm1 + k] - 1.0
    f = flows(z, b, edges, n)
    for k in range(nm1):
        out[nm1 + k] = f[k] - P[k]
    return out


@_jit
def jacobian(z, b, edges, n):
    nm1 = n - 1
    N = 2 * nm1
    J = np.zeros((N, N), dtype=np.complex128)
    for k in range(nm1):
        J[k, k] = 2.0 * z[k]
        J[k, nm1 + k] = 2.0 * z[nm1 + k]
    for e in range(edges.shape[0]):
        k = edges[e, 0]
        m = edges[e, 1]
        be = b[e]
        xm = z[m - 1]
        ym = z[nm1 + m - 1]
        # d/dx, d/dy of be*(xk*ym - xm*yk); row m gets the negation
        if k == 0:
            J[nm1 + m - 1, nm1 + m - 1] -= be  # -be*(1*ym) w.r.t. ym
        else:
            xk = z[k - 1]
            yk = z[nm1 + k - 1]
            rk = nm1 + k - 1
            rm = nm1 + m - 1
            J[rk, k - 1] += be * ym
            J[rk, nm1 + k - 1] -= be * xm
            J[rk, m - 1] -= be * yk
            J[rk, nm1 + m - 1] += be * xk
            J[rm, k - 1] -= be * ym
            J[rm, nm1 + k - 1] += be * xm
            J[rm, m - 1] += be * yk
            J[rm, nm1 + m - 1] -= be * xk
    return J


# --- dense LU -------------------------------------------------------------

@_jit
def lu_factor(A, rel_tol):
    """In-place partial-pivot LU. Returns (LU, piv, ok)."""
    n = A.shape[0]
    LU = A.copy()
    piv = np.arange(n)
    scale = np.zeros(n)
    for i in range(n):
        s = 0.0
        for j in range(n):
            a = abs(LU[i, j])
            if a > s:
                s = a
        scale[i] = s
    for c in range(n):
        p = c
        best = abs(LU[c, c])
        for r in range(c + 1, n):
            a = abs(LU[r, c])
            if a > best:
                best = a
                p = r
        if best <= rel_tol * scale[piv[p]] or best == 0.0:
            return LU, piv, False
        if p != c:
            for j in range(n):
                tmp = LU[c, j]
                LU[c, j] = LU[p, j]
                LU[p, j] = tmp
            t = piv[c]
            piv[c] = piv[p]
            piv[p] = t
        d = LU[c, c]
        for r in range(c + 1, n):
            f = LU[r, c] / d
            LU[r, c] = f
            if f != 0:
                for j in range(c + 1, n):
                    LU[r, j] -= f * LU[c, j]
    return LU, piv, True


@_jit
def lu_apply(LU, piv, rhs):
    n = LU.shape[0]
    x = np.empty(n, dtype=np.complex128)
    for i in range(n):
        x[i] = rhs[piv[i]]
    for i in range(n):
        s = x[i]
        for j in range(i):
            s -= LU[i, j] * x[j]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for j in range(i + 1, n):
            s -= LU[i, j] * x[j]
        x[i] = s / LU[i, i]
    return x


@_jit
def lu_solve(A, rhs, rel_tol):
    LU, piv, ok = lu_factor(A, rel_tol)
    if not ok:
        return np.zeros(A.shape[0], dtype=np.complex128), False
    return lu_apply(LU, piv, rhs), True


@_jit
def cond1(A, rel_tol):
    """1-norm condition number via an explicit inverse; inf if singular."""
    n = A.shape[0]
    LU, piv, ok = lu_factor(A, rel_tol)
    if not ok:
        return np.inf
    anorm = 0.0
    for j in range(n):
        s = 0.0
        for i in range(n):
            s += abs(A[i, j])
        anorm = max(anorm, s)
    inorm = 0.0
    e = np.zeros(n, dtype=np.complex128)
    for j in range(n):
        e[:] = 0
        e[j] = 1.0
        col = lu_apply(LU, piv, e)
        s = 0.0
        for i in range(n):
            s += abs(col[i])
        inorm = max(inorm, s)
    return anorm * inorm


@_jit
def cond_scaled(A, z, rel_tol):
    """Condition of ``A`` after scaling columns by ``max(1, |z_j|)`` and rows to unit max."""
    n = A.shape[0]
    B = A.copy()
    for j in range(n):
        c = max(1.0, abs(z[j]))
        for i in range(n):
            B[i, j] *= c
    for i in range(n):
        r = 0.0
        for j in range(n):
            r = max(r, abs(B[i, j]))
        if r > 0.0:
            for j in range(n):
                B[i, j] /= r
    return cond1(B, rel_tol)


@_jit
def maxabs(v):
    s = 0.0
    for i in range(v.shape[0]):
        a = abs(v[i])
        if a > s:
            s = a
    return s


# --- Newton ---------------------------------------------------------------

@_jit
def newton(z0, b, edges, n, P, tol, max_iter, rel_tol):
    """Returns (z, residual, iterations, flag); flag 0 converged, 1 not, 2 singular.

    Convergence: residual <= tol * s and the follow-up step is below
    ``10 * tol * s * (1 + |z|)`` where ``s = max(1, |z|**2)`` absorbs the
    rounding error of the quadratic terms.
    """
    z = z0.copy()
    res = maxabs(eval_system(z, b, edges, n, P))
    for it in range(max_iter + 1):
        F = eval_system(z, b, edges, n, P)
        res = maxabs(F)
        if res == 0.0:
            return z, res, it, 0
        dz, ok = lu_solve(jacobian(z, b, edges, n), F, rel_tol)
        if not ok:
            return z, res, it, 2
        step = maxabs(dz)
        za = maxabs(z)
        sc = max(1.0, za * za)
        if res <= tol * sc and step <= 10.0 * tol * sc * (1.0 + za):
            # the last step is already paid for; keep it unless it hurts
            zn = z - dz
            rn = maxabs(eval_system(zn, b, edges, n, P))
            if rn <= res:
                return zn, rn, it + 1, 0
            return z, res, it, 0
        if it == max_iter:
            break
        z = z - dz
    return z, res, max_iter, 1


# --- homotopies -----------------------------------------------------------

ROUNDING_FLOOR = 64 * 2.220446049250313e-16


@_jit
def segment_params(t, b_from, b_to, g1, g2):
    if t == 0.0:
        return b_from.copy()
    if t == 1.0:
        return b_to.copy()
    d = t * g2 + (1.0 - t) * g1
    return (g1 * (1.0 - t) * b_from + g2 * t * b_to) / d


@_jit
def hom_eval(kind, z, t, b_from, b_to, g1, g2, edges, n, P):
    """Value H, Jacobian H_z and t-derivative H_t of the homotopy."""
    nm1 = n - 1
    N = 2 * nm1
    if kind == PARAMETER:
        d = t * g2 + (1.0 - t) * g1
        p = (g1 * (1.0 - t) * b_from + g2 * t * b_to) / d
        dp = g1 * g2 * (b_to - b_from) / (d * d)
        H = eval_system(z, p, edges, n, P)
        Hz = jacobian(z, p, edges, n)
        Ht = np.zeros(N, dtype=np.complex128)
        fl = flows(z, dp, edges, n)
        for k in range(nm1):
            Ht[nm1 + k] = fl[k]
        return H, Hz, Ht
    F = eval_system(z, b_to, edges, n, P)
    JF = jacobian(z, b_to, edges, n)
    H = np.empty(N, dtype=np.complex128)
    Ht = np.empty(N, dtype=np.complex128)
    Hz = t * JF
    for i in range(N):
        G = z[i] * z[i] - 1.0
        H[i] = g1 * (1.0 - t) * G + t * F[i]
        Ht[i] = -g1 * G + F[i]
        Hz[i, i] += g1 * (1.0 - t) * 2.0 * z[i]
    return H, Hz, Ht


@_jit
def _velocity(kind, z, t, b_from, b_to, g1, g2, edges, n, P, rel_tol):
    H, Hz, Ht = hom_eval(kind, z, t, b_from, b_to, g1, g2, edges, n, P)
    v, ok = lu_solve(Hz, Ht, rel_tol)
    return -v, ok


@_jit
def track(kind, z0, b_from, b_to, g1, g2, edges, n, P,
          h0, hmin, hmax, ctol, citer, div, max_steps, end_tol, end_iter,
          cond_max, rel_tol, record):
    """Track one path from t=0 to t=1.

    Returns (status, z, steps, residual, cond, trace) where trace rows are
    (t, |H|_inf, |z|_inf) for accepted steps when ``record`` is set.
    """
    N = z0.shape[0]
    z = z0.copy()
    t = 0.0
    h = h0
    streak = 0
    steps = 0
    ntrace = max_steps + 1 if record else 1
    trace = np.zeros((ntrace, 3))
    nrec = 0
    if record:
        H0, _, _ = hom_eval(kind, z, 0.0, b_from, b_to, g1, g2, edges, n, P)
        trace[0, 0] = 0.0
        trace[0, 1] = maxabs(H0)
        trace[0, 2] = maxabs(z)
        nrec = 1
    status = -1
    while t < 1.0:
        if steps >= max_steps:
            status = MAX_STEPS
            break
        steps += 1
        hh = min(h, 1.0 - t)
        t1 = t + hh
        if 1.0 - t1 < 1e-14:
            t1 = 1.0
        # RK4 predictor on dz/dt = -Hz^-1 Ht
        k1, ok = _velocity(kind, z, t, b_from, b_to, g1, g2, edges, n, P, rel_tol)
        k2 = k1
        k3 = k1
        k4 = k1
        r = 0.0
        w = z
        if ok:
            k2, ok = _velocity(kind, z + 0.5 * hh * k1, t + 0.5 * hh,
                               b_from, b_to, g1, g2, edges, n, P, rel_tol)
        if ok:
            k3, ok = _velocity(kind, z + 0.5 * hh * k2, t + 0.5 * hh,
                               b_from, b_to, g1, g2, edges, n, P, rel_tol)
        if ok:
            k4, ok = _velocity(kind, z + hh * k3, t1,
                               b_from, b_to, g1, g2, edges, n, P, rel_tol)
        accepted = False
        if ok:
            w = z + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            for _ in range(citer):
                H, Hz, _ = hom_eval(kind, w, t1, b_from, b_to, g1, g2, edges, n, P)
                dw, okc = lu_solve(Hz, H, rel_tol)
                if not okc:
                    ok = False
                    break
                w = w - dw
                if maxabs(dw) <= ctol * (1.0 + maxabs(w)):
                    break
            if ok:
                H, _, _ = hom_eval(kind, w, t1, b_from, b_to, g1, g2, edges, n, P)
                r = maxabs(H)
                wa = maxabs(w)
                # rounding floor of the quadratic terms; only binds for |w| > ~3e3
                if r <= max(ctol, ROUNDING_FLOOR * wa * wa) and np.all(np.isfinite(w.real)) and np.all(np.isfinite(w.imag)):
                    accepted = True
        if not ok and t1 >= 1.0 - 1e-6:
            status = SINGULAR_END
            break
        if accepted:
            z = w
            t = t1
            if record:
                trace[nrec, 0] = t
                trace[nrec, 1] = r
                trace[nrec, 2] = maxabs(z)
                nrec += 1
            if maxabs(z) > div:
                status = DIVERGED
                break
            streak += 1
            if streak >= 4:
                h = min(h * 1.5, hmax)
                streak = 0
        else:
            streak = 0
            h = h * 0.5
            if h < hmin:
                if t >= 1.0 - 1e-3:
                    status = -2  # hand over to the endgame
                elif maxabs(z) > 1e4:
                    status = DIVERGED
                else:
                    status = MAX_STEPS
                break
    bt = b_to
    if kind == PARAMETER:
        bt = segment_params(1.0, b_from, b_to, g1, g2)
    res = np.inf
    cnd = np.inf
    if status == -1 or status == -2 or status == SINGULAR_END:
        zr, res, _, flag = newton(z, bt, edges, n, P, end_tol, end_iter, rel_tol)
        cnd = cond_scaled(jacobian(zr, bt, edges, n), zr, rel_tol)
        scale = max(1.0, maxabs(zr) ** 2)
        finite = np.all(np.isfinite(zr.real)) and np.all(np.isfinite(zr.imag))
        # an interrupted path may only be completed by Newton if it stays put
        near = True
        if status == -2:
            near = finite and maxabs(zr - z) <= 1e-4 * (1.0 + maxabs(z))
        if flag == 0 and res <= end_tol * scale and cnd <= cond_max and near:
            status = SUCCESS
            z = zr
        elif near or maxabs(z) < 10.0:
            status = SINGULAR_END
            if flag != 2 and finite and near:
                z = zr
        else:
            status = DIVERGED
            res = maxabs(eval_system(z, bt, edges, n, P))
    else:
        res = maxabs(eval_system(z, bt, edges, n, P))
    return status, z, steps, res, cnd, trace[:nrec]


@_jit
def track_many(kind, Z0, b_from, b_to, G1, G2, edges, n, P,
               h0, hmin, hmax, ctol, citer, div, max_steps, end_tol, end_iter,
               cond_max, rel_tol):
    m = Z0.shape[0]
    status = np.empty(m, dtype=np.int64)
    Z = np.empty_like(Z0)
    steps = np.empty(m, dtype=np.int64)
    res = np.empty(m)
    cnd = np.empty(m)
    for i in range(m):
        s, z, st, r, c, _ = track(kind, Z0[i], b_from, b_to, G1[i], G2[i], edges, n, P,
                                  h0, hmin, hmax, ctol, citer, div, max_steps,
                                  end_tol, end_iter, cond_max, rel_tol, False)
        status[i] = s
        Z[i] = z
        steps[i] = st
        res[i] = r
        cnd[i] = c
    return status, Z, steps, res, cnd
