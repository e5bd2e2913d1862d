"""Compiled interior-point iteration (numba).

Cones are described by ``starts``/``dims``; the coefficient matrix is passed
column-compressed (one column per cone coordinate). The normal matrix
``A G^{-2} A^T`` is accumulated cone by cone from the closed form
``G^{-2} = (2 v v^T - J) / beta^2`` with ``v = J w``, which touches only the
rows each cone actually involves.

The normal matrix is factored in a fixed low-degree-first order: variables
coupled to only a few others are eliminated with zero-skipping updates and
the remaining dense trailing block goes to LAPACK.
"""

import numpy as np
from numba import njit

OPTIMAL, MAX_ITER, INFEASIBLE, NUMERICAL_FAILURE = 0, 1, 2, 3


@njit(cache=True, error_model="numpy")
def mul_A(indptr, indices, data, v, m):
    out = np.zeros(m)
    for j in range(indptr.size - 1):
        vj = v[j]
        for p in range(indptr[j], indptr[j + 1]):
            out[indices[p]] += data[p] * vj
    return out


@njit(cache=True, error_model="numpy")
def mul_AT(indptr, indices, data, x):
    n = indptr.size - 1
    out = np.zeros(n)
    for j in range(n):
        acc = 0.0
        for p in range(indptr[j], indptr[j + 1]):
            acc += data[p] * x[indices[p]]
        out[j] = acc
    return out


@njit(cache=True, error_model="numpy")
def tail_sq(v, st, d):
    acc = 0.0
    for i in range(st + 1, st + d):
        acc += v[i] * v[i]
    return acc


@njit(cache=True, error_model="numpy")
def jnorm(v, st, d):
    h = v[st]
    t = np.sqrt(tail_sq(v, st, d))
    return np.sqrt(max((h - t) * (h + t), 0.0))


@njit(cache=True, error_model="numpy")
def nt_scaling(z, s, starts, dims):
    """w (normalized scaling point, flat) and beta per cone; G = beta Q(w), G z = G^{-1} s."""
    w = np.empty(z.size)
    beta = np.empty(starts.size)
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        zn = jnorm(z, st, d)
        sn = jnorm(s, st, d)
        dot = 0.0
        for i in range(st, st + d):
            dot += (z[i] / zn) * (s[i] / sn)
        gamma = np.sqrt((1.0 + dot) / 2.0)
        w[st] = (s[st] / sn + z[st] / zn) / (2.0 * gamma)
        for i in range(st + 1, st + d):
            w[i] = (s[i] / sn - z[i] / zn) / (2.0 * gamma)
        beta[k] = np.sqrt(sn / zn)
    return w, beta


@njit(cache=True, error_model="numpy")
def apply_scaling(w, beta, v, starts, dims, inverse):
    """G v, or G^{-1} v when ``inverse``."""
    out = np.empty(v.size)
    sign = -1.0 if inverse else 1.0
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        w0 = w[st]
        v0 = v[st]
        w1v1 = 0.0
        for i in range(st + 1, st + d):
            w1v1 += w[i] * v[i]
        coef = sign * v0 + w1v1 / (1.0 + w0)
        scale = 1.0 / beta[k] if inverse else beta[k]
        out[st] = (w0 * v0 + sign * w1v1) * scale
        for i in range(st + 1, st + d):
            out[i] = (v[i] + w[i] * coef) * scale
    return out


@njit(cache=True, error_model="numpy")
def circ(u, v, starts, dims):
    out = np.empty(u.size)
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        acc = 0.0
        for i in range(st, st + d):
            acc += u[i] * v[i]
        out[st] = acc
        for i in range(st + 1, st + d):
            out[i] = u[st] * v[i] + v[st] * u[i]
    return out


@njit(cache=True, error_model="numpy")
def inv_circ(lam, r, starts, dims):
    """Solve lam o u = r."""
    out = np.empty(r.size)
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        l0 = lam[st]
        l1r1 = 0.0
        l1sq = 0.0
        for i in range(st + 1, st + d):
            l1r1 += lam[i] * r[i]
            l1sq += lam[i] * lam[i]
        u0 = (l0 * r[st] - l1r1) / (l0 * l0 - l1sq)
        out[st] = u0
        for i in range(st + 1, st + d):
            out[i] = (r[i] - u0 * lam[i]) / l0
    return out


@njit(cache=True, error_model="numpy")
def max_step(v, dv, starts, dims):
    """Largest alpha >= 0 with v + alpha dv in every cone (inf if unbounded)."""
    best = np.inf
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        v0 = v[st]
        d0 = dv[st]
        vv = 0.0
        dd = 0.0
        vd = 0.0
        for i in range(st + 1, st + d):
            vv += v[i] * v[i]
            dd += dv[i] * dv[i]
            vd += v[i] * dv[i]
        vn = np.sqrt(vv)
        a = d0 * d0 - dd
        b = v0 * d0 - vd
        c = max((v0 - vn) * (v0 + vn), 0.0)
        # roots of a t^2 + 2 b t + c
        if a == 0.0:
            t = -c / (2.0 * b) if b < 0 else np.inf
        else:
            disc = b * b - a * c
            if disc < 0:
                t = np.inf
            else:
                qq = -(b + np.copysign(np.sqrt(disc), b))
                t = np.inf
                if qq != 0.0:
                    r1 = qq / a
                    r2 = c / qq
                    if r1 > 0 and r1 < t:
                        t = r1
                    if r2 > 0 and r2 < t:
                        t = r2
        # the head must stay non-negative; this also catches a double root
        # whose discriminant rounds below zero
        if d0 < 0 and -v0 / d0 < t:
            t = -v0 / d0
        if t < best:
            best = t
    return best


@njit(cache=True, error_model="numpy")
def strictly_inside(v, starts, dims):
    """Every cone block has a positive determinant as evaluated in floating point."""
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        if not (v[st] > np.sqrt(tail_sq(v, st, d)) and jnorm(v, st, d) > 0.0):
            return False
    return True


@njit(cache=True, error_model="numpy")
def shift_interior(v, starts, dims):
    """v + (1 + gap) e when v is not strictly inside the cone product."""
    gap = -np.inf
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        g = np.sqrt(tail_sq(v, st, d)) - v[st]
        if g > gap:
            gap = g
    out = v.copy()
    if gap >= 0:
        for k in range(starts.size):
            out[starts[k]] += 1.0 + gap
    return out


@njit(cache=True, error_model="numpy")
def chol_solve(L, r):
    m = r.size
    y = np.empty(m)
    for i in range(m):
        acc = r[i]
        for j in range(i):
            acc -= L[i, j] * y[j]
        y[i] = acc / L[i, i]
    x = np.empty(m)
    for i in range(m - 1, -1, -1):
        acc = y[i]
        for j in range(i + 1, m):
            acc -= L[j, i] * x[j]
        x[i] = acc / L[i, i]
    return x


@njit(cache=True, error_model="numpy")
def elimination_order(indptr, indices, m, starts, dims):
    """Permutation putting low-degree variables first, and how many of them to eliminate sparsely."""
    pattern = np.zeros((m, m), dtype=np.bool_)
    rows = np.empty(m, dtype=np.int64)
    seen = np.full(m, -1)
    for k in range(starts.size):
        nr = 0
        for j in range(starts[k], starts[k] + dims[k]):
            for p in range(indptr[j], indptr[j + 1]):
                r = indices[p]
                if seen[r] != k:
                    seen[r] = k
                    rows[nr] = r
                    nr += 1
        for a in range(nr):
            for b in range(nr):
                pattern[rows[a], rows[b]] = True
    degree = np.zeros(m, dtype=np.int64)
    for i in range(m):
        for j in range(m):
            if pattern[i, j]:
                degree[i] += 1
    perm = np.argsort(degree, kind="mergesort")
    limit = max(4, m // 8)
    n_sparse = 0
    while n_sparse < m and degree[perm[n_sparse]] <= limit:
        n_sparse += 1
    return perm, n_sparse


@njit(cache=True, error_model="numpy")
def factor(M, perm, k):
    """Cholesky of ``M[perm][:, perm]``.

    The first ``k`` columns are eliminated right-looking, touching only
    their nonzeros; the updated trailing block is factored densely. Returns
    (F, T, nz_ptr, nz_idx, ok): F holds the leading columns, T the trailing
    factor, nz_* the nonzero rows of each leading column.
    """
    m = M.shape[0]
    F = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            F[i, j] = M[perm[i], perm[j]]
    nz_ptr = np.zeros(k + 1, dtype=np.int64)
    nz_idx = np.empty(max(1, k * m), dtype=np.int64)
    for j in range(k):
        d = F[j, j]
        if not d > 0:
            return F, F[:0, :0].copy(), nz_ptr, nz_idx, False
        ljj = np.sqrt(d)
        F[j, j] = ljj
        top = nz_ptr[j]
        for i in range(j + 1, m):
            if F[i, j] != 0.0:
                F[i, j] /= ljj
                nz_idx[top] = i
                top += 1
        nz_ptr[j + 1] = top
        for a in range(nz_ptr[j], top):
            ia = nz_idx[a]
            la = F[ia, j]
            for b in range(nz_ptr[j], top):
                ib = nz_idx[b]
                F[ia, ib] -= la * F[ib, j]
    tail = F[k:, k:].copy()
    try:
        T = np.linalg.cholesky(tail)
    except Exception:  # noqa: BLE001 - numba cannot narrow LinAlgError
        return F, tail, nz_ptr, nz_idx, False
    return F, T, nz_ptr, nz_idx, True


@njit(cache=True, error_model="numpy")
def factor_solve(F, T, nz_ptr, nz_idx, perm, k, r):
    m = r.size
    y = np.empty(m)
    for i in range(m):
        y[i] = r[perm[i]]
    for j in range(k):
        y[j] /= F[j, j]
        for a in range(nz_ptr[j], nz_ptr[j + 1]):
            y[nz_idx[a]] -= F[nz_idx[a], j] * y[j]
    if k < m:
        y[k:] = chol_solve(T, y[k:])
    for j in range(k - 1, -1, -1):
        acc = y[j]
        for a in range(nz_ptr[j], nz_ptr[j + 1]):
            acc -= F[nz_idx[a], j] * y[nz_idx[a]]
        y[j] = acc / F[j, j]
    x = np.empty(m)
    for i in range(m):
        x[perm[i]] = y[i]
    return x


@njit(cache=True, error_model="numpy")
def gram(indptr, indices, data, m):
    G = np.zeros((m, m))
    for j in range(indptr.size - 1):
        for p in range(indptr[j], indptr[j + 1]):
            for q in range(indptr[j], indptr[j + 1]):
                G[indices[p], indices[q]] += data[p] * data[q]
    return G


@njit(cache=True, error_model="numpy")
def normal_matrix(indptr, indices, data, m, w, beta, starts, dims):
    """A G^{-2} A^T, plus the flat vector v = J w / beta used by G^{-2}."""
    M = np.zeros((m, m))
    v = np.empty(w.size)
    u = np.zeros(m)
    mark = np.full(m, -1)
    touched = np.empty(m, dtype=np.int64)
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        ib2 = 1.0 / (beta[k] * beta[k])
        nt = 0
        for j in range(st, st + d):
            sgn = 1.0 if j == st else -1.0
            vj = sgn * w[j] / beta[k]
            v[j] = vj
            lo, hi = indptr[j], indptr[j + 1]
            for p in range(lo, hi):
                r = indices[p]
                if mark[r] != k:
                    mark[r] = k
                    touched[nt] = r
                    nt += 1
                    u[r] = 0.0
                u[r] += data[p] * vj
                for q in range(lo, hi):
                    M[r, indices[q]] -= sgn * ib2 * data[p] * data[q]
        for a in range(nt):
            ra = touched[a]
            ua = 2.0 * u[ra]
            for c in range(nt):
                M[ra, touched[c]] += ua * u[touched[c]]
    return M, v


@njit(cache=True, error_model="numpy")
def ginv2(v, beta, u, starts, dims):
    """G^{-2} u = 2 (v^T u) v - J u / beta^2 per cone."""
    out = np.empty(u.size)
    for k in range(starts.size):
        st, d = starts[k], dims[k]
        acc = 0.0
        for i in range(st, st + d):
            acc += v[i] * u[i]
        ib2 = 1.0 / (beta[k] * beta[k])
        out[st] = 2.0 * acc * v[st] - u[st] * ib2
        for i in range(st + 1, st + d):
            out[i] = 2.0 * acc * v[i] + u[i] * ib2
    return out


@njit(cache=True, error_model="numpy")
def _newton(indptr, indices, data, m, fac, base_rhs, r_s, lam, r_c, w, beta, v, starts, dims):
    F, T, nz_ptr, nz_idx, perm, k = fac
    ginv_t = apply_scaling(w, beta, inv_circ(lam, r_c, starts, dims), starts, dims, True)
    dx = factor_solve(F, T, nz_ptr, nz_idx, perm, k, base_rhs - mul_A(indptr, indices, data, ginv_t, m))
    ds = r_s - mul_AT(indptr, indices, data, dx)
    dz = ginv_t - ginv2(v, beta, ds, starts, dims)
    return dx, ds, dz


@njit(cache=True, error_model="numpy")
def ipm(indptr, indices, data, m, b, offset, starts, dims, gap_tol, feas_tol, max_iter, step_fraction):
    """Mehrotra predictor-corrector with NT scaling. Returns (x, s, z, status, iters, trace)."""
    n = offset.size
    ncones = starts.size
    e = np.zeros(n)
    for k in range(ncones):
        e[starts[k]] = 1.0
    trace = np.zeros((max_iter + 1, 5))

    # least-squares start pushed into the cone interior
    x = np.zeros(m)
    s = e.copy()
    z = e.copy()
    try:
        Lg = np.linalg.cholesky(gram(indptr, indices, data, m))
    except Exception:  # noqa: BLE001 - numba cannot narrow LinAlgError
        return x, s, z, NUMERICAL_FAILURE, 0, trace[:1]
    x = chol_solve(Lg, mul_A(indptr, indices, data, offset, m))
    s = shift_interior(offset - mul_AT(indptr, indices, data, x), starts, dims)
    z = shift_interior(mul_AT(indptr, indices, data, chol_solve(Lg, b)), starts, dims)

    perm, n_sparse = elimination_order(indptr, indices, m, starts, dims)
    nb = 1.0 + np.sqrt(np.sum(b * b))
    nc = 1.0 + np.sqrt(np.sum(offset * offset))
    status = MAX_ITER
    step = 0.0
    it = 0
    for it in range(max_iter + 1):
        r_s = offset - mul_AT(indptr, indices, data, x) - s
        r_z = b - mul_A(indptr, indices, data, z, m)
        pobj = np.dot(b, x)
        mu_sum = np.dot(z, s)
        gap = mu_sum / (1.0 + abs(pobj))
        pres = np.sqrt(np.sum(r_s * r_s)) / nc
        dres = np.sqrt(np.sum(r_z * r_z)) / nb
        trace[it, 0] = it
        trace[it, 1] = gap
        trace[it, 2] = pres
        trace[it, 3] = dres
        trace[it, 4] = step
        if gap <= gap_tol and pres <= feas_tol and dres <= feas_tol:
            status = OPTIMAL
            break
        if not (np.isfinite(gap) and np.isfinite(pres) and np.isfinite(dres)):
            status = NUMERICAL_FAILURE
            break
        # z certifies that offset - A^T x in K has no solution
        oz = np.dot(offset, z)
        if oz < 0:
            az = mul_A(indptr, indices, data, z, m)
            if np.sqrt(np.sum(az * az)) <= feas_tol * -oz:
                status = INFEASIBLE
                break
        if it == max_iter:
            break

        w, beta = nt_scaling(z, s, starts, dims)
        lam = apply_scaling(w, beta, z, starts, dims, False)
        M, v = normal_matrix(indptr, indices, data, m, w, beta, starts, dims)
        for i in range(m):
            M[i, i] = M[i, i] * (1.0 + 1e-13) + 1e-30
        F, T, nz_ptr, nz_idx, ok = factor(M, perm, n_sparse)
        if not ok:
            status = NUMERICAL_FAILURE
            break
        fac = (F, T, nz_ptr, nz_idx, perm, n_sparse)
        base_rhs = r_z + mul_A(indptr, indices, data, ginv2(v, beta, r_s, starts, dims), m)

        lamlam = circ(lam, lam, starts, dims)
        dx, ds, dz = _newton(indptr, indices, data, m, fac, base_rhs, r_s, lam, -lamlam, w, beta, v, starts, dims)
        a_aff = min(1.0, max_step(z, dz, starts, dims), max_step(s, ds, starts, dims))
        mu = mu_sum / ncones
        mu_aff = np.dot(z + a_aff * dz, s + a_aff * ds) / ncones
        ratio = min(max(mu_aff / mu, 0.0), 1.0)
        sigma = ratio * ratio * ratio

        corr = circ(apply_scaling(w, beta, dz, starts, dims, False),
                    apply_scaling(w, beta, ds, starts, dims, True), starts, dims)
        r_c = sigma * mu * e - lamlam - corr
        dx, ds, dz = _newton(indptr, indices, data, m, fac, base_rhs, r_s, lam, r_c, w, beta, v, starts, dims)
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(dz)) and np.all(np.isfinite(ds))):
            status = NUMERICAL_FAILURE
            break
        step = min(1.0, step_fraction * min(max_step(z, dz, starts, dims), max_step(s, ds, starts, dims)))
        # the ratio test is exact in real arithmetic; back off if rounding
        # lands an iterate on a cone boundary
        while step >= 1e-12 and not (strictly_inside(s + step * ds, starts, dims)
                                     and strictly_inside(z + step * dz, starts, dims)):
            step *= 0.5
        if not step >= 1e-12:
            status = NUMERICAL_FAILURE
            break
        x = x + step * dx
        s = s + step * ds
        z = z + step * dz
    return x, s, z, status, it, trace[: it + 1]
