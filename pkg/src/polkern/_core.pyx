# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: pairwise Wishart distances and the SMO dual solver.

Same signatures and semantics as ``polkern._fallback``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, expm1, fabs, INFINITY, NAN, fmax

cnp.import_array()

cdef enum:
    BHATTACHARYYA = 0
    KULLBACK_LEIBLER = 1
    RENYI = 2
    HELLINGER = 3
    CHI_SQUARE = 4

cdef double SINGULAR_RTOL = 1e-12
cdef double ETA_FLOOR = 1e-12
cdef double LOG_MAX = 709.782712893384


cdef inline double det3r(const double complex* m) noexcept nogil:
    cdef double complex d
    d = (m[0] * (m[4] * m[8] - m[5] * m[7])
         - m[1] * (m[3] * m[8] - m[5] * m[6])
         + m[2] * (m[3] * m[7] - m[4] * m[6]))
    return d.real


cdef inline double scale3(const double complex* m) noexcept nogil:
    return fmax(fmax(fabs(m[0].real), fabs(m[4].real)), fabs(m[8].real))


cdef inline void lincomb(const double complex* a, double wa, const double complex* b, double wb,
                         double complex* out) noexcept nogil:
    cdef int k
    for k in range(9):
        out[k] = wa * a[k] + wb * b[k]


cdef inline double trace_prod(const double complex* a, const double complex* b) noexcept nogil:
    # Re Tr(A B) = sum_ij A_ij B_ji
    cdef double s = 0.0
    cdef int i, j
    for i in range(3):
        for j in range(3):
            s += (a[3 * i + j] * b[3 * j + i]).real
    return s


cdef inline double logaddexp(double x, double y) noexcept nogil:
    if x > y:
        return x + log(1.0 + exp(y - x))
    return y + log(1.0 + exp(x - y))


cdef inline bint same9(const double complex* a, const double complex* b) noexcept nogil:
    cdef int k
    for k in range(9):
        if a[k] != b[k]:
            return False
    return True


def pairwise_distances(int code, double beta, double looks,
                       const double complex[:, :, ::1] sa, const double complex[:, :, ::1] sa_inv, const double[::1] lda,
                       const double complex[:, :, ::1] sb, const double complex[:, :, ::1] sb_inv, const double[::1] ldb):
    cdef Py_ssize_t na = sa.shape[0], nb = sb.shape[0], p, q
    values_arr = np.empty((na, nb), dtype=np.float64)
    status_arr = np.zeros((na, nb), dtype=np.int8)
    cdef double[:, ::1] values = values_arr
    cdef signed char[:, ::1] status = status_arr
    cdef double complex tmp[9]
    cdef double complex tmp2[9]
    cdef double n = looks, la, lb, db, l1, l2, d12, d21, e1, e2
    cdef const double complex* A
    cdef const double complex* B
    cdef const double complex* Ai
    cdef const double complex* Bi
    if code < 0 or code > 4:
        raise ValueError(f"unknown distance code {code}")
    with nogil:
        for p in range(na):
            A = &sa[p, 0, 0]
            Ai = &sa_inv[p, 0, 0]
            la = lda[p]
            for q in range(nb):
                B = &sb[q, 0, 0]
                Bi = &sb_inv[q, 0, 0]
                lb = ldb[q]
                if same9(A, B):
                    values[p, q] = 0.0
                    continue
                if code == BHATTACHARYYA or code == HELLINGER:
                    lincomb(Ai, 0.5, Bi, 0.5, tmp)
                    db = n * (0.5 * (la + lb) + log(det3r(tmp)))
                    values[p, q] = db if code == BHATTACHARYYA else -expm1(-db)
                elif code == KULLBACK_LEIBLER:
                    values[p, q] = n * (0.5 * (trace_prod(Ai, B) + trace_prod(Bi, A)) - 3.0)
                elif code == RENYI:
                    lincomb(Ai, beta, Bi, 1.0 - beta, tmp)
                    lincomb(Bi, beta, Ai, 1.0 - beta, tmp2)
                    l1 = n * (-beta * la + (beta - 1.0) * lb - log(det3r(tmp)))
                    l2 = n * ((beta - 1.0) * la - beta * lb - log(det3r(tmp2)))
                    values[p, q] = log(2.0) / (1.0 - beta) + logaddexp(l1, l2) / (beta - 1.0)
                else:
                    lincomb(Bi, 2.0, Ai, -1.0, tmp)
                    lincomb(Ai, 2.0, Bi, -1.0, tmp2)
                    d12 = det3r(tmp)
                    d21 = det3r(tmp2)
                    if (fabs(d12) <= SINGULAR_RTOL * scale3(tmp) ** 3
                            or fabs(d21) <= SINGULAR_RTOL * scale3(tmp2) ** 3):
                        values[p, q] = NAN
                        status[p, q] = 1
                        continue
                    e1 = n * (la - 2.0 * lb - log(fabs(d12)))
                    e2 = n * (lb - 2.0 * la - log(fabs(d21)))
                    if fmax(e1, e2) > LOG_MAX:
                        values[p, q] = NAN
                        status[p, q] = 2
                        continue
                    values[p, q] = exp(e1) + exp(e2) - 2.0
    return values_arr, status_arr


def smo(K_in, y_in, double C, double tol, long max_iter):
    cdef const double[:, ::1] K = np.ascontiguousarray(K_in, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0], t, i, j
    alpha_arr = np.zeros(n, dtype=np.float64)
    grad_arr = -np.ones(n, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] grad = grad_arr
    cdef long it = 0
    cdef bint converged = False, is_up, is_low
    cdef double gmax, gmin, s, ai, aj, ni, nj, quad, delta, diff, total, dai, daj
    with nogil:
        while True:
            gmax = -INFINITY
            gmin = INFINITY
            i = -1
            j = -1
            for t in range(n):
                s = -y[t] * grad[t]
                if y[t] > 0:
                    is_up = alpha[t] < C
                    is_low = alpha[t] > 0
                else:
                    is_up = alpha[t] > 0
                    is_low = alpha[t] < C
                if is_up and s > gmax:
                    gmax = s
                    i = t
                if is_low and s < gmin:
                    gmin = s
                    j = t
            if i < 0 or j < 0 or gmax - gmin < tol:
                converged = True
                break
            if it >= max_iter:
                break
            it += 1

            ai = alpha[i]
            aj = alpha[j]
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0.0:
                quad = ETA_FLOOR
            if y[i] != y[j]:
                delta = (-grad[i] - grad[j]) / quad
                diff = ai - aj
                ni = ai + delta
                nj = aj + delta
                if diff > 0:
                    if nj < 0:
                        nj = 0.0
                        ni = diff
                elif ni < 0:
                    ni = 0.0
                    nj = -diff
                if diff > 0:
                    if ni > C:
                        ni = C
                        nj = C - diff
                elif nj > C:
                    nj = C
                    ni = C + diff
            else:
                delta = (grad[i] - grad[j]) / quad
                total = ai + aj
                ni = ai - delta
                nj = aj + delta
                if total > C:
                    if ni > C:
                        ni = C
                        nj = total - C
                elif nj < 0:
                    nj = 0.0
                    ni = total
                if total > C:
                    if nj > C:
                        nj = C
                        ni = total - C
                elif ni < 0:
                    ni = 0.0
                    nj = total
            alpha[i] = ni
            alpha[j] = nj
            dai = (ni - ai) * y[i]
            daj = (nj - aj) * y[j]
            for t in range(n):
                grad[t] += y[t] * (K[t, i] * dai + K[t, j] * daj)

    return alpha_arr, _bias(alpha_arr, grad_arr, np.asarray(y), C), it, bool(converged)


def _bias(alpha, grad, y, C):
    yg = y * grad
    at_upper = alpha >= C
    at_lower = alpha <= 0
    free = ~(at_upper | at_lower)
    if free.any():
        rho = float(np.mean(yg[free]))
    else:
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = float(np.min(yg[ub_mask])) if ub_mask.any() else np.inf
        lb = float(np.max(yg[lb_mask])) if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb)
    return -rho
