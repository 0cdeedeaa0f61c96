"""Pure-Python / numpy implementations of the hot kernels.

Mirrors the API of the compiled ``_core`` extension exactly; selected by
``polkern._backend`` when the extension is missing or disabled.
"""

import math

import numpy as np

from .hermitian import det3, scale3

BHATTACHARYYA, KULLBACK_LEIBLER, RENYI, HELLINGER, CHI_SQUARE = range(5)
STATUS_OK, STATUS_SINGULAR, STATUS_OVERFLOW = 0, 1, 2

LOG_MAX = math.log(np.finfo(np.float64).max)
SINGULAR_RTOL = 1e-12
ETA_FLOOR = 1e-12


def _logdet_hpd(m):
    return np.log(det3(m))


def pairwise_distances(code, beta, looks, sa, sa_inv, lda, sb, sb_inv, ldb):
    """Closed-form distances between every (a, b) pair of covariance matrices.

    Returns ``(values, status)`` arrays of shape ``(len(sa), len(sb))``;
    status is 0 (ok), 1 (singular inner matrix) or 2 (overflow). Bad entries
    hold NaN.
    """
    n = float(looks)
    A, Ai, la = sa[:, None], sa_inv[:, None], lda[:, None]
    B, Bi, lb = sb[None, :], sb_inv[None, :], ldb[None, :]
    status = np.zeros((sa.shape[0], sb.shape[0]), dtype=np.int8)

    if code == BHATTACHARYYA or code == HELLINGER:
        db = n * (0.5 * (la + lb) + _logdet_hpd(0.5 * (Ai + Bi)))
        values = db if code == BHATTACHARYYA else -np.expm1(-db)
    elif code == KULLBACK_LEIBLER:
        tr_ab = np.real(np.einsum("...ij,...ji->...", Ai, B))
        tr_ba = np.real(np.einsum("...ij,...ji->...", Bi, A))
        values = n * (0.5 * (tr_ab + tr_ba) - 3.0)
    elif code == RENYI:
        l1 = n * (-beta * la + (beta - 1.0) * lb - _logdet_hpd(beta * Ai + (1.0 - beta) * Bi))
        l2 = n * ((beta - 1.0) * la - beta * lb - _logdet_hpd(beta * Bi + (1.0 - beta) * Ai))
        values = math.log(2.0) / (1.0 - beta) + np.logaddexp(l1, l2) / (beta - 1.0)
    elif code == CHI_SQUARE:
        m12 = 2.0 * Bi - Ai
        m21 = 2.0 * Ai - Bi
        d12, d21 = det3(m12), det3(m21)
        sing = (np.abs(d12) <= SINGULAR_RTOL * scale3(m12) ** 3) | (
            np.abs(d21) <= SINGULAR_RTOL * scale3(m21) ** 3
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            e1 = n * (la - 2.0 * lb - np.log(np.abs(d12)))
            e2 = n * (lb - 2.0 * la - np.log(np.abs(d21)))
        over = ~sing & (np.maximum(e1, e2) > LOG_MAX)
        with np.errstate(over="ignore", invalid="ignore"):
            values = np.exp(e1) + np.exp(e2) - 2.0
        values = np.where(sing | over, np.nan, values)
        status[sing] = STATUS_SINGULAR
        status[over] = STATUS_OVERFLOW
    else:
        raise ValueError(f"unknown distance code {code}")

    values = np.array(np.broadcast_to(values, status.shape), dtype=np.float64)
    same = np.all(sa[:, None] == sb[None, :], axis=(-2, -1))
    values[same] = 0.0
    status[same] = STATUS_OK
    return values, status


def smo(K, y, C, tol, max_iter):
    """SMO on the soft-margin dual with maximal-violating-pair selection.

    Returns ``(alpha, bias, iterations, converged)``; the decision function is
    ``sum(alpha * y * K[:, x]) + bias``.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    it = 0
    converged = False
    while True:
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < C))
        score = -y * grad
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        if score[i] - score[j] < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        ai, aj = alpha[i], alpha[j]
        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 0.0:
            quad = ETA_FLOOR
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        alpha[i], alpha[j] = ni, nj
        dai, daj = ni - ai, nj - aj
        grad += y * (K[:, i] * (y[i] * dai) + K[:, j] * (y[j] * daj))

    return alpha, _bias(alpha, grad, y, C), it, converged


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
        ub = float(np.min(yg[ub_mask])) if ub_mask.any() else math.inf
        lb = float(np.max(yg[lb_mask])) if lb_mask.any() else -math.inf
        rho = 0.5 * (ub + lb)
    return -rho
