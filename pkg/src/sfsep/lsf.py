"""Line spectral frequencies, LPC conversion, and frame-wise all-pole filtering.

Sign convention: the all-pole denominator is ``A(z) = 1 + sum_k a_k z^-k``
and the recursion is ``y[t] = e[t] - sum_k a_k y[t-k]``.  This is the
convention under which uniformly spaced LSFs map to ``A(z) = 1``.

Every function here works on float64 and broadcasts over leading axes
(sources, frames).  Functions whose name ends in ``_backward`` are the
adjoints used by :mod:`sfsep.engine`.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .dsp import hann, overlap_add

LOG10 = np.log(10.0)
FLOOR = 1e-7


def exp_sigmoid(x, y_max: float = 2.0):
    """``y_max * sigmoid(x) ** ln(10) + 1e-7``.

    Strictly increasing, bounded to ``(1e-7, y_max + 1e-7)``.
    """
    if y_max <= 0:
        raise ValueError("y_max must be positive")
    x = np.asarray(x, dtype=np.float64)
    # log-sigmoid keeps the tails exact for large |x|
    log_sig = -np.logaddexp(0.0, -x)
    return y_max * np.exp(LOG10 * log_sig) + FLOOR


def exp_sigmoid_grad(x, y_max: float = 2.0):
    """Derivative of :func:`exp_sigmoid` with respect to ``x``."""
    x = np.asarray(x, dtype=np.float64)
    log_sig = -np.logaddexp(0.0, -x)
    one_minus = np.exp(-np.logaddexp(0.0, x))
    return y_max * LOG10 * np.exp(LOG10 * log_sig) * one_minus


def raw_to_lsf(v):
    """Map ``K+1`` positive increments to ``K`` strictly increasing LSFs in (0, pi).

    The increments are normalized to sum to pi and cumulatively summed;
    the last increment is the gap between the highest LSF and pi.
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(v <= 0):
        raise ValueError("non-positive LSF increment")
    vbar = v / v.sum(axis=-1, keepdims=True) * np.pi
    return np.cumsum(vbar[..., :-1], axis=-1)


def raw_to_lsf_backward(grad_omega, v):
    """Gradient w.r.t. the increments ``v`` given the gradient w.r.t. the LSFs."""
    v = np.asarray(v, dtype=np.float64)
    total = v.sum(axis=-1, keepdims=True)
    omega = np.cumsum(v[..., :-1], axis=-1) / total * np.pi
    # d omega_k / d v_j = pi/S * [j <= k] - omega_k / S
    tail = np.cumsum(grad_omega[..., ::-1], axis=-1)[..., ::-1]
    grad_v = np.zeros_like(v)
    grad_v[..., :-1] = tail * np.pi / total
    grad_v -= (grad_omega * omega).sum(axis=-1, keepdims=True) / total
    return grad_v


def _check_lsf(omega: np.ndarray) -> None:
    k = omega.shape[-1]
    if k % 2:
        raise ValueError(f"LSF order must be even, got K={k}")
    if k == 0:
        raise ValueError("empty LSF vector")
    ok = (omega[..., 0] > 0) & (omega[..., -1] < np.pi)
    if k > 1:
        ok &= np.all(np.diff(omega, axis=-1) > 0, axis=-1)
    if not np.all(ok):
        raise ValueError("LSFs must satisfy 0 < w_1 < ... < w_K < pi")


def lsf_to_lpc(omega):
    """Convert LSFs to LPC coefficients ``a_1..a_K`` (Kabal-Ramachandran recursion).

    Runs in float64 regardless of input dtype; higher orders lose
    stability in single precision.

    Parameters
    ----------
    omega : array_like, shape (..., K)
        Strictly increasing angles in (0, pi), ``K`` even.  Odd-indexed
        entries (1-based) are roots of the symmetric polynomial, even ones
        of the antisymmetric polynomial.

    Returns
    -------
    ndarray, shape (..., K)
    """
    omega = np.asarray(omega, dtype=np.float64)
    _check_lsf(omega)
    K = omega.shape[-1]
    half = K // 2
    x = np.cos(omega)
    lead = omega.shape[:-1]
    # column i + 1 holds p'_i, column 0 holds p'_{-1} = 0
    p = np.zeros(lead + (half + 2,))
    q = np.zeros(lead + (half + 2,))
    p[..., 1] = q[..., 1] = 1.0
    p[..., 2] = -2.0 * x[..., 0]
    q[..., 2] = -2.0 * x[..., 1]
    for k in range(2, half + 1):
        xp = x[..., 2 * k - 2]
        xq = x[..., 2 * k - 1]
        p[..., k + 1] = -2.0 * p[..., k] * xp + 2.0 * p[..., k - 1]
        q[..., k + 1] = -2.0 * q[..., k] * xq + 2.0 * q[..., k - 1]
        for i in range(k - 1, 0, -1):
            p[..., i + 1] = p[..., i + 1] - 2.0 * p[..., i] * xp + p[..., i - 1]
            q[..., i + 1] = q[..., i + 1] - 2.0 * q[..., i] * xq + q[..., i - 1]
    pk = p[..., 2:] + p[..., 1:-1]
    qk = q[..., 2:] - q[..., 1:-1]
    a = np.empty(lead + (K,))
    a[..., :half] = 0.5 * (pk + qk)
    a[..., half:] = 0.5 * (pk - qk)[..., ::-1]
    return a


def _polymul(a, b):
    """Batched polynomial product along the last axis."""
    if a.shape[-1] < b.shape[-1]:
        a, b = b, a
    lead = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
    out = np.zeros(lead + (a.shape[-1] + b.shape[-1] - 1,))
    n = a.shape[-1]
    for j in range(b.shape[-1]):
        out[..., j:j + n] += a * b[..., j:j + 1]
    return out


def _leave_one_out(factors):
    """Products of all but one factor, for each factor.

    ``factors`` has shape (..., M, 3); returns (..., M, 2M - 1).
    """
    m = factors.shape[-2]
    lead = factors.shape[:-2]
    one = np.ones(lead + (1,))
    prefix = [one]
    for i in range(m - 1):
        prefix.append(_polymul(prefix[-1], factors[..., i, :]))
    suffix = [one]
    for i in range(m - 1, 0, -1):
        suffix.append(_polymul(suffix[-1], factors[..., i, :]))
    suffix = suffix[::-1]
    return np.stack([_polymul(prefix[i], suffix[i]) for i in range(m)], axis=-2)


def lsf_to_lpc_jacobian(omega):
    """Jacobian ``d a_i / d omega_k`` of :func:`lsf_to_lpc`, shape (..., K, K).

    Uses the product form ``P(z) = (1 + z^-1) prod (1 - 2 cos(w) z^-1 + z^-2)``
    (odd LSFs) and the analogous ``Q(z)`` with ``(1 - z^-1)`` (even LSFs),
    ``A = (P + Q) / 2``; both forms define the same polynomial.
    """
    omega = np.asarray(omega, dtype=np.float64)
    K = omega.shape[-1]
    x = np.cos(omega)
    dx = -np.sin(omega)
    lead = omega.shape[:-1]
    jac = np.zeros(lead + (K, K))
    for parity, sign in ((0, 1.0), (1, -1.0)):
        xs = x[..., parity::2]
        fac = np.stack(
            [np.ones_like(xs), -2.0 * xs, np.ones_like(xs)], axis=-1
        )
        loo = _leave_one_out(fac)  # (..., K/2, K - 1)
        # d/dx of one quadratic factor is -2 z^-1; then times (1 +- z^-1)/2
        edge = np.array([1.0, sign])
        d = _polymul(loo, edge)  # (..., K/2, K)
        # -2 z^-1 shift: coefficient index i of dA is -d[i - 1]; keep a_1..a_K
        dA = -d  # -2 * 1/2
        cols = np.arange(parity, K, 2)
        jac[..., :, cols] = np.swapaxes(dA, -1, -2) * dx[..., cols][..., None, :]
    return jac


def lsf_to_lpc_backward(grad_a, omega):
    """Gradient w.r.t. the LSFs given the gradient w.r.t. the LPC coefficients."""
    jac = lsf_to_lpc_jacobian(omega)
    return np.einsum("...i,...ik->...k", grad_a, jac)


def lpc_stability(a) -> np.ndarray:
    """Largest pole modulus of ``1 / (1 + sum a_k z^-k)``.

    Computed from companion-matrix eigenvalues; broadcasts over leading axes.
    """
    a = np.asarray(a, dtype=np.float64)
    K = a.shape[-1]
    if K == 0:
        return np.zeros(a.shape[:-1])
    comp = np.zeros(a.shape[:-1] + (K, K))
    comp[..., 0, :] = -a
    if K > 1:
        idx = np.arange(K - 1)
        comp[..., idx + 1, idx] = 1.0
    return np.abs(np.linalg.eigvals(comp)).max(axis=-1)


def lpc_to_lsf(a) -> np.ndarray:
    """Inverse of :func:`lsf_to_lpc` for a single stable filter, via polynomial roots.

    Parameters
    ----------
    a : array_like, shape (K,)
        Coefficients of a minimum-phase ``A(z)``, ``K`` even.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size % 2:
        raise ValueError("expected a 1-D coefficient vector of even length")
    if np.max(lpc_stability(a)) >= 1.0:
        raise ValueError("filter is not minimum phase")
    full = np.concatenate([[1.0], a, [0.0]])
    angles = []
    for poly in (full + full[::-1], full - full[::-1]):
        ang = np.angle(np.roots(poly))
        angles.append(ang[(ang > 1e-9) & (ang < np.pi - 1e-9)])
    return np.sort(np.concatenate(angles))


def allpole_frames(excitation, a):
    """Filter each frame by its own all-pole recursion from zero initial state.

    Parameters
    ----------
    excitation : ndarray, shape (N, T)
    a : ndarray, shape (N, K)

    Returns
    -------
    ndarray, shape (N, T)
        Unwindowed filter outputs.
    """
    e = np.asarray(excitation, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if e.shape[0] != a.shape[0]:
        raise ValueError(
            f"got {a.shape[0]} coefficient sets for {e.shape[0]} frames"
        )
    out = np.empty_like(e)
    den = np.ones(a.shape[1] + 1)
    for n in range(e.shape[0]):
        den[1:] = a[n]
        out[n] = lfilter([1.0], den, e[n])
    return out


def allpole_frames_backward(grad_y, y, a):
    """Adjoint of :func:`allpole_frames`.

    With ``A y = e`` (``A`` lower-triangular Toeplitz per frame), the
    adjoint state ``lam = A^-T grad_y`` is the same recursion run backward
    in time.  Returns ``(grad_e, grad_a)``.
    """
    a = np.asarray(a, dtype=np.float64)
    K = a.shape[1]
    lam = np.empty_like(grad_y)
    den = np.ones(K + 1)
    for n in range(grad_y.shape[0]):
        den[1:] = a[n]
        lam[n] = lfilter([1.0], den, grad_y[n, ::-1])[::-1]
    grad_a = np.empty_like(a)
    T = y.shape[1]
    for k in range(1, K + 1):
        grad_a[:, k - 1] = -np.einsum("nt,nt->n", lam[:, k:], y[:, :T - k])
    return lam, grad_a


def allpole_filter_frames(excitation, a, hop: int | None = None,
                          length: int | None = None) -> np.ndarray:
    """All-pole filter every frame, apply a periodic Hann window, overlap-add.

    ``hop`` defaults to half the frame length (the constant overlap-add
    setting for Hann).
    """
    e = np.asarray(excitation, dtype=np.float64)
    hop = e.shape[1] // 2 if hop is None else hop
    y = allpole_frames(e, a)
    return overlap_add(y * hann(e.shape[1]), hop, length)
