"""Hot kernels with a numba path and a pure-numpy fallback.

Set ``COMBQNS_DISABLE_NUMBA=1`` to force the numpy implementations (also used
automatically when numba is not importable). Both paths compute the same
quantities and are cross-checked in the test suite.
"""
import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("COMBQNS_DISABLE_NUMBA", "0") not in ("1", "true", "yes")

# nodes closer than this use Taylor series for the divided differences of exp
_SERIES_RADIUS = 0.5
_SERIES_TERMS = 26


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------

def phi1_numpy(z):
    """(exp(z) - 1) / z evaluated without cancellation, phi1(0) = 1."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_RADIUS
    zs = z[small]
    acc = np.zeros_like(zs)
    term = np.ones_like(zs)
    for k in range(1, _SERIES_TERMS):
        acc += term
        term = term * zs / (k + 1)
    out[small] = acc
    zl = z[~small]
    out[~small] = np.expm1(zl) / zl
    return out


def dd2_numpy(z0, z1, z2):
    """Second divided difference exp[z0, z1, z2] for complex node arrays."""
    z0, z1, z2 = np.broadcast_arrays(*(np.asarray(z, dtype=complex) for z in (z0, z1, z2)))
    out = np.empty(z0.shape, dtype=complex)

    mid = (z0 + z1 + z2) / 3.0
    u0, u1, u2 = z0 - mid, z1 - mid, z2 - mid
    spread = np.maximum(np.maximum(np.abs(u0), np.abs(u1)), np.abs(u2))
    small = spread < _SERIES_RADIUS
    if np.any(small):
        a0, a1, a2 = u0[small], u1[small], u2[small]
        a = np.ones_like(a0)
        b = np.ones_like(a0)
        c = np.ones_like(a0)
        acc = c / 2.0
        fact = 2.0
        for n in range(1, _SERIES_TERMS):
            a = a * a0
            b = a + a1 * b
            c = b + a2 * c
            fact *= n + 2
            acc = acc + c / fact
        out[small] = np.exp(mid[small]) * acc

    big = ~small
    if np.any(big):
        p, q, r = z0[big], z1[big], z2[big]
        # put the most distant pair at (p, r) so the final division is well scaled
        d01 = np.abs(p - q)
        d02 = np.abs(p - r)
        d12 = np.abs(q - r)
        swap_qr = (d01 >= d02) & (d01 >= d12)
        swap_pq = (d12 > d02) & (d12 > d01)
        p2 = np.where(swap_pq, q, p)
        q2 = np.where(swap_qr, r, np.where(swap_pq, p, q))
        r2 = np.where(swap_qr, q, r)
        first = np.exp(p2) * phi1_numpy(q2 - p2)
        second = np.exp(q2) * phi1_numpy(r2 - q2)
        out[big] = (second - first) / (r2 - p2)
    return out


def ff1_numpy(starts, widths, values, omegas):
    """Sum over intervals of value_k * int_{s_k}^{s_k+h_k} exp(i w t) dt.

    ``values`` has shape (n, k); returns an (m, k) array for m frequencies.
    """
    omegas = np.asarray(omegas, dtype=float)
    out = np.zeros((omegas.size, values.shape[1]), dtype=complex)
    for s, h, v in zip(starts, widths, values):
        e = h * np.exp(1j * omegas * s) * phi1_numpy(1j * omegas * h)
        out += e[:, None] * v[None, :]
    return out


def ff2_numpy(starts, widths, ya, yb, w, wp):
    """Ordered double integral over intervals, see :func:`ff2`."""
    w = np.asarray(w, dtype=float)
    wp = np.asarray(wp, dtype=float)
    m = w.size
    out = np.zeros((m, ya.shape[1], yb.shape[1]), dtype=complex)
    cum_b = np.zeros((m, yb.shape[1]), dtype=complex)
    zero = np.zeros(m, dtype=complex)
    for s, h, va, vb in zip(starts, widths, ya, yb):
        ew = h * np.exp(1j * w * s) * phi1_numpy(1j * w * h)
        ewp = h * np.exp(1j * wp * s) * phi1_numpy(1j * wp * h)
        jk = h * h * np.exp(1j * (w + wp) * s) * dd2_numpy(zero, 1j * w * h, 1j * (w + wp) * h)
        inner = cum_b * ew[:, None] + jk[:, None] * vb[None, :]
        out += va[None, :, None] * inner[:, None, :]
        cum_b += ewp[:, None] * vb[None, :]
    return out


def su2_propagate_numpy(h, dt):
    """Product of exp(-i dt h_n . sigma) over steps, as unit quaternions (q0, q).

    ``h`` has shape (ntraj, nsteps, 3); the returned array has shape (ntraj, 4)
    and represents U = q0 I - i q . sigma with later steps multiplied on the left.
    """
    ntraj, nsteps, _ = h.shape
    q = np.zeros((ntraj, 4))
    q[:, 0] = 1.0
    for n in range(nsteps):
        hn = h[:, n, :]
        norm = np.sqrt(np.sum(hn * hn, axis=1))
        phi = norm * dt
        c = np.cos(phi)
        with np.errstate(invalid="ignore", divide="ignore"):
            sfac = np.where(norm > 0, np.sin(phi) / np.where(norm > 0, norm, 1.0), 0.0)
        b = hn * sfac[:, None]
        a0 = q[:, 0]
        a = q[:, 1:]
        new0 = c * a0 - np.sum(b * a, axis=1)
        newv = c[:, None] * a + a0[:, None] * b + np.cross(b, a)
        q[:, 0] = new0
        q[:, 1:] = newv
    return q


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def _phi1_scalar(z):
        if abs(z) < _SERIES_RADIUS:
            acc = 0j
            term = 1.0 + 0j
            for k in range(1, _SERIES_TERMS):
                acc += term
                term = term * z / (k + 1)
            return acc
        return (np.exp(z) - 1.0) / z

    @numba.njit(cache=True)
    def _dd2_scalar(z0, z1, z2):
        mid = (z0 + z1 + z2) / 3.0
        u0 = z0 - mid
        u1 = z1 - mid
        u2 = z2 - mid
        spread = max(abs(u0), abs(u1), abs(u2))
        if spread < _SERIES_RADIUS:
            a = 1.0 + 0j
            b = 1.0 + 0j
            c = 1.0 + 0j
            acc = c / 2.0
            fact = 2.0
            for n in range(1, _SERIES_TERMS):
                a = a * u0
                b = a + u1 * b
                c = b + u2 * c
                fact *= n + 2
                acc += c / fact
            return np.exp(mid) * acc
        d01 = abs(z0 - z1)
        d02 = abs(z0 - z2)
        d12 = abs(z1 - z2)
        p, q, r = z0, z1, z2
        if d01 >= d02 and d01 >= d12:
            q, r = z2, z1
        elif d12 > d02 and d12 > d01:
            p, q = z1, z0
        first = np.exp(p) * _phi1_scalar(q - p)
        second = np.exp(q) * _phi1_scalar(r - q)
        return (second - first) / (r - p)

    @numba.njit(cache=True)
    def ff1_numba(starts, widths, values, omegas):
        m = omegas.shape[0]
        n, k = values.shape
        out = np.zeros((m, k), dtype=np.complex128)
        for i in range(m):
            w = omegas[i]
            for j in range(n):
                h = widths[j]
                e = h * np.exp(1j * w * starts[j]) * _phi1_scalar(1j * w * h)
                for c in range(k):
                    out[i, c] += e * values[j, c]
        return out

    @numba.njit(cache=True)
    def ff2_numba(starts, widths, ya, yb, w, wp):
        m = w.shape[0]
        n, ka = ya.shape
        kb = yb.shape[1]
        out = np.zeros((m, ka, kb), dtype=np.complex128)
        cum = np.zeros(kb, dtype=np.complex128)
        for i in range(m):
            wi = w[i]
            wpi = wp[i]
            for c in range(kb):
                cum[c] = 0.0
            for j in range(n):
                s = starts[j]
                h = widths[j]
                ew = h * np.exp(1j * wi * s) * _phi1_scalar(1j * wi * h)
                ewp = h * np.exp(1j * wpi * s) * _phi1_scalar(1j * wpi * h)
                jk = h * h * np.exp(1j * (wi + wpi) * s) * _dd2_scalar(0j, 1j * wi * h, 1j * (wi + wpi) * h)
                for a in range(ka):
                    va = ya[j, a]
                    if va == 0:
                        continue
                    for b in range(kb):
                        out[i, a, b] += va * (cum[b] * ew + jk * yb[j, b])
                for b in range(kb):
                    cum[b] += ewp * yb[j, b]
        return out

    @numba.njit(cache=True)
    def su2_propagate_numba(h, dt):
        ntraj, nsteps, _ = h.shape
        q = np.zeros((ntraj, 4))
        for t in range(ntraj):
            a0, a1, a2, a3 = 1.0, 0.0, 0.0, 0.0
            for n in range(nsteps):
                hx = h[t, n, 0]
                hy = h[t, n, 1]
                hz = h[t, n, 2]
                norm = math.sqrt(hx * hx + hy * hy + hz * hz)
                if norm == 0.0:
                    continue
                phi = norm * dt
                c = math.cos(phi)
                sf = math.sin(phi) / norm
                b1 = hx * sf
                b2 = hy * sf
                b3 = hz * sf
                n0 = c * a0 - (b1 * a1 + b2 * a2 + b3 * a3)
                n1 = c * a1 + a0 * b1 + (b2 * a3 - b3 * a2)
                n2 = c * a2 + a0 * b2 + (b3 * a1 - b1 * a3)
                n3 = c * a3 + a0 * b3 + (b1 * a2 - b2 * a1)
                a0, a1, a2, a3 = n0, n1, n2, n3
            q[t, 0] = a0
            q[t, 1] = a1
            q[t, 2] = a2
            q[t, 3] = a3
        return q

else:  # pragma: no cover
    ff1_numba = ff2_numba = su2_propagate_numba = None


def _prep(starts, widths, *arrays):
    starts = np.ascontiguousarray(starts, dtype=np.float64)
    widths = np.ascontiguousarray(widths, dtype=np.float64)
    return (starts, widths) + tuple(np.ascontiguousarray(a, dtype=np.complex128) for a in arrays)


def ff1(starts, widths, values, omegas):
    """First-order interval sums, shape (m, k); dispatches on :data:`USE_NUMBA`."""
    starts, widths, values = _prep(starts, widths, values)
    omegas = np.ascontiguousarray(np.atleast_1d(omegas), dtype=np.float64)
    if USE_NUMBA:
        return ff1_numba(starts, widths, values, omegas)
    return ff1_numpy(starts, widths, values, omegas)


def ff2(starts, widths, ya, yb, w, wp):
    """Nested integral sum_{intervals} of ya(t) yb(t') exp(i(w t + wp t')) over t' < t.

    Returns shape (m, ka, kb) for paired frequency arrays ``w`` and ``wp``.
    """
    starts, widths, ya, yb = _prep(starts, widths, ya, yb)
    w, wp = np.broadcast_arrays(np.atleast_1d(np.asarray(w, dtype=np.float64)),
                                np.atleast_1d(np.asarray(wp, dtype=np.float64)))
    w = np.ascontiguousarray(w)
    wp = np.ascontiguousarray(wp)
    if USE_NUMBA:
        return ff2_numba(starts, widths, ya, yb, w, wp)
    return ff2_numpy(starts, widths, ya, yb, w, wp)


def su2_propagate(h, dt):
    """Dispatching wrapper for the piecewise-constant SU(2) propagation kernel."""
    h = np.ascontiguousarray(h, dtype=np.float64)
    if USE_NUMBA:
        return su2_propagate_numba(h, float(dt))
    return su2_propagate_numpy(h, float(dt))
