"""Compiled inner loops for long 2x2 transfer products.

Every running product is rescaled by an exact power of two every
``RENORM_EVERY`` steps; the accumulated binary exponent is returned next to
the scaled matrix, so ``A = 2**exp * P``. Power-of-two rescaling introduces
no rounding of its own.
"""

import math

import numba
import numpy as np

RENORM_EVERY = 32
LN2 = math.log(2.0)


@numba.njit(cache=True, inline="always")
def _rescale_exponent(mx):
    if mx == 0.0 or not np.isfinite(mx):
        return 0
    m, e = math.frexp(mx)
    return e


@numba.njit(cache=True)
def trace_batch(energies, v, want_derivative):
    """Scaled trace of the monodromy (and its E-derivative) for many energies.

    Returns ``(tr, dtr, exp2)`` with ``psi(E) = tr * 2**exp2`` and
    ``psi'(E) = dtr * 2**exp2``.
    """
    m = energies.shape[0]
    n = v.shape[0]
    tr = np.empty(m)
    dtr = np.zeros(m)
    ex = np.zeros(m, dtype=np.int64)
    for q in range(m):
        E = energies[q]
        a = 1.0
        b = 0.0
        c = 0.0
        d = 1.0
        da = 0.0
        db = 0.0
        dc = 0.0
        dd = 0.0
        e2 = 0
        for i in range(n):
            x = E - v[i]
            if want_derivative:
                nda = x * da - dc + a
                ndb = x * db - dd + b
                dc = da
                dd = db
                da = nda
                db = ndb
            na = x * a - c
            nb = x * b - d
            c = a
            d = b
            a = na
            b = nb
            if (i + 1) % 32 == 0:
                mx = max(abs(a), abs(b), abs(c), abs(d))
                if want_derivative:
                    mx = max(mx, abs(da), abs(db), abs(dc), abs(dd))
                k = _rescale_exponent(mx)
                if k != 0:
                    a = math.ldexp(a, -k)
                    b = math.ldexp(b, -k)
                    c = math.ldexp(c, -k)
                    d = math.ldexp(d, -k)
                    da = math.ldexp(da, -k)
                    db = math.ldexp(db, -k)
                    dc = math.ldexp(dc, -k)
                    dd = math.ldexp(dd, -k)
                    e2 += k
        tr[q] = a + d
        dtr[q] = da + dd
        ex[q] = e2
    return tr, dtr, ex


@numba.njit(cache=True)
def product_batch(energies, v, x0, nsteps):
    """Scaled transfer matrices ``S_{x0+n-1} ... S_{x0}`` for many energies.

    Returns an ``(m, 2, 2)`` array and the binary exponents.
    """
    m = energies.shape[0]
    p = v.shape[0]
    out = np.empty((m, 2, 2))
    ex = np.zeros(m, dtype=np.int64)
    for q in range(m):
        E = energies[q]
        a = 1.0
        b = 0.0
        c = 0.0
        d = 1.0
        e2 = 0
        for i in range(nsteps):
            x = E - v[(x0 + i) % p]
            na = x * a - c
            nb = x * b - d
            c = a
            d = b
            a = na
            b = nb
            if (i + 1) % 32 == 0:
                k = _rescale_exponent(max(abs(a), abs(b), abs(c), abs(d)))
                if k != 0:
                    a = math.ldexp(a, -k)
                    b = math.ldexp(b, -k)
                    c = math.ldexp(c, -k)
                    d = math.ldexp(d, -k)
                    e2 += k
        out[q, 0, 0] = a
        out[q, 0, 1] = b
        out[q, 1, 0] = c
        out[q, 1, 1] = d
        ex[q] = e2
    return out, ex


@numba.njit(cache=True)
def _log_spectral_norm(a, b, c, d):
    # largest singular value of [[a, b], [c, d]] without forming squares that overflow
    s = max(abs(a), abs(b), abs(c), abs(d))
    if s == 0.0:
        return -np.inf
    a /= s
    b /= s
    c /= s
    d /= s
    f = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = max(f * f - 4.0 * det * det, 0.0)
    sig2 = 0.5 * (f + math.sqrt(disc))
    return math.log(s) + 0.5 * math.log(sig2)


@numba.njit(cache=True)
def log_norm_profile(energies, v, sites, steps):
    """``log ||A_k(x)||`` for every energy, start site x and step count k.

    ``steps`` must be sorted ascending. Output shape ``(m, len(sites), len(steps))``.
    """
    m = energies.shape[0]
    p = v.shape[0]
    ns = sites.shape[0]
    nk = steps.shape[0]
    out = np.empty((m, ns, nk))
    kmax = steps[nk - 1]
    for q in range(m):
        E = energies[q]
        for si in range(ns):
            x0 = sites[si]
            a = 1.0
            b = 0.0
            c = 0.0
            d = 1.0
            e2 = 0
            pos = 0
            while pos < nk and steps[pos] == 0:
                out[q, si, pos] = 0.0
                pos += 1
            for i in range(kmax):
                x = E - v[(x0 + i) % p]
                na = x * a - c
                nb = x * b - d
                c = a
                d = b
                a = na
                b = nb
                if (i + 1) % 32 == 0:
                    k = _rescale_exponent(max(abs(a), abs(b), abs(c), abs(d)))
                    if k != 0:
                        a = math.ldexp(a, -k)
                        b = math.ldexp(b, -k)
                        c = math.ldexp(c, -k)
                        d = math.ldexp(d, -k)
                        e2 += k
                while pos < nk and steps[pos] == i + 1:
                    out[q, si, pos] = _log_spectral_norm(a, b, c, d) + e2 * 0.6931471805599453
                    pos += 1
    return out


@numba.njit(cache=True)
def ids_density_batch(energies, v):
    """Mean squared Hilbert-Schmidt norm of the rotation conjugators, / (4 pi n).

    Energies must be strictly inside bands; NaN is returned otherwise.
    """
    m = energies.shape[0]
    n = v.shape[0]
    out = np.empty(m)
    for q in range(m):
        E = energies[q]
        a = 1.0
        b = 0.0
        c = 0.0
        d = 1.0
        e2 = 0
        for i in range(n):
            x = E - v[i]
            na = x * a - c
            nb = x * b - d
            c = a
            d = b
            a = na
            b = nb
            if (i + 1) % 32 == 0:
                k = _rescale_exponent(max(abs(a), abs(b), abs(c), abs(d)))
                if k != 0:
                    a = math.ldexp(a, -k)
                    b = math.ldexp(b, -k)
                    c = math.ldexp(c, -k)
                    d = math.ldexp(d, -k)
                    e2 += k
        a = math.ldexp(a, e2)
        b = math.ldexp(b, e2)
        c = math.ldexp(c, e2)
        d = math.ldexp(d, e2)
        t = a + d
        if not abs(t) < 2.0 or c == 0.0:
            out[q] = np.nan
            continue
        # fixed point of the Mobius action of the monodromy in the upper half-plane
        zr = (a - d) / (2.0 * c)
        zi = math.sqrt(4.0 - t * t) / (2.0 * abs(c))
        z = complex(zr, zi)
        acc = 0.0
        for i in range(n):
            acc += (1.0 + z.real * z.real + z.imag * z.imag) / z.imag
            z = (E - v[i]) - 1.0 / z
        out[q] = acc / (4.0 * math.pi * n)
    return out


@numba.njit(cache=True)
def lyapunov_from_scaled_trace(tr, ex, n):
    """``(1/n) log`` of the spectral radius, given ``trace = tr * 2**ex``."""
    m = tr.shape[0]
    out = np.empty(m)
    for q in range(m):
        t = abs(tr[q])
        e2 = ex[q]
        if e2 == 0 and t <= 2.0:
            out[q] = 0.0
            continue
        if t == 0.0:
            out[q] = 0.0
            continue
        logt = math.log(t) + e2 * 0.6931471805599453
        if logt > 20.0:
            # |t|/2 + sqrt(t^2/4 - 1) = |t| * (1 + sqrt(1 - 4/t^2)) / 2
            out[q] = (logt + math.log1p(math.sqrt(max(1.0 - 4.0 * math.exp(-2.0 * logt), 0.0))) - LN2) / n
        else:
            tt = math.exp(logt)
            if tt <= 2.0:
                out[q] = 0.0
            else:
                out[q] = math.log(0.5 * tt + math.sqrt(0.25 * tt * tt - 1.0)) / n
    return out
