"""Pure NumPy versions of the compiled alpha-sums in ``_kernels.pyx``.

Same signatures and the same reduction tree (sequential blocks of 64, then
pairwise over block sums); ``nthreads`` is accepted and ignored.
"""
import numpy as np

BLOCK = 64
_ROWS = 256


def _pairwise(terms):
    rows, n = terms.shape
    nb = -(-n // BLOCK)
    padded = np.zeros((rows, nb * BLOCK))
    padded[:, :n] = terms
    blocks = np.cumsum(padded.reshape(rows, nb, BLOCK), axis=2)[:, :, -1]
    m = nb
    while m > 1:
        half = m // 2
        merged = blocks[:, 0:2 * half:2] + blocks[:, 1:2 * half:2]
        if m % 2:
            merged = np.concatenate([merged, blocks[:, m - 1:m]], axis=1)
        blocks = merged
        m = (m + 1) // 2
    return blocks[:, 0]


def _offsets(lo, hi, n):
    return np.arange(lo, hi)[:, None] - np.arange(n)[None, :]


def _rowwise(n, make_terms):
    out = np.empty(n)
    for lo in range(0, n, _ROWS):
        hi = min(n, lo + _ROWS)
        d = _offsets(lo, hi, n)
        terms = make_terms(lo, hi, d)
        out[lo:hi] = _pairwise(terms)
    return out


def velocity_sum(f, df, h, beta, pw, nthreads=1):
    f = np.asarray(f, dtype=float)
    df = np.asarray(df, dtype=float)
    pw = np.asarray(pw, dtype=float)

    def terms(lo, hi, d):
        diag = d == 0
        dd = np.where(diag, 1, d)
        inv = pw[np.abs(dd)] / (dd * h)
        D = (f[lo:hi, None] - f[None, :]) * inv + beta
        t = (df[lo:hi, None] - df[None, :]) * inv / (1.0 + D * D)
        t[diag] = 0.0
        return t

    return _rowwise(f.size, terms)


def flux_sum(f, h, nthreads=1):
    f = np.asarray(f, dtype=float)

    def terms(lo, hi, d):
        diag = d == 0
        dd = np.where(diag, 1, d)
        t = np.arctan((f[lo:hi, None] - f[None, :]) / (dd * h))
        t[diag] = 0.0
        return t

    return _rowwise(f.size, terms)


def lambda_sum(f, q, nthreads=1):
    f = np.asarray(f, dtype=float)
    q = np.asarray(q, dtype=float)

    def terms(lo, hi, d):
        return (f[lo:hi, None] - f[None, :]) * q[np.abs(d)]

    return _rowwise(f.size, terms)


def energy_sum(f, h, nthreads=1):
    f = np.asarray(f, dtype=float)

    def terms(lo, hi, d):
        diag = d == 0
        dd = np.where(diag, 1, d)
        r = (f[lo:hi, None] - f[None, :]) / (dd * h)
        t = np.log1p(r * r)
        t[diag] = 0.0
        return t

    return _rowwise(f.size, terms)
