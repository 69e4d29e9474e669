"""Compiled state-vector kernels.

Basis index bit ``q`` is the Z eigenvalue of qubit ``q`` (0 -> +1, 1 -> -1).
Two-qubit matrices act on the local index ``2 * bit(q1) + bit(q2)``.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _parity(x):
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


@njit(cache=True, inline="always")
def _insert_zero(i, q):
    low = i & ((1 << q) - 1)
    return ((i >> q) << (q + 1)) | low


@njit(cache=True)
def apply_1q(psi, q, u):
    half = psi.shape[0] >> 1
    bit = 1 << q
    u00, u01, u10, u11 = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    for i in range(half):
        i0 = _insert_zero(i, q)
        i1 = i0 | bit
        a0 = psi[i0]
        a1 = psi[i1]
        psi[i0] = u00 * a0 + u01 * a1
        psi[i1] = u10 * a0 + u11 * a1


@njit(cache=True)
def apply_diag_1q(psi, q, d0, d1):
    bit = 1 << q
    for i in range(psi.shape[0]):
        if i & bit:
            psi[i] *= d1
        else:
            psi[i] *= d0


@njit(cache=True)
def apply_2q(psi, q1, q2, u_even, u_odd, mask):
    """Apply ``u_even`` or ``u_odd`` depending on the parity of ``index & mask``."""
    lo = min(q1, q2)
    hi = max(q1, q2)
    b1 = 1 << q1
    b2 = 1 << q2
    quarter = psi.shape[0] >> 2
    for i in range(quarter):
        base = _insert_zero(_insert_zero(i, lo), hi)
        i00 = base
        i01 = base | b2
        i10 = base | b1
        i11 = base | b1 | b2
        a0 = psi[i00]
        a1 = psi[i01]
        a2 = psi[i10]
        a3 = psi[i11]
        if mask != 0 and _parity(base & mask) == 1:
            u = u_odd
        else:
            u = u_even
        psi[i00] = u[0, 0] * a0 + u[0, 1] * a1 + u[0, 2] * a2 + u[0, 3] * a3
        psi[i01] = u[1, 0] * a0 + u[1, 1] * a1 + u[1, 2] * a2 + u[1, 3] * a3
        psi[i10] = u[2, 0] * a0 + u[2, 1] * a1 + u[2, 2] * a2 + u[2, 3] * a3
        psi[i11] = u[3, 0] * a0 + u[3, 1] * a1 + u[3, 2] * a2 + u[3, 3] * a3


@njit(cache=True, fastmath=True)
def apply_nc_2q(psi, q1, q2, e00, e11, b00, b01, b10, b11, o00, o01, o10, o11, f00, f11, mask):
    """Number-conserving two-qubit gate: phases on |00>, |11> and a 2x2 block on |01>, |10>.

    The ``o``/``f`` entries replace the ``b``/``e`` ones on odd parity of ``index & mask``.
    """
    lo = min(q1, q2)
    hi = max(q1, q2)
    blo = 1 << lo
    bhi = 1 << hi
    b1 = 1 << q1
    b2 = 1 << q2
    dim = psi.shape[0]
    for a in range(0, dim, 2 * bhi):
        for b in range(a, a + bhi, 2 * blo):
            for base in range(b, b + blo):
                i01 = base | b2
                i10 = base | b1
                i11 = i01 | b1
                a1 = psi[i01]
                a2 = psi[i10]
                if mask != 0 and _parity(base & mask) == 1:
                    psi[base] *= f00
                    psi[i11] *= f11
                    psi[i01] = o00 * a1 + o01 * a2
                    psi[i10] = o10 * a1 + o11 * a2
                else:
                    psi[base] *= e00
                    psi[i11] *= e11
                    psi[i01] = b00 * a1 + b01 * a2
                    psi[i10] = b10 * a1 + b11 * a2


@njit(cache=True)
def apply_bond_program(psi, q1s, q2s, masks, u_even, u_odd):
    """Apply a sequence of number-conserving (possibly string-dressed) gates in order."""
    for g in range(q1s.shape[0]):
        ue = u_even[g]
        uo = u_odd[g]
        apply_nc_2q(psi, q1s[g], q2s[g], ue[0, 0], ue[3, 3], ue[1, 1], ue[1, 2], ue[2, 1], ue[2, 2],
                    uo[1, 1], uo[1, 2], uo[2, 1], uo[2, 2], uo[0, 0], uo[3, 3], masks[g])


@njit(cache=True)
def prob_one(psi, q):
    bit = 1 << q
    s = 0.0
    for i in range(psi.shape[0]):
        if i & bit:
            a = psi[i]
            s += a.real * a.real + a.imag * a.imag
    return s


@njit(cache=True)
def collapse(psi, q, bit_value, norm):
    """Project qubit ``q`` onto ``bit_value`` and rescale by ``1 / norm``."""
    bit = 1 << q
    scale = 1.0 / norm
    for i in range(psi.shape[0]):
        if ((i & bit) != 0) == (bit_value == 1):
            psi[i] *= scale
        else:
            psi[i] = 0.0


@njit(cache=True)
def flip(psi, q):
    half = psi.shape[0] >> 1
    bit = 1 << q
    for i in range(half):
        i0 = _insert_zero(i, q)
        i1 = i0 | bit
        t = psi[i0]
        psi[i0] = psi[i1]
        psi[i1] = t


@njit(cache=True)
def site_densities(psi, n_sites):
    """Occupation probability of the first ``n_sites`` qubits."""
    out = np.zeros(n_sites)
    for i in range(psi.shape[0]):
        a = psi[i]
        w = a.real * a.real + a.imag * a.imag
        if w == 0.0:
            continue
        for q in range(n_sites):
            if (i >> q) & 1:
                out[q] += w
    return out


@njit(cache=True, fastmath=True)
def hop_expect(psi, j, k, mask):
    """Return ``<sigma+_j sigma-_k>`` with an optional Z-string on ``mask``."""
    lo = min(j, k)
    hi = max(j, k)
    blo = 1 << lo
    bhi = 1 << hi
    bj = 1 << j
    bk = 1 << k
    dim = psi.shape[0]
    re = 0.0
    im = 0.0
    for a in range(0, dim, 2 * bhi):
        for b in range(a, a + bhi, 2 * blo):
            for base in range(b, b + blo):
                # sigma+_j sigma-_k maps |j=0,k=1> to |j=1,k=0>
                u = psi[base | bj]
                v = psi[base | bk]
                r = u.real * v.real + u.imag * v.imag
                i = u.real * v.imag - u.imag * v.real
                if mask != 0 and _parity(base & mask) == 1:
                    re -= r
                    im -= i
                else:
                    re += r
                    im += i
    return re + 1j * im


@njit(cache=True)
def pauli_expect(psi, xmask, zmask):
    """``sum_b conj(psi[b ^ x]) (-1)^{|z & b|} psi[b]`` (phase applied by caller)."""
    acc = 0.0 + 0.0j
    for b in range(psi.shape[0]):
        a = psi[b]
        if a == 0:
            continue
        term = np.conj(psi[b ^ xmask]) * a
        if _parity(b & zmask) == 1:
            acc -= term
        else:
            acc += term
    return acc


@njit(cache=True)
def apply_pauli(psi, out, xmask, zmask):
    for b in range(psi.shape[0]):
        a = psi[b]
        if _parity(b & zmask) == 1:
            a = -a
        out[b ^ xmask] = a
