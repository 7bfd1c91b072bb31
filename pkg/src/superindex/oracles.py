"""Slow, obvious reference implementations used only by the test suite.

Each oracle reimplements an operation of the main engine with different data
structures and, crucially, a different sign convention engine, so that a sign
bug in the fast path cannot confirm itself.  All oracles enforce small-size
guardrails: ring dimension at most 4096, matrix rank at most 8.
"""

from __future__ import annotations

from .superring import RingElement, RingSignature

RING_DIM_LIMIT = 4096
RANK_LIMIT = 8


def _ring_dimension(sig: RingSignature) -> int:
    return sum(1 for _ in sig.iter_keys())


def _guard_sig(sig: RingSignature) -> None:
    if _ring_dimension(sig) > RING_DIM_LIMIT:
        raise ValueError("oracle guardrail: ring dimension exceeds 4096")


def _sorted_word(symbols: list[int]) -> tuple[int, list[int]]:
    """Bubble sort a generator word, tracking the Koszul sign.

    Symbols are integers in a fixed global order.  Each adjacent swap of
    distinct odd generators flips the sign; a repeated symbol kills the word.
    """
    word = list(symbols)
    sign = 1
    n = len(word)
    for i in range(n):
        for j in range(n - 1 - i):
            if word[j] > word[j + 1]:
                word[j], word[j + 1] = word[j + 1], word[j]
                sign = -sign
            elif word[j] == word[j + 1]:
                return 0, []
    return sign, word


def _key_to_word(key, m: int) -> list[int]:
    exps, fmask, omask = key
    word = [i for i in range(m) if (fmask >> i) & 1]
    word += [m + i for i in range(omask.bit_length()) if (omask >> i) & 1]
    return word


def _word_to_masks(word: list[int], m: int) -> tuple[int, int]:
    fmask = 0
    omask = 0
    for s in word:
        if s < m:
            fmask |= 1 << s
        else:
            omask |= 1 << (s - m)
    return fmask, omask


def oracle_dense_grassmann(a: RingElement, b: RingElement) -> RingElement:
    """Brute-force supercommutative product via explicit word shuffling."""
    if a.sig != b.sig:
        raise ValueError("signature mismatch")
    sig = a.sig
    _guard_sig(sig)
    m = sig.m
    out: dict = {}
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            word = _key_to_word(ka, m) + _key_to_word(kb, m)
            sign, sorted_word = _sorted_word(word)
            if sign == 0:
                continue
            exps = tuple(ea + eb for ea, eb in zip(ka[0], kb[0]))
            fmask, omask = _word_to_masks(sorted_word, m)
            if sum(exps) + len([s for s in sorted_word if s < m]) > sig.D:
                continue
            key = (exps, fmask, omask)
            c = ca * cb
            if sign < 0:
                c = -c
            acc = out.get(key)
            acc = c if acc is None else acc + c
            if acc:
                out[key] = acc
            else:
                out.pop(key, None)
    return RingElement(sig, out)


# -- matrix exponential over the local ring ------------------------------------


def _oracle_mat_mul(A, B):
    n = len(A)
    return [
        [
            _sum_elems([oracle_dense_grassmann(A[i][k], B[k][j]) for k in range(n)])
            for j in range(n)
        ]
        for i in range(n)
    ]


def _sum_elems(elems):
    total = elems[0]
    for e in elems[1:]:
        total = total + e
    return total


def _oracle_mat_add(A, B):
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def _oracle_mat_scale(A, c):
    return [[a * c for a in row] for row in A]


def _mat_sup_norm(A) -> float:
    return max(e.norm() for row in A for e in row)


def oracle_series_exp(M, terms: int = 60):
    """exp of a square matrix over the ring by plain power series.

    Uses scaling and squaring so the series converges quickly, with every
    product routed through the dense word-shuffling oracle.  Guardrail: rank
    at most 8.
    """
    n = len(M)
    if n > RANK_LIMIT:
        raise ValueError("oracle guardrail: matrix rank exceeds 8")
    if any(len(row) != n for row in M):
        raise ValueError("matrix must be square")
    sig = M[0][0].sig
    _guard_sig(sig)

    scale = 0
    norm = _mat_sup_norm(M)
    while norm > 0.5 and scale < 40:
        norm /= 2.0
        scale += 1
    S = _oracle_mat_scale(M, 1.0 / (1 << scale)) if scale else M

    ident = [[sig.one() if i == j else sig.zero() for j in range(n)] for i in range(n)]
    result = ident
    power = ident
    fact = 1.0
    for k in range(1, terms + 1):
        power = _oracle_mat_mul(power, S)
        fact *= k
        term = _oracle_mat_scale(power, 1.0 / fact)
        result = _oracle_mat_add(result, term)
        if _mat_sup_norm(term) < 1e-17:
            break
    for _ in range(scale):
        result = _oracle_mat_mul(result, result)
    return result


# -- naive Clifford product -------------------------------------------------


def oracle_clifford_naive(n: int, a: dict, b: dict) -> dict:
    """Table-free Clifford product for the degree-n algebra.

    Elements are maps from ordered generator index tuples (1-based) to
    scalars.  Generators square to -1 for n >= 0 and to +1 for n < 0, and
    distinct generators anticommute.  Reduction proceeds by adjacent swaps on
    explicit index lists; no bitmask arithmetic.
    """
    square = -1 if n >= 0 else 1
    out: dict = {}
    for wa, ca in a.items():
        for wb, cb in b.items():
            word = list(wa) + list(wb)
            sign = 1
            # repeatedly sort; cancel equal neighbors as they meet
            changed = True
            while changed:
                changed = False
                i = 0
                while i < len(word) - 1:
                    if word[i] == word[i + 1]:
                        del word[i : i + 2]
                        sign *= square
                        changed = True
                        i = max(i - 1, 0)
                    elif word[i] > word[i + 1]:
                        word[i], word[i + 1] = word[i + 1], word[i]
                        sign = -sign
                        changed = True
                        i += 1
                    else:
                        i += 1
            key = tuple(word)
            c = sign * ca * cb
            acc = out.get(key, 0)
            acc = acc + c
            if acc:
                out[key] = acc
            else:
                out.pop(key, None)
    return out
