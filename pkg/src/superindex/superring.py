"""Truncated coefficient rings: polynomial jets, forms, and odd parameters.

The ring R(m, D; odds) is generated by even jet variables x_1..x_m, odd
one-forms dx_1..dx_m, and a list of named auxiliary odd parameters.  Terms
whose total degree (polynomial degree plus form degree) exceeds D are dropped;
the discarded ideal is stable under both multiplication and the differential,
so the quotient is again a differential graded algebra.  Odd parameters count
zero toward the truncation degree: they model external Grassmann directions,
not base geometry.

Scalars are complex doubles by default.  An exact Gaussian-rational mode
(``exact=True``) is available for sign-convention cross-checks; it stores
coefficients as pairs of ``Fraction`` values and round-trips bit-exactly
through JSON.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

__all__ = [
    "QQi",
    "RingSignature",
    "RingElement",
    "merge_sign",
    "ring_mul",
    "ring_d",
    "ring_conjugate",
    "odd_coefficient",
    "body_nil_split",
]

# A term key is (exps, fmask, omask): exponent tuple for x, bitmask over
# dx_1..dx_m, bitmask over the odd parameters.  The canonical generator order
# is dx_1 < ... < dx_m < odd_1 < ... < odd_k; all Koszul signs are computed
# against that order.
Key = tuple[tuple[int, ...], int, int]


def merge_sign(a: int, b: int) -> int:
    """Koszul sign for concatenating two ascending generator words.

    ``a`` and ``b`` are bitmasks over a common totally ordered generator set,
    assumed disjoint.  Sorting the concatenated word a+b moves each generator
    of b left past every generator of a above it; the sign counts those
    transpositions.
    """
    sign = 1
    while b:
        low = b & -b
        higher = a & ~(low | (low - 1))
        if higher.bit_count() & 1:
            sign = -sign
        b ^= low
    return sign


class QQi:
    """Gaussian rational scalar: re + im*i with Fraction components."""

    __slots__ = ("re", "im")

    def __init__(self, re: object = 0, im: object = 0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def coerce(c: object) -> "QQi":
        if isinstance(c, QQi):
            return c
        if isinstance(c, (int, Fraction)):
            return QQi(c)
        if isinstance(c, float) and c == int(c):
            return QQi(int(c))
        raise TypeError(f"cannot coerce {c!r} to an exact Gaussian rational")

    def __add__(self, other: "QQi") -> "QQi":
        other = QQi.coerce(other)
        return QQi(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other: "QQi") -> "QQi":
        other = QQi.coerce(other)
        return QQi(self.re - other.re, self.im - other.im)

    def __mul__(self, other: object) -> "QQi":
        other = QQi.coerce(other)
        return QQi(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> "QQi":
        other = QQi.coerce(other)
        den = other.re * other.re + other.im * other.im
        if den == 0:
            raise ZeroDivisionError("division by zero Gaussian rational")
        return QQi(
            (self.re * other.re + self.im * other.im) / den,
            (self.im * other.re - self.re * other.im) / den,
        )

    def __neg__(self) -> "QQi":
        return QQi(-self.re, -self.im)

    def conjugate(self) -> "QQi":
        return QQi(self.re, -self.im)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = QQi(other)
        if not isinstance(other, QQi):
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def __bool__(self) -> bool:
        return self.re != 0 or self.im != 0

    def __abs__(self) -> float:
        return abs(complex(float(self.re), float(self.im)))

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self) -> str:
        return f"QQi({self.re}, {self.im})"


@dataclass(frozen=True)
class RingSignature:
    """Shape of a coefficient ring: jet variables, truncation order, odd params."""

    m: int = 0
    D: int = 0
    odd: tuple[str, ...] = ()
    field: str = "complex"
    exact: bool = False

    def __post_init__(self) -> None:
        if self.m < 0 or self.D < 0:
            raise ValueError("m and D must be nonnegative")
        if not isinstance(self.odd, tuple):
            object.__setattr__(self, "odd", tuple(self.odd))
        if len(set(self.odd)) != len(self.odd):
            raise ValueError("odd parameter names must be distinct")
        if self.field not in ("real", "complex"):
            raise ValueError("field must be 'real' or 'complex'")

    # -- scalar handling ---------------------------------------------------

    def coerce_scalar(self, c: object):
        if self.exact:
            return QQi.coerce(c)
        return complex(c)

    def zero_scalar(self):
        return QQi() if self.exact else 0j

    def one_scalar(self):
        return QQi(1) if self.exact else complex(1.0)

    # -- element factories ---------------------------------------------------

    def zero(self) -> "RingElement":
        return RingElement(self, {})

    def one(self) -> "RingElement":
        return self.scalar(1)

    def scalar(self, c: object) -> "RingElement":
        c = self.coerce_scalar(c)
        if not c:
            return self.zero()
        return RingElement(self, {self.empty_key(): c})

    def x(self, i: int) -> "RingElement":
        """The jet variable x_i, 1-based."""
        if not 1 <= i <= self.m:
            raise ValueError(f"x index {i} out of range 1..{self.m}")
        if self.D < 1:
            return self.zero()
        exps = tuple(1 if j == i - 1 else 0 for j in range(self.m))
        return RingElement(self, {(exps, 0, 0): self.one_scalar()})

    def dx(self, i: int) -> "RingElement":
        """The one-form dx_i, 1-based."""
        if not 1 <= i <= self.m:
            raise ValueError(f"dx index {i} out of range 1..{self.m}")
        if self.D < 1:
            return self.zero()
        return RingElement(self, {(self._zero_exps(), 1 << (i - 1), 0): self.one_scalar()})

    def odd_param(self, name: str) -> "RingElement":
        if name not in self.odd:
            raise KeyError(f"unknown odd parameter {name!r}")
        bit = 1 << self.odd.index(name)
        return RingElement(self, {(self._zero_exps(), 0, bit): self.one_scalar()})

    # -- key plumbing ----------------------------------------------------------

    def _zero_exps(self) -> tuple[int, ...]:
        return (0,) * self.m

    def empty_key(self) -> Key:
        return (self._zero_exps(), 0, 0)

    def key_total_degree(self, key: Key) -> int:
        exps, fmask, _ = key
        return sum(exps) + fmask.bit_count()

    def key_parity(self, key: Key) -> int:
        _, fmask, omask = key
        return (fmask.bit_count() + omask.bit_count()) & 1

    def combined_mask(self, key: Key) -> int:
        # forms occupy the low m bits, odd params sit above them
        _, fmask, omask = key
        return fmask | (omask << self.m)

    def iter_keys(self) -> Iterator[Key]:
        """All monomial keys of the truncated ring, in canonical order."""

        def exps_upto(total: int, slots: int):
            if slots == 0:
                if True:
                    yield ()
                return
            for head in range(total + 1):
                for tail in exps_upto(total - head, slots - 1):
                    yield (head,) + tail

        keys = []
        for fmask in range(1 << self.m):
            fdeg = fmask.bit_count()
            if fdeg > self.D:
                continue
            for exps in exps_upto(self.D - fdeg, self.m):
                for omask in range(1 << len(self.odd)):
                    keys.append((exps, fmask, omask))
        keys.sort(key=lambda k: (self.key_total_degree(k), k[0], k[1], k[2]))
        return iter(keys)

    def with_odds(self, *names: str) -> "RingSignature":
        """Extend the signature by further odd parameters."""
        extra = tuple(n for n in names if n not in self.odd)
        return RingSignature(self.m, self.D, self.odd + extra, self.field, self.exact)

    def key_str(self, key: Key) -> str:
        exps, fmask, omask = key
        parts = []
        for i, e in enumerate(exps):
            if e == 1:
                parts.append(f"x{i + 1}")
            elif e > 1:
                parts.append(f"x{i + 1}^{e}")
        for i in range(self.m):
            if fmask >> i & 1:
                parts.append(f"dx{i + 1}")
        for i, name in enumerate(self.odd):
            if omask >> i & 1:
                parts.append(name)
        return "*".join(parts) if parts else "1"

    def to_json_dict(self) -> dict:
        return {
            "m": self.m,
            "D": self.D,
            "odd": list(self.odd),
            "field": self.field,
            "exact": self.exact,
        }

    @staticmethod
    def from_json_dict(data: Mapping) -> "RingSignature":
        if not isinstance(data, Mapping):
            raise ValueError("signature must be an object")
        try:
            return RingSignature(
                m=int(data["m"]),
                D=int(data["D"]),
                odd=tuple(data.get("odd", ())),
                field=str(data.get("field", "complex")),
                exact=bool(data.get("exact", False)),
            )
        except KeyError as exc:
            raise ValueError(f"signature missing field {exc}") from exc


class RingElement:
    """A sparse element of a truncated jet-form ring.

    Instances are immutable by convention: every operation returns a new
    element and never mutates ``terms`` after construction.
    """

    __slots__ = ("sig", "terms")

    def __init__(self, sig: RingSignature, terms: Mapping[Key, object] | None = None):
        self.sig = sig
        clean: dict[Key, object] = {}
        if terms:
            for key, c in terms.items():
                if not c:
                    continue
                if sig.key_total_degree(key) > sig.D:
                    continue
                clean[key] = c
        self.terms = clean

    # -- ring structure ----------------------------------------------------

    def __add__(self, other: object) -> "RingElement":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        terms = dict(self.terms)
        for key, c in other.terms.items():
            acc = terms.get(key)
            acc = c if acc is None else acc + c
            if acc:
                terms[key] = acc
            else:
                terms.pop(key, None)
        return RingElement(self.sig, terms)

    __radd__ = __add__

    def __sub__(self, other: object) -> "RingElement":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: object) -> "RingElement":
        return (-self) + other

    def __neg__(self) -> "RingElement":
        return RingElement(self.sig, {k: -c for k, c in self.terms.items()})

    def __mul__(self, other: object) -> "RingElement":
        if isinstance(other, RingElement):
            if other.sig != self.sig:
                raise ValueError("signature mismatch in ring multiplication")
            return self._mul_elem(other)
        try:
            c = self.sig.coerce_scalar(other)
        except (TypeError, ValueError):
            return NotImplemented
        return RingElement(self.sig, {k: v * c for k, v in self.terms.items()})

    def __rmul__(self, other: object) -> "RingElement":
        # scalars commute with everything; RingElement*RingElement never lands here
        return self.__mul__(other)

    def _mul_elem(self, other: "RingElement") -> "RingElement":
        sig = self.sig
        D = sig.D
        out: dict[Key, object] = {}
        for (e1, f1, o1), c1 in self.terms.items():
            d1 = sum(e1) + f1.bit_count()
            w1 = f1 | (o1 << sig.m)
            for (e2, f2, o2), c2 in other.terms.items():
                if d1 + sum(e2) + f2.bit_count() > D:
                    continue
                if (f1 & f2) or (o1 & o2):
                    continue
                w2 = f2 | (o2 << sig.m)
                c = c1 * c2
                if merge_sign(w1, w2) < 0:
                    c = -c
                key = (tuple(a + b for a, b in zip(e1, e2)), f1 | f2, o1 | o2)
                acc = out.get(key)
                acc = c if acc is None else acc + c
                if acc:
                    out[key] = acc
                else:
                    out.pop(key, None)
        return RingElement(sig, out)

    def __pow__(self, k: int) -> "RingElement":
        if k < 0:
            raise ValueError("negative powers are not defined")
        result = self.sig.one()
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def _coerce(self, other: object):
        if isinstance(other, RingElement):
            if other.sig != self.sig:
                raise ValueError("signature mismatch")
            return other
        try:
            return self.sig.scalar(other)
        except (TypeError, ValueError):
            return NotImplemented

    # -- differential --------------------------------------------------------

    def d(self) -> "RingElement":
        """Exterior differential: d(x^e dx_S w) = sum_i e_i x^(e-Δi) dx_i dx_S w."""
        sig = self.sig
        out: dict[Key, object] = {}
        for (exps, fmask, omask), c in self.terms.items():
            for i in range(sig.m):
                e = exps[i]
                if e == 0 or (fmask >> i) & 1:
                    continue
                word = fmask | (omask << sig.m)
                coeff = c * e
                if merge_sign(1 << i, word) < 0:
                    coeff = -coeff
                new_exps = exps[:i] + (e - 1,) + exps[i + 1 :]
                key = (new_exps, fmask | (1 << i), omask)
                acc = out.get(key)
                acc = coeff if acc is None else acc + coeff
                if acc:
                    out[key] = acc
                else:
                    out.pop(key, None)
        return RingElement(sig, out)

    # -- structure maps -------------------------------------------------------

    def conjugate(self) -> "RingElement":
        """Complex-conjugate coefficients; x_i, dx_i and odd params are real."""
        return RingElement(self.sig, {k: c.conjugate() for k, c in self.terms.items()})

    def odd_coefficient(self, name: str) -> "RingElement":
        """Coefficient a_1 in the expansion a = a_0 + p*a_1 (p pulled to the front)."""
        sig = self.sig
        if name not in sig.odd:
            raise KeyError(f"unknown odd parameter {name!r}")
        pbit = sig.odd.index(name)
        out: dict[Key, object] = {}
        for (exps, fmask, omask), c in self.terms.items():
            if not (omask >> pbit) & 1:
                continue
            # pulling p to the front crosses |S| forms and the lower odds of the term
            crossings = fmask.bit_count() + (omask & ((1 << pbit) - 1)).bit_count()
            if crossings & 1:
                c = -c
            out[(exps, fmask, omask & ~(1 << pbit))] = c
        return RingElement(sig, out)

    def strip_odd(self, name: str) -> "RingElement":
        """The part a_0 of a = a_0 + p*a_1: terms with no p factor."""
        sig = self.sig
        if name not in sig.odd:
            raise KeyError(f"unknown odd parameter {name!r}")
        pbit = sig.odd.index(name)
        return RingElement(
            sig, {k: c for k, c in self.terms.items() if not (k[2] >> pbit) & 1}
        )

    def body_nil_split(self) -> tuple[object, "RingElement"]:
        """Split into (constant scalar, nilpotent remainder)."""
        key = self.sig.empty_key()
        body = self.terms.get(key, self.sig.zero_scalar())
        nil = {k: c for k, c in self.terms.items() if k != key}
        return body, RingElement(self.sig, nil)

    def promote(self, sig: RingSignature) -> "RingElement":
        """Inject into a larger signature (same m, D; odd names a superset)."""
        old = self.sig
        if sig.m != old.m or sig.D != old.D or sig.exact != old.exact:
            raise ValueError("promotion requires matching m, D and scalar mode")
        positions = []
        for name in old.odd:
            if name not in sig.odd:
                raise ValueError(f"odd parameter {name!r} missing from target signature")
            positions.append(sig.odd.index(name))
        out: dict[Key, object] = {}
        for (exps, fmask, omask), c in self.terms.items():
            new_omask = 0
            for i, pos in enumerate(positions):
                if (omask >> i) & 1:
                    new_omask |= 1 << pos
            # odd names keep their relative order under promotion, so no sign
            out[(exps, fmask, new_omask)] = c
        return RingElement(sig, out)

    # -- gradings ---------------------------------------------------------------

    def parity_part(self, parity: int) -> "RingElement":
        sig = self.sig
        return RingElement(
            sig, {k: c for k, c in self.terms.items() if sig.key_parity(k) == parity}
        )

    def parity(self) -> int | None:
        """0 or 1 when homogeneous, None for mixed or zero."""
        seen = {self.sig.key_parity(k) for k in self.terms}
        if len(seen) == 1:
            return seen.pop()
        return None

    def form_degree_part(self, k: int) -> "RingElement":
        return RingElement(
            self.sig,
            {key: c for key, c in self.terms.items() if key[1].bit_count() == k},
        )

    def max_form_degree(self) -> int:
        return max((k[1].bit_count() for k in self.terms), default=0)

    # -- metrics ------------------------------------------------------------

    def norm(self) -> float:
        """Sup norm over coefficients."""
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.norm() <= tol

    def coefficient(self, key: Key):
        return self.terms.get(key, self.sig.zero_scalar())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RingElement):
            try:
                other = self.sig.scalar(other)
            except (TypeError, ValueError):
                return NotImplemented
        return self.sig == other.sig and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.sig, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for key in sorted(self.terms, key=lambda k: (self.sig.key_total_degree(k), k)):
            c = self.terms[key]
            cs = repr(c) if isinstance(c, QQi) else format(complex(c), ".6g")
            name = self.sig.key_str(key)
            bits.append(cs if name == "1" else f"({cs})*{name}")
        return " + ".join(bits)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        sig = self.sig
        terms = []
        for key in sorted(self.terms, key=lambda k: (sig.key_total_degree(k), k)):
            exps, fmask, omask = key
            c = self.terms[key]
            if sig.exact:
                re, im = str(c.re), str(c.im)
            else:
                re, im = c.real, c.imag
            terms.append(
                {
                    "exps": list(exps),
                    "forms": [i + 1 for i in range(sig.m) if (fmask >> i) & 1],
                    "odds": [sig.odd[i] for i in range(len(sig.odd)) if (omask >> i) & 1],
                    "re": re,
                    "im": im,
                }
            )
        return {"signature": sig.to_json_dict(), "terms": terms}

    @staticmethod
    def from_json_dict(data: Mapping) -> "RingElement":
        if not isinstance(data, Mapping) or "signature" not in data:
            raise ValueError("ring element must be an object with a 'signature'")
        sig = RingSignature.from_json_dict(data["signature"])
        terms: dict[Key, object] = {}
        for t in data.get("terms", ()):
            exps = tuple(int(e) for e in t.get("exps", []))
            if len(exps) != sig.m:
                raise ValueError("term exponent length does not match signature")
            fmask = 0
            for i in t.get("forms", ()):
                i = int(i)
                if not 1 <= i <= sig.m:
                    raise ValueError(f"form index {i} out of range")
                fmask |= 1 << (i - 1)
            omask = 0
            for name in t.get("odds", ()):
                if name not in sig.odd:
                    raise ValueError(f"odd parameter {name!r} not in signature")
                omask |= 1 << sig.odd.index(name)
            if sig.exact:
                c = QQi(Fraction(str(t["re"])), Fraction(str(t["im"])))
            else:
                c = complex(float(t["re"]), float(t["im"]))
            key = (exps, fmask, omask)
            if key in terms:
                raise ValueError(f"duplicate term key {key}")
            terms[key] = c
        return RingElement(sig, terms)


# Module-level aliases naming the public operations.

def ring_mul(a: RingElement, b: RingElement) -> RingElement:
    return a * b


def ring_d(a: RingElement) -> RingElement:
    return a.d()


def ring_conjugate(a: RingElement) -> RingElement:
    return a.conjugate()


def odd_coefficient(a: RingElement, p: str) -> RingElement:
    return a.odd_coefficient(p)


def body_nil_split(a: RingElement) -> tuple[object, RingElement]:
    return a.body_nil_split()
