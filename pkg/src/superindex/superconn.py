"""Superconnections over the truncated coefficient ring.

An operator-valued form is stored as a map from ring keys to dense complex
matrices.  Products follow the super convention: moving an odd matrix past an
odd ring coefficient costs a sign, so a constant odd endomorphism acts on
form-valued sections super-linearly.  The differential d never appears as a
matrix; operators that involve it are kept as pairs (pure, tail) meaning
pure + tail o d, which is closed under composition because d squares to zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .clifford import (
    GradedCliffordModule,
    grading_matrix,
    ordinary_adjoint,
    supercommutator,
)
from .superring import Key, RingElement, RingSignature, merge_sign

TOL = 1e-10

__all__ = [
    "OperatorForm",
    "OperatorWithD",
    "SuperBundle",
    "Superconnection",
    "SemigroupRep",
    "HermitianPairing",
    "FormalRescale",
    "compose_superEuc",
    "square",
    "check_leibniz",
    "check_self_adjoint",
    "getzler_rescale",
    "heat",
    "spar",
    "check_semigroup",
    "extract_superconnection",
    "source_target_pullback",
    "involution_pullbacks",
    "pairing_adjunction_check",
    "reality_check",
]


def _merge_keys(sig: RingSignature, k1: Key, k2: Key):
    """Ring product of two basis keys: (sign, key) or None if it dies."""
    e1, f1, o1 = k1
    e2, f2, o2 = k2
    if f1 & f2 or o1 & o2:
        return None
    exps = tuple(a + b for a, b in zip(e1, e2))
    if sum(exps) + (f1 | f2).bit_count() > sig.D:
        return None
    sign = merge_sign(f1 | (o1 << sig.m), f2 | (o2 << sig.m))
    return sign, (exps, f1 | f2, o1 | o2)


class OperatorForm:
    """Matrix-valued element of the coefficient ring.

    ``terms`` maps ring keys to (p+q) x (p+q) complex matrices, or to
    (p+q,)-vectors when the object is a section.  The first p coordinates are
    even, the last q odd.
    """

    __slots__ = ("sig", "p", "q", "terms")

    def __init__(self, sig: RingSignature, p: int, q: int, terms=None, tol: float = 0.0):
        self.sig = sig
        self.p = p
        self.q = q
        out = {}
        for key, M in (terms or {}).items():
            M = np.asarray(M, dtype=complex)
            if np.abs(M).max(initial=0.0) > tol:
                out[key] = M
        self.terms = out

    # -- constructors ----------------------------------------------------------

    @staticmethod
    def zero(sig, p, q) -> "OperatorForm":
        return OperatorForm(sig, p, q, {})

    @staticmethod
    def identity(sig, p, q) -> "OperatorForm":
        return OperatorForm(sig, p, q, {sig.empty_key(): np.eye(p + q, dtype=complex)})

    @staticmethod
    def from_matrix(sig, p, q, M) -> "OperatorForm":
        return OperatorForm(sig, p, q, {sig.empty_key(): np.asarray(M, dtype=complex)})

    @staticmethod
    def basis_section(sig, p, q, j) -> "OperatorForm":
        v = np.zeros(p + q, dtype=complex)
        v[j] = 1.0
        return OperatorForm(sig, p, q, {sig.empty_key(): v})

    @property
    def rank(self) -> int:
        return self.p + self.q

    @property
    def is_section(self) -> bool:
        return any(M.ndim == 1 for M in self.terms.values())

    # -- linear structure --------------------------------------------------------

    def __add__(self, other: "OperatorForm") -> "OperatorForm":
        self._check_compatible(other)
        out = {k: M.copy() for k, M in self.terms.items()}
        for k, M in other.terms.items():
            out[k] = out[k] + M if k in out else M
        return OperatorForm(self.sig, self.p, self.q, out, tol=0.0)

    def __sub__(self, other: "OperatorForm") -> "OperatorForm":
        return self + (other * -1)

    def __neg__(self) -> "OperatorForm":
        return self * -1

    def __mul__(self, c) -> "OperatorForm":
        c = complex(c)
        return OperatorForm(self.sig, self.p, self.q, {k: M * c for k, M in self.terms.items()})

    __rmul__ = __mul__

    def _check_compatible(self, other: "OperatorForm"):
        if self.sig != other.sig:
            raise ValueError("ring signature mismatch")
        if (self.p, self.q) != (other.p, other.q):
            raise ValueError("graded rank mismatch")

    # -- gradings and parts ------------------------------------------------------

    def _eps(self) -> np.ndarray:
        return grading_matrix(self.p, self.q)

    def _dress(self, M: np.ndarray) -> np.ndarray:
        """Conjugate by the grading: flips the sign of the odd matrix part."""
        eps = np.array([1.0] * self.p + [-1.0] * self.q)
        if M.ndim == 1:
            return eps * M
        return eps[:, None] * M * eps[None, :]

    def matrix_parity_part(self, parity: int) -> "OperatorForm":
        out = {}
        for k, M in self.terms.items():
            half = (M + (1 if parity == 0 else -1) * self._dress(M)) / 2.0
            out[k] = half
        return OperatorForm(self.sig, self.p, self.q, out, tol=0.0)

    def total_parity_part(self, parity: int) -> "OperatorForm":
        """Part of total parity = ring parity + matrix block parity."""
        out = {}
        for k, M in self.terms.items():
            rp = self.sig.key_parity(k)
            out[k] = (M + (1 if (parity - rp) % 2 == 0 else -1) * self._dress(M)) / 2.0
        return OperatorForm(self.sig, self.p, self.q, out, tol=0.0)

    def form_degree_part(self, k: int) -> "OperatorForm":
        out = {key: M for key, M in self.terms.items() if key[1].bit_count() == k}
        return OperatorForm(self.sig, self.p, self.q, out)

    def max_form_degree(self) -> int:
        return max((key[1].bit_count() for key in self.terms), default=0)

    def body_nil_split(self):
        """(constant matrix, remainder); the remainder is nilpotent."""
        empty = self.sig.empty_key()
        body = self.terms.get(empty)
        if body is None:
            shape = (self.rank,) if self.is_section else (self.rank, self.rank)
            body = np.zeros(shape, dtype=complex)
        rest = {k: M for k, M in self.terms.items() if k != empty}
        return body.copy(), OperatorForm(self.sig, self.p, self.q, rest)

    # -- ring actions ------------------------------------------------------------

    def ring_mul_left(self, a: RingElement) -> "OperatorForm":
        """Left multiplication by a scalar ring element (no matrix part)."""
        if a.sig != self.sig:
            raise ValueError("ring signature mismatch")
        out = {}
        for k1, c1 in a.terms.items():
            for k2, M in self.terms.items():
                merged = _merge_keys(self.sig, k1, k2)
                if merged is None:
                    continue
                sign, key = merged
                piece = (sign * complex(c1)) * M
                out[key] = out[key] + piece if key in out else piece
        return OperatorForm(self.sig, self.p, self.q, out, tol=0.0)

    def __matmul__(self, other: "OperatorForm") -> "OperatorForm":
        """Super composition; an odd matrix crossing an odd key costs a sign."""
        self._check_compatible(other)
        if self.is_section:
            raise ValueError("sections cannot act on the left")
        sig = self.sig
        out = {}
        dressed_cache = {}
        for k2, M2 in other.terms.items():
            p2 = sig.key_parity(k2)
            for k1, M1 in self.terms.items():
                merged = _merge_keys(sig, k1, k2)
                if merged is None:
                    continue
                sign, key = merged
                if p2:
                    left = dressed_cache.get(k1)
                    if left is None:
                        left = self._dress(M1)
                        dressed_cache[k1] = left
                else:
                    left = M1
                piece = sign * (left @ M2)
                out[key] = out[key] + piece if key in out else piece
        return OperatorForm(self.sig, self.p, self.q, out, tol=0.0)

    def d(self) -> "OperatorForm":
        out = {}
        for key, M in self.terms.items():
            unit = RingElement(self.sig, {key: self.sig.one_scalar()})
            for key2, c2 in unit.d().terms.items():
                piece = complex(c2) * M
                out[key2] = out[key2] + piece if key2 in out else piece
        return OperatorForm(self.sig, self.p, self.q, out, tol=0.0)

    def conjugate(self) -> "OperatorForm":
        return OperatorForm(
            self.sig, self.p, self.q, {k: M.conj() for k, M in self.terms.items()}
        )

    def odd_coefficient(self, name: str) -> "OperatorForm":
        out = {}
        for key, M in self.terms.items():
            unit = RingElement(self.sig, {key: self.sig.one_scalar()})
            for key2, c2 in unit.odd_coefficient(name).terms.items():
                piece = complex(c2) * M
                out[key2] = out[key2] + piece if key2 in out else piece
        return OperatorForm(self.sig, self.p, self.q, out, tol=0.0)

    def strip_odd(self, name: str) -> "OperatorForm":
        if name not in self.sig.odd:
            raise KeyError(f"unknown odd parameter {name!r}")
        bit = self.sig.odd.index(name)
        out = {k: M for k, M in self.terms.items() if not (k[2] >> bit) & 1}
        return OperatorForm(self.sig, self.p, self.q, out)

    def promote(self, sig: RingSignature) -> "OperatorForm":
        out = {}
        for key, M in self.terms.items():
            unit = RingElement(self.sig, {key: self.sig.one_scalar()})
            for key2, c2 in unit.promote(sig).terms.items():
                out[key2] = complex(c2) * M
        return OperatorForm(sig, self.p, self.q, out)

    def drop_odd(self, name: str) -> "OperatorForm":
        """Forget an odd parameter none of the terms use."""
        sig = self.sig
        if name not in sig.odd:
            raise KeyError(f"unknown odd parameter {name!r}")
        bit = sig.odd.index(name)
        small = RingSignature(
            m=sig.m,
            D=sig.D,
            odd=tuple(n for n in sig.odd if n != name),
            field=sig.field,
            exact=sig.exact,
        )
        out = {}
        for (exps, fmask, omask), M in self.terms.items():
            if (omask >> bit) & 1:
                raise ValueError(f"term still depends on {name!r}")
            low = omask & ((1 << bit) - 1)
            out[(exps, fmask, low | ((omask >> (bit + 1)) << bit))] = M
        return OperatorForm(small, self.p, self.q, out)

    # -- metrics -----------------------------------------------------------------

    def norm(self) -> float:
        return max((np.abs(M).max(initial=0.0) for M in self.terms.values()), default=0.0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.norm() <= tol

    def entry(self, i: int, j: int | None = None) -> RingElement:
        terms = {}
        for key, M in self.terms.items():
            c = M[i] if M.ndim == 1 else M[i, j]
            if c:
                terms[key] = self.sig.coerce_scalar(c)
        return RingElement(self.sig, terms)

    def supertrace(self) -> RingElement:
        """Plain graded trace, key by key."""
        eps = np.array([1.0] * self.p + [-1.0] * self.q)
        terms = {}
        for key, M in self.terms.items():
            c = complex((eps * np.diag(M)).sum())
            if c:
                terms[key] = self.sig.coerce_scalar(c)
        return RingElement(self.sig, terms)

    # -- layout ------------------------------------------------------------------

    def to_ring_matrix(self) -> list:
        """Dense row-major matrix (or vector) of RingElements; pure layout."""
        if self.is_section:
            return [self.entry(i) for i in range(self.rank)]
        return [[self.entry(i, j) for j in range(self.rank)] for i in range(self.rank)]

    @staticmethod
    def from_ring_matrix(entries, p: int, q: int) -> "OperatorForm":
        if len(entries) != p + q or any(len(row) != p + q for row in entries):
            raise ValueError("entry matrix shape does not match graded rank")
        sig = entries[0][0].sig
        out = {}
        for i, row in enumerate(entries):
            for j, e in enumerate(row):
                if e.sig != sig:
                    raise ValueError("ring signature mismatch")
                for key, c in e.terms.items():
                    M = out.get(key)
                    if M is None:
                        M = out[key] = np.zeros((p + q, p + q), dtype=complex)
                    M[i, j] = complex(c)
        return OperatorForm(sig, p, q, out)

    def __repr__(self) -> str:
        kind = "section" if self.is_section else "operator"
        return f"OperatorForm({kind}, rank {self.p}|{self.q}, {len(self.terms)} keys)"


class OperatorWithD:
    """pure + tail o d, the closure of operator forms under the differential."""

    __slots__ = ("pure", "tail")

    def __init__(self, pure: OperatorForm, tail: OperatorForm):
        if (pure.sig, pure.p, pure.q) != (tail.sig, tail.p, tail.q):
            raise ValueError("mismatched parts")
        self.pure = pure
        self.tail = tail

    @staticmethod
    def lift(form: OperatorForm) -> "OperatorWithD":
        return OperatorWithD(form, OperatorForm.zero(form.sig, form.p, form.q))

    def __add__(self, other: "OperatorWithD") -> "OperatorWithD":
        return OperatorWithD(self.pure + other.pure, self.tail + other.tail)

    def __sub__(self, other: "OperatorWithD") -> "OperatorWithD":
        return OperatorWithD(self.pure - other.pure, self.tail - other.tail)

    def __mul__(self, c) -> "OperatorWithD":
        return OperatorWithD(self.pure * c, self.tail * c)

    __rmul__ = __mul__

    def ring_mul_left(self, a: RingElement) -> "OperatorWithD":
        return OperatorWithD(self.pure.ring_mul_left(a), self.tail.ring_mul_left(a))

    def compose(self, other: "OperatorWithD") -> "OperatorWithD":
        # d o V = dV + (V_even - V_odd) o d, and d o d = 0
        v2_flip = other.pure.total_parity_part(0) - other.pure.total_parity_part(1)
        pure = self.pure @ other.pure + self.tail @ other.pure.d()
        tail = self.pure @ other.tail + self.tail @ v2_flip + self.tail @ other.tail.d()
        return OperatorWithD(pure, tail)

    def apply_to(self, section: OperatorForm) -> OperatorForm:
        return self.pure @ section + self.tail @ section.d()

    def promote(self, sig: RingSignature) -> "OperatorWithD":
        return OperatorWithD(self.pure.promote(sig), self.tail.promote(sig))

    def norm(self) -> float:
        return max(self.pure.norm(), self.tail.norm())

    def __repr__(self) -> str:
        return f"OperatorWithD(pure {self.pure!r}, tail {self.tail!r})"


# -- bundles and superconnections ---------------------------------------------


@dataclass
class SuperBundle:
    """Graded Clifford module together with the coefficient ring it lives over."""

    module: GradedCliffordModule
    sig: RingSignature

    @property
    def p(self) -> int:
        return self.module.p

    @property
    def q(self) -> int:
        return self.module.q

    @property
    def rank(self) -> int:
        return self.module.rank

    @property
    def metric(self) -> np.ndarray:
        return self.module.metric

    def check(self, tol: float = TOL) -> dict:
        return self.module.check(tol)

    def to_json_dict(self) -> dict:
        return {"module": self.module.to_json_dict(), "signature": self.sig.to_json_dict()}

    @staticmethod
    def from_json_dict(data: dict) -> "SuperBundle":
        return SuperBundle(
            module=GradedCliffordModule.from_json_dict(data["module"]),
            sig=RingSignature.from_json_dict(data["signature"]),
        )


class Superconnection:
    """d plus a family of operator-valued forms, one per form degree.

    components[k] holds the degree-k piece; the degree-1 entry is the
    connection form omega, the differential itself is implicit.  Matrix
    parity of the degree-k piece is k+1 mod 2 so the total operator is odd.
    """

    def __init__(self, bundle: SuperBundle, components: dict[int, OperatorForm]):
        self.bundle = bundle
        comps = {}
        for k, form in components.items():
            if form.sig != bundle.sig:
                raise ValueError("ring signature mismatch")
            if (form.p, form.q) != (bundle.p, bundle.q):
                raise ValueError("graded rank mismatch")
            if not form.is_zero():
                comps[int(k)] = form
        self.components = comps

    # -- constructors ----------------------------------------------------------

    @staticmethod
    def from_matrices(bundle: SuperBundle, a0=None, omega=None, higher=None) -> "Superconnection":
        """a0: constant matrix; omega: list of matrices, one per dx_i; higher: {k: {key: matrix}}."""
        sig = bundle.sig
        comps: dict[int, OperatorForm] = {}
        if a0 is not None:
            comps[0] = OperatorForm.from_matrix(sig, bundle.p, bundle.q, a0)
        if omega is not None:
            if len(omega) != sig.m:
                raise ValueError("omega needs one matrix per base coordinate")
            terms = {}
            zero = sig._zero_exps()
            for i, M in enumerate(omega):
                M = np.asarray(M, dtype=complex)
                if np.abs(M).max(initial=0.0):
                    terms[(zero, 1 << i, 0)] = M
            comps[1] = OperatorForm(sig, bundle.p, bundle.q, terms)
        for k, terms in (higher or {}).items():
            comps[int(k)] = OperatorForm(sig, bundle.p, bundle.q, terms)
        return Superconnection(bundle, comps)

    def component(self, k: int) -> OperatorForm:
        got = self.components.get(k)
        if got is None:
            return OperatorForm.zero(self.bundle.sig, self.bundle.p, self.bundle.q)
        return got

    def content(self) -> OperatorForm:
        """The sum of all stored components (everything except d)."""
        total = OperatorForm.zero(self.bundle.sig, self.bundle.p, self.bundle.q)
        for form in self.components.values():
            total = total + form
        return total

    def as_pair(self) -> OperatorWithD:
        ident = OperatorForm.identity(self.bundle.sig, self.bundle.p, self.bundle.q)
        return OperatorWithD(self.content(), ident)

    # -- validation --------------------------------------------------------------

    def check(self, tol: float = TOL) -> dict:
        failures = []
        bundle = self.bundle
        for k, form in self.components.items():
            for key, M in form.terms.items():
                if key[1].bit_count() != k:
                    failures.append(f"component {k} carries a form key of wrong degree")
                    break
                if key[2]:
                    failures.append(f"component {k} depends on an odd parameter")
                    break
            bad = form.matrix_parity_part(k % 2).norm()
            if bad > tol:
                failures.append(f"component {k} matrix parity is not {(k + 1) % 2} (residual {bad:.2e})")
            for j, G in enumerate(bundle.module.generators, start=1):
                worst = 0.0
                for M in form.terms.values():
                    r = np.abs(supercommutator(M, G, bundle.p, bundle.q)).max(initial=0.0)
                    worst = max(worst, r)
                if worst > tol:
                    failures.append(
                        f"component {k} fails Clifford linearity against generator {j} (residual {worst:.2e})"
                    )
        return {"ok": not failures, "failures": failures}

    # -- curvature ---------------------------------------------------------------

    def square(self) -> OperatorForm:
        """The curvature F = dC + C^2 where C is the matrix content."""
        C = self.content()
        even = C.total_parity_part(0).norm()
        if even > TOL:
            raise ValueError("superconnection content must be odd to square (even residual %.2e)" % even)
        return C.d() + C @ C

    # -- serialization -------------------------------------------------------------

    def to_json_dict(self) -> dict:
        def encode(form: OperatorForm) -> list:
            return [[e.to_json_dict() for e in row] for row in form.to_ring_matrix()]

        others = {str(k): encode(f) for k, f in self.components.items() if k != 1}
        return {
            "bundle": self.bundle.to_json_dict(),
            "omega": encode(self.component(1)),
            "components": others,
        }

    @staticmethod
    def from_json_dict(data: dict) -> "Superconnection":
        bundle = SuperBundle.from_json_dict(data["bundle"])

        def decode(rows) -> OperatorForm:
            entries = [[RingElement.from_json_dict(e) for e in row] for row in rows]
            return OperatorForm.from_ring_matrix(entries, bundle.p, bundle.q)

        comps = {int(k): decode(rows) for k, rows in data.get("components", {}).items()}
        omega = data.get("omega")
        if omega:
            comps[1] = decode(omega)
        return Superconnection(bundle, comps)

    def __repr__(self) -> str:
        ks = sorted(self.components)
        return f"Superconnection(degrees {ks}, rank {self.bundle.p}|{self.bundle.q})"


@dataclass
class SemigroupRep:
    """Value of the super evolution at a single super time (t, theta)."""

    bundle: SuperBundle
    t: float
    theta: str
    value: OperatorWithD

    def check_unit(self, tol: float = TOL) -> bool:
        if self.t != 0:
            return True
        ident = OperatorForm.identity(self.value.pure.sig, self.bundle.p, self.bundle.q)
        return (self.value.pure.strip_odd(self.theta) - ident).norm() <= tol


@dataclass
class HermitianPairing:
    """Positive graded-hermitian pairing data with an orientation flag."""

    metric: np.ndarray
    p: int
    q: int
    orientation: bool = True

    def __post_init__(self):
        self.metric = np.asarray(self.metric, dtype=complex)

    def check(self, tol: float = TOL) -> dict:
        failures = []
        H = self.metric
        n = self.p + self.q
        if H.shape != (n, n):
            failures.append("metric shape mismatch")
        else:
            if np.abs(H - H.conj().T).max() > tol:
                failures.append("metric is not hermitian")
            if np.abs(H[: self.p, self.p :]).max(initial=0.0) > tol:
                failures.append("metric mixes parities")
            if min(np.linalg.eigvalsh((H + H.conj().T) / 2)) <= tol:
                failures.append("metric is not positive")
        return {"ok": not failures, "failures": failures}

    def graded_value(self, x: np.ndarray, y: np.ndarray) -> complex:
        """i^{-1}-twisted pairing of plain vectors; zero across parities."""
        H = self.metric
        xe, xo = x.copy(), x.copy()
        xe[self.p :] = 0
        xo[: self.p] = 0
        ye, yo = y.copy(), y.copy()
        ye[self.p :] = 0
        yo[: self.p] = 0
        return complex(xe.conj() @ H @ ye + (1 / 1j) * (xo.conj() @ H @ yo))

    def of_sections(self, v: OperatorForm, w: OperatorForm) -> RingElement:
        """Pairing of form-valued sections, super signs included."""
        sig = v.sig
        out = sig.zero()
        for k1, xv in v.terms.items():
            a_bar = RingElement(sig, {k1: sig.one_scalar()}).conjugate()
            for k2, yv in w.terms.items():
                b = RingElement(sig, {k2: sig.one_scalar()})
                p2 = sig.key_parity(k2)
                for parity in (0, 1):
                    xpart = xv.copy()
                    if parity == 0:
                        xpart[self.p :] = 0
                    else:
                        xpart[: self.p] = 0
                    val = self.graded_value(xpart, yv)
                    if not val:
                        continue
                    sign = -1.0 if (parity and p2) else 1.0
                    out = out + (a_bar * b) * (sign * val)
        return out


# -- super Euclidean composition -----------------------------------------------


def compose_superEuc(first, second):
    """((t, theta), (s, eta)) -> (t + s + theta*eta, theta + eta)."""
    t, theta = first
    s, eta = second
    if not isinstance(theta, RingElement) or not isinstance(eta, RingElement):
        raise ValueError("odd slots must be ring elements")
    if theta.sig != eta.sig:
        raise ValueError("odd slots live in different rings")
    sig = theta.sig
    t = t if isinstance(t, RingElement) else sig.scalar(t)
    s = s if isinstance(s, RingElement) else sig.scalar(s)
    return t + s + theta * eta, theta + eta


# -- structural checks -----------------------------------------------------------


def square(A: Superconnection) -> OperatorForm:
    return A.square()


def check_leibniz(A: Superconnection, alpha: RingElement, v: OperatorForm) -> float:
    """sup norm of A(alpha v) - d(alpha) v - (-1)^{|alpha|} alpha A(v)."""
    parity = alpha.parity()
    if parity is None:
        raise ValueError("alpha must be parity homogeneous")
    pair = A.as_pair()
    lhs = pair.apply_to(v.ring_mul_left(alpha))
    rhs = v.ring_mul_left(alpha.d()) + pair.apply_to(v).ring_mul_left(alpha) * (
        -1.0 if parity else 1.0
    )
    return (lhs - rhs).norm()


_ADJOINT_SIGNS = (1.0, -1.0, -1.0, 1.0)  # (-1)^{k(k+1)/2} for k mod 4


def check_self_adjoint(A: Superconnection, metric: np.ndarray | None = None) -> dict:
    """Per-component adjoint conditions for a self-adjoint superconnection.

    Written with ordinary adjoints: the degree-k coefficient matrices must
    satisfy M-dagger = (-1)^{k(k+1)/2} M.  Degree 0 is hermitian (the i in the
    odd super adjoint cancels the i in the graded pairing), degree 1 is the
    unitarity of the connection, degree 2 is skew.
    """
    bundle = A.bundle
    H = bundle.metric if metric is None else np.asarray(metric, dtype=complex)
    residuals: dict[str, float] = {}
    for k, form in sorted(A.components.items()):
        eps_k = _ADJOINT_SIGNS[k % 4]
        worst = 0.0
        for M in form.terms.values():
            r = np.abs(ordinary_adjoint(M, H) - eps_k * M).max(initial=0.0)
            worst = max(worst, r)
        residuals[f"component_{k}"] = worst
    # the connection condition doubles as metric compatibility: d<x,y> matches
    # <omega x, y> + <x, omega y> exactly when omega is H-skew
    residuals.setdefault("component_1", 0.0)
    worst = max(residuals.values(), default=0.0)
    return {"ok": worst <= 1e-9, "max_residual": worst, "residuals": residuals}


@dataclass
class FormalRescale:
    """Result of a Getzler rescale with the scale left symbolic."""

    convention: str
    pieces: dict[int, tuple[Fraction, OperatorForm]] = field(default_factory=dict)


def getzler_rescale(A: Superconnection, u, convention: str = "rg"):
    """Scale degree k by u^{(k-1)/2} (sqrt convention) or mu^{1-k} (rg)."""
    if convention not in ("rg", "sqrt"):
        raise ValueError("convention must be 'rg' or 'sqrt'")
    if isinstance(u, str):
        if u != "formal":
            raise ValueError("u must be a positive number or 'formal'")
        pieces = {}
        for k, form in A.components.items():
            exp = Fraction(1 - k) if convention == "rg" else Fraction(k - 1, 2)
            pieces[k] = (exp, form)
        return FormalRescale(convention, pieces)
    u = float(u)
    if u <= 0:
        raise ValueError("scale must be positive")
    comps = {}
    for k, form in A.components.items():
        factor = u ** (1 - k) if convention == "rg" else u ** ((k - 1) / 2.0)
        comps[k] = form * factor
    return Superconnection(A.bundle, comps)


# -- heat kernel -------------------------------------------------------------------

_GAP_TOL = 1e-6
_PATH_BUDGET = 6_000_000


def _exp_divided_difference(nodes) -> float:
    """Divided difference of exp over the given nodes, by the bidiagonal table."""
    nodes = sorted(nodes)
    k = len(nodes) - 1
    if k == 0:
        return math.exp(nodes[0])
    J = np.zeros((k + 1, k + 1))
    for i, lam in enumerate(nodes):
        J[i, i] = lam
    for i in range(k):
        J[i, i + 1] = 1.0
    # scaling and squaring on a tiny triangular matrix
    shift = max(abs(x) for x in nodes)
    s = max(0, int(math.ceil(math.log2(max(shift, 1.0)))) + 2)
    B = J / (2**s)
    E = np.eye(k + 1)
    term = np.eye(k + 1)
    for j in range(1, 24):
        term = term @ B / j
        E = E + term
    for _ in range(s):
        E = E @ E
    return float(E[0, k].real) if abs(E[0, k].imag) < 1e-14 else complex(E[0, k])


def _dd_tensors(lam: np.ndarray, depth: int) -> list[np.ndarray]:
    """Divided differences of exp over all index paths, one tensor per order."""
    dim = lam.size
    if dim ** (depth + 1) > _PATH_BUDGET:
        raise ValueError("nilpotent order times rank exceeds the heat evaluation budget")
    tensors = [np.exp(lam)]
    for k in range(1, depth + 1):
        prev = tensors[-1]
        upper = prev[None, ...]
        lower = prev[..., None]
        denom = lam.reshape((dim,) + (1,) * k) - lam.reshape((1,) * k + (dim,))
        denom = -denom  # lam[last] - lam[first]
        # full-shape mask: the quotient only sees the first and last index
        safe = np.broadcast_to(np.abs(denom) > _GAP_TOL, (dim,) * (k + 1))
        dd = np.zeros((dim,) * (k + 1))
        np.divide(upper - lower, np.broadcast_to(denom, dd.shape), out=dd, where=safe)
        if not safe.all():
            bad = np.argwhere(~safe)
            cache: dict[tuple, float] = {}
            for idx in bad:
                nodes = tuple(round(float(lam[i]), 12) for i in idx)
                key = tuple(sorted(nodes))
                val = cache.get(key)
                if val is None:
                    val = cache[key] = _exp_divided_difference(key)
                dd[tuple(idx)] = val
        tensors.append(dd)
    return tensors


def _contract_path(slots: list[np.ndarray], dd: np.ndarray) -> np.ndarray:
    letters = "abcdefghijkl"
    k = len(slots)
    parts = [f"{letters[i]}{letters[i + 1]}" for i in range(k)]
    spec = ",".join(parts) + "," + letters[: k + 1] + "->" + letters[0] + letters[k]
    return np.einsum(spec, *slots, dd, optimize=True)


def heat(A: Superconnection, t: float) -> OperatorForm:
    """e^{-t A^2} by the finite Duhamel expansion around the constant body.

    The body is diagonalized; each simplex integral of the interleaved flow
    is a divided difference of exp over the eigenvalue path.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    bundle = A.bundle
    sig = bundle.sig
    dim = bundle.rank
    F = A.square()
    if t == 0:
        return OperatorForm.identity(sig, bundle.p, bundle.q)
    M = F * (-t)
    X, N = M.body_nil_split()
    herm = np.abs(X - X.conj().T).max(initial=0.0)
    scale = max(1.0, np.abs(X).max(initial=0.0))
    if herm > 1e-8 * scale:
        raise ValueError("constant body of -t A^2 is not self-adjoint (residual %.2e)" % herm)
    X = (X + X.conj().T) / 2.0
    lam, U = np.linalg.eigh(X)
    Uh = U.conj().T

    # nilpotency order: every non-constant key raises the augmentation degree
    def aug(key: Key) -> int:
        return sum(key[0]) + key[1].bit_count() + key[2].bit_count()

    budget = sig.D + len(sig.odd)
    nil_keys = [(key, aug(key)) for key in N.terms]
    depth = 0
    if nil_keys:
        g_min = min(g for _, g in nil_keys)
        depth = budget // g_min
    dd = _dd_tensors(lam, depth) if depth else [np.exp(lam)]

    eps = np.array([1.0] * bundle.p + [-1.0] * bundle.q)
    tilde = {}
    for key, mat in N.terms.items():
        plain = Uh @ mat @ U
        dressed = Uh @ (eps[:, None] * mat * eps[None, :]) @ U
        tilde[key] = (plain, dressed)

    # accumulate in the eigenbasis, rotate back once at the end
    out = {sig.empty_key(): np.diag(np.exp(lam)).astype(complex)}

    # chains of nilpotent keys; the matrix in each slot is dressed by the
    # parity of everything to its right
    def extend(prefix_keys, merged_key, sign, g_used):
        for key, g in nil_keys:
            if g_used + g > budget:
                continue
            merged = _merge_keys(sig, merged_key, key)
            if merged is None:
                continue
            s2, new_key = merged
            chain = prefix_keys + [key]
            k = len(chain)
            right_parity = 0
            slots = []
            for ck in reversed(chain):
                slots.append(tilde[ck][right_parity])
                right_parity ^= sig.key_parity(ck)
            slots.reverse()
            contribution = (sign * s2) * _contract_path(slots, dd[k])
            got = out.get(new_key)
            out[new_key] = contribution if got is None else got + contribution
            extend(chain, new_key, sign * s2, g_used + g)

    if depth:
        extend([], sig.empty_key(), 1, 0)

    result = {key: U @ mat @ Uh for key, mat in out.items()}
    return OperatorForm(sig, bundle.p, bundle.q, result, tol=0.0)


def spar(A: Superconnection, t: float, theta: str = "theta") -> SemigroupRep:
    """e^{-t A^2} + theta A e^{-t A^2} over the theta-extended ring."""
    base = A.bundle.sig
    sig = base if theta in base.odd else base.with_odds(theta)
    h = heat(A, t).promote(sig) if sig is not base else heat(A, t)
    pair = A.as_pair()
    if sig is not base:
        pair = pair.promote(sig)
    th = sig.odd_param(theta)
    applied = pair.compose(OperatorWithD.lift(h))
    value = OperatorWithD.lift(h) + applied.ring_mul_left(th)
    bundle = SuperBundle(A.bundle.module, sig)
    return SemigroupRep(bundle=bundle, t=t, theta=theta, value=value)


def _spar_at_composed(A: Superconnection, t0: float, nil_even: RingElement, odd_total: RingElement, sig: RingSignature) -> OperatorWithD:
    """spar at super time (t0 + nil, Theta), first order Taylor in the nil direction.

    Exact because nil squares to zero; the Theta * nil cross terms also die.
    """
    h = heat(A, t0).promote(sig)
    F = A.square().promote(sig)
    pair = A.as_pair().promote(sig)
    hprime = (F @ h) * -1.0
    total = OperatorWithD.lift(h) + OperatorWithD.lift(hprime).ring_mul_left(nil_even)
    return total + pair.compose(total).ring_mul_left(odd_total)


def check_semigroup(A: Superconnection, t: float, s: float) -> float:
    """Residual of spar(s)|_eta spar(t)|_theta against spar at the composed super time."""
    if t < 0 or s < 0:
        raise ValueError("times must be nonnegative")
    base = A.bundle.sig
    names = []
    stem = "semigroup_odd"
    i = 0
    while len(names) < 2:
        cand = f"{stem}{i}"
        if cand not in base.odd:
            names.append(cand)
        i += 1
    eta_name, theta_name = names
    sig = base.with_odds(eta_name, theta_name)

    rep_s = spar(A, s, eta_name)
    rep_t = spar(A, t, theta_name)
    left = rep_s.value.promote(sig).compose(rep_t.value.promote(sig))

    eta = sig.odd_param(eta_name)
    theta = sig.odd_param(theta_name)
    t_comp, theta_comp = compose_superEuc((s, eta), (t, theta))
    nil = t_comp - sig.scalar(s + t)
    right = _spar_at_composed(A, s + t, nil, theta_comp, sig)
    return (left - right).norm()


def extract_superconnection(rep: SemigroupRep) -> Superconnection:
    """Read the superconnection from the theta expansion at t = 0.

    The stored convention keeps the +theta coefficient; against an expansion
    written as A(t) - theta B(t) this means B(t) is minus the theta part, and
    the round trip extract(spar(A)) = A pins the sign.
    """
    if rep.t != 0:
        raise ValueError("extraction needs the representation at t = 0")
    if not rep.check_unit():
        raise ValueError("value at (0, 0) is not the identity")
    theta = rep.theta
    value = rep.value
    c_part = value.pure.odd_coefficient(theta)
    d_coeff = value.tail.odd_coefficient(theta)
    bundle = rep.bundle
    sig = bundle.sig
    ident = OperatorForm.identity(sig, bundle.p, bundle.q)
    if c_part.is_zero(TOL) and d_coeff.is_zero(TOL):
        warnings.warn("representation value is constant in theta; returning the bare d")
        zero = OperatorForm.zero(sig, bundle.p, bundle.q).drop_odd(theta)
        return Superconnection(SuperBundle(bundle.module, zero.sig), {})
    if (d_coeff - ident).norm() > TOL:
        raise ValueError("theta part does not carry the differential with unit coefficient")
    c_part = c_part.drop_odd(theta)
    small = c_part.sig
    base_bundle = SuperBundle(bundle.module, small)
    comps: dict[int, OperatorForm] = {}
    for key, M in c_part.terms.items():
        k = key[1].bit_count()
        form = comps.get(k)
        if form is None:
            form = comps[k] = OperatorForm.zero(small, bundle.p, bundle.q)
        form.terms[key] = M
    return Superconnection(base_bundle, comps)


# -- superpath pullbacks ------------------------------------------------------------


def source_target_pullback(alpha: RingElement, mode: str, theta: str = "theta") -> RingElement:
    """Pullback along the source or target of a superpath: target picks up -theta d."""
    if mode not in ("source", "target"):
        raise ValueError("mode must be 'source' or 'target'")
    if theta not in alpha.sig.odd:
        raise ValueError(f"odd parameter {theta!r} missing from the signature")
    if mode == "source":
        return alpha
    return alpha - alpha.sig.odd_param(theta) * alpha.d()


def _substitute_theta(elem: RingElement, factor: complex, theta: str) -> RingElement:
    """theta -> factor * theta, term by term."""
    sig = elem.sig
    bit = sig.odd.index(theta)
    out = {}
    for key, c in elem.terms.items():
        if (key[2] >> bit) & 1:
            c = c * sig.coerce_scalar(factor)
        if c:
            out[key] = c
    return RingElement(sig, out)


def _weight_by_form_degree(elem: RingElement, base: complex) -> RingElement:
    out = {}
    sig = elem.sig
    for key, c in elem.terms.items():
        w = base ** key[1].bit_count()
        out[key] = c * sig.coerce_scalar(w)
    return RingElement(sig, out)


def involution_pullbacks(f, which: str, mu: float | None = None, theta: str = "theta"):
    """Pull back a function of super time along Or, Fl, or RG_mu.

    f is a callable t -> RingElement over a theta signature.  Or substitutes
    (-t, -i theta) with an i^degree weight, Fl substitutes (t, -theta) with a
    (-1)^degree weight, RG_mu substitutes (mu^2 t, mu theta) with mu^degree.
    """
    if which == "Fl":

        def fl(t):
            val = f(t)
            return _weight_by_form_degree(_substitute_theta(val, -1.0, theta), -1.0)

        return fl
    if which == "Or":

        def orient(t):
            val = f(-t)
            return _weight_by_form_degree(_substitute_theta(val, -1j, theta), 1j)

        return orient
    if which == "RG":
        if mu is None or mu <= 0:
            raise ValueError("RG needs a positive scale mu")

        def rg(t):
            val = f(mu * mu * t)
            return _weight_by_form_degree(_substitute_theta(val, mu, theta), mu)

        return rg
    raise ValueError("which must be 'Or', 'Fl', or 'RG'")


# -- pairings and reality -------------------------------------------------------------


_CONJUGATE_SIDE = (1j, 1.0, -1j, -1.0)  # -(-i)^{k+1} for k mod 4


def _conjugate_side_pair(A: Superconnection) -> OperatorWithD:
    """A_minus induced from A by the reflection identification, on V coordinates."""
    bundle = A.bundle
    total = OperatorForm.zero(bundle.sig, bundle.p, bundle.q)
    for k, form in A.components.items():
        total = total + form * _CONJUGATE_SIDE[k % 4]
    ident = OperatorForm.identity(bundle.sig, bundle.p, bundle.q)
    return OperatorWithD(total, ident)


def pairing_adjunction_check(L: HermitianPairing, A_plus: Superconnection, A_minus: OperatorWithD | None = None) -> float:
    """Residual of L(A_- v, w) + (-1)^{|v|} L(v, A_+ w) = d L(v, w) on a spanning set."""
    bundle = A_plus.bundle
    sig = bundle.sig
    minus = _conjugate_side_pair(A_plus) if A_minus is None else A_minus
    plus = A_plus.as_pair()

    sections = []
    for j in range(bundle.rank):
        e = OperatorForm.basis_section(sig, bundle.p, bundle.q, j)
        sections.append((j >= bundle.p, e))
        if sig.m >= 1:
            sections.append((j >= bundle.p, e.ring_mul_left(sig.x(1))))
            sections.append(((j >= bundle.p) ^ 1, e.ring_mul_left(sig.dx(1))))

    worst = 0.0
    for pv, v in sections:
        av = minus.apply_to(v)
        for _, w in sections:
            lhs = L.of_sections(av, w) + L.of_sections(v, plus.apply_to(w)) * (
                -1.0 if pv else 1.0
            )
            rhs = L.of_sections(v, w).d()
            worst = max(worst, (lhs - rhs).norm())
    return worst


def reality_check(A: Superconnection, real_structure: np.ndarray | None = None) -> float:
    """Largest residual among the reality conditions for the superconnection data.

    Checks that conjugation composed with the real structure fixes every
    component and every Clifford generator, that the metric is compatible, and
    that the ordinary pairing restricts to a real symmetric form on the real
    subspace.
    """
    bundle = A.bundle
    module = bundle.module
    R = module.real_structure if real_structure is None else np.asarray(real_structure, dtype=complex)
    if R is None:
        raise ValueError("no real structure supplied")
    n = bundle.rank
    H = bundle.metric
    worst = float(np.abs(R @ R.conj() - np.eye(n)).max())
    worst = max(worst, float(np.abs(R[: bundle.p, bundle.p :]).max(initial=0.0)))
    worst = max(worst, float(np.abs(R[bundle.p :, : bundle.p]).max(initial=0.0)))
    worst = max(worst, float(np.abs(np.conj(R.conj().T @ H @ R) - H).max()))
    Rinv = np.linalg.inv(R)
    for form in A.components.values():
        for M in form.terms.values():
            worst = max(worst, float(np.abs(R @ M.conj() @ Rinv - M).max()))
    for G in module.generators:
        worst = max(worst, float(np.abs(R @ G.conj() @ Rinv - G).max()))

    # fixed points of v -> R conj(v) span a real form; the ordinary pairing
    # must restrict to a real symmetric matrix there
    # v = R conj(v)  <=>  (x + iy) = R(x - iy) for v = x + iy
    mat = np.vstack(
        [
            np.hstack([R.real - np.eye(n), R.imag]),
            np.hstack([R.imag, -R.real - np.eye(n)]),
        ]
    )
    _, sva, vt = np.linalg.svd(mat)
    null = vt[np.sum(sva > 1e-9) :].T
    basis = null[:n] + 1j * null[n:]
    B = basis.conj().T @ H @ basis
    worst = max(worst, float(np.abs(B.imag).max(initial=0.0)))
    worst = max(worst, float(np.abs(B - B.T).max(initial=0.0)))
    return worst
