"""Clifford algebras of signed degree, graded modules, supertraces, index classes.

The degree-n algebra has generators f_1..f_n with f_j f_k + f_k f_j = -2 delta
when n >= 0, and e_1..e_|n| with e_j e_k + e_k e_j = +2 delta when n < 0.
Elements are stored as sparse maps from ordered generator subsets (bitmasks)
to scalars.

Graded modules carry odd action matrices, an ordinary positive hermitian
metric (block diagonal for the grading), and an optional real structure.  The
graded hermitian pairing and the super adjoint are derived from the ordinary
metric: T^* = T-dagger for even T and i T-dagger for odd T.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .superring import QQi, merge_sign

__all__ = [
    "CliffordAlgebra",
    "CliffordElement",
    "GradedCliffordModule",
    "ABSClass",
    "clifford_mul",
    "gamma",
    "star_super",
    "star_graded",
    "supertrace",
    "clifford_supertrace",
    "hattori_stallings",
    "hs_normalization",
    "left_right_convert",
    "morita_witness_check",
    "abs_class",
    "find_odd_extension",
    "direct_sum",
    "parity_flip",
    "right_multiplication",
    "grading_matrix",
    "parity_split",
    "ordinary_adjoint",
    "super_adjoint",
    "supercommutator",
]

TOL = 1e-10


@dataclass(frozen=True)
class CliffordAlgebra:
    """Clifford algebra of signed degree n over the real or complex field."""

    n: int
    field: str = "complex"
    exact: bool = False

    def __post_init__(self):
        if self.field not in ("real", "complex"):
            raise ValueError("field must be 'real' or 'complex'")

    @property
    def num_generators(self) -> int:
        return abs(self.n)

    @property
    def generator_square(self) -> int:
        # f-type generators square to -1, e-type to +1
        return -1 if self.n >= 0 else 1

    def zero_scalar(self):
        return QQi() if self.exact else 0j

    def coerce_scalar(self, c):
        return QQi.coerce(c) if self.exact else complex(c)

    def element(self, blades: dict) -> "CliffordElement":
        return CliffordElement(self, {b: self.coerce_scalar(c) for b, c in blades.items()})

    def scalar(self, c) -> "CliffordElement":
        return self.element({0: c})

    def one(self) -> "CliffordElement":
        return self.scalar(1)

    def zero(self) -> "CliffordElement":
        return CliffordElement(self, {})

    def generator(self, j: int) -> "CliffordElement":
        """j-th generator, 1-based."""
        if not 1 <= j <= self.num_generators:
            raise ValueError(f"generator index {j} out of range")
        return self.element({1 << (j - 1): 1})

    def top_blade_mask(self) -> int:
        return (1 << self.num_generators) - 1

    def basis_masks(self):
        return range(1 << self.num_generators)


class CliffordElement:
    """Sparse element keyed by ordered generator subsets."""

    __slots__ = ("algebra", "blades")

    def __init__(self, algebra: CliffordAlgebra, blades: dict | None = None):
        self.algebra = algebra
        self.blades = {b: c for b, c in (blades or {}).items() if c}

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.blades)
        for b, c in other.blades.items():
            acc = out.get(b)
            acc = c if acc is None else acc + c
            if acc:
                out[b] = acc
            else:
                out.pop(b, None)
        return CliffordElement(self.algebra, out)

    __radd__ = __add__

    def __neg__(self):
        return CliffordElement(self.algebra, {b: -c for b, c in self.blades.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, CliffordElement):
            c = self.algebra.coerce_scalar(other)
            return CliffordElement(self.algebra, {b: v * c for b, v in self.blades.items()})
        if other.algebra != self.algebra:
            raise ValueError("algebra mismatch in Clifford multiplication")
        square = self.algebra.generator_square
        out: dict = {}
        for ba, ca in self.blades.items():
            for bb, cb in other.blades.items():
                sign, blade = _blade_mul(ba, bb, square)
                c = ca * cb
                if sign < 0:
                    c = -c
                acc = out.get(blade)
                acc = c if acc is None else acc + c
                if acc:
                    out[blade] = acc
                else:
                    out.pop(blade, None)
        return CliffordElement(self.algebra, out)

    def __rmul__(self, other):
        # only scalars reach here
        return self.__mul__(other)

    def _coerce(self, other):
        if isinstance(other, CliffordElement):
            if other.algebra != self.algebra:
                raise ValueError("algebra mismatch")
            return other
        return self.algebra.scalar(other)

    def coefficient(self, blade: int):
        return self.blades.get(blade, self.algebra.zero_scalar())

    def parity(self) -> int | None:
        seen = {b.bit_count() & 1 for b in self.blades}
        return seen.pop() if len(seen) == 1 else None

    def parity_part(self, parity: int) -> "CliffordElement":
        return CliffordElement(
            self.algebra,
            {b: c for b, c in self.blades.items() if (b.bit_count() & 1) == parity},
        )

    def conjugate_scalars(self) -> "CliffordElement":
        return CliffordElement(self.algebra, {b: c.conjugate() for b, c in self.blades.items()})

    def norm(self) -> float:
        return max((abs(c) for c in self.blades.values()), default=0.0)

    def __eq__(self, other):
        other = self._coerce(other)
        return self.blades == other.blades

    def __hash__(self):
        return hash((self.algebra, frozenset(self.blades.items())))

    def __repr__(self):
        if not self.blades:
            return "0"
        sym = "f" if self.algebra.n >= 0 else "e"
        bits = []
        for b in sorted(self.blades, key=lambda b: (b.bit_count(), b)):
            name = "*".join(f"{sym}{i + 1}" for i in range(b.bit_length()) if (b >> i) & 1) or "1"
            bits.append(f"({self.blades[b]!r})*{name}")
        return " + ".join(bits)


def _blade_mul(a: int, b: int, square: int) -> tuple[int, int]:
    """Product of two ordered blades: returns (sign, result blade)."""
    sign = 1
    while b:
        low = b & -b
        # cross the generators of a sitting above this one
        if (a & ~((low << 1) - 1)).bit_count() & 1:
            sign = -sign
        if a & low:
            sign *= square
        a ^= low
        b ^= low
    return sign, a


def clifford_mul(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    return a * b


def gamma(algebra_or_n, exact_split: bool = False):
    """The normalized top element: 2^(-n/2) f_1..f_n for n >= 0, 2^(n/2) e_1..e_|n| for n < 0.

    With ``exact_split=True`` returns (unnormalized top blade, half exponent h)
    where the normalization is 2^(h/2); the power of two is kept exact until
    the caller applies it.
    """
    algebra = algebra_or_n
    if isinstance(algebra_or_n, int):
        algebra = CliffordAlgebra(algebra_or_n)
    blade = CliffordElement(algebra, {algebra.top_blade_mask(): algebra.coerce_scalar(1)})
    half = -abs(algebra.n)  # 2^(-n/2) when n >= 0, 2^(n/2) when n < 0
    if exact_split:
        return blade, half
    return blade * (2.0 ** (half / 2.0))


def star_super(a: CliffordElement) -> CliffordElement:
    """Antilinear super anti-homomorphism: f* = -i f, e* = i e, (ab)* = (-1)^{|a||b|} b* a*."""
    algebra = a.algebra
    if algebra.field == "real":
        raise ValueError("star_super requires the complex algebra")
    out = algebra.zero()
    for blade, c in a.blades.items():
        out = out + _star_blade(algebra, blade, super_sign=True) * c.conjugate()
    return out


def star_graded(a: CliffordElement) -> CliffordElement:
    """Antilinear ungraded anti-homomorphism: f-dagger = -f, e-dagger = e, (xy)-dagger = y-dagger x-dagger."""
    algebra = a.algebra
    if algebra.field == "real":
        raise ValueError("star_graded requires the complex algebra")
    out = algebra.zero()
    for blade, c in a.blades.items():
        out = out + _star_blade(algebra, blade, super_sign=False) * c.conjugate()
    return out


def _star_blade(algebra: CliffordAlgebra, blade: int, super_sign: bool) -> CliffordElement:
    # generator rule: f* = -i f (super) / -f (graded); e* = i e (super) / e (graded)
    if algebra.n >= 0:
        gen_factor = -1j if super_sign else -1.0
    else:
        gen_factor = 1j if super_sign else 1.0
    gens = [i for i in range(blade.bit_length()) if (blade >> i) & 1]
    # star of an ascending word is the reversed product of starred generators,
    # with the super anti-homomorphism contributing (-1)^{k(k-1)/2}
    result = algebra.one()
    for i in gens:
        result = algebra.element({1 << i: gen_factor}) * result
    k = len(gens)
    if super_sign and ((k * (k - 1) // 2) & 1):
        result = -result
    return result


def grading_matrix(p: int, q: int) -> np.ndarray:
    return np.diag([1.0] * p + [-1.0] * q).astype(complex)


def parity_split(T: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a matrix into its grading-even and grading-odd parts."""
    T = np.asarray(T, dtype=complex)
    even = T.copy()
    even[:p, p:] = 0
    even[p:, :p] = 0
    odd = T - even
    return even, odd


def ordinary_adjoint(T: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Adjoint with respect to the ordinary positive pairing (x, y) = x-dagger H y."""
    Hinv = np.linalg.inv(H)
    return Hinv @ T.conj().T @ H


def super_adjoint(T: np.ndarray, H: np.ndarray, p: int, q: int) -> np.ndarray:
    """Super adjoint: T-dagger on the even part, i T-dagger on the odd part."""
    even, odd = parity_split(T, p, q)
    return ordinary_adjoint(even, H) + 1j * ordinary_adjoint(odd, H)


def supercommutator(X: np.ndarray, Y: np.ndarray, p: int, q: int) -> np.ndarray:
    """[X, Y] = XY - (-1)^{|X||Y|} YX extended bilinearly over parity parts."""
    Xe, Xo = parity_split(X, p, q)
    Ye, Yo = parity_split(Y, p, q)
    out = np.zeros_like(np.asarray(X, dtype=complex))
    for A, pa in ((Xe, 0), (Xo, 1)):
        for B, pb in ((Ye, 0), (Yo, 1)):
            sign = -1.0 if (pa and pb) else 1.0
            out = out + A @ B - sign * B @ A
    return out


@dataclass
class GradedCliffordModule:
    """Finite-rank graded module over the degree-n Clifford algebra.

    The basis is ordered even-then-odd: the first p coordinates are even, the
    last q odd.  ``metric`` is the ordinary positive hermitian form (block
    diagonal); the graded pairing differs from it by a factor of i on the odd
    block.  ``real_structure`` is the matrix R of an antilinear involution
    v -> R conj(v), or None.
    """

    p: int
    q: int
    n: int
    generators: list = field(default_factory=list)
    metric: np.ndarray | None = None
    real_structure: np.ndarray | None = None
    field_flag: str = "complex"

    def __post_init__(self):
        r = self.p + self.q
        self.generators = [np.asarray(g, dtype=complex).reshape(r, r) for g in self.generators]
        if self.metric is None:
            self.metric = np.eye(r, dtype=complex)
        else:
            self.metric = np.asarray(self.metric, dtype=complex).reshape(r, r)
        if self.real_structure is not None:
            self.real_structure = np.asarray(self.real_structure, dtype=complex).reshape(r, r)
        if len(self.generators) != abs(self.n):
            raise ValueError(f"degree {self.n} needs {abs(self.n)} generator actions")

    @property
    def rank(self) -> int:
        return self.p + self.q

    def check(self, tol: float = TOL) -> dict:
        """Validate parity, Clifford relations, metric positivity, *-compatibility."""
        report = {"ok": True, "failures": []}

        def fail(msg):
            report["ok"] = False
            report["failures"].append(msg)

        square = -1.0 if self.n >= 0 else 1.0
        for i, g in enumerate(self.generators):
            even, _ = parity_split(g, self.p, self.q)
            if np.abs(even).max() > tol:
                fail(f"generator {i + 1} is not odd")
        for i, gi in enumerate(self.generators):
            for j, gj in enumerate(self.generators):
                want = 2.0 * square * np.eye(self.rank) if i == j else 0.0
                resid = np.abs(gi @ gj + gj @ gi - want).max()
                if resid > tol:
                    fail(f"Clifford relation ({i + 1},{j + 1}) residual {resid:.2e}")
        H = self.metric
        if np.abs(H - H.conj().T).max() > tol:
            fail("metric is not hermitian")
        Heven, Hodd = parity_split(H, self.p, self.q)
        if np.abs(H - Heven).max() > tol:
            fail("metric does not respect the grading")
        else:
            evals = np.linalg.eigvalsh(H)
            if evals.min() <= 0:
                fail("ordinary metric is not positive definite")
        # *-compatibility: rho(g)^* = rho(g^*); translates to f-actions
        # skew-hermitian and e-actions hermitian for the ordinary metric
        for i, g in enumerate(self.generators):
            gd = ordinary_adjoint(g, H)
            want = -g if self.n >= 0 else g
            resid = np.abs(gd - want).max()
            if resid > tol:
                fail(f"generator {i + 1} fails *-compatibility, residual {resid:.2e}")
        if self.real_structure is not None:
            R = self.real_structure
            invol = np.abs(R @ R.conj() - np.eye(self.rank)).max()
            if invol > tol:
                fail(f"real structure is not an antilinear involution, residual {invol:.2e}")
            for i, g in enumerate(self.generators):
                resid = np.abs(R @ g.conj() @ np.linalg.inv(R) - g).max()
                if resid > tol:
                    fail(f"generator {i + 1} is not real, residual {resid:.2e}")
        return report

    def act(self, a: CliffordElement) -> np.ndarray:
        """Matrix of the action of a Clifford element."""
        out = np.zeros((self.rank, self.rank), dtype=complex)
        for blade, c in a.blades.items():
            M = np.eye(self.rank, dtype=complex)
            for i in range(blade.bit_length()):
                if (blade >> i) & 1:
                    M = M @ self.generators[i]
            out = out + complex(c) * M
        return out

    def gamma_action(self) -> np.ndarray:
        """Action of the normalized top element, power of two applied once at the end."""
        M = np.eye(self.rank, dtype=complex)
        for g in self.generators:
            M = M @ g
        return M * (2.0 ** (-abs(self.n) / 2.0))

    def graded_pairing(self, x: np.ndarray, y: np.ndarray) -> complex:
        """The graded hermitian form; equals i^{-1} (x, y) on odd pairs."""
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        H = self.metric
        val = 0j
        xe, xo = x.copy(), x.copy()
        xe[self.p :] = 0
        xo[: self.p] = 0
        ye, yo = y.copy(), y.copy()
        ye[self.p :] = 0
        yo[: self.p] = 0
        val += xe.conj() @ H @ ye
        val += (1 / 1j) * (xo.conj() @ H @ yo)
        return complex(val)

    def to_json_dict(self) -> dict:
        def encode(M):
            return None if M is None else [[[float(z.real), float(z.imag)] for z in row] for row in M]

        return {
            "p": self.p,
            "q": self.q,
            "n": self.n,
            "generators": [encode(g) for g in self.generators],
            "metric": encode(self.metric),
            "real_structure": encode(self.real_structure),
        }

    @staticmethod
    def from_json_dict(data: dict) -> "GradedCliffordModule":
        def decode(M):
            if M is None:
                return None
            return np.array([[complex(z[0], z[1]) for z in row] for row in M])

        try:
            return GradedCliffordModule(
                p=int(data["p"]),
                q=int(data["q"]),
                n=int(data["n"]),
                generators=[decode(g) for g in data.get("generators", [])],
                metric=decode(data.get("metric")),
                real_structure=decode(data.get("real_structure")),
            )
        except KeyError as exc:
            raise ValueError(f"module object missing field {exc}") from exc


def direct_sum(a: GradedCliffordModule, b: GradedCliffordModule) -> GradedCliffordModule:
    """Direct sum of graded modules, reordered to the even-then-odd convention."""
    if a.n != b.n:
        raise ValueError("direct sum requires matching Clifford degree")
    ra, rb = a.rank, b.rank
    p, q = a.p + b.p, a.q + b.q

    def embed(block_a, block_b):
        M = np.zeros((ra + rb, ra + rb), dtype=complex)
        # new order: a-even, b-even, a-odd, b-odd
        ia = list(range(a.p)) + list(range(a.p + b.p, a.p + b.p + a.q))
        ib = list(range(a.p, a.p + b.p)) + list(range(a.p + b.p + a.q, ra + rb))
        M[np.ix_(ia, ia)] = block_a
        M[np.ix_(ib, ib)] = block_b
        return M

    gens = [embed(ga, gb) for ga, gb in zip(a.generators, b.generators)]
    metric = embed(a.metric, b.metric)
    real = None
    if a.real_structure is not None and b.real_structure is not None:
        real = embed(a.real_structure, b.real_structure)
    return GradedCliffordModule(p=p, q=q, n=a.n, generators=gens, metric=metric,
                                real_structure=real, field_flag=a.field_flag)


def parity_flip(module: GradedCliffordModule) -> GradedCliffordModule:
    """The same action with the grading reversed."""
    r = module.rank
    perm = list(range(module.p, r)) + list(range(module.p))
    P = np.zeros((r, r))
    for new, old in enumerate(perm):
        P[new, old] = 1.0

    def move(M):
        return None if M is None else P @ M @ P.T

    return GradedCliffordModule(
        p=module.q,
        q=module.p,
        n=module.n,
        generators=[move(g) for g in module.generators],
        metric=move(module.metric),
        real_structure=move(module.real_structure),
        field_flag=module.field_flag,
    )


def supertrace(T: np.ndarray, p: int, q: int) -> complex:
    """Trace against the grading: tr on the even block minus tr on the odd block."""
    T = np.asarray(T, dtype=complex)
    if T.shape != (p + q, p + q):
        raise ValueError(f"shape {T.shape} does not match graded dimension ({p}|{q})")
    return complex(np.trace(T[:p, :p]) - np.trace(T[p:, p:]))


def clifford_supertrace(module: GradedCliffordModule, T: np.ndarray, tol: float = 1e-8) -> complex:
    """sTr of the normalized top element composed with T.

    T is expected to supercommute with the Clifford action; a violation above
    tolerance is reported as a warning, not an error.
    """
    T = np.asarray(T, dtype=complex)
    worst = 0.0
    for g in module.generators:
        worst = max(worst, np.abs(supercommutator(T, g, module.p, module.q)).max())
    if worst > tol:
        warnings.warn(
            f"operator is not Clifford-linear: supercommutator norm {worst:.3e}",
            stacklevel=2,
        )
    return supertrace(module.gamma_action() @ T, module.p, module.q)


# -- Hattori-Stallings construction -----------------------------------------


def _module_algebra_basis(module: GradedCliffordModule) -> list[np.ndarray]:
    algebra = CliffordAlgebra(module.n)
    return [
        module.act(CliffordElement(algebra, {blade: 1.0 + 0j}))
        for blade in algebra.basis_masks()
    ]


def _cyclic_generators(module: GradedCliffordModule) -> list[tuple[np.ndarray, int]]:
    """Greedy homogeneous generating set of W over the algebra, with parities."""
    r = module.rank
    basis_actions = _module_algebra_basis(module)
    span: list[np.ndarray] = []
    gens: list[tuple[np.ndarray, int]] = []

    def in_span(v):
        if not span:
            return False
        M = np.column_stack(span)
        resid = v - M @ np.linalg.lstsq(M, v, rcond=None)[0]
        return np.linalg.norm(resid) < 1e-9 * max(1.0, np.linalg.norm(v))

    for i in range(r):
        v = np.zeros(r, dtype=complex)
        v[i] = 1.0
        if in_span(v):
            continue
        gens.append((v, 0 if i < module.p else 1))
        for act in basis_actions:
            w = act @ v
            if not in_span(w):
                span.append(w)
    return gens


def hattori_stallings(module: GradedCliffordModule, T: np.ndarray, tol: float = 1e-8) -> complex:
    """Trace of a Clifford-linear endomorphism through the algebra quotient.

    Expresses T on a free presentation A^k -> W, reads off the diagonal
    algebra coefficients, and applies the quotient functional (coefficient of
    the top generator word).  Independent of the supertrace route; the two
    agree up to the recorded normalization ``hs_normalization(n)``.
    """
    T = np.asarray(T, dtype=complex)
    worst = 0.0
    for g in module.generators:
        worst = max(worst, np.abs(supercommutator(T, g, module.p, module.q)).max())
    if worst > tol:
        raise ValueError(f"operator is not Clifford-linear: residual {worst:.3e}")

    algebra = CliffordAlgebra(module.n)
    r = module.rank
    dimA = 1 << algebra.num_generators
    gens = _cyclic_generators(module)
    k = len(gens)
    N = dimA * k

    # surjection pi: A^k -> W, pi(b tensor j) = rho(b) w_j; slot (j, b) has
    # parity |b| + |w_j|
    basis_actions = _module_algebra_basis(module)
    pi = np.zeros((r, N), dtype=complex)
    for j, (w, _) in enumerate(gens):
        for bi, act in enumerate(basis_actions):
            pi[:, j * dimA + bi] = act @ w

    def slot_parity(u: int) -> int:
        j, b = divmod(u, dimA)
        return (b.bit_count() + gens[j][1]) & 1

    # free-module action of a generator: left blade multiplication per slot
    def free_action(i: int) -> np.ndarray:
        M = np.zeros((N, N), dtype=complex)
        square = algebra.generator_square
        for b in range(dimA):
            sign, blade = _blade_mul(1 << i, b, square)
            for j in range(k):
                M[j * dimA + blade, j * dimA + b] = sign
        return M

    free_acts = [free_action(i) for i in range(algebra.num_generators)]

    # even A-linear section sigma: W -> A^k with pi sigma = id, found by
    # least squares (the presentation splits, so the system is consistent)
    rows: list[np.ndarray] = []
    rhs: list[complex] = []
    for a in range(r):
        for b in range(r):
            coef = np.zeros((N, r), dtype=complex)
            coef[:, b] = pi[a, :]
            rows.append(coef.reshape(-1))
            rhs.append(1.0 if a == b else 0.0)
    for Fm, g in zip(free_acts, module.generators):
        for a in range(N):
            for b in range(r):
                coef = np.zeros((N, r), dtype=complex)
                coef[a, :] += g[:, b]
                coef[:, b] -= Fm[a, :]
                rows.append(coef.reshape(-1))
                rhs.append(0.0)
    # evenness: sigma vanishes between opposite parities
    for u in range(N):
        pu = slot_parity(u)
        for b in range(r):
            pb = 0 if b < module.p else 1
            if pu != pb:
                coef = np.zeros((N, r), dtype=complex)
                coef[u, b] = 1.0
                rows.append(coef.reshape(-1))
                rhs.append(0.0)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs, dtype=complex), rcond=None)
    sigma = sol.reshape(N, r)
    if np.abs(pi @ sigma - np.eye(r)).max() > 1e-7:
        raise ValueError("failed to split the free presentation (degenerate module data)")

    master = sigma @ T @ pi  # A-linear endomorphism of A^k
    top = algebra.top_blade_mask()
    total = 0j
    # the diagonal entry c_jj is the image of the unit blade in slot j; the
    # quotient functional reads its top-word coefficient, with the supertrace
    # sign of the slot parity
    for j in range(k):
        col = master[:, j * dimA + 0]
        sign = -1.0 if gens[j][1] else 1.0
        total += sign * col[j * dimA + top]
    return complex(total)


_HS_NORM_CACHE: dict[int, complex] = {}


def _regular_module(n: int) -> GradedCliffordModule:
    """The algebra acting on itself by left multiplication, with blade basis."""
    algebra = CliffordAlgebra(n)
    dimA = 1 << algebra.num_generators
    even = [b for b in range(dimA) if b.bit_count() % 2 == 0]
    odd = [b for b in range(dimA) if b.bit_count() % 2 == 1]
    order = even + odd
    pos = {b: i for i, b in enumerate(order)}
    square = algebra.generator_square
    gens = []
    for i in range(algebra.num_generators):
        M = np.zeros((dimA, dimA), dtype=complex)
        for b in range(dimA):
            sign, blade = _blade_mul(1 << i, b, square)
            M[pos[blade], pos[b]] = sign
        gens.append(M)
    # the blade basis is orthonormal for the natural metric; *-compatibility
    # of left multiplication holds for it
    return GradedCliffordModule(p=len(even), q=len(odd), n=n, generators=gens)


def right_multiplication(n: int, blade: int) -> np.ndarray:
    """Super right multiplication by a blade on the regular module: w -> (-1)^{|w||b|} w b."""
    algebra = CliffordAlgebra(n)
    dimA = 1 << algebra.num_generators
    even = [b for b in range(dimA) if b.bit_count() % 2 == 0]
    odd = [b for b in range(dimA) if b.bit_count() % 2 == 1]
    order = even + odd
    pos = {b: i for i, b in enumerate(order)}
    square = algebra.generator_square
    M = np.zeros((dimA, dimA), dtype=complex)
    bp = blade.bit_count() & 1
    for w in range(dimA):
        sign, out = _blade_mul(w, blade, square)
        if bp and (w.bit_count() & 1):
            sign = -sign
        M[pos[out], pos[w]] += sign
    return M


def hs_normalization(n: int) -> complex:
    """Recorded constant kappa_n with clifford_supertrace = kappa_n * hattori_stallings.

    Computed once per degree on the regular module with the top-blade super
    right multiplication as reference operator, then cached.
    """
    if n in _HS_NORM_CACHE:
        return _HS_NORM_CACHE[n]
    module = _regular_module(n)
    algebra = CliffordAlgebra(n)
    T = right_multiplication(n, algebra.top_blade_mask())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cst = clifford_supertrace(module, T)
    hst = hattori_stallings(module, T)
    if abs(hst) < 1e-12:
        raise ValueError(f"degenerate reference operator for degree {n}")
    kappa = cst / hst
    _HS_NORM_CACHE[n] = kappa
    return kappa


# -- module translations -------------------------------------------------------


def left_right_convert(data: dict, direction: str) -> dict:
    """Translate between bimodule and single-sided module presentations.

    ``data`` holds {p, q, left: [matrices], right: [matrices]} for a left
    Cl_n / right Cl_m bimodule, or {p, q, left, n_left} for a left module over
    the joint algebra.  A right action matrix R_b becomes the left action
    w -> (-1)^{|w||b|} w b of the opposite-square generator, realized as
    R_b composed with the grading involution.
    """
    p, q = int(data["p"]), int(data["q"])
    eps = grading_matrix(p, q)
    if direction == "to_left":
        left = [np.asarray(M, dtype=complex) for M in data.get("left", [])]
        right = [np.asarray(M, dtype=complex) for M in data.get("right", [])]
        converted = [M @ eps for M in right]
        return {"p": p, "q": q, "left": left + converted, "n_left": len(left)}
    if direction == "to_bimodule":
        n_left = int(data["n_left"])
        mats = [np.asarray(M, dtype=complex) for M in data["left"]]
        left = mats[:n_left]
        right = [M @ eps for M in mats[n_left:]]
        return {"p": p, "q": q, "left": left, "right": right}
    raise ValueError(f"unknown direction {direction!r}")


def morita_witness_check(tol: float = TOL) -> dict:
    """Check the rank (1|1) joint module that witnesses Morita triviality.

    f acts by [[0,1],[-1,0]], e by [[0,1],[1,0]]; together they generate the
    full endomorphism algebra of the graded plane and are self-adjoint for
    the pairing derived from the standard hermitian metric.
    """
    F = np.array([[0, 1], [-1, 0]], dtype=complex)
    E = np.array([[0, 1], [1, 0]], dtype=complex)
    report = {"ok": True, "checks": {}}

    def record(name, resid):
        ok = resid <= tol
        report["checks"][name] = {"residual": float(resid), "ok": ok}
        if not ok:
            report["ok"] = False

    I2 = np.eye(2)
    record("f_squares_to_minus_one", np.abs(F @ F + I2).max())
    record("e_squares_to_plus_one", np.abs(E @ E - I2).max())
    record("f_e_anticommute", np.abs(F @ E + E @ F).max())
    span = np.stack([M.reshape(-1) for M in (I2.astype(complex), F, E, F @ E)])
    rank = np.linalg.matrix_rank(span, tol=1e-10)
    report["checks"]["generated_dimension"] = {"value": int(rank), "ok": rank == 4}
    if rank != 4:
        report["ok"] = False
    # self-adjointness: rho(a)^* = rho(a^*) for the super adjoint of the
    # standard metric; on generators this is F skew-hermitian, E hermitian
    H = np.eye(2, dtype=complex)
    record("f_star_compatible", np.abs(ordinary_adjoint(F, H) + F).max())
    record("e_star_compatible", np.abs(ordinary_adjoint(E, H) - E).max())
    return report


# -- index classes -----------------------------------------------------------


@dataclass(frozen=True)
class ABSClass:
    """Index class of a graded Clifford module in the degree-n group."""

    n_mod_8: int
    group: str  # "Z", "Z/2", or "0"
    value: int

    def __post_init__(self):
        if self.group == "0" and self.value != 0:
            raise ValueError("trivial group admits only 0")
        if self.group == "Z/2" and self.value not in (0, 1):
            raise ValueError("Z/2 class must be 0 or 1")


# group of the degree-n classes, indexed by (-n) mod 8
_GROUP_TABLE = ("Z", "Z/2", "Z/2", "0", "Z", "0", "0", "0")

# total real dimension of a graded irreducible, by signed degree, desk scale
_REAL_IRR_DIM = {1: 2, -1: 2, 2: 4, -2: 4, 3: 8, -3: 8, 4: 8, -4: 8,
                 5: 16, -5: 16, 6: 16, -6: 16, 7: 16, -7: 16, 8: 16, -8: 16}


def _volume_action(module: GradedCliffordModule) -> np.ndarray:
    M = np.eye(module.rank, dtype=complex)
    for g in module.generators:
        M = M @ g
    return M


def find_odd_extension(module: GradedCliffordModule, rng=None, samples: int = 8,
                       tol: float = 1e-8) -> dict:
    """Search for an extra odd generator of square +1 anticommuting with the action.

    Returns {found, matrix, degenerate}.  The candidate space is the real
    linear space of odd, hermitian (and real-structure-fixed, when present)
    matrices anticommuting with every generator; an invertible sample X is
    normalized to the exact involution X (X^2)^{-1/2}.  If the space is
    nonzero but every sample is singular the result is flagged degenerate.
    """
    import numpy.random as npr

    rng = rng or npr.default_rng(0)
    p, q, r = module.p, module.q, module.rank
    if p != q:
        # an odd involution forces equal graded halves
        return {"found": False, "matrix": None, "degenerate": False}

    # parametrize odd hermitian matrices: X = [[0, B], [B^dagger, 0]] in the
    # metric-orthonormal frame; constraints are linear in B over the reals
    H = module.metric
    L = np.linalg.cholesky(H)  # (x,y) = x^dagger H y = (Lx)^dagger (Ly)... frame change
    Linv = np.linalg.inv(L.conj().T)

    def to_frame(M):
        return L.conj().T @ M @ Linv

    gens_f = [to_frame(g) for g in module.generators]
    R_f = None
    if module.real_structure is not None:
        # antilinear map in the new frame: v -> (L^T conj) ... represent as matrix acting with conj
        R_f = L.conj().T @ module.real_structure @ np.conj(Linv)

    nb = p * q
    unknowns = 2 * nb  # real and imaginary parts of B

    def build_X(vec):
        B = (vec[:nb] + 1j * vec[nb:]).reshape(p, q)
        X = np.zeros((r, r), dtype=complex)
        X[:p, p:] = B
        X[p:, :p] = B.conj().T
        return X

    # each constraint is linear in the unknown real vector; build its matrix
    # column by column from the images of the unknown-basis vectors
    columns = []
    for idx in range(unknowns):
        vec = np.zeros(unknowns)
        vec[idx] = 1.0
        X = build_X(vec)
        pieces = [(X @ g + g @ X).reshape(-1) for g in gens_f]
        if R_f is not None:
            R_f_inv = np.linalg.inv(R_f)
            pieces.append((R_f @ X.conj() @ R_f_inv - X).reshape(-1))
        col = np.concatenate(pieces) if pieces else np.zeros(0, dtype=complex)
        columns.append(np.concatenate([col.real, col.imag]))
    A = np.column_stack(columns) if columns else np.zeros((0, unknowns))

    if A.shape[0]:
        _, s, Vt = np.linalg.svd(A)
        cutoff = 1e-9 * max(1.0, s.max() if s.size else 1.0)
        nullity = unknowns - int((s > cutoff).sum())
        null_basis = Vt[unknowns - nullity :] if nullity else np.zeros((0, unknowns))
    else:
        null_basis = np.eye(unknowns)
        nullity = unknowns

    if nullity == 0:
        return {"found": False, "matrix": None, "degenerate": False}

    degenerate = True
    for _ in range(samples):
        coeff = rng.standard_normal(nullity)
        X = build_X(coeff @ null_basis)
        sv = np.linalg.svd(X, compute_uv=False)
        if sv.size and sv.min() > tol * max(1.0, sv.max()):
            # exact involution certificate
            w, U = np.linalg.eigh(X @ X)
            inv_sqrt = U @ np.diag(1.0 / np.sqrt(w)) @ U.conj().T
            e = X @ inv_sqrt
            e_back = np.linalg.inv(L.conj().T) @ e @ L.conj().T
            resid = max(
                np.abs(e_back @ e_back - np.eye(r)).max(),
                max(
                    (np.abs(e_back @ g + g @ e_back).max() for g in module.generators),
                    default=0.0,
                ),
            )
            if resid <= 1e-8:
                return {"found": True, "matrix": e_back, "degenerate": False,
                        "residual": float(resid)}
            degenerate = True
    return {"found": False, "matrix": None, "degenerate": degenerate}


def abs_class(module: GradedCliffordModule, n: int | None = None,
              check_relations: bool = True) -> ABSClass:
    """Index class of a graded module in the standard degree-n group.

    A module is trivial in the quotient exactly when its action extends by
    one more anticommuting odd generator of square +1; the numeric value is
    computed by dimension and volume-supertrace counting, with the extension
    search available as an independent certificate (``find_odd_extension``).
    """
    if n is None:
        n = module.n
    if n != module.n:
        raise ValueError("declared degree does not match the module")
    if check_relations:
        rep = module.check()
        if not rep["ok"]:
            raise ValueError("module fails Clifford relations: " + "; ".join(rep["failures"]))

    r8 = (-n) % 8
    is_real = module.real_structure is not None or module.field_flag == "real"

    if not is_real:
        # complex classes: Z in even degree, 0 in odd degree
        if n % 2 != 0:
            return ABSClass(n % 8, "0", 0)
        if n == 0:
            return ABSClass(0, "Z", module.p - module.q)
        vol = _volume_action(module)
        sq = (vol @ vol)[0, 0]
        volhat = vol if abs(sq - 1) < 1e-8 else vol / np.sqrt(complex(sq))
        val = supertrace(volhat, module.p, module.q) / (2.0 ** (abs(n) // 2))
        ival = int(round(val.real))
        if abs(val - ival) > 1e-6:
            raise ValueError(f"volume supertrace {val} is not an integer multiple")
        return ABSClass(n % 8, "Z", ival)

    group = _GROUP_TABLE[r8]
    if group == "0":
        return ABSClass(n % 8, "0", 0)
    if group == "Z/2":
        dim = _REAL_IRR_DIM.get(n)
        if dim is None:
            raise ValueError(f"degree {n} outside the supported desk-scale range")
        mult, rem = divmod(module.rank, dim)
        if rem:
            raise ValueError("rank is not a multiple of the irreducible dimension")
        return ABSClass(n % 8, "Z/2", mult % 2)
    # group Z: n = 0 mod 4 (real)
    if n == 0:
        return ABSClass(0, "Z", module.p - module.q)
    dim = _REAL_IRR_DIM.get(n)
    if dim is None:
        raise ValueError(f"degree {n} outside the supported desk-scale range")
    vol = _volume_action(module)
    val = supertrace(vol, module.p, module.q) / dim
    ival = int(round(val.real))
    if abs(val - ival) > 1e-6:
        raise ValueError(f"volume supertrace {val} is not integral")
    return ABSClass(n % 8, "Z", ival)
