"""Coefficient ring: products, differential, splits, serialization.

Sign conventions are pinned by the dense word-shuffling oracle; the fast
sparse engine must agree with it on every product at small sizes, in both
floating and exact-rational modes.
"""

import json

from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from superindex.oracles import oracle_dense_grassmann
from superindex.superring import QQi, RingElement, RingSignature

SIG = RingSignature(m=2, D=3, odd=("theta", "eta"))
SIG_EXACT = RingSignature(m=2, D=3, odd=("theta", "eta"), exact=True)


def random_element(sig, rng, max_terms=6):
    keys = list(sig.iter_keys())
    terms = {}
    for _ in range(rng.randint(1, max_terms)):
        key = keys[rng.randrange(len(keys))]
        if sig.exact:
            terms[key] = QQi(Fraction(rng.randint(-9, 9), rng.randint(1, 7)),
                             Fraction(rng.randint(-9, 9), rng.randint(1, 7)))
        else:
            terms[key] = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
    return RingElement(sig, terms)


@st.composite
def elements(draw, sig=SIG, max_terms=5):
    keys = list(sig.iter_keys())
    n = draw(st.integers(min_value=0, max_value=max_terms))
    terms = {}
    for _ in range(n):
        key = draw(st.sampled_from(keys))
        re = draw(st.integers(min_value=-4, max_value=4))
        im = draw(st.integers(min_value=-4, max_value=4))
        terms[key] = complex(re, im)
    return RingElement(sig, terms)


class TestGenerators:
    def test_form_antisymmetry(self):
        dx1, dx2 = SIG.dx(1), SIG.dx(2)
        assert dx1 * dx2 == -(dx2 * dx1)

    def test_odd_square_vanishes(self):
        theta = SIG.odd_param("theta")
        assert (theta * theta).is_zero()

    def test_truncation_by_total_degree(self):
        x1 = SIG.x(1)
        assert not (x1 * x1).is_zero()
        tight = RingSignature(m=1, D=1)
        assert (tight.x(1) * tight.x(1)).is_zero()

    def test_forms_count_toward_truncation(self):
        sig = RingSignature(m=2, D=2)
        prod = sig.x(1) * sig.x(2) * sig.dx(1)
        assert prod.is_zero()

    def test_odd_params_do_not_count(self):
        sig = RingSignature(m=1, D=1, odd=("theta",))
        prod = sig.x(1) * sig.odd_param("theta")
        assert not prod.is_zero()


class TestDifferential:
    def test_d_x(self):
        assert SIG.x(1).d() == SIG.dx(1)

    def test_d_squared_on_product(self):
        a = SIG.x(1) * SIG.x(2)
        assert a.d().d().is_zero()

    def test_leibniz_with_constant_form(self):
        a = SIG.x(1) * SIG.dx(2)
        assert a.d() == SIG.dx(1) * SIG.dx(2)

    def test_d_odd_param_is_zero(self):
        assert SIG.odd_param("theta").d().is_zero()

    def test_d_ordering_sign(self):
        # d(x2 dx1) = dx2 dx1 = -dx1 dx2
        a = SIG.x(2) * SIG.dx(1)
        assert a.d() == -(SIG.dx(1) * SIG.dx(2))

    @given(elements())
    @settings(max_examples=80, deadline=None)
    def test_d_squared_zero(self, a):
        assert a.d().d().is_zero()

    @given(elements(), elements())
    @settings(max_examples=80, deadline=None)
    def test_graded_leibniz(self, a, b):
        for parity in (0, 1):
            h = a.parity_part(parity)
            sign = -1 if parity else 1
            lhs = (h * b).d()
            rhs = h.d() * b + sign * (h * b.d())
            assert (lhs - rhs).norm() <= 1e-12


class TestSupercommutativity:
    @given(elements(), elements())
    @settings(max_examples=60, deadline=None)
    def test_koszul_rule(self, a, b):
        for pa in (0, 1):
            for pb in (0, 1):
                ha, hb = a.parity_part(pa), b.parity_part(pb)
                sign = -1 if (pa and pb) else 1
                assert (ha * hb - sign * (hb * ha)).norm() <= 1e-12


class TestOracleAgreement:
    def test_exhaustive_basis_products(self):
        # every pair of monomials, float mode
        keys = list(SIG.iter_keys())
        for ka in keys:
            a = RingElement(SIG, {ka: 1.0 + 0j})
            for kb in keys:
                b = RingElement(SIG, {kb: 1.0 + 0j})
                assert a * b == oracle_dense_grassmann(a, b)

    def test_exhaustive_basis_products_exact(self):
        keys = list(SIG_EXACT.iter_keys())
        for ka in keys:
            a = RingElement(SIG_EXACT, {ka: QQi(1)})
            for kb in keys:
                b = RingElement(SIG_EXACT, {kb: QQi(1)})
                fast = a * b
                slow = oracle_dense_grassmann(a, b)
                assert fast == slow

    @given(elements(), elements())
    @settings(max_examples=100, deadline=None)
    def test_random_products(self, a, b):
        assert ((a * b) - oracle_dense_grassmann(a, b)).norm() <= 1e-12


class TestOddCoefficient:
    def test_simple(self):
        a = SIG.scalar(5) + SIG.odd_param("theta") * SIG.dx(1)
        assert a.odd_coefficient("theta") == SIG.dx(1)

    def test_no_dependence(self):
        assert SIG.scalar(5).odd_coefficient("theta").is_zero()

    def test_sign_convention(self):
        # a = theta*eta*x1 = theta*(eta*x1), so the theta coefficient is eta*x1;
        # pulling eta to the front instead crosses theta and picks up a sign
        theta, eta, x1 = SIG.odd_param("theta"), SIG.odd_param("eta"), SIG.x(1)
        a = theta * eta * x1
        assert a.odd_coefficient("theta") == eta * x1
        assert a.odd_coefficient("eta") == -(theta * x1)

    def test_form_crossing_sign(self):
        # a = dx1*theta = -theta*dx1
        a = SIG.dx(1) * SIG.odd_param("theta")
        assert a.odd_coefficient("theta") == -SIG.dx(1)

    def test_strip_plus_coefficient_reconstructs(self):
        rng = __import__("random").Random(7)
        for _ in range(20):
            a = random_element(SIG, rng)
            a0 = a.strip_odd("theta")
            a1 = a.odd_coefficient("theta")
            recon = a0 + SIG.odd_param("theta") * a1
            assert (a - recon).norm() <= 1e-12

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            SIG.one().odd_coefficient("zeta")


class TestBodyNilSplit:
    def test_example(self):
        a = SIG.scalar(3) + SIG.x(1) * SIG.dx(1)
        body, nil = a.body_nil_split()
        assert body == 3
        assert nil == SIG.x(1) * SIG.dx(1)

    def test_odd_param_is_nil(self):
        body, nil = SIG.odd_param("theta").body_nil_split()
        assert body == 0
        assert nil == SIG.odd_param("theta")

    def test_nilpotency_order(self):
        rng = __import__("random").Random(3)
        bound = SIG.D + len(SIG.odd) + 1
        for _ in range(10):
            _, nil = random_element(SIG, rng).body_nil_split()
            assert (nil ** bound).is_zero()


class TestConjugate:
    def test_scalar(self):
        a = SIG.scalar(1j) * SIG.x(1)
        assert a.conjugate() == SIG.scalar(-1j) * SIG.x(1)

    def test_involution(self):
        rng = __import__("random").Random(11)
        for _ in range(10):
            a = random_element(SIG, rng)
            assert a.conjugate().conjugate() == a

    def test_real_generators(self):
        assert SIG.dx(1).conjugate() == SIG.dx(1)
        assert SIG.odd_param("theta").conjugate() == SIG.odd_param("theta")


class TestSerialization:
    def test_round_trip_bit_exact(self):
        rng = __import__("random").Random(23)
        for _ in range(20):
            a = random_element(SIG, rng)
            blob = json.dumps(a.to_json_dict())
            back = RingElement.from_json_dict(json.loads(blob))
            assert back.sig == a.sig
            assert back.terms == a.terms

    def test_round_trip_exact_mode(self):
        rng = __import__("random").Random(29)
        for _ in range(10):
            a = random_element(SIG_EXACT, rng)
            blob = json.dumps(a.to_json_dict())
            back = RingElement.from_json_dict(json.loads(blob))
            assert back == a

    def test_deterministic_bytes(self):
        rng = __import__("random").Random(31)
        a = random_element(SIG, rng)
        assert json.dumps(a.to_json_dict()) == json.dumps(a.to_json_dict())

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            RingElement.from_json_dict({"terms": []})
        with pytest.raises(ValueError):
            RingElement.from_json_dict(
                {"signature": {"m": 1, "D": 1}, "terms": [{"exps": [0, 0], "re": 1, "im": 0}]}
            )


class TestPromotion:
    def test_with_odds_extends(self):
        big = SIG.with_odds("zeta")
        assert big.odd == ("theta", "eta", "zeta")

    def test_promote_preserves_products(self):
        rng = __import__("random").Random(37)
        small = RingSignature(m=1, D=2, odd=("theta",))
        big = small.with_odds("eta")
        for _ in range(10):
            a, b = random_element(small, rng), random_element(small, rng)
            lhs = (a * b).promote(big)
            rhs = a.promote(big) * b.promote(big)
            assert (lhs - rhs).norm() <= 1e-12


class TestTruncationIdeal:
    @given(elements(), elements())
    @settings(max_examples=40, deadline=None)
    def test_d_of_product_at_boundary(self, a, b):
        # d respects the quotient: compare Leibniz across the truncation edge
        for parity in (0, 1):
            h = a.parity_part(parity)
            sign = -1 if parity else 1
            lhs = (h * b).d()
            rhs = h.d() * b + sign * (h * b.d())
            assert (lhs - rhs).norm() <= 1e-12

    def test_high_degree_dropped(self):
        sig = RingSignature(m=1, D=2)
        x = sig.x(1)
        assert (x * x * x).is_zero()
        assert not (x * x).is_zero()
