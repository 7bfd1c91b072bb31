"""Clifford algebra arithmetic, stars, supertraces, Hattori-Stallings, index classes."""

import json
import math
import random

import numpy as np
import pytest

from superindex.clifford import (
    ABSClass,
    CliffordAlgebra,
    CliffordElement,
    GradedCliffordModule,
    abs_class,
    clifford_supertrace,
    direct_sum,
    find_odd_extension,
    gamma,
    grading_matrix,
    hattori_stallings,
    hs_normalization,
    left_right_convert,
    morita_witness_check,
    parity_flip,
    right_multiplication,
    star_graded,
    star_super,
    supercommutator,
    supertrace,
)
from superindex.oracles import oracle_clifford_naive

CL2 = CliffordAlgebra(2)
CL3 = CliffordAlgebra(3)
CLm2 = CliffordAlgebra(-2)


def random_clifford_element(algebra, rng, max_terms=4):
    blades = {}
    for _ in range(rng.randint(1, max_terms)):
        b = rng.randrange(1 << algebra.num_generators)
        blades[b] = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
    return CliffordElement(algebra, blades)


# -- fixture modules ---------------------------------------------------------

F_MAT = np.array([[0, 1], [-1, 0]], dtype=complex)
E_MAT = np.array([[0, 1], [1, 0]], dtype=complex)


def cl1_module():
    return GradedCliffordModule(p=1, q=1, n=1, generators=[F_MAT])


def clm1_module(real=True):
    R = np.eye(2) if real else None
    return GradedCliffordModule(p=1, q=1, n=-1, generators=[E_MAT], real_structure=R)


def clm2_module(real=True):
    B1 = np.eye(2)
    B2 = np.array([[0, 1], [-1, 0]])
    gens = []
    for B in (B1, B2):
        G = np.zeros((4, 4), dtype=complex)
        G[:2, 2:] = B
        G[2:, :2] = B.conj().T
        gens.append(G)
    R = np.eye(4) if real else None
    return GradedCliffordModule(p=2, q=2, n=-2, generators=gens, real_structure=R)


def cl4_module():
    # quaternion left multiplications give four real anticommuting
    # square -1 generators on R^4 + R^4
    Li = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], dtype=float)
    Lj = np.array([[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float)
    Lk = Li @ Lj
    I4 = np.eye(4)
    gens = []
    blocks = [(-I4, I4)] + [(L, L) for L in (Li, Lj, Lk)]
    for upper, lower in blocks:
        G = np.zeros((8, 8), dtype=complex)
        G[:4, 4:] = upper
        G[4:, :4] = lower
        gens.append(G)
    return GradedCliffordModule(p=4, q=4, n=4, generators=gens, real_structure=np.eye(8))


def complex_cl2_module():
    G2 = np.array([[0, 1j], [1j, 0]], dtype=complex)
    return GradedCliffordModule(p=1, q=1, n=2, generators=[F_MAT, G2])


class TestMultiplication:
    def test_f_squares_to_minus_one(self):
        f1 = CL2.generator(1)
        assert f1 * f1 == CL2.scalar(-1)

    def test_e_squares_to_plus_one(self):
        e1 = CLm2.generator(1)
        assert e1 * e1 == CLm2.scalar(1)

    def test_gamma2_square(self):
        g = gamma(CL2)
        sq = g * g
        assert abs(sq.coefficient(0) - (-0.25)) < 1e-12
        assert all(abs(c) < 1e-12 for b, c in sq.blades.items() if b != 0)

    def test_anticommutation(self):
        f1, f2 = CL2.generator(1), CL2.generator(2)
        assert f1 * f2 == -(f2 * f1)

    def test_algebra_mismatch(self):
        with pytest.raises(ValueError):
            CL2.generator(1) * CL3.generator(1)

    def test_against_naive_oracle(self):
        rng = random.Random(5)
        for n in (2, 3, -2, -3):
            algebra = CliffordAlgebra(n)
            for _ in range(25):
                a = random_clifford_element(algebra, rng)
                b = random_clifford_element(algebra, rng)
                fast = a * b
                slow = oracle_clifford_naive(
                    n,
                    {tuple(i + 1 for i in range(8) if (blade >> i) & 1): c
                     for blade, c in a.blades.items()},
                    {tuple(i + 1 for i in range(8) if (blade >> i) & 1): c
                     for blade, c in b.blades.items()},
                )
                slow_elem = CliffordElement(
                    algebra,
                    {sum(1 << (i - 1) for i in word): c for word, c in slow.items()},
                )
                assert (fast - slow_elem).norm() < 1e-12

    def test_naive_oracle_exhaustive_cl3(self):
        # all basis pairs of the degree-3 algebra
        algebra = CL3
        for ba in range(8):
            for bb in range(8):
                a = CliffordElement(algebra, {ba: 1.0 + 0j})
                b = CliffordElement(algebra, {bb: 1.0 + 0j})
                fast = a * b
                word_a = tuple(i + 1 for i in range(3) if (ba >> i) & 1)
                word_b = tuple(i + 1 for i in range(3) if (bb >> i) & 1)
                slow = oracle_clifford_naive(3, {word_a: 1.0}, {word_b: 1.0})
                slow_elem = CliffordElement(
                    algebra, {sum(1 << (i - 1) for i in w): c for w, c in slow.items()}
                )
                assert (fast - slow_elem).norm() == 0


class TestGamma:
    def test_gamma0(self):
        assert gamma(0) == CliffordAlgebra(0).one()

    def test_gamma1(self):
        g = gamma(1)
        assert abs(g.coefficient(1) - 2 ** -0.5) < 1e-15

    def test_gamma_minus2(self):
        g = gamma(-2)
        assert abs(g.coefficient(0b11) - 0.5) < 1e-15

    def test_exact_split(self):
        blade, half = gamma(CliffordAlgebra(3), exact_split=True)
        assert half == -3
        assert blade.coefficient(0b111) == 1


class TestStars:
    def test_star_super_generator(self):
        f1 = CL2.generator(1)
        assert star_super(f1) == f1 * -1j

    def test_star_super_e_generator(self):
        e1 = CLm2.generator(1)
        assert star_super(e1) == e1 * 1j

    def test_star_super_product_example(self):
        f1, f2 = CL2.generator(1), CL2.generator(2)
        assert star_super(f1 * f2) == f2 * f1

    def test_star_super_unit(self):
        assert star_super(CL2.one()) == CL2.one()

    def test_star_graded_generator(self):
        assert star_graded(CL2.generator(1)) == -CL2.generator(1)
        assert star_graded(CLm2.generator(1)) == CLm2.generator(1)

    def test_star_graded_product(self):
        e1, e2 = CLm2.generator(1), CLm2.generator(2)
        assert star_graded(e1 * e2) == e2 * e1

    def test_involutions(self):
        rng = random.Random(13)
        for algebra in (CL2, CL3, CLm2):
            for _ in range(10):
                a = random_clifford_element(algebra, rng)
                assert (star_super(star_super(a)) - a).norm() < 1e-12
                assert (star_graded(star_graded(a)) - a).norm() < 1e-12

    def test_super_antihomomorphism(self):
        rng = random.Random(17)
        for _ in range(10):
            a = random_clifford_element(CL3, rng)
            b = random_clifford_element(CL3, rng)
            for pa in (0, 1):
                for pb in (0, 1):
                    ha, hb = a.parity_part(pa), b.parity_part(pb)
                    sign = -1 if pa and pb else 1
                    lhs = star_super(ha * hb)
                    rhs = (star_super(hb) * star_super(ha)) * sign
                    assert (lhs - rhs).norm() < 1e-12

    def test_stars_differ_by_i_on_odd(self):
        # on a single generator the two stars differ by a factor of i
        for algebra in (CL2, CLm2):
            g = algebra.generator(1)
            assert (star_super(g) - star_graded(g) * 1j).norm() < 1e-15

    def test_real_field_rejected(self):
        real_alg = CliffordAlgebra(2, field="real")
        with pytest.raises(ValueError):
            star_super(real_alg.one())


class TestSupertrace:
    def test_identity_balanced(self):
        assert supertrace(np.eye(2), 1, 1) == 0

    def test_identity_even(self):
        assert supertrace(np.eye(2), 2, 0) == 2

    def test_odd_operator(self):
        T = np.array([[0, 3], [7, 0]], dtype=complex)
        assert supertrace(T, 1, 1) == 0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            supertrace(np.eye(3), 1, 1)


class TestCliffordSupertrace:
    def test_degree_zero_reduces_to_supertrace(self):
        module = GradedCliffordModule(p=2, q=1, n=0, generators=[])
        T = np.diag([1.0, 2.0, 3.0]).astype(complex)
        assert clifford_supertrace(module, T) == supertrace(T, 2, 1)

    def test_morita_module_identity_value(self):
        # two routes to sTr(Gamma o id): table-based product and naive shuffle
        module = cl1_module()
        val = clifford_supertrace(module, np.eye(2))
        prod = oracle_clifford_naive(1, {(1,): 2 ** -0.5}, {(): 1.0})
        act = sum(
            c * (module.act(CliffordElement(CliffordAlgebra(1),
                                            {sum(1 << (i - 1) for i in w): 1.0})))
            for w, c in prod.items()
        )
        assert abs(val - supertrace(act, 1, 1)) < 1e-12

    def test_kills_supercommutators(self):
        # Clifford-linear operators on the degree-1 module: id and J
        module = cl1_module()
        J = np.array([[0, 1], [1, 0]], dtype=complex)
        lhs = clifford_supertrace(module, supercommutator(J, J, 1, 1))
        assert abs(lhs) < 1e-12

    def test_warns_on_nonlinear_operator(self):
        module = cl1_module()
        T = np.diag([1.0, 0.0]).astype(complex)
        with pytest.warns(UserWarning, match="not Clifford-linear"):
            clifford_supertrace(module, T)

    def test_regular_module_reference(self):
        # sTr(Gamma o super right multiplication by f) on the rank (1|1) algebra
        val = clifford_supertrace(
            GradedCliffordModule(p=1, q=1, n=1,
                                 generators=[np.array([[0, -1], [1, 0]], dtype=complex)]),
            right_multiplication(1, 1),
        )
        assert abs(val - (-math.sqrt(2))) < 1e-12


class TestHattoriStallings:
    def test_zero(self):
        module = cl1_module()
        assert hattori_stallings(module, np.zeros((2, 2))) == 0

    def test_recorded_normalizations(self):
        # frozen values: kappa_0 = 1, kappa_1 = -sqrt(2), kappa_2 = -2
        assert abs(hs_normalization(0) - 1) < 1e-10
        assert abs(hs_normalization(1) - (-math.sqrt(2))) < 1e-10
        assert abs(hs_normalization(2) - (-2)) < 1e-10

    def test_agrees_with_supertrace_on_cl1_module(self):
        module = cl1_module()
        kappa = hs_normalization(1)
        for T in (np.eye(2, dtype=complex), np.array([[0, 1], [1, 0]], dtype=complex)):
            hs = hattori_stallings(module, T)
            cst = clifford_supertrace(module, T)
            assert abs(kappa * hs - cst) < 1e-9

    def test_linearity(self):
        module = cl1_module()
        T1 = np.eye(2, dtype=complex)
        T2 = np.array([[0, 1], [1, 0]], dtype=complex)
        lhs = hattori_stallings(module, 2 * T1 + 3j * T2)
        rhs = 2 * hattori_stallings(module, T1) + 3j * hattori_stallings(module, T2)
        assert abs(lhs - rhs) < 1e-9

    def test_rejects_nonlinear(self):
        module = cl1_module()
        with pytest.raises(ValueError, match="not Clifford-linear"):
            hattori_stallings(module, np.diag([1.0, 0.0]))

    def test_degree_two_module(self):
        module = complex_cl2_module()
        kappa = hs_normalization(2)
        # the super-commutant of the irreducible degree-2 action is spanned by id
        T = np.eye(2, dtype=complex)
        assert abs(kappa * hattori_stallings(module, T)
                   - clifford_supertrace(module, T)) < 1e-9


class TestLeftRightConvert:
    def test_morita_round_trip(self):
        R_f = np.array([[0, -1], [1, 0]], dtype=complex)
        data = {"p": 1, "q": 1, "left": [F_MAT], "right": [R_f]}
        left = left_right_convert(data, "to_left")
        assert len(left["left"]) == 2
        assert np.abs(left["left"][1] - E_MAT).max() < 1e-15
        back = left_right_convert(left, "to_bimodule")
        assert np.abs(back["left"][0] - F_MAT).max() < 1e-15
        assert np.abs(back["right"][0] - R_f).max() < 1e-15

    def test_converted_square_flips(self):
        # right action with square -1 becomes a left generator of square +1
        R_f = np.array([[0, -1], [1, 0]], dtype=complex)
        out = left_right_convert({"p": 1, "q": 1, "left": [], "right": [R_f]}, "to_left")
        M = out["left"][0]
        assert np.abs(M @ M - np.eye(2)).max() < 1e-15

    def test_parity_preserved(self):
        R_f = np.array([[0, -1], [1, 0]], dtype=complex)
        out = left_right_convert({"p": 1, "q": 1, "left": [F_MAT], "right": [R_f]}, "to_left")
        for M in out["left"]:
            assert abs(M[0, 0]) + abs(M[1, 1]) < 1e-15

    def test_bad_direction(self):
        with pytest.raises(ValueError):
            left_right_convert({"p": 1, "q": 1, "left": []}, "sideways")


class TestMoritaWitness:
    def test_passes(self):
        report = morita_witness_check()
        assert report["ok"]
        assert report["checks"]["generated_dimension"]["value"] == 4

    def test_individual_relations(self):
        assert np.abs(F_MAT @ F_MAT + np.eye(2)).max() < 1e-15
        assert np.abs(E_MAT @ E_MAT - np.eye(2)).max() < 1e-15
        assert np.abs(F_MAT @ E_MAT + E_MAT @ F_MAT).max() < 1e-15


class TestModuleValidation:
    def test_good_module_passes(self):
        for module in (cl1_module(), clm1_module(), clm2_module(), cl4_module(),
                       complex_cl2_module()):
            report = module.check()
            assert report["ok"], report["failures"]

    def test_broken_relation_fails(self):
        bad = GradedCliffordModule(p=1, q=1, n=1,
                                   generators=[np.array([[0, 1], [1, 0]], dtype=complex)])
        report = bad.check()
        assert not report["ok"]

    def test_json_round_trip(self):
        module = clm2_module()
        blob = json.dumps(module.to_json_dict())
        back = GradedCliffordModule.from_json_dict(json.loads(blob))
        assert back.p == module.p and back.q == module.q and back.n == module.n
        for g1, g2 in zip(module.generators, back.generators):
            assert np.abs(g1 - g2).max() == 0


class TestABSClass:
    def test_degree_zero_graded_dimension(self):
        module = GradedCliffordModule(p=3, q=1, n=0, generators=[])
        cls = abs_class(module)
        assert cls.group == "Z" and cls.value == 2

    def test_complex_odd_degree_trivial(self):
        cls = abs_class(cl1_module())
        assert cls.group == "0" and cls.value == 0

    def test_complex_even_degree(self):
        module = complex_cl2_module()
        cls = abs_class(module)
        assert cls.group == "Z" and abs(cls.value) == 1

    def test_complex_parity_flip_negates(self):
        module = complex_cl2_module()
        flipped = parity_flip(module)
        assert abs_class(module).value == -abs_class(flipped).value

    def test_real_degree_minus_one(self):
        module = clm1_module()
        cls = abs_class(module)
        assert cls.group == "Z/2" and cls.value == 1

    def test_real_degree_minus_one_double_trivial(self):
        module = clm1_module()
        double = direct_sum(module, module)
        cls = abs_class(double)
        assert cls.group == "Z/2" and cls.value == 0

    def test_real_degree_minus_two(self):
        module = clm2_module()
        cls = abs_class(module)
        assert cls.group == "Z/2" and cls.value == 1
        double = direct_sum(module, module)
        assert abs_class(double).value == 0

    def test_real_degree_four(self):
        module = cl4_module()
        cls = abs_class(module)
        assert cls.group == "Z" and abs(cls.value) == 1
        double = direct_sum(module, module)
        assert abs(abs_class(double).value) == 2
        mixed = direct_sum(module, parity_flip(module))
        assert abs_class(mixed).value == 0

    def test_group_shape_enforced(self):
        with pytest.raises(ValueError):
            ABSClass(n_mod_8=3, group="0", value=1)

    def test_relation_validation(self):
        bad = GradedCliffordModule(p=1, q=1, n=1,
                                   generators=[np.array([[0, 2], [-2, 0]], dtype=complex)])
        with pytest.raises(ValueError):
            abs_class(bad)


class TestExtensionSearch:
    def test_nontrivial_class_not_extendable(self):
        for module in (clm1_module(), clm2_module(), cl4_module()):
            result = find_odd_extension(module)
            assert not result["found"]

    def test_doubles_extend(self):
        for module in (clm1_module(), clm2_module()):
            double = direct_sum(module, module)
            result = find_odd_extension(double)
            assert result["found"]
            e = result["matrix"]
            assert np.abs(e @ e - np.eye(double.rank)).max() < 1e-8
            for g in double.generators:
                assert np.abs(e @ g + g @ e).max() < 1e-8

    def test_mixed_sum_extends(self):
        module = cl4_module()
        mixed = direct_sum(module, parity_flip(module))
        assert find_odd_extension(mixed)["found"]

    def test_complex_f_module_extends(self):
        # without a real structure the rank (1|1) degree-1 module is trivial
        result = find_odd_extension(cl1_module())
        assert result["found"]

    def test_morita_object_class_zero(self):
        # the rank (1|1) joint module carries no degree constraint: as a
        # degree-0 object its class is the graded dimension difference
        module = GradedCliffordModule(p=1, q=1, n=0, generators=[])
        assert abs_class(module).value == 0

    def test_extension_consistent_with_class(self):
        # nonzero class forbids an extension; zero class admits one
        samples = [
            (clm1_module(), True),
            (direct_sum(clm1_module(), clm1_module()), False),
            (cl4_module(), True),
        ]
        for module, nonzero in samples:
            cls = abs_class(module)
            found = find_odd_extension(module)["found"]
            assert (cls.value != 0) == nonzero
            assert found == (cls.value == 0)
