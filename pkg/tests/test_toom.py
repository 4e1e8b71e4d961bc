from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmf.toom import (EvalPoint, SingularMatrixError, eval_matrix, invert_exact, make_plan,
                      phase_sum_identity, phi_coefficients, piece_widths, select_eval_points,
                      toom_multiply_oracle, toom_triple_oracle)

P = EvalPoint.parse


def names(points):
    return [str(p) for p in points]


def test_point_policy():
    assert names(select_eval_points(1)) == ["0"]
    assert names(select_eval_points(3)) == ["0", "inf", "-1"]
    assert names(select_eval_points(7)) == ["0", "inf", "-1", "1", "-1/2", "1/2", "-2"]
    assert names(select_eval_points(11))[7:] == ["2", "-1/4", "1/4", "-4"]


def test_points_distinct():
    pts = select_eval_points(21)
    assert len(set(pts)) == 21


def test_parse_roundtrip():
    for s in ["0", "inf", "1", "-1", "2", "-4", "1/2", "-1/4"]:
        assert str(P(s)) == s
    with pytest.raises(ValueError):
        P("2/3")


def test_eval_matrix_examples():
    pts = [P("0"), P("1"), P("inf")]
    assert eval_matrix(pts, 2) == [[0, 1], [1, 1], [1, 0]]
    assert eval_matrix(pts, 3) == [[0, 0, 1], [1, 1, 1], [1, 0, 0]]
    assert eval_matrix([P("0")], 1) == [[1]]


def test_unit_fraction_row_scaling():
    # (1, c, ..., c^(k-1)) . x == c^(k-1) x(1/c)
    k, c = 4, -2
    coeffs = [3, -1, 4, 7]    # most significant first
    row = P("-1/2").row(k)
    lhs = sum(r * v for r, v in zip(row, coeffs))
    t = Fraction(1, c)
    rhs = Fraction(c) ** (k - 1) * sum(v * t ** (k - 1 - j) for j, v in enumerate(coeffs))
    assert lhs == rhs


def test_invert_exact():
    eye = [[Fraction(int(i == j)) for j in range(3)] for i in range(3)]
    assert invert_exact(eye) == eye
    inv = invert_exact(eval_matrix([P("0"), P("1"), P("inf")], 3))
    # (t0, t1, tinf) -> (p0, p1, p2) = (t0, t1 - t0 - tinf, tinf), coefficients listed high first
    t0, t1, ti = 5, 11, 2
    out = [sum(inv[i][j] * v for j, v in enumerate((t0, t1, ti))) for i in range(3)]
    assert out == [ti, t1 - t0 - ti, t0]
    with pytest.raises(SingularMatrixError):
        invert_exact([[1, 2], [1, 2]])


@pytest.mark.parametrize("mode", ["double", "triple"])
@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_inverse_is_exact(mode, k):
    plan = make_plan(40, k, mode)
    a2 = eval_matrix(plan.points, plan.q)
    inv = plan.a_inv
    for i in range(plan.q):
        for j in range(plan.q):
            assert sum(Fraction(a2[i][l]) * inv[l][j] for l in range(plan.q)) == int(i == j)


def test_plan_examples():
    p = make_plan(8, 2)
    assert p.q == 3 and list(p.piece_widths) == [4, 4]
    p = make_plan(10, 3)
    assert p.q == 5 and list(p.piece_widths) == [3, 3, 4]
    assert make_plan(8, 3, "triple").q == 7
    assert piece_widths(10, 3) == [3, 3, 4]


def test_karatsuba_phi():
    plan = make_plan(8, 2, points=["0", "1", "inf"])
    assert list(phi_coefficients(plan, 1).entries) == [-15, 16, 240]
    assert all(v == 0 for v in phi_coefficients(plan, 0).entries)


def test_oracle_examples():
    assert toom_multiply_oracle(5, 3, make_plan(4, 2)) == 15
    assert toom_multiply_oracle(0, 9, make_plan(4, 2)) == 0
    assert toom_triple_oracle(1, 1, 1, make_plan(4, 3, "triple")) == 1
    assert toom_triple_oracle(3, 5, 7, make_plan(4, 3, "triple")) == 105


def test_phase_sum_examples():
    assert phase_sum_identity(make_plan(4, 2), Fraction(1, 7), [5, 3]) == Fraction(15, 7)
    assert phase_sum_identity(make_plan(4, 2), 1, [0, 13]) == 0
    assert phase_sum_identity(make_plan(4, 3, "triple"), 1, [2, 3, 4]) == 24


@given(st.integers(2, 8), st.integers(0, 2**512 - 1), st.integers(0, 2**512 - 1))
def test_multiply_oracle_512(k, x, y):
    assert toom_multiply_oracle(x, y, make_plan(512, k)) == x * y


@given(st.integers(2, 5), st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
def test_triple_oracle(k, x, y, z):
    assert toom_triple_oracle(x, y, z, make_plan(64, k, "triple")) == x * y * z


@given(st.integers(2, 6), st.integers(1, 70), st.data())
def test_piece_reassembly(k, n, data):
    if n < k:
        n = k
    plan = make_plan(n, k)
    x = data.draw(st.integers(0, 2**n - 1))
    pieces = plan.split(x)
    off, total = 0, 0
    for p, w in zip(pieces, plan.piece_widths):
        assert 0 <= p < 2**w
        total += p << off
        off += w
    assert total == x and sum(plan.piece_widths) == n


@given(st.integers(2, 6), st.sampled_from(["double", "triple"]), st.fractions(), st.data())
def test_phase_sum_identity_property(k, mode, phi, data):
    plan = make_plan(48, k, mode)
    r = 2 if mode == "double" else 3
    xs = data.draw(st.lists(st.integers(0, 2**48 - 1), min_size=r, max_size=r))
    prod = 1
    for v in xs:
        prod *= v
    assert phase_sum_identity(plan, phi, xs) == phi * prod
