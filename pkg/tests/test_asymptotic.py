from decimal import Context, Decimal

import pytest

from geomseries.asymptotic import (
    AsymptoticResult,
    compute_k,
    coefficient_for_recurrence_level,
    verify_floor_identity,
)
from geomseries.chains import RECURRENCE_SIZES

CTX = Context(prec=60)


def test_fourteen_digit_constants():
    res = compute_k(14)
    assert str(res.k) == "1.50283680104976"
    assert str(res.coefficient) == "1.70158214004473"


def test_enclosure_brackets_the_constant():
    res = compute_k(30)
    quantum = Decimal(1).scaleb(-30)
    assert res.k_low <= res.k_high
    assert CTX.subtract(res.k, res.k_low) >= -quantum
    assert CTX.subtract(res.k_high, res.k) >= -quantum
    assert CTX.subtract(res.k_high, res.k_low) < Decimal(1).scaleb(-28)


def test_five_terms_give_seven_digits():
    res = compute_k(2)
    assert res.terms_used == 5  # sizes 1, 2, 5, 26, 677
    ref = compute_k(40)
    assert abs(CTX.subtract(res.k_low, ref.k)) < Decimal("1e-7")
    assert CTX.subtract(res.k_high, res.k_low) < Decimal("1e-7")


def test_results_nest_across_precisions():
    ref = compute_k(40).k
    for p in (6, 10, 14, 20, 30):
        got = compute_k(p).k
        assert abs(CTX.subtract(got, ref)) <= Decimal(1).scaleb(-p)


def test_error_bound_is_honored_and_shrinks():
    ref = compute_k(40)
    previous = None
    for p in (8, 12, 16, 20):
        res = compute_k(p)
        assert abs(CTX.subtract(res.k, ref.k)) <= res.error_bound
        if previous is not None:
            assert res.error_bound < previous
        previous = res.error_bound


def test_precision_cap():
    with pytest.raises(ValueError):
        compute_k(51)
    with pytest.raises(ValueError):
        compute_k(0)


def test_floor_identity_certified_through_level_six():
    rows = verify_floor_identity(6)
    assert [r.y for r in rows] == list(RECURRENCE_SIZES)
    for row in rows:
        assert row.floor_value == row.y
        assert row.match is True


def test_floor_identity_level_five_value():
    rows = verify_floor_identity(5)
    assert rows[5].floor_value == 458330


def test_floor_identity_rejects_levels_beyond_cap():
    with pytest.raises(ValueError):
        verify_floor_identity(7)


def test_level_coefficients_examples():
    assert coefficient_for_recurrence_level(2) == pytest.approx(1.7227, abs=1e-4)
    assert coefficient_for_recurrence_level(3) == pytest.approx(1.7019, abs=1e-4)
    assert coefficient_for_recurrence_level(4) == pytest.approx(1.7015, abs=1e-4)


def test_level_coefficients_decrease_to_the_limit():
    limit = float(compute_k(20).coefficient)
    values = [coefficient_for_recurrence_level(n) for n in range(1, 7)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert all(v > limit for v in values)
    assert values[-1] == pytest.approx(limit, abs=1e-9)


def test_level_validation():
    with pytest.raises(ValueError):
        coefficient_for_recurrence_level(0)
    with pytest.raises(ValueError):
        coefficient_for_recurrence_level(7)


def test_result_type_fields():
    res = compute_k(10)
    assert isinstance(res, AsymptoticResult)
    assert res.terms_used >= 5
    assert res.error_bound > 0
