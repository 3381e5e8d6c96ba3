import pytest

from conftest import brute_series
from geomseries import chains
from geomseries.chains import (
    BINARY_RULE,
    RECURRENCE,
    RECURRENCE_SIZES,
    SMALL_MULS,
    SMALL_SIZES,
    TABLE1,
    TABLE1_CORRECTED,
    ChainEntry,
    RecurrenceIndex,
    binary_chain,
    binary_rule_muls,
    chain_for_small,
    chain_from_json,
    chain_to_json,
    flawed_length11_chain,
    flawed_length26_chain,
    next_power_extension,
    recurrence_chain,
)
from geomseries.slp import (
    DensePoly,
    ProgramBuilder,
    eval_poly_oracle,
    evaluate,
    evaluate_mod,
    mul_count,
    passes_oracle,
    polynomial_of_register,
)


def reference_binary_cost(n: int) -> int:
    # independent recursion: two muls per halving, bottoming at 2 or 3
    if n <= 2:
        return 0
    if n == 3:
        return 1
    return 2 + reference_binary_cost(n // 2)


# -- small chains ---------------------------------------------------------------


def test_small_chain_mul_counts_are_pinned():
    for p, want in ((2, 0), (3, 1), (5, 2), (7, 3), (11, 4)):
        assert chain_for_small(p).muls == want


def test_small_chains_expand_to_all_ones():
    for p in SMALL_SIZES:
        assert eval_poly_oracle(chain_for_small(p).program) == DensePoly.all_ones(p)


def test_small_chain_provenance():
    assert chain_for_small(7).provenance == TABLE1
    assert chain_for_small(11).provenance == TABLE1_CORRECTED


def test_unsupported_small_size_raises():
    with pytest.raises(ValueError):
        chain_for_small(4)
    with pytest.raises(ValueError):
        chain_for_small(13)


def test_small_chain_power_registers_hold_powers():
    for p in (3, 5, 7, 11):
        entry = chain_for_small(p)
        for e, reg in entry.powers.items():
            got = polynomial_of_register(entry.program, reg)
            assert got == DensePoly([0] * e + [1])


# -- binary rule ----------------------------------------------------------------


def test_binary_chain_examples():
    assert binary_chain(5).muls == 2
    assert binary_chain(2).muls == 0
    assert binary_chain(7).muls == 3


def test_binary_chain_sweep_oracle_and_counts():
    for n in list(range(2, 200)) + [277, 512, 600, 1021]:
        entry = binary_chain(n)
        assert passes_oracle(entry.program), n
        assert entry.muls == reference_binary_cost(n) == binary_rule_muls(n)
        assert entry.muls <= max(n - 2, 0)
        assert entry.provenance == BINARY_RULE


def test_binary_chain_rejects_length_one():
    with pytest.raises(ValueError):
        binary_chain(1)


# -- recurrence family ------------------------------------------------------------


def test_recurrence_sizes_prefix():
    assert RECURRENCE_SIZES == (1, 2, 5, 26, 677, 458330, 210066388901)
    assert all(
        RECURRENCE_SIZES[i + 1] == RECURRENCE_SIZES[i] ** 2 + 1
        for i in range(len(RECURRENCE_SIZES) - 1)
    )


def test_recurrence_index_validation():
    assert RecurrenceIndex.from_level(3).value == 26
    with pytest.raises(ValueError):
        RecurrenceIndex(2, 6)
    with pytest.raises(ValueError):
        RecurrenceIndex.from_level(7)


def test_recurrence_chain_counts_are_two_to_n_minus_two():
    for n in range(1, 7):
        entry = recurrence_chain(n)
        assert entry.muls == 2**n - 2
        assert entry.size == RECURRENCE_SIZES[n]
        assert entry.provenance == RECURRENCE


def test_recurrence_chain_oracle_through_level_four():
    for n in (1, 2, 3, 4):
        assert passes_oracle(recurrence_chain(n).program)


def test_recurrence_chain_level_five_spot_checks():
    prog = recurrence_chain(5).program
    n = RECURRENCE_SIZES[5]
    assert evaluate(prog, 1) == n
    for p in (10**9 + 7, 998244353):
        assert evaluate_mod(prog, 2, p) == (pow(2, n, p) - 1) % p


def test_recurrence_chain_level_six_spot_checks():
    prog = recurrence_chain(6).program
    n = RECURRENCE_SIZES[6]
    assert prog.declared_muls == 62
    assert evaluate(prog, 1) == n
    p = 2**61 - 1
    assert evaluate_mod(prog, 3, p) == (pow(3, n, p) - 1) * pow(2, p - 2, p) % p


def test_recurrence_chain_level_zero_is_constant_one():
    entry = recurrence_chain(0)
    assert entry.size == 1 and entry.muls == 0
    assert eval_poly_oracle(entry.program) == DensePoly.one()


def test_recurrence_chain_rejects_level_beyond_cap():
    with pytest.raises(ValueError):
        recurrence_chain(7)


def test_all_chains_evaluate_to_length_at_one():
    entries = [chain_for_small(p) for p in SMALL_SIZES]
    entries += [binary_chain(n) for n in (6, 45, 100)]
    entries += [recurrence_chain(n) for n in range(1, 7)]
    for entry in entries:
        assert evaluate(entry.program, 1) == entry.size


def test_recurrence_matches_brute_force_at_small_values():
    prog = recurrence_chain(3).program  # length 26
    for x in (-1, 2, 3):
        assert evaluate(prog, x) == brute_series(26, x)


# -- next power -------------------------------------------------------------------


def test_next_power_extension_generic_costs_one_mul():
    for p in (2, 3, 5, 7, 11):
        entry = chain_for_small(p)
        ext = next_power_extension(entry)
        assert ext.declared_muls == entry.muls + 1
        assert ext.output == entry.program.output  # still the series value
        power_poly = polynomial_of_register(ext, len(ext.instrs) - 1)
        assert power_poly == DensePoly([0] * p + [1])
        assert passes_oracle(ext)


def test_next_power_extension_free_when_shifted_product_present():
    b = ProgramBuilder()
    x = b.input()
    pieces = chains.emit_series_chain(b, x, 3)
    shifted = b.mul(x, pieces.value)  # x * f(3, x)
    prog = b.finish(pieces.value, 3)
    entry = ChainEntry(
        size=3,
        program=prog,
        muls=prog.declared_muls,
        provenance=TABLE1,
        shifted_product=shifted,
    )
    ext = next_power_extension(entry)
    assert ext.declared_muls == entry.muls  # zero additional multiplications
    assert polynomial_of_register(ext, len(ext.instrs) - 1) == DensePoly((0, 0, 0, 1))


# -- flawed fixtures ---------------------------------------------------------------


def test_flawed_fixtures_fail_oracle_with_right_counts():
    f11 = flawed_length11_chain()
    assert mul_count(f11) == 4
    assert not passes_oracle(f11)
    f26 = flawed_length26_chain()
    assert mul_count(f26) == 6
    assert not passes_oracle(f26)
    assert evaluate(f26, 1) == 30


def test_corrected_counterparts_pass_with_same_counts():
    assert chain_for_small(11).muls == 4
    assert passes_oracle(chain_for_small(11).program)
    assert recurrence_chain(3).muls == 6
    assert passes_oracle(recurrence_chain(3).program)


# -- serialization ------------------------------------------------------------------


def test_chain_json_round_trip_keeps_provenance():
    for entry in (chain_for_small(11), binary_chain(20), recurrence_chain(2)):
        text = chain_to_json(entry)
        again = chain_from_json(text)
        assert again.program == entry.program
        assert again.provenance == entry.provenance
        assert chain_to_json(again) == text
