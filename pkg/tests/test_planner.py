import math
import random
from concurrent.futures import ThreadPoolExecutor

import pytest

from geomseries import chains
from geomseries.planner import (
    AutoPlanner,
    CostModel,
    Strategy,
    choose_base,
    compose,
    default_cost_model,
    mixed_mul_count,
    plan,
    plan_auto,
    plan_direct,
    plan_mixed,
    plan_prime_power,
    plan_recurrence,
    predicted_cost,
)
from geomseries.slp import (
    DensePoly,
    ProgramError,
    eval_poly_oracle,
    mul_count,
    passes_oracle,
)


# -- cost model ---------------------------------------------------------------


def test_cost_model_pins_base_two_and_three():
    m = default_cost_model()
    assert m.cost(2, 0) == m.cost(2, 1) == 2
    assert m.cost(3, 0) == m.cost(3, 1) == 3
    assert m.cost(3, 2) == 4


def test_cost_model_zero_residue_is_cheapest():
    m = default_cost_model()
    for p in (2, 3, 5, 7, 11, 13):
        base_cost = m.cost(p, 0)
        for r in range(p):
            assert m.cost(p, r) >= base_cost


def test_cost_model_validates_inputs():
    m = CostModel()
    with pytest.raises(ValueError):
        m.cost(1, 0)
    with pytest.raises(ValueError):
        m.cost(3, 3)


def test_choose_base_prefers_larger_on_exact_tie():
    # cost(4, 0) = 4 against cost(2, 0) = 2: identical per-bit cost
    m = default_cost_model()
    assert m.cost(4, 0) == 4
    base, residue, _ = choose_base(16, (4, 2), m)
    assert base == 4 and residue == 0


def test_choose_base_follows_three_or_two_rule():
    m = default_cost_model()
    for n in range(20, 80):
        base, _, _ = choose_base(n, (3, 2), m)
        assert base == (3 if n % 3 in (0, 1) else 2)


# -- strategies ---------------------------------------------------------------


def test_strategy_parsing():
    assert Strategy.parse("auto").kind == "auto"
    assert Strategy.parse("prime:5") == Strategy("prime_power", base=5)
    assert Strategy.parse("mixed:11,7,5,3,2").bases == (11, 7, 5, 3, 2)
    assert Strategy.parse("mixed").bases == (11, 7, 5, 3, 2)
    with pytest.raises(ValueError):
        Strategy.parse("nonsense")
    with pytest.raises(ValueError):
        Strategy("mixed", bases=(3, 3))
    with pytest.raises(ValueError):
        Strategy("prime_power", base=1)


# -- composition ---------------------------------------------------------------


def _extended(entry: chains.ChainEntry):
    prog = chains.next_power_extension(entry)
    return prog, len(prog.instrs) - 1


def test_compose_two_length_five_chains():
    e5 = chains.chain_for_small(5)
    left, power = _extended(e5)
    product = compose(left, e5.program, power)
    assert product.series_length == 25
    assert product.declared_muls == 6  # 2 + 1 + 2 + 1
    assert passes_oracle(product)


def test_compose_identity_factor_adds_nothing():
    e1 = chains.recurrence_chain(0)  # length 1
    e7 = chains.chain_for_small(7)
    # x^1 is just the input register of the left program
    x_reg = next(
        i for i, ins in enumerate(e1.program.instrs) if ins.op == "INPUT"
    )
    out = compose(e1.program, e7.program, x_reg)
    assert out.series_length == 7
    assert out.declared_muls == e7.muls
    assert passes_oracle(out)


def test_compose_two_three_gives_six_with_three_muls():
    e2 = chains.chain_for_small(2)
    left, power = _extended(e2)
    out = compose(left, chains.chain_for_small(3).program, power)
    assert out.series_length == 6
    assert out.declared_muls == 3
    assert passes_oracle(out)


def test_compose_associative_in_effect():
    def entry_for(program, size):
        return chains.ChainEntry(
            size=size,
            program=program,
            muls=program.declared_muls,
            provenance=chains.BINARY_RULE,
        )

    e2, e3, e5 = (chains.chain_for_small(p) for p in (2, 3, 5))
    left, pw = _extended(e2)
    f6 = compose(left, e3.program, pw)
    left6, pw6 = _extended(entry_for(f6, 6))
    grouping_a = compose(left6, e5.program, pw6)

    left3, pw3 = _extended(e3)
    f15 = compose(left3, e5.program, pw3)
    left2, pw2 = _extended(e2)
    grouping_b = compose(left2, f15, pw2)

    assert grouping_a.series_length == grouping_b.series_length == 30
    assert grouping_a.declared_muls == grouping_b.declared_muls
    assert eval_poly_oracle(grouping_a) == eval_poly_oracle(grouping_b)
    assert passes_oracle(grouping_a)


def test_compose_validates_power_register():
    e5 = chains.chain_for_small(5)
    with pytest.raises(ProgramError):
        compose(e5.program, e5.program, 10**6)


# -- prime powers ----------------------------------------------------------------


def test_prime_power_examples():
    assert plan_prime_power(5, 3).muls == 10  # N = 125
    assert plan_prime_power(2, 10).muls == 18  # N = 1024
    assert plan_prime_power(3, 2).muls == 4  # N = 9


def test_prime_power_closed_form_is_exact():
    for p in (2, 3, 5, 7, 11):
        per_level = chains.SMALL_MULS[p] + 2
        e = 1
        while p**e <= 4096:
            rep = plan_prime_power(p, e)
            assert rep.muls == per_level * e - 2
            assert rep.n == p**e
            assert passes_oracle(rep.program)
            e += 1


def test_prime_power_zero_exponent_is_identity_plan():
    rep = plan_prime_power(5, 0)
    assert rep.n == 1 and rep.muls == 0
    assert eval_poly_oracle(rep.program) == DensePoly.one()


def test_prime_power_fallback_base_without_builtin_chain():
    rep = plan_prime_power(13, 2)
    assert rep.n == 169
    assert rep.muls == (chains.binary_rule_muls(13) + 2) * 2 - 2
    assert passes_oracle(rep.program)


def test_prime_power_trace_shape():
    rep = plan_prime_power(5, 3)
    assert rep.reduction_trace == ((125, 5, 0), (25, 5, 0))


# -- mixed -----------------------------------------------------------------------


def test_mixed_base_two_step_chosen_for_two_mod_three():
    rep = plan_mixed(8, (3, 2))
    assert rep.reduction_trace[0] == (8, 2, 0)
    assert passes_oracle(rep.program)


def test_mixed_length_one_is_empty_plan():
    rep = plan_mixed(1, (3, 2))
    assert rep.muls == 0
    assert eval_poly_oracle(rep.program) == DensePoly.one()


def test_mixed_six_uses_base_three_then_terminal_two():
    rep = plan_mixed(6, (3, 2))
    assert rep.reduction_trace == ((6, 3, 0),)
    assert rep.muls == 3
    assert eval_poly_oracle(rep.program) == DensePoly.all_ones(6)


def test_mixed_count_walker_matches_built_plans():
    model = default_cost_model()
    for n in range(1, 1200):
        assert mixed_mul_count(n, model=model) == plan_mixed(n, model=model).muls
    rng = random.Random(3)
    for _ in range(40):
        n = rng.randint(10**4, 10**6)
        assert mixed_mul_count(n, model=model) == plan_mixed(n, model=model).muls
    for bases in ((3, 2), (5, 2), (7,), (5,)):
        for n in range(1, 300):
            assert mixed_mul_count(n, bases, model) == plan_mixed(n, bases, model).muls


def test_mixed_trace_monotone_and_consistent():
    for n in (97, 500, 2310, 4096):
        rep = plan_mixed(n)
        lengths = [step[0] for step in rep.reduction_trace]
        assert all(a > b for a, b in zip(lengths, lengths[1:]))
        for (nk, base, residue), nxt in zip(rep.reduction_trace, lengths[1:]):
            assert nxt == (nk - residue) // base
        assert rep.muls == mul_count(rep.program)


def test_mixed_handles_base_larger_than_length():
    rep = plan_mixed(4, (7,))
    assert rep.muls == 2  # falls back to the parity-rule chain for 4
    assert passes_oracle(rep.program)


def test_mixed_rejects_bad_inputs():
    with pytest.raises(ValueError):
        plan_mixed(0)
    with pytest.raises(ValueError):
        plan(10, Strategy("mixed", bases=(2, 2)))


def test_mixed_fuzz_over_unusual_base_sets():
    # sets without base 2 force the expensive-residue templates
    from geomseries.slp import evaluate

    rng = random.Random(2024)
    pool = [(7, 5), (11, 3), (13, 7), (5, 3), (11,), (9, 2), (13, 11, 7), (6, 5, 2)]
    for _ in range(120):
        bases = rng.choice(pool)
        n = rng.randint(1, 2500)
        rep = plan_mixed(n, bases)
        assert passes_oracle(rep.program), (n, bases)
        assert rep.muls == mixed_mul_count(n, bases), (n, bases)
        assert evaluate(rep.program, 1) == n


# -- recurrence -------------------------------------------------------------------


def test_recurrence_plan_examples():
    assert plan_recurrence(26).muls == 6
    assert plan_recurrence(677).muls == 14
    assert plan_recurrence(676).muls == 14  # 26^2 via one cascade level
    assert passes_oracle(plan_recurrence(676).program)


def test_recurrence_plan_rejects_non_powers():
    with pytest.raises(ValueError):
        plan_recurrence(27)


# -- auto ---------------------------------------------------------------------------


def test_auto_reproduces_headline_counts(auto_planner):
    for n, want in ((5, 2), (7, 3), (11, 4), (25, 6), (26, 6), (677, 14)):
        rep = auto_planner.plan(n)
        assert rep.muls == want, (n, rep.muls)
        assert passes_oracle(rep.program)


def test_auto_never_loses_to_binary(auto_planner):
    for n in range(2, 2049):
        assert auto_planner.plan(n).muls <= plan(n, "binary").muls


def test_auto_oracle_sweep_medium(auto_planner):
    for n in range(1, 513):
        for label in ("auto", "binary", "ternary", "mixed:11,7,5,3,2"):
            rep = auto_planner.plan(n) if label == "auto" else plan(n, label)
            assert passes_oracle(rep.program), (n, label)
            assert rep.muls == mul_count(rep.program)


def test_auto_identical_results_across_threads():
    planner = AutoPlanner()
    with ThreadPoolExecutor(max_workers=8) as pool:
        counts = list(pool.map(lambda _: planner.plan(600).muls, range(16)))
    assert len(set(counts)) == 1


def test_plan_dispatch_and_labels():
    assert plan(9, "ternary").muls == 4
    assert plan(9, "direct").muls == 7
    assert plan(1024, "prime:2").muls == 18
    assert plan(26, "recurrence").muls == 6
    with pytest.raises(ValueError):
        plan(10, "prime:3")


def test_direct_plan_is_baseline():
    for n in (1, 2, 5, 9, 40):
        rep = plan_direct(n)
        assert rep.muls == max(n - 2, 0)
        assert passes_oracle(rep.program)
        assert rep.predicted == float(max(n - 2, 0))


# -- predictions ----------------------------------------------------------------


def test_predicted_cost_prime_power_five():
    for e in (2, 3, 5):
        n = 5**e
        got = predicted_cost(Strategy("prime_power", base=5), n)
        assert got == pytest.approx(4 * math.log2(n) / math.log2(5) - 2, abs=1e-9)
        assert got == pytest.approx(plan_prime_power(5, e).muls, abs=1e-9)


def test_predicted_cost_prime_power_eleven_coefficient():
    got = predicted_cost(Strategy("prime_power", base=11), 11**3)
    coefficient = (got + 2) / math.log2(11**3)
    assert coefficient == pytest.approx(6 / math.log2(11), abs=1e-12)
    assert 1.73 < coefficient < 1.74


def test_predicted_cost_recurrence_677_is_exactly_14():
    assert predicted_cost(Strategy("recurrence"), 677) == pytest.approx(14.0)


def test_predicted_cost_binary_and_ternary():
    assert predicted_cost("binary", 1024) == pytest.approx(18.0)
    assert predicted_cost("ternary", 729) == pytest.approx(3 * 6 - 2)


def test_predicted_cost_mixed_small_bases():
    got = predicted_cost(Strategy("mixed", bases=(3, 2)), 2**20)
    assert got == pytest.approx(1.924532421278124 * 20 - 2, abs=1e-6)


def test_predicted_cost_errors():
    with pytest.raises(ValueError):
        predicted_cost("auto", 100)
    with pytest.raises(ValueError):
        predicted_cost("binary", 0)
    with pytest.raises(ValueError):
        predicted_cost(Strategy("recurrence"), 27)
