"""Verified low-multiplication chains for small series lengths.

Three chain families are provided:

* hand-tuned chains for lengths {2, 3, 5, 7, 11} (the length-11 entry is
  a corrected variant: a superficially similar published form fails the
  symbolic oracle and is kept here only as a negative fixture);
* a generic parity-rule builder that halves the length each step
  (factor (1 + x^2) when even, 1 + (x + x^2) * f((n-1)/2, x^2) when odd),
  usable for any length >= 2;
* the quadratic-recurrence family over sizes 1, 2, 5, 26, 677, ... where
  each size is the previous one squared plus one and the multiplication
  count merely doubles (2^n - 2 at level n).

Every entry is oracle-checked by the test suite: its program expands
symbolically to the all-ones coefficient vector of its length.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json

from .slp import (
    ADD,
    INPUT,
    MUL,
    ONE,
    SUB,
    Instr,
    ProgramBuilder,
    SlpProgram,
    from_json,
    mul_count,
    to_json,
)

TABLE1 = "TABLE1"
TABLE1_CORRECTED = "TABLE1_CORRECTED"
BINARY_RULE = "BINARY_RULE"
RECURRENCE = "RECURRENCE"

SMALL_SIZES = (2, 3, 5, 7, 11)
SMALL_MULS = {2: 0, 3: 1, 5: 2, 7: 3, 11: 4}

MAX_RECURRENCE_LEVEL = 6
# y(0) = 1, y(n) = y(n-1)^2 + 1
RECURRENCE_SIZES = (1, 2, 5, 26, 677, 458330, 210066388901)


@dataclass(frozen=True)
class RecurrenceIndex:
    """A level of the squared-plus-one size sequence."""

    n: int
    value: int

    def __post_init__(self) -> None:
        if not (0 <= self.n <= MAX_RECURRENCE_LEVEL):
            raise ValueError(f"recurrence level {self.n} outside [0, {MAX_RECURRENCE_LEVEL}]")
        if self.value != RECURRENCE_SIZES[self.n]:
            raise ValueError(
                f"level {self.n} has size {RECURRENCE_SIZES[self.n]}, not {self.value}"
            )

    @classmethod
    def from_level(cls, n: int) -> "RecurrenceIndex":
        if not (0 <= n <= MAX_RECURRENCE_LEVEL):
            raise ValueError(f"recurrence level {n} outside [0, {MAX_RECURRENCE_LEVEL}]")
        return cls(n, RECURRENCE_SIZES[n])


@dataclass
class ChainPieces:
    """What a chain emitter leaves behind on a shared builder.

    ``powers`` maps exponent e -> register holding (local input)^e for
    the powers the chain computed along the way; planners reuse them.
    ``shifted_product`` is the register holding x * f(size, x) when the
    construction produced it, which makes the next power of x free.
    """

    value: int
    powers: dict[int, int] = field(default_factory=dict)
    shifted_product: int | None = None


@dataclass(frozen=True)
class ChainEntry:
    """A finished, self-contained chain for one series length."""

    size: int
    program: SlpProgram
    muls: int
    provenance: str
    powers: dict[int, int] = field(default_factory=dict, compare=False)
    shifted_product: int | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.program.series_length != self.size:
            raise ValueError("program length does not match chain size")
        if self.muls != mul_count(self.program):
            raise ValueError("recorded muls do not match the program")


def _emit_f1(b: ProgramBuilder, x: int) -> ChainPieces:
    return ChainPieces(b.one())


def _emit_f2(b: ProgramBuilder, x: int) -> ChainPieces:
    return ChainPieces(b.add(b.one(), x))


def _emit_f3(b: ProgramBuilder, x: int) -> ChainPieces:
    y = b.mul(x, x)
    return ChainPieces(b.add(b.add(b.one(), x), y), {2: y})


def _emit_f5(b: ProgramBuilder, x: int) -> ChainPieces:
    # 1 + (1 + y)(x + y) with y = x^2
    y = b.mul(x, x)
    t = b.mul(b.add(b.one(), y), b.add(x, y))
    return ChainPieces(b.add(b.one(), t), {2: y})


def _emit_f7(b: ProgramBuilder, x: int) -> ChainPieces:
    # 1 + (x + y)(1 + y + w) with y = x^2, w = y^2
    y = b.mul(x, x)
    w = b.mul(y, y)
    t = b.mul(b.add(x, y), b.add(b.add(b.one(), y), w))
    return ChainPieces(b.add(b.one(), t), {2: y, 4: w})


def _emit_f11(b: ProgramBuilder, x: int) -> ChainPieces:
    # 1 + (x + y)(1 + (1 + w)(y + w)) with y = x^2, w = y^2; the inner
    # factor is the length-5 series in y.
    y = b.mul(x, x)
    w = b.mul(y, y)
    inner = b.mul(b.add(b.one(), w), b.add(y, w))
    t = b.mul(b.add(x, y), b.add(b.one(), inner))
    return ChainPieces(b.add(b.one(), t), {2: y, 4: w})


_SMALL_EMITTERS = {
    1: _emit_f1,
    2: _emit_f2,
    3: _emit_f3,
    5: _emit_f5,
    7: _emit_f7,
    11: _emit_f11,
}


def emit_binary_rule(b: ProgramBuilder, x: int, n: int) -> ChainPieces:
    """Parity-rule chain for any length n >= 1, recursing on x^2.

    Bottoms out at lengths 2 and 3, whichever the halving path reaches.
    Costs 2 multiplications per halving step (the square and the combine).
    """
    if n < 1:
        raise ValueError("length must be >= 1")
    if n == 1:
        return _emit_f1(b, x)
    if n == 2:
        return _emit_f2(b, x)
    if n == 3:
        return _emit_f3(b, x)
    y = b.mul(x, x)
    inner = emit_binary_rule(b, y, n // 2)
    powers = {2: y}
    powers.update({2 * e: r for e, r in inner.powers.items()})
    if n % 2 == 0:
        # (1 + x) f(n/2, x^2); the factor must be 1 + x, not 1 + x^2,
        # or every interior even coefficient is counted twice.
        value = b.mul(b.add(b.one(), x), inner.value)
    else:
        value = b.add(b.one(), b.mul(b.add(x, y), inner.value))
    return ChainPieces(value, powers)


def emit_series_chain(b: ProgramBuilder, x: int, size: int) -> ChainPieces:
    """Best built-in chain for a length: hand-tuned if available, else parity rule."""
    emitter = _SMALL_EMITTERS.get(size)
    if emitter is not None:
        return emitter(b, x)
    return emit_binary_rule(b, x, size)


def emit_recurrence(b: ProgramBuilder, x: int, level: int) -> ChainPieces:
    """Chain for size y(level) of the squared-plus-one sequence.

    One level up from u = f(y(k), x): the register z1 = x * u makes
    x^y(k) = z1 - u + 1 free, the inner series is rebuilt on that power,
    and the results join as 1 + z1 * w.  Two extra multiplications per
    level, so 2^n - 2 in total.
    """
    if level < 1:
        raise ValueError("recurrence level must be >= 1 here")
    if level == 1:
        return _emit_f2(b, x)
    prev_size = RECURRENCE_SIZES[level - 1]
    u = emit_recurrence(b, x, level - 1)
    z1 = b.mul(x, u.value)
    z = b.add(b.one(), z1)
    v = b.sub(z, u.value)  # x^prev_size, no multiplication spent
    w = emit_recurrence(b, v, level - 1)
    t = b.mul(z1, w.value)
    value = b.add(b.one(), t)
    powers = dict(u.powers)
    powers[prev_size] = v
    powers.update({prev_size * e: r for e, r in w.powers.items()})
    return ChainPieces(value, powers)


def _finish_entry(size: int, pieces: ChainPieces, b: ProgramBuilder, provenance: str) -> ChainEntry:
    program = b.finish(pieces.value, size)
    return ChainEntry(
        size=size,
        program=program,
        muls=program.declared_muls,
        provenance=provenance,
        powers=dict(pieces.powers),
        shifted_product=pieces.shifted_product,
    )


def chain_for_small(p: int) -> ChainEntry:
    """Hand-tuned chain for p in {2, 3, 5, 7, 11}.

    Raises ValueError for other sizes; callers fall back to binary_chain.
    """
    if p not in SMALL_SIZES:
        raise ValueError(f"no built-in chain for size {p}; use binary_chain")
    b = ProgramBuilder()
    pieces = _SMALL_EMITTERS[p](b, b.input())
    provenance = TABLE1_CORRECTED if p == 11 else TABLE1
    return _finish_entry(p, pieces, b, provenance)


def binary_chain(n: int) -> ChainEntry:
    """Parity-rule chain for any n >= 2; never worse than n - 2 multiplications."""
    if n < 2:
        raise ValueError("length must be >= 2")
    b = ProgramBuilder()
    pieces = emit_binary_rule(b, b.input(), n)
    return _finish_entry(n, pieces, b, BINARY_RULE)


def binary_rule_muls(n: int) -> int:
    """Multiplication count of binary_chain(n) without building it."""
    if n < 1:
        raise ValueError("length must be >= 1")
    muls = 0
    while n >= 4:
        muls += 2
        n //= 2
    return muls + (1 if n == 3 else 0)


def recurrence_chain(n: int | RecurrenceIndex) -> ChainEntry:
    """Chain for size y(n) with exactly 2^n - 2 multiplications, n <= 6.

    Level 0 is the degenerate size-1 series (the constant 1), the identity
    element for plan composition.  Sizes beyond level 6 have no practical
    evaluation use; they are covered analytically elsewhere.
    """
    level = n.n if isinstance(n, RecurrenceIndex) else n
    if not (0 <= level <= MAX_RECURRENCE_LEVEL):
        raise ValueError(f"recurrence level {level} outside [0, {MAX_RECURRENCE_LEVEL}]")
    b = ProgramBuilder()
    if level == 0:
        pieces = _emit_f1(b, b.input())
    else:
        pieces = emit_recurrence(b, b.input(), level)
    return _finish_entry(RECURRENCE_SIZES[level], pieces, b, RECURRENCE)


def next_power_extension(entry: ChainEntry) -> SlpProgram:
    """Append registers so the last one holds x^size.

    Uses x^n = f(n, x) * (x - 1) + 1, one extra multiplication; when the
    chain already holds the product x * f(n, x), the power comes out of a
    subtraction instead and costs nothing.  The returned program's output
    is unchanged (still the series value); the power sits in the final
    register.
    """
    instrs = list(entry.program.instrs)
    x_reg = next(i for i, ins in enumerate(instrs) if ins.op == INPUT)
    one_reg = next((i for i, ins in enumerate(instrs) if ins.op == ONE), None)
    if one_reg is None:
        one_reg = len(instrs)
        instrs.append(Instr(ONE))
    out = entry.program.output
    if entry.shifted_product is not None:
        s = len(instrs)
        instrs.append(Instr(SUB, entry.shifted_product, out))
        instrs.append(Instr(ADD, s, one_reg))
    else:
        s = len(instrs)
        instrs.append(Instr(SUB, x_reg, one_reg))
        instrs.append(Instr(MUL, out, s))
        instrs.append(Instr(ADD, s + 1, one_reg))
    packed = tuple(instrs)
    return SlpProgram(
        packed,
        out,
        entry.size,
        sum(1 for ins in packed if ins.op == MUL),
    )


def flawed_length11_chain() -> SlpProgram:
    """A plausible-looking 4-multiplication plan for length 11 that is wrong.

    Expands to a vector with stray 2s instead of all ones; kept as a
    negative fixture so the oracle is exercised against a realistic miss.
    """
    b = ProgramBuilder()
    x = b.input()
    y = b.mul(x, x)
    w = b.mul(y, y)
    inner = b.mul(b.add(x, y), b.add(b.one(), w))
    t = b.mul(b.add(x, y), b.add(b.one(), inner))
    return b.finish(b.add(b.one(), t), 11)


def flawed_length26_chain() -> SlpProgram:
    """A 6-multiplication plan for length 26 whose final join is wrong.

    Multiplies the full length-6 prefix into the product instead of the
    shifted one, so the expansion double-counts (it sums to 30 at x = 1).
    The corrected construction is recurrence_chain(3).
    """
    b = ProgramBuilder()
    x = b.input()
    u = _emit_f5(b, x).value
    z = b.add(b.one(), b.mul(x, u))
    v = b.sub(z, u)
    w = _emit_f5(b, v).value
    t = b.mul(z, w)
    return b.finish(t, 26)


def chain_to_json(entry: ChainEntry) -> str:
    """Program JSON plus a provenance tag; round-trips bit-exactly."""
    doc = json.loads(to_json(entry.program))
    doc["provenance"] = entry.provenance
    return json.dumps(doc, separators=(",", ":"))


def chain_from_json(text: str) -> ChainEntry:
    doc = json.loads(text)
    provenance = doc.pop("provenance")
    program = from_json(json.dumps(doc))
    return ChainEntry(
        size=program.series_length,
        program=program,
        muls=program.declared_muls,
        provenance=provenance,
    )


__all__ = [
    "TABLE1",
    "TABLE1_CORRECTED",
    "BINARY_RULE",
    "RECURRENCE",
    "SMALL_SIZES",
    "SMALL_MULS",
    "MAX_RECURRENCE_LEVEL",
    "RECURRENCE_SIZES",
    "RecurrenceIndex",
    "ChainPieces",
    "ChainEntry",
    "chain_for_small",
    "binary_chain",
    "binary_rule_muls",
    "recurrence_chain",
    "next_power_extension",
    "emit_series_chain",
    "emit_binary_rule",
    "emit_recurrence",
    "flawed_length11_chain",
    "flawed_length26_chain",
    "chain_to_json",
    "chain_from_json",
]
