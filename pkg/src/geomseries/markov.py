"""Residue-chain analysis of mixed-base reduction policies.

Reducing a length N one level at a time maps N to (N - N mod P) / P for
the policy's chosen base P, so the residue of N modulo a fixed modulus M
(divisible by every base) walks a Markov chain: conditioned on the
current residue, the quotient's residue is uniform over the P classes
consistent with the division.  The stationary distribution of that chain
gives the long-run probability of each base, hence the expected
multiplications per level and, after normalizing by the expected bits
removed per level, the asymptotic coefficient in front of log2(N).

All chain data is exact rational.  The stationary solve returns exact
rationals too: small chains are eliminated directly over Fraction; large
ones are solved by p-adic lifting modulo a word-size prime and the
candidate is then *verified* as an exact fixed point, so a returned
distribution is certified regardless of how it was found.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .planner import CostModel, choose_base, default_cost_model, mixed_mul_count


class ReducibleChainError(ValueError):
    """The chain has several closed classes; no unique stationary distribution."""

    def __init__(self, classes: list[tuple[int, ...]]) -> None:
        self.classes = classes
        super().__init__(
            f"chain has {len(classes)} closed recurrent classes: "
            + "; ".join(str(list(c)) for c in classes)
        )


@dataclass(frozen=True)
class ResidueChain:
    """Row-stochastic transition structure over residues mod ``modulus``.

    ``rows[j]`` lists (target, probability) pairs; ``policy[j]`` is the
    (base, per-level multiplications) the planner's rule picks in
    residue class j.
    """

    bases: tuple[int, ...]
    modulus: int
    rows: tuple[tuple[tuple[int, Fraction], ...], ...]
    policy: tuple[tuple[int, int], ...]

    def dense(self) -> list[list[Fraction]]:
        out = [[Fraction(0)] * self.modulus for _ in range(self.modulus)]
        for i, row in enumerate(self.rows):
            for t, p in row:
                out[i][t] += p
        return out


@dataclass(frozen=True)
class StationaryResult:
    """Exact stationary distribution and the derived cost coefficient.

    ``coefficient`` is mean multiplications per level divided by mean
    bits removed per level: the factor in front of log2(N) for large N.
    """

    dist: tuple[Fraction, ...]
    base_probs: dict[int, Fraction]
    mean_cost: Fraction
    avg_base: float
    coefficient: float


def build_chain(
    bases: tuple[int, ...],
    model: CostModel | None = None,
    modulus: int | None = None,
) -> ResidueChain:
    """Chain for the given bases on residues mod lcm(bases) by default.

    A larger modulus (any common multiple) may be passed for sensitivity
    checks; the stationary coefficient must not depend on it.
    """
    bases = tuple(bases)
    if not bases or min(bases) < 2 or len(set(bases)) != len(bases):
        raise ValueError("bases must be distinct integers >= 2")
    model = model or default_cost_model()
    m = math.lcm(*bases)
    if modulus is not None:
        if modulus % m != 0:
            raise ValueError(f"modulus must be a multiple of {m}")
        m = modulus
    rows = []
    policy = []
    for j in range(m):
        base, _, cost = choose_base(j, bases, model)
        policy.append((base, cost))
        step = m // base
        d = j // base
        prob = Fraction(1, base)
        rows.append(tuple(sorted((s * step + d) % m for s in range(base))))
        rows[-1] = tuple((t, prob) for t in rows[-1])
    return ResidueChain(bases, m, tuple(rows), tuple(policy))


# -- stationary distribution -------------------------------------------------


def _strongly_connected(rows) -> list[list[int]]:
    """Iterative Tarjan; components in reverse topological order."""
    n = len(rows)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pi = work[-1]
            if pi == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            targets = rows[v]
            while pi < len(targets):
                w = targets[pi][0]
                pi += 1
                if index[w] == -1:
                    work[-1] = (v, pi)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return comps


def _closed_classes(chain: ResidueChain) -> list[tuple[int, ...]]:
    comps = _strongly_connected(chain.rows)
    comp_of = {}
    for ci, comp in enumerate(comps):
        for v in comp:
            comp_of[v] = ci
    closed = []
    for ci, comp in enumerate(comps):
        if all(comp_of[t] == ci for v in comp for t, _ in chain.rows[v]):
            closed.append(tuple(sorted(comp)))
    return closed


def _verify_fixed_point(chain: ResidueChain, dist: list[Fraction]) -> bool:
    if len(dist) != chain.modulus:
        return False
    if any(p < 0 for p in dist):
        return False
    if sum(dist) != 1:
        return False
    flow = [Fraction(0)] * chain.modulus
    for i, row in enumerate(chain.rows):
        pi = dist[i]
        if pi == 0:
            continue
        for t, p in row:
            flow[t] += pi * p
    return flow == dist


def _solve_fraction(chain: ResidueChain, states: list[int]) -> list[Fraction]:
    """Dense exact elimination of (T^t - I) with a normalization row."""
    m = len(states)
    pos = {s: i for i, s in enumerate(states)}
    a = [[Fraction(0)] * (m + 1) for _ in range(m)]
    for s in states:
        i = pos[s]
        for t, p in chain.rows[s]:
            a[pos[t]][i] += p
        a[i][i] -= 1
    for j in range(m):
        a[m - 1][j] = Fraction(1)
    a[m - 1][m] = Fraction(1)
    for col in range(m):
        pivot = next((r for r in range(col, m) if a[r][col] != 0), None)
        if pivot is None:
            raise ArithmeticError("singular stationary system")
        a[col], a[pivot] = a[pivot], a[col]
        inv = 1 / a[col][col]
        a[col] = [v * inv for v in a[col]]
        for r in range(m):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[col])]
    return [a[i][m] for i in range(m)]


_SOLVE_PRIMES = (2147483647, 2147483629, 2147483587)
_MAX_PADIC_DIGITS = 512
_RECONSTRUCT_CHECKPOINTS = frozenset({8, 16, 32, 64, 96, 128, 192, 256, 384, 512})


def _integer_system(
    chain: ResidueChain, states: list[int]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Integer form of the stationary system after column scaling.

    With y_j = pi_j / P_j the balance equations become integer: row t gets
    +1 for each in-edge and -P_j on the diagonal.  The last balance row is
    replaced by the normalization sum(P_j y_j) = 1.  Returned as COO
    triples plus the per-column bases.
    """
    m = len(states)
    pos = {s: i for i, s in enumerate(states)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[int] = []
    bases = np.empty(m, dtype=np.int64)
    for s in states:
        j = pos[s]
        bases[j] = chain.policy[s][0]
        for t, _ in chain.rows[s]:
            ti = pos[t]
            if ti < m - 1:
                rows.append(ti)
                cols.append(j)
                vals.append(1)
        if j < m - 1:
            rows.append(j)
            cols.append(j)
            vals.append(-int(bases[j]))
        rows.append(m - 1)
        cols.append(j)
        vals.append(int(bases[j]))
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(vals, dtype=np.int64),
        bases,
    )


def _lu_mod_p(dense: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray, np.ndarray] | None:
    """Packed LU with partial pivoting over GF(p); None if singular mod p."""
    a = dense % p
    m = a.shape[0]
    perm = np.arange(m)
    for k in range(m):
        nz = np.nonzero(a[k:, k])[0]
        if nz.size == 0:
            return None
        piv = k + int(nz[0])
        if piv != k:
            a[[k, piv]] = a[[piv, k]]
            perm[[k, piv]] = perm[[piv, k]]
        inv = pow(int(a[k, k]), p - 2, p)
        if k + 1 < m:
            a[k + 1 :, k] = (a[k + 1 :, k] * inv) % p
            factors = a[k + 1 :, k][:, None]
            a[k + 1 :, k + 1 :] = (a[k + 1 :, k + 1 :] - factors * a[k, k + 1 :][None, :]) % p
    inv_diag = np.array([pow(int(a[i, i]), p - 2, p) for i in range(m)], dtype=np.int64)
    return a, perm, inv_diag


def _lu_solve_mod_p(
    lu: np.ndarray, perm: np.ndarray, inv_diag: np.ndarray, p: int, rhs: np.ndarray
) -> np.ndarray:
    m = lu.shape[0]
    y = rhs[perm] % p
    for i in range(1, m):
        s = int(((lu[i, :i] * y[:i]) % p).sum()) % p
        y[i] = (int(y[i]) - s) % p
    x = np.zeros(m, dtype=np.int64)
    for i in range(m - 1, -1, -1):
        s = int(((lu[i, i + 1 :] * x[i + 1 :]) % p).sum()) % p if i + 1 < m else 0
        x[i] = ((int(y[i]) - s) * int(inv_diag[i])) % p
    return x


def _rational_reconstruct(c: int, modulus: int) -> Fraction | None:
    bound = math.isqrt(modulus // 2)
    r0, r1 = modulus, c % modulus
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 == 0:
        return None
    num, den = r1, s1
    if den < 0:
        num, den = -num, -den
    if den == 0 or den > bound or math.gcd(den, modulus) != 1:
        return None
    return Fraction(num, den)


def _dixon_solve(chain: ResidueChain, states: list[int]) -> list[Fraction] | None:
    """Exact rational stationary distribution by p-adic lifting.

    The stationary probabilities of these chains have denominators far
    beyond any fixed set of word-size primes (hundreds of bits already at
    modulus 210), so the solution is lifted digit by digit modulo one
    prime: each digit costs only two triangular solves and one sparse
    integer residual, and reconstruction is attempted at geometrically
    spaced checkpoints until the exact fixed-point check passes.
    """
    m = len(states)
    rows, cols, vals, bases = _integer_system(chain, states)
    dense = np.zeros((m, m), dtype=np.int64)
    np.add.at(dense, (rows, cols), vals)
    rhs0 = np.zeros(m, dtype=np.int64)
    rhs0[m - 1] = 1
    for p in _SOLVE_PRIMES:
        factored = _lu_mod_p(dense, p)
        if factored is None:
            continue
        lu, perm, inv_diag = factored
        digits: list[np.ndarray] = []
        b = rhs0.copy()
        while len(digits) < _MAX_PADIC_DIGITS:
            x = _lu_solve_mod_p(lu, perm, inv_diag, p, b % p)
            digits.append(x)
            bx = np.zeros(m, dtype=np.int64)
            np.add.at(bx, rows, vals * x[cols])
            r = b - bx
            if (r % p).any():
                raise AssertionError("p-adic residual not divisible by the prime")
            b = r // p
            if len(digits) in _RECONSTRUCT_CHECKPOINTS:
                modulus = p ** len(digits)
                cand: list[Fraction] = []
                for j in range(m):
                    acc = 0
                    for d in reversed(digits):
                        acc = acc * p + int(d[j])
                    rec = _rational_reconstruct(acc, modulus)
                    if rec is None:
                        break
                    cand.append(int(bases[j]) * rec)
                else:
                    full = _expand(chain, states, cand)
                    if _verify_fixed_point(chain, full):
                        return cand
        return None
    return None


def _expand(chain: ResidueChain, states: list[int], values: list[Fraction]) -> list[Fraction]:
    full = [Fraction(0)] * chain.modulus
    for s, v in zip(states, values):
        full[s] = v
    return full


_FRACTION_SOLVE_LIMIT = 64
_stationary_cache: dict[ResidueChain, StationaryResult] = {}


def stationary(chain: ResidueChain) -> StationaryResult:
    """Exact stationary distribution and the asymptotic cost coefficient.

    Transient residues get probability zero.  Raises ReducibleChainError
    when more than one closed class exists.  The result is always checked
    to be an exact fixed point before being returned, and is cached per
    chain since large solves are expensive.
    """
    cache_key = chain
    cached = _stationary_cache.get(cache_key)
    if cached is not None:
        return cached
    closed = _closed_classes(chain)
    if len(closed) != 1:
        raise ReducibleChainError(closed)
    states = list(closed[0])

    dist_c: list[Fraction] | None = None
    if len(states) <= _FRACTION_SOLVE_LIMIT:
        dist_c = _solve_fraction(chain, states)
        if not _verify_fixed_point(chain, _expand(chain, states, dist_c)):
            raise ArithmeticError("exact elimination produced a non-fixed point")
    else:
        dist_c = _dixon_solve(chain, states)
        if dist_c is None:
            raise ArithmeticError("could not certify an exact stationary distribution")

    dist = _expand(chain, states, dist_c)
    base_probs: dict[int, Fraction] = {p: Fraction(0) for p in chain.bases}
    mean_cost = Fraction(0)
    mean_bits = 0.0
    for j, pi in enumerate(dist):
        if pi == 0:
            continue
        base, cost = chain.policy[j]
        base_probs[base] += pi
        mean_cost += pi * cost
        mean_bits += float(pi) * math.log2(base)
    avg_base = 2.0 ** mean_bits
    coefficient = float(mean_cost) / mean_bits
    result = StationaryResult(
        dist=tuple(dist),
        base_probs=base_probs,
        mean_cost=mean_cost,
        avg_base=avg_base,
        coefficient=coefficient,
    )
    _stationary_cache[cache_key] = result
    return result


# -- Monte-Carlo cross-check ---------------------------------------------------


def empirical_coefficient_stats(
    bases: tuple[int, ...],
    sample_count: int,
    n_range: tuple[int, int],
    seed: int,
    model: CostModel | None = None,
) -> tuple[float, float]:
    """(mean, standard error) of (muls + 2) / log2(N) over uniform N.

    Sequential and fully determined by the seed, so results do not depend
    on the host's thread count.
    """
    lo, hi = n_range
    if not (2 <= lo <= hi):
        raise ValueError("need 2 <= lo <= hi")
    if sample_count < 2:
        raise ValueError("need at least two samples")
    model = model or default_cost_model()
    credit = model.terminal_credit
    rng = random.Random(seed)
    vals = []
    for _ in range(sample_count):
        n = rng.randint(lo, hi)
        vals.append((mixed_mul_count(n, bases, model) + credit) / math.log2(n))
    mean = sum(vals) / len(vals)
    var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    return mean, math.sqrt(var / len(vals))


def empirical_coefficient(
    bases: tuple[int, ...],
    sample_count: int,
    n_range: tuple[int, int],
    seed: int,
    model: CostModel | None = None,
) -> float:
    """Monte-Carlo estimate of the mixed-policy coefficient; checks stationary().

    Carries a deterministic O(1/log N) finite-size offset (the terminal
    chain is cheaper than the asymptotic rate), so expect agreement with
    the analytic coefficient at the few-percent-of-a-unit level, not at
    the sampling-noise level; empirical_slope_stats removes the offset.
    """
    return empirical_coefficient_stats(bases, sample_count, n_range, seed, model)[0]


def empirical_slope_stats(
    bases: tuple[int, ...],
    sample_count: int,
    exponent_range: tuple[float, float] = (10.0, 40.0),
    seed: int = 0,
    model: CostModel | None = None,
) -> tuple[float, float]:
    """(slope, standard error) of muls against log2(N) over log-uniform N.

    Fitting an intercept absorbs the constant finite-size offset of the
    ratio estimator, so the slope is directly comparable to the
    stationary coefficient at sampling precision.
    """
    lo, hi = exponent_range
    if not (1.0 <= lo < hi):
        raise ValueError("need 1 <= lo < hi exponents")
    if sample_count < 3:
        raise ValueError("need at least three samples")
    model = model or default_cost_model()
    credit = model.terminal_credit
    rng = random.Random(seed)
    xs = []
    ys = []
    for _ in range(sample_count):
        n = max(2, int(2 ** rng.uniform(lo, hi)))
        xs.append(math.log2(n))
        ys.append(mixed_mul_count(n, bases, model) + credit)
    count = len(xs)
    mean_x = sum(xs) / count
    mean_y = sum(ys) / count
    sxx = sum((x - mean_x) ** 2 for x in xs)
    slope = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys)) / sxx
    intercept = mean_y - slope * mean_x
    ss_resid = sum((y - slope * x - intercept) ** 2 for x, y in zip(xs, ys))
    stderr = math.sqrt(ss_resid / (count - 2) / sxx)
    return slope, stderr


__all__ = [
    "ResidueChain",
    "StationaryResult",
    "ReducibleChainError",
    "build_chain",
    "stationary",
    "empirical_coefficient",
    "empirical_coefficient_stats",
    "empirical_slope_stats",
]
