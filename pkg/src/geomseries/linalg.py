"""Applying evaluation plans to dense matrices.

An approximate inverse of A comes from running a series plan over the
matrix ring at B = I - A: the length-N all-ones polynomial in B is the
N-term truncation of the inverse's expansion, valid when the spectral
radius of B is below one.  Any oracle-verified plan computes exactly the
same polynomial as the nested baseline, so both paths agree to rounding
while the fast path spends fewer matrix-matrix multiplications.

Every multiplication goes through one counting wrapper and numpy's
matmul, so Direct/Fast timing comparisons use the same kernel and the
reported counts are the executed ones, not the declared ones.
"""

from __future__ import annotations

import hashlib
import struct
import time
from dataclasses import dataclass

import numpy as np

from .planner import AutoPlanner, plan as build_plan
from .slp import SlpProgram, evaluate, to_json


def plan_digest(program: SlpProgram) -> str:
    """sha256 of the plan's canonical JSON; ties reports to exact programs."""
    return hashlib.sha256(to_json(program).encode()).hexdigest()

_MAGIC = b"GSMX"
_BINARY_VERSION = 1


class ConvergenceError(ValueError):
    """The series precheck failed: spectral radius of I - A is >= 1."""


class _MulCounter:
    __slots__ = ("n",)

    def __init__(self) -> None:
        self.n = 0


class _CountingMatrix:
    """Matrix ring element; multiplication is matmul and is counted."""

    __slots__ = ("a", "counter")

    def __init__(self, a: np.ndarray, counter: _MulCounter) -> None:
        self.a = a
        self.counter = counter

    def __add__(self, other: "_CountingMatrix") -> "_CountingMatrix":
        return _CountingMatrix(self.a + other.a, self.counter)

    def __sub__(self, other: "_CountingMatrix") -> "_CountingMatrix":
        return _CountingMatrix(self.a - other.a, self.counter)

    def __mul__(self, other: "_CountingMatrix") -> "_CountingMatrix":
        self.counter.n += 1
        return _CountingMatrix(self.a @ other.a, self.counter)

    def ring_one(self) -> "_CountingMatrix":
        return _CountingMatrix(np.eye(self.a.shape[0]), self.counter)


@dataclass(frozen=True)
class SpectralRadiusEstimate:
    """Power-iteration estimate; ``converged`` False flags low confidence."""

    value: float
    converged: bool
    iterations: int

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class NeumannReport:
    """Record of one inversion run."""

    n: int
    terms: int
    strategy: str
    matrix_muls: int
    wall_time: float
    residual_fro: float
    spectral_radius_est: float


@dataclass(frozen=True)
class BenchCell:
    """Direct-vs-fast comparison for one (matrix size, series length) cell.

    ``speedup`` compares means; ``speedup_median`` compares medians and is
    the robust figure on machines with noisy neighbors.
    """

    size: int
    terms: int
    direct_muls: int
    fast_muls: int
    fast_method: str
    direct_mean_s: float
    direct_std_s: float
    direct_median_s: float
    fast_mean_s: float
    fast_std_s: float
    fast_median_s: float
    speedup: float
    speedup_median: float
    residual_fro: float
    path_diff_rel: float
    replicates: int
    direct_plan_sha256: str
    fast_plan_sha256: str


def _as_square(a) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def spectral_radius_estimate(
    b, max_iters: int = 200, tol: float = 1e-9
) -> SpectralRadiusEstimate:
    """Power iteration from the normalized all-ones vector.

    Deterministic; reliable for the symmetric matrices this package
    generates.  Non-convergence within max_iters returns the best
    estimate with ``converged=False`` rather than raising.
    """
    m = _as_square(b)
    n = m.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    est = 0.0
    for it in range(1, max_iters + 1):
        w = m @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return SpectralRadiusEstimate(0.0, True, it)
        if abs(norm - est) <= tol * max(norm, 1.0):
            return SpectralRadiusEstimate(norm, True, it)
        est = norm
        v = w / norm
    return SpectralRadiusEstimate(est, False, max_iters)


def residual(a, a_hat) -> float:
    """Frobenius norm of I - A * A_hat."""
    m = _as_square(a)
    h = _as_square(a_hat)
    if m.shape != h.shape:
        raise ValueError(f"dimension mismatch: {m.shape} vs {h.shape}")
    return float(np.linalg.norm(np.eye(m.shape[0]) - m @ h, "fro"))


def random_test_matrix(n: int, seed: int) -> np.ndarray:
    """Symmetric test matrix with eigenvalues drawn uniformly in [0.1, 1.9].

    Built as Q D Q^t with a seeded random orthogonal Q, so the spectral
    radius of I - A is at most 0.9 by construction and the same (n, seed)
    always reproduces the same matrix.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))
    d = rng.uniform(0.1, 1.9, size=n)
    a = (q * d) @ q.T
    return 0.5 * (a + a.T)


def neumann_invert(
    a,
    terms: int,
    plan: SlpProgram | None = None,
    *,
    strategy: str = "auto",
    allow_divergent: bool = False,
    radius_max_iters: int = 200,
    radius_tol: float = 1e-9,
) -> tuple[np.ndarray, NeumannReport]:
    """Approximate inverse from the length-``terms`` series plan at B = I - A.

    Executes exactly the plan's declared number of matrix-matrix
    multiplications (instrumented, and checked).  Refuses matrices whose
    I - A has estimated spectral radius >= 1 unless ``allow_divergent``.
    """
    m = _as_square(a)
    if plan is None:
        report = build_plan(terms, strategy)
        plan = report.program
        strategy_label = report.method
    else:
        strategy_label = strategy
    if plan.series_length != terms:
        raise ValueError(
            f"plan is for length {plan.series_length}, not the requested {terms}"
        )
    n = m.shape[0]
    eye = np.eye(n)
    b = eye - m
    rho = spectral_radius_estimate(b, radius_max_iters, radius_tol)
    if rho.value >= 1.0 and not allow_divergent:
        raise ConvergenceError(
            f"estimated spectral radius of I - A is {rho.value:.6g} >= 1; "
            "the series will not converge (pass allow_divergent to override)"
        )
    counter = _MulCounter()
    start = time.perf_counter()
    result = evaluate(
        plan, _CountingMatrix(b, counter), one=_CountingMatrix(eye, counter)
    )
    wall = time.perf_counter() - start
    if counter.n != plan.declared_muls:
        raise AssertionError(
            f"executed {counter.n} matrix multiplications, plan declared "
            f"{plan.declared_muls}"
        )
    a_hat = result.a
    rep = NeumannReport(
        n=n,
        terms=terms,
        strategy=strategy_label,
        matrix_muls=counter.n,
        wall_time=wall,
        residual_fro=residual(m, a_hat),
        spectral_radius_est=rho.value,
    )
    return a_hat, rep


def _timed_eval(plan: SlpProgram, b: np.ndarray, eye: np.ndarray) -> tuple[np.ndarray, float, int]:
    counter = _MulCounter()
    start = time.perf_counter()
    out = evaluate(plan, _CountingMatrix(b, counter), one=_CountingMatrix(eye, counter))
    return out.a, time.perf_counter() - start, counter.n


def bench(
    sizes,
    terms_list,
    replicates: int = 100,
    seed: int = 0,
    planner: AutoPlanner | None = None,
) -> list[BenchCell]:
    """Direct (nested) vs fast (auto-planned) inversion timings.

    Both paths run on identical seeded matrices with the same matmul
    kernel; one warm-up run per path is excluded and the timed runs
    alternate paths.  Times use the monotonic high-resolution clock.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    planner = planner or AutoPlanner()
    cells = []
    for size in sizes:
        a = random_test_matrix(size, seed=seed * 100003 + size)
        eye = np.eye(size)
        b = eye - a
        for terms in terms_list:
            direct = build_plan(terms, "direct")
            fast = planner.plan(terms)
            d_out, _, d_muls = _timed_eval(direct.program, b, eye)  # warm-up
            f_out, _, f_muls = _timed_eval(fast.program, b, eye)
            d_times = np.empty(replicates)
            f_times = np.empty(replicates)
            for i in range(replicates):
                _, d_times[i], _ = _timed_eval(direct.program, b, eye)
                _, f_times[i], _ = _timed_eval(fast.program, b, eye)
            denom = float(np.linalg.norm(d_out, "fro")) or 1.0
            cells.append(
                BenchCell(
                    size=size,
                    terms=terms,
                    direct_muls=d_muls,
                    fast_muls=f_muls,
                    fast_method=fast.method,
                    direct_mean_s=float(d_times.mean()),
                    direct_std_s=float(d_times.std(ddof=1)) if replicates > 1 else 0.0,
                    direct_median_s=float(np.median(d_times)),
                    fast_mean_s=float(f_times.mean()),
                    fast_std_s=float(f_times.std(ddof=1)) if replicates > 1 else 0.0,
                    fast_median_s=float(np.median(f_times)),
                    speedup=float(d_times.mean() / f_times.mean()),
                    speedup_median=float(np.median(d_times) / np.median(f_times)),
                    residual_fro=residual(a, f_out),
                    path_diff_rel=float(np.linalg.norm(f_out - d_out, "fro")) / denom,
                    replicates=replicates,
                    direct_plan_sha256=plan_digest(direct.program),
                    fast_plan_sha256=plan_digest(fast.program),
                )
            )
    return cells


def save_matrix_csv(path: str, a) -> None:
    m = _as_square(a)
    with open(path, "w") as fh:
        for row in m:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def load_matrix_csv(path: str) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows")
    return np.array(rows, dtype=float)


def save_matrix_binary(path: str, a) -> None:
    """Little-endian format: magic 'GSMX', u32 version, u64 rows, u64 cols,
    then row-major float64 entries."""
    m = np.ascontiguousarray(_as_square(a), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIQQ", _MAGIC, _BINARY_VERSION, m.shape[0], m.shape[1]))
        fh.write(m.tobytes(order="C"))


def load_matrix_binary(path: str) -> np.ndarray:
    header = struct.calcsize("<4sIQQ")
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < header:
        raise ValueError(f"{path}: truncated header")
    magic, version, rows, cols = struct.unpack_from("<4sIQQ", raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _BINARY_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    expect = header + rows * cols * 8
    if len(raw) != expect:
        raise ValueError(f"{path}: expected {expect} bytes, found {len(raw)}")
    data = np.frombuffer(raw, dtype="<f8", offset=header, count=rows * cols)
    return data.reshape(rows, cols).astype(float)


def load_matrix(path: str) -> np.ndarray:
    """CSV when the extension is .csv (case-insensitive), binary otherwise."""
    if path.lower().endswith(".csv"):
        return load_matrix_csv(path)
    return load_matrix_binary(path)


def save_matrix(path: str, a) -> None:
    if path.lower().endswith(".csv"):
        save_matrix_csv(path, a)
    else:
        save_matrix_binary(path, a)


__all__ = [
    "ConvergenceError",
    "SpectralRadiusEstimate",
    "NeumannReport",
    "BenchCell",
    "spectral_radius_estimate",
    "residual",
    "random_test_matrix",
    "neumann_invert",
    "bench",
    "save_matrix_csv",
    "load_matrix_csv",
    "save_matrix_binary",
    "load_matrix_binary",
    "load_matrix",
    "save_matrix",
]
