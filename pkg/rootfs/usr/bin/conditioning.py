"""Small subgraph conditioning constants for valid orientations and short cycles.

lambda_k is the limiting Poisson mean of X_k, mu_k the limit of E(Y X_k) / E Y and
delta_k = mu_k / lambda_k - 1. The variance criterion compares exp(sum lambda_k delta_k^2)
with the limit of E Y^2 / (E Y)^2.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from errors import DomainError, SizeCapError, ThreeflowError
from orientations import count_valid
from pairing_model import (
    DEGREE,
    CycleCountVector,
    count_cycles,
    enumerate_pairings,
    sample_pairing,
    to_multigraph,
)
from seeding import derive_seed

logger = logging.getLogger(__name__)

ExactNumber = Fraction
SSC_LIMIT = 5 / math.sqrt(21)
DEFAULT_MC_JOINT_CAP = 14
JACKKNIFE_BLOCKS = 50
MC_RELATIVE_TOLERANCE = 0.10


def _check_k(k: int) -> None:
    if not isinstance(k, int) or k < 1:
        raise DomainError(f"cycle length must be an integer >= 1, got {k!r}")


def lambda_k(k: int) -> Fraction:
    _check_k(k)
    return Fraction(4**k, 2 * k)


def a_i(k: int, i: int) -> Fraction:
    """Orientations of a k-cycle with exactly i vertices of in-degree 2: 2 C(k, 2i)."""
    _check_k(k)
    if not isinstance(i, int) or i < 0 or 2 * i > k:
        raise DomainError(f"need 0 <= 2i <= k, got k={k}, i={i}")
    return Fraction(2 * math.comb(k, 2 * i))


def a_i_brute(k: int) -> Dict[int, int]:
    """Enumerate all 2^k orientations of a k-cycle, tallied by in-degree-2 count.

    Edge j joins vertex j to vertex j+1 (mod k); bit j set means it points forward.
    """
    _check_k(k)
    tally: Dict[int, int] = {}
    for mask in range(1 << k):
        in_degree = [0] * k
        for j in range(k):
            head = (j + 1) % k if mask >> j & 1 else j
            in_degree[head] += 1
        twos = sum(1 for d in in_degree if d == 2)
        tally[twos] = tally.get(twos, 0) + 1
    return tally


def mu_k(k: int) -> Fraction:
    """(4^k + (-4/5)^k) / 2k, asserted equal to the a_i-sum route."""
    closed = (Fraction(4) ** k + Fraction(-4, 5) ** k) / (2 * k)
    summed = mu_k_from_orientations(k)
    if closed != summed:
        raise ThreeflowError(f"mu_{k}: closed form {closed} != orientation sum {summed}")
    return closed


def mu_k_from_orientations(k: int) -> Fraction:
    """(1/2k) (8/5)^k sum_i a_i (3/2)^(2i)."""
    _check_k(k)
    total = sum(a_i(k, i) * Fraction(9, 4) ** i for i in range(k // 2 + 1))
    return Fraction(8, 5) ** k * total / (2 * k)


def q_even_part(k: int, x: Fraction) -> Fraction:
    """(q(x) + q(-x)) / 2 for q(x) = 2 (1 + x)^k."""
    _check_k(k)
    return (2 * (1 + x) ** k + 2 * (1 - x) ** k) / 2


def delta_k(k: int) -> Fraction:
    """mu_k / lambda_k - 1, which is (-1/5)^k."""
    value = mu_k(k) / lambda_k(k) - 1
    if value != Fraction(-1, 5) ** k:
        raise ThreeflowError(f"delta_{k} = {value} is not (-1/5)^{k}")
    return value


def ssc_partial_sum(K: int) -> Fraction:
    """sum_{k<=K} lambda_k delta_k^2, exactly."""
    _check_k(K)
    return sum((Fraction(4, 25) ** k / (2 * k) for k in range(1, K + 1)), Fraction(0))


def ssc_constant(K: int) -> float:
    """exp(sum_{k<=K} lambda_k delta_k^2); tends to 5/sqrt(21) with ratio 4/25."""
    return math.exp(float(ssc_partial_sum(K)))


def joint_moment_exact(n: int, k: int) -> Fraction:
    """E(Y X_k) / E Y for the pairing model at finite n, from counting (P, C, O) triples.

    The k-cycle C is placed in [n]_k 20^k / 2k ways and oriented in a_i ways with i
    vertices of in-degree 2 (and i of in-degree 0); those 2i vertices each have 3
    completions, and the in/out types of the remaining vertices are chosen freely subject
    to n/2 in-vertices overall.
    """
    if not isinstance(n, int) or n < 2 or n % 2:
        raise DomainError(f"n must be an even integer >= 2, got {n!r}")
    _check_k(k)
    if k > n:
        raise DomainError(f"a {k}-cycle needs at least {k} vertices, n={n}")
    half_points = DEGREE * n // 2
    falling = math.perm(n, k)
    orientation_sum = sum(
        a_i(k, i) * 9**i * math.comb(n - 2 * i, n // 2 - i) for i in range(k // 2 + 1)
    )
    numerator = orientation_sum * 20**k * falling * math.factorial(half_points - k)
    denominator = 2 * k * 5**k * math.comb(n, n // 2) * math.factorial(half_points)
    return numerator / denominator


def joint_moment_brute(n: int, k: int) -> Fraction:
    """E(Y X_k) / E Y by enumerating every pairing (n = 2 only in practice)."""
    weighted = 0
    total = 0
    for p in enumerate_pairings(n):
        y = count_valid(p)
        total += y
        weighted += y * count_cycles(to_multigraph(p), k)[k]
    return Fraction(weighted, total)


@dataclass
class JointMomentEstimate:
    """Ratio estimate sum Y*stat / sum Y with a delete-a-block jackknife error."""

    name: str
    estimate: float
    stderr: float
    trials: int
    target: Optional[float] = None

    def within_tolerance(self, target: Optional[float] = None) -> bool:
        target = self.target if target is None else target
        if target is None:
            raise DomainError(f"no target for {self.name}")
        tolerance = max(MC_RELATIVE_TOLERANCE * abs(target), 3 * self.stderr)
        return abs(self.estimate - target) <= tolerance

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "trials": self.trials,
            "target": self.target,
        }


def _joint_trial(args: Tuple[int, int, int]) -> Tuple[int, Tuple[int, ...]]:
    n, seed, k_max = args
    p = sample_pairing(n, seed)
    y = count_valid(p)
    counts = count_cycles(to_multigraph(p), k_max).counts if y else (0,) * k_max
    return y, counts


def _ratio_with_jackknife(
    weights: np.ndarray, values: np.ndarray, blocks: int
) -> Tuple[float, float]:
    total_w = weights.sum()
    total_v = values.sum()
    if total_w == 0:
        raise DomainError("no sampled pairing had a valid orientation")
    estimate = total_v / total_w
    blocks = max(2, min(blocks, len(weights)))
    edges = np.linspace(0, len(weights), blocks + 1).astype(int)
    leave_out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        w = total_w - weights[lo:hi].sum()
        if w > 0:
            leave_out.append((total_v - values[lo:hi].sum()) / w)
    reps = np.asarray(leave_out, dtype=float)
    m = len(reps)
    stderr = math.sqrt((m - 1) / m * float(((reps - reps.mean()) ** 2).sum())) if m > 1 else 0.0
    return float(estimate), stderr


def mc_joint_moments(
    n: int,
    trials: int,
    seed: int,
    statistics: Dict[str, Callable[[CycleCountVector], int]],
    k_max: int,
    cap: int = DEFAULT_MC_JOINT_CAP,
    workers: int = 1,
) -> Dict[str, JointMomentEstimate]:
    """Estimate E(Y s(X)) / E Y for each named cycle statistic s.

    Every trial draws a pairing from its own derived seed and counts Y exactly, so the
    integer sums do not depend on how trials are spread over workers.
    """
    if n > cap:
        raise SizeCapError("Monte Carlo joint moments with exact Y", n, cap)
    if trials < 2:
        raise DomainError(f"need at least 2 trials, got {trials}")
    jobs = [(n, derive_seed(seed, f"joint/trial:{t}"), k_max) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_joint_trial, jobs, chunksize=256))
    else:
        results = [_joint_trial(job) for job in jobs]
    ys = np.array([y for y, _ in results], dtype=float)
    estimates = {}
    for name, stat in statistics.items():
        values = np.array([y * stat(CycleCountVector(c)) for y, c in results], dtype=float)
        estimate, stderr = _ratio_with_jackknife(ys, values, JACKKNIFE_BLOCKS)
        estimates[name] = JointMomentEstimate(name, estimate, stderr, trials)
        logger.debug(f"n={n} {name}: {estimate:.6g} +/- {stderr:.3g} over {trials} trials")
    return estimates


def mc_joint_moment(
    n: int, trials: int, k: int, seed: int, cap: int = DEFAULT_MC_JOINT_CAP, workers: int = 1
) -> JointMomentEstimate:
    """E(Y X_k) / E Y by simulation, targeted at mu_k."""
    _check_k(k)
    name = f"E[Y X_{k}]/E[Y]"
    result = mc_joint_moments(
        n, trials, seed, {name: lambda x: x[k]}, k_max=k, cap=cap, workers=workers
    )[name]
    result.target = float(mu_k(k))
    return result


def mc_factorial_moment_x1(
    n: int, trials: int, seed: int, cap: int = DEFAULT_MC_JOINT_CAP, workers: int = 1
) -> JointMomentEstimate:
    """E(Y [X_1]_2) / E Y by simulation, targeted at mu_1^2."""
    name = "E[Y [X_1]_2]/E[Y]"
    result = mc_joint_moments(
        n, trials, seed, {name: lambda x: x[1] * (x[1] - 1)}, k_max=1, cap=cap, workers=workers
    )[name]
    result.target = float(mu_k(1) ** 2)
    return result


@dataclass
class CycleMomentRow:
    k: int
    lambda_k: Fraction
    mu_k: Fraction
    delta_k: Fraction
    mu_exact_n: Optional[Fraction] = None
    mc: Optional[JointMomentEstimate] = None

    def to_dict(self) -> Dict:
        row = {
            "k": self.k,
            "lambda_k": _rational(self.lambda_k),
            "mu_k": _rational(self.mu_k),
            "delta_k": _rational(self.delta_k),
            "mu_exact_n": _rational(self.mu_exact_n) if self.mu_exact_n is not None else None,
        }
        if self.mc is not None:
            row.update(mc_estimate=self.mc.estimate, mc_stderr=self.mc.stderr)
        return row


@dataclass
class CycleMomentTable:
    rows: List[CycleMomentRow] = field(default_factory=list)
    n: Optional[int] = None
    trials: int = 0

    COLUMNS = ("k", "lambda_k", "mu_k", "delta_k", "mu_exact_n", "mc_estimate", "mc_stderr")

    def to_dict(self) -> Dict:
        return {"n": self.n, "trials": self.trials, "rows": [r.to_dict() for r in self.rows]}

    def csv_rows(self) -> List[List]:
        return [[r.to_dict().get(c) for c in self.COLUMNS] for r in self.rows]


def _rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def cycle_moment_table(
    k_max: int,
    n: Optional[int] = None,
    trials: int = 0,
    seed: int = 0,
    cap: int = DEFAULT_MC_JOINT_CAP,
    workers: int = 1,
) -> CycleMomentTable:
    """Constants for k <= k_max; with ``n`` also the finite-n exact joint moments and,
    when ``trials`` > 0, their Monte Carlo estimates (evidence only for the general
    joint-moment limit)."""
    _check_k(k_max)
    table = CycleMomentTable(n=n, trials=trials)
    estimates: Dict[str, JointMomentEstimate] = {}
    if n is not None and trials > 0:
        top = min(k_max, n)
        stats = {str(k): (lambda x, k=k: x[k]) for k in range(1, top + 1)}
        estimates = mc_joint_moments(n, trials, seed, stats, k_max=top, cap=cap, workers=workers)
    for k in range(1, k_max + 1):
        row = CycleMomentRow(k, lambda_k(k), mu_k(k), delta_k(k))
        if n is not None and k <= n:
            row.mu_exact_n = joint_moment_exact(n, k)
        if str(k) in estimates:
            row.mc = estimates[str(k)]
            row.mc.target = float(row.mu_k)
        table.rows.append(row)
    return table
