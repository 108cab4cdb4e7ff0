"""First and second moments of Y, the number of valid orientations of a random pairing.

Small n is handled with exact rationals; large n with a signed log-magnitude number
and a stripe-wise evaluation of the sum over the index set I.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterator, List, NamedTuple, Optional, Tuple, Union

import mpmath
import numpy as np
from scipy.special import gammaln, logsumexp

import landscape
from errors import DomainError, SizeCapError, ThreeflowError
from orientations import count_valid
from pairing_model import DEGREE, enumerate_pairings, num_pairings, sample_pairing
from seeding import derive_seed

logger = logging.getLogger(__name__)

ExactNumber = Fraction
DEFAULT_EXACT_MOMENT_CAP = 40
LOG4 = math.log(4.0)

# What the configuration count summed over I estimates. Ordered pairs of orientations
# include the identical pair (k = k00 = k11 = n/2), so the sum is E[Y^2]; the n = 2
# brute force in ``resolve_second_moment_reading`` confirms it.
SUM_OVER_I_ESTIMATES = "E[Y^2]"
READINGS = ("E[Y^2]", "E[Y(Y-1)]")


def _check_even_n(n: int) -> None:
    if not isinstance(n, int) or n < 2 or n % 2:
        raise DomainError(f"n must be an even integer >= 2, got {n!r}")


@dataclass(frozen=True)
class LogNumber:
    """A real number as sign in {-1, 0, 1} and natural log of its magnitude."""

    sign: int
    log_abs: float = 0.0

    @classmethod
    def from_value(cls, x: Union[int, float, Fraction]) -> "LogNumber":
        if x == 0:
            return cls(0)
        if isinstance(x, Fraction):
            log_abs = _log_int(abs(x.numerator)) - _log_int(x.denominator)
        elif isinstance(x, int):
            log_abs = _log_int(abs(x))
        else:
            log_abs = math.log(abs(x))
        return cls(1 if x > 0 else -1, log_abs)

    @classmethod
    def from_log(cls, log_abs: float, sign: int = 1) -> "LogNumber":
        return cls(sign, log_abs) if sign else cls(0)

    def __mul__(self, other: "LogNumber") -> "LogNumber":
        if self.sign == 0 or other.sign == 0:
            return LogNumber(0)
        return LogNumber(self.sign * other.sign, self.log_abs + other.log_abs)

    def __truediv__(self, other: "LogNumber") -> "LogNumber":
        if other.sign == 0:
            raise ZeroDivisionError("LogNumber division by zero")
        if self.sign == 0:
            return LogNumber(0)
        return LogNumber(self.sign * other.sign, self.log_abs - other.log_abs)

    def __neg__(self) -> "LogNumber":
        return LogNumber(-self.sign, self.log_abs)

    def __add__(self, other: "LogNumber") -> "LogNumber":
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        big, small = (self, other) if self.log_abs >= other.log_abs else (other, self)
        gap = small.log_abs - big.log_abs
        if big.sign == small.sign:
            return LogNumber(big.sign, big.log_abs + math.log1p(math.exp(gap)))
        if gap == 0.0:
            return LogNumber(0)
        return LogNumber(big.sign, big.log_abs + math.log1p(-math.exp(gap)))

    def __sub__(self, other: "LogNumber") -> "LogNumber":
        return self + (-other)

    def pow(self, exponent: float) -> "LogNumber":
        if self.sign < 0:
            raise DomainError("real power of a negative LogNumber")
        return LogNumber(self.sign, self.log_abs * exponent) if self.sign else LogNumber(0)

    @property
    def log10(self) -> float:
        return self.log_abs / math.log(10.0) if self.sign else float("-inf")

    def to_float(self) -> float:
        return self.sign * math.exp(self.log_abs) if self.sign else 0.0

    def ratio_to(self, other: "LogNumber") -> float:
        """self / other as a float, computed in log space."""
        return (self / other).to_float()


def _log_int(x: int) -> float:
    # math.log accepts arbitrarily large ints
    return math.log(x)


class IndexVector(NamedTuple):
    """A point (k, k00, k01, k10, k11) of the index set I(n)."""

    k: int
    k00: int
    k01: int
    k10: int
    k11: int

    def in_I(self, n: int) -> bool:
        half = n // 2
        return (
            min(self) >= 0
            and self.k <= half
            and max(self.k00, self.k11) <= self.k
            and max(self.k01, self.k10) <= half - self.k
        )

    def swapped(self) -> "IndexVector":
        """The vector seen with the two orientations' roles exchanged."""
        return IndexVector(self.k, self.k11, self.k10, self.k01, self.k00)

    def scaled(self, n: int) -> Tuple[float, ...]:
        return tuple(x / n for x in self)


@lru_cache(maxsize=None)
def _factorial(m: int) -> int:
    return math.factorial(m)


def _log_matchings(s: float) -> float:
    return float(gammaln(s + 1) - gammaln(s / 2 + 1) - (s / 2) * math.log(2.0))


def enumerate_I(n: int) -> Iterator[IndexVector]:
    """Every member of I(n) once, outer loop on k."""
    _check_even_n(n)
    half = n // 2
    for k in range(half + 1):
        for k00 in range(k + 1):
            for k11 in range(k + 1):
                for k01 in range(half - k + 1):
                    for k10 in range(half - k + 1):
                        yield IndexVector(k, k00, k01, k10, k11)


def index_set_size(n: int) -> int:
    """|I(n)| = sum_k (k+1)^2 (n/2-k+1)^2."""
    _check_even_n(n)
    half = n // 2
    return sum((k + 1) ** 2 * (half - k + 1) ** 2 for k in range(half + 1))


def first_moment_exact(n: int) -> Fraction:
    """E Y = C(n, n/2) 5^n (5n/2)! / M(5n), checked against the closed product form."""
    _check_even_n(n)
    s = DEGREE * n
    by_selection = Fraction(math.comb(n, n // 2) * 5**n * _factorial(s // 2)) / num_pairings(s)
    closed = Fraction(
        _factorial(n) * 5**n * _factorial(s // 2) ** 2 * 2 ** (s // 2),
        _factorial(n // 2) ** 2 * _factorial(s),
    )
    if by_selection != closed:
        raise ThreeflowError(f"first moment forms disagree at n={n}: {by_selection} vs {closed}")
    return closed


def first_moment_log(n: int) -> LogNumber:
    """E Y in log space from log-gamma; usable far beyond the exact cap."""
    _check_even_n(n)
    s = DEGREE * n
    value = (
        gammaln(n + 1)
        - 2 * gammaln(n / 2 + 1)
        + n * math.log(5.0)
        + gammaln(s / 2 + 1)
        - _log_matchings(s)
    )
    return LogNumber.from_log(float(value))


def first_moment_asymptotic(n: int) -> LogNumber:
    """E Y ~ (25/8)^(n/2) sqrt(5)."""
    _check_even_n(n)
    return LogNumber.from_log((n / 2) * math.log(25 / 8) + 0.5 * math.log(5.0))


def configuration_count(n: int, iv: IndexVector) -> int:
    """Number of (pairing, orientation, orientation) triples with index vector ``iv``."""
    _check_even_n(n)
    iv = IndexVector(*iv)
    if not iv.in_I(n):
        raise DomainError(f"{tuple(iv)} is not in I({n})")
    k, k00, k01, k10, k11 = iv
    half = n // 2
    groups = _factorial(n) // (
        _factorial(k00)
        * _factorial(k01)
        * _factorial(k10)
        * _factorial(k11)
        * _factorial(k - k00)
        * _factorial(k - k11)
        * _factorial(half - k - k01)
        * _factorial(half - k - k10)
    )
    special = 5**n * 4 ** (n - k00 - k01 - k10 - k11)
    in_in = n + k + k00 + k11 - k01 - k10
    pairings = _factorial(in_in) * _factorial(DEGREE * n // 2 - in_in)
    return groups * special * pairings


def second_moment_term(n: int, iv: IndexVector) -> Fraction:
    """Contribution of ``iv`` to the second moment: configurations / M(5n)."""
    return Fraction(configuration_count(n, iv)) / num_pairings(DEGREE * n)


def _stripe_log(n: int, k: int) -> float:
    """log of the sum of configuration counts over all of I(n) with first index k.

    The count factorises except through s = k00 + k11 - k01 - k10, so the four
    one-dimensional weight sequences are convolved (in max-shifted linear scale) and
    the pairing factor is applied per value of s.
    """
    half = n // 2
    rest = half - k

    def weights(top: int) -> Tuple[np.ndarray, float]:
        j = np.arange(top + 1)
        logw = -gammaln(j + 1) - gammaln(top - j + 1) - j * LOG4
        shift = float(logw.max())
        return np.exp(logw - shift), shift

    same, same_shift = weights(k)
    cross, cross_shift = weights(rest)
    p_dist = np.convolve(same, same)
    q_dist = np.convolve(cross, cross)
    # index t = p - q + (n - 2k), so the (in,in) count is A = n + k + p - q = 3k + t
    s_dist = np.convolve(p_dist, q_dist[::-1])
    a = 3 * k + np.arange(s_dist.size)
    log_pairings = gammaln(a + 1) + gammaln(DEGREE * n / 2 - a + 1)
    positive = s_dist > 0
    body = logsumexp(np.log(s_dist[positive]) + log_pairings[positive])
    return float(body + 2 * same_shift + 2 * cross_shift)


def _second_moment_stripes(n: int, workers: int = 1) -> List[float]:
    ks = list(range(n // 2 + 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_stripe_log, [n] * len(ks), ks))
    return [_stripe_log(n, k) for k in ks]


def second_moment_log(n: int, workers: int = 1) -> LogNumber:
    """Sum over I(n) in log space. Stripes come back in k order whatever the worker
    count, so the reduction is the same floating-point computation every time."""
    _check_even_n(n)
    stripes = _second_moment_stripes(n, workers)
    constant = float(gammaln(n + 1)) + n * math.log(20.0) - _log_matchings(DEGREE * n)
    return LogNumber.from_log(float(logsumexp(np.asarray(stripes))) + constant)


def second_moment_exact(
    n: int,
    arithmetic: str = "exact",
    cap: int = DEFAULT_EXACT_MOMENT_CAP,
    workers: int = 1,
) -> Union[Fraction, LogNumber]:
    """The sum over I(n) of ``second_moment_term``; see SUM_OVER_I_ESTIMATES."""
    _check_even_n(n)
    if arithmetic == "log":
        return second_moment_log(n, workers)
    if arithmetic != "exact":
        raise DomainError(f"arithmetic must be 'exact' or 'log', got {arithmetic!r}")
    if n > cap:
        raise SizeCapError("exact second moment (use arithmetic='log')", n, cap)
    return _second_moment_fraction(n)


@lru_cache(maxsize=16)
def _second_moment_fraction(n: int) -> Fraction:
    total = sum(configuration_count(n, iv) for iv in enumerate_I(n))
    return Fraction(total) / num_pairings(DEGREE * n)


def second_moment_mp(n: int, prec: int = 128) -> mpmath.mpf:
    """The sum over I(n) with ``prec``-bit mpmath floats, term by term."""
    _check_even_n(n)
    half = n // 2
    with mpmath.workprec(prec):
        fact = [mpmath.factorial(i) for i in range(DEGREE * n + 1)]
        four = mpmath.mpf(4)

        def weight(top: int, j: int):
            return 1 / (fact[j] * fact[top - j] * four**j)

        total = mpmath.mpf(0)
        for k in range(half + 1):
            rest = half - k
            p_dist = [mpmath.mpf(0)] * (2 * k + 1)
            for a in range(k + 1):
                for b in range(k + 1):
                    p_dist[a + b] += weight(k, a) * weight(k, b)
            q_dist = [mpmath.mpf(0)] * (2 * rest + 1)
            for a in range(rest + 1):
                for b in range(rest + 1):
                    q_dist[a + b] += weight(rest, a) * weight(rest, b)
            for p, wp in enumerate(p_dist):
                for q, wq in enumerate(q_dist):
                    in_in = n + k + p - q
                    total += wp * wq * fact[in_in] * fact[DEGREE * n // 2 - in_in]
        matchings = fact[DEGREE * n] / (fact[DEGREE * n // 2] * mpmath.mpf(2) ** (DEGREE * n // 2))
        return +(total * fact[n] * mpmath.mpf(20) ** n / matchings)


def second_moment_asymptotic(n: int) -> LogNumber:
    """E Y^2 ~ (25/8)^n g(z~)(pi n)^(5/2) / sqrt|det B| = (25/sqrt 21)(25/8)^n."""
    _check_even_n(n)
    coefficient = (
        landscape.g_of(landscape.Z_TILDE, n)
        * (math.pi * n) ** 2.5
        / math.sqrt(abs(landscape.DET_B_EXACT))
    )
    return LogNumber.from_log(n * math.log(25 / 8) + math.log(coefficient))


def brute_force_moments(n: int = 2) -> Dict[str, Fraction]:
    """E Y, E Y^2 and E Y(Y-1) by enumerating every pairing (n = 2: 945 pairings)."""
    counts = [count_valid(p) for p in enumerate_pairings(n)]
    size = len(counts)
    return {
        "E[Y]": Fraction(sum(counts), size),
        "E[Y^2]": Fraction(sum(y * y for y in counts), size),
        "E[Y(Y-1)]": Fraction(sum(y * (y - 1) for y in counts), size),
    }


def resolve_second_moment_reading(n: int = 2) -> Optional[str]:
    """Which brute-force moment the sum over I(n) equals exactly, or None."""
    brute = brute_force_moments(n)
    summed = second_moment_exact(n)
    matches = [name for name in READINGS if brute[name] == summed]
    logger.debug(f"sum over I({n}) = {summed}; matches {matches or 'nothing'}")
    return matches[0] if len(matches) == 1 else None


def moment_ratio(n: int, arithmetic: str = "log", workers: int = 1) -> float:
    """E Y^2 / (E Y)^2 at finite n."""
    _check_even_n(n)
    if arithmetic == "exact":
        first = first_moment_exact(n)
        second = second_moment_exact(n)
        if SUM_OVER_I_ESTIMATES == "E[Y(Y-1)]":
            second += first
        return float(second / first**2)
    first_log = first_moment_log(n)
    second_log = second_moment_log(n, workers)
    if SUM_OVER_I_ESTIMATES == "E[Y(Y-1)]":
        second_log = second_log + first_log
    return second_log.ratio_to(first_log * first_log)


MOMENT_QUANTITIES = ("first", "second", "ratio")
FLOAT_LOG10_LIMIT = 300


@dataclass(frozen=True)
class MomentValue:
    """One of E Y, E Y^2 or their ratio at n, next to its large-n target."""

    n: int
    mode: str
    which: str
    value: LogNumber
    target: LogNumber
    rational: Optional[Fraction] = None

    @property
    def rel_err(self) -> float:
        return abs(math.expm1(self.value.log_abs - self.target.log_abs))

    def to_dict(self) -> Dict:
        target = self.target.to_float() if self.target.log10 < FLOAT_LOG10_LIMIT else None
        return {
            "n": self.n,
            "mode": self.mode,
            "which": self.which,
            "value_log10": self.value.log10,
            "value_rational": self.rational,
            "target": target,
            "target_log10": self.target.log10,
            "rel_err": self.rel_err,
        }


def moment_value(
    n: int,
    which: str = "ratio",
    mode: str = "log",
    cap: int = DEFAULT_EXACT_MOMENT_CAP,
    workers: int = 1,
) -> MomentValue:
    """E Y, E Y^2 or E Y^2 / (E Y)^2 at n, with the asymptotic value as target.

    The ratio target is second_moment_asymptotic / first_moment_asymptotic^2, which is
    5 / sqrt(21) for every n.
    """
    _check_even_n(n)
    if which not in MOMENT_QUANTITIES:
        raise DomainError(f"which must be one of {MOMENT_QUANTITIES}, got {which!r}")
    first_target = first_moment_asymptotic(n)
    targets = {
        "first": first_target,
        "second": second_moment_asymptotic(n),
    }
    targets["ratio"] = targets["second"] / (first_target * first_target)
    rational = None
    if mode == "exact":
        first = first_moment_exact(n)
        if which == "first":
            rational = first
        else:
            second = second_moment_exact(n, "exact", cap=cap)
            if SUM_OVER_I_ESTIMATES == "E[Y(Y-1)]":
                second += first
            rational = second if which == "second" else second / first**2
        value = LogNumber.from_value(rational)
    elif mode == "log":
        first_log = first_moment_log(n)
        if which == "first":
            value = first_log
        else:
            second_log = second_moment_log(n, workers)
            if SUM_OVER_I_ESTIMATES == "E[Y(Y-1)]":
                second_log = second_log + first_log
            value = second_log if which == "second" else second_log / (first_log * first_log)
    else:
        raise DomainError(f"mode must be 'exact' or 'log', got {mode!r}")
    return MomentValue(n, mode, which, value, targets[which], rational)


def stirling_gap(n: int, iv: IndexVector) -> float:
    """log(term) - (n f(z) + log g(z, n)) at z = iv / n, for interior ``iv``."""
    term = second_moment_term(n, iv)
    z = landscape.ZVector(*IndexVector(*iv).scaled(n))
    return LogNumber.from_value(term).log_abs - (
        n * landscape.f_of(z) + math.log(landscape.g_of(z, n))
    )


def _count_trial(job: Tuple[int, int]) -> int:
    n, seed = job
    return count_valid(sample_pairing(n, seed))


def mc_first_moment(n: int, trials: int, seed: int, workers: int = 1) -> Tuple[float, float]:
    """Sample mean and standard error of Y over ``trials`` random pairings."""
    _check_even_n(n)
    if trials < 2:
        raise DomainError(f"need at least 2 trials, got {trials}")
    jobs = [(n, derive_seed(seed, f"first/trial:{t}")) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(_count_trial, jobs, chunksize=256))
    else:
        counts = [_count_trial(job) for job in jobs]
    ys = np.array(counts, dtype=float)
    return float(ys.mean()), float(ys.std(ddof=1) / math.sqrt(trials))
