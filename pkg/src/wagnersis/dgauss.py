"""Exact discrete Gaussian sampling over Z and Z^n, smoothing and tail-bound
formula evaluators, and the brute-force / statistical oracles used by tests
and parameter selection.

Sampler design.  ``sample_z`` draws from D_{Z,s,c} (density proportional to
exp(-pi (x-c)^2 / s^2)) by rejection from a proposal that covers all of Z:
a uniform window of half-width K = ceil(1.5 s) around the rounded center,
glued to two geometric tails whose dyadic-rational parameters provably
dominate the Gaussian there.  Every accept/reject comparison is a Bernoulli
test "U < exp(-pi a)" with rational a; it is evaluated in double precision
with a conservative error margin, and escalated to exact rational interval
arithmetic whenever the margin cannot separate U from the probability.  The
sampled distribution therefore carries no floating-point statistical gap.

Widths are carried as exact rationals s^2 (``s_sq``), which keeps widths like
sqrt(2)^i * s0 representable exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
from scipy.stats import chi2 as _chi2_dist

from .errors import (
    BudgetExceeded,
    InsufficientSamples,
    PreconditionViolated,
    WidthTooSmall,
)

# Rational enclosure of pi (60 digits), used by the exact Bernoulli fallback.
_PI_LO = Fraction(
    314159265358979323846264338327950288419716939937510582097494,
    10 ** 59,
)
_PI_HI = _PI_LO + Fraction(1, 10 ** 59)
_LN2 = math.log(2.0)


def _frac(x) -> Fraction:
    """Exact Fraction from int/float/Fraction (floats are dyadic rationals)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(x)  # exact for float


@dataclass(frozen=True)
class GaussParam:
    """Width and center of a discrete Gaussian; width stored as exact s^2."""

    s_sq: Fraction
    c: tuple  # tuple of Fractions; length-1 tuple for scalar use

    def __post_init__(self):
        if self.s_sq <= 0:
            raise PreconditionViolated("width must satisfy s > 0")

    @classmethod
    def make(cls, s=None, c=0, s_sq=None) -> "GaussParam":
        if (s is None) == (s_sq is None):
            raise ValueError("give exactly one of s, s_sq")
        ssq = _frac(s) ** 2 if s is not None else _frac(s_sq)
        cs = tuple(_frac(v) for v in (c if isinstance(c, (tuple, list)) else (c,)))
        return cls(s_sq=ssq, c=cs)

    @property
    def s(self) -> float:
        return math.sqrt(float(self.s_sq))


@dataclass(frozen=True)
class SimilarityBudget:
    """Pointwise-closeness budget: e^{+-delta} slack at quality epsilon."""

    delta: float
    epsilon: float

    def __post_init__(self):
        if self.delta < 0:
            raise PreconditionViolated("delta must satisfy delta >= 0")
        if not (0 < self.epsilon <= 0.5):
            raise PreconditionViolated("epsilon must satisfy 0 < epsilon <= 1/2")


# ---------------------------------------------------------------------------
# Exact Bernoulli(exp(-pi a)) via interval refinement
# ---------------------------------------------------------------------------

def _exp_pos_scaled(x_scaled: int, P: int, upper: bool) -> int:
    """Directed-rounding fixed-point bound on exp(x) for x = x_scaled / 2^P >= 0.

    All-positive Taylor series over integers; floor rounding gives a lower
    bound, ceiling rounding plus a geometric tail majorant an upper bound.
    """
    one = 1 << P
    total = one
    term = one
    k = 0
    if upper:
        while True:
            k += 1
            num = term * x_scaled
            den = one * k
            term = -((-num) // den)
            total += term
            # once the next ratio x/(k+1) <= 1/2, the tail is below `term`
            if 2 * x_scaled <= (k + 1) * one and term <= 2:
                total += term + 1
                break
        return total
    while term:
        k += 1
        term = (term * x_scaled) // (one * k)
        total += term
    return total


def _exp_neg_pi_interval(a: Fraction, prec_bits: int) -> Tuple[Fraction, Fraction]:
    """Rational enclosure of exp(-pi a) for rational a >= 0, via integer
    fixed-point bounds on exp(pi a) and directed-rounded reciprocals."""
    if a == 0:
        return Fraction(1), Fraction(1)
    P = prec_bits
    num, den = a.numerator, a.denominator
    x_lo = (_PI_LO.numerator * num << P) // (_PI_LO.denominator * den)
    x_hi = -((-_PI_HI.numerator * num << P) // (_PI_HI.denominator * den))
    e_hi = _exp_pos_scaled(x_hi, P, upper=True)    # >= exp(pi a) * 2^P
    e_lo = _exp_pos_scaled(x_lo, P, upper=False)   # <= exp(pi a) * 2^P
    scale_sq = 1 << (2 * P)
    p_lo = scale_sq // e_hi                        # floor(2^P / exp_hi) scaled
    p_hi = -((-scale_sq) // e_lo) + 1
    return Fraction(p_lo, 1 << P), Fraction(p_hi, 1 << P)


class _LazyUniform:
    """Uniform U in [0,1) revealed 53 bits at a time."""

    __slots__ = ("num", "bits")

    def __init__(self, num: int, bits: int):
        self.num = num
        self.bits = bits

    def extend(self, rng):
        self.num = (self.num << 53) | rng.getrandbits(53)
        self.bits += 53

    def bounds(self) -> Tuple[Fraction, Fraction]:
        d = 1 << self.bits
        return Fraction(self.num, d), Fraction(self.num + 1, d)


def _decide_exact(premul: Fraction, a: Fraction, u: _LazyUniform, rng) -> bool:
    """Decide premul * U < exp(-pi a) exactly (terminates with prob. 1)."""
    prec = 96
    while True:
        lo, hi = _exp_neg_pi_interval(a, prec)
        u_lo, u_hi = u.bounds()
        if premul * u_hi <= lo:
            return True
        if premul * u_lo >= hi:
            return False
        if (hi - lo) > premul * (u_hi - u_lo):
            prec *= 2
        else:
            u.extend(rng)


# ---------------------------------------------------------------------------
# The sampler
# ---------------------------------------------------------------------------

class _ZSampler:
    """Per-(s^2, c) proposal constants plus the rejection loop."""

    __slots__ = ("s_sq", "c_num", "c_den", "s_sq_f", "c_f", "x0", "K", "W",
                 "wbits", "t_hat", "g_scaled", "g_hat", "p_window", "rel_err")

    def __init__(self, s_sq: Fraction, c_num: int, c_den: int):
        self.s_sq = s_sq
        self.c_num = c_num
        self.c_den = c_den
        self.s_sq_f = float(s_sq)
        self.c_f = c_num / c_den
        s_f = math.sqrt(self.s_sq_f)
        self.x0 = round(self.c_f)
        self.K = max(1, math.ceil(1.5 * s_f))
        self.W = 2 * self.K + 1
        self.wbits = self.W.bit_length()
        # Tail domination: for |x - x0| = K + j we have |x - c| >= K + j - 0.6,
        # hence (x-c)^2 >= (K-0.6)^2 + 2(K-0.6) j and the Gaussian weight there
        # is at most t_hat * g_hat^j for the dyadic bounds below (floats are
        # exact dyadic rationals, so the bounds stay usable in exact tests).
        t_exp = math.pi * (self.K - 0.6) ** 2 / self.s_sq_f
        if t_exp < 700.0:
            self.t_hat = min(1.0, math.exp(-t_exp) * (1.0 + 1e-9))
        else:
            self.t_hat = math.ldexp(1.0, -max(0, int(t_exp / _LN2) - 2))
        g_exp = 2.0 * math.pi * (self.K - 0.6) / self.s_sq_f
        self.g_scaled = min((1 << 40) - 1,
                            int(math.exp(-g_exp) * (1.0 + 1e-9) * (1 << 40)) + 1)
        self.g_hat = self.g_scaled / float(1 << 40)
        tail_total = self.t_hat * self.g_hat / (1.0 - self.g_hat)
        self.p_window = self.W / (self.W + 2.0 * tail_total)
        self.rel_err = 1e-12 * abs(self.c_f) + 1e-9  # libm + center conversion

    def _exact_a(self, x: int) -> Fraction:
        return Fraction(x * self.c_den - self.c_num, self.c_den) ** 2 / self.s_sq

    def _select_window_exact(self, u_sel: float, rng) -> bool:
        tt = Fraction(self.t_hat) * Fraction(self.g_scaled,
                                             (1 << 40) - self.g_scaled)
        p_w = Fraction(self.W) / (self.W + 2 * tt)
        lu = _LazyUniform(int(u_sel * (1 << 53)), 53)
        while True:
            u_lo, u_hi = lu.bounds()
            if u_hi <= p_w:
                return True
            if u_lo >= p_w:
                return False
            lu.extend(rng)

    def draw(self, rng) -> int:
        rnd = rng.random
        rbits = rng.getrandbits
        s_sq_f = self.s_sq_f
        c_f = self.c_f
        x0 = self.x0
        K = self.K
        W = self.W
        wbits = self.wbits
        p_window = self.p_window
        rel_err = self.rel_err
        neg_pi = -math.pi
        exp = math.exp
        while True:
            u_sel = rnd()
            if u_sel < p_window - 1e-11:
                in_window = True
            elif u_sel > p_window + 1e-11:
                in_window = False
            else:
                in_window = self._select_window_exact(u_sel, rng)
            if in_window:
                while True:
                    off = rbits(wbits)
                    if off < W:
                        break
                x = x0 - K + off
                dx = x - c_f
                p = exp(neg_pi * dx * dx / s_sq_f)
                u = rnd()
                margin = rel_err * p + 1e-15
                if u < p - margin:
                    return x
                if u > p + margin:
                    continue
                lu = _LazyUniform(int(u * (1 << 53)), 53)
                if _decide_exact(Fraction(1), self._exact_a(x), lu, rng):
                    return x
                continue
            # Tail branch: geometric offset j >= 1 beyond the window.
            side = 1 if rbits(1) else -1
            j = 1
            while rbits(40) < self.g_scaled:
                j += 1
            x = x0 + side * (K + j)
            dx = x - c_f
            p = exp(neg_pi * dx * dx / s_sq_f)
            premul_f = self.t_hat * self.g_hat ** j
            u = rnd()
            lhs = u * premul_f
            margin = (rel_err + 1e-10 * j) * (p + lhs) + 1e-290
            if premul_f > 0.0 and lhs < p - margin:
                return x
            if premul_f > 0.0 and lhs > p + margin:
                continue
            premul = Fraction(self.t_hat) * Fraction(self.g_scaled, 1 << 40) ** j
            lu = _LazyUniform(int(u * (1 << 53)), 53)
            if _decide_exact(premul, self._exact_a(x), lu, rng):
                return x


_SAMPLER_CACHE: Dict = {}


def _get_sampler(s_sq: Fraction, c_num: int, c_den: int) -> _ZSampler:
    key = (s_sq, c_num, c_den)
    samp = _SAMPLER_CACHE.get(key)
    if samp is None:
        if len(_SAMPLER_CACHE) > 4096:
            _SAMPLER_CACHE.clear()
        samp = _ZSampler(s_sq, c_num, c_den)
        _SAMPLER_CACHE[key] = samp
    return samp


def _draw_z(s_sq: Fraction, c_num: int, c_den: int, rng) -> int:
    """One exact draw from D_{Z, s, c} with s^2 = s_sq and c = c_num/c_den."""
    return _get_sampler(s_sq, c_num, c_den).draw(rng)


def _width_floor_sq(n: int) -> float:
    return math.log(2 * n + 4) / math.pi


def sample_z(param: GaussParam, rng) -> int:
    """Exact draw from D_{Z, s, c}; requires s >= sqrt(ln(6)/pi)."""
    if len(param.c) != 1:
        raise PreconditionViolated("sample_z needs a scalar center")
    if float(param.s_sq) < _width_floor_sq(1) * (1 - 1e-12):
        raise WidthTooSmall(f"s = {param.s:.4f} < sqrt(ln(6)/pi)")
    c = param.c[0]
    return _draw_z(param.s_sq, c.numerator, c.denominator, rng)


def sample_zn(param: GaussParam, n: int, rng) -> tuple:
    """Exact draw from D_{Z^n, s, c}; coordinates independent."""
    if float(param.s_sq) < _width_floor_sq(n) * (1 - 1e-12):
        raise WidthTooSmall(f"s = {param.s:.4f} < sqrt(ln({2 * n + 4})/pi)")
    cs = param.c if len(param.c) == n else param.c * n
    if len(cs) != n:
        raise PreconditionViolated(f"center has length {len(param.c)}, expected {n}")
    return tuple(_draw_z(param.s_sq, c.numerator, c.denominator, rng) for c in cs)


# ---------------------------------------------------------------------------
# Brute-force oracles
# ---------------------------------------------------------------------------

def enum_z() -> Callable:
    """Enumerator for Z: points x with |x - c| <= R."""
    def points(R: float, c: Sequence[float]):
        c0 = float(c[0])
        lo, hi = math.floor(c0 - R), math.ceil(c0 + R)
        return [(float(k),) for k in range(lo, hi + 1)]
    points.dim = 1
    return points


def enum_coset_z(offset) -> Callable:
    """Enumerator for Z + offset."""
    off = float(offset)

    def points(R: float, c: Sequence[float]):
        c0 = float(c[0])
        lo = math.floor(c0 - R - off)
        hi = math.ceil(c0 + R - off)
        return [(k + off,) for k in range(lo, hi + 1)]
    points.dim = 1
    return points


def enum_scaled_zn(alpha, n: int) -> Callable:
    """Enumerator for alpha * Z^n."""
    a = float(alpha)

    def points(R: float, c: Sequence[float]):
        ranges = []
        for ci in c[:n] if len(c) >= n else [c[0]] * n:
            lo = math.floor((float(ci) - R) / a)
            hi = math.ceil((float(ci) + R) / a)
            ranges.append(np.arange(lo, hi + 1) * a)
        grids = np.meshgrid(*ranges, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return [tuple(row) for row in pts]
    points.dim = n
    return points


def enum_qary(A, q: int) -> Callable:
    """Enumerator for the kernel lattice {x in Z^m : A x = 0 mod q}."""
    A = np.asarray(A, dtype=np.int64)
    n, m = A.shape

    def points(R: float, c: Sequence[float]):
        cs = [float(ci) for ci in (c if len(c) == m else [c[0]] * m)]
        axes = [np.arange(math.floor(ci - R), math.ceil(ci + R) + 1, dtype=np.int64)
                for ci in cs]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        ok = np.all(np.mod(pts @ A.T, q) == 0, axis=1)
        return [tuple(int(v) for v in row) for row in pts[ok]]
    points.dim = m
    return points


def rho_bruteforce(enumerator, param: GaussParam, radius: float = None):
    """Sum of exp(-pi ||x-c||^2 / s^2) over enumerated points within radius
    (default 12 s, far beyond double precision).

    Returns (value, rel_tail_bound): the mass outside the radius is at most
    value * rel_tail_bound / (1 - rel_tail_bound), with rel_tail_bound =
    2 * dim * exp(-pi (radius/s)^2).
    """
    s_sq = float(param.s_sq)
    if radius is None:
        radius = 12.0 * math.sqrt(s_sq)
    c = [float(v) for v in param.c]
    pts = enumerator(radius, c)
    if len(pts) > 5_000_000:
        raise BudgetExceeded(f"{len(pts)} points exceeds the oracle budget")
    arr = np.asarray(pts, dtype=float)
    cs = np.asarray(c if arr.shape[1] == len(c) else c * arr.shape[1], dtype=float)
    d2 = ((arr - cs) ** 2).sum(axis=1)
    val = float(np.exp(-math.pi * d2 / s_sq).sum())
    rel = 2.0 * arr.shape[1] * math.exp(-math.pi * radius * radius / s_sq)
    return val, rel


def pmf_bruteforce(enumerator, param: GaussParam, radius: float) -> Dict:
    """Normalized pmf of D over the enumerated points (keys are point tuples,
    scalars for one-dimensional enumerators).  Coverage of the true mass is
    at least 1 - rel_tail_bound from ``rho_bruteforce``."""
    s_sq = float(param.s_sq)
    c = [float(v) for v in param.c]
    pts = enumerator(radius, c)
    if len(pts) > 5_000_000:
        raise BudgetExceeded(f"{len(pts)} points exceeds the oracle budget")
    arr = np.asarray(pts, dtype=float)
    cs = np.asarray(c if arr.shape[1] == len(c) else c * arr.shape[1], dtype=float)
    d2 = ((arr - cs) ** 2).sum(axis=1)
    w = np.exp(-math.pi * d2 / s_sq)
    w /= w.sum()
    if arr.shape[1] == 1:
        keys = [p[0] if isinstance(p[0], float) and not p[0].is_integer() else int(p[0])
                for p in pts]
    else:
        keys = [tuple(int(v) if float(v).is_integer() else float(v) for v in p)
               for p in pts]
    return dict(zip(keys, w.tolist()))


# ---------------------------------------------------------------------------
# Formula evaluators
# ---------------------------------------------------------------------------

def eta_zn_bound(n: int, epsilon: float) -> float:
    """Upper bound sqrt(ln(2n(1+1/eps))/pi) on the smoothing parameter of Z^n."""
    if epsilon <= 0:
        raise PreconditionViolated("epsilon must satisfy epsilon > 0")
    return math.sqrt(math.log(2 * n * (1 + 1 / epsilon)) / math.pi)


def eta_qary_bound(n: int, m: int, q: int, epsilon: float) -> float:
    """High-probability bound sqrt(72 ln(1/eps)/pi) * q^(n/m) on the smoothing
    parameter of the kernel lattice of a random A in Z_q^{n x m}."""
    from .zqlin import is_probable_prime

    if not is_probable_prime(q):
        raise PreconditionViolated("q prime")
    if m < n:
        raise PreconditionViolated("m >= n")
    if q ** (1 - n / m) < 6:
        raise PreconditionViolated("q^(1-n/m) >= 6")
    if epsilon > 1 / (4 * m):
        raise PreconditionViolated("epsilon <= 1/(4m)")
    return math.sqrt(72.0 * math.log(1 / epsilon) / math.pi) * q ** (n / m)


def lambda1_inf_lower_bound(n: int, m: int, q: int, *, check: bool = True) -> float:
    """High-probability lower bound q^(1-n/m) 2^(-n/m) / 3 on lambda_1^infty
    of Lambda_q(A) for random A.

    ``check=False`` skips the validity preconditions and returns the bare
    formula value (useful for spot checks in regimes where the bound is
    below 1 and therefore vacuous)."""
    from .zqlin import is_probable_prime

    if check:
        if not is_probable_prime(q):
            raise PreconditionViolated("q prime")
        if q ** (1 - n / m) < 6:
            raise PreconditionViolated("q^(1-n/m) >= 6")
    return q ** (1 - n / m) * 2 ** (-n / m) / 3


def tail_bound_linf(n: int, R: float) -> float:
    """Bound 2n exp(-pi R^2) on the Gaussian mass outside the R-infinity-ball
    (relative to the full Gaussian mass, width 1; scale R by 1/s otherwise)."""
    if R <= 0:
        raise PreconditionViolated("R > 0")
    return 2.0 * n * math.exp(-math.pi * R * R)


def min_entropy_bound(n: int, epsilon: float) -> float:
    """Bound (1+eps)/(1-eps) 2^-n on the most likely outcome of D_{L,s,c}
    in dimension n, valid for s >= 2 eta_eps(L)."""
    if not (0 <= epsilon < 1):
        raise PreconditionViolated("0 <= epsilon < 1")
    return (1 + epsilon) / (1 - epsilon) * 2.0 ** (-n)


# ---------------------------------------------------------------------------
# Empirical similarity estimation
# ---------------------------------------------------------------------------

@dataclass
class SimilarityResult:
    max_ratio_log: float
    chi2_p: float
    n_bins: int
    bins: List[tuple]  # (key, observed, expected_prob, log_ratio, std_err)

    def excess(self, z: float = 4.0) -> float:
        """max over bins of |log ratio| - z * (per-bin standard error)."""
        return max((abs(lr) - z * se for _, _, _, lr, se in self.bins), default=0.0)


def empirical_similarity(samples: Sequence, pmf: Dict, *, min_expected: float = 25.0,
                         min_samples: int = 10_000) -> SimilarityResult:
    """Estimate the pointwise log-ratio between an empirical sample and an
    exact pmf, plus a chi-square goodness-of-fit p-value.

    Bins are pmf outcomes whose expected count is at least ``min_expected``;
    everything else (including samples outside the pmf support) is pooled
    into one tail cell for the chi-square statistic.
    """
    n = len(samples)
    if n < min_samples:
        raise InsufficientSamples(f"{n} samples < {min_samples}")
    coverage = sum(pmf.values())
    if coverage < 0.9999:
        raise PreconditionViolated("oracle covers >= 99.99% of mass")
    counts: Dict = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    bins = []
    chi_terms = []
    tail_expected = (1.0 - coverage) * n
    tail_observed = 0
    covered_keys = set()
    for key, p in pmf.items():
        exp_count = p * n
        obs = counts.get(key, 0)
        if exp_count >= min_expected:
            covered_keys.add(key)
            log_ratio = math.log(obs / exp_count) if obs > 0 else -math.inf
            se = math.sqrt(max(1e-300, (1.0 - p)) / (n * p))
            bins.append((key, obs, p, log_ratio, se))
            chi_terms.append((obs, exp_count))
        else:
            tail_expected += exp_count
            tail_observed += obs
    for key, obs in counts.items():
        if key not in pmf:
            tail_observed += obs
    dof = len(chi_terms) - 1
    stat = sum((o - e) ** 2 / e for o, e in chi_terms)
    if tail_expected >= 5.0:
        stat += (tail_observed - tail_expected) ** 2 / tail_expected
        dof += 1
    p_value = float(_chi2_dist.sf(stat, dof)) if dof >= 1 else 1.0
    max_ratio = max((abs(lr) for _, _, _, lr, _ in bins), default=0.0)
    return SimilarityResult(max_ratio_log=max_ratio, chi2_p=p_value,
                            n_bins=len(bins), bins=bins)


# ---------------------------------------------------------------------------
# Brute-force smoothing certification (tiny lattices only)
# ---------------------------------------------------------------------------

def _theta(t: float) -> float:
    """sum over k in Z of exp(-pi t^2 k^2)."""
    if t <= 0:
        raise PreconditionViolated("t > 0")
    acc = 1.0
    k = 1
    while True:
        term = 2.0 * math.exp(-math.pi * t * t * k * k)
        acc += term
        if term < 1e-18:
            return acc
        k += 1


def eta_scaled_zn_bruteforce(alpha, n: int, epsilon: float,
                             s_hi: float = 1e9) -> float:
    """Certified upper bound on eta_eps(alpha Z^n) by bisection on the exact
    dual series (dual lattice is (1/alpha) Z^n)."""
    a = float(alpha)

    def dual_rho_minus_one(s: float) -> float:
        return _theta(s / a) ** n - 1.0

    lo, hi = 1e-9, s_hi
    if dual_rho_minus_one(hi) > epsilon:
        raise BudgetExceeded("eta above search bound")
    for _ in range(200):
        mid = (lo + hi) / 2
        if dual_rho_minus_one(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return hi


def eta_zn_bruteforce(n: int, epsilon: float) -> float:
    return eta_scaled_zn_bruteforce(1.0, n, epsilon)


def eta_qary_bruteforce(A, q: int, epsilon: float, s_hi: float = 1e6) -> float:
    """Certified upper bound on eta_eps of the kernel lattice of A mod q.

    The dual is (1/q) Lambda_q(A); its vectors are enumerated inside a box
    whose residual tail is bounded by the infinity-norm tail lemma and folded
    into the certificate."""
    A = np.asarray(A, dtype=np.int64)
    n, m = A.shape
    if q ** n > 1 << 20:
        raise BudgetExceeded("syndrome space too large for certification")
    syn = np.zeros((q ** n, n), dtype=np.int64)
    rem = np.arange(q ** n, dtype=np.int64)
    for j in range(n - 1, -1, -1):
        syn[:, j] = rem % q
        rem //= q
    powers = q ** np.arange(m, dtype=np.int64)
    residue_codes = np.unique(np.mod(syn @ A, q) @ powers)

    def dual_rho_minus_one(s: float) -> float:
        # rho_{1/s}((1/q) Lambda_q(A) \ 0) = sum exp(-pi s^2 ||v/q||^2)
        R = max(2.0, math.sqrt(math.log(1e20) / math.pi) / (s / q))
        R = min(R, 60.0 * q)
        axes = [np.arange(-math.ceil(R), math.ceil(R) + 1, dtype=np.int64)] * m
        if (2 * math.ceil(R) + 1) ** m > 5_000_000:
            raise BudgetExceeded("dual enumeration too large")
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        ok = np.isin(np.mod(pts, q) @ powers, residue_codes)
        pts = pts[ok]
        d2 = (pts.astype(float) ** 2).sum(axis=1) / (q * q)
        total = float(np.exp(-math.pi * s * s * d2).sum())
        tail_rel = 2.0 * m * math.exp(-math.pi * (R / q * s) ** 2)
        if tail_rel >= 0.5:
            return math.inf
        return total * (1 + 2 * tail_rel) - 1.0

    lo, hi = 1e-6, s_hi
    if dual_rho_minus_one(hi) > epsilon:
        raise BudgetExceeded("eta above search bound")
    for _ in range(80):
        mid = (lo + hi) / 2
        if dual_rho_minus_one(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return hi
