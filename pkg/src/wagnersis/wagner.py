"""Bucket-and-combine list processing and the full iterative samplers.

Three run modes share the machinery:

* ``provable-gaussian``: 3^r N exact Gaussian initial draws, disjoint pairing
  (each input used at most once), per-stage output exactly one third of the
  input, strict width preconditions.
* ``heuristic-gaussian``: 3N sparse ternary initial vectors, within-bucket
  pairs with reuse, optional early abort leaving some rows lifted to plain
  centered residues.
* ``naive-rounding``: the warm-up variant with ternary initial vectors and
  rounded bucketing instead of Gaussian randomized lifting.

Internally lists are int64 matrices (one vector per row) with exact-integer
fallbacks when an overflow bound cannot be certified; the object-level
``bucket_and_combine`` delegates to the same pairing code.
"""

from __future__ import annotations

import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import estimator as _estimator
from .chain import StageDescriptor, StagedVector, build_chain, combine_pair
from .dgauss import (
    _draw_z,
    _width_floor_sq,
    eta_qary_bruteforce,
    eta_scaled_zn_bruteforce,
    eta_zn_bruteforce,
)
from .errors import (
    BlockSumMismatch,
    BudgetExceeded,
    Infeasible,
    InfeasibleSchedule,
    InsufficientInputs,
    PreconditionViolated,
    WidthTooSmall,
)
from .rngutil import derive_np_rng, derive_rng
from .zqlin import SisInstance, centered, matvec_mod

MODE_PROVABLE = "provable-gaussian"
MODE_HEURISTIC = "heuristic-gaussian"
MODE_NAIVE = "naive-rounding"

_INT64_SAFE = 1 << 62


@dataclass(frozen=True)
class Schedule:
    """All run parameters for one sampler invocation."""

    mode: str
    r: int
    N: int
    p: tuple
    b: tuple
    s0_sq: Optional[Fraction] = None   # exact s0^2; None for naive mode
    epsilon: float = 2.0 ** -10
    reuse: bool = False

    def __post_init__(self):
        if self.mode not in (MODE_PROVABLE, MODE_HEURISTIC, MODE_NAIVE):
            raise InfeasibleSchedule(f"unknown mode {self.mode!r}")
        if len(self.p) != self.r or len(self.b) != self.r:
            raise InfeasibleSchedule("need r moduli and r block sizes")
        if self.N < 1 or self.r < 1:
            raise InfeasibleSchedule("need N >= 1 and r >= 1")

    @property
    def s0(self) -> Optional[float]:
        return None if self.s0_sq is None else math.sqrt(float(self.s0_sq))

    def width_sq(self, i: int) -> Fraction:
        """Exact squared width at the start of stage i (1-based): 2^(i-1) s0^2."""
        return self.s0_sq * (2 ** (i - 1))


@dataclass
class RunStats:
    """Observability record for one sampler run."""

    mode: str
    list_sizes: List[int] = field(default_factory=list)
    stage_seconds: List[float] = field(default_factory=list)
    bucket_histograms: List[List[Tuple[int, int]]] = field(default_factory=list)
    nonzero_fraction: float = 0.0
    max_linf: int = 0
    max_l2: float = 0.0

    def as_dict(self) -> dict:
        return {
            "mode": self.mode,
            "list_sizes": list(self.list_sizes),
            "stage_seconds": [round(t, 6) for t in self.stage_seconds],
            "bucket_histograms": [[list(x) for x in h] for h in self.bucket_histograms],
            "nonzero_fraction": self.nonzero_fraction,
            "max_linf": self.max_linf,
            "max_l2": self.max_l2,
        }


# ---------------------------------------------------------------------------
# Pairing
# ---------------------------------------------------------------------------

def pair_indices_disjoint(labels: Sequence, cap: Optional[int]) -> List[Tuple[int, int]]:
    """Disjoint pairing: walk the list in insertion order; whenever the bucket
    of the current element holds two or more unused elements, pair and remove
    its first two (insertion order).  Stops at ``cap`` pairs if given."""
    from collections import deque

    buckets = {}
    for idx, lab in enumerate(labels):
        buckets.setdefault(lab, deque()).append(idx)
    out = []
    for lab in labels:
        if cap is not None and len(out) >= cap:
            break
        b = buckets[lab]
        if len(b) >= 2:
            i1 = b.popleft()
            i2 = b.popleft()
            out.append((i1, i2))
    return out


def pair_indices_reuse(labels: Sequence, cap: int) -> List[Tuple[int, int]]:
    """All within-bucket pairs, buckets in first-occurrence order, capped."""
    members = {}
    order = []
    for idx, lab in enumerate(labels):
        got = members.get(lab)
        if got is None:
            members[lab] = [idx]
            order.append(lab)
        else:
            got.append(idx)
    out = []
    for lab in order:
        mem = members[lab]
        for a in range(len(mem)):
            for b in range(a + 1, len(mem)):
                out.append((mem[a], mem[b]))
                if len(out) >= cap:
                    return out
    return out


def _occupancy_histogram(labels: Sequence) -> List[Tuple[int, int]]:
    from collections import Counter

    occ = Counter(Counter(labels).values())
    return sorted(occ.items())


def bucket_and_combine(stage: StageDescriptor, staged: Sequence[StagedVector],
                       out_cap: int, *, reuse: bool = False):
    """Pair same-coset vectors and subtract them into the stage sublattice.

    Without reuse this requires at least 3 p^b inputs and then always returns
    exactly ``out_cap`` = floor(len/3) vectors (pigeonhole over the cosets);
    with reuse every within-bucket pair is formed, capped at ``out_cap``.
    """
    n_in = len(staged)
    if not reuse and n_in < 3 * stage.p ** stage.b:
        raise InsufficientInputs(
            f"{n_in} inputs < 3 p^b = {3 * stage.p ** stage.b}")
    labels = [sv.label for sv in staged]
    pairs = (pair_indices_reuse(labels, out_cap) if reuse
             else pair_indices_disjoint(labels, out_cap))
    return [combine_pair(staged[i], staged[j]) for i, j in pairs]


# ---------------------------------------------------------------------------
# Array-level stage processing (hot path)
# ---------------------------------------------------------------------------

def _lift_batch(stage: StageDescriptor, X: np.ndarray) -> np.ndarray:
    """y_last = -(A'_new @ x_top) for every row of X, exact integers."""
    top = X[:, : stage.m_minus_n]
    a = stage.a_new
    max_x = int(np.abs(top).max()) if top.size else 0
    if a.dtype == np.int64 and X.dtype == np.int64 and \
            stage.m_minus_n * (stage.q - 1) * max(1, max_x) < _INT64_SAFE:
        return -(top @ a.T)
    out = np.empty((X.shape[0], stage.b), dtype=object)
    for r in range(X.shape[0]):
        for i in range(stage.b):
            out[r, i] = -sum(int(a[i, j]) * int(top[r, j])
                             for j in range(stage.m_minus_n))
    return out


def _gaussian_offsets(stage: StageDescriptor, Y: np.ndarray, width_sq: Fraction,
                      seed_path: tuple, seed, threads: int) -> np.ndarray:
    """Sample k ~ D_{Z^b, (p/q) s, -(p/q) y} rowwise via the exact sampler."""
    p, q = stage.p, stage.q
    scaled = width_sq * p * p / (q * q)
    rows, b = Y.shape

    def work(chunk_id: int, lo: int, hi: int) -> np.ndarray:
        rng = derive_rng(seed, *seed_path, "chunk", chunk_id)
        out = np.empty((hi - lo, b), dtype=np.int64)
        for r in range(lo, hi):
            for i in range(b):
                out[r - lo, i] = _draw_z(scaled, -p * int(Y[r, i]), q, rng)
        return out

    if threads <= 1 or rows < 4096:
        return work(0, 0, rows)
    bounds = np.linspace(0, rows, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(lambda ci: work(ci, bounds[ci], bounds[ci + 1]),
                            range(threads)))
    return np.vstack(parts)


def _pack_labels(K: np.ndarray, p: int):
    """Per-row coset labels as hashable scalars (or tuples when too wide)."""
    b = K.shape[1]
    labels = np.mod(K, p) if K.dtype == np.int64 else \
        np.array([[int(v) % p for v in row] for row in K], dtype=np.int64)
    if p ** b < _INT64_SAFE:
        powers = p ** np.arange(b, dtype=np.int64)
        return (labels @ powers).tolist()
    return [tuple(int(v) for v in row) for row in labels]


def _combine_stage(stage: StageDescriptor, X: np.ndarray, Y: np.ndarray,
                   K: np.ndarray, out_cap: int, reuse: bool):
    labels = _pack_labels(K, stage.p)
    pairs = (pair_indices_reuse(labels, out_cap) if reuse
             else pair_indices_disjoint(labels, out_cap))
    if not pairs:
        return np.zeros((0, stage.dim_out), dtype=X.dtype), labels
    i1 = np.fromiter((a for a, _ in pairs), dtype=np.int64, count=len(pairs))
    i2 = np.fromiter((b for _, b in pairs), dtype=np.int64, count=len(pairs))
    head = X[i1] - X[i2]
    dk = K[i1] - K[i2]
    if stage.p > 1:
        rem = np.mod(dk, stage.p) if dk.dtype == np.int64 else \
            np.array([[int(v) % stage.p for v in row] for row in dk])
        if np.any(rem != 0):
            raise InsufficientInputs("paired vectors disagree on coset label")
    tail = (Y[i1] - Y[i2]) + stage.q * (dk // stage.p)
    return np.hstack([head, tail]), labels


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def _as_seed(rng) -> int:
    if isinstance(rng, int):
        return rng
    if isinstance(rng, random.Random):
        return rng.getrandbits(63)
    raise TypeError("rng must be an int seed or random.Random")


def _initial_gaussian(count: int, dim: int, s0_sq: Fraction, seed: int,
                      threads: int) -> np.ndarray:
    def work(chunk_id: int, lo: int, hi: int) -> np.ndarray:
        rng = derive_rng(seed, "init", "chunk", chunk_id)
        out = np.empty((hi - lo, dim), dtype=np.int64)
        for r in range(hi - lo):
            for j in range(dim):
                out[r, j] = _draw_z(s0_sq, 0, 1, rng)
        return out

    if threads <= 1 or count < 4096:
        return work(0, 0, count)
    bounds = np.linspace(0, count, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(lambda ci: work(ci, bounds[ci], bounds[ci + 1]),
                            range(threads)))
    return np.vstack(parts)


def _initial_ternary_sparse(count: int, dim: int, weight: int, seed: int) -> np.ndarray:
    rng = derive_np_rng(seed, "init-ternary")
    X = np.zeros((count, dim), dtype=np.int64)
    if weight == 0:
        return X
    u = rng.random((count, dim))
    idx = np.argpartition(u, weight - 1, axis=1)[:, :weight]
    signs = rng.integers(0, 2, size=(count, weight), dtype=np.int64) * 2 - 1
    np.put_along_axis(X, idx, signs, axis=1)
    return X


def _check_final_membership(inst: SisInstance, out: np.ndarray):
    if out.size == 0:
        return
    A = np.asarray(inst.A)
    max_x = int(np.abs(out).max()) if out.size else 0
    if A.dtype == np.int64 and out.dtype == np.int64 and \
            inst.m * (inst.q - 1) * max(1, max_x) < _INT64_SAFE:
        if np.any(np.mod(out @ A.T, inst.q)):
            raise AssertionError("output failed the exact membership check")
        return
    for row in out:
        if any(int(v) for v in matvec_mod(A, [int(x) for x in row], inst.q)):
            raise AssertionError("output failed the exact membership check")


def _finish_stats(stats: RunStats, out: np.ndarray):
    if out.size:
        stats.nonzero_fraction = float(np.mean(np.any(out != 0, axis=1)))
        stats.max_linf = int(np.abs(out).max())
        stats.max_l2 = float(np.sqrt((out.astype(float) ** 2).sum(axis=1).max()))


def gaussian_wagner(inst: SisInstance, schedule: Schedule, rng, *,
                    threads: int = 1, mem_budget_bytes: int = 8 << 30):
    """Run the Gaussian sampler over the instance's lattice chain.

    Provable mode starts from 3^r N exact width-s0 draws and halves nothing:
    each stage consumes its list into exactly a third as many vectors, all in
    the next chain lattice, with width growing by sqrt(2) per stage.
    Heuristic mode starts from 3N sparse ternary vectors, reuses vectors
    across pairs, lifts any rows left uncovered by the schedule to centered
    residues, and relaxes the width preconditions by flooring each stage
    width at its exact-sampler minimum.

    Returns (outputs, RunStats); every output satisfies A x = 0 mod q.
    """
    if schedule.mode == MODE_NAIVE:
        raise InfeasibleSchedule("use naive_wagner for the rounding mode")
    seed = _as_seed(rng)
    provable = schedule.mode == MODE_PROVABLE
    if not inst.systematic:
        raise BlockSumMismatch("instance must be in systematic form")
    stages = build_chain(inst, schedule.b, schedule.p,
                         allow_partial=not provable)
    dim0 = inst.m - inst.n
    stats = RunStats(mode=schedule.mode)

    if provable:
        if schedule.N < max(st.p ** st.b for st in stages):
            raise InfeasibleSchedule("provable mode needs N >= max p_i^b_i")
        init_count = 3 ** schedule.r * schedule.N
        if init_count * max(1, dim0) * 8 > mem_budget_bytes:
            raise BudgetExceeded(
                f"initial list of {init_count} vectors exceeds the memory budget")
        if float(schedule.s0_sq) < _width_floor_sq(dim0) * (1 - 1e-12):
            raise WidthTooSmall("s0 below sqrt(ln(2(m-n)+4)/pi)")
        for st in stages:
            if float(schedule.width_sq(st.index)) < \
                    (st.q / st.p) ** 2 * _width_floor_sq(st.b) * (1 - 1e-12):
                raise WidthTooSmall(
                    f"stage {st.index}: width below (q/p) sqrt(ln(2b+4)/pi)")
        t0 = time.perf_counter()
        X = _initial_gaussian(init_count, dim0, schedule.s0_sq, seed, threads)
        stats.stage_seconds.append(time.perf_counter() - t0)
        stats.list_sizes.append(init_count)
    else:
        init_count = 3 * schedule.N
        # Entropy margin over the estimator's minimal weight: 3N draws from a
        # pool of barely N vectors would be riddled with duplicates, and
        # duplicate inputs cancel to zero under reuse pairing.
        w, _sigma0 = _estimator.min_weight(
            dim0, _HEURISTIC_ENTROPY_FACTOR * schedule.N)
        t0 = time.perf_counter()
        X = _initial_ternary_sparse(init_count, dim0, w, seed)
        stats.stage_seconds.append(time.perf_counter() - t0)
        stats.list_sizes.append(init_count)

    for st in stages:
        t0 = time.perf_counter()
        width_sq = schedule.width_sq(st.index)
        if not provable:
            floor = Fraction(st.q * st.q, st.p * st.p) * \
                Fraction(_width_floor_sq(st.b) * (1 + 1e-9))
            width_sq = max(width_sq, floor)
        Y = _lift_batch(st, X)
        K = _gaussian_offsets(st, Y, width_sq, ("stage", st.index), seed, threads)
        cap = len(X) // 3 if provable else 3 * schedule.N
        out, labels = _combine_stage(st, X, Y, K, cap, reuse=schedule.reuse and not provable)
        if provable and len(out) != len(X) // 3:
            raise InsufficientInputs(
                f"stage {st.index} produced {len(out)} < floor(N/3) outputs")
        if not provable and out.dtype == np.int64 and len(out):
            # Reuse pairing breeds exact duplicates and zero rows; both are
            # dead weight for later stages, so curate them out between stages.
            out = out[np.any(out != 0, axis=1)]
            if len(out):
                out = np.unique(out, axis=0)
        stats.bucket_histograms.append(_occupancy_histogram(labels))
        stats.list_sizes.append(len(out))
        stats.stage_seconds.append(time.perf_counter() - t0)
        X = out

    if not provable:
        kappa = sum(schedule.b)
        if kappa < inst.n:
            rest = np.asarray(inst.a_prime)[kappa:, :]
            syn = np.mod(-(X[:, :dim0] @ rest.T), inst.q)
            X = np.hstack([X, centered(syn, inst.q)])
    _check_final_membership(inst, X)
    _finish_stats(stats, X)
    return X, stats


def naive_wagner(inst: SisInstance, schedule: Schedule, rng, *,
                 mem_budget_bytes: int = 8 << 30):
    """The warm-up rounding variant.

    Ternary initial list of 3^r N vectors; at stage i the unique mod-q
    completion y of each vector is bucketed by round((p_i/q) y) mod p_i and
    same-bucket vectors are subtracted (disjoint pairs, no cap).  All
    coordinates are kept as centered residues, so every output obeys
    ||x||_inf <= max_i 2^(r-i) q/p_i with p_0 = q.  Zero vectors are counted,
    not errors.
    """
    if schedule.mode != MODE_NAIVE:
        raise InfeasibleSchedule("schedule mode must be naive-rounding")
    if sum(schedule.b) != inst.n:
        raise BlockSumMismatch(f"block sizes sum to {sum(schedule.b)}, expected {inst.n}")
    seed = _as_seed(rng)
    if not inst.systematic:
        raise BlockSumMismatch("instance must be in systematic form")
    stages = build_chain(inst, schedule.b, schedule.p)
    dim0 = inst.m - inst.n
    init_count = 3 ** schedule.r * schedule.N
    if init_count * max(1, dim0) * 8 > mem_budget_bytes:
        raise BudgetExceeded("initial list exceeds the memory budget")
    rng_np = derive_np_rng(seed, "init-ternary-uniform")
    X = rng_np.integers(-1, 2, size=(init_count, dim0), dtype=np.int64)
    stats = RunStats(mode=schedule.mode)
    stats.list_sizes.append(init_count)
    for st in stages:
        t0 = time.perf_counter()
        q, p = st.q, st.p
        Y = np.mod(_lift_batch(st, X), q)
        C = ((2 * p * Y + q) // (2 * q)) % p  # round((p/q) y) mod p, exact
        labels = _pack_labels(C, p)
        pairs = pair_indices_disjoint(labels, None)
        if pairs:
            i1 = np.fromiter((a for a, _ in pairs), dtype=np.int64, count=len(pairs))
            i2 = np.fromiter((b for _, b in pairs), dtype=np.int64, count=len(pairs))
            out = np.hstack([X[i1] - X[i2], Y[i1] - Y[i2]])
            out = centered(np.mod(out, q), q)
        else:
            out = np.zeros((0, st.dim_out), dtype=np.int64)
        stats.bucket_histograms.append(_occupancy_histogram(labels))
        stats.list_sizes.append(len(out))
        stats.stage_seconds.append(time.perf_counter() - t0)
        X = out
    _check_final_membership(inst, X)
    _finish_stats(stats, X)
    return X, stats


def eq1_norm_bound(schedule: Schedule, q: int) -> Fraction:
    """max over 0 <= i <= r of 2^(r-i) q/p_i with p_0 = q (rounding variant)."""
    best = Fraction(2 ** schedule.r)
    for i, p in enumerate(schedule.p, start=1):
        best = max(best, Fraction(2 ** (schedule.r - i) * q, p))
    return best


# ---------------------------------------------------------------------------
# Parameter selection
# ---------------------------------------------------------------------------

def _ceil_pow2_float(frac_log2: float) -> int:
    """Smallest integer >= 2^frac_log2 at double precision."""
    if frac_log2 <= 62:
        return max(1, math.ceil(2.0 ** frac_log2))
    ip = int(math.floor(frac_log2)) - 52
    mant = 2.0 ** (frac_log2 - ip)  # in [2^52, 2^53)
    return math.ceil(mant) << ip


def choose_provable_params(n: int, m: int, q: int, f: float,
                           epsilon: float) -> Schedule:
    """Schedule matching the provable subexponential-sampler parameter choice.

    eps' = eps/5; r = floor(2 log2(q/f) - log2(144 ln(3/eps')/pi)), bumped by
    10 when below 1; p_i = floor(q / sqrt(2^i)); N the smallest integer with
    log2(N/q) >= (n/2) / (ln ln q - ln[ln f + (1/2) ln(144 ln(3/eps')/pi)
    + 1/2]); b_i = ceil(log2 N / (log2 q - i/2) - 1) for i < r and the
    remainder at i = r; s0 = (q/f) / sqrt(2^r).
    """
    from .zqlin import is_probable_prime

    if not is_probable_prime(q):
        raise PreconditionViolated("q prime")
    if m < n:
        raise PreconditionViolated("m >= n")
    if q ** (1 - n / m) < 6:
        raise PreconditionViolated("q^(1-n/m) >= 6")
    if epsilon > 1 / m:
        raise PreconditionViolated("epsilon <= 1/m")
    if q / f < math.sqrt(math.log(1 / epsilon)):
        raise PreconditionViolated("q/f >= sqrt(ln(1/eps))")
    eps_p = epsilon / 5
    c_term = 144.0 * math.log(3.0 / eps_p) / math.pi
    r = math.floor(2 * math.log2(q / f) - math.log2(c_term))
    if r < 1:
        r += 10
    denom = math.log(math.log(q)) - math.log(
        math.log(f) + 0.5 * math.log(c_term) + 0.5)
    if denom <= 0:
        raise InfeasibleSchedule("log-log denominator is not positive")
    log2_n_over_q = (n / 2) / denom
    log2_n = log2_n_over_q + math.log2(q)
    N = _ceil_pow2_float(log2_n)
    log2_n = math.log2(N) if N.bit_length() <= 62 else log2_n
    p = tuple(math.floor(q / math.sqrt(2.0 ** i)) for i in range(1, r + 1))
    if p[-1] < 1:
        raise InfeasibleSchedule("p_r < 1")
    b = [math.ceil(log2_n / (math.log2(q) - i / 2) - 1) for i in range(1, r)]
    b_r = n - sum(b)
    if b_r <= 0 or b_r > log2_n / math.log2(p[-1]):
        raise InfeasibleSchedule(f"last block b_r = {b_r} infeasible")
    b.append(b_r)
    for i, (pi, bi) in enumerate(zip(p, b), start=1):
        if bi * math.log2(pi) > log2_n + 1e-9:
            raise InfeasibleSchedule(f"N < p_{i}^b_{i}")
    s0_sq = Fraction(q) ** 2 / (Fraction(f) ** 2 * 2 ** r)
    return Schedule(mode=MODE_PROVABLE, r=r, N=N, p=p, b=tuple(b),
                    s0_sq=s0_sq, epsilon=epsilon, reuse=False)


def choose_naive_params(n: int, q: int, f: float) -> Schedule:
    """Warm-up parameter selection: p_i = q/2^i, r = floor(log2(q/f)) - 1,
    log2 N = n / (ln ln q - ln ln f), blocks by the same rounding discipline
    as the provable selection."""
    if f <= 1:
        raise PreconditionViolated("f > 1")
    if q <= f:
        raise PreconditionViolated("q > f")
    r = math.floor(math.log2(q / f)) - 1
    if r < 1:
        raise InfeasibleSchedule("r < 1: norm target too close to q")
    log2_n = n / (math.log(math.log(q)) - math.log(math.log(f)))
    N = _ceil_pow2_float(log2_n)
    p = tuple(max(1, round(q / 2 ** i)) for i in range(1, r + 1))
    b = [max(1, math.ceil(log2_n / (math.log2(q) - i) - 1)) for i in range(1, r)]
    b_r = n - sum(b)
    if b_r <= 0:
        raise InfeasibleSchedule(f"last block b_r = {b_r} infeasible")
    b.append(b_r)
    return Schedule(mode=MODE_NAIVE, r=r, N=N, p=p, b=tuple(b),
                    s0_sq=None, epsilon=1.0 / 2, reuse=False)


_TWO_PI = 2.0 * math.pi
_KAPPA_QUANT = math.sqrt(2.0 * math.pi * math.e)
_HEURISTIC_ENTROPY_FACTOR = 48  # initial pool size multiple of the list size


def choose_heuristic_params(n: int, m: int, q: int, beta: float, *,
                            epsilon: float = 2.0 ** -10,
                            min_log2_n: int = 6, max_log2_n: int = 22,
                            min_expected_hits: float = 4.0) -> Schedule:
    """Integer schedule for desk-scale heuristic runs.

    Walks a ladder of list sizes; for each, derives integer stage moduli from
    the quantization-style deviation balance, scores every abort point with
    the central-Gaussian success model (using the deviations the Gaussian
    lifts will actually inject, width floors included), and returns the first
    schedule whose expected number of hits N p clears ``min_expected_hits``.
    """
    d = m - n
    for log2_n in range(min_log2_n, max_log2_n + 1):
        N = 1 << log2_n
        try:
            w, sigma0 = _estimator.min_weight(d, _HEURISTIC_ENTROPY_FACTOR * N)
        except Infeasible:
            continue
        if w == 0:
            continue
        sigma = sigma0
        stages = []   # (p, b, injected_dev)
        rows_left = n
        while rows_left > 0 and len(stages) < 64:
            p = int(round(q / (_KAPPA_QUANT * sigma)))
            p = max(2, min(p, q, N))
            b = max(1, int(math.log2(N) / math.log2(p)))
            b = min(b, rows_left)
            width = max(sigma * math.sqrt(_TWO_PI),
                        (q / p) * math.sqrt(_width_floor_sq(b)) * (1 + 1e-9))
            inj = width / math.sqrt(_TWO_PI)
            stages.append((p, b, inj))
            rows_left -= b
            sigma = math.sqrt(2.0) * max(sigma, inj)
        best = None
        for rp in range(1, len(stages) + 1):
            covered = sum(b for _, b, _ in stages[:rp])
            ell = n - covered
            score = log2_n
            for i, (_, b, inj) in enumerate(stages[:rp], start=1):
                dev = inj * math.sqrt(2.0) * 2.0 ** ((rp - i) / 2)
                per = math.erf(beta / (dev * math.sqrt(2.0)))
                if per <= 0:
                    score = -math.inf
                    break
                score += b * math.log2(per)
            dev0 = sigma0 * 2.0 ** (rp / 2)
            per0 = math.erf(beta / (dev0 * math.sqrt(2.0)))
            if per0 <= 0 or score == -math.inf:
                continue
            score += d * math.log2(per0)
            score += ell * math.log2(min(1.0, (2 * beta + 1) / q))
            if best is None or score > best[0]:
                best = (score, rp)
        if best is None:
            continue
        score, rp = best
        if score >= math.log2(min_expected_hits):
            chosen = stages[:rp]
            width1_sq = Fraction(max(
                sigma0 * sigma0 * _TWO_PI,
                (q / chosen[0][0]) ** 2 * _width_floor_sq(chosen[0][1]) * (1 + 1e-9)))
            return Schedule(mode=MODE_HEURISTIC, r=rp, N=N,
                            p=tuple(p for p, _, _ in chosen),
                            b=tuple(b for _, b, _ in chosen),
                            s0_sq=width1_sq, epsilon=epsilon, reuse=True)
    raise InfeasibleSchedule(
        f"no heuristic schedule up to N = 2^{max_log2_n} predicts "
        f"{min_expected_hits} expected hits")


# ---------------------------------------------------------------------------
# Smoothing certification (tiny instances)
# ---------------------------------------------------------------------------

def certify_smoothing(inst: SisInstance, schedule: Schedule,
                      epsilon: Optional[float] = None) -> dict:
    """Brute-force the smoothing conditions of every stage on a tiny instance.

    Checks sqrt(2)^(i-1) s0 >= sqrt(2) max(eta_{eps/3} of the scaled block
    lattice, eta_{eps/3} of the previous chain lattice) for every stage, which
    suffices for the stage superlattice conditions.  Raises on failure."""
    eps = (epsilon if epsilon is not None else schedule.epsilon) / 3.0
    stages = build_chain(inst, schedule.b, schedule.p,
                         allow_partial=schedule.mode != MODE_PROVABLE)
    report = {}
    for st in stages:
        width = math.sqrt(float(schedule.width_sq(st.index)))
        eta_s = eta_scaled_zn_bruteforce(Fraction(st.q, st.p), st.b, eps)
        if st.kappa_prev == 0:
            eta_prev = eta_zn_bruteforce(st.m_minus_n, eps)
        else:
            a_prev_full = np.hstack([
                np.asarray(st.a_prev, dtype=np.int64),
                np.eye(st.kappa_prev, dtype=np.int64),
            ])
            eta_prev = eta_qary_bruteforce(a_prev_full, st.q, eps)
        need = math.sqrt(2.0) * max(eta_s, eta_prev)
        report[st.index] = {"width": width, "eta_block": eta_s,
                            "eta_prev": eta_prev, "required": need}
        if width < need:
            raise PreconditionViolated(
                f"stage {st.index}: width {width:.3f} < sqrt(2) max(eta) = {need:.3f}")
    return report
