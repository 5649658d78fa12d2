"""The projected-lattice chain behind the iterative sampler.

Stage i covers ``b_i`` fresh parity rows.  A vector x already satisfying the
first kappa_{i-1} rows lifts canonically to y_last = -(A'_new @ x_top), an
exact integer vector (no mod-q reduction), and then gets a Gaussian offset
(q/p_i) k on the new coordinates.  Tail coordinates y_last + (q/p_i) k are
kept as exact p_i-scaled integers ``tail_num = p_i y_last + q k`` because
q/p_i is usually not an integer.  The residue k mod p_i is precisely the
coset of the vector in the stage's superlattice quotient, which has p_i^{b_i}
classes, so same-label vectors subtract to vectors satisfying the first
kappa_i rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dgauss import GaussParam, _draw_z, _width_floor_sq
from .errors import BlockSumMismatch, NotInLattice, WidthTooSmall
from .zqlin import SisInstance, matvec_mod

_INT64_SAFE = 1 << 62


@dataclass(frozen=True)
class StageDescriptor:
    """Immutable description of one chain stage."""

    index: int            # 1-based stage number
    b: int                # new rows handled this stage
    kappa_prev: int       # rows already handled before the stage
    p: int                # stage modulus, 1 <= p <= q
    q: int
    m_minus_n: int
    a_new: np.ndarray     # b x (m-n) slice of new parity rows
    a_prev: np.ndarray    # kappa_prev x (m-n) earlier rows (membership checks)

    @property
    def kappa(self) -> int:
        return self.kappa_prev + self.b

    @property
    def dim_in(self) -> int:
        return self.m_minus_n + self.kappa_prev

    @property
    def dim_out(self) -> int:
        return self.m_minus_n + self.kappa

    def width_floor(self) -> float:
        """Smallest width usable for the stage's exact scaled-Z^b sampler."""
        return self.q / self.p * math.sqrt(_width_floor_sq(self.b))


@dataclass(frozen=True)
class StagedVector:
    """A vector of the stage superlattice in exact scaled-integer form."""

    head: tuple           # length m-n+kappa_prev, plain integers
    tail_num: tuple       # length b: p*y_last + q*k (numerators over p)
    k: tuple              # length b: the scaled-offset coefficients
    label: tuple          # k mod p, componentwise
    stage: StageDescriptor

    def check(self):
        st = self.stage
        y = []
        for t, kk in zip(self.tail_num, self.k):
            num = t - st.q * kk
            if num % st.p:
                raise NotInLattice("tail numerator is not p*y + q*k")
            y.append(num // st.p)
        if tuple(kk % st.p for kk in self.k) != self.label:
            raise NotInLattice("label does not match k mod p")
        return tuple(y)

    def y_last(self) -> tuple:
        return tuple((t - self.stage.q * kk) // self.stage.p
                     for t, kk in zip(self.tail_num, self.k))


def build_chain(inst: SisInstance, block_sizes: Sequence[int],
                stage_moduli: Sequence[int], *, allow_partial: bool = False):
    """Stage descriptors for a systematic instance.

    ``allow_partial`` admits block sums below n (early-abort schedules);
    otherwise the blocks must cover all n rows.
    """
    if not inst.systematic:
        raise BlockSumMismatch("instance must be in systematic form")
    if len(block_sizes) != len(stage_moduli):
        raise BlockSumMismatch("need one modulus per block")
    total = sum(block_sizes)
    if total > inst.n or (total != inst.n and not allow_partial):
        raise BlockSumMismatch(f"block sizes sum to {total}, expected {inst.n}")
    if any(b < 1 for b in block_sizes):
        raise BlockSumMismatch("block sizes must be >= 1")
    if any(not (1 <= p <= inst.q) for p in stage_moduli):
        raise BlockSumMismatch("stage moduli must lie in [1, q]")
    a_prime = inst.a_prime
    stages = []
    kappa = 0
    for i, (b, p) in enumerate(zip(block_sizes, stage_moduli), start=1):
        a_new = np.array(a_prime[kappa:kappa + b, :])
        a_prev = np.array(a_prime[:kappa, :])
        a_new.setflags(write=False)
        a_prev.setflags(write=False)
        stages.append(StageDescriptor(index=i, b=b, kappa_prev=kappa, p=int(p),
                                      q=inst.q, m_minus_n=inst.m - inst.n,
                                      a_new=a_new, a_prev=a_prev))
        kappa += b
    return stages


def _check_membership(stage: StageDescriptor, x: Sequence[int]):
    if len(x) != stage.dim_in:
        raise NotInLattice(f"vector length {len(x)}, expected {stage.dim_in}")
    top = [int(v) for v in x[: stage.m_minus_n]]
    bottom = [int(v) for v in x[stage.m_minus_n:]]
    if stage.kappa_prev:
        syn = matvec_mod(stage.a_prev, top, stage.q)
        for sv, bv in zip(syn, bottom):
            if (int(sv) + bv) % stage.q:
                raise NotInLattice("earlier parity rows are not satisfied")


def lift_integer(stage: StageDescriptor, x: Sequence[int]) -> tuple:
    """Exact integer lift: y_last = -(A'_new @ x_top), not reduced mod q.

    The assembled vector (x ; y_last) satisfies all kappa_i parity rows, and
    is the unique lift of x inside the complement spanned by the
    [I | -A'_i] columns together with q e_j on the earlier bottom rows.
    """
    _check_membership(stage, x)
    top = [int(v) for v in x[: stage.m_minus_n]]
    a = stage.a_new
    max_x = max((abs(v) for v in top), default=0)
    if a.dtype == np.int64 and len(top) * (stage.q - 1) * max(1, max_x) < _INT64_SAFE:
        y = -(a @ np.array(top, dtype=np.int64))
        return tuple(int(v) for v in y)
    return tuple(-sum(int(a[r, j]) * top[j] for j in range(len(top)))
                 for r in range(stage.b))


def dglift(stage: StageDescriptor, x: Sequence[int], s, rng) -> StagedVector:
    """Randomized lift into the stage superlattice.

    Computes the canonical integer lift and adds a discrete Gaussian offset
    of width s over (q/p) Z^b; the offset coefficients come from the exact
    integer sampler at width (p/q) s, center -(p/q) y_last.  Projecting the
    output orthogonally to the new coordinates recovers x bit-exactly.
    """
    s_sq = s.s_sq if isinstance(s, GaussParam) else (
        s if isinstance(s, Fraction) else Fraction(s)) ** 2
    floor_sq = (Fraction(stage.q, stage.p) ** 2) * Fraction(_width_floor_sq(stage.b))
    if float(s_sq) < float(floor_sq) * (1 - 1e-12):
        raise WidthTooSmall(
            f"stage {stage.index}: s = {math.sqrt(float(s_sq)):.4f} below "
            f"(q/p) sqrt(ln(2b+4)/pi) = {math.sqrt(float(floor_sq)):.4f}")
    y = lift_integer(stage, x)
    p, q = stage.p, stage.q
    scaled_s_sq = s_sq * p * p / (q * q)
    ks = tuple(_draw_z(scaled_s_sq, -p * yj, q, rng) for yj in y)
    tail = tuple(p * yj + q * kj for yj, kj in zip(y, ks))
    return StagedVector(head=tuple(int(v) for v in x), tail_num=tail, k=ks,
                        label=tuple(kj % p for kj in ks), stage=stage)


def coset_label(sv: StagedVector) -> tuple:
    """The class of the vector in the stage quotient: k mod p componentwise."""
    return tuple(kk % sv.stage.p for kk in sv.k)


def label_of_point(stage: StageDescriptor, head: Sequence[int],
                   tail_num: Sequence[int]) -> tuple:
    """Coset label of an arbitrary superlattice point given in scaled form."""
    y = lift_integer(stage, head)
    ks = []
    for t, yj in zip(tail_num, y):
        num = int(t) - stage.p * yj
        if num % stage.q:
            raise NotInLattice("point is not in the stage superlattice")
        ks.append(num // stage.q)
    return tuple(kk % stage.p for kk in ks)


def combine_pair(sv1: StagedVector, sv2: StagedVector) -> tuple:
    """Difference of two same-label staged vectors, as an exact integer
    vector satisfying the first kappa_i parity rows."""
    st = sv1.stage
    if sv1.label != sv2.label:
        raise NotInLattice("labels differ; difference leaves the sublattice")
    head = tuple(a - b for a, b in zip(sv1.head, sv2.head))
    tail = []
    for t1, t2 in zip(sv1.tail_num, sv2.tail_num):
        d = t1 - t2
        if d % st.p:
            raise NotInLattice("tail difference is not divisible by p")
        tail.append(d // st.p)
    return head + tuple(tail)


def in_superlattice(stage: StageDescriptor, sv: StagedVector) -> bool:
    """Verify the represented rational vector lies in the stage superlattice
    by checking integrality of its basis coordinates."""
    y = sv.check()
    top = sv.head[: stage.m_minus_n]
    bottom = sv.head[stage.m_minus_n:]
    if stage.kappa_prev:
        syn = matvec_mod(stage.a_prev, list(top), stage.q)
        for svv, bv in zip(syn, bottom):
            if (int(svv) + bv) % stage.q:
                return False
    expected = lift_integer(stage, sv.head)
    return tuple(y) == expected
