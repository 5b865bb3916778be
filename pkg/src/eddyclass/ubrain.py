"""U-BRAIN: greedy DNF induction from positive/negative instances over {0, 1/2, 1}.

Literals are numbered internally as ``2 * (k - 1) + negated`` for the 1-based
variable index ``k``.  Sorting by that id gives the tie-break order used
during literal selection: smaller variable first, plain before negated.

The learner compares every remaining positive with every negative, builds the
sets of separating literals, and repeatedly picks the literal of maximum
relevance until every set is hit.  The resulting conjunction is false on all
negatives; positives it covers are removed and the outer loop repeats.
"""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ConsistencyError, DataError

log = logging.getLogger(__name__)

HALF = 0.5
_VALID = (0.0, 0.5, 1.0)


@dataclass(frozen=True, order=True)
class Literal:
    index: int  # 1-based variable index
    negated: bool = False

    @property
    def id(self) -> int:
        return 2 * (self.index - 1) + int(self.negated)

    @classmethod
    def from_id(cls, lit_id: int) -> "Literal":
        return cls(lit_id // 2 + 1, bool(lit_id % 2))

    def __str__(self):
        return f"~x{self.index}" if self.negated else f"x{self.index}"


Term = frozenset  # frozenset[Literal]


@dataclass(frozen=True)
class DnfFormula:
    terms: tuple[frozenset, ...]
    n: int

    def __post_init__(self):
        seen = set()
        for term in self.terms:
            idx = [lit.index for lit in term]
            if len(idx) != len(set(idx)):
                raise DataError(f"term {format_term(term)!r} holds a literal and its negation")
            if any(not 1 <= i <= self.n for i in idx):
                raise DataError(f"term {format_term(term)!r} references a variable outside 1..{self.n}")
            if term in seen:
                raise DataError(f"duplicate term {format_term(term)!r}")
            seen.add(term)

    def __len__(self):
        return len(self.terms)

    def __str__(self):
        return format_formula(self)


@dataclass(frozen=True)
class ConditionSet:
    positive_index: int
    negative_index: int
    members: frozenset  # frozenset[Literal]

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class UBrainConfig:
    inclusive_threshold: bool = True  # truth exactly 1/2 counts as positive
    uncertainty_reduction: bool = True


@dataclass(frozen=True)
class TrainTrace:
    """Diagnostics of one training run."""

    fallback_terms: int
    prepared_positives: int
    prepared_negatives: int


# --------------------------------------------------------------------------
# Instances
# --------------------------------------------------------------------------

def as_instances(rows) -> np.ndarray:
    """Coerce to a (count, n) float array whose entries are 0, 1/2 or 1."""
    arr = np.array(rows, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :] if arr.size else arr.reshape(0, 0)
    if arr.ndim != 2:
        raise DataError("instances must form a 2-D array")
    if arr.size and not np.all(np.isin(arr, _VALID)):
        raise DataError("instance values must be 0, 1/2 or 1")
    return arr


def _dedup(arr: np.ndarray) -> np.ndarray:
    seen = set()
    keep = []
    for i, row in enumerate(arr):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return arr[keep]


def _reduce_uncertainty(arr: np.ndarray) -> np.ndarray:
    """Recover 1/2 bits from classmates that agree on every determinate bit.

    Bit k of instance w becomes b when every other instance of the same class
    that matches w on all of w's determinate positions has the determinate
    value b at k.  Without such classmates the bit stays 1/2.  Computed from a
    snapshot so the result does not depend on instance order.
    """
    out = arr.copy()
    for i, w in enumerate(arr):
        unknown = w == HALF
        if not unknown.any():
            continue
        det = ~unknown
        mates = [j for j in range(len(arr)) if j != i and np.array_equal(arr[j, det], w[det])]
        if not mates:
            continue
        vals = arr[mates][:, unknown]
        agreed = np.all(vals == vals[0], axis=0) & (vals[0] != HALF)
        cols = np.flatnonzero(unknown)[agreed]
        out[i, cols] = vals[0][agreed]
    return out


def _conflicts(pos: np.ndarray, neg: np.ndarray) -> list[np.ndarray]:
    neg_keys = {row.tobytes() for row in neg}
    return [row for row in pos if row.tobytes() in neg_keys]


def prepare(positives, negatives, reduce_uncertainty: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Deduplicate, reduce uncertainty, deduplicate again and check self-consistency."""
    pos = as_instances(positives)
    neg = as_instances(negatives)
    if len(pos) < 1 or len(neg) < 1:
        raise DataError("U-BRAIN needs at least one positive and one negative instance")
    if pos.shape[1] != neg.shape[1]:
        raise DataError(f"instance lengths differ: {pos.shape[1]} vs {neg.shape[1]}")
    pos, neg = _dedup(pos), _dedup(neg)
    if reduce_uncertainty:
        pos, neg = _dedup(_reduce_uncertainty(pos)), _dedup(_reduce_uncertainty(neg))
    clash = _conflicts(pos, neg)
    if clash:
        raise ConsistencyError(
            f"instance {format_instance(clash[0])} belongs to both classes "
            f"({len(clash)} conflicting pattern(s))"
        )
    return pos, neg


def drop_conflicts(positives, negatives) -> tuple[np.ndarray, np.ndarray, int]:
    """Remove every pattern present in both classes; returns the count removed."""
    pos, neg = as_instances(positives), as_instances(negatives)
    keys = {r.tobytes() for r in pos} & {r.tobytes() for r in neg}
    if not keys:
        return pos, neg, 0
    pk = np.array([r.tobytes() not in keys for r in pos], dtype=bool)
    nk = np.array([r.tobytes() not in keys for r in neg], dtype=bool)
    return pos[pk], neg[nk], len(keys)


def format_instance(row) -> str:
    return "(" + ",".join("½" if v == HALF else str(int(v)) for v in row) + ")"


# --------------------------------------------------------------------------
# Condition sets and relevances
# --------------------------------------------------------------------------

def _condition_mask(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Boolean membership over literal ids (length 2n). Broadcasts over leading axes."""
    both_half = (u == HALF) & (v == HALF)
    plain = (u > v) | both_half
    negated = (u < v) | both_half
    return np.stack([plain, negated], axis=-1).reshape(*plain.shape[:-1], -1)


def condition_set(u, v, positive_index: int = 0, negative_index: int = 0) -> ConditionSet:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape:
        raise DataError(f"instance lengths differ: {u.shape} vs {v.shape}")
    mask = _condition_mask(u, v)
    members = frozenset(Literal.from_id(int(i)) for i in np.flatnonzero(mask))
    return ConditionSet(positive_index, negative_index, members)


def relevances(sets: Iterable[ConditionSet | None], p: int, q: int) -> dict[Literal, float]:
    """R(x) = (1/p) sum_i (1/q) sum_j chi_ij(x) / #S_ij over the live sets.

    Erased sets are passed as ``None`` (or omitted); empty sets contribute nothing.
    Accumulation runs in the order given, which callers keep i-major.
    """
    acc: dict[Literal, float] = defaultdict(float)
    for s in sets:
        if s is None or len(s) == 0:
            continue
        share = 1.0 / len(s)
        for lit in sorted(s.members):
            acc[lit] += share
    if not acc:
        return {}
    return {lit: val / q / p for lit, val in sorted(acc.items())}


def _relevance_vector(masks: np.ndarray, live: np.ndarray, p: int, q: int) -> np.ndarray:
    rows = masks[live]
    sizes = rows.sum(axis=1)
    return (rows / sizes[:, None]).sum(axis=0) / q / p


def _exact_relevance(masks: np.ndarray, live: np.ndarray, lit_ids: Sequence[int]) -> dict[int, Fraction]:
    rows = masks[live]
    sizes = rows.sum(axis=1)
    out = {}
    for lit in lit_ids:
        col = rows[:, lit]
        total = Fraction(0)
        for s in np.unique(sizes[col]):
            total += Fraction(int(np.sum(sizes[col] == s)), int(s))
        out[lit] = total
    return out


def _choose_literal(masks: np.ndarray, live: np.ndarray, p: int, q: int) -> int:
    """Max-relevance literal id; near-ties are settled in exact rational arithmetic."""
    R = _relevance_vector(masks, live, p, q)
    top = R.max()
    cand = np.flatnonzero(R >= top * (1 - 1e-9))
    if len(cand) == 1:
        return int(cand[0])
    exact = _exact_relevance(masks, live, cand)
    best = max(exact.values())
    return min(lit for lit, val in exact.items() if val == best)


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def term_truth(term: Iterable[Literal], w) -> float:
    """Fuzzy conjunction: min over literal truths (w_k, or 1 - w_k when negated); empty -> 1."""
    w = np.asarray(w, dtype=float)
    truth = 1.0
    for lit in term:
        if not 1 <= lit.index <= len(w):
            raise DataError(f"literal {lit} outside instance of length {len(w)}")
        val = w[lit.index - 1]
        truth = min(truth, 1.0 - val if lit.negated else val)
    return truth


def formula_truth(formula: DnfFormula, w) -> float:
    w = np.asarray(w, dtype=float)
    if len(w) != formula.n:
        raise DataError(f"instance length {len(w)} != formula variable count {formula.n}")
    return max((term_truth(t, w) for t in formula.terms), default=0.0)


def _batch_truth(formula: DnfFormula, X: np.ndarray) -> np.ndarray:
    if X.shape[1] != formula.n:
        raise DataError(f"instance length {X.shape[1]} != formula variable count {formula.n}")
    out = np.zeros(len(X))
    for term in formula.terms:
        t = np.ones(len(X))
        for lit in term:
            col = X[:, lit.index - 1]
            t = np.minimum(t, 1.0 - col if lit.negated else col)
        out = np.maximum(out, t)
    return out


def classify(formula: DnfFormula, w, inclusive: bool = True) -> bool:
    truth = formula_truth(formula, w)
    return truth >= HALF if inclusive else truth > HALF


def classify_batch(formula: DnfFormula, X, inclusive: bool = True) -> np.ndarray:
    truth = _batch_truth(formula, as_instances(X))
    return truth >= HALF if inclusive else truth > HALF


# --------------------------------------------------------------------------
# Training
# --------------------------------------------------------------------------

def _specialization_term(w: np.ndarray) -> frozenset:
    return frozenset(
        Literal(k + 1, negated=(val == 0.0)) for k, val in enumerate(w) if val != HALF
    )


def _term_is_contradictory(term: frozenset) -> bool:
    idx = [lit.index for lit in term]
    return len(idx) != len(set(idx))


def train(positives, negatives, config: UBrainConfig = UBrainConfig(),
          return_trace: bool = False):
    """Learn a DNF formula consistent with the prepared instance sets."""
    pos, neg = prepare(positives, negatives, config.uncertainty_reduction)
    n = pos.shape[1]
    q = len(neg)
    thr = (lambda t: t >= HALF) if config.inclusive_threshold else (lambda t: t > HALF)

    remaining = np.arange(len(pos))
    terms: list[frozenset] = []
    fallbacks = 0
    while len(remaining):
        p = len(remaining)
        # masks[i, j, lit]: literal lit separates remaining positive i from negative j
        masks = _condition_mask(pos[remaining][:, None, :], neg[None, :, :])
        masks = masks.reshape(p * q, 2 * n)
        empty = ~masks.any(axis=1)
        if empty.any():
            i, j = divmod(int(np.flatnonzero(empty)[0]), q)
            raise ConsistencyError(
                f"positive {format_instance(pos[remaining[i]])} cannot be separated from "
                f"negative {format_instance(neg[j])}"
            )
        live = np.ones(p * q, dtype=bool)
        chosen: list[int] = []
        while live.any():
            lit = _choose_literal(masks, live, p, q)
            chosen.append(lit)
            live &= ~masks[:, lit]
        term = frozenset(Literal.from_id(l) for l in chosen)

        covered = np.array([thr(term_truth(term, pos[i])) for i in remaining], dtype=bool)
        if _term_is_contradictory(term) or term in terms or not covered.any():
            w = pos[remaining[0]]
            log.info("U-BRAIN term %s covers no remaining positive; using the specialization "
                     "term of %s", format_term(term), format_instance(w))
            fallbacks += 1
            term = _specialization_term(w)
            covered = np.array([thr(term_truth(term, pos[i])) for i in remaining], dtype=bool)
            if term in terms or not covered.any():
                raise ConsistencyError(
                    f"fallback term for {format_instance(w)} covers no remaining positive"
                )
        terms.append(term)
        remaining = remaining[~covered]
        # negatives are never removed; re-validate that the set is unchanged
        assert len(neg) == q

    formula = DnfFormula(tuple(terms), n)
    truth_pos = _batch_truth(formula, pos)
    truth_neg = _batch_truth(formula, neg)
    bad_pos = [format_instance(pos[i]) for i in np.flatnonzero(~thr(truth_pos))]
    bad_neg = [format_instance(neg[j]) for j in np.flatnonzero(thr(truth_neg))]
    if bad_pos or bad_neg:
        raise ConsistencyError(
            "trained formula is inconsistent with the training data: "
            f"uncovered positives {bad_pos[:5]}, covered negatives {bad_neg[:5]}"
        )
    if return_trace:
        return formula, TrainTrace(fallbacks, len(pos), len(neg))
    return formula


# --------------------------------------------------------------------------
# Text forms
# --------------------------------------------------------------------------

def format_term(term: Iterable[Literal]) -> str:
    return " ".join(str(lit) for lit in sorted(term, key=lambda l: (l.index, l.negated)))


def format_formula(formula: DnfFormula) -> str:
    return " + ".join(format_term(t) for t in formula.terms)


def parse_formula(text: str, n: int) -> DnfFormula:
    terms = []
    text = text.strip()
    if text:
        for chunk in text.split("+"):
            lits = []
            for tok in chunk.split():
                neg = tok.startswith("~")
                body = tok[1:] if neg else tok
                if not body.startswith("x") or not body[1:].isdigit():
                    raise DataError(f"bad literal {tok!r}")
                lits.append(Literal(int(body[1:]), neg))
            terms.append(frozenset(lits))
    return DnfFormula(tuple(terms), n)


def formula_rows(formula: DnfFormula) -> list[tuple[int, int, int]]:
    """(term_index, literal_index, negated) rows for the machine-readable CSV form."""
    rows = []
    for t, term in enumerate(formula.terms):
        for lit in sorted(term, key=lambda l: (l.index, l.negated)):
            rows.append((t, lit.index, int(lit.negated)))
    return rows


def formula_from_rows(rows: Iterable[Sequence[int]], n: int) -> DnfFormula:
    grouped: dict[int, list[Literal]] = defaultdict(list)
    for t, idx, neg in rows:
        grouped[int(t)].append(Literal(int(idx), bool(int(neg))))
    return DnfFormula(tuple(frozenset(grouped[t]) for t in sorted(grouped)), n)
