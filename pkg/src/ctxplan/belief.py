"""Shared belief over contexts, the landmark observation model, Bayes update and support entropy."""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, Optional

from .errors import InconsistentObservation

if TYPE_CHECKING:
    from .core import LandmarkSpec, Scenario

SUPPORT_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class Belief:
    probs: Mapping[str, float]

    def __post_init__(self):
        probs = dict(self.probs)
        if not probs:
            raise ValueError("belief needs at least one context")
        if any(not 0.0 <= p <= 1.0 for p in probs.values()):
            raise ValueError(f"probabilities outside [0, 1]: {probs}")
        if abs(sum(probs.values()) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {sum(probs.values())}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, context_ids: Iterable[str]) -> "Belief":
        ids = list(context_ids)
        return cls({c: 1.0 / len(ids) for c in ids})

    @classmethod
    def point(cls, context_ids: Iterable[str], cid: str) -> "Belief":
        return cls({c: 1.0 if c == cid else 0.0 for c in context_ids})

    def __getitem__(self, cid: str) -> float:
        return self.probs.get(cid, 0.0)

    def __eq__(self, other):
        if not isinstance(other, Belief):
            return NotImplemented
        keys = set(self.probs) | set(other.probs)
        return all(self[k] == other[k] for k in keys)

    def __repr__(self):
        inner = ", ".join(f"{k}: {v:.4g}" for k, v in self.probs.items())
        return f"Belief({{{inner}}})"

    @property
    def support(self) -> frozenset:
        return frozenset(c for c, p in self.probs.items() if p > SUPPORT_EPS)

    def argmax(self) -> str:
        # first declared context wins ties
        return max(self.probs, key=lambda c: self.probs[c])


@dataclass(frozen=True)
class Observation:
    """Set of contexts consistent with what was sensed.

    ``source`` is the landmark id, or None for an uninformative step whose
    ``context_set`` is the full context set.
    """

    context_set: frozenset
    source: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "context_set", frozenset(self.context_set))
        if not self.context_set:
            raise ValueError("observation context set must be non-empty")


def entropy(b: Belief) -> int:
    """Number of contexts still feasible, minus one."""
    return len(b.support) - 1


def observe(s: "Scenario", landmark_id: str, robots_present: int) -> Observation:
    lm = s.landmark(landmark_id)
    tier = lm.tier_for(robots_present)
    if tier is None:
        return Observation(frozenset(s.context_ids), landmark_id)
    return Observation(tier.cell_of(s.true_context), landmark_id)


def update_belief(b: Belief, obs: Observation) -> Belief:
    omega = obs.context_set
    if b.support <= omega:
        return b
    mass = sum(p for c, p in b.probs.items() if c in omega)
    if mass <= 0.0:
        raise InconsistentObservation(f"observation {sorted(omega)} has zero prior mass under {b!r}")
    return Belief({c: (p / mass if c in omega else 0.0) for c, p in b.probs.items()})


def expected_entropy_reduction(b: Belief, lm: "LandmarkSpec", k: int) -> float:
    """Entropy drop expected from observing ``lm`` with ``k`` robots.

    The expectation runs over the true context drawn from ``b``; each context
    deterministically produces the partition cell containing it.
    """
    tier = lm.tier_for(k)
    if tier is None:
        return 0.0
    h = entropy(b)
    support = b.support
    total = 0.0
    for cell in tier.partition:
        alive = cell & support
        if not alive:
            continue
        mass = sum(b[c] for c in alive)
        total += mass * (h - (len(alive) - 1))
    return total
