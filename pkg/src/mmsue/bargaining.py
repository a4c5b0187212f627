"""Per-provider profit accounting and asymmetric Nash bargaining."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, NoSurplus


@dataclass(frozen=True)
class ProviderMap:
    """Link-to-provider assignment as an L x S 0/1 matrix ``Z``."""

    Z: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] != len(self.names):
            raise DomainError("Z must be L x S with one column per provider name")
        if not np.all((Z == 0) | (Z == 1)) or not np.all(Z.sum(axis=1) == 1):
            raise DomainError("every link must belong to exactly one provider")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def from_owners(cls, owners: Sequence[int], names: Sequence[str]) -> "ProviderMap":
        """Build from a per-link provider index (positions into ``names``)."""
        owners = np.asarray(owners, dtype=int)
        if np.any(owners < 0) or np.any(owners >= len(names)):
            raise DomainError("provider index out of range")
        Z = np.zeros((len(owners), len(names)))
        Z[np.arange(len(owners)), owners] = 1.0
        return cls(Z, tuple(names))

    @property
    def n_providers(self) -> int:
        return self.Z.shape[1]


def provider_profits(f, J, profit_model, providers: ProviderMap) -> np.ndarray:
    """Profit of each provider: sum over its links of ``f_l (pi_l(f) + J_l)``."""
    f = np.asarray(f, dtype=float)
    J = np.asarray(J, dtype=float)
    if f.shape != J.shape or f.shape != (providers.Z.shape[0],):
        raise DomainError("flow, incentive and provider map dimensions differ")
    return providers.Z.T @ (f * (profit_model.profit(f) + J))


@dataclass(frozen=True)
class SharingResult:
    t: np.ndarray
    post: np.ndarray
    R_c: float
    R_star: np.ndarray

    @property
    def compensation(self) -> np.ndarray:
        return self.R_star - self.post

    @property
    def increase(self) -> np.ndarray:
        return self.R_star - self.t


def asymmetric_nash(R_c: float, t, theta, post=None) -> SharingResult:
    """Maximiser of ``sum theta_i ln(R_i - t_i)`` subject to ``sum R_i = R_c``.

    Each provider receives its disagreement payoff plus a ``theta``-weighted
    share of the cooperative surplus.  ``post`` (per-provider profit under
    cooperation before any transfer) only feeds the compensation column;
    it defaults to ``t``.
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if t.ndim != 1 or t.shape != theta.shape or len(t) == 0:
        raise DomainError("t and theta must be non-empty vectors of equal length")
    if np.any(theta <= 0):
        raise DomainError("bargaining weights must be positive")
    surplus = R_c - t.sum()
    if not surplus > 0:
        raise NoSurplus(f"cooperative profit {R_c:.6g} does not exceed disagreement total {t.sum():.6g}")
    R_star = t + theta / theta.sum() * surplus
    post = t.copy() if post is None else np.asarray(post, dtype=float)
    if post.shape != t.shape:
        raise DomainError("post must have one entry per provider")
    return SharingResult(t=t, post=post, R_c=float(R_c), R_star=R_star)


def equal_split(R_c: float, S: int) -> np.ndarray:
    if S < 1:
        raise DomainError("need at least one provider")
    return np.full(S, R_c / S)
