"""Exponent bookkeeping shared by the operators, forms and weight classes.

Slot indices (``tau``, ``tau_prime``) are 0-based in the library; the CLI
accepts 1-based lists and converts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

__all__ = ["ExponentConfig", "ExponentError", "dual", "recip"]

_TOL = 1e-12


class ExponentError(ValueError):
    """Raised with every violated constraint, not just the first."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def recip(x: float) -> float:
    """``1/x`` with ``1/inf = 0``."""
    return 0.0 if math.isinf(x) else 1.0 / x


def dual(x: float) -> float:
    """Hölder conjugate ``x/(x-1)``; ``1 <-> inf``."""
    if math.isinf(x):
        return 1.0
    if x == 1:
        return math.inf
    return x / (x - 1.0)


def _tuple(v, m, cast=float):
    if v is None:
        return None
    if isinstance(v, (int, float)):
        return (cast(v),) * m
    return tuple(cast(x) for x in v)


@dataclass(frozen=True)
class ExponentConfig:
    m: int = 1
    eta: float = 0.0
    r: tuple = (1.0,)
    s: float | None = None
    s_prime: float | None = None
    p: tuple | None = None
    q: float | None = None
    z: float = 1.0
    k: tuple | None = None
    t: tuple | None = None
    tau: frozenset = field(default_factory=frozenset)
    tau_prime: frozenset | None = None

    def __post_init__(self) -> None:
        m = int(self.m)
        bad: list[str] = []
        if m < 1:
            raise ExponentError([f"arity m must be >= 1, got {self.m}"])
        set_ = lambda name, val: object.__setattr__(self, name, val)
        set_("m", m)
        set_("eta", float(self.eta))
        set_("r", _tuple(self.r, m))
        set_("p", _tuple(self.p, m))
        set_("k", _tuple(0 if self.k is None else self.k, m, int))
        set_("t", _tuple(0 if self.t is None else self.t, m, int))
        set_("tau", frozenset(int(i) for i in self.tau))
        if self.tau_prime is not None:
            set_("tau_prime", frozenset(int(i) for i in self.tau_prime))

        # eta < m is left to the operators that need it; the sparse forms
        # are also used with eta = m
        if not (0 <= self.eta < math.inf):
            bad.append(f"eta must be finite and >= 0, got {self.eta}")
        for name in ("r", "k", "t") + (("p",) if self.p is not None else ()):
            if len(getattr(self, name)) != m:
                bad.append(f"{name} must have m = {m} entries")
        if any(not (1 <= ri < math.inf) for ri in self.r):
            bad.append("each r_i must lie in [1, inf)")
        if self.p is not None and any(not (1 < pi < math.inf) for pi in self.p):
            bad.append("each p_i must lie in (1, inf)")
        if any(x < 0 for x in self.k + self.t):
            bad.append("k and t must be nonnegative integers")
        if any(ti > ki for ti, ki in zip(self.t, self.k)):
            bad.append("t <= k violated")
        if not self.tau <= set(range(m)):
            bad.append(f"tau must be a subset of the slots 1..{m}")
        if self.tau_prime is not None and not self.tau_prime <= self.tau:
            bad.append("tau' must be a subset of tau")
        if not self.z >= 1:
            bad.append(f"z must be >= 1, got {self.z}")

        # dual-side averaging exponents
        s, sp = self.s, self.s_prime
        if s is not None and not s >= 1:
            bad.append(f"s must be >= 1, got {s}")
        if sp is not None and not (1 <= sp < math.inf):
            bad.append(f"s' must lie in [1, inf), got {sp}")
        if not bad:
            if s is None and sp is None:
                s, sp = math.inf, 1.0
            elif s is None:
                s = dual(sp)
            elif sp is None:
                sp = dual(s)
            elif abs(recip(s) + recip(sp) - 1) > _TOL:
                bad.append(f"s' = s/(s-1) violated (s={s}, s'={sp})")
            set_("s", float(s))
            set_("s_prime", float(sp))

        if self.p is not None and not bad:
            inv_q = sum(1.0 / pi for pi in self.p) - self.eta
            if self.q is None:
                if inv_q <= 0:
                    bad.append("1/q = sum 1/p_i - eta must be positive")
                else:
                    set_("q", 1.0 / inv_q)
            elif abs(recip(self.q) - inv_q) > _TOL:
                bad.append("1/q = sum 1/p_i - eta violated")
        if bad:
            raise ExponentError(bad)

    # orderings between (r, s) and (p, q)
    def _need_pq(self):
        if self.p is None:
            raise ExponentError(["p is required for this ordering"])

    # compared through reciprocals with a tolerance, so derived duals such as
    # s = 4.000000000000001 still count as equal to q = 4
    def _lt(self, a: float, b: float) -> bool:
        return recip(a) > recip(b) + _TOL

    def _le(self, a: float, b: float) -> bool:
        return recip(a) >= recip(b) - _TOL

    def prec(self) -> bool:
        """``r < p`` componentwise and ``q < s``."""
        self._need_pq()
        return all(self._lt(ri, pi) for ri, pi in zip(self.r, self.p)) and self._lt(self.q, self.s)

    def preceq(self) -> bool:
        """``r <= p`` componentwise and ``q < s``."""
        self._need_pq()
        return all(self._le(ri, pi) for ri, pi in zip(self.r, self.p)) and self._lt(self.q, self.s)

    def preceq_star(self) -> bool:
        """``r <= p`` componentwise and ``q <= s``."""
        self._need_pq()
        return all(self._le(ri, pi) for ri, pi in zip(self.r, self.p)) and self._le(self.q, self.s)

    @property
    def q_prime(self) -> float:
        self._need_pq()
        return dual(self.q)

    def lifted(self) -> "ExponentConfig":
        """(m+1)-slot configuration pairing ``g`` with ``L^{q'}`` and ``r_{m+1} = s'``.

        The extra slot absorbs ``mu(Q)``, so the lifted operator has ``eta = 0``
        and target exponent ``1/q_lift = 1/q + eta + 1/q' = 1 + eta``.
        """
        self._need_pq()
        qp = self.q_prime
        if math.isinf(qp):
            raise ExponentError(["lifting needs q > 1"])
        return ExponentConfig(
            m=self.m + 1, eta=0.0, r=self.r + (self.s_prime,), s=math.inf,
            p=self.p + (qp,), q=1.0 / (1.0 + self.eta),
            z=self.z, k=self.k + (0,), t=self.t + (0,), tau=self.tau,
        )

    def with_(self, **kw) -> "ExponentConfig":
        if "s" in kw and "s_prime" not in kw:
            kw["s_prime"] = None
        if "s_prime" in kw and "s" not in kw:
            kw["s"] = None
        if ("p" in kw or "eta" in kw) and "q" not in kw:
            kw["q"] = None
        return replace(self, **kw)

    def describe(self) -> dict:
        return {
            "m": self.m, "eta": self.eta, "r": list(self.r), "s": self.s,
            "s_prime": self.s_prime, "p": None if self.p is None else list(self.p),
            "q": self.q, "z": self.z, "k": list(self.k), "t": list(self.t),
            "tau": sorted(i + 1 for i in self.tau),
        }

