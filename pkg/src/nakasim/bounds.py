"""Closed-form bound calculators and the two counting processes N(t) and J(m).

Probabilities use log1p/expm1 so that (1-p)^k and 1-(1-p)^k keep full
relative precision even for tiny p.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction


def honest_majority_p_bound(n, b):
    """Largest p for which the honest-majority analysis applies, exactly."""
    if not 0 <= b < n:
        raise ValueError("need 0 <= b < n")
    # negative when b > n/2: no p satisfies the condition
    return Fraction(n - 2 * b, 2 * (n - b) ** 2)


def _pow1m(p, k):
    """(1-p)^k"""
    return math.exp(k * math.log1p(-p))


def _one_minus_pow1m(p, k):
    """1-(1-p)^k"""
    return -math.expm1(k * math.log1p(-p))


@dataclass(frozen=True)
class TransitionProbs:
    p_plus: float
    p_minus: float

    @property
    def p_star(self):
        return self.p_plus + self.p_minus

    @property
    def drift(self):
        return self.p_plus - self.p_minus


def transition_probs(n, b, p):
    """Probabilities that a nonempty round is honest-only (+) or corrupt-only (-)."""
    if not 0 <= b < n:
        raise ValueError("need 0 <= b < n")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    nonempty = _one_minus_pow1m(p, n)
    plus = _pow1m(p, b) * _one_minus_pow1m(p, n - b) / nonempty
    minus = _one_minus_pow1m(p, b) * _pow1m(p, n - b) / nonempty
    return TransitionProbs(plus, minus)


def beta(n, b, p):
    return (n - b) * p / (2 * (3 * n * p) ** 2)


def m_star(p_plus, p_minus, beta_, epsilon):
    d = p_plus - p_minus
    if d <= 0:
        return math.inf
    ps = p_plus + p_minus
    return max(4 * math.log(1 / epsilon) / ps ** 2,
               4 / (beta_ * d),
               16 * ps / d ** 2 * math.log(4 / epsilon))


@dataclass(frozen=True)
class BoundParams:
    n: int
    b: int
    p: float
    p_plus: float
    p_minus: float
    beta: float
    epsilon: float | None = None
    M_star: float = math.inf
    side_condition_ok: bool = True

    @property
    def p_star(self):
        return self.p_plus + self.p_minus

    @property
    def drift(self):
        return self.p_plus - self.p_minus

    @property
    def vacuous(self):
        return self.drift <= 0


def bound_params(n, b, p, epsilon=None):
    tp = transition_probs(n, b, p)
    return BoundParams(n, b, p, tp.p_plus, tp.p_minus, beta(n, b, p), epsilon)


def inconsistency_theorem_params(n, b, p, epsilon):
    """Parameters of the adversarial inconsistency theorem.

    M_star is rounded up to an integer count of nonempty rounds; it is inf
    when p_plus <= p_minus. side_condition_ok reports n >= 2 log(4/(eps beta)).
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    bp = bound_params(n, b, p, epsilon)
    ms = m_star(bp.p_plus, bp.p_minus, bp.beta, epsilon)
    side = n >= 2 * math.log(4 / (epsilon * bp.beta))
    return dataclasses.replace(bp, M_star=math.ceil(ms) if math.isfinite(ms) else ms,
                               side_condition_ok=side)


@dataclass(frozen=True)
class Probability:
    value: float
    raw: float
    vacuous: bool


@dataclass(frozen=True)
class OpportunityBound:
    threshold: float
    success_probability: float
    vacuous: bool


def opportunity_lower_bound(params, M):
    """J(M) >= (p+ - p-) M / 4 with at least the returned probability."""
    d, ps = params.drift, params.p_star
    raw = 1.0 - math.exp(-d * d * M / (16 * ps)) - math.exp(-ps * ps * M / 2)
    return OpportunityBound(d * M / 4, min(max(raw, 0.0), 1.0), raw <= 0 or d <= 0)


def theorem_probability(params, M):
    """The adversarial theorem's probability expression, clamped to [0, 1]."""
    ps, d = params.p_star, params.drift
    raw = (1.0 - math.exp(-ps * ps * M / 2) - math.exp(-d * d * M / (16 * ps))
           - 2 / params.beta * math.exp(-(params.n - params.b) / 2))
    return Probability(min(max(raw, 0.0), 1.0), raw, raw <= 0 or d <= 0)


def growth_term(n, p, t):
    return 1 + (-math.expm1(n * math.log1p(-p)) if p < 1 else 1.0) * t


LOW_P_CUTOFF = 4 * math.log(2)


@dataclass(frozen=True)
class GrowthBound:
    growth_term: float
    slack_term: float
    regime: str

    @property
    def interval(self):
        return (self.growth_term - self.slack_term, self.growth_term)


def expected_growth_general_p(n, p, t, calibration=None):
    """Expected common-prefix length and the inconsistency slack below it.

    The regime switches at np = 4 ln 2. In the sparse regime the slack is
    1/(np e^{-np}); in the dense regime it is c * 2np / (1 - 2 e^{-np/3})
    with c the calibrated lazy-walk constant.
    """
    from .calibration import load_calibration
    cal = load_calibration() if calibration is None else calibration
    np_ = n * p
    if np_ <= 0:
        return GrowthBound(1.0, 0.0, "empty")
    g = growth_term(n, p, t)
    if np_ < LOW_P_CUTOFF:
        return GrowthBound(g, 1.0 / (np_ * math.exp(-np_)), "sparse")
    slack = cal.walk_envelope * 2 * np_ / (1 - 2 * math.exp(-np_ / 3))
    return GrowthBound(g, slack, "dense")


def lazy_walk_params(n, p):
    """Vertex count and laziness of the walk that dominates general-p inconsistency.

    The walk lives on ceil(2np) vertices and stays put in a round whenever
    the number of mining nodes is zero or at least 2np.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    n_g = max(1, math.ceil(2 * n * p))
    stay = math.exp(n * math.log1p(-p)) if p < 1 else 0.0
    stay += sum(math.comb(n, k) * p ** k * (1 - p) ** (n - k) for k in range(n_g, n + 1))
    return n_g, min(1.0, max(1.0 - stay, 1e-12))


def expected_prefix_p1(n, t, calibration=None):
    """Interval for the common prefix at p = 1, b = 0: [t + 1 - c n, t + 1]."""
    if n == 1:
        return (t + 1.0, t + 1.0)
    from .calibration import load_calibration
    cal = load_calibration() if calibration is None else calibration
    return (t + 1 - cal.walk_envelope * n, t + 1.0)


# counting processes

@dataclass
class AdvantageProcess:
    """N(t): +1 on corrupt-only rounds, -1 (floored at 0) on honest-only rounds."""
    value: int = 0
    history: list = field(default_factory=list)


def update_advantage(proc, NB, AB):
    if NB < 0 or AB < 0:
        raise ValueError("negative block count")
    if NB == 0 and AB > 0:
        proc.value += 1
    elif NB > 0 and AB == 0:
        proc.value = max(proc.value - 1, 0)
    proc.history.append(proc.value)
    return proc


@dataclass
class OpportunityWalk:
    """J(m) over nonempty rounds: +1 honest-only, -1 corrupt-only, 0 mixed."""
    value: int = 0
    m: int = 0
    p_plus: float | None = None
    p_minus: float | None = None
    history: list = field(default_factory=list)

    @property
    def p_star(self):
        if self.p_plus is None:
            return None
        return self.p_plus + self.p_minus


class ContractError(ValueError):
    """A tracker was fed an input its definition excludes."""


def update_opportunity(walk, NB, AB):
    if NB < 0 or AB < 0:
        raise ValueError("negative block count")
    if NB + AB == 0:
        raise ContractError("J only moves on nonempty rounds")
    walk.m += 1
    if AB == 0:
        walk.value += 1
    elif NB == 0:
        walk.value -= 1
    walk.history.append(walk.value)
    return walk


def window_opportunity(NB, AB, m):
    """J over the last m nonempty rounds of a record, read backwards in time."""
    total = 0
    seen = 0
    for nb, ab in zip(reversed(NB), reversed(AB)):
        if nb + ab == 0:
            continue
        seen += 1
        total += 1 if ab == 0 else (-1 if nb == 0 else 0)
        if seen == m:
            break
    return total


def all_bounds(n, b, p, epsilon, M=None):
    """Every calculator for one parameter tuple, as plain values."""
    out = {"n": n, "b": b, "p": p, "epsilon": epsilon}
    hb = honest_majority_p_bound(n, b)
    out["honest_majority_p_bound"] = str(hb)
    out["honest_majority_p_bound_float"] = float(hb)
    if 0 < p < 1:
        th = inconsistency_theorem_params(n, b, p, epsilon)
        out.update(p_plus=th.p_plus, p_minus=th.p_minus, p_star=th.p_star, beta=th.beta,
                   M_star=th.M_star, side_condition_ok=th.side_condition_ok)
        M = th.M_star if M is None else M
        if math.isfinite(M):
            ob = opportunity_lower_bound(th, M)
            tprob = theorem_probability(th, M)
            out.update(M=M, opportunity_threshold=ob.threshold,
                       opportunity_probability=ob.success_probability,
                       opportunity_vacuous=ob.vacuous,
                       theorem_probability=tprob.value, theorem_raw=tprob.raw,
                       theorem_vacuous=tprob.vacuous)
        g = expected_growth_general_p(n, p, 1)
        out.update(growth_rate=g.growth_term - 1, inconsistency_slack=g.slack_term,
                   regime=g.regime)
    else:
        out["M_star"] = None
    return out
