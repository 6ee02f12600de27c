"""Poll-level and daily centralization measurements.

Seven measures are computed per poll and aggregated to calendar days (UTC):
participation (voters, total votes), voting-power concentration (Gini,
largest-voter share, share-win, voting order) and decision speed (mean
seconds from deployment to each voter's counted choice).

The poll Gini is the mean-absolute-difference form

    G = sum_i sum_j |v_i - v_j| / (2 n^2 vbar)

over final ballot weights. The daily Gini pools each voter's weights across
the day's polls and fits a Paretian tail index by maximum likelihood,

    alpha_hat = n / sum_i ln(x_i / x_min),      G = 1 / (2 alpha_hat - 1),

clipped to [0, 1). Alternative daily estimators (mean of poll Ginis, pooled
sample Gini) are available for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from decimal import Decimal

import numpy as np

from govpulse.govdata import FinalBallot, VoteLog, final_ballots, winning_option

GINI_UPPER = 1.0 - 1e-9

MEASURES = (
    "Voters",
    "TotalVotes",
    "LargestShare",
    "LargestShareWin",
    "Gini",
    "Order",
    "Speed",
)

DAILY_GINI_MODES = ("mle", "mean_of_polls", "pooled_sample")
CALENDAR_MODES = ("drop-missing", "full-calendar")


@dataclass(frozen=True)
class PollMetrics:
    """Per-poll values of the centralization measures."""

    poll_id: int
    day: date
    total_votes: Decimal
    voters: int
    gini: float
    largest_share: float
    ifwin: int
    largest_share_win: float
    order: float
    speed_seconds: float
    breakdown_votes: Decimal
    breakdown_ratio: float
    breakdown_voters: int
    winner_option: int
    winner_tied: bool
    largest_votes: Decimal
    largest_voter: str


@dataclass(frozen=True)
class DailyMetrics:
    """Daily aggregation: sums for participation, means for the rest."""

    day: date
    poll_count: int
    voters: int
    total_votes: Decimal
    largest_share: float
    largest_share_win: float
    order: float
    speed: float
    gini: float
    missing: bool = False


@dataclass(frozen=True)
class LorenzCurve:
    """Cumulative vote share against population share, (0,0) to (1,1)."""

    points: tuple[tuple[float, float], ...]

    def area_gini(self) -> float:
        """Gini from trapezoid integration of the curve."""
        area = 0.0
        for (p0, l0), (p1, l1) in zip(self.points, self.points[1:]):
            area += (p1 - p0) * (l0 + l1) / 2.0
        return 1.0 - 2.0 * area


def utc_day(timestamp: int) -> date:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).date()


def _weights_array(ballots: list[FinalBallot]) -> np.ndarray:
    return np.array([float(b.weight) for b in ballots], dtype=float)


def poll_participation(ballots: list[FinalBallot]) -> tuple[Decimal, int]:
    """Total final votes and number of voters in one poll."""
    total = sum((b.weight for b in ballots), Decimal(0))
    return total, len(ballots)


def gini_mean_difference(weights: np.ndarray) -> float:
    """Mean-absolute-difference Gini over a weight vector.

    Returns 0 for fewer than two weights or an all-zero vector.
    """
    weights = np.asarray(weights, dtype=float)
    n = weights.size
    total = float(weights.sum())
    if n < 2 or total <= 0.0:
        return 0.0
    mean = total / n
    abs_diffs = np.abs(weights[:, None] - weights[None, :]).sum()
    return float(abs_diffs / (2.0 * n * n * mean))


def poll_gini(ballots: list[FinalBallot]) -> float:
    """Gini coefficient of one poll's final ballot weights."""
    return gini_mean_difference(_weights_array(ballots))


def pareto_alpha_mle(values: np.ndarray) -> float:
    """Paretian tail index alpha_hat = n / sum ln(x_i / x_min).

    Expects strictly positive values; returns inf when all values are equal.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float("inf")
    log_ratio_sum = float(np.log(values / values.min()).sum())
    if log_ratio_sum <= 0.0:
        return float("inf")
    return values.size / log_ratio_sum


def gini_from_alpha(alpha: float) -> float:
    """G = 1/(2 alpha - 1), clipped to [0, 1)."""
    if alpha != alpha:  # NaN guard
        return 0.0
    if alpha <= 0.5:
        return GINI_UPPER
    if np.isinf(alpha):
        return 0.0
    return float(min(max(1.0 / (2.0 * alpha - 1.0), 0.0), GINI_UPPER))


def daily_gini(ballots_of_day: list[FinalBallot]) -> float:
    """Daily Gini from the Paretian tail-index MLE on pooled voter totals.

    Each voter's final weights across the day's polls are summed first;
    non-positive totals are dropped; fewer than two positive totals give 0.
    """
    totals: dict[str, Decimal] = {}
    for ballot in ballots_of_day:
        totals[ballot.voter] = totals.get(ballot.voter, Decimal(0)) + ballot.weight
    positive = np.array([float(v) for v in totals.values() if v > 0], dtype=float)
    if positive.size < 2:
        return 0.0
    return gini_from_alpha(pareto_alpha_mle(positive))


def largest_voter_stats(
    ballots: list[FinalBallot],
    winner: int,
    n_records: int | None = None,
    order_rule: str = "last",
) -> tuple[float, int, float, float]:
    """Share, win indicator, share-win and voting order of the largest voter.

    Ballots must come from ``final_ballots`` (sorted largest first, ties by
    earliest final timestamp). ``n_records`` is the poll's full history
    length; when omitted it is recovered as the maximum counted index.
    """
    if not ballots:
        raise ValueError("no ballots")
    if order_rule not in ("last", "first"):
        raise ValueError(f"unknown order rule: {order_rule!r}")
    largest = ballots[0]
    total = sum((b.weight for b in ballots), Decimal(0))
    if total <= 0:
        raise ValueError("all ballots have zero weight")
    if n_records is None:
        n_records = max(b.history_order_index for b in ballots)
    largest_share = float(largest.weight / total)
    ifwin = 1 if largest.option_id == winner else 0
    index = largest.history_order_index if order_rule == "last" else largest.first_seen_index
    order = index / n_records
    return largest_share, ifwin, largest_share * ifwin, order


def poll_speed(ballots: list[FinalBallot], deploy_timestamp: int) -> float:
    """Mean seconds from deployment to each voter's counted choice.

    Negative gaps (clock skew) are clamped to zero.
    """
    if not ballots:
        raise ValueError("no ballots")
    gaps = [max(0, b.final_timestamp - deploy_timestamp) for b in ballots]
    return float(sum(gaps)) / len(gaps)


def poll_metrics(
    log: VoteLog,
    poll_id: int,
    ballot_rule: str = "last",
    order_rule: str = "last",
) -> PollMetrics | None:
    """All per-poll measures; None when the poll has no events."""
    poll = log.registry[poll_id]
    history = log.poll_events(poll_id)
    if not history:
        return None
    ballots = final_ballots(log, poll_id, rule=ballot_rule)
    total, voters = poll_participation(ballots)
    if total <= 0:
        return None
    winner = winning_option(ballots)
    share, ifwin, share_win, order = largest_voter_stats(
        ballots, winner.option_id, n_records=len(history), order_rule=order_rule
    )
    abstain = poll.abstain_option_ids
    breakdown = sum((b.weight for b in ballots if b.option_id not in abstain), Decimal(0))
    breakdown_voters = sum(1 for b in ballots if b.option_id not in abstain)
    return PollMetrics(
        poll_id=poll_id,
        day=utc_day(poll.deploy_timestamp),
        total_votes=total,
        voters=voters,
        gini=poll_gini(ballots),
        largest_share=share,
        ifwin=ifwin,
        largest_share_win=share_win,
        order=order,
        speed_seconds=poll_speed(ballots, poll.deploy_timestamp),
        breakdown_votes=breakdown,
        breakdown_ratio=float(breakdown / total),
        breakdown_voters=breakdown_voters,
        winner_option=winner.option_id,
        winner_tied=winner.tied,
        largest_votes=ballots[0].weight,
        largest_voter=ballots[0].voter,
    )


def all_poll_metrics(
    log: VoteLog, ballot_rule: str = "last", order_rule: str = "last"
) -> list[PollMetrics]:
    """Per-poll metrics for every poll with at least one positive ballot."""
    out = []
    for poll_id in log.poll_ids():
        pm = poll_metrics(log, poll_id, ballot_rule=ballot_rule, order_rule=order_rule)
        if pm is not None:
            out.append(pm)
    return out


def daily_metrics(
    log: VoteLog,
    calendar_mode: str = "drop-missing",
    daily_gini_mode: str = "mle",
    ballot_rule: str = "last",
    order_rule: str = "last",
) -> list[DailyMetrics]:
    """Aggregate poll metrics to calendar days (UTC) in ascending date order.

    Voters and total votes are summed over the day's polls; the share, order
    and speed measures are averaged; the Gini column follows
    ``daily_gini_mode``. In ``full-calendar`` mode, days without polls inside
    the covered range are emitted as zero rows with the missing flag set.
    """
    if calendar_mode not in CALENDAR_MODES:
        raise ValueError(f"unknown calendar mode: {calendar_mode!r}")
    if daily_gini_mode not in DAILY_GINI_MODES:
        raise ValueError(f"unknown daily gini mode: {daily_gini_mode!r}")

    per_day: dict[date, list[PollMetrics]] = {}
    ballots_by_day: dict[date, list[FinalBallot]] = {}
    poll_counts: dict[date, int] = {}
    for poll_id in log.poll_ids():
        day = utc_day(log.registry[poll_id].deploy_timestamp)
        poll_counts[day] = poll_counts.get(day, 0) + 1
        pm = poll_metrics(log, poll_id, ballot_rule=ballot_rule, order_rule=order_rule)
        if pm is None:
            continue
        per_day.setdefault(day, []).append(pm)
        ballots_by_day.setdefault(day, []).extend(final_ballots(log, poll_id, rule=ballot_rule))

    rows: list[DailyMetrics] = []
    for day in sorted(per_day):
        polls = per_day[day]
        n = len(polls)
        if daily_gini_mode == "mle":
            gini = daily_gini(ballots_by_day[day])
        elif daily_gini_mode == "mean_of_polls":
            gini = sum(p.gini for p in polls) / n
        else:
            totals: dict[str, Decimal] = {}
            for ballot in ballots_by_day[day]:
                totals[ballot.voter] = totals.get(ballot.voter, Decimal(0)) + ballot.weight
            weights = np.array([float(v) for v in totals.values() if v > 0], dtype=float)
            gini = gini_mean_difference(weights)
        rows.append(
            DailyMetrics(
                day=day,
                poll_count=poll_counts[day],
                voters=sum(p.voters for p in polls),
                total_votes=sum((p.total_votes for p in polls), Decimal(0)),
                largest_share=sum(p.largest_share for p in polls) / n,
                largest_share_win=sum(p.largest_share_win for p in polls) / n,
                order=sum(p.order for p in polls) / n,
                speed=sum(p.speed_seconds for p in polls) / n,
                gini=gini,
            )
        )

    if calendar_mode == "full-calendar" and rows:
        filled: list[DailyMetrics] = []
        have = {r.day: r for r in rows}
        day = rows[0].day
        last = rows[-1].day
        while day <= last:
            if day in have:
                filled.append(have[day])
            else:
                filled.append(
                    DailyMetrics(
                        day=day,
                        poll_count=poll_counts.get(day, 0),
                        voters=0,
                        total_votes=Decimal(0),
                        largest_share=0.0,
                        largest_share_win=0.0,
                        order=0.0,
                        speed=0.0,
                        gini=0.0,
                        missing=True,
                    )
                )
            day = day + timedelta(days=1)
        rows = filled
    return rows


def lorenz_points(ballots: list[FinalBallot] | np.ndarray) -> LorenzCurve:
    """Lorenz curve of final ballot weights, ascending, prepended with (0,0)."""
    if isinstance(ballots, np.ndarray):
        weights = np.asarray(ballots, dtype=float)
    else:
        weights = _weights_array(ballots)
    total = float(weights.sum())
    if weights.size == 0 or total <= 0.0:
        raise ValueError("lorenz curve requires at least one positive weight")
    ordered = np.sort(weights)
    cumulative = np.cumsum(ordered) / total
    n = ordered.size
    points = [(0.0, 0.0)]
    points.extend(((k + 1) / n, float(cumulative[k])) for k in range(n))
    return LorenzCurve(points=tuple(points))
