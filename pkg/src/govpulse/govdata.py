"""Canonical data model and CSV ingestion for DAO voting histories.

File formats
------------
votes.csv       poll_id,voter,option_id,weight,timestamp
polls.csv       poll_id,deploy_timestamp,title,options,abstain_options
                (options are ``id:label`` pairs joined by ``|``)
identities.csv  address,name
factors.csv     date,token,category,factor,value   (date = YYYY-MM-DD)

Timestamps are unix seconds or ISO-8601 UTC. Vote weights are parsed as
fixed-point decimals so that sums stay bit-stable across platforms; they are
converted to binary floats only inside the statistics layer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path


class SchemaError(ValueError):
    """A file header does not match the expected schema (fatal)."""


VOTES_HEADER = ["poll_id", "voter", "option_id", "weight", "timestamp"]
POLLS_HEADER = ["poll_id", "deploy_timestamp", "title", "options", "abstain_options"]
IDENTITIES_HEADER = ["address", "name"]
FACTORS_HEADER = ["date", "token", "category", "factor", "value"]

FACTOR_CATEGORIES = (
    "financial",
    "transaction",
    "exchange",
    "network",
    "sentiment",
    "instrument",
)


@dataclass(frozen=True)
class VoteEvent:
    """One weighted ballot action recorded in a poll's history."""

    poll_id: int
    voter: str
    option_id: int
    weight: Decimal
    timestamp: int


@dataclass(frozen=True)
class PollRecord:
    """A governance poll: deployment time, options, optional labelling."""

    poll_id: int
    deploy_timestamp: int
    options: tuple[tuple[int, str], ...] = ()
    abstain_option_ids: frozenset[int] = frozenset()
    title: str = ""
    category: str = ""


@dataclass(frozen=True)
class Anomaly:
    kind: str
    severity: str  # "warning" | "fatal"
    detail: str


@dataclass
class ValidationReport:
    """Counts plus the anomaly list produced by ingestion or a full scan."""

    events: int = 0
    polls: int = 0
    voters: int = 0
    anomalies: list[Anomaly] = field(default_factory=list)

    def add(self, kind: str, detail: str, severity: str = "warning") -> None:
        self.anomalies.append(Anomaly(kind=kind, severity=severity, detail=detail))

    @property
    def fatal(self) -> bool:
        return any(a.severity == "fatal" for a in self.anomalies)

    def counts_by_kind(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for a in self.anomalies:
            out[a.kind] = out.get(a.kind, 0) + 1
        return out


@dataclass(frozen=True)
class FinalBallot:
    """A voter's counted record in one poll.

    ``history_order_index`` is the 1-based position of the counted record in
    the poll's full chronological event history (n records in total);
    ``first_seen_index`` is the position of the voter's first record, kept for
    the first-appearance voting-order convention.
    """

    voter: str
    option_id: int
    weight: Decimal
    final_timestamp: int
    history_order_index: int
    first_seen_index: int


@dataclass(frozen=True)
class Winner:
    """Winning option of a poll, with the tie flag and per-option totals."""

    option_id: int
    tied: bool
    totals: tuple[tuple[int, Decimal], ...]


class VoteLog:
    """Immutable container for a parsed voting history.

    Events are stored sorted by (timestamp, input order); every event's
    poll_id resolves in the registry.
    """

    def __init__(
        self,
        events: list[VoteEvent],
        registry: dict[int, PollRecord],
        identities: dict[str, str] | None = None,
        report: ValidationReport | None = None,
    ) -> None:
        decorated = sorted((e.timestamp, i) for i, e in enumerate(events))
        self.events: tuple[VoteEvent, ...] = tuple(events[i] for _, i in decorated)
        self.registry: dict[int, PollRecord] = dict(registry)
        self.identities: dict[str, str] = dict(identities or {})
        self.report: ValidationReport = report or ValidationReport()
        self._by_poll: dict[int, list[VoteEvent]] = {}
        for ev in self.events:
            self._by_poll.setdefault(ev.poll_id, []).append(ev)
        self.report.events = len(self.events)
        self.report.polls = len(self.registry)
        self.report.voters = len({e.voter for e in self.events})

    def poll_events(self, poll_id: int) -> list[VoteEvent]:
        """Chronological event history of one poll (empty when no votes)."""
        return list(self._by_poll.get(poll_id, ()))

    def poll_ids(self) -> list[int]:
        return sorted(self.registry)

    def voters(self) -> set[str]:
        return {e.voter for e in self.events}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VoteLog):
            return NotImplemented
        return (
            self.events == other.events
            and self.registry == other.registry
            and self.identities == other.identities
        )


class FactorPanel:
    """Date-indexed factor values keyed by (date, token, category, factor)."""

    def __init__(self) -> None:
        self.cells: dict[tuple[date, str, str, str], float] = {}
        self.anomalies: list[Anomaly] = []

    def put(self, day: date, token: str, category: str, factor: str, value: float) -> None:
        key = (day, token, category, factor)
        if key in self.cells:
            self.anomalies.append(
                Anomaly(
                    kind="duplicate factor cell",
                    severity="warning",
                    detail=f"{day.isoformat()}/{token}/{category}/{factor}: last value wins",
                )
            )
        self.cells[key] = value

    def series(self, token: str, factor: str, category: str | None = None) -> dict[date, float]:
        out: dict[date, float] = {}
        for (day, tok, cat, name), value in self.cells.items():
            if tok == token and name == factor and (category is None or cat == category):
                out[day] = value
        return dict(sorted(out.items()))

    def instrument_series(self, factor: str = "offchain_voters") -> dict[date, float]:
        """The off-chain instrument rows (category ``instrument``), any token."""
        out: dict[date, float] = {}
        for (day, _tok, cat, name), value in self.cells.items():
            if cat == "instrument" and name == factor:
                out[day] = value
        return dict(sorted(out.items()))

    def tokens(self) -> list[str]:
        return sorted({tok for (_, tok, cat, _) in self.cells if cat != "instrument"})

    def dates(self) -> list[date]:
        return sorted({day for (day, _, _, _) in self.cells})

    def __len__(self) -> int:
        return len(self.cells)


def parse_timestamp(raw: str) -> int:
    """Parse unix seconds or ISO-8601 UTC into unix seconds."""
    text = raw.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return int(float(text))
    except ValueError:
        pass
    iso = text.replace("Z", "+00:00")
    dt = datetime.fromisoformat(iso)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _read_rows(path: str | Path, expected_header: list[str]) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected header {expected_header}")
        header = [h.strip() for h in header]
        if header != expected_header:
            raise SchemaError(f"{path}: header {header} does not match {expected_header}")
        rows = []
        for raw in reader:
            if not raw or all(not cell.strip() for cell in raw):
                continue
            if len(raw) < len(expected_header):  # short row: parse fails downstream
                raw = raw + [""] * (len(expected_header) - len(raw))
            rows.append(dict(zip(expected_header, raw)))
        return rows


def _parse_options(text: str) -> tuple[tuple[int, str], ...]:
    text = text.strip()
    if not text:
        return ()
    out = []
    for chunk in text.split("|"):
        opt_id, _, label = chunk.partition(":")
        out.append((int(opt_id), label))
    return tuple(out)


def load_polls(path: str | Path, report: ValidationReport | None = None) -> dict[int, PollRecord]:
    report = report if report is not None else ValidationReport()
    registry: dict[int, PollRecord] = {}
    for lineno, row in enumerate(_read_rows(path, POLLS_HEADER), start=2):
        try:
            poll_id = int(row["poll_id"])
            deploy = parse_timestamp(row["deploy_timestamp"])
            options = _parse_options(row["options"])
            abstain_text = row["abstain_options"].strip()
            abstain = frozenset(int(x) for x in abstain_text.split("|") if x.strip())
        except (ValueError, InvalidOperation) as exc:
            report.add("bad poll row", f"line {lineno}: {exc}")
            continue
        if poll_id <= 0 or deploy <= 0:
            report.add("bad poll row", f"line {lineno}: non-positive poll_id or deploy timestamp")
            continue
        option_ids = [oid for oid, _ in options]
        if len(option_ids) != len(set(option_ids)):
            report.add("duplicate option ids", f"poll {poll_id}")
        if poll_id in registry:
            report.add("duplicate poll id", f"poll {poll_id}: last row wins")
        registry[poll_id] = PollRecord(
            poll_id=poll_id,
            deploy_timestamp=deploy,
            options=options,
            abstain_option_ids=abstain,
            title=row["title"],
        )
    return registry


def load_identities(path: str | Path, report: ValidationReport | None = None) -> dict[str, str]:
    report = report if report is not None else ValidationReport()
    identities: dict[str, str] = {}
    for lineno, row in enumerate(_read_rows(path, IDENTITIES_HEADER), start=2):
        address = row["address"].strip().lower()
        if not address:
            report.add("bad identity row", f"line {lineno}: empty address")
            continue
        if address in identities:
            report.add("duplicate identity", f"{address}: last row wins")
        identities[address] = row["name"].strip()
    return identities


def load_vote_log(
    votes_path: str | Path,
    polls_path: str | Path,
    identities_path: str | Path | None = None,
) -> VoteLog:
    """Load the votes/polls/identities exports into a VoteLog.

    Malformed rows are skipped and recorded as anomalies attached to the
    result; missing files and malformed headers raise.
    """
    report = ValidationReport()
    registry = load_polls(polls_path, report)
    identities = load_identities(identities_path, report) if identities_path else {}

    events: list[VoteEvent] = []
    for lineno, row in enumerate(_read_rows(votes_path, VOTES_HEADER), start=2):
        try:
            poll_id = int(row["poll_id"])
            voter = row["voter"].strip().lower()
            option_id = int(row["option_id"])
            weight = Decimal(row["weight"].strip())
            timestamp = parse_timestamp(row["timestamp"])
        except (ValueError, ArithmeticError) as exc:
            report.add("bad vote row", f"line {lineno}: {exc}")
            continue
        if not voter:
            report.add("bad vote row", f"line {lineno}: empty voter address")
            continue
        if weight < 0:
            report.add("negative weight", f"line {lineno}: poll {poll_id}, voter {voter}")
            continue
        if poll_id not in registry:
            report.add("unknown poll", f"line {lineno}: poll {poll_id} not in registry")
            continue
        events.append(
            VoteEvent(
                poll_id=poll_id,
                voter=voter,
                option_id=option_id,
                weight=weight,
                timestamp=timestamp,
            )
        )
    return VoteLog(events, registry, identities, report)


def load_factors(path: str | Path) -> FactorPanel:
    """Load the long-format factor export; duplicates last-win with anomaly."""
    from govpulse.factorlab import is_known_factor

    panel = FactorPanel()
    for lineno, row in enumerate(_read_rows(path, FACTORS_HEADER), start=2):
        try:
            day = date.fromisoformat(row["date"].strip())
        except ValueError:
            panel.anomalies.append(
                Anomaly("bad factor date", "warning", f"line {lineno}: {row['date']!r}")
            )
            continue
        try:
            value = float(row["value"])
        except ValueError:
            panel.anomalies.append(
                Anomaly("bad factor value", "warning", f"line {lineno}: {row['value']!r}")
            )
            continue
        if value != value or value in (float("inf"), float("-inf")):
            panel.anomalies.append(
                Anomaly("bad factor value", "warning", f"line {lineno}: non-finite, skipped")
            )
            continue
        token = row["token"].strip()
        category = row["category"].strip()
        factor = row["factor"].strip()
        if category not in FACTOR_CATEGORIES:
            panel.anomalies.append(
                Anomaly("unknown category", "warning", f"line {lineno}: {category!r}")
            )
        elif not is_known_factor(token, category, factor):
            panel.anomalies.append(
                Anomaly("unknown factor", "warning", f"line {lineno}: {token}/{factor} kept, flagged")
            )
        panel.put(day, token, category, factor, value)
    return panel


def final_ballots(log: VoteLog, poll_id: int, rule: str = "last") -> list[FinalBallot]:
    """One counted ballot per voter for a poll.

    ``rule="last"`` counts a voter's final record (portal semantics);
    ``rule="first"`` counts the first. Output is sorted by weight descending
    with ties broken by final timestamp ascending, then address.
    """
    if rule not in ("last", "first"):
        raise ValueError(f"unknown ballot rule: {rule!r}")
    if poll_id not in log.registry:
        raise KeyError(f"poll {poll_id} not in registry")
    history = log.poll_events(poll_id)
    counted: dict[str, tuple[VoteEvent, int]] = {}
    first_seen: dict[str, int] = {}
    for index, event in enumerate(history, start=1):
        first_seen.setdefault(event.voter, index)
        if rule == "last" or event.voter not in counted:
            counted[event.voter] = (event, index)
    ballots = [
        FinalBallot(
            voter=voter,
            option_id=event.option_id,
            weight=event.weight,
            final_timestamp=event.timestamp,
            history_order_index=index,
            first_seen_index=first_seen[voter],
        )
        for voter, (event, index) in counted.items()
    ]
    ballots.sort(key=lambda b: (-b.weight, b.final_timestamp, b.voter))
    return ballots


def winning_option(
    ballots: list[FinalBallot], exclude_options: frozenset[int] | set[int] = frozenset()
) -> Winner:
    """Option with the largest summed final weight; ties go to the smallest id."""
    totals: dict[int, Decimal] = {}
    for ballot in ballots:
        if ballot.option_id in exclude_options:
            continue
        totals[ballot.option_id] = totals.get(ballot.option_id, Decimal(0)) + ballot.weight
    if not totals:
        raise ValueError("no votes")
    best = max(totals.values())
    winners = sorted(oid for oid, total in totals.items() if total == best)
    return Winner(
        option_id=winners[0],
        tied=len(winners) > 1,
        totals=tuple(sorted(totals.items())),
    )


def validate_dataset(log: VoteLog) -> ValidationReport:
    """Full anomaly scan of a loaded log (report-only, deterministic order)."""
    report = ValidationReport()
    report.events = len(log.events)
    report.polls = len(log.registry)
    report.voters = len(log.voters())
    seen_keys: set[tuple[int, str, int]] = set()
    for event in log.events:
        poll = log.registry.get(event.poll_id)
        if poll is None:
            report.add("unknown poll", f"event poll {event.poll_id}", severity="fatal")
            continue
        if event.timestamp < poll.deploy_timestamp:
            report.add(
                "pre-deploy vote",
                f"poll {event.poll_id}, voter {event.voter}: "
                f"{event.timestamp} < deploy {poll.deploy_timestamp}",
            )
        if event.weight == 0:
            report.add("zero weight", f"poll {event.poll_id}, voter {event.voter}")
        key = (event.poll_id, event.voter, event.timestamp)
        if key in seen_keys:
            report.add("duplicate key", f"poll {event.poll_id}, voter {event.voter}, t={event.timestamp}")
        seen_keys.add(key)
    for poll in sorted(log.registry.values(), key=lambda p: p.poll_id):
        option_ids = [oid for oid, _ in poll.options]
        if len(option_ids) != len(set(option_ids)):
            report.add("duplicate option ids", f"poll {poll.poll_id}")
        unknown_abstain = poll.abstain_option_ids - set(option_ids)
        if poll.options and unknown_abstain:
            report.add("abstain id not an option", f"poll {poll.poll_id}: {sorted(unknown_abstain)}")
    return report


def write_vote_log(
    log: VoteLog,
    votes_path: str | Path,
    polls_path: str | Path,
    identities_path: str | Path | None = None,
) -> None:
    """Serialize a VoteLog back to the CSV schemas (round-trip safe)."""
    with Path(votes_path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(VOTES_HEADER)
        for event in log.events:
            writer.writerow(
                [event.poll_id, event.voter, event.option_id, str(event.weight), event.timestamp]
            )
    with Path(polls_path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(POLLS_HEADER)
        for poll in sorted(log.registry.values(), key=lambda p: p.poll_id):
            options = "|".join(f"{oid}:{label}" for oid, label in poll.options)
            abstain = "|".join(str(oid) for oid in sorted(poll.abstain_option_ids))
            writer.writerow([poll.poll_id, poll.deploy_timestamp, poll.title, options, abstain])
    if identities_path is not None:
        with Path(identities_path).open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(IDENTITIES_HEADER)
            for address in sorted(log.identities):
                writer.writerow([address, log.identities[address]])


def write_factors(panel: FactorPanel, path: str | Path) -> None:
    """Serialize a FactorPanel to the long-format factors schema."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(FACTORS_HEADER)
        for (day, token, category, factor), value in sorted(panel.cells.items()):
            writer.writerow([day.isoformat(), token, category, factor, repr(value)])
