"""Evolution of seed QAs with attribute injection and a fact-checking eliminator.

Every evolution prompt asks the generator to end with a structured trailer::

    QUESTION: <one line>
    ANSWER: <one line>
    FACTS: <JSON list of {"kind", "value", "series_ref", "location"}>

The eliminator only trusts those FACTS; free text is never mined for claims.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import os
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import httpx

from .describe import (
    CATEGORICAL_FACTS,
    SLOT,
    Fact,
    QARecord,
    correlation_facts,
    fmt,
    pool_facts,
)
from .genpool import AttributePool, CorrelationPool
from .rng import make_rng, split_seed

log = logging.getLogger(__name__)

DEFAULT_RETRIES = 3


class EvolutionType(str, enum.Enum):
    IN_DEPTH = "in_depth"
    IN_BREADTH = "in_breadth"
    CONDITION_ADD = "condition_add"
    CONCRETIZE = "concretize"
    REASONING = "reasoning"
    SITUATION = "situation"


INSTRUCTIONS = {
    EvolutionType.IN_DEPTH: "Make the question harder by asking for a deeper analysis of the same series.",
    EvolutionType.IN_BREADTH: "Write a new question about a different attribute, using the attributes below.",
    EvolutionType.CONDITION_ADD: "Add a condition or constraint that the answer must take into account.",
    EvolutionType.CONCRETIZE: "Replace general wording with concrete values taken from the attributes.",
    EvolutionType.REASONING: "Turn the question into one that asks why something happens and what explains it.",
    EvolutionType.SITUATION: "Place the question in a realistic monitoring situation for this metric.",
}


class TextGenerator(Protocol):
    def complete(self, prompt: str, **params) -> str: ...


class EvolutionError(RuntimeError):
    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class EndpointError(RuntimeError):
    """The remote generator could not be reached."""


@dataclass
class CandidateQA:
    question: str
    answer: str
    claimed_facts: list[Fact]
    lineage: dict  # seed_id, etype, round


@dataclass
class EliminationVerdict:
    accepted: bool
    reasons: list[tuple] = field(default_factory=list)  # (claimed fact, truth, deviation)


@dataclass(frozen=True)
class EvolTolerances:
    rel: float = 0.05
    sigma_k: float = 3.0


def facts_from_dicts(items: Sequence[Mapping]) -> list[Fact]:
    return [Fact.from_dict(d) for d in items]


# --- injection -------------------------------------------------------------------


def inject_attributes(
    pools: Sequence[AttributePool],
    corr_pool: CorrelationPool | None = None,
    k: int = 3,
    seed: int = 0,
) -> list[Fact]:
    """Sample ``k`` distinct facts across ``pools`` (all of them if fewer)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not pools:
        raise ValueError("pools must be non-empty")
    facts = [f for p in pools for f in pool_facts(p) if f.kind != "series_length"]
    if corr_pool is not None:
        facts += correlation_facts(corr_pool)
    if k >= len(facts):
        return facts
    rng = make_rng(split_seed(seed, "inject"))
    picked = sorted(int(i) for i in rng.choice(len(facts), size=k, replace=False))
    return [facts[i] for i in picked]


# --- prompts and parsing --------------------------------------------------------------

_FACTS_MARK = "ATTRIBUTES:"


def build_prompt(seed_qa: QARecord, etype: EvolutionType, facts: Sequence[Fact]) -> str:
    etype = EvolutionType(etype)
    payload = json.dumps([f.to_dict() for f in facts], sort_keys=True)
    return "\n".join([
        "You rewrite questions about time series into new question-answer pairs.",
        f"Evolution type: {etype.value}",
        f"Instruction: {INSTRUCTIONS[etype]}",
        f"Keep every {SLOT} placeholder of the seed question; each stands for one series.",
        f"Seed question: {seed_qa.question}",
        f"Seed answer: {seed_qa.answer}",
        f"{_FACTS_MARK} {payload}",
        "Only state attribute values listed above. End with exactly three lines:",
        "QUESTION: <new question>",
        "ANSWER: <answer>",
        'FACTS: <JSON list of the attributes you used, each {"kind","value","series_ref","location"}>',
    ])


_LINE = re.compile(r"^(QUESTION|ANSWER|FACTS):\s*(.*)$", re.MULTILINE)


def parse_output(text: str) -> tuple[str, str, list[Fact]]:
    """Parse the structured trailer; raises ValueError on anything malformed."""
    found: dict[str, str] = {}
    for m in _LINE.finditer(text or ""):
        found[m.group(1)] = m.group(2).strip()
    if set(found) != {"QUESTION", "ANSWER", "FACTS"}:
        raise ValueError("missing QUESTION/ANSWER/FACTS lines")
    if not found["QUESTION"] or not found["ANSWER"]:
        raise ValueError("empty question or answer")
    try:
        items = json.loads(found["FACTS"])
        facts = facts_from_dicts(items)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, IndexError) as exc:
        raise ValueError(f"unparseable FACTS: {exc}") from None
    if not isinstance(items, list):
        raise ValueError("FACTS must be a list")
    return found["QUESTION"], found["ANSWER"], facts


def evolve(
    seed_qa: QARecord,
    pools: Mapping[str, AttributePool],
    etype: EvolutionType,
    facts: Sequence[Fact],
    gen: TextGenerator,
    retries: int = DEFAULT_RETRIES,
    round_no: int = 1,
    decode: Mapping | None = None,
) -> CandidateQA:
    missing = [r for r in seed_qa.series_refs if r not in pools]
    if missing:
        raise ValueError(f"seed references unknown pools {missing}")
    etype = EvolutionType(etype)
    prompt = build_prompt(seed_qa, etype, facts)
    raw = ""
    for attempt in range(retries + 1):
        raw = gen.complete(prompt, **dict(decode or {}))
        try:
            question, answer, claimed = parse_output(raw)
        except ValueError as exc:
            log.debug("attempt %d unparseable: %s", attempt, exc)
            continue
        if question.count(SLOT) != seed_qa.question.count(SLOT):
            log.debug("attempt %d changed the number of series slots", attempt)
            continue
        return CandidateQA(
            question, answer, claimed,
            {"seed_id": seed_qa.id, "etype": etype.value, "round": round_no},
        )
    raise EvolutionError(f"unparseable generator output after {retries} retries", raw)


# --- elimination --------------------------------------------------------------------

_STEP_UNITS = {"steps", "index"}


def _numeric_tol(fact: Fact, truth: Fact, pool: AttributePool, tol: EvolTolerances) -> float:
    rel = tol.rel * abs(float(truth.value))
    if truth.units in _STEP_UNITS or truth.kind == "trend_slope_sign":
        return 0.0 if truth.kind == "trend_slope_sign" else rel
    sigma = pool.noise.std
    if truth.kind == "trend_slope":
        length = truth.location[1] - truth.location[0]
        sigma = sigma / length
    return max(rel, tol.sigma_k * sigma)


def eliminate(
    candidate: CandidateQA | Sequence[Fact],
    pools: Mapping[str, AttributePool],
    tolerances: EvolTolerances | None = None,
    corr_pools: Mapping[str, CorrelationPool] | None = None,
) -> EliminationVerdict:
    """Accept iff every claimed fact matches pool truth within tolerance."""
    tol = tolerances or EvolTolerances()
    claimed = candidate.claimed_facts if isinstance(candidate, CandidateQA) else list(candidate)
    reasons: list[tuple] = []
    cache: dict[str, list[Fact]] = {}
    for fact in claimed:
        if fact.kind in ("correlation_kind", "correlation_members"):
            corr = (corr_pools or {}).get(fact.series_ref)
            if corr is None:
                reasons.append((fact.to_dict(), None, "unverifiable"))
                continue
            truth = {t.kind: t.value for t in correlation_facts(corr)}[fact.kind]
            value = sorted(fact.value) if isinstance(fact.value, list) else fact.value
            if value != truth:
                reasons.append((fact.to_dict(), truth, "mismatch"))
            continue
        pool = pools.get(fact.series_ref)
        if pool is None:
            reasons.append((fact.to_dict(), None, "unverifiable"))
            continue
        if pool.id not in cache:
            cache[pool.id] = pool_facts(pool)
        matches = [
            t for t in cache[pool.id]
            if t.kind == fact.kind and (fact.location is None or t.location == fact.location)
        ]
        if not matches:
            reasons.append((fact.to_dict(), None, "unverifiable"))
            continue
        if fact.kind in CATEGORICAL_FACTS:
            if not any(t.value == fact.value for t in matches):
                reasons.append((fact.to_dict(), matches[0].value, "mismatch"))
            continue
        try:
            value = float(fact.value)
        except (TypeError, ValueError):
            reasons.append((fact.to_dict(), matches[0].value, "not a number"))
            continue
        if not math.isfinite(value):
            reasons.append((fact.to_dict(), matches[0].value, "not a number"))
            continue
        best = min(matches, key=lambda t: abs(value - float(t.value)))
        dev = abs(value - float(best.value))
        if dev > _numeric_tol(fact, best, pool, tol):
            reasons.append((fact.to_dict(), best.value, dev))
    return EliminationVerdict(not reasons, reasons)


# --- generators ----------------------------------------------------------------------


def _phrase(f: Fact) -> str:
    name = f.kind.replace("_", " ")
    where = f" over t={f.location[0]} to t={f.location[1] - 1}" if f.location else ""
    value = fmt(f.value) if isinstance(f.value, (int, float)) and not isinstance(f.value, bool) else f.value
    return f"the {name}{where} is {value}"


class MockGenerator:
    """Deterministic offline generator; restates the injected attributes."""

    _OPENERS = {
        EvolutionType.IN_DEPTH: ("Looking more closely:", "In more detail:"),
        EvolutionType.IN_BREADTH: ("Beyond the original question:", "Broadening the view:"),
        EvolutionType.CONDITION_ADD: ("Assuming the attributes below hold,", "Under the condition that"),
        EvolutionType.CONCRETIZE: ("Concretely,", "With exact values,"),
        EvolutionType.REASONING: ("Why does the series behave this way?", "What explains this behaviour?"),
        EvolutionType.SITUATION: ("You are an operator watching this metric on a dashboard.",
                                  "During an on-call shift you see this metric."),
    }

    def complete(self, prompt: str, **params) -> str:
        etype = EvolutionType(re.search(r"^Evolution type: (\S+)$", prompt, re.MULTILINE).group(1))
        seed_q = re.search(r"^Seed question: (.*)$", prompt, re.MULTILINE).group(1)
        facts = facts_from_dicts(json.loads(prompt.split(_FACTS_MARK, 1)[1].split("\n", 1)[0]))
        pick = hashlib.blake2b(prompt.encode(), digest_size=2).digest()[0] % 2
        opener = self._OPENERS[etype][pick]
        told = "; ".join(_phrase(f) for f in facts)
        if etype == EvolutionType.REASONING:
            question = f"{seed_q} {opener} Explain why, given that {told}."
        else:
            question = f"{opener} {seed_q} Take into account that {told}."
        answer = f"Based on the series, {told}."
        payload = json.dumps([f.to_dict() for f in facts], sort_keys=True)
        return f"QUESTION: {question}\nANSWER: {answer}\nFACTS: {payload}\n"


class ChatCompletionGenerator:
    """Chat-completion HTTP client (``model``, ``messages``, ``temperature``).

    The key is read from the environment variable named by ``key_env``.
    With ``audit_path`` set, each request/response pair is appended as a JSON
    line (the key is never written).
    """

    def __init__(
        self,
        url: str,
        model: str,
        key_env: str = "TSALIGN_API_KEY",
        temperature: float = 0.7,
        timeout: float = 60.0,
        audit_path: str | Path | None = None,
        transport: httpx.BaseTransport | None = None,
    ):
        self.url = url
        self.model = model
        self.temperature = temperature
        self.audit_path = Path(audit_path) if audit_path else None
        key = os.environ.get(key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self._lock = threading.Lock()

    def complete(self, prompt: str, **params) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.get("temperature", self.temperature),
        }
        for key in ("max_tokens", "top_p", "seed"):
            if key in params:
                body[key] = params[key]
        try:
            resp = self._client.post(self.url, json=body)
        except httpx.TransportError as exc:
            raise EndpointError(f"cannot reach {self.url}: {exc}") from exc
        text = resp.text
        self._audit(body, resp.status_code, text)
        if resp.status_code >= 400:
            raise EvolutionError(f"endpoint returned HTTP {resp.status_code}", text)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise EvolutionError("malformed chat-completion response", text) from None

    def _audit(self, body: dict, status: int, text: str) -> None:
        if self.audit_path is None:
            return
        line = json.dumps({"request": body, "status": status, "response": text}, sort_keys=True)
        with self._lock, self.audit_path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def close(self) -> None:
        self._client.close()


# --- the evolution loop ------------------------------------------------------------------


@dataclass
class EvolutionResult:
    records: list[QARecord]
    attempted: int = 0
    accepted: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempted if self.attempted else 0.0

    def summary(self) -> dict:
        return {
            "attempted": self.attempted,
            "accepted": self.accepted,
            "rejected": self.attempted - self.accepted - len(self.errors),
            "errors": len(self.errors),
            "acceptance_rate": self.acceptance_rate,
        }


def evolved_keywords(facts: Sequence[Fact]) -> list[str]:
    out = []
    for f in facts:
        if isinstance(f.value, str):
            out.append(f.value)
        elif isinstance(f.value, (int, float)) and not isinstance(f.value, bool):
            out.append(fmt(f.value))
    return list(dict.fromkeys(out)) or ["series"]


def _choose_etype(rng, mix: Mapping[EvolutionType, float] | None) -> EvolutionType:
    kinds = list(EvolutionType)
    if not mix:
        return kinds[int(rng.integers(len(kinds)))]
    weights = [float(mix.get(k, mix.get(k.value, 0.0))) for k in kinds]
    total = sum(weights)
    if total <= 0:
        raise ValueError("evolution mix has no positive weight")
    return kinds[int(rng.choice(len(kinds), p=[w / total for w in weights]))]


def run_evolution(
    seeds: Sequence[QARecord],
    pools: Mapping[str, AttributePool],
    rounds: int,
    gen: TextGenerator,
    master_seed: int,
    mix: Mapping | None = None,
    k: int = 3,
    in_flight: int = 4,
    retries: int = DEFAULT_RETRIES,
    tolerances: EvolTolerances | None = None,
    corr_pools: Mapping[str, CorrelationPool] | None = None,
    decode: Mapping | None = None,
) -> EvolutionResult:
    """Evolve each surviving QA once per round; keep eliminator-approved children.

    Items run concurrently, but every random choice is keyed by (master_seed,
    round, parent id) and results are merged in input order, so a
    deterministic generator gives a bit-identical run.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    result = EvolutionResult([])
    corr_by_member: dict[str, CorrelationPool] = {}
    for corr in (corr_pools or {}).values():
        for mid in corr.member_ids:
            corr_by_member.setdefault(mid, corr)

    def one(parent: QARecord, round_no: int):
        rng = make_rng(split_seed(master_seed, "evolve", round_no, parent.id))
        etype = _choose_etype(rng, mix)
        refs = [pools[r] for r in parent.series_refs]
        corr = next((corr_by_member[r] for r in parent.series_refs if r in corr_by_member), None)
        facts = inject_attributes(refs, corr, k, split_seed(master_seed, "facts", round_no, parent.id))
        cand = evolve(parent, pools, etype, facts, gen, retries, round_no, decode)
        verdict = eliminate(cand, pools, tolerances, corr_pools)
        return cand, verdict

    frontier = list(seeds)
    with ThreadPoolExecutor(max_workers=max(1, in_flight)) as ex:
        for round_no in range(1, rounds + 1):
            futures = [ex.submit(one, parent, round_no) for parent in frontier]
            survivors = []
            for parent, fut in zip(frontier, futures):
                result.attempted += 1
                try:
                    cand, verdict = fut.result()
                except EndpointError:
                    raise
                except (EvolutionError, ValueError) as exc:
                    result.errors.append(f"{parent.id} round {round_no}: {exc}")
                    continue
                if not verdict.accepted:
                    continue
                result.accepted += 1
                root = parent.provenance.get("root", parent.id)
                child = QARecord(
                    id=f"evol-{split_seed(master_seed, 'child', round_no, parent.id):016x}",
                    task="inductive",
                    question=cand.question,
                    answer=cand.answer,
                    gold_labels={
                        "type": "keywords",
                        "keywords": evolved_keywords(cand.claimed_facts),
                        "facts": [f.to_dict() for f in cand.claimed_facts],
                    },
                    series_refs=list(parent.series_refs),
                    provenance={**cand.lineage, "root": root, "parent_task": parent.task},
                )
                survivors.append(child)
                result.records.append(child)
            frontier = survivors
    return result
