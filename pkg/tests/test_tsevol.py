import json
from dataclasses import replace

import httpx
import pytest

from conftest import pool_for
from tsalign.describe import SLOT, Fact, gen_alignment_qa, pool_facts
from tsalign.synth import render
from tsalign.tsevol import (
    CandidateQA,
    ChatCompletionGenerator,
    EndpointError,
    EvolutionError,
    EvolutionType,
    MockGenerator,
    build_prompt,
    eliminate,
    evolve,
    inject_attributes,
    parse_output,
    run_evolution,
)


def _seeds(n, noise=None):
    pools, seeds = {}, []
    for i in range(n):
        p = pool_for(i, noise=noise, full=True)
        pools[p.id] = p
        seeds.append(gen_alignment_qa(p, render(p), ("trend", "season", "noise", "local")[i % 4], i))
    return seeds, pools


def test_inject_is_deterministic_and_excludes_length():
    p = pool_for(1, full=True)
    a = inject_attributes([p], k=3, seed=9)
    assert a == inject_attributes([p], k=3, seed=9)
    assert len(a) == 3 and all(f.kind != "series_length" for f in a)
    everything = inject_attributes([p], k=1000, seed=0)
    assert len(everything) == len(pool_facts(p)) - 1


def test_parse_output_rejects_garbage():
    with pytest.raises(ValueError):
        parse_output("QUESTION: x\nANSWER: y\n")
    with pytest.raises(ValueError):
        parse_output("QUESTION: x\nANSWER: y\nFACTS: not json\n")
    q, a, facts = parse_output('QUESTION: q\nANSWER: a\nFACTS: [{"kind": "noise_kind", "value": "none"}]')
    assert (q, a, facts[0].kind) == ("q", "a", "noise_kind")


def test_mock_evolution_keeps_slots_and_passes_elimination():
    seeds, pools = _seeds(6)
    for et in EvolutionType:
        for qa in seeds:
            facts = inject_attributes([pools[qa.series_refs[0]]], k=3, seed=1)
            cand = evolve(qa, pools, et, facts, MockGenerator())
            assert cand.question.count(SLOT) == qa.question.count(SLOT)
            assert eliminate(cand, pools).accepted


class _Flaky:
    def __init__(self, bad):
        self.bad, self.calls = bad, 0

    def complete(self, prompt, **params):
        self.calls += 1
        if self.calls <= self.bad:
            return "nonsense"
        return MockGenerator().complete(prompt)


def test_retry_policy():
    seeds, pools = _seeds(1)
    facts = inject_attributes(list(pools.values()), k=2, seed=0)
    gen = _Flaky(3)
    evolve(seeds[0], pools, EvolutionType.IN_DEPTH, facts, gen, retries=3)
    assert gen.calls == 4
    with pytest.raises(EvolutionError):
        evolve(seeds[0], pools, EvolutionType.IN_DEPTH, facts, _Flaky(10), retries=3)


def test_eliminator_rejects_wrong_and_unknown_facts():
    p = pool_for(2, noise="none", full=True)
    pools = {p.id: p}
    truth = [f for f in pool_facts(p) if f.kind == "trend_start_value"][0]
    assert eliminate([truth], pools).accepted
    wrong = replace(truth, value=truth.value * 1.5 + 1.0)
    assert not eliminate([wrong], pools).accepted
    kind = [f for f in pool_facts(p) if f.kind == "noise_kind"][0]
    assert not eliminate([replace(kind, value="gaussian")], pools).accepted
    verdict = eliminate([Fact("trend_kind", "steady", "", None, "pool-missing")], pools)
    assert not verdict.accepted and verdict.reasons[0][2] == "unverifiable"


def test_numeric_tolerance_uses_noise():
    p = pool_for(4, noise="gaussian", full=True)
    truth = [f for f in pool_facts(p) if f.kind == "trend_start_value"][0]
    nudged = replace(truth, value=truth.value + 2.0 * p.noise.std)
    assert eliminate([nudged], {p.id: p}).accepted


def test_run_evolution_is_reproducible():
    seeds, pools = _seeds(20)
    a = run_evolution(seeds, pools, 2, MockGenerator(), 5, in_flight=4)
    b = run_evolution(seeds, pools, 2, MockGenerator(), 5, in_flight=1)
    assert [r.to_dict() for r in a.records] == [r.to_dict() for r in b.records]
    assert a.attempted == 40 and 0 <= a.acceptance_rate <= 1
    assert all(r.task == "inductive" and r.provenance["round"] in (1, 2) for r in a.records)


def _mock_endpoint(request: httpx.Request) -> httpx.Response:
    body = json.loads(request.content)
    text = MockGenerator().complete(body["messages"][0]["content"])
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


def test_chat_completion_client_and_audit(tmp_path, monkeypatch):
    monkeypatch.setenv("TEST_TSALIGN_KEY", "sk-secret")
    audit = tmp_path / "audit.jsonl"
    gen = ChatCompletionGenerator("http://mock/v1/chat", "m", key_env="TEST_TSALIGN_KEY",
                                  audit_path=audit, transport=httpx.MockTransport(_mock_endpoint))
    seeds, pools = _seeds(2)
    res = run_evolution(seeds, pools, 1, gen, 0, in_flight=2)
    assert res.accepted == 2
    log = audit.read_text()
    assert log.count("\n") == 2 and "sk-secret" not in log


def test_unreachable_endpoint():
    def refuse(request):
        raise httpx.ConnectError("refused", request=request)

    gen = ChatCompletionGenerator("http://nowhere", "m", transport=httpx.MockTransport(refuse))
    seeds, pools = _seeds(1)
    with pytest.raises(EndpointError):
        run_evolution(seeds, pools, 1, gen, 0)


def test_prompt_carries_facts():
    seeds, pools = _seeds(1)
    facts = inject_attributes(list(pools.values()), k=2, seed=3)
    prompt = build_prompt(seeds[0], EvolutionType.CONCRETIZE, facts)
    assert "concretize" in prompt.lower()
    assert seeds[0].question in prompt
    assert isinstance(CandidateQA("q", "a", facts, {}).claimed_facts, list)
