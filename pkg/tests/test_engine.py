import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epgf.core import GenerationConfig, Segment
from epgf.engine import (Candidate, GenerationTrace, baseline_generate, biophysical_select, choose, generate,
                         probabilistic_filter, replay_selection, sample_candidates, selection_probabilities,
                         tau_schedule, update_tau)
from epgf.errors import DegenerateModel, ScorerFailure
from epgf.model import UniformModel


class EosModel(UniformModel):
    """p(EOS) = 1 in every context."""

    def logprobs(self, context):
        lp = np.full(self.alphabet.size, -np.inf)
        lp[self.alphabet.eos] = 0.0
        return lp


class NoEosModel(UniformModel):
    """Uniform over residues, never ends."""

    def logprobs(self, context):
        lp = np.full(self.alphabet.size, -np.inf)
        lp[:20] = -math.log(20)
        return lp


def cand(lp, tokens=(0,)):
    return Candidate(Segment(tokens), lp)


# -- sampling ---------------------------------------------------------------------

def test_sample_counts_and_lengths(desk_model):
    cands = sample_candidates(desk_model, (20,), 20, 8, np.random.default_rng(0))
    assert len(cands) == 8
    for c in cands:
        assert 1 <= len(c.segment) <= 20
        assert c.logprob == pytest.approx(sum(c.steps), abs=1e-12) and c.logprob <= 0
        assert c.segment.terminal == (c.segment.tokens[-1] == 21)
        recomputed = 0.0
        ctx = [20]
        for t in c.segment.tokens:
            recomputed += desk_model.logprobs(tuple(ctx))[t]
            ctx.append(t)
        assert c.logprob == pytest.approx(recomputed, abs=1e-12)


def test_forced_stop_gives_single_token_segments():
    cands = sample_candidates(EosModel(), (20,), 20, 8, np.random.default_rng(0))
    assert all(c.segment.tokens == (21,) and c.segment.terminal for c in cands)


def test_uniform_two_step_logprob():
    cands = sample_candidates(UniformModel(), (20,), 2, 200, np.random.default_rng(1))
    full = [c for c in cands if not c.segment.terminal]
    assert full
    for c in full:
        assert c.logprob == pytest.approx(2 * math.log(1 / 21), abs=1e-12)


# -- filter ---------------------------------------------------------------------

def test_filter_examples():
    assert len(probabilistic_filter([cand(-i) for i in range(8)])) == 4
    assert len(probabilistic_filter([cand(-i) for i in range(5)])) == 3
    assert probabilistic_filter([cand(-1), cand(-2), cand(-3), cand(-4)], 4) == [0, 1]
    assert probabilistic_filter([cand(-2), cand(-1), cand(-1), cand(-1)]) == [1, 2]


def test_filter_length_normalized():
    cs = [cand(-4.0, (0, 1, 2, 3)), cand(-1.5, (0,))]
    assert probabilistic_filter(cs) == [1]
    assert probabilistic_filter(cs, length_normalize=True) == [0]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from([-0.5, -1.0, -1.0, -2.5, -7.25, 0.0]), min_size=2, max_size=16))
def test_filter_oracle_property(lps):
    cs = [cand(x) for x in lps]
    k = -(-len(cs) // 2)
    oracle = sorted(range(len(cs)), key=lambda i: (-lps[i], i))[:k]
    assert probabilistic_filter(cs) == oracle


# -- selection ------------------------------------------------------------------

def test_softmax_examples():
    assert selection_probabilities([0.7, 0.7], 1.0).tolist() == [0.5, 0.5]
    p = selection_probabilities([0.8, 0.6], 1.0)
    assert p[0] == pytest.approx(math.exp(0.8) / (math.exp(0.8) + math.exp(0.6)), abs=1e-15)
    assert round(p[0], 4) == 0.5498 and round(p[1], 4) == 0.4502


@given(st.lists(st.floats(0, 1), min_size=1, max_size=8), st.floats(-5, 5), st.floats(0.01, 5))
def test_softmax_shift_invariance(b, c, tau):
    p = selection_probabilities(b, tau)
    q = selection_probabilities(np.asarray(b) + c, tau)
    assert np.max(np.abs(p - q)) <= 1e-12


def test_floor_excludes():
    rng = np.random.default_rng(0)
    assert {choose([0.9, 0.4], 0.55, 1.0, rng) for _ in range(200)} == {0}
    assert choose([0.5, 0.4], 0.55, 1.0, rng) is None


def test_biophysical_select_fallback_and_resample():
    fixed = iter([0.3, 0.2, 0.1, 0.4, 0.35, 0.36])
    scorer = lambda ids, tag: next(fixed)
    first = [cand(-1.0, (0,)), cand(-1.0, (1,))]
    pool = [[cand(-1.0, (2,)), cand(-1.0, (3,))], [cand(-1.0, (4,)), cand(-1.0, (5,))]]
    resamples = iter(pool)
    chosen, fb, n = biophysical_select(first, [], scorer, GenerationConfig(fallback_rounds=2), 1.0,
                                       np.random.default_rng(0), resample=lambda: next(resamples))
    assert fb and n == 2 and chosen is pool[1][1]


def test_biophysical_select_scope():
    seen = []
    scorer = lambda ids, tag: seen.append(ids.tolist()) or 0.9
    c = cand(-1.0, (3, 4))
    biophysical_select([c], [1, 2], scorer, GenerationConfig(), 1.0, np.random.default_rng(0))
    biophysical_select([c], [1, 2], scorer, GenerationConfig(score_scope="segment"), 1.0, np.random.default_rng(0))
    assert seen == [[1, 2, 3, 4], [3, 4]]


def test_scorer_failures_are_typed():
    with pytest.raises(ScorerFailure):
        biophysical_select([cand(-1.0)], [], lambda ids, tag: 1.5, GenerationConfig(), 1.0, np.random.default_rng(0))
    with pytest.raises(ScorerFailure):
        biophysical_select([cand(-1.0)], [], lambda ids, tag: 1 / 0, GenerationConfig(), 1.0, np.random.default_rng(0))


# -- tau ---------------------------------------------------------------------------

def test_update_tau_examples():
    assert update_tau(1.0, 0.1, 0.2) == 0.2
    assert update_tau(1.0, 0.1, 1.0) == 1.0
    assert all(t == 0.7 for t in tau_schedule(0.7, 1.0, 0.1, 30))


# -- generate ---------------------------------------------------------------------

def test_eos_immediately():
    seq, trace = generate(EosModel(), seed=1)
    assert seq.residue_len == 0 and trace.stop_reason == "EOS" and len(trace.rounds) == 1


def test_max_length_rounds():
    cfg = GenerationConfig(max_residues=40, score_floor=0.0)
    seq, trace = generate(NoEosModel(), cfg=cfg, seed=1)
    assert len(trace.rounds) == 2 and trace.stop_reason == "MaxLength" and seq.residue_len == 40
    cfg = GenerationConfig(max_residues=45, score_floor=0.0)
    seq, trace = generate(NoEosModel(), cfg=cfg, seed=1)
    assert [len(r.selected.segment) for r in trace.rounds] == [20, 20, 5]


def test_trace_invariants(desk_model):
    cfg = GenerationConfig(tau0=1.0, gamma=0.5, tau_final=0.1)
    seq, trace = generate(desk_model, cfg=cfg, tag="SAM-MT", seed=3)
    built = [20, desk_model.alphabet.condition_id("SAM-MT")]
    for i, r in enumerate(trace.rounds):
        assert len(r.candidates) == 8 and len(r.retained_ids) == 4
        assert sum(c.selected for c in r.candidates) == 1 and r.candidates[r.selected_id].selected
        assert r.selected_id in r.retained_ids
        assert r.selected.bioscore >= cfg.score_floor or r.fallback_used
        assert r.tau_used == max(0.1, 0.5 ** i)
        built += r.selected.segment.tokens
    assert tuple(built) == seq.tokens
    taus = trace.taus
    assert all(a >= b for a, b in zip(taus, taus[1:]))


def test_replay_and_json_roundtrip(desk_model):
    cfg = GenerationConfig(tau0=1.0, gamma=0.5, tau_final=0.2)
    seq, trace = generate(desk_model, cfg=cfg, tag="Trx", seed=11)
    back = GenerationTrace.from_json(json.loads(trace.dumps()), desk_model.alphabet)
    assert back.dumps() == trace.dumps()
    for r in back.rounds:
        assert replay_selection(r, cfg) == r.selected_id


def test_determinism_and_seed_sensitivity(desk_model):
    a = generate(desk_model, tag="TPHD", seed=5)
    b = generate(desk_model, tag="TPHD", seed=5)
    c = generate(desk_model, tag="TPHD", seed=6)
    assert a[0] == b[0] and a[1].dumps() == b[1].dumps()
    assert a[0] != c[0]
    assert baseline_generate(desk_model, tag="TPHD", seed=5) == baseline_generate(desk_model, tag="TPHD", seed=5)
    assert baseline_generate(desk_model, tag="TPHD", seed=5) != a[0]


def test_baseline_respects_max_length():
    seq = baseline_generate(NoEosModel(), GenerationConfig(max_residues=33), seed=0)
    assert seq.residue_len == 33 and not seq.terminated
    assert baseline_generate(EosModel(), seed=0).residue_len == 0


def test_prefix_is_kept(desk_model):
    seq, _ = generate(desk_model, tag="CheY", prefix="MKK", seed=2)
    assert str(seq).startswith("MKK")


def test_degenerate_model_raises():
    cfg = GenerationConfig(score_floor=1.0, fallback_rounds=0, max_residues=511, segment_len=1)
    with pytest.raises(DegenerateModel):
        generate(NoEosModel(), cfg=cfg, seed=0)


def test_unknown_tag_rejected(desk_model):
    from epgf.errors import ConfigError
    with pytest.raises(ConfigError):
        generate(desk_model, tag="Kinase", seed=0)
