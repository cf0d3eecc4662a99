import numpy as np
import pytest
from hypothesis import given, strategies as st

from epgf.core import (RESIDUES, Alphabet, GenerationConfig, Segment, Sequence, ScoreScope, affix, detokenize,
                       encode_residues, make_sequence, strip_affix, validate_sequence)
from epgf.errors import ConfigError, DataError, InvalidResidue, InvalidToken

AB = Alphabet.with_tags(["SAM-MT", "Trx"])


def test_alphabet_layout():
    a = Alphabet()
    assert a.labels[:20] == tuple(RESIDUES)
    assert (a.bos, a.eos, a.sep) == (20, 21, 22)
    assert a.size == 23 and AB.size == 25
    assert int(a.emittable.sum()) == 21
    assert len(set(AB.labels)) == AB.size


def test_alphabet_hash_depends_on_tags():
    assert Alphabet().hash == Alphabet().hash
    assert Alphabet().hash != AB.hash
    assert Alphabet.with_tags(["Trx", "SAM-MT"]).hash != AB.hash


def test_alphabet_rejects_overlap():
    with pytest.raises(ConfigError):
        Alphabet.with_tags(["A"])
    with pytest.raises(ConfigError):
        Alphabet(condition_tokens=("Trx", "Trx"))
    assert Alphabet.with_tags(["Trx", "Trx", ""]).condition_tokens == ("Trx",)


def test_condition_lookup():
    assert AB.condition_id("SAM-MT") == 23
    assert AB.tag_of(24) == "Trx"
    assert AB.prompt("Trx") == (20, 24)
    assert AB.prompt() == (20,)
    with pytest.raises(ConfigError):
        AB.condition_id("CheY")


def test_validate_sequence_examples():
    s = validate_sequence("ACDEFGHIKLMNPQRSTVWY")
    assert s.residue_len == 20
    with pytest.raises(InvalidResidue) as exc:
        validate_sequence("ACXDE")
    assert (exc.value.position, exc.value.character) == (2, "X")
    assert validate_sequence("").residue_len == 0


@pytest.mark.parametrize("bad", ["B", "Z", "U", "O", "-", " ", "a", "\n", "é"])
def test_validate_rejects_nonstandard(bad):
    with pytest.raises(InvalidResidue):
        validate_sequence("AC" + bad + "D")


def test_detokenize_examples():
    a = Alphabet()
    assert detokenize(Sequence((a.bos, 0, 1, a.eos), a)) == "AC"
    assert detokenize(Sequence((a.bos, a.eos), a)) == ""
    m, k = RESIDUES.index("M"), RESIDUES.index("K")
    assert detokenize(Sequence((AB.condition_id("SAM-MT"), m, k), AB)) == "MK"


def test_sequence_invariants():
    a = Alphabet()
    with pytest.raises(DataError):
        Sequence((0, a.bos), a)
    with pytest.raises(DataError):
        Sequence((a.bos, a.eos, 0), a)
    with pytest.raises(DataError):
        Sequence((a.bos, a.sep), a)
    with pytest.raises(InvalidToken):
        Sequence((a.bos, 99), a)
    s = make_sequence("MK", AB, tag="Trx", eos=True)
    assert s.terminated and s.tag == "Trx" and str(s) == "MK" and s.residue_len == 2


def test_segment():
    with pytest.raises(ConfigError):
        Segment((), False)
    seg = Segment((0, 1, 21), True)
    assert seg.residues == (0, 1)


@given(st.text(alphabet=RESIDUES, max_size=300))
def test_roundtrip_property(text):
    s = make_sequence(text, AB, tag="Trx", eos=True)
    again = validate_sequence(detokenize(s))
    assert np.array_equal(again.residue_ids, s.residue_ids)
    assert np.array_equal(encode_residues(text), s.residue_ids)


def test_affix_roundtrip():
    assert affix("ACD") == "Seq=<ACD>"
    assert strip_affix(affix("MKV")) == "MKV"
    with pytest.raises(ValueError):
        strip_affix("ACD")


def test_generation_config_defaults():
    cfg = GenerationConfig()
    assert (cfg.num_candidates, cfg.segment_len, cfg.tau0, cfg.tau_final, cfg.gamma, cfg.score_floor) == \
        (8, 20, 1.0, 1.0, 0.1, 0.55)
    assert cfg.keep == 4 and cfg.score_scope is ScoreScope.PREFIX_PLUS_SEGMENT
    assert GenerationConfig(num_candidates=5).keep == 3
    assert GenerationConfig(score_scope="segment").score_scope is ScoreScope.SEGMENT_ONLY


@pytest.mark.parametrize("kw", [
    {"num_candidates": 1}, {"segment_len": 0}, {"tau0": 0.0}, {"tau_final": -1.0},
    {"tau0": 0.5, "tau_final": 1.0}, {"gamma": 0.0}, {"gamma": 1.5}, {"score_floor": 1.1},
    {"score_floor": -0.1}, {"max_residues": 0}, {"fallback_rounds": -1}, {"seed": 1.5},
    {"tau0": float("nan")}, {"score_scope": "whole"},
])
def test_generation_config_rejects(kw):
    with pytest.raises((ConfigError, ValueError)):
        GenerationConfig(**kw)
