import json
import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curriculum_lab.core import CurriculumError
from curriculum_lab.selfplay import (
    LIVE_POLICY,
    EmptyStore,
    FictitiousSelfPlay,
    OpponentStore,
    PfspConfig,
    PrioritizedFictitiousSelfPlay,
    SelfPlay,
    UnknownOpponent,
    outcome_from_return,
    pfsp_weights,
    smoothed_winrates,
)


def test_pfsp_weights_example():
    probs = pfsp_weights(np.array([0.9, 0.5, 0.1]), PfspConfig())
    weights = np.array([0.01, 0.25, 0.81])
    assert np.allclose(probs, weights / weights.sum(), rtol=0, atol=1e-9)
    assert np.allclose(probs, [0.0093, 0.2336, 0.7570], atol=1e-3)


def test_pfsp_from_outcomes_with_vanishing_smoothing():
    pfsp = PrioritizedFictitiousSelfPlay(config=PfspConfig(smoothing=1e-12))
    for i in range(3):
        pfsp.update_agent(f"p{i}".encode())
    for oid, wins in enumerate([9, 5, 1]):
        for g in range(10):
            pfsp.update_winrate(oid, 1.0 if g < wins else -1.0)
    assert np.allclose(pfsp.sample_distribution(), [0.0093, 0.2336, 0.7570], atol=1e-3)


def test_pfsp_equal_winrates_are_uniform():
    assert np.allclose(pfsp_weights(np.full(4, 0.3), PfspConfig()), 0.25)


def test_learner_perspective_flips_preference():
    opp = pfsp_weights(np.array([0.9, 0.1]), PfspConfig())
    mine = pfsp_weights(np.array([0.9, 0.1]), PfspConfig(perspective="learner"))
    assert opp[1] > opp[0] and mine[0] > mine[1]


def test_hard_limit_picks_the_hardest():
    probs = pfsp_weights(np.array([0.9, 0.2, 0.2, 0.6]), PfspConfig(hard=True))
    assert np.allclose(probs, [0, 0.5, 0.5, 0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=10), st.floats(0, 6))
def test_pfsp_nonincreasing_in_winrate(w, c):
    w = np.array(w)
    probs = pfsp_weights(w, PfspConfig(hard_exponent=c))
    order = np.argsort(w)
    assert np.all(np.diff(probs[order]) <= 1e-12)


def test_fsp_uniform_frequencies():
    fsp = FictitiousSelfPlay(seed=3)
    for i in range(4):
        fsp.update_agent(bytes([i]))
    counts = np.bincount(fsp.sample(100_000), minlength=4) / 100_000
    assert np.all(np.abs(counts - 0.25) <= 0.01)


def test_sp_always_plays_live_policy():
    sp = SelfPlay()
    assert sp.sample(5) == [LIVE_POLICY] * 5
    sp.update_winrate(LIVE_POLICY, 1.0)  # ignored, nothing stored


def test_empty_store_raises():
    for cls in (FictitiousSelfPlay, PrioritizedFictitiousSelfPlay):
        with pytest.raises(EmptyStore):
            cls().sample()


def test_ids_are_dense_and_snapshots_roundtrip():
    store = OpponentStore()
    blobs = [bytes(np.random.default_rng(i).integers(0, 256, 100, dtype=np.uint8)) for i in range(5)]
    assert [store.add(b) for b in blobs] == [0, 1, 2, 3, 4]
    assert all(store.get(i) == b for i, b in enumerate(blobs))
    with pytest.raises(UnknownOpponent):
        store.get(5)
    with pytest.raises(UnknownOpponent):
        store.get(-1)


def test_ring_buffer_evicts_oldest():
    store = OpponentStore(memory=4)
    store.add(b"x")
    store.push_outcome(0, 0.0)  # oldest, a loss
    for _ in range(4):
        store.push_outcome(0, 1.0)
    rec = store.record(0)
    assert rec.games == 4 and rec.wins == 4.0
    assert smoothed_winrates(store, 0.01)[0] == pytest.approx((4 + 0.01) / (4 + 0.02))


def test_smoothed_winrate_without_games():
    store = OpponentStore()
    store.add(b"x")
    assert smoothed_winrates(store, 0.01)[0] == 0.5


def test_outcome_mapping():
    assert [outcome_from_return(r) for r in (2.0, 0.0, -0.1)] == [1.0, 0.5, 0.0]


def test_disk_persistence_and_manifest(tmp_path):
    root = tmp_path / "opponents"
    store = OpponentStore(root)
    a, b = b"\x00\x01policy-a", b"\xffpolicy-b"
    store.add(a, step=0)
    store.add(b, step=800)
    manifest = json.loads((root / "manifest.json").read_text())
    assert [e["id"] for e in manifest["opponents"]] == [0, 1]
    assert [e["created_step"] for e in manifest["opponents"]] == [0, 800]
    assert all((root / e["file"]).exists() for e in manifest["opponents"])
    reopened = OpponentStore(root)
    assert reopened.ids == [0, 1]
    assert reopened.get(0) == a and reopened.get(1) == b
    assert reopened.add(b"c", step=1600) == 2


def test_readers_never_see_partial_snapshots(tmp_path):
    store = OpponentStore(tmp_path)
    big = [bytes([i]) * 200_000 for i in range(20)]
    errors = []

    def reader():
        for _ in range(200):
            n = len(store)
            for i in range(n):
                if store.get(i) != big[i]:
                    errors.append(i)

    t = threading.Thread(target=reader)
    t.start()
    for blob in big:
        store.add(blob)
    t.join()
    assert errors == []


def test_config_validation():
    for bad in [dict(hard_exponent=-1), dict(smoothing=0), dict(memory=0), dict(perspective="both")]:
        with pytest.raises(CurriculumError):
            PfspConfig(**bad)


def test_pfsp_shifts_after_snapshots_and_losses():
    pfsp = PrioritizedFictitiousSelfPlay(seed=0)
    pfsp.update_agent(b"a")
    assert pfsp.sample_distribution().tolist() == [1.0]
    pfsp.update_agent(b"b")
    pfsp.update_agent(b"c")
    assert np.allclose(pfsp.sample_distribution(), 1 / 3)
    before = pfsp.entropy()
    assert before == pytest.approx(math.log(3))
    # the learner keeps losing to opponent 2: its win-rate there is depressed
    for _ in range(10):
        pfsp.update_winrate(2, -1.0)
    after = pfsp.entropy()
    assert after < before - 0.1
    assert np.argmax(pfsp.sample_distribution()) == 2
    pfsp.update_agent(b"d")
    assert len(pfsp.sample_distribution()) == 4
