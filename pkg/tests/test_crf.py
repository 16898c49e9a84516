import numpy as np
import pytest

from oracles import crf_brute_force, path_score_loop
from ortagger.autodiff import Tensor, grad_check
from ortagger.crf import (
    CRF,
    CrfError,
    CrfParams,
    batched_nll,
    batched_viterbi,
    bio_allowed,
    crf_nll,
    log_partition,
    marginals,
    nll,
    path_score,
    viterbi,
)


def _instance(rng, n, L, scale=1.0):
    return rng.normal(0, scale, (n, L)), CrfParams.random(L, rng, scale)


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, L = int(rng.integers(1, 6)), int(rng.integers(1, 4))
    em, p = _instance(rng, n, L)
    log_z, best, best_score, node = crf_brute_force(em, p.transitions, p.start, p.end)
    assert log_partition(em, p) == pytest.approx(log_z, rel=1e-10)
    path, score = viterbi(em, p)
    assert path == best
    assert score == pytest.approx(best_score, rel=1e-10)
    got_node, edge, _ = marginals(em, p)
    np.testing.assert_allclose(got_node, node, atol=1e-10)
    np.testing.assert_allclose(edge.sum(axis=2), got_node[:-1], atol=1e-10)


def test_path_score_matches_loop():
    rng = np.random.default_rng(3)
    em, p = _instance(rng, 5, 3)
    y = [0, 2, 2, 1, 0]
    assert path_score(em, y, p) == pytest.approx(path_score_loop(em, p.transitions, p.start, p.end, y))


def test_nll_nonnegative_and_zero_for_dominant_path():
    rng = np.random.default_rng(1)
    em, p = _instance(rng, 4, 3)
    assert nll(em, [0, 1, 2, 0], p) >= -1e-12
    em = np.full((3, 2), -50.0)
    em[[0, 1, 2], [1, 0, 1]] = 50.0
    assert nll(em, [1, 0, 1], CrfParams.zeros(2)) < 1e-12


def test_viterbi_tie_takes_lowest_index():
    path, _ = viterbi(np.zeros((3, 3)), CrfParams.zeros(3))
    assert path == [0, 0, 0]


def test_length_one_and_single_label():
    p = CrfParams(np.array([[0.3]]), np.array([0.1]), np.array([-0.2]))
    em = np.array([[0.5]])
    assert log_partition(em, p) == pytest.approx(0.4)
    assert viterbi(em, p) == ([0], pytest.approx(0.4))


def test_rejects_bad_shapes_and_values():
    with pytest.raises(CrfError):
        CrfParams(np.zeros((2, 3)), np.zeros(2), np.zeros(2))
    with pytest.raises(CrfError):
        CrfParams(np.array([[np.nan]]), np.zeros(1), np.zeros(1))
    p = CrfParams.zeros(2)
    with pytest.raises(CrfError):
        viterbi(np.zeros((0, 2)), p)
    with pytest.raises(CrfError):
        log_partition(np.zeros((3, 4)), p)
    with pytest.raises(CrfError):
        path_score(np.zeros((2, 2)), [0, 2], p)


def test_batched_matches_unbatched_with_padding():
    rng = np.random.default_rng(5)
    L, lengths = 4, np.array([5, 2, 1, 3])
    em = rng.normal(size=(4, 5, L))
    tags = rng.integers(0, L, size=(4, 5))
    p = CrfParams.random(L, rng)
    losses, _ = batched_nll(em, tags, lengths, p.transitions, p.start, p.end, with_grad=False)
    paths = batched_viterbi(em, lengths, p.transitions, p.start, p.end)
    for b, n in enumerate(lengths):
        assert losses[b] == pytest.approx(nll(em[b, :n], tags[b, :n], p), rel=1e-10)
        assert paths[b] == viterbi(em[b, :n], p)[0]


def test_crf_nll_gradient():
    rng = np.random.default_rng(2)
    lengths = np.array([4, 2, 3])
    em = Tensor(rng.normal(size=(3, 4, 3)), requires_grad=True)
    trans = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
    start = Tensor(rng.normal(size=3), requires_grad=True)
    end = Tensor(rng.normal(size=3), requires_grad=True)
    tags = rng.integers(0, 3, size=(3, 4))
    err = grad_check(lambda: crf_nll(em, tags, lengths, trans, start, end), [em, trans, start, end])
    assert err < 1e-4
    # padded emissions receive no gradient
    assert np.all(em.grad[1, 2:] == 0) and np.all(em.grad[2, 3:] == 0)


def test_bio_mask_blocks_invalid_paths():
    labels = ["O", "B-X", "I-X", "B-Y", "I-Y"]
    trans_ok, start_ok = bio_allowed(labels)
    assert not start_ok[2] and start_ok[1]
    assert trans_ok[1, 2] and trans_ok[2, 2] and not trans_ok[0, 2] and not trans_ok[3, 2]
    crf = CRF(len(labels), np.random.default_rng(0), allowed=(trans_ok, start_ok))
    em = np.zeros((1, 3, 5))
    em[0, :, 2] = 5.0  # I-X everywhere is the emission favourite but invalid
    path = crf.decode(em, np.array([3]))[0]
    assert path[0] != 2
    for a, b in zip(path, path[1:]):
        assert trans_ok[a, b]


def test_crf_module_parameters():
    crf = CRF(3, np.random.default_rng(0))
    assert [n for n, _ in crf.named_parameters()] == ["transitions", "start", "end"]
    assert np.abs(crf.transitions.data).max() <= 0.1


def test_single_position_closed_form():
    rng = np.random.default_rng(7)
    em, p = _instance(rng, 1, 4)
    expected = np.log(np.exp(p.start + em[0] + p.end).sum())
    assert log_partition(em, p) == pytest.approx(expected, rel=1e-12)


def test_uniform_scores_count_paths():
    n, L = 5, 3
    zero = CrfParams.zeros(L)
    assert log_partition(np.zeros((n, L)), zero) == pytest.approx(n * np.log(L))
    assert nll(np.zeros((n, L)), [0, 1, 2, 1, 0], zero) == pytest.approx(n * np.log(L))


def test_certain_gold_has_zero_nll():
    gold = [2, 0, 1, 1]
    L = 3
    em = np.full((4, L), -1e9)
    em[np.arange(4), gold] = 0.0
    trans = np.full((L, L), -1e9)
    for a, b in zip(gold, gold[1:]):
        trans[a, b] = 0.0
    assert nll(em, gold, CrfParams(trans, np.zeros(L), np.zeros(L))) == pytest.approx(0.0, abs=1e-12)


def test_viterbi_decoupled_positions():
    rng = np.random.default_rng(8)
    em = rng.normal(size=(6, 4))
    p = CrfParams.zeros(4)
    assert viterbi(em, p)[0] == em.argmax(axis=1).tolist()


def test_viterbi_against_enumeration_n5_l4():
    rng = np.random.default_rng(9)
    em, p = _instance(rng, 5, 4)
    _, best, score, _ = crf_brute_force(em, p.transitions, p.start, p.end)
    path, got = viterbi(em, p)
    assert path == best and got == pytest.approx(score, rel=1e-12)


def test_emission_shift_invariance():
    rng = np.random.default_rng(10)
    em, p = _instance(rng, 5, 3)
    shifted = em.copy()
    shifted[2] += 1.75
    assert log_partition(shifted, p) == pytest.approx(log_partition(em, p) + 1.75, rel=1e-12)
    assert viterbi(shifted, p)[0] == viterbi(em, p)[0]


def test_emission_gradient_is_marginals_minus_gold():
    rng = np.random.default_rng(11)
    em, p = _instance(rng, 4, 3)
    gold = np.array([[1, 0, 2, 2]])
    _, (g_em, *_) = batched_nll(em[None], gold, np.array([4]), p.transitions, p.start, p.end,
                                with_grad=True)
    node, _, _ = marginals(em, p)
    np.testing.assert_allclose(g_em[0], node - np.eye(3)[gold[0]], atol=1e-12)
