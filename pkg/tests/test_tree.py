"""Belief tree mechanics: addressing, softmax, Bayes updates, pruning."""

import numpy as np
import pytest

import lqsignal as lq
from lqsignal.tree import LAMBDA_FLOOR, NodeId, SignalingPolicy, tree_to_document
from lqsignal.verify import random_policy


def test_node_id_flat_round_trip():
    for I in (2, 3):
        for k in range(4):
            for j in range(I**k):
                node = NodeId.from_flat(k, j, I)
                assert node.k == k
                assert node.flat(I) == j


def test_node_id_children_are_contiguous():
    I = 3
    parent = NodeId(k=2, omega=(1, 2))
    j = parent.flat(I)
    for a in range(I):
        child = parent.child(a)
        assert child.flat(I) == j * I + a
        assert child.omega == (1, 2, a)


def test_node_id_rejects_length_mismatch():
    with pytest.raises(ValueError, match="omega length"):
        NodeId(k=2, omega=(0,))


def test_node_id_label_is_one_based():
    assert NodeId(k=0).label() == ""
    assert NodeId(k=3, omega=(0, 1, 0)).label() == "121"


def test_softmax_rows_basic():
    rows = np.array([[0.0, 0.0], [3.0, -1.0], [1000.0, 999.0]])
    a = lq.softmax_rows(rows)
    assert np.allclose(a.sum(axis=-1), 1.0)
    assert np.allclose(a[0], [0.5, 0.5])
    assert np.all(a > 0.0)
    # shift invariance: adding a row constant leaves the distribution alone
    shifted = lq.softmax_rows(rows + 17.3)
    assert np.allclose(a, shifted)


def test_softmax_rows_extreme_logits_stable():
    a = lq.softmax_rows(np.array([[800.0, -800.0]]))
    assert np.isfinite(a).all()
    assert a[0, 0] == pytest.approx(1.0)


def test_zero_policy_is_uniform():
    pol = SignalingPolicy.zeros(num_types=3, horizon=2)
    assert pol.horizon == 2
    assert pol.num_types == 3
    for k, alpha in enumerate(pol.alpha):
        assert alpha.shape == (3**k, 3, 3)
        assert np.allclose(alpha, 1.0 / 3.0)


def test_forward_pass_shapes_and_normalization(small_game, small_policy):
    tree = lq.forward_bayes_pass(small_policy, small_game.prior)
    I, K = small_game.num_types, small_game.horizon
    assert tree.horizon == K
    assert tree.num_types == I
    for k in range(K + 1):
        assert tree.beliefs[k].shape == (I**k, I)
        assert np.allclose(tree.beliefs[k].sum(axis=1), 1.0)
        assert np.all(tree.beliefs[k] >= 0.0)
    for k in range(K):
        # branch weights are a probability over branches at every node
        assert np.allclose(tree.lam[k].sum(axis=1), 1.0)
        assert np.allclose(tree.lam_norm[k].sum(axis=1), 1.0)


def test_forward_pass_bayes_by_hand():
    # single step, two types: alpha chosen so the posterior is textbook Bayes
    logits = np.log(np.array([[[0.8, 0.2], [0.3, 0.7]]]))
    pol = SignalingPolicy.from_logits([logits])
    prior = np.array([0.4, 0.6])
    tree = lq.forward_bayes_pass(pol, prior)
    lam0 = 0.4 * 0.8 + 0.6 * 0.3
    assert tree.lam[0][0, 0] == pytest.approx(lam0)
    assert tree.beliefs[1][0] == pytest.approx(
        [0.4 * 0.8 / lam0, 0.6 * 0.3 / lam0]
    )


def test_martingale_residual_random_policies(rng):
    from lqsignal.verify import random_game

    for _ in range(5):
        spec = random_game(rng)
        pol = random_policy(rng, spec, scale=2.0)
        tree = lq.forward_bayes_pass(pol, spec.prior)
        assert lq.martingale_residual(tree) <= 1e-10


def test_revealing_policy_reaches_vertices():
    # type i deterministically signals branch i: posterior collapses
    logits = np.array([[[40.0, 0.0], [0.0, 40.0]]])
    pol = SignalingPolicy.from_logits([logits])
    tree = lq.forward_bayes_pass(pol, np.array([0.5, 0.5]))
    assert np.allclose(tree.beliefs[1], np.eye(2), atol=1e-15)


def test_pruned_branch_is_floored_and_renormalized():
    # both types avoid branch 1 hard enough to cross the weight floor
    logits = np.array([[[60.0, 0.0], [60.0, 0.0]]])
    pol = SignalingPolicy.from_logits([logits])
    prior = np.array([0.5, 0.5])
    tree = lq.forward_bayes_pass(pol, prior)
    assert tree.lam[0][0, 1] < LAMBDA_FLOOR
    assert tree.pruned[0][0, 1]
    assert not tree.pruned[0][0, 0]
    assert tree.lam_norm[0][0] == pytest.approx([1.0, 0.0])
    # dead branch inherits the parent belief instead of a 0/0 posterior
    assert np.allclose(tree.node_belief(NodeId(k=1, omega=(1,))), prior)
    assert np.isfinite(tree.beliefs[1]).all()


def test_subtree_restriction_matches_full_tree(small_game, small_policy):
    prior = small_game.prior
    full = lq.forward_bayes_pass(small_policy, prior)
    path = (1, 0)
    sub = small_policy.subtree(path)
    assert sub.horizon == small_policy.horizon - len(path)
    node = NodeId(k=len(path), omega=path)
    sub_tree = lq.forward_bayes_pass(sub, full.node_belief(node))
    # beliefs of the restricted tree coincide with the matching slice
    for dk in range(sub.horizon + 1):
        I = small_game.num_types
        width = I**dk
        lo = node.flat(I) * width
        got = sub_tree.beliefs[dk]
        want = full.beliefs[node.k + dk][lo : lo + width]
        assert np.allclose(got, want, atol=1e-12)


def test_subtree_recenters_logits(small_policy):
    sub = small_policy.subtree((0,))
    for L in sub.logits:
        assert np.allclose(L.mean(axis=-1), 0.0, atol=1e-12)


def test_belief_average_single_and_batch(small_game):
    st = small_game.stacked()
    p = np.array([0.25, 0.75])
    R_bar, S_bar = lq.belief_average(p, small_game)
    assert np.allclose(R_bar, 0.25 * st["R"][0] + 0.75 * st["R"][1])
    assert np.allclose(S_bar, 0.25 * st["S"][0] + 0.75 * st["S"][1])
    batch = np.stack([p, np.array([1.0, 0.0])])
    Rb, Sb = lq.belief_average(batch, small_game)
    assert Rb.shape == (2,) + st["R"][0].shape
    assert np.allclose(Rb[1], st["R"][0])
    assert np.allclose(Sb[0], S_bar)


def test_tree_document_counts(small_game, small_policy):
    tree = lq.forward_bayes_pass(small_policy, small_game.prior)
    doc = tree_to_document(tree)
    I, K = small_game.num_types, small_game.horizon
    assert doc["version"] == 1
    assert len(doc["nodes"]) == sum(I**k for k in range(K + 1))
    root = doc["nodes"][0]
    assert root["omega"] == ""
    assert root["p"] == pytest.approx(list(small_game.prior))
