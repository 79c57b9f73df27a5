"""Public belief tree over signal histories.

The informed minimizer commits to a branch distribution per (node, type); the
uninformed maximizer observes realized branch indices and updates a public
belief by Bayes' rule.  With I types and horizon K this induces an I-ary tree
of depth K.  Nodes at depth k are stored flat, indexed by the base-I encoding
of the branch word (first branch most significant), so the children of node j
are j*I + a for a in 0..I-1.

Branch weights below `LAMBDA_FLOOR` are marked pruned: their posterior is
pinned to the parent belief to keep downstream algebra finite, and value
aggregation redistributes their weight proportionally over surviving
siblings.  Pruned branches contribute zero gradient.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .game import GameSpec

LAMBDA_FLOOR = 1e-9


@dataclass(frozen=True)
class NodeId:
    """Tree address: depth k and branch word omega (0-based branch indices)."""

    k: int
    omega: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.omega) != self.k:
            raise ValueError(f"omega length {len(self.omega)} != depth {self.k}")

    def flat(self, branching: int) -> int:
        j = 0
        for a in self.omega:
            j = j * branching + a
        return j

    @staticmethod
    def from_flat(k: int, j: int, branching: int) -> "NodeId":
        word = []
        for _ in range(k):
            word.append(j % branching)
            j //= branching
        return NodeId(k=k, omega=tuple(reversed(word)))

    def child(self, a: int) -> "NodeId":
        return NodeId(k=self.k + 1, omega=self.omega + (a,))

    def label(self) -> str:
        """Digit string with 1-based branch symbols; root is ''."""
        return "".join(str(a + 1) for a in self.omega)


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis, max-subtracted for stability."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class SignalingPolicy:
    """Per-(node, type) branch logits and the induced distributions.

    `logits[k]` has shape (I^k, I, I): node, type, branch.  `alpha` holds the
    row-wise softmax of the same.
    """

    logits: list[np.ndarray]
    alpha: list[np.ndarray]

    @staticmethod
    def from_logits(logits: list[np.ndarray]) -> "SignalingPolicy":
        return SignalingPolicy(
            logits=[np.asarray(L, dtype=float) for L in logits],
            alpha=[softmax_rows(np.asarray(L, dtype=float)) for L in logits],
        )

    @staticmethod
    def zeros(num_types: int, horizon: int) -> "SignalingPolicy":
        logits = [
            np.zeros((num_types**k, num_types, num_types)) for k in range(horizon)
        ]
        return SignalingPolicy.from_logits(logits)

    @property
    def horizon(self) -> int:
        return len(self.logits)

    @property
    def num_types(self) -> int:
        return self.logits[0].shape[1]

    def subtree(self, branch_path: tuple[int, ...]) -> "SignalingPolicy":
        """Restriction to the subtree under a realized branch word.

        Logits are re-centered per row (softmax is shift invariant) so a
        warm start never carries unbounded offsets.
        """
        I = self.num_types
        k0 = len(branch_path)
        root = NodeId(k=k0, omega=branch_path).flat(I)
        logits = []
        for k in range(k0, self.horizon):
            width = I ** (k - k0)
            lo = root * width
            block = self.logits[k][lo : lo + width]
            logits.append(block - np.mean(block, axis=-1, keepdims=True))
        return SignalingPolicy.from_logits(logits)


@dataclass
class BeliefTree:
    """Beliefs, branch weights, and prune flags for one signaling policy.

    beliefs[k]: (I^k, I) posteriors; lam[k]: (I^k, I) branch weights;
    pruned[k]: (I^k, I) flags; lam_norm[k]: weights renormalized over
    surviving siblings (zero on pruned branches).
    """

    prior: np.ndarray
    beliefs: list[np.ndarray]
    lam: list[np.ndarray]
    lam_norm: list[np.ndarray]
    pruned: list[np.ndarray]

    @property
    def horizon(self) -> int:
        return len(self.lam)

    @property
    def num_types(self) -> int:
        return self.prior.shape[0]

    def node_belief(self, node: NodeId) -> np.ndarray:
        return self.beliefs[node.k][node.flat(self.num_types)]


def forward_bayes_pass(policy: SignalingPolicy, prior: np.ndarray) -> BeliefTree:
    """Propagate the public belief down the whole tree.

    At every node, lam_a = sum_i p_i alpha[i, a] and the posterior after
    branch a is alpha[:, a] * p / lam_a.  The martingale property
    sum_a lam_a p_child_a = p holds exactly on unpruned branches.
    """
    prior = np.asarray(prior, dtype=float).reshape(-1)
    I = policy.num_types
    K = policy.horizon
    beliefs = [prior[None, :].copy()]
    lam: list[np.ndarray] = []
    lam_norm: list[np.ndarray] = []
    pruned: list[np.ndarray] = []
    for k in range(K):
        p = beliefs[k]  # (N, I)
        a = policy.alpha[k]  # (N, I, I)
        w = np.einsum("ni,nia->na", p, a)  # (N, I)
        dead = w < LAMBDA_FLOOR
        safe = np.where(dead, 1.0, w)
        post = a * p[:, :, None] / safe[:, None, :]  # (N, I_types, I_branch)
        post = np.where(dead[:, None, :], p[:, :, None], post)
        child = np.swapaxes(post, 1, 2).reshape(-1, I)  # (N*I, I) by child index
        surviving = np.where(dead, 0.0, w)
        norm = surviving / np.sum(surviving, axis=1, keepdims=True)
        beliefs.append(child)
        lam.append(w)
        lam_norm.append(norm)
        pruned.append(dead)
    return BeliefTree(
        prior=prior, beliefs=beliefs, lam=lam, lam_norm=lam_norm, pruned=pruned
    )


def martingale_residual(tree: BeliefTree) -> float:
    """Max abs deviation of sum_a lam_a p_child_a from the parent belief.

    Pruned branches carry their raw weight and the parent posterior, so the
    residual they induce is bounded by the weight floor itself.
    """
    worst = 0.0
    I = tree.num_types
    for k in range(tree.horizon):
        child = tree.beliefs[k + 1].reshape(-1, I, I)  # (N, branch, type)
        recon = np.einsum("na,nai->ni", tree.lam[k], child)
        worst = max(worst, float(np.max(np.abs(recon - tree.beliefs[k]))))
    return worst


def belief_average(
    posteriors: np.ndarray, spec: GameSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior-weighted control penalties (R_bar, S_bar).

    `posteriors` may be a single belief (I,) or a batch (..., I); outputs get
    matching leading axes.
    """
    st = spec.stacked()
    R_bar = np.einsum("...i,iuv->...uv", posteriors, st["R"])
    S_bar = np.einsum("...i,iuv->...uv", posteriors, st["S"])
    return R_bar, S_bar


def tree_to_document(tree: BeliefTree) -> dict:
    """Diagnostic JSON document: per-node beliefs plus branch bookkeeping."""
    I = tree.num_types
    nodes = []
    for k in range(tree.horizon + 1):
        for j in range(tree.beliefs[k].shape[0]):
            node = {
                "k": k,
                "omega": NodeId.from_flat(k, j, I).label(),
                "p": tree.beliefs[k][j].tolist(),
            }
            if k < tree.horizon:
                node["lambda"] = tree.lam[k][j].tolist()
                node["pruned"] = tree.pruned[k][j].astype(bool).tolist()
            nodes.append(node)
    return {"version": 1, "num_types": I, "horizon": tree.horizon, "nodes": nodes}


def save_tree(tree: BeliefTree, path: str | Path) -> None:
    Path(path).write_text(json.dumps(tree_to_document(tree)) + "\n")
