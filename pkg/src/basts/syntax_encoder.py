"""Child-Sum Tree-LSTM over split ASTs and next-split pre-training.

Every AST node is embedded by its type_value label and folded bottom-up:
children's hidden states are summed for the input/output/update gates
while each child's memory passes through its own forget gate. Leaves
borrow a single learnable virtual child state so the same cell serves
the whole tree. The root hidden state is the split's syntax embedding.

Pre-training scores ordered pairs of split embeddings with a logistic
head and minimizes binary cross entropy against the block successor
relation; the trained tree parameters are what the summarizer later
fine-tunes.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from basts import autodiff as ad
from basts.autodiff import Adam, Tape, Tensor, backward
from basts.frontend import iter_nodes
from basts.splitter import MethodSplits, SplitAst

UNK_TYPE_VALUE = "<UNK>"


class ConfigError(ValueError):
    pass


def build_type_value_vocab(roots, min_freq: int = 2) -> dict[str, int]:
    """Map type_value labels to embedding rows; rare labels fall to UNK.

    Labels seen fewer than `min_freq` times share the UNK row at index 0.
    """
    counts = Counter()
    for root in roots:
        counts.update(n.type_value() for n in iter_nodes(root))
    vocab = {UNK_TYPE_VALUE: 0}
    for label, freq in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        if freq >= min_freq:
            vocab[label] = len(vocab)
    return vocab


@dataclass
class TreeLstmParams:
    vocab: dict[str, int]
    size: int
    embedding: Tensor  # |vocab| x L rows of type_value embeddings
    w_i: Tensor
    u_i: Tensor
    b_i: Tensor
    w_f: Tensor
    u_f: Tensor
    b_f: Tensor
    w_o: Tensor
    u_o: Tensor
    b_o: Tensor
    w_u: Tensor
    u_u: Tensor
    b_u: Tensor
    virtual_h: Tensor  # shared learnable state standing in for leaf children
    virtual_m: Tensor

    @classmethod
    def init(cls, vocab: dict[str, int], size: int,
             rng: np.random.Generator) -> "TreeLstmParams":
        def gate():
            return (
                ad.glorot_init(rng, size, size),
                ad.glorot_init(rng, size, size),
                ad.zeros_init(size),
            )

        w_i, u_i, b_i = gate()
        w_f, u_f, b_f = gate()
        w_o, u_o, b_o = gate()
        w_u, u_u, b_u = gate()
        return cls(
            vocab=dict(vocab),
            size=size,
            embedding=ad.uniform_init(rng, (len(vocab), size), 0.1),
            w_i=w_i, u_i=u_i, b_i=b_i,
            w_f=w_f, u_f=u_f, b_f=b_f,
            w_o=w_o, u_o=u_o, b_o=b_o,
            w_u=w_u, u_u=u_u, b_u=b_u,
            virtual_h=ad.uniform_init(rng, size, 0.1),
            virtual_m=ad.uniform_init(rng, size, 0.1),
        )

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [
            ("embedding", self.embedding),
            ("w_i", self.w_i), ("u_i", self.u_i), ("b_i", self.b_i),
            ("w_f", self.w_f), ("u_f", self.u_f), ("b_f", self.b_f),
            ("w_o", self.w_o), ("u_o", self.u_o), ("b_o", self.b_o),
            ("w_u", self.w_u), ("u_u", self.u_u), ("b_u", self.b_u),
            ("virtual_h", self.virtual_h), ("virtual_m", self.virtual_m),
        ]

    def all_params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    def embed(self, type_value: str) -> Tensor:
        row = self.vocab.get(type_value, 0)
        return ad.embedding_lookup(self.embedding, row)


def tree_lstm_cell(x_v: Tensor, children: list[tuple[Tensor, Tensor]],
                   params: TreeLstmParams) -> tuple[Tensor, Tensor]:
    """One cell application: children (h, m) pairs fold into the parent's.

    Children must be non-empty; leaves pass the virtual child state.
    """
    if not children:
        raise ValueError("tree_lstm_cell needs at least one child state")
    h_tilde = children[0][0]
    for h_c, _ in children[1:]:
        h_tilde = ad.add(h_tilde, h_c)

    def gate(w, u, b, h):
        return ad.add(ad.add(ad.matmul(w, x_v), ad.matmul(u, h)), b)

    i = ad.sigmoid(gate(params.w_i, params.u_i, params.b_i, h_tilde))
    o = ad.sigmoid(gate(params.w_o, params.u_o, params.b_o, h_tilde))
    u = ad.tanh(gate(params.w_u, params.u_u, params.b_u, h_tilde))

    wfx = ad.add(ad.matmul(params.w_f, x_v), params.b_f)
    m = ad.mul(i, u)
    for h_c, m_c in children:
        f_c = ad.sigmoid(ad.add(wfx, ad.matmul(params.u_f, h_c)))
        m = ad.add(m, ad.mul(f_c, m_c))
    h = ad.mul(o, ad.tanh(m))
    return h, m


@dataclass
class SyntaxEmbedding:
    vector: Tensor  # length-L root hidden state
    split_id: int


def encode_tree(t: SplitAst, params: TreeLstmParams) -> SyntaxEmbedding:
    """Bottom-up fold of a split AST into its syntax embedding.

    Iterative post-order, so tree depth is not bounded by the Python
    recursion limit. Each node is processed exactly once.
    """
    states: dict[int, tuple[Tensor, Tensor]] = {}
    virtual = [(params.virtual_h, params.virtual_m)]
    stack = [(t.root, False)]
    while stack:
        node, ready = stack.pop()
        if not ready:
            stack.append((node, True))
            stack.extend((c, False) for c in reversed(node.children))
            continue
        x_v = params.embed(node.type_value())
        if node.children:
            children = [states.pop(c.node_id) for c in node.children]
        else:
            children = virtual
        states[node.node_id] = tree_lstm_cell(x_v, children, params)
    h_root, _ = states[t.root.node_id]
    return SyntaxEmbedding(h_root, t.split_id)


@dataclass
class SepModel:
    tree: TreeLstmParams
    score_w: Tensor  # length 2L projection
    score_b: Tensor  # scalar bias

    @classmethod
    def init(cls, tree: TreeLstmParams, rng: np.random.Generator) -> "SepModel":
        two_l = 2 * tree.size
        return cls(
            tree=tree,
            score_w=ad.glorot_init(rng, two_l, 1, shape=(two_l,)),
            score_b=ad.zeros_init(()),
        )

    def named_params(self) -> list[tuple[str, Tensor]]:
        return self.tree.named_params() + [
            ("score_w", self.score_w),
            ("score_b", self.score_b),
        ]

    def all_params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]


@dataclass
class PairExample:
    t: SplitAst
    t_prime: SplitAst
    label: int  # 1 when t's block directly precedes t_prime's


def sep_score(e_t: SyntaxEmbedding, e_t_prime: SyntaxEmbedding,
              model: SepModel) -> Tensor:
    """Probability in (0, 1) that t_prime is the next split after t."""
    joint = ad.concat([e_t.vector, e_t_prime.vector], axis=0)
    return ad.sigmoid(ad.add(ad.matmul(model.score_w, joint), model.score_b))


def _pair_scores(pairs: list[PairExample], model: SepModel) -> list[Tensor]:
    cache: dict[int, SyntaxEmbedding] = {}

    def embed(tree: SplitAst) -> SyntaxEmbedding:
        key = id(tree)
        if key not in cache:
            cache[key] = encode_tree(tree, model.tree)
        return cache[key]

    return [sep_score(embed(p.t), embed(p.t_prime), model) for p in pairs]


SCORE_FLOOR = 1e-12


def sep_loss(pairs: list[PairExample], model: SepModel) -> Tensor:
    """Mean binary cross entropy of pair scores against successor labels."""
    if not pairs:
        raise ValueError("sep_loss needs at least one pair")
    scores = _pair_scores(pairs, model)
    total = None
    for pair, score in zip(pairs, scores):
        if pair.label == 1:
            term = ad.log(score, floor=SCORE_FLOOR)
        else:
            term = ad.log(ad.add(ad.scalar_mul(score, -1.0), 1.0), floor=SCORE_FLOOR)
        total = term if total is None else ad.add(total, term)
    return ad.scalar_mul(total, -1.0 / len(pairs))


def generate_pairs(splits: MethodSplits, neg_ratio: int = 1,
                   seed: int = 0) -> list[PairExample]:
    """Positive pairs from successor edges plus sampled negatives.

    Negatives are drawn uniformly without replacement from the ordered
    non-adjacent split pairs of the same method, neg_ratio per positive.
    A single-split method yields no pairs.
    """
    asts = {a.split_id: a for a in splits.asts}
    edges = list(splits.graph.successor_edges)
    pairs = [PairExample(asts[a], asts[b], 1) for a, b in edges]
    if not pairs:
        return []
    edge_set = set(edges)
    ids = sorted(asts)
    candidates = [
        (a, b) for a in ids for b in ids if a != b and (a, b) not in edge_set
    ]
    want = min(neg_ratio * len(pairs), len(candidates))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(candidates), size=want, replace=False)
    for idx in chosen:
        a, b = candidates[int(idx)]
        pairs.append(PairExample(asts[a], asts[b], 0))
    return pairs


@dataclass
class PretrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0
    neg_ratio: int = 1

    def validate(self):
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.epochs <= 0:
            raise ConfigError(f"epochs must be positive, got {self.epochs}")
        if self.batch_size <= 0:
            raise ConfigError(f"batch size must be positive, got {self.batch_size}")
        if self.neg_ratio <= 0:
            raise ConfigError(f"neg_ratio must be positive, got {self.neg_ratio}")


@dataclass
class EpochStats:
    loss: float
    accuracy: float


def pretrain(corpus: list[MethodSplits], params: TreeLstmParams,
             config: PretrainConfig) -> tuple[SepModel, list[EpochStats]]:
    """Train the next-split classifier; returns the model and loss history.

    A corpus with no multi-split methods produces no pairs and the
    initialized parameters come back untouched.
    """
    config.validate()
    seeds = np.random.SeedSequence(config.seed).spawn(len(corpus) + 2)
    model = SepModel.init(params, np.random.default_rng(seeds[0]))
    pairs: list[PairExample] = []
    for method_splits, seq in zip(corpus, seeds[2:]):
        method_seed = int(seq.generate_state(1)[0])
        pairs.extend(generate_pairs(method_splits, config.neg_ratio, method_seed))
    if not pairs:
        return model, []

    opt = Adam(model.all_params(), lr=config.learning_rate)
    shuffle_rng = np.random.default_rng(seeds[1])
    history = []
    for _ in range(config.epochs):
        order = shuffle_rng.permutation(len(pairs))
        epoch_loss = 0.0
        correct = 0
        for lo in range(0, len(pairs), config.batch_size):
            batch = [pairs[i] for i in order[lo : lo + config.batch_size]]
            with Tape() as tape:
                loss = sep_loss(batch, model)
                backward(tape, loss)
            opt.step()
            opt.zero_grad()
            epoch_loss += loss.item() * len(batch)
        with ad.no_grad():
            for score, pair in zip(_pair_scores(pairs, model), pairs):
                correct += int((score.item() > 0.5) == bool(pair.label))
        history.append(EpochStats(epoch_loss / len(pairs), correct / len(pairs)))
    return model, history
