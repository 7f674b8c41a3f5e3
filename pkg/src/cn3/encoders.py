"""Node and edge attribute encoders.

Each sentence becomes a graph whose nodes carry the word embedding h0 plus
an attribute vector v built from any of: a position embedding, a BiLSTM
context vector, a max-pooled character convolution, a POS-tag embedding,
and a spelling-class embedding. Edges carry a relation embedding per
ordered pair, symmetric in the pair and falling back to a learned no-edge
row (the relation table's pad row) for absent pairs and the diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .embeddings import EmbeddingTable, lookup

MAX_SENTENCE_LEN = 256

ATTR_ORDER = ("position", "lstm_context", "char", "pos_tag", "spell")


@dataclass(frozen=True)
class NodeAttrConfig:
    """Which attribute encoders feed the node vector v, and their sizes."""

    use_position: bool = False
    use_lstm_context: bool = False
    use_char: bool = False
    use_pos_tag: bool = False
    use_spell: bool = False
    lstm_hidden: int = 100
    char_conv_width: int = 3

    def __post_init__(self):
        if self.lstm_hidden < 1:
            raise ValueError("lstm_hidden must be positive")
        if self.char_conv_width < 1:
            raise ValueError("char_conv_width must be positive")

    def enabled(self) -> tuple[str, ...]:
        flags = {"position": self.use_position, "lstm_context": self.use_lstm_context,
                 "char": self.use_char, "pos_tag": self.use_pos_tag,
                 "spell": self.use_spell}
        return tuple(name for name in ATTR_ORDER if flags[name])


@dataclass
class SentenceGraph:
    """One sentence as ids: tokens are nodes, dependency pairs are edges."""

    word_ids: list[int]
    char_ids: list[list[int]]
    spell_ids: list[int]
    pos_tag_ids: list[int] | None = None
    dep_edges: dict[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        n = self.n
        if n == 0:
            raise ValueError("a sentence graph needs at least one token")
        if len(self.char_ids) != n or len(self.spell_ids) != n:
            raise ValueError("char_ids and spell_ids must cover every token")
        if any(len(cs) == 0 for cs in self.char_ids):
            raise ValueError("every token needs at least one character id")
        if self.pos_tag_ids is not None and len(self.pos_tag_ids) != n:
            raise ValueError("pos_tag_ids must cover every token")
        for (i, j) in self.dep_edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"dependency pair ({i}, {j}) outside [0, {n})")

    @property
    def n(self) -> int:
        return len(self.word_ids)


# ---------------------------------------------------------------------------
# parameter bundles

@dataclass
class CharConvParams:
    """Width-w linear convolution over char embeddings, max-pooled over time."""

    width: int
    weight: Tensor  # [width * d_emb, d_out]
    bias: Tensor    # [d_out]


def init_char_conv(width: int, d_emb: int, d_out: int,
                   rng: np.random.Generator) -> CharConvParams:
    return CharConvParams(
        width=width,
        weight=ad.uniform((width * d_emb, d_out), -0.1, 0.1, rng),
        bias=ad.zeros((d_out,), requires_grad=True),
    )


@dataclass
class LstmParams:
    """Single-direction LSTM; gate layout along columns is [i, f, g, o]."""

    w_input: Tensor   # [d_in, 4h]
    w_hidden: Tensor  # [h, 4h]
    bias: Tensor      # [4h]

    @property
    def hidden(self) -> int:
        return self.w_hidden.shape[0]


def init_lstm(d_in: int, hidden: int, rng: np.random.Generator) -> LstmParams:
    bias = np.zeros(4 * hidden)
    bias[hidden:2 * hidden] = 1.0  # forget gate starts open
    return LstmParams(
        w_input=ad.uniform((d_in, 4 * hidden), -0.1, 0.1, rng),
        w_hidden=ad.uniform((hidden, 4 * hidden), -0.1, 0.1, rng),
        bias=Tensor(bias, requires_grad=True),
    )


@dataclass
class BiLstmParams:
    forward: LstmParams
    backward: LstmParams


def init_bilstm(d_in: int, hidden: int, rng: np.random.Generator) -> BiLstmParams:
    return BiLstmParams(init_lstm(d_in, hidden, rng), init_lstm(d_in, hidden, rng))


@dataclass
class EncoderParams:
    """All tables and weights the attribute encoders may draw on."""

    word_table: EmbeddingTable
    rel_table: EmbeddingTable
    position_table: EmbeddingTable | None = None
    char_table: EmbeddingTable | None = None
    char_conv: CharConvParams | None = None
    lstm: BiLstmParams | None = None
    pos_tag_table: EmbeddingTable | None = None
    spell_table: EmbeddingTable | None = None


# ---------------------------------------------------------------------------
# encoders

def encode_positions(n: int, table: EmbeddingTable) -> Tensor:
    """Row i is the embedding of absolute position i."""
    if n > table.rows:
        raise ValueError(
            f"sentence length {n} exceeds the position table ({table.rows} rows); "
            "truncate sentences at ingestion")
    return lookup(table, range(n))


def encode_chars(char_ids: Iterable[Iterable[int]], table: EmbeddingTable,
                 conv: CharConvParams) -> Tensor:
    """Per-token char convolution pooled by max over window positions.

    Trailing pad ids are stripped before windows are formed, so padding a
    token's char sequence never changes its pooled vector; a token shorter
    than the window is extended with pad ids to form one window.
    """
    pad = table.vocab.pad_id if table.vocab is not None else 0
    width = conv.width
    windows: list[list[int]] = []
    spans: list[tuple[int, int]] = []
    for cs in char_ids:
        cs = list(cs)
        while len(cs) > 1 and cs[-1] == pad:
            cs.pop()
        if len(cs) < width:
            cs = cs + [pad] * (width - len(cs))
        start = len(windows)
        for j in range(len(cs) - width + 1):
            windows.append(cs[j:j + width])
        spans.append((start, len(windows)))

    flat = [c for w in windows for c in w]
    emb = lookup(table, flat)                                  # [W*width, d_emb]
    stacked = ad.reshape(emb, (len(windows), width * emb.shape[1]))
    conv_out = ad.matmul(stacked, conv.weight) + conv.bias     # [W, d_out]

    pooled = []
    for start, stop in spans:
        token_rows = ad.gather_rows(conv_out, range(start, stop))
        pooled.append(ad.reshape(ad.max_rows(token_rows), (1, conv_out.shape[1])))
    return ad.concat_rows(pooled) if len(pooled) > 1 else pooled[0]


def _lstm_direction(xs: Tensor, p: LstmParams, reverse: bool) -> list[Tensor]:
    n = xs.shape[0]
    h = p.hidden
    state_h = ad.zeros((1, h))
    state_c = ad.zeros((1, h))
    order = range(n - 1, -1, -1) if reverse else range(n)
    outs: list[Tensor | None] = [None] * n
    for t in order:
        x_t = ad.gather_rows(xs, [t])
        z = ad.matmul(x_t, p.w_input) + ad.matmul(state_h, p.w_hidden) + p.bias
        gate_i = ad.sigmoid(ad.slice_cols(z, 0, h))
        gate_f = ad.sigmoid(ad.slice_cols(z, h, 2 * h))
        cand = ad.tanh(ad.slice_cols(z, 2 * h, 3 * h))
        gate_o = ad.sigmoid(ad.slice_cols(z, 3 * h, 4 * h))
        state_c = gate_f * state_c + gate_i * cand
        state_h = gate_o * ad.tanh(state_c)
        outs[t] = state_h
    return outs  # type: ignore[return-value]


def bilstm_context(word_vecs: Tensor, params: BiLstmParams) -> Tensor:
    """Concatenate left-to-right and right-to-left LSTM states per position."""
    fwd = _lstm_direction(word_vecs, params.forward, reverse=False)
    bwd = _lstm_direction(word_vecs, params.backward, reverse=True)
    rows = [ad.concat_cols([f, b]) for f, b in zip(fwd, bwd)]
    return ad.concat_rows(rows) if len(rows) > 1 else rows[0]


def assemble_node_attrs(g: SentenceGraph, cfg: NodeAttrConfig,
                        params: EncoderParams) -> tuple[Tensor, Tensor | None]:
    """Return (h0, v): word embeddings and the concatenated attribute vector.

    v is None when no attribute is enabled; downstream code skips it in
    concatenations rather than carrying a zero-width block.
    """
    h0 = lookup(params.word_table, g.word_ids)
    parts: list[Tensor] = []
    for name in cfg.enabled():
        if name == "position":
            if params.position_table is None:
                raise ValueError("position attribute enabled but no position table")
            parts.append(encode_positions(g.n, params.position_table))
        elif name == "lstm_context":
            if params.lstm is None:
                raise ValueError("lstm context enabled but no lstm parameters")
            parts.append(bilstm_context(h0, params.lstm))
        elif name == "char":
            if params.char_table is None or params.char_conv is None:
                raise ValueError("char attribute enabled but no char encoder")
            parts.append(encode_chars(g.char_ids, params.char_table, params.char_conv))
        elif name == "pos_tag":
            if params.pos_tag_table is None:
                raise ValueError("pos-tag attribute enabled but no tag table")
            if g.pos_tag_ids is None:
                raise ValueError("pos-tag attribute enabled but sentence has no tags")
            parts.append(lookup(params.pos_tag_table, g.pos_tag_ids))
        elif name == "spell":
            if params.spell_table is None:
                raise ValueError("spell attribute enabled but no spell table")
            parts.append(lookup(params.spell_table, g.spell_ids))
    if not parts:
        return h0, None
    return h0, (ad.concat_cols(parts) if len(parts) > 1 else parts[0])


def assemble_edge_attrs(g: SentenceGraph, rel_table: EmbeddingTable) -> Tensor:
    """Edge attribute rows for every ordered pair, row-major: (i, j) at i*n + j.

    Pairs match direction-insensitively; absent pairs and the diagonal use
    the relation table's pad row, which acts as the learned no-edge vector.
    """
    n = g.n
    no_edge = rel_table.vocab.pad_id if rel_table.vocab is not None else 0
    ids = np.full(n * n, no_edge, dtype=np.intp)
    for (i, j), rel in g.dep_edges.items():
        if i == j:
            continue
        ids[i * n + j] = rel
        ids[j * n + i] = rel
    return lookup(rel_table, ids)


def attr_width(cfg: NodeAttrConfig, params: EncoderParams) -> int:
    """Width of v under cfg; the sum of the enabled encoders' output sizes."""
    total = 0
    for name in cfg.enabled():
        if name == "position":
            total += params.position_table.dim
        elif name == "lstm_context":
            total += 2 * params.lstm.forward.hidden
        elif name == "char":
            total += params.char_conv.weight.shape[1]
        elif name == "pos_tag":
            total += params.pos_tag_table.dim
        elif name == "spell":
            total += params.spell_table.dim
    return total
