"""Bag-of-binary-words place recognition.

A hierarchical vocabulary is built by k-medians clustering in Hamming
space (bitwise-majority centroids), descriptors are folded into sparse
TF-IDF vectors, and an inverted-index database answers ranked similarity
queries that are exactly equal to brute-force scoring.
"""

import struct

import numpy as np

from . import kernels

VOCAB_MAGIC = b"VBW1"
NO_PARENT = 0xFFFFFFFF
NO_WORD = 0xFFFFFFFF

KMEDIANS_MAX_ITERS = 25


class InsufficientDescriptorsError(ValueError):
    """Raised when a clustering level cannot be seeded with enough
    distinct descriptors."""


class DuplicateFrameError(ValueError):
    """Raised when a frame id is added to a database twice."""


class VocabularyFormatError(ValueError):
    """Raised for malformed vocabulary files."""


class BowVector:
    """Sparse L1-normalized word->weight map. Empty means the source frame
    produced no weighted words."""

    __slots__ = ("weights",)

    def __init__(self, weights):
        self.weights = dict(weights)

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return "BowVector(%d words)" % len(self.weights)


def bow_score(a, b):
    """L1 similarity 1 - 0.5*sum|a_i - b_i|, which is sum(min(a_i, b_i))
    for normalized vectors. Empty vectors score 0 against everything."""
    if len(a.weights) == 0 or len(b.weights) == 0:
        return 0.0
    # summation in sorted word order so the result is exactly symmetric
    common = sorted(a.weights.keys() & b.weights.keys())
    s = 0.0
    for w in common:
        s += min(a.weights[w], b.weights[w])
    return s


class _Node:
    __slots__ = ("parent", "centroid", "children", "word_id")

    def __init__(self, parent, centroid):
        self.parent = parent
        self.centroid = centroid  # (32,) uint8
        self.children = []
        self.word_id = None


def _majority_centroid(descs):
    """Bitwise majority over (n, 32) descriptors; exact half ties go to 0."""
    bits = np.unpackbits(descs, axis=1).sum(axis=0)
    return np.packbits(2 * bits > descs.shape[0])


def _kmedians(descs, k, rng):
    """Cluster rows of (n, 32) uint8 into <= k groups by Hamming k-medians.

    Returns (centroids, assignment). Deterministic: argmin ties take the
    lowest centroid index, majority ties take bit 0, empty clusters keep
    their previous centroid.
    """
    uniq = np.unique(descs, axis=0)
    kk = min(k, uniq.shape[0])
    if kk == uniq.shape[0]:
        centroids = uniq.copy()
    else:
        pick = rng.choice(uniq.shape[0], size=kk, replace=False)
        centroids = uniq[pick].copy()
    assign = None
    for _ in range(KMEDIANS_MAX_ITERS):
        d = kernels.hamming_cdist(descs, centroids)
        new_assign = np.argmin(d, axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(kk):
            members = descs[assign == c]
            if members.shape[0]:
                centroids[c] = _majority_centroid(members)
    return centroids, assign


class Vocabulary:
    """Hierarchical binary vocabulary: a k-ary tree of 32-byte centroids
    whose leaves are words with IDF weights."""

    def __init__(self, k, depth):
        self.k = int(k)
        self.depth = int(depth)
        self.nodes = []
        self.idf = np.zeros(0, dtype=np.float64)

    @property
    def word_count(self):
        return self.idf.shape[0]

    def words_for(self, descs):
        """Word id per descriptor, batched level by level."""
        descs = np.asarray(descs, dtype=np.uint8).reshape(-1, 32)
        n = descs.shape[0]
        node_of = np.zeros(n, dtype=np.int64)
        while True:
            done = True
            for node in np.unique(node_of):
                kids = self.nodes[node].children
                if not kids:
                    continue
                done = False
                sel = node_of == node
                cents = np.array([self.nodes[c].centroid for c in kids])
                d = kernels.hamming_cdist(descs[sel], cents)
                node_of[sel] = np.array(kids, dtype=np.int64)[np.argmin(d, axis=1)]
            if done:
                break
        return np.array([self.nodes[i].word_id for i in node_of], dtype=np.int64)


def build_vocabulary(training, k, depth, seed):
    """Build a Vocabulary from per-image descriptor sets.

    training: list of (Ni, 32) uint8 arrays, one per image. The tree is
    clustered on the pooled set; IDF weights are ln(N / n_i) over the
    training images.
    """
    if k < 2 or depth < 1:
        raise ValueError("need k >= 2 and depth >= 1")
    sets = [np.asarray(t, dtype=np.uint8).reshape(-1, 32) for t in training]
    pool = np.vstack(sets) if sets else np.zeros((0, 32), np.uint8)
    if np.unique(pool, axis=0).shape[0] < k:
        raise InsufficientDescriptorsError(
            "clustering level 0 needs >= %d distinct descriptors, have %d"
            % (k, np.unique(pool, axis=0).shape[0])
        )
    rng = np.random.default_rng(seed)
    voc = Vocabulary(k, depth)
    voc.nodes.append(_Node(NO_PARENT, _majority_centroid(pool)))
    words = []

    def split(node_idx, descs, level):
        node = voc.nodes[node_idx]
        if level == depth or np.unique(descs, axis=0).shape[0] <= 1:
            node.word_id = len(words)
            words.append(node_idx)
            return
        centroids, assign = _kmedians(descs, k, rng)
        for c in range(centroids.shape[0]):
            members = descs[assign == c]
            if members.shape[0] == 0:
                continue
            child = _Node(node_idx, centroids[c].copy())
            voc.nodes.append(child)
            child_idx = len(voc.nodes) - 1
            node.children.append(child_idx)
            split(child_idx, members, level + 1)

    split(0, pool, 0)

    # document frequency over training images, through the finished tree
    n_images = len(sets)
    df = np.zeros(len(words), dtype=np.int64)
    for s in sets:
        if s.shape[0]:
            df[np.unique(voc.words_for(s))] += 1
    voc.idf = np.where(df > 0, np.log(float(n_images) / np.maximum(df, 1)), 0.0)
    return voc


def transform(descs, vocab):
    """Fold descriptors into an L1-normalized TF-IDF BowVector. Words with
    zero IDF carry no information and are dropped."""
    descs = np.asarray(descs, dtype=np.uint8).reshape(-1, 32)
    if descs.shape[0] == 0:
        return BowVector({})
    words = vocab.words_for(descs)
    ids, counts = np.unique(words, return_counts=True)
    weights = {}
    for w, c in zip(ids, counts):
        tfidf = float(c) * vocab.idf[w]
        if tfidf > 0.0:
            weights[int(w)] = tfidf
    total = sum(weights.values())
    if total <= 0.0:
        return BowVector({})
    return BowVector({w: v / total for w, v in weights.items()})


class BowDatabase:
    """Inverted-index frame store. Single writer; queries must not
    interleave with adds without external coordination."""

    def __init__(self, vocab):
        self.vocab = vocab
        self.vectors = {}
        self.order = []
        self.inverted = {}

    def __len__(self):
        return len(self.order)


def db_add(db, frame_id, vec):
    frame_id = int(frame_id)
    if frame_id in db.vectors:
        raise DuplicateFrameError("frame %d already in database" % frame_id)
    db.vectors[frame_id] = vec
    db.order.append(frame_id)
    for w, weight in vec.weights.items():
        db.inverted.setdefault(w, []).append((frame_id, weight))


def db_query(db, vec, exclude_last, top_n):
    """Ranked (frame_id, score) list over frames sharing >= 1 word,
    skipping the `exclude_last` most recent adds. Exactly equal to scoring
    every stored frame brute-force."""
    # clamp: len-exclude_last may go negative on a short database, and a
    # negative slice start would wrongly keep early frames eligible
    excluded = set(db.order[max(0, len(db.order) - exclude_last) :]) if exclude_last > 0 else set()
    cand = set()
    for w in vec.weights:
        for frame_id, _ in db.inverted.get(w, ()):
            if frame_id not in excluded:
                cand.add(frame_id)
    scored = [(fid, bow_score(vec, db.vectors[fid])) for fid in cand]
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored[:top_n]


def pick_loop_candidate(db, vec, min_score=0.015, rel_factor=0.5, exclude_last=30):
    """Best loop candidate, or None.

    Acceptance requires an absolute score floor and that the candidate
    holds up against the best temporal neighbor (the excluded recent
    frames), which normalizes for scene texture level.
    """
    top = db_query(db, vec, exclude_last, 1)
    if not top:
        return None
    fid, score = top[0]
    if score < min_score:
        return None
    recent = db.order[max(0, len(db.order) - exclude_last) :] if exclude_last > 0 else []
    neighbor = 0.0
    for r in recent:
        neighbor = max(neighbor, bow_score(vec, db.vectors[r]))
    if score < rel_factor * neighbor:
        return None
    return fid, score


# -- VBW1 serialization -------------------------------------------------------

_VOCAB_HEADER = struct.Struct("<4sIIII")
_NODE_FIXED = struct.Struct("<I32sBId")


def save_vocabulary(vocab, path):
    """Write the VBW1 binary form: header then nodes in index order
    (children order on disk = record order)."""
    out = bytearray()
    out += _VOCAB_HEADER.pack(
        VOCAB_MAGIC, vocab.k, vocab.depth, len(vocab.nodes), vocab.word_count
    )
    for n in vocab.nodes:
        wid = NO_WORD if n.word_id is None else n.word_id
        idf = float(vocab.idf[n.word_id]) if n.word_id is not None else 0.0
        leaf = 1 if n.word_id is not None else 0
        out += _NODE_FIXED.pack(n.parent, n.centroid.tobytes(), leaf, wid, idf)
    with open(path, "wb") as f:
        f.write(bytes(out))


def load_vocabulary(path):
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < _VOCAB_HEADER.size:
        raise VocabularyFormatError("%s: truncated header" % path)
    magic, k, depth, node_count, word_count = _VOCAB_HEADER.unpack_from(buf, 0)
    if magic != VOCAB_MAGIC:
        raise VocabularyFormatError("%s: bad magic %r" % (path, magic))
    need = _VOCAB_HEADER.size + node_count * _NODE_FIXED.size
    if len(buf) < need:
        raise VocabularyFormatError(
            "%s: truncated, %d bytes but %d nodes need %d" % (path, len(buf), node_count, need)
        )
    voc = Vocabulary(k, depth)
    voc.idf = np.zeros(word_count, dtype=np.float64)
    off = _VOCAB_HEADER.size
    for i in range(node_count):
        parent, cent, leaf, wid, idf = _NODE_FIXED.unpack_from(buf, off)
        off += _NODE_FIXED.size
        node = _Node(parent, np.frombuffer(cent, dtype=np.uint8).copy())
        if leaf:
            node.word_id = wid
            voc.idf[wid] = idf
        voc.nodes.append(node)
        if parent != NO_PARENT:
            voc.nodes[parent].children.append(i)
    return voc
