"""Counter-based derivation of random streams.

Two mechanisms are used:

* Tree environments hash a chain ``key(child) = H(key(parent), index)``
  starting from a root key bound to the global seed.  Uniforms for an edge
  are read off ``H(key(edge), counter)``.  The value attached to an edge
  therefore depends only on (seed, vertex word), never on query order.
* Everything else (replica blocks, walk clocks, particle resampling) uses
  :class:`numpy.random.SeedSequence` with a spawn key naming the stream.
"""

import hashlib

import numpy as np

KEY_BYTES = 16
_U53 = 2.0 ** -53
_MASK64 = (1 << 64) - 1

# spawn-key tags, one per consumer
STREAM_LYAP = 0x4C59
STREAM_CASCADE = 0x4341
STREAM_WALK = 0x574B
STREAM_CHAOS = 0x4348
STREAM_CHECK = 0x434B


def check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed > _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def root_key(seed, domain=b"edge-env"):
    seed = check_seed(seed)
    return hashlib.blake2b(seed.to_bytes(8, "little"), digest_size=KEY_BYTES,
                           person=domain[:16]).digest()


def child_key(parent_key, index):
    return hashlib.blake2b(parent_key + int(index).to_bytes(8, "little"),
                           digest_size=KEY_BYTES).digest()


def word_key(seed, word):
    key = root_key(seed)
    for letter in word:
        key = child_key(key, letter)
    return key


def _raw_words(key, k):
    blocks = -(-k // 8)
    buf = b"".join(
        hashlib.blake2b(key + j.to_bytes(4, "little"), digest_size=64).digest()
        for j in range(blocks)
    )
    return buf


def key_uniforms(key, k):
    """``k`` uniforms in the open interval (0, 1) attached to ``key``."""
    if k == 0:
        return np.empty(0)
    x = np.frombuffer(_raw_words(key, k), dtype="<u8")[:k]
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def keys_uniforms(keys, k):
    """Stacked :func:`key_uniforms` for a sequence of keys, shape (len(keys), k)."""
    n = len(keys)
    if k == 0 or n == 0:
        return np.empty((n, k))
    buf = b"".join(_raw_words(key, k) for key in keys)
    width = 8 * -(-k // 8)
    x = np.frombuffer(buf, dtype="<u8").reshape(n, width)[:, :k]
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def derive_rng(seed, *key):
    """Generator for the stream named by ``key`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=check_seed(seed),
                                spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def block_sizes(total, n_blocks):
    """Deterministic split of ``total`` items into ``n_blocks`` near-equal parts."""
    base, extra = divmod(total, n_blocks)
    return [base + (1 if i < extra else 0) for i in range(n_blocks)]
