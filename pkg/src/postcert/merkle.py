"""Append-only Merkle tree with audit and consistency proofs.

Tree shape follows the transparency-log convention: a tree over n leaves
splits at the largest power of two strictly less than n, leaves are hashed
with the 0x00 prefix and nodes with 0x01. Proof verification uses the
iterative index-walk algorithms, so generation and verification are
independent code paths.
"""

from __future__ import annotations

from .crypto import HashScheme, SHA256


def largest_power_of_two_below(n: int) -> int:
    """Largest power of two strictly less than n (n >= 2)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return 1 << (n.bit_length() - 1) if n & (n - 1) else n >> 1


class MerkleTree:
    """Grow-only leaf store with subtree-hash caching.

    Only complete, aligned subtrees are memoized; that keeps the cache linear
    in the number of leaves while making repeated root/proof computations on
    a growing tree cheap.
    """

    def __init__(self, scheme: HashScheme = SHA256) -> None:
        self.scheme = scheme
        self._leaf_hashes: list[bytes] = []
        self._memo: dict[tuple[int, int], bytes] = {}

    @property
    def size(self) -> int:
        return len(self._leaf_hashes)

    def append(self, payload: bytes) -> bytes:
        leaf = self.scheme.hash_leaf(payload)
        self._leaf_hashes.append(leaf)
        return leaf

    def leaf_hash(self, index: int) -> bytes:
        return self._leaf_hashes[index]

    def _range_hash(self, lo: int, hi: int) -> bytes:
        n = hi - lo
        if n == 1:
            return self._leaf_hashes[lo]
        complete = n & (n - 1) == 0 and lo % n == 0
        if complete:
            cached = self._memo.get((lo, hi))
            if cached is not None:
                return cached
        k = largest_power_of_two_below(n)
        value = self.scheme.hash_node(self._range_hash(lo, lo + k), self._range_hash(lo + k, hi))
        if complete:
            self._memo[(lo, hi)] = value
        return value

    def root(self, treesize: int | None = None) -> bytes:
        n = self.size if treesize is None else treesize
        if not 0 <= n <= self.size:
            raise ValueError("treesize out of range")
        if n == 0:
            return self.scheme.empty_root()
        return self._range_hash(0, n)

    def audit_path(self, index: int, treesize: int) -> tuple[bytes, ...]:
        """Sibling hashes from the leaf up to the root of the first
        ``treesize`` leaves."""
        if not 0 <= index < treesize <= self.size:
            raise ValueError("audit path arguments out of range")
        path: list[bytes] = []
        lo, hi = 0, treesize
        while hi - lo > 1:
            k = largest_power_of_two_below(hi - lo)
            mid = lo + k
            if index < mid:
                path.append(self._range_hash(mid, hi))
                hi = mid
            else:
                path.append(self._range_hash(lo, mid))
                lo = mid
        path.reverse()
        return tuple(path)

    def consistency_path(self, first: int, second: int) -> tuple[bytes, ...]:
        """Proof that the first ``first`` leaves are a prefix of the first
        ``second`` leaves."""
        if not 0 <= first <= second <= self.size:
            raise ValueError("consistency path arguments out of range")
        if first == 0 or first == second:
            return ()
        return tuple(self._subproof(first, 0, second, True))

    def _subproof(self, m: int, lo: int, hi: int, complete_prefix: bool) -> list[bytes]:
        n = hi - lo
        if m == n:
            return [] if complete_prefix else [self._range_hash(lo, hi)]
        k = largest_power_of_two_below(n)
        if m <= k:
            return self._subproof(m, lo, lo + k, complete_prefix) + [self._range_hash(lo + k, hi)]
        return self._subproof(m - k, lo + k, hi, False) + [self._range_hash(lo, lo + k)]


def root_from_audit_path(
    leaf_hash: bytes,
    index: int,
    treesize: int,
    path: tuple[bytes, ...],
    scheme: HashScheme = SHA256,
) -> bytes | None:
    """Reconstruct the root implied by an audit path, or None if malformed."""
    if index >= treesize or treesize < 1:
        return None
    fn, sn = index, treesize - 1
    value = leaf_hash
    for node in path:
        if sn == 0:
            return None
        if fn & 1 or fn == sn:
            value = scheme.hash_node(node, value)
            if not fn & 1:
                while True:
                    fn >>= 1
                    sn >>= 1
                    if fn & 1 or fn == 0:
                        break
        else:
            value = scheme.hash_node(value, node)
        fn >>= 1
        sn >>= 1
    if sn != 0:
        return None
    return value


def verify_consistency(
    first: int,
    second: int,
    first_root: bytes,
    second_root: bytes,
    path: tuple[bytes, ...],
    scheme: HashScheme = SHA256,
) -> bool:
    """Check that the tree of size ``second`` extends the tree of size
    ``first`` whose root was ``first_root``."""
    if first > second:
        return False
    if first == second:
        return not path and first_root == second_root
    if first == 0:
        return not path and first_root == scheme.empty_root()
    hashes = list(path)
    if first & (first - 1) == 0:
        hashes.insert(0, first_root)
    if not hashes:
        return False
    fn, sn = first - 1, second - 1
    while fn & 1:
        fn >>= 1
        sn >>= 1
    fr = sr = hashes[0]
    for node in hashes[1:]:
        if sn == 0:
            return False
        if fn & 1 or fn == sn:
            fr = scheme.hash_node(node, fr)
            sr = scheme.hash_node(node, sr)
            if not fn & 1:
                while True:
                    fn >>= 1
                    sn >>= 1
                    if fn & 1 or fn == 0:
                        break
        else:
            sr = scheme.hash_node(sr, node)
        fn >>= 1
        sn >>= 1
    return fr == first_root and sr == second_root and sn == 0
