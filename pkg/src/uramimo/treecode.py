"""Outer concatenated code: parity-linked chunking and list decoding.

A w-bit message is split over ``s`` sections of ``j``-bit chunks.  Section s
carries ``profile[s-1]`` data bits followed by ``v_s = j - profile[s-1]``
parity bits formed as pseudo-random GF(2) combinations of the data bits of
the strictly previous sections.  Decoding walks the per-slot candidate
lists stage by stage, keeping exactly the paths whose parity checks pass.

Bit conventions (fixed so indices are bit-exact across implementations):
 * a message is an int in [0, 2**w); bit (w-1) is the first data bit;
 * a chunk is an int in [0, 2**j): data bits first (most significant),
   parity bits last, each field most-significant-first;
 * parity bit t of section s is row t of ``g[s]`` times the concatenated
   data bits of sections 1..s-1 (first data bit = vector position 0), mod 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecError, TreeDecodeOverflow

DEFAULT_MAX_PATHS = 100_000


@dataclass(frozen=True)
class TreeCodeSpec:
    """Geometry of the outer code; fully determined by its five fields."""

    w: int
    s: int
    j: int
    profile: tuple[int, ...]
    parity_seed: int

    def __post_init__(self):
        object.__setattr__(self, "profile", tuple(int(x) for x in self.profile))

    def validate(self) -> None:
        if self.s < 1 or self.j < 1 or self.w < 1:
            raise SpecError(f"w, s, j must all be >= 1, got {self.w}, {self.s}, {self.j}")
        if len(self.profile) != self.s:
            raise SpecError(f"profile has {len(self.profile)} entries, expected s={self.s}")
        if self.profile[0] != self.j:
            raise SpecError(f"first section must carry j={self.j} data bits, got {self.profile[0]}")
        if any(not 0 <= ws <= self.j for ws in self.profile):
            raise SpecError(f"every profile entry must lie in [0, {self.j}]")
        if sum(self.profile) != self.w:
            raise SpecError(f"profile sums to {sum(self.profile)}, expected w={self.w}")

    def parity_sizes(self) -> tuple[int, ...]:
        return tuple(self.j - ws for ws in self.profile)


@dataclass(frozen=True, eq=False)
class ParityRules:
    """Per-section GF(2) parity matrices plus precomputed bitmask form.

    ``g[i]`` is the matrix of section i+1 with shape (v_s, sum of previous
    data bits); section 1 gets an empty 0 x 0 matrix.  ``masks[i]`` holds one
    prefix bitmask per parity bit, aligned with the prefix integer whose
    most significant bit is the message's first data bit.
    """

    g: tuple[np.ndarray, ...]
    masks: tuple[tuple[int, ...], ...]


def build_rules(spec: TreeCodeSpec) -> ParityRules:
    """Draw the deterministic parity matrices for ``spec``."""
    spec.validate()
    rng = np.random.default_rng(np.random.SeedSequence(spec.parity_seed & ((1 << 64) - 1)))
    matrices = []
    masks = []
    prefix_len = 0
    for sec in range(spec.s):
        v = spec.j - spec.profile[sec]
        if sec == 0:
            mat = np.zeros((0, 0), dtype=np.uint8)
        else:
            mat = rng.integers(0, 2, size=(v, prefix_len), dtype=np.uint8)
        mat.setflags(write=False)
        matrices.append(mat)
        row_masks = []
        for t in range(mat.shape[0]):
            mask = 0
            for pos in np.nonzero(mat[t])[0]:
                mask |= 1 << (prefix_len - 1 - int(pos))
            row_masks.append(mask)
        masks.append(tuple(row_masks))
        prefix_len += spec.profile[sec]
    return ParityRules(g=tuple(matrices), masks=tuple(masks))


def _parity(prefix: int, row_masks: tuple[int, ...]) -> int:
    par = 0
    for mask in row_masks:
        par = (par << 1) | ((prefix & mask).bit_count() & 1)
    return par


def encode(message: int, rules: ParityRules, spec: TreeCodeSpec) -> np.ndarray:
    """Chunk indices (int64, length s) for one message."""
    spec.validate()
    if not 0 <= message < (1 << spec.w):
        raise SpecError(f"message must be a {spec.w}-bit integer")
    chunks = np.empty(spec.s, dtype=np.int64)
    prefix = 0
    offset = spec.w
    for sec in range(spec.s):
        ws = spec.profile[sec]
        v = spec.j - ws
        offset -= ws
        data = (message >> offset) & ((1 << ws) - 1)
        chunks[sec] = (data << v) | _parity(prefix, rules.masks[sec])
        prefix = (prefix << ws) | data
    return chunks


def decode(
    slot_lists,
    rules: ParityRules,
    spec: TreeCodeSpec,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> set[int]:
    """All messages whose encoding lies entirely inside the given lists.

    ``slot_lists`` is one iterable of candidate chunk indices per slot;
    duplicates within a slot are collapsed.  Raises TreeDecodeOverflow when
    the surviving-path count exceeds ``max_paths`` at any stage.
    """
    spec.validate()
    lists = [sorted({int(c) for c in chunk_list}) for chunk_list in slot_lists]
    if len(lists) != spec.s:
        raise SpecError(f"got {len(lists)} slot lists, expected s={spec.s}")
    for sec, chunk_list in enumerate(lists):
        if any(not 0 <= c < (1 << spec.j) for c in chunk_list):
            raise SpecError(f"slot {sec + 1} holds an out-of-range chunk index")

    # Stage one: v_1 = 0, so every listed chunk is a root and is pure data.
    survivors = list(lists[0])
    if len(survivors) > max_paths:
        raise TreeDecodeOverflow(1, len(survivors), max_paths)
    for sec in range(1, spec.s):
        if not survivors:
            return set()
        ws = spec.profile[sec]
        v = spec.j - ws
        par_mask = (1 << v) - 1
        by_parity: dict[int, list[int]] = {}
        for chunk in lists[sec]:
            by_parity.setdefault(chunk & par_mask, []).append(chunk >> v)
        row_masks = rules.masks[sec]
        extended = []
        for prefix in survivors:
            matches = by_parity.get(_parity(prefix, row_masks))
            if matches:
                for data in matches:
                    extended.append((prefix << ws) | data)
        if len(extended) > max_paths:
            raise TreeDecodeOverflow(sec + 1, len(extended), max_paths)
        survivors = extended
    return set(survivors)


def expected_false_paths(spec: TreeCodeSpec, list_sizes) -> float:
    """Heuristic count of spurious surviving paths for given list sizes.

    Under random parity, a wrong path survives each stage s >= 2 with
    probability 2**-v_s, giving (prod of list sizes) * 2**-(sum of v_s).
    """
    spec.validate()
    sizes = [int(n) for n in list_sizes]
    if len(sizes) != spec.s:
        raise SpecError(f"got {len(sizes)} list sizes, expected s={spec.s}")
    if any(n <= 0 for n in sizes):
        raise SpecError("list sizes must be positive")
    log2_estimate = float(np.log2(sizes).sum()) - sum(spec.parity_sizes()[1:])
    try:
        return float(2.0**log2_estimate)
    except OverflowError:
        return float("inf")


def messages_to_hex(messages, spec: TreeCodeSpec) -> list[str]:
    """Fixed-width hex strings (sorted) for a decoded message set."""
    width = (spec.w + 3) // 4
    return [f"{m:0{width}x}" for m in sorted(int(m) for m in messages)]


def write_message_list(path, messages, spec: TreeCodeSpec) -> None:
    """Write decoded messages as hex strings, one per line."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for line in messages_to_hex(messages, spec):
            fh.write(line + "\n")
