"""Single-file parameter checkpoints.

Layout::

    recbench-checkpoint 1
    <count>
    <name> <offset> <length>      one manifest line per block
    <blocks>

Each block is ``name\\n`` + space-separated shape + ``\\n`` + raw little-endian
float64 values. Offsets are absolute byte positions of the block start. Manifest
numbers are zero-padded to a fixed width so the header size is known before the
offsets are.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError

MAGIC = b"recbench-checkpoint 1\n"
_WIDTH = 16


def _block(name: str, arr: np.ndarray) -> bytes:
    if any(c.isspace() for c in name) or not name:
        raise ValueError(f"parameter name {name!r} must be non-empty without whitespace")
    shape = " ".join(str(s) for s in arr.shape)
    return (name + "\n" + shape + "\n").encode() + np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_checkpoint(path, state: dict[str, np.ndarray]) -> None:
    blocks = [(name, _block(name, np.asarray(v))) for name, v in state.items()]
    header_len = len(MAGIC) + _WIDTH + 1 + sum(len(n) + 2 * (_WIDTH + 1) + 1 for n, _ in blocks)
    lines, offset = [], header_len
    for name, data in blocks:
        lines.append(f"{name} {offset:0{_WIDTH}d} {len(data):0{_WIDTH}d}\n")
        offset += len(data)
    header = MAGIC + f"{len(blocks):0{_WIDTH}d}\n".encode() + "".join(lines).encode()
    assert len(header) == header_len
    Path(path).write_bytes(header + b"".join(d for _, d in blocks))


def read_manifest(path) -> list[tuple[str, int, int]]:
    """``(name, offset, length)`` for every block, in file order."""
    with open(path, "rb") as fh:
        if fh.readline() != MAGIC:
            raise ParseError(path, 1, "not a recbench checkpoint")
        try:
            count = int(fh.readline())
        except ValueError:
            raise ParseError(path, 2, "bad block count") from None
        out = []
        for k in range(count):
            parts = fh.readline().decode().split()
            if len(parts) != 3:
                raise ParseError(path, 3 + k, "manifest line needs name, offset and length")
            out.append((parts[0], int(parts[1]), int(parts[2])))
    return out


def load_checkpoint(path) -> dict[str, np.ndarray]:
    raw = Path(path).read_bytes()
    state = {}
    for k, (name, offset, length) in enumerate(read_manifest(path)):
        block = raw[offset:offset + length]
        head_end = block.find(b"\n")
        shape_end = block.find(b"\n", head_end + 1)
        if head_end < 0 or shape_end < 0 or block[:head_end].decode() != name:
            raise ParseError(path, 3 + k, f"block for {name!r} does not start at offset {offset}")
        shape = tuple(int(s) for s in block[head_end + 1:shape_end].split())
        values = np.frombuffer(block[shape_end + 1:], dtype="<f8")
        if values.size != int(np.prod(shape)):
            raise ParseError(path, 3 + k, f"block {name!r} holds {values.size} values for shape {shape}")
        state[name] = values.reshape(shape).astype(np.float64)
    return state
