"""Executable memory arena and argument scratch region.

The arena is an anonymous private mapping marked writable and executable,
allocated once at enclave creation. Code bytes are placed at 16-byte
aligned offsets by a bump allocator; a freed range is reclaimed only when
it is the most recent allocation, otherwise it is left as a zeroed hole
(compaction would relocate code and invalidate addresses already handed
out in address maps).
"""

from __future__ import annotations

import ctypes
import mmap

from .errors import AllocationFailure, OutOfEnclaveMemory, PlatformUnsupported

ALIGNMENT = 16


def _align_up(n: int, align: int = ALIGNMENT) -> int:
    return (n + align - 1) & ~(align - 1)


class _Region:
    """An anonymous private mapping with a stable base address."""

    def __init__(self, capacity: int, executable: bool):
        if capacity <= 0:
            raise AllocationFailure(f"capacity must be positive, got {capacity}")
        prot = mmap.PROT_READ | mmap.PROT_WRITE
        if executable:
            if not hasattr(mmap, "PROT_EXEC"):
                raise PlatformUnsupported("platform cannot mark memory executable")
            prot |= mmap.PROT_EXEC
        try:
            self._mem = mmap.mmap(
                -1, capacity, flags=mmap.MAP_PRIVATE | mmap.MAP_ANONYMOUS, prot=prot
            )
        except (ValueError, OSError) as exc:
            if executable and isinstance(exc, OSError):
                raise PlatformUnsupported(
                    f"cannot create executable region: {exc}"
                ) from exc
            raise AllocationFailure(str(exc)) from exc
        self.capacity = capacity
        self._view = memoryview(self._mem)
        self.base = ctypes.addressof(ctypes.c_char.from_buffer(self._mem))

    def write(self, offset: int, data: bytes) -> None:
        self._view[offset : offset + len(data)] = data

    def read(self, offset: int, size: int) -> bytes:
        return bytes(self._view[offset : offset + size])

    def zero(self, offset: int, size: int) -> None:
        self._view[offset : offset + size] = b"\x00" * size

    def close(self) -> None:
        self._view.release()
        self._mem.close()


class ExecArena:
    """Capacity-bounded bump allocator over an executable region."""

    def __init__(self, capacity: int):
        self._region = _Region(capacity, executable=True)
        self.cursor = 0

    @property
    def base(self) -> int:
        return self._region.base

    @property
    def capacity(self) -> int:
        return self._region.capacity

    def place(self, data: bytes) -> int:
        """Copy ``data`` at the aligned cursor; return its absolute address."""
        offset = _align_up(self.cursor)
        if offset + len(data) > self.capacity:
            raise OutOfEnclaveMemory(
                f"{len(data)} bytes do not fit: cursor={self.cursor}, "
                f"capacity={self.capacity}"
            )
        self._region.write(offset, data)
        self.cursor = offset + len(data)
        return self.base + offset

    def release(self, address: int, size: int) -> None:
        """Zero a placed range; trim the cursor if it was the last allocation."""
        offset = address - self.base
        self._region.zero(offset, size)
        if offset + size == self.cursor:
            self.cursor = offset

    def reset(self) -> None:
        self._region.zero(0, self.cursor)
        self.cursor = 0

    def read(self, address: int, size: int) -> bytes:
        return self._region.read(address - self.base, size)

    def close(self) -> None:
        self._region.close()


class Scratch:
    """Plain read-write region used to stage string/buffer arguments.

    Arguments live only for the duration of one call; every call starts
    staging from offset zero.
    """

    def __init__(self, capacity: int):
        self._region = _Region(capacity, executable=False)
        self._cursor = 0

    @property
    def capacity(self) -> int:
        return self._region.capacity

    def begin_call(self) -> None:
        self._cursor = 0

    def stage(self, data: bytes) -> int:
        """Copy ``data`` into the scratch region; return its absolute address."""
        end = _align_up(self._cursor + len(data), 8)
        if end > self.capacity:
            from .errors import ScratchOverflow

            raise ScratchOverflow(
                f"{len(data)} bytes exceed scratch capacity {self.capacity}"
            )
        self._region.write(self._cursor, data)
        address = self._region.base + self._cursor
        self._cursor = end
        return address

    def close(self) -> None:
        self._region.close()
