"""Latency benchmark harness.

Measures the array-sum and recursive-Fibonacci workloads in three
configurations:

* ``direct``      — in-process call of the same extracted bytes, no
                    channel and no crypto (the unprotected baseline);
* ``channel``     — request over an already-established secure session;
* ``channel+ra``  — a fresh connection per sample, so the measured span
                    includes the full attestation handshake.

Latency spans request send to response receive and therefore includes
encryption both ways. Medians over a configured number of runs (default
30) go to CSV; array data for the sum workload is generated in-process by
the provisioned function itself, so the channel carries only the size
parameter, not the data.

Sampling is sequential on purpose: no concurrent requests during timing.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass, field

from .addrmap import AddressMap, AddressMapEntry
from .arena import ExecArena
from .corpus import CorpusEntry
from .enclave import _PROTO_RET, default_runtime_table
from .pipeline import build_payload

MODE_DIRECT = "direct"
MODE_CHANNEL = "channel"
MODE_CHANNEL_RA = "channel+ra"
ALL_MODES = (MODE_DIRECT, MODE_CHANNEL, MODE_CHANNEL_RA)

DEFAULT_RUNS = 30
DEFAULT_SUM_SIZES_MIB = (2, 4, 8, 16, 32, 64, 128, 256)
DEFAULT_FIB_NS = (1, 5, 10, 15, 20, 25, 30, 35, 40, 45)
FIB_DESK_SCALE_CAP = 35

WORKLOAD_SUM_ARRAY = "sum_array"
WORKLOAD_FIB = "recursive_fibonacci"

CSV_COLUMNS = (
    "workload",
    "parameter",
    "mode",
    "runs",
    "median_ns",
    "min_ns",
    "max_ns",
    "overhead_vs_direct",
)


def expected_fib(n: int) -> int:
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def expected_sum_array(mib: int) -> int:
    # matches the corpus generator: element i holds (i & 0xff)
    n = mib * 1024 * 1024 // 4
    full, rem = divmod(n, 256)
    return full * (255 * 256 // 2) + rem * (rem - 1) // 2


@dataclass
class BenchPoint:
    workload: str
    parameter: int
    mode: str
    samples: list[int] = field(default_factory=list)
    error: str | None = None

    @property
    def median_ns(self) -> float | None:
        return statistics.median(self.samples) if self.samples else None

    @property
    def min_ns(self) -> int | None:
        return min(self.samples) if self.samples else None

    @property
    def max_ns(self) -> int | None:
        return max(self.samples) if self.samples else None


class _DirectRunner:
    """Calls extracted bytes placed in a private executable region."""

    def __init__(self):
        self._arena = ExecArena(1024 * 1024)

    def load(self, code: bytes):
        entry = self._arena.place(code)
        return _PROTO_RET(entry)

    def close(self):
        self._arena.close()


def local_address_map() -> AddressMap:
    """Map of this process's runtime helpers, for direct-mode rebuilds."""
    return AddressMap(
        [AddressMapEntry(e.name, e.return_type, e.address) for e in default_runtime_table()]
    )


class Harness:
    """Drives one benchmark sweep.

    ``connect`` is a zero-argument callable returning a fresh, attested
    ``ClientSession``; it is only required for the remote modes.
    """

    def __init__(self, corpus: dict[str, CorpusEntry], connect=None, cc: str = "cc"):
        self.corpus = corpus
        self.connect = connect
        self.cc = cc
        self._direct = _DirectRunner()
        self._load_counter = 0
        self._sessions = []

    # -- payload acquisition ----------------------------------------------

    def _payload_bytes(self, entry: CorpusEntry, address_map: AddressMap | None) -> bytes:
        if entry.self_contained:
            return entry.read_fixture_bytes()
        if address_map is None:
            raise ValueError(f"{entry.name} needs an address map to rebuild against")
        return build_payload(entry.read_source(), entry.name, address_map, cc=self.cc).bytes

    # -- sweeps ------------------------------------------------------------

    def bench_fibonacci(self, ns, runs=DEFAULT_RUNS, modes=(MODE_DIRECT, MODE_CHANNEL)):
        return self._sweep(WORKLOAD_FIB, list(ns), runs, modes, expected_fib)

    def bench_sum_array(self, sizes_mib, runs=DEFAULT_RUNS, modes=(MODE_DIRECT, MODE_CHANNEL)):
        return self._sweep(WORKLOAD_SUM_ARRAY, list(sizes_mib), runs, modes, expected_sum_array)

    def _sweep(self, workload, params, runs, modes, expected):
        entry = self.corpus[workload]
        points = []
        for mode in modes:
            if mode not in ALL_MODES:
                raise ValueError(f"unknown mode {mode!r}")
            for param in params:
                point = BenchPoint(workload=workload, parameter=param, mode=mode)
                try:
                    sampler = self._sampler(entry, mode, param, expected(param))
                    point.samples = [sampler() for _ in range(runs)]
                except Exception as exc:  # mark failed, keep sweeping
                    point.error = f"{type(exc).__name__}: {exc}"
                    point.samples = []
                points.append(point)
        return points

    def _sampler(self, entry: CorpusEntry, mode: str, param: int, expected: int):
        if mode == MODE_DIRECT:
            code = self._payload_bytes(entry, local_address_map())
            fn = self._direct.load(code)
            self._gate(fn(param, 0, 0, 0), expected, entry.name, param)

            def sample():
                start = time.perf_counter_ns()
                fn(param, 0, 0, 0)
                return time.perf_counter_ns() - start

            return sample

        if self.connect is None:
            raise ValueError(f"mode {mode!r} needs a server connection")
        session = self.connect()
        self._sessions.append(session)
        code = self._payload_bytes(entry, session.address_map)
        fn_id = self._load_once(session, entry, code)
        ret, _ = session.execute(fn_id, [param])
        self._gate(ret, expected, entry.name, param)

        if mode == MODE_CHANNEL:
            def sample():
                start = time.perf_counter_ns()
                session.execute(fn_id, [param])
                return time.perf_counter_ns() - start

            return sample

        # channel+ra: each sample pays connect + attestation + request
        connect = self.connect

        def sample():
            start = time.perf_counter_ns()
            fresh = connect()
            fresh.execute(fn_id, [param])
            elapsed = time.perf_counter_ns() - start
            fresh.close()
            return elapsed

        return sample

    def _load_once(self, session, entry: CorpusEntry, code: bytes) -> int:
        # names are unique server-side and the registry is shared between
        # sessions, so each point loads under a fresh alias
        self._load_counter += 1
        alias = f"{entry.name}_b{self._load_counter}"
        return session.load(alias, entry.descriptor, code)

    @staticmethod
    def _gate(actual, expected, name, param):
        if actual != expected:
            raise AssertionError(
                f"correctness gate failed: {name}({param}) = {actual}, expected {expected}"
            )

    def close(self):
        for session in self._sessions:
            try:
                session.close()
            except Exception:
                pass
        self._direct.close()


def summarize(points: list[BenchPoint]) -> str:
    """CSV report: one row per point, stable column order."""
    direct_medians = {
        (p.workload, p.parameter): p.median_ns
        for p in points
        if p.mode == MODE_DIRECT and p.median_ns
    }
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(CSV_COLUMNS)
    for p in points:
        base = direct_medians.get((p.workload, p.parameter))
        overhead = ""
        if p.mode != MODE_DIRECT and base and p.median_ns:
            overhead = f"{p.median_ns / base:.3f}"
        writer.writerow(
            [
                p.workload,
                p.parameter,
                p.mode,
                len(p.samples),
                "" if p.median_ns is None else f"{p.median_ns:.0f}",
                "" if p.min_ns is None else p.min_ns,
                "" if p.max_ns is None else p.max_ns,
                overhead,
            ]
        )
    return out.getvalue()
