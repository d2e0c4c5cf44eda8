"""Online feed server streaming deterministically augmented samples.

One acceptor thread hands connections to per-connection handler threads;
sample production runs on a shared bounded worker pool over an immutable
:class:`Engine`. A small cache of encoded samples plus speculative
prefetch of the next few indices keeps sequential readers fed. The sample
for (base_seed, epoch, sample_index) is a pure function of those values,
so any worker and any connection produce identical bytes.
"""

from __future__ import annotations

import logging
import os
import socket
import threading
import time
from collections import OrderedDict
from concurrent.futures import Future, ThreadPoolExecutor

from .errors import ProtocolError
from .io import DatasetIndex
from .offline import sample_stream
from .pipeline import Engine, PipelineConfig
from .protocol import (
    VERSION,
    ErrorCode,
    Frame,
    Op,
    encode_frame,
    pack_error,
    pack_sample,
    pack_welcome,
    read_frame,
    unpack_next,
    unpack_seed,
)

log = logging.getLogger("tumorcp.server")


def _recv_exact(conn: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        chunk = conn.recv(min(remaining, 1 << 20))
        if not chunk:
            raise ConnectionError("peer closed the connection")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class _SampleCache:
    """Bounded map from sample key to the Future of its encoded bytes."""

    def __init__(self, capacity: int):
        self.capacity = max(capacity, 1)
        self._lock = threading.Lock()
        self._items: OrderedDict[tuple, Future] = OrderedDict()

    def get_or_claim(self, key) -> tuple[Future, bool]:
        """Return (future, claimed): claimed is True when the caller must
        produce the value and resolve the future."""
        with self._lock:
            fut = self._items.get(key)
            if fut is not None:
                self._items.move_to_end(key)
                return fut, False
            fut = Future()
            self._items[key] = fut
            while len(self._items) > self.capacity:
                self._items.popitem(last=False)
            return fut, True


class FeedServer:
    """TCP (or unix-socket) server answering the feed protocol."""

    def __init__(
        self,
        index: DatasetIndex,
        config: PipelineConfig,
        base_seed: int,
        bind: str = "127.0.0.1:0",
        workers: int = 4,
        prefetch: int = 4,
    ):
        self.engine = Engine(index, config)
        self.base_seed = int(base_seed)
        self.bind_spec = bind
        self.workers = max(1, workers)
        self.prefetch = max(0, prefetch)
        self._pool = ThreadPoolExecutor(max_workers=self.workers)
        self._cache = _SampleCache(capacity=max(32, 4 * (self.prefetch + 1)))
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._conn_threads: list[threading.Thread] = []
        self._stopping = threading.Event()
        self._served = 0
        self._served_lock = threading.Lock()
        self._t0 = time.monotonic()
        self.endpoint: str | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> str:
        """Bind and start accepting; returns the concrete endpoint."""
        if "/" in self.bind_spec or os.sep in self.bind_spec:
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            if os.path.exists(self.bind_spec):
                os.unlink(self.bind_spec)
            sock.bind(self.bind_spec)
            self.endpoint = self.bind_spec
        else:
            host, _, port = self.bind_spec.rpartition(":")
            host = host or "127.0.0.1"
            sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            sock.bind((host, int(port or 0)))
            self.endpoint = "{}:{}".format(*sock.getsockname())
        sock.listen(64)
        self._listener = sock
        self._t0 = time.monotonic()
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        log.info("feed server listening on %s", self.endpoint)
        return self.endpoint

    def stop(self) -> None:
        self._stopping.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
            if self._listener.family == socket.AF_UNIX and os.path.exists(self.bind_spec):
                os.unlink(self.bind_spec)
        for t in list(self._conn_threads):
            t.join(timeout=5)
        self._pool.shutdown(wait=False, cancel_futures=True)
        elapsed = max(time.monotonic() - self._t0, 1e-9)
        log.info(
            "served %d samples in %.1fs (%.2f samples/sec)",
            self._served,
            elapsed,
            self._served / elapsed,
        )

    @property
    def samples_served(self) -> int:
        return self._served

    def throughput(self) -> float:
        """Samples per second since start."""
        return self._served / max(time.monotonic() - self._t0, 1e-9)

    # -- production --------------------------------------------------------

    def _produce(self, seed: int, epoch: int, sample_index: int, hint: str | None) -> bytes:
        if hint is not None:
            case_id = hint  # raises KeyError upstream if unknown
            ordinal = self.engine.index.ordinal(case_id)
        else:
            ordinal = sample_index % len(self.engine.index)
            case_id = self.engine.index.entries[ordinal].case_id
        rng = sample_stream(seed, ordinal, epoch, sample_index)
        volume, labelmap, record = self.engine.augment_once(case_id, rng)
        return encode_frame(
            Frame(
                Op.SAMPLE,
                pack_sample(
                    case_id,
                    volume.dims,
                    volume.spacing.as_tuple(),
                    volume.data,
                    labelmap.data,
                    record.to_dict(),
                ),
            )
        )

    def _sample_bytes(self, seed: int, epoch: int, sample_index: int, hint: str | None) -> bytes:
        """Get-or-produce; blocks until the sample is ready. All production
        runs on the bounded pool, so capacity stays at ``workers`` no
        matter how many connections are waiting."""
        key = (seed, epoch, sample_index, hint)
        fut, claimed = self._cache.get_or_claim(key)
        if claimed:

            def run():
                try:
                    fut.set_result(self._produce(seed, epoch, sample_index, hint))
                except BaseException as exc:  # resolve all waiters
                    fut.set_exception(exc)

            self._pool.submit(run)
        return fut.result()

    def _speculate(self, seed: int, epoch: int, sample_index: int) -> None:
        for ahead in range(1, self.prefetch + 1):
            nxt = sample_index + ahead
            key = (seed, epoch, nxt, None)
            fut, claimed = self._cache.get_or_claim(key)
            if claimed:
                def run(f=fut, i=nxt):
                    try:
                        f.set_result(self._produce(seed, epoch, i, None))
                    except BaseException as exc:
                        f.set_exception(exc)

                self._pool.submit(run)

    # -- connection handling -------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._stopping.is_set():
            try:
                conn, _addr = self._listener.accept()
            except OSError:
                break
            t = threading.Thread(target=self._serve_conn, args=(conn,), daemon=True)
            self._conn_threads.append(t)
            t.start()

    def _serve_conn(self, conn: socket.socket) -> None:
        session_seed = self.base_seed
        handshook = False

        def send(frame: Frame) -> None:
            conn.sendall(encode_frame(frame))

        def fail(code: ErrorCode, message: str) -> None:
            log.warning("protocol error on %s: %s", conn, message)
            try:
                send(Frame(Op.ERROR, pack_error(code, message)))
            except OSError:
                pass

        try:
            while True:
                try:
                    frame = read_frame(lambda n: _recv_exact(conn, n))
                except ProtocolError as exc:
                    fail(ErrorCode.MALFORMED, str(exc))
                    return
                except ConnectionError:
                    return

                if frame.version != VERSION:
                    fail(ErrorCode.MALFORMED, f"unsupported protocol version {frame.version}")
                    return
                if frame.op == Op.HELLO:
                    handshook = True
                    send(Frame(Op.WELCOME, pack_welcome(len(self.engine.index))))
                elif frame.op == Op.NEXT:
                    if not handshook:
                        fail(ErrorCode.HANDSHAKE_REQUIRED, "NEXT before HELLO")
                        return
                    try:
                        req = unpack_next(frame.payload)
                    except ProtocolError as exc:
                        fail(ErrorCode.MALFORMED, str(exc))
                        return
                    try:
                        payload = self._sample_bytes(
                            session_seed, req.epoch, req.sample_index, req.case_hint
                        )
                    except KeyError:
                        fail(ErrorCode.BAD_REQUEST, f"unknown case hint {req.case_hint!r}")
                        return
                    except Exception as exc:
                        log.exception("sample production failed")
                        fail(ErrorCode.INTERNAL, f"sample production failed: {exc}")
                        return
                    conn.sendall(payload)
                    with self._served_lock:
                        self._served += 1
                        served = self._served
                    if served % 200 == 0:
                        log.info(
                            "served %d samples (%.2f samples/sec)", served, self.throughput()
                        )
                    if req.case_hint is None and self.prefetch > 0:
                        self._speculate(session_seed, req.epoch, req.sample_index)
                elif frame.op == Op.SEED:
                    try:
                        session_seed = unpack_seed(frame.payload)
                    except ProtocolError as exc:
                        fail(ErrorCode.MALFORMED, str(exc))
                        return
                    send(Frame(Op.OK))
                elif frame.op == Op.BYE:
                    send(Frame(Op.OK))
                    return
                else:
                    fail(ErrorCode.MALFORMED, f"unknown op {frame.op}")
                    return
        except OSError:
            pass
        finally:
            try:
                conn.close()
            except OSError:
                pass
