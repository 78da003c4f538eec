"""Pairwise channels between the three parties, PRG setup and cost counters.

Party i talks to ``next`` = i+1 and ``prev`` = i-1 (mod 3).  Every protocol
step is an ``exchange``: each party hands over what it sends to its
neighbours and blocks until the expected bytes arrived.  One exchange is
one communication round; ``bits_sent`` counts payload bytes only, framing
is not charged.

Two channel kinds exist: in-process queues (``LoopbackHub``) and TCP with
frames made of a 4-byte little-endian length followed by the payload.
"""
from __future__ import annotations

import hashlib
import os
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

N_PARTIES = 3


class ProtocolError(RuntimeError):
    """Peer failure, unexpected message length or aborted session."""


class SetupError(RuntimeError):
    """Sessions could not be established."""


def next_id(i: int) -> int:
    return (i + 1) % N_PARTIES


def prev_id(i: int) -> int:
    return (i - 1) % N_PARTIES


@dataclass
class CommStats:
    bits_sent: int = 0
    rounds: int = 0

    def __sub__(self, other: "CommStats") -> "CommStats":
        return CommStats(self.bits_sent - other.bits_sent, self.rounds - other.rounds)

    def __add__(self, other: "CommStats") -> "CommStats":
        return CommStats(self.bits_sent + other.bits_sent, self.rounds + other.rounds)


@dataclass
class SessionConfig:
    my_id: int
    endpoints: dict[int, tuple[str, int]] | None = None
    session_seed: bytes | None = None
    timeout: float = 600.0

    def __post_init__(self):
        if self.my_id not in range(N_PARTIES):
            raise SetupError(f"party id must be 0, 1 or 2, got {self.my_id}")
        if self.endpoints is not None:
            if sorted(self.endpoints) != list(range(N_PARTIES)):
                raise SetupError("hosts must list parties 0, 1 and 2")
            if len(set(self.endpoints.values())) != N_PARTIES:
                raise SetupError("endpoints must be distinct")


def parse_hosts(path: str) -> dict[int, tuple[str, int]]:
    """Read ``party_id host:port`` lines; blank lines and # comments are ignored."""
    out: dict[int, tuple[str, int]] = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            pid, addr = line.split()
            host, port = addr.rsplit(":", 1)
            if int(pid) in out:
                raise SetupError(f"party {pid} listed twice in {path}")
            out[int(pid)] = (host, int(port))
    return out


class Prg:
    """AES-128 in counter mode, consumed as a byte stream.

    Two parties holding the same key draw the same values as long as they
    request the same amounts in the same order.
    """

    def __init__(self, key: bytes):
        if len(key) != 16:
            raise ValueError("PRG keys are 16 bytes")
        self._enc = Cipher(algorithms.AES(key), modes.CTR(b"\0" * 16)).encryptor()

    def bytes(self, n: int) -> bytes:
        return self._enc.update(b"\0" * n)

    def ring(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        return np.frombuffer(self.bytes(8 * n), dtype="<u8").astype(np.uint64).reshape(shape)

    def bits(self, shape, width: int) -> np.ndarray:
        """Uniform values in [0, 2^width)."""
        v = self.ring(shape)
        if width >= 64:
            return v
        return v & np.uint64((1 << width) - 1)


def derive_test_key(seed: bytes, pair: int) -> bytes:
    """Key of the pair (pair, pair+1).  Deterministic and insecure, tests only."""
    return hashlib.sha256(b"deepmpc-prg" + seed + bytes([pair])).digest()[:16]


class _Channel:
    def send(self, data: bytes) -> None:
        raise NotImplementedError

    def recv(self, n: int) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class _QueueChannel(_Channel):
    def __init__(self, out_q: queue.Queue, in_q: queue.Queue, abort: threading.Event, timeout: float):
        self.out_q, self.in_q = out_q, in_q
        self.abort, self.timeout = abort, timeout

    def send(self, data: bytes) -> None:
        self.out_q.put(data)

    def recv(self, n: int) -> bytes:
        deadline = time.monotonic() + self.timeout
        while True:
            try:
                data = self.in_q.get(timeout=0.05)
                break
            except queue.Empty:
                if self.abort.is_set():
                    raise ProtocolError("session aborted by another party")
                if time.monotonic() > deadline:
                    raise ProtocolError("receive timed out")
        if len(data) != n:
            raise ProtocolError(f"length mismatch: expected {n} bytes, got {len(data)}")
        return data


class _SocketChannel(_Channel):
    """Framed socket; a sender thread keeps sends from blocking receives."""

    def __init__(self, sock: socket.socket, timeout: float):
        self.sock = sock
        self.sock.settimeout(timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._out: queue.Queue = queue.Queue()
        self._err: list[BaseException] = []
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()

    def _pump(self) -> None:
        while True:
            data = self._out.get()
            if data is None:
                return
            try:
                self.sock.sendall(struct.pack("<I", len(data)) + data)
            except OSError as exc:
                self._err.append(exc)
                return

    def send(self, data: bytes) -> None:
        if self._err:
            raise ProtocolError(f"peer disconnected: {self._err[0]}")
        self._out.put(data)

    def _read(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(n - len(buf))
            except OSError as exc:
                raise ProtocolError(f"peer disconnected: {exc}") from exc
            if not chunk:
                raise ProtocolError("peer disconnected")
            buf += chunk
        return bytes(buf)

    def recv(self, n: int) -> bytes:
        (length,) = struct.unpack("<I", self._read(4))
        if length != n:
            raise ProtocolError(f"length mismatch: expected {n} bytes, got {length}")
        return self._read(n)

    def close(self) -> None:
        self._out.put(None)
        self._thread.join(timeout=5)
        try:
            self.sock.close()
        except OSError:
            pass


class Session:
    """One party's view: channels to both neighbours, PRGs and counters."""

    def __init__(self, my_id: int, to_next: _Channel, to_prev: _Channel, key_next: bytes, key_prev: bytes):
        self.my_id = my_id
        self.next_id = next_id(my_id)
        self.prev_id = prev_id(my_id)
        self._next = to_next
        self._prev = to_prev
        # key_next is shared with P_{i+1}, key_prev with P_{i-1}
        self.prg_next = Prg(key_next)
        self.prg_prev = Prg(key_prev)
        self._lock = threading.Lock()
        self._stats = CommStats()
        self.sent_to: dict[int, int] = {self.next_id: 0, self.prev_id: 0}

    def exchange_both(
        self,
        to_next: bytes = b"",
        expect_from_prev: int = 0,
        to_prev: bytes = b"",
        expect_from_next: int = 0,
    ) -> tuple[bytes, bytes]:
        """One round: send to both neighbours, then receive from both."""
        if to_next:
            self._next.send(to_next)
        if to_prev:
            self._prev.send(to_prev)
        with self._lock:
            self._stats.bits_sent += 8 * (len(to_next) + len(to_prev))
            self._stats.rounds += 1
            self.sent_to[self.next_id] += len(to_next)
            self.sent_to[self.prev_id] += len(to_prev)
        got_prev = self._prev.recv(expect_from_prev) if expect_from_prev else b""
        got_next = self._next.recv(expect_from_next) if expect_from_next else b""
        return got_prev, got_next

    def exchange(self, to_next: bytes, expect_from_prev: int) -> bytes:
        return self.exchange_both(to_next, expect_from_prev)[0]

    def comm_snapshot(self) -> CommStats:
        with self._lock:
            return CommStats(self._stats.bits_sent, self._stats.rounds)

    def close(self) -> None:
        self._next.close()
        self._prev.close()


def comm_snapshot(session: Session) -> CommStats:
    return session.comm_snapshot()


def exchange(session: Session, to_next: bytes, expect_from_prev: int) -> bytes:
    return session.exchange(to_next, expect_from_prev)


class LoopbackHub:
    """In-process wiring of three sessions through queues."""

    def __init__(self, session_seed: bytes = b"\0" * 32, timeout: float = 600.0):
        self.seed = session_seed
        self.timeout = timeout
        self.abort = threading.Event()
        self._queues = {(a, b): queue.Queue() for a in range(N_PARTIES) for b in range(N_PARTIES) if a != b}
        self._taken: set[int] = set()

    def session(self, my_id: int) -> Session:
        if my_id in self._taken:
            raise SetupError(f"party {my_id} already attached")
        self._taken.add(my_id)
        n, p = next_id(my_id), prev_id(my_id)
        ch_next = _QueueChannel(self._queues[(my_id, n)], self._queues[(n, my_id)], self.abort, self.timeout)
        ch_prev = _QueueChannel(self._queues[(my_id, p)], self._queues[(p, my_id)], self.abort, self.timeout)
        return Session(my_id, ch_next, ch_prev, derive_test_key(self.seed, my_id), derive_test_key(self.seed, p))


def setup_session(cfg: SessionConfig) -> Session:
    """Connect to both peers over TCP.

    Higher ids dial lower ids; every connection opens with the dialer's id.
    Without ``session_seed`` each party sends a fresh key to its next
    neighbour in the clear (semi-honest setting, no key agreement).
    """
    if cfg.endpoints is None:
        raise SetupError("TCP sessions need endpoints")
    me = cfg.my_id
    host, port = cfg.endpoints[me]
    peers: dict[int, socket.socket] = {}
    lsock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    lsock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        lsock.bind((host, port))
    except OSError as exc:
        raise SetupError(f"cannot listen on {host}:{port}: {exc}") from exc
    lsock.listen(N_PARTIES)
    deadline = time.monotonic() + cfg.timeout
    for j in range(me):
        peers[j] = _dial(cfg.endpoints[j], deadline)
        peers[j].sendall(struct.pack("<I", me))
    lsock.settimeout(max(1.0, deadline - time.monotonic()))
    while len(peers) < N_PARTIES - 1:
        try:
            conn, _ = lsock.accept()
        except OSError as exc:
            raise SetupError(f"party {me}: waiting for peers timed out") from exc
        (pid,) = struct.unpack("<I", _recv_exact(conn, 4))
        if pid == me or pid in peers or pid not in range(N_PARTIES):
            conn.close()
            raise SetupError(f"party id collision: peer announced {pid}")
        peers[pid] = conn
    lsock.close()
    n, p = next_id(me), prev_id(me)
    if cfg.session_seed is not None:
        k_next, k_prev = derive_test_key(cfg.session_seed, me), derive_test_key(cfg.session_seed, p)
    else:
        k_next = os.urandom(16)
        peers[n].sendall(k_next)
        k_prev = _recv_exact(peers[p], 16)
    return Session(me, _SocketChannel(peers[n], cfg.timeout), _SocketChannel(peers[p], cfg.timeout), k_next, k_prev)


def _dial(addr: tuple[str, int], deadline: float) -> socket.socket:
    while True:
        try:
            return socket.create_connection(addr, timeout=5)
        except OSError:
            if time.monotonic() > deadline:
                raise SetupError(f"connect to {addr[0]}:{addr[1]} timed out")
            time.sleep(0.05)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise SetupError("peer closed during setup")
        buf += chunk
    return bytes(buf)


def run_parties(fn, *args, session_seed: bytes = b"\0" * 32, sessions: list[Session] | None = None, **kwargs) -> list:
    """Run ``fn(session, *args, **kwargs)`` for all three parties in threads.

    Returns the three results ordered by party id.  If any party raises,
    the others are aborted and the first error is re-raised.
    """
    hub = None
    if sessions is None:
        hub = LoopbackHub(session_seed)
        sessions = [hub.session(i) for i in range(N_PARTIES)]
    results: list = [None] * N_PARTIES
    errors: list[tuple[int, BaseException]] = []

    def target(i: int) -> None:
        try:
            results[i] = fn(sessions[i], *args, **kwargs)
        except BaseException as exc:
            errors.append((i, exc))
            if hub is not None:
                hub.abort.set()

    threads = [threading.Thread(target=target, args=(i,), daemon=True) for i in range(N_PARTIES)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        real = [e for e in errors if not isinstance(e[1], ProtocolError) or "aborted" not in str(e[1])]
        raise (real or errors)[0][1]
    return results
