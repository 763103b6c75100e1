"""Polar-code 1-out-of-2 oblivious transfer over the BI-AWGN channel.

Conventions used throughout:

* ``A`` is the index permutation induced by the selection's sigma and
  ``T2 = A*T1``.  Bob works in a view ``v`` (transform ``T_v``) and publishes
  ``F = P1^T T_v`` with ``P1 = A^K``.  Because ``P1`` is an automorphism of
  ``T_v``, ``y*P1`` is a noisy ``u*T_v``, so the announced sets are plain
  u-coordinates for both parties.
* Under ``T2`` index ``i`` behaves like index ``pi^-1(i)`` of ``T1``.  The
  decodable set is therefore the good selection in view 0 and its image
  ``pi(G)`` in view 1, which needs ``pi`` to map the bad selection back onto
  the good one.
* The view is ``B xor S_sw``.  The decodable set is always announced in
  position ``B``; relative to the fixed pair (good, bad) the announced order
  is therefore ``S_sw``, a fresh coin.
* The simulated AWGN channel runs on Alice's side of the link, so the
  ``channel_frame`` carries the noisy outputs and never the codeword.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .autgroup import IndexPermutation, perm_orbit
from .channel import ChannelParams, add_noise, llr_map, modulate, substream
from .construct import default_gamma, mi_profile
from .optimize import OtSelection, involutive_on
from .polar_core import BitMatrix, apply_index_perm, build_transform, gf2_encode
from .privacy import HashSeed, toeplitz_hash
from .scdec import FrozenSpec, sc_decode
from .wire import (
    VERSION,
    ProtocolError,
    b64_to_bits,
    b64_to_matrix,
    bits_to_b64,
    decode_frame,
    dumps,
    encode_frame,
)


class SelectionError(ValueError):
    """Selection cannot drive the protocol (wrong size or pairing)."""


@dataclass(frozen=True)
class SessionConfig:
    m: int
    snr: float
    selection: OtSelection
    ell: int
    hash_len: int | None = None  # entries per announced set; None means all k pairs
    gamma: float | None = None
    eps_s: float = 1e-6
    eps_p: float = 1e-6
    eps_sw: float = 1e-6

    def __post_init__(self):
        if self.selection.n != 1 << self.m:
            raise SelectionError("selection size does not match m")
        if not self.snr > 0:
            raise ValueError("snr must be positive")
        if not 0 <= self.set_size <= self.selection.k:
            raise SelectionError("hash_len must lie in [0, k]")
        if not 0 <= self.ell <= self.set_size:
            raise SelectionError("ell must not exceed the hash-input length")

    @property
    def n(self) -> int:
        return 1 << self.m

    @property
    def set_size(self) -> int:
        return self.selection.k if self.hash_len is None else self.hash_len

    @property
    def gamma_n(self) -> float:
        return default_gamma(self.n) if self.gamma is None else self.gamma

    @cached_property
    def profile_I(self) -> np.ndarray:
        return mi_profile(self.m, self.snr).I

    @cached_property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        """(good, bad) pairs kept after truncation: highest MI first, ties to smaller index."""
        I = self.profile_I
        sel = self.selection
        ranked = sorted(zip(sel.good_sel, sel.bad_sel), key=lambda p: (-I[p[0]], p[0]))
        return tuple(ranked[: self.set_size])

    @property
    def good_set(self) -> tuple[int, ...]:
        return tuple(sorted(g for g, _ in self.pairs))

    @property
    def bad_set(self) -> tuple[int, ...]:
        return tuple(sorted(b for _, b in self.pairs))

    @cached_property
    def T1(self) -> BitMatrix:
        return build_transform(self.m).matrix

    @property
    def A(self) -> IndexPermutation:
        return self.selection.pi

    def transform(self, view: int) -> BitMatrix:
        """T1 for view 0, A*T1 for view 1."""
        if view == 0:
            return self.T1
        # (A T)[r, :] = T[pi^-1(r), :]
        return self.T1.permute_rows(self.A.inverse().pi)

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "m": self.m,
            "snr": float(self.snr),
            "ell": self.ell,
            "hash_len": self.hash_len,
            "gamma": self.gamma,
            "eps_s": self.eps_s,
            "eps_p": self.eps_p,
            "eps_sw": self.eps_sw,
            "selection": self.selection.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SessionConfig":
        if "snr" in obj:
            snr = float(obj["snr"])
        else:
            snr = ChannelParams.from_db(float(obj["snr_db"])).snr
        return cls(
            m=int(obj["m"]),
            snr=snr,
            selection=OtSelection.from_json(obj["selection"]),
            ell=int(obj["ell"]),
            hash_len=None if obj.get("hash_len") is None else int(obj["hash_len"]),
            gamma=None if obj.get("gamma") is None else float(obj["gamma"]),
            eps_s=float(obj.get("eps_s", 1e-6)),
            eps_p=float(obj.get("eps_p", 1e-6)),
            eps_sw=float(obj.get("eps_sw", 1e-6)),
        )

    def digest(self) -> str:
        return hashlib.sha256(dumps(self.to_json()).encode()).hexdigest()


def require_protocol_ready(config: SessionConfig) -> None:
    if not involutive_on(config.selection):
        raise SelectionError("selection incompatible with Aut structure: "
                             "pi does not map the bad selection back onto the good one")


def decodable_sets(config: SessionConfig, view: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """(set Bob can decode, set he cannot) in u-coordinates for a view.

    Computed from the alignment algebra, so a selection without the swap
    property yields a view-1 pair that is not a swap of the view-0 pair.
    """
    good, bad = config.good_set, config.bad_set
    if view == 0:
        return good, bad
    pi = config.A
    return tuple(sorted(pi(i) for i in good)), tuple(sorted(pi(i) for i in bad))


@dataclass(frozen=True)
class PublicTuple:
    F: BitMatrix
    J0: tuple[int, ...]
    J1: tuple[int, ...]

    def swapped(self) -> "PublicTuple":
        return PublicTuple(self.F, self.J1, self.J0)


def public_tuple(config: SessionConfig, view: int, p: IndexPermutation) -> PublicTuple:
    """(F, decodable, other) for a view and a P1 = p, before any reordering."""
    F = config.transform(view).permute_rows(p.pi)
    dec, other = decodable_sets(config, view)
    return PublicTuple(F, dec, other)


@dataclass
class BobState:
    choice: int
    view: int
    s_sw: int
    K: int
    N: int
    P1: IndexPermutation
    A: IndexPermutation
    F: BitMatrix
    J0: tuple[int, ...]
    J1: tuple[int, ...]

    @property
    def decodable(self) -> tuple[int, ...]:
        return self.J0 if self.choice == 0 else self.J1

    @property
    def hidden(self) -> tuple[int, ...]:
        return self.J1 if self.choice == 0 else self.J0


def bob_setup(config: SessionConfig, choice: int, rng: np.random.Generator, *,
              K: int | None = None, s_sw: int | None = None) -> BobState:
    """Steps 1-2: pick the view and the orbit element, build F and the index sets."""
    if choice not in (0, 1):
        raise ValueError("choice bit must be 0 or 1")
    require_protocol_ready(config)
    A = config.A
    N = A.order
    if s_sw is None:
        s_sw = int(rng.integers(0, 2))
    if K is None:
        K = int(rng.integers(0, N))
    view = choice ^ s_sw
    P1 = A.power(K)
    pub = public_tuple(config, view, P1)
    J = (pub.J0, pub.J1) if choice == 0 else (pub.J1, pub.J0)
    return BobState(choice, view, s_sw, K, N, P1, A, pub.F, J[0], J[1])


@dataclass
class AliceState:
    m0: np.ndarray
    m1: np.ndarray
    u: np.ndarray
    J0: tuple[int, ...]
    J1: tuple[int, ...]
    keys: tuple[np.ndarray, np.ndarray] | None = None
    ciphertexts: tuple[np.ndarray, np.ndarray] | None = None


def _check_sets(n: int, J0, J1):
    if len(J0) != len(J1):
        raise ProtocolError("index sets differ in size")
    if set(J0) & set(J1):
        raise ProtocolError("index sets overlap")
    if any(not 0 <= i < n for i in tuple(J0) + tuple(J1)):
        raise ProtocolError("index out of range")


def alice_encode(F: BitMatrix, J0, J1, rng: np.random.Generator, ell: int,
                 messages: tuple[Sequence[int], Sequence[int]] | None = None):
    """Step 3: uniform bits on J0 and J1, zeros elsewhere, x = u*F."""
    n = F.rows
    J0, J1 = tuple(sorted(int(i) for i in J0)), tuple(sorted(int(i) for i in J1))
    _check_sets(n, J0, J1)
    if messages is None:
        m0 = rng.integers(0, 2, size=ell, dtype=np.uint8)
        m1 = rng.integers(0, 2, size=ell, dtype=np.uint8)
    else:
        m0, m1 = (np.asarray(v, dtype=np.uint8) for v in messages)
        if m0.shape != (ell,) or m1.shape != (ell,):
            raise ValueError(f"messages must be {ell}-bit vectors")
    union = sorted(J0 + J1)
    u = np.zeros(n, dtype=np.uint8)
    u[union] = rng.integers(0, 2, size=len(union), dtype=np.uint8)
    x = gf2_encode(u, F)
    return x, AliceState(m0, m1, u, J0, J1)


def bob_align_decode(state: BobState, config: SessionConfig, y) -> np.ndarray:
    """Step 4: undo P1, then SC-decode against T_view.  Returns the full u estimate.

    For view 1 the decoder runs on T1 with relabeled positions: u*(A T1) is
    w*T1 with w_j = u_pi(j).
    """
    y = np.asarray(y, dtype=np.float64)
    y2 = y[np.asarray(state.P1.pi)]  # y*P1
    llr = llr_map(y2, ChannelParams(config.snr))
    unfrozen = sorted(state.J0 + state.J1)
    if state.view == 0:
        return sc_decode(llr, FrozenSpec.from_unfrozen(config.n, unfrozen)).u_hat
    inv = state.A.inverse()
    w = sc_decode(llr, FrozenSpec.from_unfrozen(config.n, [inv(i) for i in unfrozen])).u_hat
    return apply_index_perm(w, state.A)


def make_seeds(rng: np.random.Generator, a: int, ell: int) -> tuple[HashSeed, HashSeed]:
    return HashSeed.random(rng, a, ell), HashSeed.random(rng, a, ell)


def alice_keys(alice: AliceState, seeds: tuple[HashSeed, HashSeed]):
    """Step 5 on Alice's side: k_b = h_b(u on J_b), c_b = m_b xor k_b."""
    keys = tuple(toeplitz_hash(alice.u[list(J)], s) for J, s in zip((alice.J0, alice.J1), seeds))
    cts = (alice.m0 ^ keys[0], alice.m1 ^ keys[1])
    alice.keys, alice.ciphertexts = keys, cts
    return cts


def bob_output(bob: BobState, u_hat, seeds, ciphertexts) -> np.ndarray:
    J = bob.decodable
    key = toeplitz_hash(np.asarray(u_hat)[list(J)], seeds[bob.choice])
    return np.asarray(ciphertexts[bob.choice], dtype=np.uint8) ^ key


def key_exchange(alice: AliceState, bob: BobState, u_hat, seeds, ell: int):
    """Returns (c0, c1, Bob's estimate of m_B)."""
    for s in seeds:
        if s.output_len != ell or s.input_len != len(alice.J0):
            raise ValueError("seed length mismatch")
    c0, c1 = alice_keys(alice, seeds)
    return c0, c1, bob_output(bob, u_hat, seeds, (c0, c1))


@dataclass
class SymmetryReport:
    per_orbit: list[bool]
    tv: float | None = None
    counts: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.per_orbit)


def verify_transcript_symmetry(config: SessionConfig, samples: int = 0,
                               seed: int = 0) -> SymmetryReport:
    """Exact check that (view 1, p*A) publishes the swapped view-0 tuple for p.

    With ``samples`` > 0 also run that many Bob setups per choice bit and
    report the total-variation distance between the two published-tuple
    distributions.
    """
    A = config.A
    ok = []
    for p in perm_orbit(A):
        t0 = public_tuple(config, 0, p)
        t1 = public_tuple(config, 1, p * A)
        ok.append(t1 == t0.swapped())
    rep = SymmetryReport(ok)
    if samples:
        counts = {0: Counter(), 1: Counter()}
        for b in (0, 1):
            for t in range(samples):
                st = bob_setup(config, b, substream(seed, 2 * t + b))
                counts[b][(st.F.words.tobytes(), st.J0, st.J1)] += 1
        keys = set(counts[0]) | set(counts[1])
        rep.tv = 0.5 * sum(abs(counts[0][k] - counts[1][k]) / samples for k in keys)
        rep.counts = counts
    return rep


# ---------------------------------------------------------------------------
# Session state machines


def _msg(kind: str, **body) -> dict:
    return {"v": VERSION, "type": kind, **body}


@dataclass
class BobResult:
    choice: int
    message: np.ndarray
    u_hat: np.ndarray
    state: BobState


@dataclass
class AliceResult:
    m0: np.ndarray
    m1: np.ndarray
    state: AliceState


class _Party:
    role = ""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.expect: list[str] = []
        self.done = False
        self.result = None

    def _take(self, msg: dict) -> dict:
        if self.done:
            raise ProtocolError("message after session end")
        kind = msg.get("type")
        if not self.expect or kind != self.expect[0]:
            want = self.expect[0] if self.expect else "nothing"
            raise ProtocolError(f"{self.role}: expected {want}, got {kind}")
        self.expect.pop(0)
        return msg

    def _hello(self) -> dict:
        return _msg("hello", role=self.role, n=self.config.n, config=self.config.digest())

    def _check_hello(self, msg: dict, peer: str) -> None:
        if msg.get("role") != peer:
            raise ProtocolError("peer announced the wrong role")
        if msg.get("n") != self.config.n or msg.get("config") != self.config.digest():
            raise ProtocolError("peer runs a different session configuration")


class AliceParty(_Party):
    role = "alice"

    def __init__(self, config, rng: np.random.Generator, messages=None,
                 noise_rng: np.random.Generator | None = None):
        super().__init__(config)
        self.rng = rng
        self.noise_rng = noise_rng if noise_rng is not None else substream(0)
        self.messages = messages
        self.F = None
        self.state = None

    def start(self) -> list[dict]:
        self.expect = ["hello", "public_transform", "index_sets", "close"]
        return [self._hello()]

    def handle(self, msg: dict) -> list[dict]:
        msg = self._take(msg)
        kind = msg["type"]
        n = self.config.n
        if kind == "hello":
            self._check_hello(msg, "bob")
            return []
        if kind == "public_transform":
            if msg.get("n") != n:
                raise ProtocolError("transform size mismatch")
            self.F = b64_to_matrix(msg["F"], n)
            return []
        if kind == "index_sets":
            try:
                J0 = tuple(int(i) - 1 for i in msg["J0"])
                J1 = tuple(int(i) - 1 for i in msg["J1"])
            except (KeyError, TypeError, ValueError):
                raise ProtocolError("malformed index sets") from None
            _check_sets(n, J0, J1)
            ell = self.config.ell
            x, self.state = alice_encode(self.F, J0, J1, self.rng, ell, self.messages)
            y = add_noise(modulate(x), ChannelParams(self.config.snr), self.noise_rng)
            seeds = make_seeds(self.rng, len(J0), ell)
            c0, c1 = alice_keys(self.state, seeds)
            self.result = AliceResult(self.state.m0, self.state.m1, self.state)
            return [
                # the simulated channel sits at the transmitter: Bob only sees y
                _msg("channel_frame", n=n, symbols=[float(v) for v in y]),
                _msg("hash_seeds", a=len(J0), ell=ell,
                     h0=bits_to_b64(seeds[0].bits), h1=bits_to_b64(seeds[1].bits)),
                _msg("ciphertexts", ell=ell, c0=bits_to_b64(c0), c1=bits_to_b64(c1)),
            ]
        self.done = True  # close
        return []


class BobParty(_Party):
    role = "bob"

    def __init__(self, config, choice: int, rng: np.random.Generator):
        super().__init__(config)
        self.choice = choice
        self.rng = rng
        self.state = None
        self.u_hat = None
        self.seeds = None

    def start(self) -> list[dict]:
        self.expect = ["hello", "channel_frame", "hash_seeds", "ciphertexts"]
        return []

    def handle(self, msg: dict) -> list[dict]:
        msg = self._take(msg)
        kind = msg["type"]
        cfg = self.config
        if kind == "hello":
            self._check_hello(msg, "alice")
            self.state = bob_setup(cfg, self.choice, self.rng)
            st = self.state
            return [
                self._hello(),
                _msg("public_transform", n=cfg.n, F=st.F.to_base64()),
                _msg("index_sets", J0=[i + 1 for i in st.J0], J1=[i + 1 for i in st.J1]),
            ]
        if kind == "channel_frame":
            sym = msg.get("symbols")
            if msg.get("n") != cfg.n or not isinstance(sym, list) or len(sym) != cfg.n:
                raise ProtocolError("channel frame has the wrong length")
            try:
                y = np.asarray(sym, dtype=np.float64)
            except (TypeError, ValueError):
                raise ProtocolError("channel frame holds non-numeric symbols") from None
            if not np.all(np.isfinite(y)):
                raise ProtocolError("channel frame holds non-finite symbols")
            self.u_hat = bob_align_decode(self.state, cfg, y)
            return []
        if kind == "hash_seeds":
            a, ell = len(self.state.J0), cfg.ell
            if msg.get("a") != a or msg.get("ell") != ell:
                raise ProtocolError("hash seed dimensions do not match")
            need = max(0, a + ell - 1)
            self.seeds = (HashSeed(b64_to_bits(msg["h0"], need), a, ell),
                          HashSeed(b64_to_bits(msg["h1"], need), a, ell))
            return []
        # ciphertexts
        ell = cfg.ell
        if msg.get("ell") != ell:
            raise ProtocolError("ciphertext length mismatch")
        cts = (b64_to_bits(msg["c0"], ell), b64_to_bits(msg["c1"], ell))
        out = bob_output(self.state, self.u_hat, self.seeds, cts)
        self.result = BobResult(self.choice, out, self.u_hat, self.state)
        self.done = True
        return [_msg("close")]


def session_rngs(seed: int, session: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(protocol rng, noise rng) for one party in one session."""
    return substream(seed, 2 * session), substream(seed, 2 * session + 1)


@dataclass
class SessionInputs:
    alice_seed: int = 1
    bob_seed: int = 2
    choice: int = 0
    messages: tuple | None = None
    session: int = 0


@dataclass
class SessionOutcome:
    transcript: list[str]
    alice: AliceResult | None
    bob: BobResult | None

    @property
    def success(self) -> bool:
        return bool(np.array_equal(self.bob.message, (self.alice.m0, self.alice.m1)[self.bob.choice]))

    def hidden_agreement(self) -> tuple[int, int]:
        """(agreeing bits, total) between Bob's decisions and u on the unchosen set."""
        J = list(self.bob.state.hidden)
        agree = int(np.sum(self.bob.u_hat[J] == self.alice.state.u[J]))
        return agree, len(J)


def make_alice(config: SessionConfig, inputs: SessionInputs) -> AliceParty:
    rng, noise = session_rngs(inputs.alice_seed, inputs.session)
    return AliceParty(config, rng, inputs.messages, noise)


def make_bob(config: SessionConfig, inputs: SessionInputs) -> BobParty:
    rng, _ = session_rngs(inputs.bob_seed, inputs.session)
    return BobParty(config, inputs.choice, rng)


def run_loopback(config: SessionConfig, inputs: SessionInputs) -> SessionOutcome:
    """Both parties in-process; frames go through the same serialization as TCP."""
    alice, bob = make_alice(config, inputs), make_bob(config, inputs)
    transcript: list[str] = []
    queue: list[tuple[_Party, str]] = []

    def post(sender: _Party, msgs):
        dest = bob if sender is alice else alice
        for msg in msgs:
            line = encode_frame(msg)
            transcript.append(line)
            queue.append((dest, line))

    post(bob, bob.start())
    post(alice, alice.start())
    while queue:
        dest, line = queue.pop(0)
        post(dest, dest.handle(decode_frame(line)))
    if not (alice.done and bob.done):
        raise ProtocolError("session ended early")
    return SessionOutcome(transcript, alice.result, bob.result)


def run_party(party: _Party, link, log: Callable[[str], None] | None = None) -> list[str]:
    """Drive one party over a line link (``send``/``recv``).  Returns its transcript."""
    transcript: list[str] = []

    def send_all(msgs):
        for msg in msgs:
            line = encode_frame(msg)
            transcript.append(line)
            link.send(line)
            if log:
                log(line)

    send_all(party.start())
    while not party.done:
        line = link.recv()
        transcript.append(line)
        if log:
            log(line)
        send_all(party.handle(decode_frame(line)))
    return transcript


def run_session(mode: str, role: str, config: SessionConfig, inputs: SessionInputs,
                addr: str | None = None, listen: bool = False, ready=None):
    """Run one session.  ``mode`` is ``loopback`` or ``tcp``."""
    if mode == "loopback":
        return run_loopback(config, inputs)
    if mode != "tcp":
        raise ValueError("mode must be loopback or tcp")
    from .wire import connect, listen_once

    if role not in ("alice", "bob"):
        raise ValueError("role must be alice or bob")
    party = make_alice(config, inputs) if role == "alice" else make_bob(config, inputs)
    link = listen_once(addr, ready) if listen else connect(addr)
    try:
        transcript = run_party(party, link)
    finally:
        link.close()
    if role == "alice":
        return SessionOutcome(transcript, party.result, None)
    return SessionOutcome(transcript, None, party.result)
