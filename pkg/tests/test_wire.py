import socket
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polarot.polar_core import BitMatrix
from polarot.wire import (
    LineSocket,
    ProtocolError,
    b64_to_bits,
    b64_to_matrix,
    bits_to_b64,
    dumps,
    listen_once,
    connect,
    matrix_to_b64,
    parse_hostport,
)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=70))
def test_bits_roundtrip(bits):
    assert b64_to_bits(bits_to_b64(bits), len(bits)).tolist() == bits


def test_bits_wrong_length():
    with pytest.raises(ProtocolError):
        b64_to_bits(bits_to_b64([1, 0, 1]), 17)
    with pytest.raises(ProtocolError):
        b64_to_bits("***", 3)


def test_matrix_roundtrip():
    M = BitMatrix.from_dense(np.random.default_rng(0).integers(0, 2, (16, 16)))
    assert b64_to_matrix(matrix_to_b64(M), 16) == M
    with pytest.raises(ProtocolError):
        b64_to_matrix(matrix_to_b64(M), 8)


def test_dumps_reals():
    assert dumps({"a": 1 / 3, "b": [True, None, 2]}) == '{"a":0.33333333333333331,"b":[true,null,2]}'
    with pytest.raises(ValueError):
        dumps(float("nan"))


def test_parse_hostport():
    assert parse_hostport("127.0.0.1:80") == ("127.0.0.1", 80)
    assert parse_hostport(":9") == ("127.0.0.1", 9)
    with pytest.raises(ValueError):
        parse_hostport("localhost")


def test_line_socket_pair():
    a, b = socket.socketpair()
    la, lb = LineSocket(a), LineSocket(b)
    la.send('{"v":1}')
    assert lb.recv() == '{"v":1}'
    la.close()
    with pytest.raises(ProtocolError):
        lb.recv()
    lb.close()


def test_listen_and_connect():
    port = []
    got = []
    ready = threading.Event()

    def server():
        link = listen_once("127.0.0.1:0", lambda p: (port.append(p), ready.set()))
        got.append(link.recv())
        link.close()

    t = threading.Thread(target=server)
    t.start()
    assert ready.wait(5)
    link = connect(f"127.0.0.1:{port[0]}")
    link.send("ping")
    link.close()
    t.join(5)
    assert got == ["ping"]
