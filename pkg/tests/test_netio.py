import json

import numpy as np
import pytest

from relaycap import netio, netmodel as nm
from relaycap.netio import NetworkFormatError


@pytest.mark.parametrize("net", [
    nm.random_gaussian_network(10, 1),
    nm.random_gaussian_network(7, 2, "dense-complex"),
    nm.random_gaussian_network(12, 3, "layered(3)"),
    nm.random_adt_network(5, 4, prime=3),
    nm.random_erasure_network(6, 2),
], ids=["real", "complex", "layered", "adt", "erasure"])
def test_round_trip_bit_exact(net, tmp_path):
    path = tmp_path / "net.json"
    netio.save_network(net, path)
    back = netio.load_network(path)
    assert netio.networks_equal(net, back)
    netio.validate(json.loads(path.read_text()), "network")


def test_parse_error_has_line_info():
    with pytest.raises(NetworkFormatError) as exc:
        netio.loads_network('{\n  "model": "gaussian",\n  "n": 2,\n}')
    assert exc.value.line == 4
    assert "4:" in str(exc.value)


@pytest.mark.parametrize("doc", [
    {"model": "gaussian", "n": 2, "s": 0, "d": 1, "gains": [[0, 1], [0, 0]], "extra": 1},
    {"model": "gaussian", "n": 2, "s": 0, "d": 1, "eps": [[1, 1], [1, 1]]},
    {"model": "erasure", "n": 2, "s": 0, "d": 1, "gains": [[1, 1], [1, 1]]},
    {"model": "adt", "n": 2, "s": 0, "d": 1, "gains": [[0, 1], [0, 0]]},
    {"model": "adt", "n": 2, "s": 0, "d": 1, "gains": [[0, 1.5], [0, 0]], "prime": 2},
    {"model": "adt", "n": 2, "s": 0, "d": 1, "gains": [[0, 1], [0, 0]], "prime": 4},
    {"model": "gaussian", "n": 3, "s": 0, "d": 2, "gains": [[0, 1], [0, 0]]},
    {"model": "gaussian", "n": 2, "s": 0, "d": 0, "gains": [[0, 1], [0, 0]]},
    {"model": "erasure", "n": 2, "s": 0, "d": 1, "eps": [[1, 2], [1, 1]]},
    {"model": "mimo", "n": 2, "s": 0, "d": 1, "gains": [[0, 1], [0, 0]]},
    [1, 2, 3],
])
def test_schema_rejections(doc):
    with pytest.raises(NetworkFormatError):
        netio.network_from_dict(doc)


def test_complex_pairs():
    doc = {"model": "gaussian", "n": 2, "s": 0, "d": 1, "gains": [[[0, 0], [1.0, -2.0]], [[0, 0], [0, 0]]]}
    net = netio.network_from_dict(doc)
    assert net.is_complex and net.H[0, 1] == 1 - 2j


def test_missing_file(tmp_path):
    with pytest.raises(NetworkFormatError):
        netio.load_network(tmp_path / "nope.json")


def test_published_schemas_load():
    for name in netio.SCHEMAS:
        assert netio.schema(name)["type"] == "object"
    with pytest.raises(KeyError):
        netio.schema("bogus")


def test_networks_equal_detects_difference():
    a = nm.random_gaussian_network(5, 1)
    # one ulp on every gain
    b = nm.GaussianNetwork(a.H + np.where(a.H != 0, np.spacing(a.H), 0))
    assert not netio.networks_equal(a, b)
