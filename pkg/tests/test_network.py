import math

import numpy as np
import pytest

from tepkit.cases import garver
from tepkit.network import (CANDIDATE, Bus, Circuit, Network, NetworkError, build_incidence, id_key,
                            require_valid, validate)


def small():
    buses = tuple(Bus(b) for b in "123")
    circuits = (Circuit("l1", "1", "2", 10.0, 100.0), Circuit("l2", "2", "3", 5.0, 50.0),
                Circuit("c1", "1", "3", 4.0, 80.0, CANDIDATE, cost=12.0))
    return Network(buses, circuits, "1")


def test_garver_shape():
    net = garver()
    assert len(net.buses) == 6
    assert len(net.existing) == 6
    assert len(net.candidates) == 15
    assert validate(net).ok


def test_garver_bus6_isolated_without_candidates():
    comps = garver().components(include_candidates=False)
    assert ("6",) in comps


def test_id_key_numeric_order():
    assert sorted(["10", "2", "1"], key=id_key) == ["1", "2", "10"]
    assert sorted(["c10", "c2"], key=id_key) == ["c2", "c10"]


def test_validation_collects_every_problem():
    net = Network((Bus("1"), Bus("1"), Bus("2")),
                  (Circuit("a", "1", "9", -1.0, 10.0), Circuit("a", "2", "2", 1.0, 10.0),
                   Circuit("c", "1", "2", 1.0, math.inf, CANDIDATE, cost=-3.0)), "7")
    fields = {(i.subject, i.field) for i in validate(net)}
    assert ("bus 1", "id") in fields
    assert ("network", "reference_bus") in fields
    assert ("circuit a", "to_bus") in fields
    assert ("circuit a", "susceptance") in fields
    assert ("circuit a", "id") in fields
    assert ("circuit c", "cost") in fields
    assert ("circuit c", "flow_limit") in fields
    with pytest.raises(NetworkError):
        require_valid(net)


def test_incidence_rows():
    net = small()
    A = build_incidence(net).toarray()
    assert A.shape == (3, 3)
    rows = {c.id: r for r, c in enumerate(net.circuits)}
    np.testing.assert_array_equal(A[rows["l1"]], [1, -1, 0])
    np.testing.assert_array_equal(A.sum(axis=1), 0)


def test_promote_makes_candidate_existing_and_free():
    net = small().promote(["c1"])
    c = net.circuit("c1")
    assert not c.is_candidate
    assert c.cost == 0.0
    assert net.candidates == ()
    with pytest.raises(NetworkError):
        small().promote(["l1"])


def test_components_and_references():
    net = Network((Bus("1"), Bus("2"), Bus("3"), Bus("4")),
                  (Circuit("a", "1", "2", 1.0, 10.0), Circuit("b", "3", "4", 1.0, 10.0)), "2")
    assert len(net.components()) == 2
    refs = net.reference_buses()
    assert "2" in refs and len(refs) == 2
