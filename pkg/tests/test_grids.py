import numpy as np
import pytest

from pharmlab.domains import Ball, HalfSpace, Intersection
from pharmlab.geometry import Sphere
from pharmlab.grids import (BOUNDARY, GridGraph, annulus_graph, cubic_lattice, cylindrical_lattice,
                            explicit_graph, pole_mesh, restrict, spherical_lattice, uniform_axis)


def test_uniform_axis_contains_anchor():
    x = uniform_axis(-1.0, 1.0, 0.3, anchor=0.1)
    assert np.min(np.abs(x - 0.1)) < 1e-14
    assert x[0] >= -1.0 and x[-1] <= 1.0 and x[0] - 0.3 < -1.0 and x[-1] + 0.3 > 1.0


def test_cubic_lattice_weights_sum_to_volume():
    lat = cubic_lattice([0.0, 0.0], [1.0, 1.0], 0.25)
    # edges of one direction tile the square with their cells
    for d in (0, 1):
        assert np.sum(lat.weight[lat.axis == d]) == pytest.approx(1.0)


def test_restrict_cuts_edges_at_the_boundary():
    lat = cubic_lattice([-1.5, -1.5], [1.5, 1.5], 0.25)
    G = restrict(lat, Ball(np.zeros(2), 1.0), holes=[(Sphere(np.zeros(2), 0.3), "S")])
    bd = G.points[G.tag(BOUNDARY)]
    np.testing.assert_allclose(np.linalg.norm(bd, axis=1), 1.0, atol=1e-9)
    hs = G.points[G.tag("S")]
    np.testing.assert_allclose(np.linalg.norm(hs, axis=1), 0.3, atol=1e-9)
    assert np.all(G.length > 0) and np.all(G.weight > 0)


def test_spherical_lattice_volume():
    r = np.geomspace(0.5, 2.0, 9)
    lat = spherical_lattice(np.zeros(3), r, 8, 1)
    rad = lat.axis == 0
    # radial cells of the meridian lattice tile the shell
    assert np.sum(lat.weight[rad]) == pytest.approx(4 / 3 * np.pi * (2.0**3 - 0.5**3), rel=1e-12)


def test_cylindrical_split_lattice():
    lat = cylindrical_lattice(np.linspace(1, 2, 3), 8, split=True)
    th = np.mod(np.arctan2(lat.points[:, 1], lat.points[:, 0]), 2 * np.pi)
    grid = np.round(th / (np.pi / 8), 9)
    assert np.allclose(grid, np.round(grid))


def test_graph_validation():
    with pytest.raises(ValueError):
        explicit_graph([(0, 0)])
    with pytest.raises(ValueError):
        explicit_graph([(0, 1)], length=[-1.0])
    g = explicit_graph([(0, 1), (1, 2)], tags={"S": [0]})
    assert g.n_nodes == 3 and g.n_edges == 2
    with pytest.raises(KeyError):
        g.tag("missing")


def test_json_round_trip():
    lat = cubic_lattice([-1.0, -1.0], [1.0, 1.0], 0.5)
    G = restrict(lat, HalfSpace([1.0, 0.0], -0.3))
    H = GridGraph.from_json(G.to_json())
    np.testing.assert_array_equal(G.edges, H.edges)
    np.testing.assert_allclose(G.weight, H.weight)
    np.testing.assert_array_equal(G.tag(BOUNDARY), H.tag(BOUNDARY))


def test_edge_map_under_reflection():
    lat = cylindrical_lattice(np.linspace(1, 2, 3), 8)
    G = GridGraph("cyl", lat.points, lat.edges, lat.length, lat.weight)
    emap = G.edge_map(lambda X: X * np.array([1.0, -1.0, 1.0][: X.shape[1]]))
    assert np.all(emap >= 0) and len(np.unique(emap)) == G.n_edges
    np.testing.assert_allclose(G.length[emap], G.length)


def test_annulus_graph_tags():
    g = annulus_graph(1.0, 2.0, 2, 0.1)
    np.testing.assert_allclose(np.linalg.norm(g.points[g.tag("S")], axis=1), 1.0)
    np.testing.assert_allclose(np.linalg.norm(g.points[g.tag(BOUNDARY)], axis=1), 2.0)


def test_pole_mesh_measure():
    D = Intersection((Ball(np.zeros(3), 1.0), HalfSpace([1.0, 0, 0], -2.0)))
    mesh = pole_mesh(np.zeros(3), np.linspace(0.2, 1.0, 17), 24, D, holes=[(Sphere(np.zeros(3), 0.2), "S")])
    vol = 4 / 3 * np.pi * (1 - 0.2**3)
    assert np.sum(mesh.measure) == pytest.approx(vol, rel=0.02)
