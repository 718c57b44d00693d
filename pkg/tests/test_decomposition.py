import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmdd.decomposition import (
    build_decomposition,
    decomposition_summary,
    prolongate_weighted,
    restrict,
    write_decomposition_summary,
)
from helmdd.mesh import build_uniform_mesh


def pou_identity_error(mesh, dec):
    acc = np.zeros(mesh.n_vertices, dtype=complex)
    v = np.ones(mesh.n_vertices, dtype=complex)
    for sub in dec.subdomains:
        prolongate_weighted(sub, restrict(sub, v), acc)
    return np.abs(acc - v).max()


def test_single_subdomain_is_whole_domain():
    mesh = build_uniform_mesh(2, 4)
    dec = build_decomposition(mesh, 1, 2)
    assert dec.n_subdomains == 1
    sub = dec.subdomains[0]
    assert sub.n_dofs == mesh.n_vertices
    np.testing.assert_array_equal(sub.pou, 1.0)
    assert len(sub.interface_dofs) == 0
    assert len(sub.elements) == mesh.n_simplices


def test_two_by_two_box_geometry_and_weights():
    # expected geometry enumerated by hand: base boxes of 4x4 cells grow by 2
    # layers and clip at the boundary, giving 6x6-cell boxes
    mesh = build_uniform_mesh(2, 8)
    dec = build_decomposition(mesh, 2, 2, pou="multiplicity")
    expected_boxes = {
        0: ((0, 0), (6, 6)),
        1: ((2, 0), (8, 6)),
        2: ((0, 2), (6, 8)),
        3: ((2, 2), (8, 8)),
    }
    for sub in dec.subdomains:
        assert (sub.cell_lo, sub.cell_hi) == expected_boxes[sub.index]

    # reference multiplicity from the boxes themselves
    mult = np.zeros(mesh.n_vertices, dtype=int)
    for lo, hi in expected_boxes.values():
        for iy in range(lo[1], hi[1] + 1):
            for ix in range(lo[0], hi[0] + 1):
                mult[iy * 9 + ix] += 1
    np.testing.assert_array_equal(dec.multiplicity, mult)
    for sub in dec.subdomains:
        np.testing.assert_array_equal(sub.pou, 1.0 / mult[sub.dofs])

    # dofs in the central overlap band (outside the 4-fold center square) weigh 1/2
    coords = mesh.grid_coordinates()
    band = (coords[:, 0] >= 2) & (coords[:, 0] <= 6) & (coords[:, 1] < 2)
    assert (mult[band] == 2).all()


@pytest.mark.parametrize("pou", ["multiplicity", "ramp"])
def test_partition_of_unity_identity_exact(pou):
    mesh = build_uniform_mesh(2, 12)
    dec = build_decomposition(mesh, 3, 2, pou=pou)
    assert pou_identity_error(mesh, dec) < 1e-15


def test_partition_of_unity_3d():
    mesh = build_uniform_mesh(3, 6)
    for pou in ("multiplicity", "ramp"):
        dec = build_decomposition(mesh, 2, 2, pou=pou)
        assert pou_identity_error(mesh, dec) < 1e-15


def test_ramp_weights_vanish_on_interfaces():
    mesh = build_uniform_mesh(2, 12)
    dec = build_decomposition(mesh, 3, 2, pou="ramp")
    for sub in dec.subdomains:
        assert np.all(sub.pou[sub.interface_dofs] == 0.0)
        assert np.all(sub.pou >= 0.0)


def test_restrict_and_prolongate():
    mesh = build_uniform_mesh(2, 8)
    dec = build_decomposition(mesh, 2, 2)
    v = np.arange(mesh.n_vertices, dtype=complex)

    single = build_decomposition(mesh, 1, 2).subdomains[0]
    np.testing.assert_array_equal(restrict(single, v), v)

    sub = dec.subdomains[0]
    outside = np.setdiff1d(np.arange(mesh.n_vertices), sub.dofs)[0]
    basis = np.zeros(mesh.n_vertices, dtype=complex)
    basis[outside] = 1.0
    assert np.all(restrict(sub, basis) == 0.0)

    acc = np.zeros(mesh.n_vertices, dtype=complex)
    for s in dec.subdomains:
        prolongate_weighted(s, restrict(s, v), acc)
    np.testing.assert_allclose(acc, v, atol=1e-12)

    # zero local vector does not change the accumulator
    before = acc.copy()
    prolongate_weighted(sub, np.zeros(sub.n_dofs, dtype=complex), acc)
    np.testing.assert_array_equal(acc, before)


def test_restrict_prolongate_dimension_errors():
    mesh = build_uniform_mesh(2, 4)
    sub = build_decomposition(mesh, 2, 1).subdomains[0]
    with pytest.raises(ValueError):
        restrict(sub, np.zeros(3))
    with pytest.raises(ValueError):
        prolongate_weighted(sub, np.zeros(2), np.zeros(mesh.n_vertices, dtype=complex))


def test_overlap_strip_width():
    mesh = build_uniform_mesh(2, 12)
    for ov in (1, 2):
        dec = build_decomposition(mesh, 3, ov)
        left = next(s for s in dec.subdomains if s.index == 0)
        mid = next(s for s in dec.subdomains if s.index == 1)
        strip = min(left.cell_hi[0], mid.cell_hi[0]) - max(left.cell_lo[0], mid.cell_lo[0])
        assert strip == 2 * ov


def test_interface_dofs_shared_with_neighbours():
    mesh = build_uniform_mesh(2, 12)
    dec = build_decomposition(mesh, 3, 2)
    for sub in dec.subdomains:
        if len(sub.interface_dofs):
            assert (dec.multiplicity[sub.dofs[sub.interface_dofs]] >= 2).all()


@settings(max_examples=15, deadline=None)
@given(n1d=st.sampled_from([1, 2, 3]), ov=st.integers(1, 2), factor=st.integers(2, 4))
def test_dof_classification_partitions(n1d, ov, factor):
    mesh = build_uniform_mesh(2, n1d * factor)
    dec = build_decomposition(mesh, n1d, ov)
    for sub in dec.subdomains:
        local = np.arange(sub.n_dofs)
        pieces = np.concatenate([sub.interior_dofs, sub.interface_dofs, sub.physical_boundary_dofs])
        assert len(pieces) == sub.n_dofs
        np.testing.assert_array_equal(np.sort(pieces), local)
    # covering
    assert dec.multiplicity.min() >= 1


def test_build_decomposition_errors():
    mesh = build_uniform_mesh(2, 8)
    with pytest.raises(ValueError):
        build_decomposition(mesh, 3, 2)  # 8 not divisible by 3
    with pytest.raises(ValueError):
        build_decomposition(mesh, 2, 0)  # overlap must be >= 1
    with pytest.raises(ValueError):
        build_decomposition(mesh, 0, 2)
    with pytest.raises(ValueError):
        build_decomposition(mesh, 2, 2, pou="bogus")
    tiny = build_uniform_mesh(2, 1)
    with pytest.raises(ValueError):
        build_decomposition(tiny, 2, 1)


def test_summary_json(tmp_path):
    mesh = build_uniform_mesh(2, 8)
    dec = build_decomposition(mesh, 2, 2)
    info = decomposition_summary(dec)
    assert info["n_subdomains"] == 4
    assert info["max_multiplicity"] == 4
    path = tmp_path / "dec.json"
    write_decomposition_summary(dec, path)
    assert json.loads(path.read_text())["n_subdomains"] == 4
