import numpy as np
import pytest
import shapely

from dtncomplete.geometry import symmetric_difference_area
from dtncomplete.mesh_fem import build_disk_mesh, paper_scale_mesh
from dtncomplete.phantoms import (
    grid_coordinates,
    DiskPhantomSpec,
    PolygonSpec,
    polygon_admissible,
    polygon_conductivity,
    rasterize,
    regular_polygon,
    sample_admissible_polygon,
    sample_disks,
    to_conductivity,
)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_sampled_disks_are_valid(n):
    for seed in range(20):
        spec = sample_disks(seed, n)
        assert spec.n_inclusions == n
        assert spec.is_valid()


def test_sampling_is_deterministic():
    a, b = sample_disks(99, 4), sample_disks(99, 4)
    np.testing.assert_array_equal(a.centers, b.centers)
    np.testing.assert_array_equal(a.radii, b.radii)


def test_mean_radius_at_five_inclusions():
    rng = np.random.default_rng(0)
    r = np.concatenate([sample_disks(rng, 5).radii for _ in range(200)])
    # 1000 radii; rejection of crowded draws slightly favors small radii
    assert 0.29 <= r.mean() <= 0.31


def test_single_inclusion_formula(mesh32):
    spec = DiskPhantomSpec.single((0.0, 0.0), 0.3, 5.0)
    g = to_conductivity(spec, mesh32)
    inside = np.linalg.norm(mesh32.centroids, axis=1) <= 0.3
    np.testing.assert_array_equal(g, np.where(inside, 5.0, 1.0))


def test_empty_spec_is_background(mesh32):
    np.testing.assert_array_equal(to_conductivity(DiskPhantomSpec.empty(), mesh32), 1.0)


def test_boundary_tie_counts_inside():
    spec = DiskPhantomSpec.single((0.0, 0.0), 0.5, 3.0)
    assert spec.evaluate(np.array([[0.5, 0.0]]))[0] == 3.0


def test_max_conductivity_is_max_contrast(mesh32):
    for seed in range(100):
        spec = sample_disks(seed, 2 + seed % 4)
        g = to_conductivity(spec, mesh32)
        assert g.max() <= spec.contrasts.max() + 1e-12


def test_regular_triangle_admissible():
    ok, why = polygon_admissible(PolygonSpec(regular_polygon(3, 0.5)))
    assert ok and why is None


def test_boundary_distance_violation():
    # circumradius 0.9 leaves distance 0.1 < d0 to the circle
    ok, why = polygon_admissible(PolygonSpec(regular_polygon(3, 0.9)))
    assert not ok and why == "A1"


def test_reflex_angle_violation():
    sq = regular_polygon(4, 0.4, phase=np.pi / 4)
    sq[0] *= 0.1  # pull one vertex toward the center: the angle there opens past pi - beta0
    ok, why = polygon_admissible(PolygonSpec(sq))
    assert not ok and why == "A3"


def test_self_intersection_reported():
    bow = np.array([[0.3, 0.3], [-0.3, -0.3], [0.3, -0.3], [-0.3, 0.3]])
    assert polygon_admissible(PolygonSpec(bow)) == (False, "not-simple")


def test_strict_class_inside_relaxed_class():
    rng = np.random.default_rng(5)
    for _ in range(200):
        verts = rng.uniform(-0.7, 0.7, size=(int(rng.integers(3, 7)), 2))
        spec = PolygonSpec(verts)
        if polygon_admissible(spec)[0]:
            assert polygon_admissible(spec, relaxed=True)[0]
    for n_v in (3, 4, 5, 6):
        spec = sample_admissible_polygon(n_v, n_v)
        assert polygon_admissible(spec, relaxed=True)[0]


def test_fraction_conductivity_integrates_area():
    mesh = build_disk_mesh(32, 6)
    spec = sample_admissible_polygon(1, 4)
    g = polygon_conductivity(spec, mesh, "fraction")
    area = shapely.Polygon(spec.vertices).area
    assert abs(((g - 1) / (spec.kappa - 1) * mesh.areas).sum() - area) < 1e-12


def test_geometry_against_shapely():
    rng = np.random.default_rng(2)
    for _ in range(20):
        p = sample_admissible_polygon(rng, 4).vertices
        q = sample_admissible_polygon(rng, 5).vertices
        ref = shapely.Polygon(p).symmetric_difference(shapely.Polygon(q)).area
        assert abs(symmetric_difference_area(p, q) - ref) < 1e-12


def test_rasterize_background_is_disk_indicator(mesh32):
    img = rasterize(mesh32, np.ones(mesh32.n_triangles), 64)
    X, Y = grid_coordinates(64)
    inside = X**2 + Y**2 <= 1
    np.testing.assert_allclose(img[inside], 1.0, atol=1e-12)
    assert np.all(img[~inside] == 0)


def test_rasterize_mass(mesh32):
    spec = DiskPhantomSpec.single((0.0, 0.0), 0.3, 5.0)
    exact = np.pi + 4 * np.pi * 0.09
    pix = (2 / 127) ** 2
    # raster mass tracks the element integral on any mesh
    g = to_conductivity(spec, mesh32)
    assert abs(rasterize(mesh32, g, 128).sum() * pix / (g * mesh32.areas).sum() - 1) < 0.005
    # and the analytic integral once centroid sampling of the circle is fine enough
    mesh = paper_scale_mesh()
    img = rasterize(mesh, to_conductivity(spec, mesh), 128)
    assert abs(img.sum() * pix - exact) / exact < 0.02
