"""Rasterizer: hard/soft agreement, aggregation oracles, determinism."""

import numpy as np
import pytest

from softsil.distributions import DistributionSpec, parse_distribution
from softsil.errors import ConfigurationError
from softsil.geometry import Camera, ScreenMesh, icosphere, \
    normalize_unit_sphere, transform_project
from softsil.raster import (Image, RenderConfig, hard_render,
                            render_depth_aggregated, render_silhouette)
from softsil.tconorms import TConormSpec, parse_tconorm


def screen_tri(tri, depth=1.0):
    tri = np.asarray(tri, dtype=float)
    return ScreenMesh(tri, np.full(len(tri), depth),
                      np.arange(len(tri)).reshape(-1, 3))


def cross2(u, v):
    return u[0] * v[1] - u[1] * v[0]


def barycentric_rasterize(tri, width, height):
    """Independent oracle: inclusive half-plane coverage per pixel center."""
    a, b, c = [np.asarray(v, dtype=float) for v in tri]
    img = np.zeros((height, width))
    for j in range(height):
        for i in range(width):
            p = np.array([i + 0.5, j + 0.5])
            d0 = cross2(b - a, p - a)
            d1 = cross2(c - b, p - b)
            d2 = cross2(a - c, p - c)
            inside = (d0 >= 0 and d1 >= 0 and d2 >= 0) \
                or (d0 <= 0 and d1 <= 0 and d2 <= 0)
            img[j, i] = 1.0 if inside else 0.0
    return img


def config(dist="logistic", tconorm="probabilistic", tau=0.5, size=32,
           **kw):
    return RenderConfig(parse_distribution(dist), parse_tconorm(tconorm),
                        tau, size, size, **kw)


class TestRenderSilhouette:
    def test_empty_mesh_all_zero(self):
        sm = ScreenMesh(np.zeros((0, 2)), np.zeros(0), np.zeros((0, 3), int))
        img = render_silhouette(sm, config())
        assert np.all(img.values == 0.0)

    def test_covering_triangle_heaviside_is_all_ones(self):
        tri = [(-50, -50), (200, -50), (-50, 200)]
        img = render_silhouette(screen_tri(tri), config("heaviside", "max"))
        assert img.values.min() == 1.0

    def test_heaviside_matches_oracle_with_exact_boundary(self):
        # hypotenuse x + y = 50 passes exactly through pixel centers
        tri = [(-20, -20), (70, -20), (-20, 70)]
        img = render_silhouette(screen_tri(tri), config("heaviside", "max"))
        np.testing.assert_array_equal(img.values,
                                      barycentric_rasterize(tri, 32, 32))

    def test_edge_pixel_gets_half(self):
        # vertical edge through x = 10.5 passes exactly through pixel
        # centers in column 10
        sm = screen_tri([(10.5, -5.0), (10.5, 40.0), (30.0, 17.0)])
        img = render_silhouette(sm, config("logistic", tau=0.7))
        assert img.values[16, 10] == 0.5

    def test_stacked_triangles_probabilistic(self):
        tri = np.array([(5, 5), (25, 7), (12, 28)], dtype=float)
        single = render_silhouette(screen_tri(tri), config()).values
        stacked = ScreenMesh(np.vstack([tri, tri]), np.ones(6),
                             np.array([[0, 1, 2], [3, 4, 5]]))
        double = render_silhouette(stacked, config()).values
        np.testing.assert_allclose(double, 1.0 - (1.0 - single) ** 2,
                                   rtol=0, atol=1e-12)

    def test_range_and_determinism(self):
        rng = np.random.default_rng(6)
        sm = ScreenMesh(rng.uniform(-10, 42, (9, 2)), np.ones(9),
                        np.arange(9).reshape(3, 3))
        for tc in ("max", "probabilistic", "yager(p=2)", "average",
                   "dombi(p=0.5)"):
            cfg = config("gaussian", tc, 1.5)
            a = render_silhouette(sm, cfg).values
            b = render_silhouette(sm, cfg).values
            assert np.array_equal(a, b)
            assert a.min() >= 0.0 and a.max() <= 1.0

    def test_monotone_in_tau_outside(self):
        sm = screen_tri([(10, 10), (20, 10), (15, 20)])
        taus = 10.0 ** np.linspace(-3, 1, 30)
        for dist in ("logistic", "gaussian", "cauchy"):
            prev = -1.0
            for tau in taus:
                img = render_silhouette(sm, config(dist, tau=tau))
                outside = img.values[2, 2]  # pixel far outside the face
                assert outside >= prev - 1e-15
                prev = outside

    def test_adding_face_never_decreases(self):
        rng = np.random.default_rng(13)
        base = rng.uniform(0, 32, (3, 2))
        extra = rng.uniform(0, 32, (3, 2))
        one = ScreenMesh(base, np.ones(3), np.array([[0, 1, 2]]))
        two = ScreenMesh(np.vstack([base, extra]), np.ones(6),
                         np.array([[0, 1, 2], [3, 4, 5]]))
        for tc in ("max", "probabilistic", "einstein", "yager(p=2)",
                   "schweizer-sklar(p=-1)"):
            cfg = config("laplace", tc, 1.0)
            a = render_silhouette(one, cfg).values
            b = render_silhouette(two, cfg).values
            assert np.all(b >= a - 1e-12)

    def test_degenerate_face_contributes_nothing(self):
        tri = np.array([(5, 5), (25, 5), (15, 25)], dtype=float)
        with_degen = ScreenMesh(
            np.vstack([tri, [(1, 1), (9, 9), (5, 5)]]), np.ones(6),
            np.array([[0, 1, 2], [3, 4, 5]]))  # second face is collinear
        only = render_silhouette(screen_tri(tri), config()).values
        both = render_silhouette(with_degen, config()).values
        np.testing.assert_array_equal(only, both)

    def test_culling_matches_unculled(self):
        rng = np.random.default_rng(3)
        sm = ScreenMesh(rng.uniform(0, 32, (6, 2)), np.ones(6),
                        np.array([[0, 1, 2], [3, 4, 5]]))
        for dist, tau in (("logistic", 0.5), ("uniform", 2.0),
                          ("exponential(rev)", 1.0)):
            culled = render_silhouette(sm, config(dist, tau=tau)).values
            full = render_silhouette(sm, config(dist, tau=tau,
                                                cull=False)).values
            assert np.max(np.abs(culled - full)) <= 2e-6

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            config(tau=0.0)
        with pytest.raises(ConfigurationError):
            RenderConfig(DistributionSpec("logistic"), TConormSpec("max"),
                         1.0, 0, 4)


class TestHardRender:
    def test_equals_heaviside_max(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            sm = ScreenMesh(rng.uniform(-8, 40, (6, 2)), np.ones(6),
                            np.array([[0, 1, 2], [3, 4, 5]]))
            hard = hard_render(sm, 32, 32).values
            soft = render_silhouette(sm, config("heaviside", "max")).values
            np.testing.assert_array_equal(hard, soft)

    def test_off_screen_triangle(self):
        sm = screen_tri([(-50, -50), (-40, -50), (-45, -40)])
        assert np.all(hard_render(sm, 32, 32).values == 0.0)

    def test_against_barycentric_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(25):
            tri = rng.uniform(-5, 69, (3, 2))
            got = hard_render(screen_tri(tri), 64, 64).values
            want = barycentric_rasterize(tri, 64, 64)
            assert np.array_equal(got, want)

    def test_binary_values(self):
        rng = np.random.default_rng(9)
        sm = ScreenMesh(rng.uniform(0, 32, (9, 2)), np.ones(9),
                        np.arange(9).reshape(3, 3))
        vals = hard_render(sm, 32, 32).values
        assert set(np.unique(vals)) <= {0.0, 1.0}


class TestHardLimit:
    def test_tiny_tau_matches_hard(self):
        rng = np.random.default_rng(21)
        cfg = config("logistic", "probabilistic", 1e-6, size=48)
        agree = 0
        total = 0
        for _ in range(10):
            tri = rng.uniform(0, 48, (3, 2))
            sm = screen_tri(tri)
            soft = render_silhouette(sm, cfg).values
            hard = barycentric_rasterize(tri, 48, 48)
            d = np.abs(soft - hard)
            total += d.size
            agree += int(np.sum(d < 1e-6))
        assert agree / total >= 0.99


class TestDepthAggregation:
    def covering(self, n, depths):
        tri = np.array([(-50, -50), (150, -50), (-50, 150)], dtype=float)
        verts = np.vstack([tri] * n)
        z = np.repeat(depths, 3).astype(float)
        faces = np.arange(3 * n).reshape(n, 3)
        return ScreenMesh(verts, z, faces)

    def test_single_face_full_occupancy(self):
        sm = self.covering(1, [2.0])
        cfg = config("heaviside", "max", 1.0, 16, depth_softmin_tau=0.3)
        img = render_depth_aggregated(sm, cfg, [0.7])
        np.testing.assert_allclose(img.values, 0.7, atol=0)

    def test_coincident_depths_average(self):
        sm = self.covering(2, [2.0, 2.0])
        cfg = config("heaviside", "max", 1.0, 16, depth_softmin_tau=0.3)
        img = render_depth_aggregated(sm, cfg, [0.4, 0.8])
        np.testing.assert_allclose(img.values, 0.6, atol=1e-15)

    def test_small_tau_picks_nearest(self):
        sm = self.covering(2, [2.0, 5.0])
        cfg = config("heaviside", "max", 1.0, 16, depth_softmin_tau=1e-3)
        img = render_depth_aggregated(sm, cfg, [0.4, 0.8])
        np.testing.assert_allclose(img.values, 0.4, atol=1e-15)

    def test_requires_depth_tau(self):
        sm = self.covering(1, [2.0])
        with pytest.raises(ConfigurationError):
            render_depth_aggregated(sm, config("heaviside", "max", 1.0, 16),
                                    [0.5])

    def test_requires_one_value_per_face(self):
        sm = self.covering(2, [2.0, 3.0])
        cfg = config("heaviside", "max", 1.0, 16, depth_softmin_tau=0.3)
        with pytest.raises(ConfigurationError):
            render_depth_aggregated(sm, cfg, [0.5])


class TestProjectionIntegration:
    def test_sphere_render_plausible(self):
        mesh = normalize_unit_sphere(icosphere(1))
        cam = Camera(30, 20, 4.0, 40, 64, 64)
        img = render_silhouette(transform_project(mesh, cam),
                                config(size=64, tau=0.3))
        # a centered unit sphere at distance 4, fov 40: covers a middling
        # fraction of the image, darker at the rim
        cover = img.values.mean()
        assert 0.1 < cover < 0.6
        assert img.values[32, 32] > 0.9


class TestImageType:
    def test_row_major_shape(self):
        img = Image(4, 3, np.zeros(12))
        assert img.values.shape == (3, 4)

    def test_zeros_constructor(self):
        img = Image.zeros(5, 7)
        assert img.values.shape == (7, 5)
        assert np.all(img.values == 0)
