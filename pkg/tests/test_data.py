import filecmp

import numpy as np
import pytest

from gtvmin import (
    GraphParams,
    LocalDataset,
    clustering_error,
    generate_scenario,
    load_scenario,
    quadratic_loss,
    quadratic_loss_gradient,
    save_scenario,
)


def make_scenario(seed=3, noise=0.1, sizes=(5,), d=2, m=20, **kwargs):
    return generate_scenario(
        rng_seed=seed,
        cluster_sizes=list(sizes),
        d=d,
        m_per_node=m,
        noise_std=noise,
        separation=2.0,
        **kwargs,
    )


# ------------------------------------------------------------------- losses

def test_quadratic_loss_exact_fit_is_zero():
    ds = LocalDataset(features=np.eye(2), labels=np.array([1.0, 2.0]))
    assert quadratic_loss(ds, np.array([1.0, 2.0])) == 0.0


def test_quadratic_loss_hand_values():
    ds = LocalDataset(features=np.eye(2), labels=np.array([1.0, 2.0]))
    assert quadratic_loss(ds, np.zeros(2)) == pytest.approx(2.5)
    ds1 = LocalDataset(features=np.array([[2.0]]), labels=np.array([4.0]))
    assert quadratic_loss(ds1, np.array([1.0])) == pytest.approx(4.0)


def test_gradient_zero_at_exact_fit():
    ds = LocalDataset(features=np.eye(2), labels=np.array([1.0, 2.0]))
    np.testing.assert_array_equal(
        quadratic_loss_gradient(ds, np.array([1.0, 2.0])), np.zeros(2)
    )


def test_gradient_hand_value():
    ds = LocalDataset(features=np.array([[1.0]]), labels=np.array([0.0]))
    np.testing.assert_allclose(quadratic_loss_gradient(ds, np.array([3.0])), [6.0])


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(11)
    h = 1e-6
    for _ in range(5):
        m, d = int(rng.integers(3, 12)), int(rng.integers(1, 5))
        ds = LocalDataset(features=rng.normal(size=(m, d)), labels=rng.normal(size=m))
        w = rng.normal(size=d)
        grad = quadratic_loss_gradient(ds, w)
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            fd = (quadratic_loss(ds, w + e) - quadratic_loss(ds, w - e)) / (2 * h)
            assert abs(grad[j] - fd) <= 1e-6


def test_loss_dimension_mismatch_raises():
    ds = LocalDataset(features=np.eye(2), labels=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        quadratic_loss(ds, np.zeros(3))
    with pytest.raises(ValueError):
        quadratic_loss_gradient(ds, np.zeros(3))


def test_loss_nonnegative_on_random_inputs():
    rng = np.random.default_rng(4)
    for _ in range(20):
        ds = LocalDataset(features=rng.normal(size=(6, 3)), labels=rng.normal(size=6))
        assert quadratic_loss(ds, rng.normal(size=3)) >= 0.0


def test_gradient_vanishes_at_normal_equation_solution():
    rng = np.random.default_rng(8)
    for _ in range(10):
        m, d = 12, 4
        x = rng.normal(size=(m, d))
        y = rng.normal(size=m)
        w_star = np.linalg.solve(x.T @ x, x.T @ y)
        ds = LocalDataset(features=x, labels=y)
        assert np.linalg.norm(quadratic_loss_gradient(ds, w_star)) <= 1e-8


def test_dataset_validation():
    with pytest.raises(ValueError):
        LocalDataset(features=np.eye(2), labels=np.zeros(3))
    with pytest.raises(ValueError):
        LocalDataset(features=np.array([[np.nan]]), labels=np.zeros(1))
    with pytest.raises(ValueError):
        LocalDataset(features=np.zeros((0, 2)), labels=np.zeros(0))


# ---------------------------------------------------------------- scenarios

def test_noiseless_scenario_has_zero_epsilon_and_zero_loss():
    scen = make_scenario(noise=0.0, sizes=(4, 4))
    for cluster in scen.clusters:
        assert cluster.epsilon == 0.0
        for i in cluster.members:
            assert quadratic_loss(scen.datasets[i], cluster.reference_params) == 0.0


def test_scenario_determinism_bit_identical():
    a = make_scenario(seed=21, sizes=(3, 4), noise=0.3)
    b = make_scenario(seed=21, sizes=(3, 4), noise=0.3)
    assert a.graph == b.graph
    for da, db in zip(a.datasets, b.datasets):
        np.testing.assert_array_equal(da.features, db.features)
        np.testing.assert_array_equal(da.labels, db.labels)
    for ca, cb in zip(a.clusters, b.clusters):
        np.testing.assert_array_equal(ca.reference_params, cb.reference_params)
        assert ca.epsilon == cb.epsilon


def test_recorded_epsilon_matches_recomputation():
    scen = make_scenario(seed=5, noise=0.1, sizes=(5,), m=20)
    cluster = scen.clusters[0]
    recomputed = sum(
        quadratic_loss(scen.datasets[i], cluster.reference_params)
        for i in cluster.members
    )
    assert recomputed == pytest.approx(cluster.epsilon, rel=1e-12, abs=1e-12)


def test_clustering_error_examples():
    noiseless = make_scenario(noise=0.0, sizes=(4,))
    cluster = noiseless.clusters[0]
    assert clustering_error(noiseless, cluster, cluster.reference_params) == 0.0

    from gtvmin import ClusterSpec

    single = ClusterSpec(members=(2,))
    w = np.array([0.5, -1.0])
    assert clustering_error(noiseless, single, w) == pytest.approx(
        quadratic_loss(noiseless.datasets[2], w)
    )

    noisy = make_scenario(seed=9, noise=0.4, sizes=(6,))
    c = noisy.clusters[0]
    assert clustering_error(noisy, c, c.reference_params) == pytest.approx(
        c.epsilon, rel=1e-12, abs=1e-12
    )


def test_clustering_assumption_holds_with_equality():
    for seed in range(5):
        scen = make_scenario(seed=seed, noise=0.2, sizes=(3, 5))
        for cluster in scen.clusters:
            err = clustering_error(scen, cluster, cluster.reference_params)
            assert err <= cluster.epsilon + 1e-12


def test_center_separation():
    scen = make_scenario(seed=2, sizes=(3, 3, 3), d=4)
    centers = [c.reference_params for c in scen.clusters]
    for a in range(3):
        for b in range(a + 1, 3):
            assert np.linalg.norm(centers[a] - centers[b]) >= 2.0 * (1 - 1e-12)


def test_separation_infeasible_raises():
    # a 1-d sphere has only two points, so three separated centers cannot exist
    with pytest.raises(ValueError, match="separation"):
        make_scenario(sizes=(2, 2, 2), d=1)


def test_generate_scenario_validation():
    with pytest.raises(ValueError):
        make_scenario(sizes=())
    with pytest.raises(ValueError):
        make_scenario(noise=-0.1)
    with pytest.raises(ValueError):
        generate_scenario(0, [3], d=2, m_per_node=5, noise_std=0.1, separation=0.0)


def test_scenario_uses_graph_params():
    scen = make_scenario(
        sizes=(3, 3), graph_params=GraphParams(p_in=1.0, p_out=0.0)
    )
    assert scen.graph.num_edges == 6  # two disjoint triangles


# ------------------------------------------------------------- serialization

def test_scenario_roundtrip_and_byte_identical(tmp_path):
    scen = make_scenario(seed=13, noise=0.25, sizes=(3, 4), d=3, m=7)
    dir_a = tmp_path / "a"
    save_scenario(scen, dir_a)
    loaded = load_scenario(dir_a)

    assert loaded.graph == scen.graph
    assert loaded.d == scen.d
    assert loaded.rng_seed == scen.rng_seed
    assert loaded.generator == scen.generator
    for da, db in zip(loaded.datasets, scen.datasets):
        np.testing.assert_array_equal(da.features, db.features)
        np.testing.assert_array_equal(da.labels, db.labels)
    for ca, cb in zip(loaded.clusters, scen.clusters):
        assert ca.members == cb.members
        np.testing.assert_array_equal(ca.reference_params, cb.reference_params)
        assert ca.epsilon == cb.epsilon

    # saving the loaded scenario reproduces every file byte for byte
    dir_b = tmp_path / "b"
    save_scenario(loaded, dir_b)
    names = sorted(p.name for p in dir_a.iterdir())
    assert names == sorted(p.name for p in dir_b.iterdir())
    match, mismatch, errors = filecmp.cmpfiles(dir_a, dir_b, names, shallow=False)
    assert mismatch == [] and errors == []
