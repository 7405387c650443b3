import numpy as np
import pytest

from autossl.errors import ConfigError, PreparationError
from autossl.evaluation import nmi
from autossl.graph import bfs_distances, build_graph, sbm_generate
from autossl.numeric import finite_diff_check
from autossl.rng import RngStream
from autossl.tasks import (TASK_NAMES, PairDistanceTask, StepDraw, TaskConfig,
                           greedy_balanced_partition, make_step_draw,
                           make_tasks)


def cycle_graph(n, features=None):
    u = np.arange(n)
    pairs = np.stack([np.minimum(u, (u + 1) % n),
                      np.maximum(u, (u + 1) % n)], axis=1)
    if features is None:
        features = np.eye(n)
    return build_graph(n, pairs, features)


# ---------------------------------------------------------------------------
# target construction
# ---------------------------------------------------------------------------

def test_balanced_partition_sizes():
    g = cycle_graph(11)
    for parts in (2, 3, 4, 11):
        labels = greedy_balanced_partition(g, parts, RngStream(7))
        counts = np.bincount(labels, minlength=parts)
        # quota split: first n % parts parts get the extra node
        expected = [11 // parts + (1 if i < 11 % parts else 0)
                    for i in range(parts)]
        assert counts.tolist() == expected
        assert labels.min() == 0 and labels.max() == parts - 1


def test_balanced_partition_deterministic_and_seed_sensitive():
    g = cycle_graph(12)
    a = greedy_balanced_partition(g, 3, RngStream(1))
    b = greedy_balanced_partition(g, 3, RngStream(1))
    c = greedy_balanced_partition(g, 3, RngStream(2))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_balanced_partition_first_part_is_contiguous_on_a_cycle():
    # the first part grows by BFS on the untouched cycle, so it is an arc;
    # later parts only get the leftovers and need not be contiguous
    g = cycle_graph(12)
    labels = greedy_balanced_partition(g, 4, RngStream(3))
    members = sorted(np.where(labels == 0)[0])
    gaps = sorted((members[(i + 1) % 3] - members[i]) % 12 for i in range(3))
    assert gaps == [1, 1, 10], members


def test_balanced_partition_rejects_bad_part_count():
    g = cycle_graph(5)
    with pytest.raises(ValueError):
        greedy_balanced_partition(g, 0, RngStream(0))
    with pytest.raises(ValueError):
        greedy_balanced_partition(g, 6, RngStream(0))


def test_feature_cluster_labels_recover_separated_blocks():
    g = sbm_generate([30, 30], p_in=0.2, p_out=0.02, feature_noise=0.05,
                     rng=RngStream(0))
    tasks = make_tasks(g, TaskConfig(names=("par",), par_clusters=2),
                       RngStream(1))
    assert nmi(tasks[0].labels, g.labels) == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# pairsim
# ---------------------------------------------------------------------------

def brute_cosine(features, u, v):
    nu = np.linalg.norm(features[u])
    nv = np.linalg.norm(features[v])
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(features[u] @ features[v] / (nu * nv))


def test_pairsim_targets_match_direct_cosine():
    g = sbm_generate([15, 15], p_in=0.3, p_out=0.05, feature_noise=0.3,
                     rng=RngStream(4))
    task = make_tasks(g, TaskConfig(names=("pairsim",), pairsim_pairs=60),
                      RngStream(5))[0]
    assert task.pairs.shape == (60, 2)
    for (u, v), t in zip(task.pairs, task.targets):
        assert u < v
        assert t == pytest.approx(brute_cosine(g.features, u, v), abs=1e-12)
    # no duplicate pairs
    assert len({(int(a), int(b)) for a, b in task.pairs}) == 60


def test_pairsim_top_half_is_the_true_top_half():
    g = sbm_generate([12, 12], p_in=0.3, p_out=0.05, feature_noise=0.5,
                     rng=RngStream(6))
    m = 40
    task = make_tasks(g, TaskConfig(names=("pairsim",), pairsim_pairs=m),
                      RngStream(7))[0]
    n = g.num_nodes
    all_sims = sorted(
        (brute_cosine(g.features, u, v) for u in range(n)
         for v in range(u + 1, n)),
        reverse=True)
    np.testing.assert_allclose(np.sort(task.targets[:m // 2])[::-1],
                               all_sims[:m // 2], atol=1e-9)


def test_pairsim_zero_norm_rows_target_zero():
    feats = RngStream(8).standard_normal((6, 3))
    feats[2] = 0.0
    g = cycle_graph(6, features=feats)
    # 15 = C(6,2): every pair is collected, including all with node 2
    task = make_tasks(g, TaskConfig(names=("pairsim",), pairsim_pairs=15),
                      RngStream(9))[0]
    assert task.pairs.shape[0] == 15
    mask = (task.pairs == 2).any(axis=1)
    assert mask.sum() == 5
    np.testing.assert_array_equal(task.targets[mask], 0.0)


def test_pairsim_clamps_to_available_pairs():
    g = cycle_graph(4)
    task = make_tasks(g, TaskConfig(names=("pairsim",), pairsim_pairs=999),
                      RngStream(10))[0]
    assert task.pairs.shape[0] == 6  # C(4,2)


# ---------------------------------------------------------------------------
# pairdis
# ---------------------------------------------------------------------------

def test_pairdis_labels_match_bfs_distances():
    g = sbm_generate([20, 20], p_in=0.15, p_out=0.02, feature_noise=0.1,
                     rng=RngStream(11))
    cap = 3
    task = make_tasks(g, TaskConfig(names=("pairdis",), pairdis_pairs=120,
                                    pairdis_cap=cap), RngStream(12))[0]
    assert len({(int(a), int(b)) for a, b in task.pairs}) == len(task.pairs)
    for (u, v), lab in zip(task.pairs, task.labels):
        d = int(bfs_distances(g, int(u), cap=g.num_nodes)[v])
        assert 1 <= d <= g.num_nodes     # reachable, not the anchor itself
        assert lab == min(d, cap) - 1


def test_pairdis_bucket_multiset_on_a_cycle():
    # C10 with cap=4 has exactly 10 pairs at each of d=1,2,3 and 15 at d>=4
    g = cycle_graph(10)
    task = PairDistanceTask(g, 45, 4, RngStream(0))
    assert task.pairs.shape[0] == 45
    assert np.bincount(task.labels, minlength=4).tolist() == [10, 10, 10, 15]


def test_pairdis_requires_some_reachable_pair():
    g = build_graph(4, np.zeros((0, 2), dtype=np.int64), np.eye(4))
    with pytest.raises(PreparationError):
        make_tasks(g, TaskConfig(names=("pairdis",), pairdis_pairs=10),
                   RngStream(1))


def test_pairdis_rejects_tiny_cap():
    g = cycle_graph(6)
    with pytest.raises(ConfigError):
        make_tasks(g, TaskConfig(names=("pairdis",), pairdis_cap=1),
                   RngStream(2))


# ---------------------------------------------------------------------------
# dgi
# ---------------------------------------------------------------------------

def test_dgi_zero_head_gives_log_two():
    g = cycle_graph(8)
    task = make_tasks(g, TaskConfig(names=("dgi",), dgi_samples=8),
                      RngStream(3))[0]
    heads = task.init_head(5, 0.01, RngStream(4))
    heads[0].value[:] = 0.0
    z = RngStream(5).standard_normal((8, 5))
    zc = RngStream(6).standard_normal((8, 5))
    draw = make_step_draw(g, [task], TaskConfig(names=("dgi",),
                                                dgi_samples=8), RngStream(7))
    res = task.loss_and_grad(z, zc, heads, draw)
    assert res.loss == pytest.approx(np.log(2.0), abs=1e-12)
    # zero bilinear weight kills both the score path and the summary path
    np.testing.assert_array_equal(res.grad_embeddings, 0.0)
    np.testing.assert_array_equal(res.grad_corrupt, 0.0)
    assert np.abs(res.head_grads[0]).max() > 0.0


def test_dgi_requires_corrupt_inputs():
    g = cycle_graph(6)
    task = make_tasks(g, TaskConfig(names=("dgi",)), RngStream(8))[0]
    heads = task.init_head(4, 0.01, RngStream(9))
    z = RngStream(10).standard_normal((6, 4))
    with pytest.raises(ValueError):
        task.loss_and_grad(z, None, heads, StepDraw())


def test_step_draw_shapes():
    g = cycle_graph(9)
    cfg = TaskConfig(names=("clu", "par"), clu_parts=3, par_clusters=3)
    tasks = make_tasks(g, cfg, RngStream(11))
    empty = make_step_draw(g, tasks, cfg, RngStream(12))
    assert empty.corrupt_perm is None and empty.dgi_pos is None

    cfg = TaskConfig(names=("dgi",), dgi_samples=100)
    tasks = make_tasks(g, cfg, RngStream(13))
    full = make_step_draw(g, tasks, cfg, RngStream(14))
    np.testing.assert_array_equal(full.dgi_pos, np.arange(9))
    np.testing.assert_array_equal(full.dgi_neg, np.arange(9))
    np.testing.assert_array_equal(np.sort(full.corrupt_perm), np.arange(9))

    cfg = TaskConfig(names=("dgi",), dgi_samples=4)
    sub = make_step_draw(g, make_tasks(g, cfg, RngStream(15)), cfg,
                         RngStream(16))
    assert sub.dgi_pos.shape == (4,)
    assert len(set(sub.dgi_pos.tolist())) == 4
    assert np.all(np.diff(sub.dgi_pos) > 0)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def test_make_tasks_streams_keyed_by_name_not_position(random_graph):
    cfg_full = TaskConfig(clu_parts=3, par_clusters=3, pairsim_pairs=12,
                          pairdis_pairs=12, dgi_samples=10)
    cfg_sub = TaskConfig(names=("dgi", "clu"), clu_parts=3)
    full = make_tasks(random_graph, cfg_full, RngStream(20))
    sub = make_tasks(random_graph, cfg_sub, RngStream(20))
    clu_full = next(t for t in full if t.name == "clu")
    clu_sub = next(t for t in sub if t.name == "clu")
    np.testing.assert_array_equal(clu_full.labels, clu_sub.labels)


def test_make_tasks_rejects_unknown_name(random_graph):
    with pytest.raises(ConfigError):
        make_tasks(random_graph, TaskConfig(names=("clu", "umap")),
                   RngStream(0))


def test_all_task_names_covered(random_graph):
    cfg = TaskConfig(clu_parts=3, par_clusters=3, pairsim_pairs=12,
                     pairdis_pairs=12, dgi_samples=10)
    tasks = make_tasks(random_graph, cfg, RngStream(21))
    assert tuple(t.name for t in tasks) == TASK_NAMES


# ---------------------------------------------------------------------------
# gradient checks on the embeddings (heads held fixed)
# ---------------------------------------------------------------------------

def _embedding_grad_err(task, graph, hidden=6, seed=30):
    rng = RngStream(seed)
    heads = task.init_head(hidden, 0.01, rng.child(0))
    z0 = 0.5 * rng.child(1).standard_normal((graph.num_nodes, hidden))
    zc = 0.5 * rng.child(2).standard_normal((graph.num_nodes, hidden))
    cfg = TaskConfig(names=(task.name,), dgi_samples=graph.num_nodes)
    draw = make_step_draw(graph, [task], cfg, rng.child(3))

    def loss_fn(flat):
        z = flat.reshape(z0.shape)
        return task.loss_and_grad(z, zc, heads, draw).loss

    res = task.loss_and_grad(z0, zc, heads, draw)
    return finite_diff_check(loss_fn, z0.ravel(),
                             res.grad_embeddings.ravel(), delta=1e-6)


@pytest.mark.parametrize("name", TASK_NAMES)
def test_embedding_gradients_match_finite_differences(name, random_graph):
    cfg = TaskConfig(names=(name,), clu_parts=3, par_clusters=3,
                     pairsim_pairs=12, pairdis_pairs=12, pairdis_cap=3,
                     dgi_samples=10)
    task = make_tasks(random_graph, cfg, RngStream(22))[0]
    assert _embedding_grad_err(task, random_graph) < 1e-6


@pytest.mark.parametrize("name", TASK_NAMES)
def test_head_gradients_match_finite_differences(name, random_graph):
    cfg = TaskConfig(names=(name,), clu_parts=3, par_clusters=3,
                     pairsim_pairs=12, pairdis_pairs=12, pairdis_cap=3,
                     dgi_samples=10)
    task = make_tasks(random_graph, cfg, RngStream(23))[0]
    rng = RngStream(31)
    heads = task.init_head(6, 0.01, rng.child(0))
    z = 0.5 * rng.child(1).standard_normal((random_graph.num_nodes, 6))
    zc = 0.5 * rng.child(2).standard_normal((random_graph.num_nodes, 6))
    draw = make_step_draw(random_graph, [task],
                          TaskConfig(names=(name,), dgi_samples=10),
                          rng.child(3))
    res = task.loss_and_grad(z, zc, heads, draw)
    for hi, block in enumerate(heads):
        base = block.value.copy()

        def loss_fn(flat):
            block.value[...] = flat.reshape(base.shape)
            out = task.loss_and_grad(z, zc, heads, draw).loss
            block.value[...] = base
            return out

        err = finite_diff_check(loss_fn, base.ravel(),
                                res.head_grads[hi].ravel(), delta=1e-6)
        assert err < 1e-6, (name, hi, err)
