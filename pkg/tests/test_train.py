import itertools

import numpy as np
import pytest

from cosearch.corpus import RelationGraph
from cosearch.gat import LinkModel, ModelConfig, pair_probabilities
from cosearch.train import (TrainConfig, TrainingError, eval_link_accuracy, fit, full_split, split_pairs, train,
                            write_loss_csv)

TOY = ModelConfig(feature_dim=16, embed_dim=8, layers=2, heads=2, hidden=8, predictor_hidden=8)


def planted_six():
    g = RelationGraph([f"v{i}" for i in range(6)])
    for u, v in [("v0", "v1"), ("v1", "v2"), ("v0", "v2"), ("v3", "v4"), ("v4", "v5")]:
        g.set_edge(u, v)
    return g


@pytest.fixture(scope="module")
def overfit():
    g = planted_six()
    split = full_split(g)
    return g, split, fit(split, TrainConfig(epochs=500, seed=0), TOY)


def test_overfit_all_pairs(overfit):
    g, split, model = overfit
    pairs = list(itertools.combinations(range(6), 2))
    probs = pair_probabilities(model, split.names, split.train_adjacency(), pairs)
    labels = [g.label(split.names[i], split.names[j]) for i, j in pairs]
    assert np.array_equal((probs > 0.5).astype(int), labels)


def test_edge_scores_above_non_edge(overfit):
    g, split, model = overfit
    p = pair_probabilities(model, split.names, split.train_adjacency(), [(0, 1), (0, 4)])
    assert p[0] > p[1]


def test_loss_window_maxima_non_increasing(overfit):
    # resampled negatives make single epochs noisy; the worst epoch of each
    # 50-epoch block must still not exceed the worst of the block before
    _, _, model = overfit
    loss = np.array([h[1] for h in model.history])
    peaks = loss.reshape(-1, 50).max(axis=1)
    assert (np.diff(peaks) <= 0).all()


def test_loss_non_increasing_without_resampling():
    # ratio 2 on this graph puts every absent pair in every batch
    g = planted_six()
    model = fit(full_split(g), TrainConfig(epochs=500, seed=0, neg_ratio=2), TOY)
    loss = np.array([h[1] for h in model.history])
    assert all(loss[t + 50] <= loss[t] for t in range(len(loss) - 50))


def test_deterministic_given_seed():
    g = planted_six()
    a = fit(full_split(g), TrainConfig(epochs=40, seed=3), TOY)
    b = fit(full_split(g), TrainConfig(epochs=40, seed=3), TOY)
    assert a.history[-1][1] == b.history[-1][1]
    for k in a.params:
        np.testing.assert_array_equal(a.params[k], b.params[k])


def test_precondition_errors():
    empty = RelationGraph(["a", "b", "c"])
    with pytest.raises(TrainingError, match="no positive edges"):
        train(empty, TrainConfig(epochs=1))
    complete = RelationGraph(["a", "b", "c"])
    for u, v in itertools.combinations("abc", 2):
        complete.set_edge(u, v)
    with pytest.raises(TrainingError):
        full_split(complete)


def test_divergence_reports_epoch():
    g = planted_six()
    cfg = TrainConfig(epochs=50, lr=1e300, seed=0)
    with np.errstate(all="ignore"), pytest.raises(TrainingError, match=r"epoch \d+"):
        fit(full_split(g), cfg, TOY)


@pytest.mark.parametrize("kwargs", [{"lr": 0}, {"neg_ratio": 0}, {"train_fraction": 1.0}, {"train_fraction": 0}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs).validate()


def _constant_model(p, names):
    m = LinkModel(TOY, names)
    m.params["pred.w2"][:] = 0.0
    m.params["pred.b2"] = np.array(np.log(p / (1 - p)))
    return m


def test_eval_accuracy_constant_model():
    g = planted_six()
    m = _constant_model(0.9, g.nodes)
    assert eval_link_accuracy(m, g, [("v0", "v1", 1), ("v3", "v4", 1)]) == 1.0
    assert eval_link_accuracy(m, g, [("v0", "v1", 1), ("v0", "v5", 0)]) == 0.5
    with pytest.raises(ValueError):
        eval_link_accuracy(m, g, [])


def test_threshold_tie_is_negative():
    g = planted_six()
    m = _constant_model(0.5, g.nodes)
    assert eval_link_accuracy(m, g, [("v0", "v1", 0)]) == 1.0


def test_split_holds_out_fraction():
    g = planted_six()
    split = split_pairs(g, 0.8, 0)
    assert len(split.val_pairs) == 15 - 12
    seen = {tuple(p) for p in np.concatenate([split.train_pos, split.train_neg, split.val_pairs])}
    assert len(seen) == 15


def test_loss_csv(tmp_path, overfit):
    _, _, model = overfit
    write_loss_csv(model, tmp_path / "loss.csv")
    lines = (tmp_path / "loss.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss,accuracy" and len(lines) == 501
