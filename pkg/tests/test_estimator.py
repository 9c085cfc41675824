import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from headdet import HeadDetector
from headdet.dataio import SynthConfig, synth_generate
from headdet.estimator import ChannelStandardizer
from headdet.exceptions import ShapeError


@pytest.fixture(scope="module")
def data():
    samples = synth_generate(SynthConfig(64, 64, (1, 2), (16, 24), rng_seed=11), 12)
    return [s.image for s in samples], [s.gts for s in samples]


@pytest.fixture(scope="module")
def fitted(data):
    X, y = data
    return HeadDetector(anchor_sizes=(16, 32), epochs=3, decay_after_epochs=2, lr=0.005).fit(X, y)


def test_get_params_defaults():
    p = HeadDetector().get_params()
    assert p["lr"] == 0.001 and p["weight_decay"] == 0.0005 and p["epochs"] == 15
    assert p["decay_after_epochs"] == 8 and p["nms_iou"] == 0.3 and p["anchor_sizes"] == (32, 64)
    assert p["init_sigma"] == 0.01 and p["batch_size"] == 32


def test_clone_and_set_params():
    est = HeadDetector(lr=0.01)
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est
    c.set_params(epochs=2)
    assert c.epochs == 2 and est.epochs == 15


def test_not_fitted(data):
    with pytest.raises(NotFittedError):
        HeadDetector().predict(data[0])


def test_fit_predict_score(fitted, data):
    X, y = data
    dets = fitted.predict(X, score_threshold=0.0)
    assert len(dets) == len(X)
    for d in dets:
        assert np.all(np.diff(d.scores) <= 0)
        assert ((d.scores >= 0) & (d.scores <= 1)).all()
    ap = fitted.score(X, y)
    assert 0.0 <= ap <= 1.0
    curve, counts = fitted.evaluate(X, y)
    assert curve.ap == ap and len(counts) == len(X)


def test_fit_deterministic(data, fitted):
    X, y = data
    again = clone(fitted).fit(X, y)
    assert all(again.params_[k].tobytes() == fitted.params_[k].tobytes() for k in fitted.params_)


def test_save_load(tmp_path, fitted, data):
    path = str(tmp_path / "m.ckpt")
    fitted.save(path)
    loaded = HeadDetector.load(path)
    assert loaded.get_params() == fitted.get_params()
    a = fitted.predict(data[0][:3], score_threshold=0.0)
    b = loaded.predict(data[0][:3], score_threshold=0.0)
    for x, z in zip(a, b):
        np.testing.assert_array_equal(x.boxes, z.boxes)


def test_input_validation(data):
    X, y = data
    with pytest.raises(ShapeError):
        HeadDetector().fit(X[:3], y[:2])
    with pytest.raises(ShapeError):
        HeadDetector().fit([np.zeros((60, 64, 3))], [np.zeros((0, 4))])
    with pytest.raises(ShapeError):
        HeadDetector().fit(X[0], y[:1])


def test_standardizer_modes():
    X = [np.full((4, 4, 3), 0.5), np.full((4, 4, 3), 1.5)]
    out = ChannelStandardizer().fit_transform(X)
    np.testing.assert_allclose(np.concatenate(out).mean(axis=(0, 1)), 0, atol=1e-7)
    out = ChannelStandardizer("none").fit_transform(X)
    np.testing.assert_array_equal(out[0], np.float32(0.5))
    std = ChannelStandardizer("imagenet").fit(X)
    np.testing.assert_allclose(std.mean_, [0.485, 0.456, 0.406])
    with pytest.raises(ValueError):
        ChannelStandardizer("bogus").fit(X)
