"""scikit-learn style wrappers around the detection pipeline.

``ChannelStandardizer`` is a transformer over image stacks; ``HeadDetector``
is an estimator with ``fit(X, y)`` / ``predict(X)`` / ``score(X, y)`` where
``X`` is a sequence of ``(H, W, 3)`` images and ``y`` a sequence of ``(k, 4)``
box arrays.
"""

import json

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import net
from .anchors import AnchorConfig, AssignmentConfig, generate_anchor_grid
from .dataio.preprocess import IMAGENET_MEAN, IMAGENET_STD, channel_stats
from .postprocess import PostprocessConfig, decode_predictions, filter_detections
from .training import evaluate_dataset, train
from .validation import check_box_sets, check_images


class ChannelStandardizer(TransformerMixin, BaseEstimator):
    """Per-channel ``(x - mean) / std``.

    Parameters
    ----------
    mode : {"dataset", "imagenet", "none"}
        ``"dataset"`` learns statistics in :meth:`fit`; ``"imagenet"`` uses the
        conventional ImageNet constants; ``"none"`` is the identity.
    """

    def __init__(self, mode="dataset"):
        self.mode = mode

    def fit(self, X, y=None):
        X = check_images(X)
        if self.mode == "dataset":
            self.mean_, self.std_ = channel_stats(X)
        elif self.mode == "imagenet":
            self.mean_, self.std_ = np.array(IMAGENET_MEAN), np.array(IMAGENET_STD)
        elif self.mode == "none":
            n_ch = X[0].shape[-1]
            self.mean_, self.std_ = np.zeros(n_ch), np.ones(n_ch)
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        return [((img - self.mean_) / self.std_).astype(np.float32) for img in check_images(X)]


class HeadDetector(BaseEstimator):
    """Anchor-based single-stage detector trained from scratch with plain SGD.

    Parameters
    ----------
    anchor_sizes : tuple of float
        Square anchor side lengths, one anchor per size at every stride-16 cell.
    channels, conv6_channels, init_sigma, backbone_init :
        Network shape and initialisation, see :class:`headdet.net.NetConfig`.
    lr, lr_decay, decay_after_epochs, epochs, weight_decay :
        SGD schedule, see :class:`headdet.net.TrainConfig`.
    pos_iou, neg_iou, batch_size, pos_fraction :
        Anchor labeling and minibatch sampling.
    nms_iou, score_threshold, max_detections :
        Test-time filtering used by :meth:`predict`.
    normalize : {"dataset", "imagenet", "none"}
    random_state : int
        Seeds both initialisation and training order.
    """

    def __init__(
        self,
        anchor_sizes=(32, 64),
        channels=(8, 16, 32, 64),
        conv6_channels=64,
        init_sigma=0.01,
        backbone_init="he",
        lr=0.001,
        lr_decay=0.1,
        decay_after_epochs=8,
        epochs=15,
        weight_decay=0.0005,
        pos_iou=0.7,
        neg_iou=0.3,
        batch_size=32,
        pos_fraction=0.5,
        nms_iou=0.3,
        score_threshold=0.5,
        max_detections=300,
        normalize="dataset",
        random_state=0,
    ):
        self.anchor_sizes = anchor_sizes
        self.channels = channels
        self.conv6_channels = conv6_channels
        self.init_sigma = init_sigma
        self.backbone_init = backbone_init
        self.lr = lr
        self.lr_decay = lr_decay
        self.decay_after_epochs = decay_after_epochs
        self.epochs = epochs
        self.weight_decay = weight_decay
        self.pos_iou = pos_iou
        self.neg_iou = neg_iou
        self.batch_size = batch_size
        self.pos_fraction = pos_fraction
        self.nms_iou = nms_iou
        self.score_threshold = score_threshold
        self.max_detections = max_detections
        self.normalize = normalize
        self.random_state = random_state

    # -- configuration helpers

    def net_config(self):
        return net.NetConfig(
            channels=tuple(self.channels),
            conv6_channels=self.conv6_channels,
            n_anchors=len(self.anchor_sizes),
            init_sigma=self.init_sigma,
            rng_seed=self.random_state,
            backbone_init=self.backbone_init,
        )

    def train_config(self):
        return net.TrainConfig(self.lr, self.lr_decay, self.decay_after_epochs, self.epochs, self.weight_decay)

    def assignment_config(self):
        return AssignmentConfig(self.pos_iou, self.neg_iou, self.batch_size, self.pos_fraction)

    def postprocess_config(self, score_threshold=None):
        thr = self.score_threshold if score_threshold is None else score_threshold
        return PostprocessConfig(self.nms_iou, thr, self.max_detections)

    def _grid(self, width, height):
        return generate_anchor_grid(AnchorConfig(net.STRIDE, tuple(self.anchor_sizes), width, height))

    # -- estimator API

    def fit(self, X, y, on_epoch=None, log=None):
        """Train on images ``X`` with ground-truth boxes ``y``.

        ``on_epoch(epoch, params)`` and ``log`` are forwarded to
        :func:`headdet.training.train`.
        """
        X = check_images(X, same_size=True, multiple_of=net.STRIDE)
        y = check_box_sets(y, len(X))
        h, w = X[0].shape[:2]
        self.standardizer_ = ChannelStandardizer(self.normalize).fit(X)
        Xs = self.standardizer_.transform(X)
        self.net_config_ = self.net_config()
        self.image_size_ = (w, h)
        grid = self._grid(w, h)
        params = net.init_params(self.net_config_)
        self.params_ = train(
            params, Xs, y, grid, self.assignment_config(), self.train_config(),
            rng_seed=self.random_state, on_epoch=on_epoch, log=log,
        )
        return self

    def _detect_fn(self, score_threshold=None):
        check_is_fitted(self, "params_")
        cfg = self.postprocess_config(score_threshold)
        grids = {}

        def detect_one(img):
            h, w = img.shape[:2]
            if (w, h) not in grids:
                grids[w, h] = self._grid(w, h)
            reg, cls, _ = net.forward(self.params_, img)
            return filter_detections(decode_predictions(grids[w, h], reg, cls), cfg)

        return detect_one

    def predict(self, X, score_threshold=None):
        """Detections per image, as a list of :class:`~headdet.postprocess.Detections`."""
        check_is_fitted(self, "params_")
        Xs = self.standardizer_.transform(check_images(X, multiple_of=net.STRIDE))
        detect_one = self._detect_fn(score_threshold)
        return [detect_one(img) for img in Xs]

    def evaluate(self, X, y, iou_threshold=0.5):
        """Full precision/recall curve (score threshold 0) and per-image counts."""
        check_is_fitted(self, "params_")
        Xs = self.standardizer_.transform(check_images(X, multiple_of=net.STRIDE))
        y = check_box_sets(y, len(Xs))
        return evaluate_dataset(self._detect_fn(0.0), Xs, y, iou_threshold)

    def score(self, X, y):
        """Average precision at IoU 0.5."""
        return self.evaluate(X, y)[0].ap

    # -- persistence

    def save(self, path):
        """Write the network checkpoint to ``path`` and metadata to ``path + '.json'``."""
        check_is_fitted(self, "params_")
        with open(path, "wb") as fh:
            fh.write(net.save_params(self.params_, self.net_config_))
        meta = {
            "estimator_params": _jsonable(self.get_params()),
            "mean": self.standardizer_.mean_.tolist(),
            "std": self.standardizer_.std_.tolist(),
            "image_size": list(self.image_size_),
        }
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        with open(path + ".json", encoding="utf-8") as fh:
            meta = json.load(fh)
        est = cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in meta["estimator_params"].items()})
        with open(path, "rb") as fh:
            est.net_config_, est.params_ = net.load_params(fh.read(), est.net_config())
        std = ChannelStandardizer(est.normalize)
        std.mean_ = np.asarray(meta["mean"])
        std.std_ = np.asarray(meta["std"])
        est.standardizer_ = std
        est.image_size_ = tuple(meta["image_size"])
        return est


def _jsonable(params):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}
