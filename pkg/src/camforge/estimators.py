"""Scikit-learn style wrappers around the functional core.

These exist so the pieces compose with the wider ecosystem (pipelines,
grid search, cross-validation): a classifier over shape images, a
transformer turning captures into saliency maps, and a transformer
binarizing maps with Otsu's threshold.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import cnn
from .capture import CaptureFile, load_capture
from .methods import SaliencyRequest, compute_saliency
from .segmentation import otsu_threshold
from .shapes import ShapesSample


class ShapeNetClassifier(ClassifierMixin, BaseEstimator):
    """The built-in convolutional classifier behind a fit/predict API.

    Accepts images as (n, 1, 32, 32), (n, 32, 32) or flattened (n, 1024)
    arrays with values in [0, 1].
    """

    def __init__(self, epochs=30, lr=0.05, batch_size=16, seed=7):
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    @staticmethod
    def _as_images(X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2 and X.shape[1] == 32 * 32:
            X = X.reshape(-1, 1, 32, 32)
        elif X.ndim == 3 and X.shape[1:] == (32, 32):
            X = X[:, None]
        if X.ndim != 4 or X.shape[1:] != cnn.INPUT_SHAPE:
            raise ValueError(
                f"X must be (n, 1, 32, 32), (n, 32, 32) or (n, 1024), got {X.shape}"
            )
        return X

    def fit(self, X, y):
        X = self._as_images(X)
        y = np.asarray(y)
        if len(X) != len(y):
            raise ValueError(f"X and y disagree on sample count: {len(X)} vs {len(y)}")
        self.classes_, encoded = np.unique(y, return_inverse=True)
        samples = [
            ShapesSample(image=img, label=int(lbl), gt_mask=np.zeros((32, 32), dtype=np.int64))
            for img, lbl in zip(X, encoded)
        ]
        result = cnn.train(
            samples,
            epochs=self.epochs,
            lr=self.lr,
            seed=self.seed,
            batch_size=self.batch_size,
            num_classes=len(self.classes_),
        )
        self.params_ = result.params
        self.train_accuracy_ = result.train_accuracy
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        X = self._as_images(X)
        return self.classes_[cnn.predict(self.params_, X)]

    def decision_function(self, X):
        check_is_fitted(self, "params_")
        X = self._as_images(X)
        _, _, _, _, logits = cnn._forward_batch(self.params_, X)
        return logits

    def export_capture(self, x, class_index: int, image_id: str) -> CaptureFile:
        """Capture activations/gradients of one image for a target class."""
        check_is_fitted(self, "params_")
        img = self._as_images(np.asarray(x)[None] if np.asarray(x).ndim < 4 else x)[0]
        return cnn.export_capture(self.params_, img, class_index, image_id)


class CamSaliency(TransformerMixin, BaseEstimator):
    """Captures in, normalized saliency maps out."""

    def __init__(self, method="lt_grad_cam", layers=("s1", "s2", "s3"), delta=0.0,
                 output_size=None):
        self.method = method
        self.layers = layers
        self.delta = delta
        self.output_size = output_size

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        """``X``: iterable of CaptureFile objects or paths to .camcap files."""
        captures = [cf if isinstance(cf, CaptureFile) else load_capture(cf) for cf in X]
        if not captures:
            raise ValueError("X must hold at least one capture")
        req = SaliencyRequest(
            method=self.method,
            layer_names=tuple(self.layers),
            delta=self.delta,
            output_size=self.output_size,
        )
        maps = [compute_saliency(cf, req) for cf in captures]
        shapes = {m.shape for m in maps}
        if len(shapes) > 1:
            raise ValueError(
                f"captures produce different map shapes {sorted(shapes)}; "
                "set output_size to stack them"
            )
        return np.stack(maps)


class OtsuSegmenter(TransformerMixin, BaseEstimator):
    """Binarize [0, 1] maps with per-map Otsu thresholds."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3:
            raise ValueError(f"X must be (n, H, W) maps, got shape {X.shape}")
        masks = np.zeros(X.shape, dtype=np.int64)
        for i, m in enumerate(X):
            masks[i] = m >= otsu_threshold(m)
        return masks
