"""Scikit-learn style estimator wrapping the training pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .pipeline import TrainConfig, train
from .raster import GrayImage, binarize_upscale
from .recognizer import SearchBudget, classify_single


class DigitGraphClassifier(BaseEstimator, ClassifierMixin):
    """Digit classifier based on graph-structured mid-level feature classes.

    ``fit`` expects grayscale images (n, h, w) with values in [0, 1] and
    integer labels 0-9; ``predict`` returns the learned label per image or
    -1 when no feature class fires.  Recognition is translation and scale
    invariant, so test images may be any size.
    """

    def __init__(self, upscale_factor=10, binarize_threshold=0.1,
                 line_threshold=0.1, features_per_digit=2,
                 slack_grid=(0.0, 0.05, 0.1, 0.2), fa_ceiling=0.01,
                 coverage_floor=0.9, match_coverage=0.75,
                 validation_fraction=0.2, node_limit=1_000_000,
                 random_state=0):
        self.upscale_factor = upscale_factor
        self.binarize_threshold = binarize_threshold
        self.line_threshold = line_threshold
        self.features_per_digit = features_per_digit
        self.slack_grid = slack_grid
        self.fa_ceiling = fa_ceiling
        self.coverage_floor = coverage_floor
        self.match_coverage = match_coverage
        self.validation_fraction = validation_fraction
        self.node_limit = node_limit
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            coverage_floor=self.coverage_floor,
            features_per_digit=self.features_per_digit,
            slack_grid=tuple(self.slack_grid),
            fa_ceiling=self.fa_ceiling,
            seed=self.random_state,
            line_threshold=self.line_threshold,
            binarize_threshold=self.binarize_threshold,
            upscale_factor=self.upscale_factor,
            match_coverage=self.match_coverage,
            budget=SearchBudget(node_limit=self.node_limit),
        )

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        if X.ndim != 3 or len(X) != len(y):
            raise ValueError("X must be (n, h, w) with one label per image")
        images = [GrayImage(img, int(lbl)) for img, lbl in zip(X, y)]
        rng = np.random.default_rng(self.random_state)
        order = rng.permutation(len(images))
        n_val = max(1, int(round(self.validation_fraction * len(images))))
        val = [images[i] for i in order[:n_val]]
        trn = [images[i] for i in order[n_val:]]
        cfg = self._config()
        cfg.examples_per_digit = len(images)
        self.model_ = train(trn, val, cfg)
        self.classes_ = np.unique(y)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        cfg = self._config()
        out = []
        for img in X:
            mask = binarize_upscale(np.asarray(img, float),
                                    cfg.upscale_factor, cfg.binarize_threshold)
            label = classify_single(mask, self.model_, cfg.budget,
                                    cfg.line_threshold)
            out.append(-1 if label is None else label)
        return np.asarray(out)
