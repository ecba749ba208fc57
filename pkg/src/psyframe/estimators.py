"""Scikit-learn style wrappers so the decode chain composes with Pipelines.

The functional core stays in signal_core/features/model; these classes adapt
it to the fit/transform/predict protocol (get_params/set_params included via
BaseEstimator), letting the classifier sit behind cross-validation, grid
search, or any other standard tooling.

Window batches are accepted either as a (n, 14, 256) float array or as a
sequence of EegWindow values.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from . import model as mdl
from .features import FEATURE_DIM, assemble_features
from .signal_core import FS_HZ, N_CHANNELS, EegWindow, design_bandpass, preprocess
from .synth import N_CLASSES


def as_window_array(X) -> np.ndarray:
    """Validate window input into a (n, 14, n_samples) float64 array."""
    if isinstance(X, np.ndarray):
        arr = np.asarray(X, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] != N_CHANNELS:
            raise ValueError(f"expected (n, {N_CHANNELS}, n_samples) windows, got {arr.shape}")
    else:
        windows = list(X)
        if not windows or not all(isinstance(w, EegWindow) for w in windows):
            raise ValueError("expected an array of windows or a sequence of EegWindow")
        arr = np.stack([w.data for w in windows])
    if not np.all(np.isfinite(arr)):
        raise ValueError("window input contains non-finite samples")
    return arr


def as_feature_array(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != FEATURE_DIM:
        raise ValueError(f"expected (n, {FEATURE_DIM}) features, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature input contains non-finite values")
    return X


class EegPreprocessor(BaseEstimator, TransformerMixin):
    """Band-pass + per-channel z-score, window by window.

    Parameters
    ----------
    lo, hi : float
        Band edges in Hz.
    order : int
        Butterworth design order.
    """

    def __init__(self, lo: float = 1.0, hi: float = 50.0, order: int = 4):
        self.lo = lo
        self.hi = hi
        self.order = order

    def fit(self, X=None, y=None):
        self.filter_spec_ = design_bandpass(self.lo, self.hi, FS_HZ, self.order)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "filter_spec_"):
            raise NotFittedError("EegPreprocessor: call fit before transform")
        arr = as_window_array(X)
        out = np.empty_like(arr)
        for i in range(arr.shape[0]):
            out[i] = preprocess(EegWindow(data=arr[i]), self.filter_spec_).data
        return out


class EegFeatureExtractor(BaseEstimator, TransformerMixin):
    """Windows -> fixed-layout feature matrix (n, 182). Stateless."""

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        arr = as_window_array(X)
        return np.stack([assemble_features(EegWindow(data=row)) for row in arr])


class EegTransformerClassifier(BaseEstimator, ClassifierMixin):
    """The transformer classifier behind the standard fit/predict surface.

    Parameters
    ----------
    epochs, batch_size, lr, seed : training loop knobs.
    d_model, n_heads, n_layers, d_ff : architecture knobs.

    Attributes
    ----------
    weights_ : trained model weights (with the fitted feature scaler).
    classes_ : the class ids, always 0..4.
    """

    def __init__(
        self,
        epochs: int = 30,
        batch_size: int = 16,
        lr: float = 1e-3,
        seed: int = 0,
        d_model: int = 32,
        n_heads: int = 2,
        n_layers: int = 2,
        d_ff: int = 128,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_layers = n_layers
        self.d_ff = d_ff

    def _config(self) -> mdl.ModelConfig:
        return mdl.ModelConfig(
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            d_ff=self.d_ff,
        )

    def fit(self, X, y):
        X = as_feature_array(X)
        y = np.asarray(y, dtype=np.int64)
        if y.shape != (X.shape[0],):
            raise ValueError("y must be one label per row of X")
        if np.any((y < 0) | (y >= N_CLASSES)):
            raise ValueError(f"labels must be class ids 0..{N_CLASSES - 1}")

        mu = X.mean(axis=0)
        sigma = X.std(axis=0)
        sigma = np.where(sigma < 1e-8, 1.0, sigma)
        w = replace(mdl.init_weights(self._config(), self.seed), feat_mu=mu, feat_sigma=sigma)
        state = mdl.AdamState.zeros(w)
        n = X.shape[0]
        for epoch in range(1, self.epochs + 1):
            order = np.random.default_rng([self.seed, 7, epoch]).permutation(n)
            for lo_idx in range(0, n, self.batch_size):
                sel = order[lo_idx : lo_idx + self.batch_size]
                _, g = mdl._loss_and_grads(w, X[sel], y[sel])
                w, state = mdl.adam_step(w, g, state, lr=self.lr)
        self.weights_ = w
        self.classes_ = np.arange(N_CLASSES)
        return self

    def _require_fitted(self) -> mdl.Weights:
        if not hasattr(self, "weights_"):
            raise NotFittedError("EegTransformerClassifier: call fit before predicting")
        return self.weights_

    def decision_function(self, X) -> np.ndarray:
        return mdl.forward(self._require_fitted(), as_feature_array(X))

    def predict_proba(self, X) -> np.ndarray:
        return mdl.softmax(self.decision_function(X), axis=-1)

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X).argmax(axis=-1)


def make_decode_pipeline(
    lo: float = 1.0,
    hi: float = 50.0,
    order: int = 4,
    **classifier_params,
) -> Pipeline:
    """Preprocess -> features -> classifier as one sklearn Pipeline over windows."""
    return Pipeline(
        [
            ("preprocess", EegPreprocessor(lo=lo, hi=hi, order=order)),
            ("features", EegFeatureExtractor()),
            ("classifier", EegTransformerClassifier(**classifier_params)),
        ]
    )
