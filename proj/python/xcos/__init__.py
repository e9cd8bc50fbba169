"""Explainable patch-cosine face verification.

The heavy lifting lives in the compiled extension; this package re-exports
the main operations: dataset synthesis, training, scoring with the three
attention variants, calibration, masking, and evaluation helpers.
"""

from xcos._core import (
    Dataset,
    TeacherModel,
    XcosModel,
    apply_mask,
    best_threshold_accuracy,
    calibrate,
    free_form_mask,
    normalize,
    pearson_r,
    synth_dataset,
    train_teacher,
    train_xcos,
    __version__,
)

__all__ = [
    "Dataset",
    "TeacherModel",
    "XcosModel",
    "apply_mask",
    "best_threshold_accuracy",
    "calibrate",
    "free_form_mask",
    "normalize",
    "pearson_r",
    "synth_dataset",
    "train_teacher",
    "train_xcos",
    "__version__",
]
