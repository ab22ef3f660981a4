"""Tiny import-path model used to exercise --model pkg.module:callable."""

import numpy as np


def uniform_classifier(batch):
    return np.full((len(batch), 3), 1.0 / 3.0)
