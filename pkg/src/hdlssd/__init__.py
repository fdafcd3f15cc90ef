"""Linear discrimination for high-dimension, low-sample-size image data.

Classifiers (DWD, SVM, FLD, MDP, PCA direction) act on rasterized images
stored as the columns of a ``d x n`` matrix, with labels +1 (male) and
-1 (female). See :mod:`hdlssd.cli` for the end-to-end pipeline.
"""

__version__ = "0.1.0"
