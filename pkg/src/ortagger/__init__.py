"""Order-robust sequence tagging: numpy autodiff, order-reduced encoders, CRF and word-order shuffling."""

__version__ = "0.1.0"
