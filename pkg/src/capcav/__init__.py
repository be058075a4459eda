"""Design and analysis toolkit for a defect-mode grating cavity on a
three-layer nanocapillary fiber."""

__version__ = "0.1.0"
