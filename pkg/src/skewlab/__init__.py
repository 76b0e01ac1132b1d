"""skewlab: transfer-operator experiments for skew products with
uniformly contracting fibers over piecewise expanding circle maps."""

__version__ = "0.1.0"
