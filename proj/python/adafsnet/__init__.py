"""Prime-kernel full-scope 1D CNN for time series classification."""

try:
    from ._adafsnet import *  # noqa: F401,F403  (wheel layout)
    from ._adafsnet import __version__  # noqa: F401
except ImportError:
    from _adafsnet import *  # noqa: F401,F403  (build-tree layout)
    from _adafsnet import __version__  # noqa: F401
